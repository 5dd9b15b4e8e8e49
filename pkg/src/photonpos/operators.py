"""Spin algebra, helicity, and the frame-based photon position operator.

The position operator attached to a frame field ``E`` acts on 3-vector fields as

    (X_j psi)(k) = i |k|^{1/2} E(k) d/dk_j [ |k|^{-1/2} E(k)^T psi(k) ].

Operators are lazy: applying one to a field returns another field, so
commutators such as ``X_j X_l psi - X_l X_j psi`` are just nested fields and,
in analytic mode, are differentiated exactly by forward-mode autodiff.
"""
from __future__ import annotations

from typing import Any, NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from ._pytree import pytree, static
from .errors import StepError
from .fields import ScalarField, WaveField3, ZeroScalar
from .frames import FrameField, as_wavevector

MODES = ("analytic", "fd", "richardson")


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


LEVI_CIVITA = _levi_civita()

_SPIN = np.array([
    [[0, 0, 0], [0, 0, -1j], [0, 1j, 0]],
    [[0, 0, 1j], [0, 0, 0], [-1j, 0, 0]],
    [[0, -1j, 0], [1j, 0, 0], [0, 0, 0]],
], dtype=complex)


class SpinTriple(NamedTuple):
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray


def spin_matrices() -> SpinTriple:
    """Spin-1 matrices in the Cartesian (adjoint) representation, ``(S_j)_{lm} = -i eps_{jlm}``."""
    return SpinTriple(*(s.copy() for s in _SPIN))


# -- helicity ---------------------------------------------------------------

def helicity_matrix(k):
    """``Sigma = k . S / |k|`` (traced)."""
    r = jnp.sqrt(k @ k)
    zero = jnp.zeros_like(r)
    m = jnp.stack([
        jnp.stack([zero, -k[2], k[1]]),
        jnp.stack([k[2], zero, -k[0]]),
        jnp.stack([-k[1], k[0], zero]),
    ])
    return 1j * m / r


def sigma_squared(k):
    """``Sigma^2 = 1 - k k^T / |k|^2``: projector onto the plane orthogonal to ``k``."""
    return jnp.eye(3) - jnp.outer(k, k) / (k @ k)


def helicity(k) -> np.ndarray:
    k = as_wavevector(k)
    return np.asarray(helicity_matrix(jnp.asarray(k)))


def helicity_projectors(k) -> tuple[np.ndarray, np.ndarray]:
    """``(Pi_+, Pi_-)`` with ``Pi_+- = (Sigma^2 +- Sigma) / 2``."""
    k = as_wavevector(k)
    sig = helicity(k)
    sig2 = np.asarray(sigma_squared(jnp.asarray(k)))
    return (sig2 + sig) / 2, (sig2 - sig) / 2


# -- differentiation --------------------------------------------------------

@pytree
class DiffEngine:
    """Partial derivatives of traced functions of ``k``.

    ``analytic`` is forward-mode autodiff (exact to rounding).  ``fd`` is the
    central difference with step ``h``; ``richardson`` extrapolates central
    differences at ``h, h/2, ..., h/2^(levels-1)``.  With ``h=None`` the step
    is ``1e-5 * max(1, |k|)``.
    """

    mode: str = static(default="analytic")
    h: Any = None
    levels: int = static(default=2)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown differentiation mode {self.mode!r}")

    def step(self, k):
        if self.h is None:
            return 1e-5 * jnp.maximum(1.0, jnp.sqrt(k @ k))
        return jnp.asarray(self.h, dtype=k.dtype)

    def reach(self, k) -> float:
        """Largest stencil offset used at ``k`` (0 in analytic mode)."""
        if self.mode == "analytic":
            return 0.0
        return float(self.step(jnp.asarray(k, dtype=float)))

    def derivative(self, fn, k, j: int):
        e = jnp.zeros(3, dtype=k.dtype).at[j].set(1.0)
        if self.mode == "analytic":
            return jax.jvp(fn, (k,), (e,))[1]
        h = self.step(k)

        def central(step):
            return (fn(k + step * e) - fn(k - step * e)) / (2 * step)

        if self.mode == "fd":
            return central(h)
        table = [central(h / 2 ** i) for i in range(self.levels)]
        for m in range(1, self.levels):
            f = 4.0 ** m
            table = [(f * table[i + 1] - table[i]) / (f - 1) for i in range(len(table) - 1)]
        return table[0]

    def gradient(self, fn, k):
        return jnp.stack([self.derivative(fn, k, j) for j in range(3)], axis=-1)


ANALYTIC = DiffEngine()


def differentiate(d: DiffEngine, field, k, j: int) -> np.ndarray:
    """``d field / d k_j`` at a concrete point."""
    k = np.asarray(k, dtype=float)
    val = np.asarray(d.derivative(field, jnp.asarray(k), j))
    if not np.all(np.isfinite(val)):
        raise StepError(f"derivative at {k} is not finite; the stencil may cross a singularity")
    return val


# -- operator fields --------------------------------------------------------

@pytree
class Position(WaveField3):
    """``X_j psi`` for the frame field ``frame``."""

    frame: FrameField
    j: int = static()
    inner: WaveField3 = None
    diff: DiffEngine = ANALYTIC

    def __call__(self, k):
        E = self.frame.matrix(k)

        def reduced(q):
            return (q @ q) ** -0.25 * (self.frame.matrix(q).T @ self.inner(q))

        return 1j * (k @ k) ** 0.25 * (E @ self.diff.derivative(reduced, k, self.j))

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.frame


def _grad_last(fn, k, d: DiffEngine):
    """Derivatives of ``fn`` with the derivative index moved to the front."""
    g = jax.jacfwd(fn)(k) if d.mode == "analytic" else d.gradient(fn, k)
    return jnp.moveaxis(g, -1, 0)


def position_all(ff: FrameField, fn, d: DiffEngine = ANALYTIC):
    """All components at once: ``out(k)[j] = (X_j fn)(k)``.

    ``fn`` may return an array of shape ``(..., 3)``; the operator acts on the
    last (vector) axis and leading axes ride along, so nested applications
    such as ``position_all(ff, position_all(ff, psi))`` give ``X_j X_l psi`` at
    index ``[j, l]`` from one Jacobian per level.
    """
    def out(k):
        def reduced(q):
            return (q @ q) ** -0.25 * (fn(q) @ ff.matrix(q))

        g = _grad_last(reduced, k, d)
        return 1j * (k @ k) ** 0.25 * (g @ ff.matrix(k).T)

    return out


def gauged_position_all(ff: FrameField, g: "GaugeData", fn, d: DiffEngine = ANALYTIC):
    """All components of the gauged operator, with the same shape convention as :func:`position_all`."""
    def shifted(q):
        return jnp.exp(-1j * g.F(q)) * fn(q)

    base = position_all(ff, shifted, d)

    def out(k):
        val = fn(k)
        sig = helicity_matrix(k)
        proj = (sigma_squared(k) - jnp.eye(3)).astype(complex)
        grads = [_grad_last(s, k, d) for s in (g.A, g.B, g.C)]
        sig_val = val @ sig.T
        proj_val = val @ proj.T
        shape = (3,) + (1,) * val.ndim
        return (jnp.exp(1j * g.F(k)) * base(k) + grads[0].reshape(shape) * val
                + grads[1].reshape(shape) * sig_val + grads[2].reshape(shape) * proj_val)

    return out


@pytree
class PositionAll:
    """All three components at once: row ``j`` of the result is ``(X_j psi)(k)``."""

    frame: FrameField
    inner: WaveField3
    diff: DiffEngine = ANALYTIC

    def __call__(self, k):
        return position_all(self.frame, self.inner, self.diff)(k)


@pytree
class KMul(WaveField3):
    """Multiplication by the wavevector component ``k_l``."""

    l: int = static()
    inner: WaveField3 = None

    def __call__(self, k):
        return k[self.l] * self.inner(k)

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.inner.gauge


@pytree
class MatrixMul(WaveField3):
    """Pointwise multiplication by ``Sigma``, ``Sigma^2``, ``Sigma^2 - 1`` or a spin matrix."""

    kind: str = static()
    inner: WaveField3 = None
    l: int = static(default=0)

    def matrix(self, k):
        if self.kind == "sigma":
            return helicity_matrix(k)
        if self.kind == "sigma2":
            return sigma_squared(k).astype(complex)
        if self.kind == "sigma2-1":
            return (sigma_squared(k) - jnp.eye(3)).astype(complex)
        if self.kind == "spin":
            return jnp.asarray(_SPIN[self.l])
        raise ValueError(f"unknown matrix kind {self.kind!r}")

    def __call__(self, k):
        return self.matrix(k) @ self.inner(k)

    @property
    def transversal(self):
        if self.kind == "sigma2":
            return True
        return self.kind in ("sigma", "sigma2-1") and self.inner.transversal

    @property
    def gauge(self):
        return self.inner.gauge


def sigma(psi: WaveField3) -> MatrixMul:
    return MatrixMul("sigma", psi)


def spin(l: int, psi: WaveField3) -> MatrixMul:
    return MatrixMul("spin", psi, l)


@pytree
class FrameTransport(WaveField3):
    """``V(k) psi(k)`` with ``V = E_target E_source^T``: change of frame gauge."""

    source: FrameField
    target: FrameField
    inner: WaveField3 = None

    def __call__(self, k):
        V = self.target.matrix(k) @ self.source.matrix(k).T
        return V @ self.inner(k)

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.target


@pytree
class PhaseMul(WaveField3):
    """``exp(i sign F(k)) psi(k)`` for a real scalar ``F``."""

    phase: ScalarField
    inner: WaveField3 = None
    sign: int = static(default=1)

    def __call__(self, k):
        return jnp.exp(1j * self.sign * self.phase(k)) * self.inner(k)

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.inner.gauge


@pytree
class GaugeData:
    """Real gauge functions ``A, B, C, F`` of a general position operator.

    The operator built from them is

        X'_j = exp(iF) X_j exp(-iF) + dA/dk_j + (dB/dk_j) Sigma + (dC/dk_j)(Sigma^2 - 1).

    With ``F = 0`` and ``A -> A + C`` this is the additive form
    ``X_j + dA/dk_j + (dB/dk_j) Sigma + (dC/dk_j) Sigma^2``.
    """

    A: ScalarField = ZeroScalar()
    B: ScalarField = ZeroScalar()
    C: ScalarField = ZeroScalar()
    F: ScalarField = ZeroScalar()


@pytree
class GaugedPosition(WaveField3):
    frame: FrameField
    j: int = static()
    inner: WaveField3 = None
    diff: DiffEngine = ANALYTIC
    gauge_data: GaugeData = GaugeData()

    def __call__(self, k):
        g = self.gauge_data
        psi = self.inner(k)
        dphase = Position(self.frame, self.j, PhaseMul(g.F, self.inner, -1), self.diff)(k)
        out = jnp.exp(1j * g.F(k)) * dphase
        dA = self.diff.derivative(g.A, k, self.j)
        dB = self.diff.derivative(g.B, k, self.j)
        dC = self.diff.derivative(g.C, k, self.j)
        return (out + dA * psi + dB * (helicity_matrix(k) @ psi)
                + dC * ((sigma_squared(k) - jnp.eye(3)) @ psi))

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.frame


def orbital(frame: FrameField, l: int, psi: WaveField3, d: DiffEngine = ANALYTIC) -> WaveField3:
    """``L_l psi = eps_{lmn} X_m (k_n psi)``."""
    from .fields import Diff3

    m, n = (l + 1) % 3, (l + 2) % 3
    return Diff3(Position(frame, m, KMul(n, psi), d), Position(frame, n, KMul(m, psi), d))


def commutator(op_a, op_b, psi: WaveField3) -> WaveField3:
    """``[A, B] psi`` for operators given as callables ``field -> field``."""
    from .fields import Diff3

    return Diff3(op_a(op_b(psi)), op_b(op_a(psi)))


# -- pointwise entry points -------------------------------------------------

def _check_point(ff: FrameField, k, d: DiffEngine, depth: int = 1) -> np.ndarray:
    k = ff.validate(k)
    reach = depth * d.reach(k)
    if reach > 0 and ff.ray_clearance(k) <= reach:
        raise StepError(f"difference stencil of reach {reach:.2e} at {k} crosses the frame string")
    return k


def _finite(val, k) -> np.ndarray:
    val = np.asarray(val)
    if not np.all(np.isfinite(val)):
        raise StepError(f"operator value at {k} is not finite")
    return val


def position_apply(ff: FrameField, j: int, psi: WaveField3, k, d: DiffEngine = ANALYTIC) -> np.ndarray:
    k = _check_point(ff, k, d)
    return _finite(Position(ff, j, psi, d)(jnp.asarray(k)), k)


def gauged_position_apply(ff: FrameField, j: int, psi: WaveField3, k, d: DiffEngine = ANALYTIC,
                          g: GaugeData = GaugeData()) -> np.ndarray:
    k = _check_point(ff, k, d)
    return _finite(GaugedPosition(ff, j, psi, d, g)(jnp.asarray(k)), k)


def matrix_to_json(m) -> list:
    """Complex matrix as nested ``[re, im]`` pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
