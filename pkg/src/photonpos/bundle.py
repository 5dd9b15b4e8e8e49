"""Two-component photon wave functions on ``M = R^3 minus the origin``.

The frame columns ``E1, E2`` of the south and north fields define local
sections ``t_A`` of the photon bundle.  A 3-vector ``psi`` given in the gauge
of a frame field ``G`` is the class of ``(k, E_G, psi)``; in the chart frame
``E_c`` the same class has representative ``E_c E_G^T psi``, and its fibre
components are

    f^A(k) = (E_c_perp^T E_c E_G^T psi)(k).

South and north charts give the same ``f`` on their overlap, so ``f`` is a
global section.  The position operator becomes the Newton-Wigner operator
``i (d/dk_j - k_j / (2 |k|^2))`` and helicity becomes a Pauli matrix.
"""
from __future__ import annotations

from typing import Any

import jax.numpy as jnp
import numpy as np

from ._pytree import pytree, static
from .errors import BasisError, StepError, TransversalityError
from .fields import Section2, WaveField3, sample
from .frames import NORTH, SOUTH, FrameField, as_wavevector
from .operators import ANALYTIC, DiffEngine, Position, _grad_last
from .wavefields import QuadratureGrid, inner_values

BASES = ("cartesian", "polarization")

SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

#: Cartesian components -> polarization components, for t'_{1,2} = (t1 +- i t2)/sqrt 2.
TO_POLARIZATION = np.array([[1, -1j], [1, 1j]], dtype=complex) / np.sqrt(2.0)

_SAFE_SOUTH = np.array([0.0, 0.0, -1.0])
_SAFE_NORTH = np.array([0.0, 0.0, 1.0])


@pytree
class Trivialization:
    """Chart rule over the south/north pair: south for ``k3 < 0``, north otherwise."""

    south: FrameField = SOUTH
    north: FrameField = NORTH

    def chart(self, k) -> str:
        return "south" if float(np.asarray(k)[2]) < 0 else "north"

    def frame(self, chart: str) -> FrameField:
        if chart == "south":
            return self.south
        if chart == "north":
            return self.north
        raise ValueError(f"unknown chart {chart!r}")

    def chart_matrix(self, k):
        """Traced chart frame at ``k``.

        Both branches are evaluated; the unused one is fed a harmless point so
        its derivatives stay finite.
        """
        use_south = k[2] < 0
        Es = self.south.matrix(jnp.where(use_south, k, _SAFE_SOUTH))
        En = self.north.matrix(jnp.where(use_south, _SAFE_NORTH, k))
        return jnp.where(use_south, Es, En)


GLOBAL = Trivialization()


def _gauge_of(psi, gauge):
    gauge = gauge if gauge is not None else getattr(psi, "gauge", None)
    if gauge is None:
        raise ValueError("the field carries no frame gauge; pass gauge= explicitly")
    return gauge


@pytree
class Trivialized(Section2):
    """The global section ``f`` of a 3-vector field given in the gauge of ``frame``."""

    inner: WaveField3
    frame: FrameField
    tr: Trivialization = GLOBAL

    basis = "cartesian"

    def __call__(self, k):
        Ec = self.tr.chart_matrix(k)
        rep = Ec @ (self.frame.matrix(k).T @ self.inner(k))
        return Ec[:, :2].T @ rep


@pytree
class Untrivialized(WaveField3):
    """``E_perp(k) f(k)``: the representative of a section in the gauge of ``frame``."""

    section: Section2
    frame: FrameField

    transversal = True

    @property
    def gauge(self):
        return self.frame

    def __call__(self, k):
        f = _cartesian(self.section)(k)
        return self.frame.matrix(k)[:, :2] @ f


def trivialized(psi: WaveField3, tr: Trivialization = GLOBAL, gauge: FrameField | None = None) -> Trivialized:
    return Trivialized(psi, _gauge_of(psi, gauge), tr)


def trivialize(psi: WaveField3, tr: Trivialization = GLOBAL, k=None, gauge: FrameField | None = None,
               chart: str | None = None, tol: float = 1e-10) -> np.ndarray:
    """Fibre components ``(f^1, f^2)`` of ``psi`` at ``k``."""
    k = as_wavevector(k)
    gauge = _gauge_of(psi, gauge)
    gauge.validate(k)
    chart = chart or tr.chart(k)
    frame = tr.frame(chart)
    frame.validate(k)
    kj = jnp.asarray(k)
    val = np.asarray(psi(kj))
    norm = np.linalg.norm(val)
    if abs(k @ val) > tol * np.linalg.norm(k) * max(norm, 1e-300) and norm > 0:
        raise TransversalityError(f"field is not transversal at {k}")
    Ec = np.asarray(frame.matrix(kj))
    rep = Ec @ (np.asarray(gauge.matrix(kj)).T @ val)
    return Ec[:, :2].T @ rep


def untrivialize(f, tr: Trivialization = GLOBAL, k=None, chart: str | None = None) -> np.ndarray:
    """``E_perp f`` in the frame of the chart containing ``k``."""
    k = as_wavevector(k)
    frame = tr.frame(chart or tr.chart(k))
    frame.validate(k)
    f = np.asarray(f, dtype=complex)
    return np.asarray(frame.matrix(jnp.asarray(k)))[:, :2] @ f


def from_components(section: Section2, ff: FrameField) -> Untrivialized:
    return Untrivialized(section, ff)


# -- Newton-Wigner position -------------------------------------------------

@pytree
class NWPosition(Section2):
    """``i (d/dk_j - k_j / (2|k|^2)) f``."""

    j: int = static()
    inner: Section2 = None
    diff: DiffEngine = ANALYTIC

    @property
    def basis(self):
        return self.inner.basis

    def __call__(self, k):
        df = self.diff.derivative(self.inner, k, self.j)
        return 1j * (df - k[self.j] / (2 * (k @ k)) * self.inner(k))


def nw_position_all(fn, d: DiffEngine = ANALYTIC):
    """``out(k)[j] = i (d_j - k_j/(2|k|^2)) fn(k)`` for ``fn`` of any value shape."""
    def out(k):
        val = fn(k)
        g = _grad_last(fn, k, d)
        return 1j * (g - k.reshape((3,) + (1,) * val.ndim) / (2 * (k @ k)) * val)

    return out


@pytree
class NWPositionAll:
    inner: Section2
    diff: DiffEngine = ANALYTIC

    def __call__(self, k):
        return nw_position_all(self.inner, self.diff)(k)


def nw_position_apply(j: int, f: Section2, k, d: DiffEngine = ANALYTIC) -> np.ndarray:
    k = as_wavevector(k)
    if d.reach(k) >= np.linalg.norm(k):
        raise StepError("difference stencil reaches the origin")
    return np.asarray(NWPosition(j, f, d)(jnp.asarray(k)))


def pullback_consistency(j: int, psi: WaveField3, k, tr: Trivialization = GLOBAL,
                         d: DiffEngine = ANALYTIC, gauge: FrameField | None = None) -> float:
    """``|| f[X_j psi](k) - NW_j f[psi](k) ||``: frame route vs trivialized route."""
    gauge = _gauge_of(psi, gauge)
    k = as_wavevector(k)
    kj = jnp.asarray(k)
    lhs = Trivialized(Position(gauge, j, psi, d), gauge, tr)(kj)
    rhs = NWPosition(j, Trivialized(psi, gauge, tr), d)(kj)
    return float(np.linalg.norm(np.asarray(lhs - rhs)))


# -- helicity and polarization basis ----------------------------------------

def helicity_c2(basis: str = "cartesian") -> np.ndarray:
    if basis == "cartesian":
        return SIGMA2.copy()
    if basis == "polarization":
        return SIGMA3.copy()
    raise BasisError(f"unknown fibre basis {basis!r}")


@pytree
class PolarizationSection(Section2):
    inner: Section2

    basis = "polarization"

    def __call__(self, k):
        return jnp.asarray(TO_POLARIZATION) @ self.inner(k)


@pytree
class CartesianSection(Section2):
    inner: Section2

    basis = "cartesian"

    def __call__(self, k):
        return jnp.asarray(TO_POLARIZATION.conj().T) @ self.inner(k)


def _cartesian(section: Section2) -> Section2:
    return CartesianSection(section) if section.basis == "polarization" else section


def polarization_change(f, basis: str | None = None):
    """Cartesian components -> polarization components.

    Accepts a :class:`Section2` field or a bare 2-vector (``basis`` then
    defaults to cartesian).
    """
    if isinstance(f, Section2):
        if f.basis != "cartesian":
            raise BasisError("section is already in the polarization basis")
        return PolarizationSection(f)
    if (basis or "cartesian") != "cartesian":
        raise BasisError("values are already in the polarization basis")
    return TO_POLARIZATION @ np.asarray(f, dtype=complex)


# -- eigenfunctions ---------------------------------------------------------

@pytree
class EigenC2(Section2):
    """``(1, +-i)/sqrt 2 |k|^{1/2} e^{-ik.X}`` (cartesian) or ``(1,0)/(0,1) ...`` (polarization)."""

    position: Any
    helicity: int = static(default=1)
    basis: str = static(default="cartesian")

    def __call__(self, k):
        amp = (k @ k) ** 0.25 * jnp.exp(-1j * (k @ self.position))
        if self.basis == "cartesian":
            vec = jnp.array([1.0, 1j * self.helicity]) / np.sqrt(2.0)
        else:
            vec = jnp.array([1.0, 0.0]) if self.helicity == 1 else jnp.array([0.0, 1.0])
        return amp * vec.astype(complex)


@pytree
class Eigen3(WaveField3):
    """``(E1 +- i E2)/sqrt 2 |k|^{1/2} e^{-ik.X}`` in the gauge of ``frame``."""

    frame: FrameField
    position: Any
    helicity: int = static(default=1)

    transversal = True

    @property
    def gauge(self):
        return self.frame

    def __call__(self, k):
        E = self.frame.matrix(k)
        pol = (E[:, 0] + 1j * self.helicity * E[:, 1]) / np.sqrt(2.0)
        return (k @ k) ** 0.25 * jnp.exp(-1j * (k @ self.position)) * pol


REPS = ("field3-south", "field3-north", "c2-cartesian", "c2-polarization")


def eigenfunction(X, h: int, rep: str = "c2-cartesian", ff: FrameField | None = None):
    """Simultaneous eigenfunction of position (eigenvalue ``X``) and helicity ``h``.

    ``rep`` is ``"field3"`` (needs ``ff``), ``"field3-south"``, ``"field3-north"``,
    ``"c2-cartesian"`` or ``"c2-polarization"``.
    """
    if h not in (1, -1):
        raise ValueError("helicity must be +1 or -1")
    X = jnp.asarray(X, dtype=float)
    if rep == "field3":
        if ff is None:
            raise ValueError("field3 representation needs a frame field")
        return Eigen3(ff, X, h)
    if rep == "field3-south":
        return Eigen3(SOUTH, X, h)
    if rep == "field3-north":
        return Eigen3(NORTH, X, h)
    if rep in ("c2", "c2-cartesian"):
        return EigenC2(X, h, "cartesian")
    if rep == "c2-polarization":
        return EigenC2(X, h, "polarization")
    raise ValueError(f"unknown representation {rep!r}")


def c2_inner(f: Section2, g: Section2, grid: QuadratureGrid, measure: str = "bb") -> complex:
    """``integral d^3k/|k| f^dagger g`` on the grid."""
    nodes, weights = grid.weights_for(measure)
    return inner_values(sample(f, nodes), sample(g, nodes), weights)
