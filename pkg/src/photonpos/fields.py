"""Field base classes and batched evaluation.

Every field is an immutable pytree whose ``__call__`` maps one wavevector
(shape ``(3,)``) to a value using jax.numpy only, so fields compose,
differentiate exactly under forward-mode autodiff, and can be evaluated on
many points at once with :func:`sample`.
"""
from __future__ import annotations

import types
from functools import partial
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np

from ._pytree import pytree, static


@jax.jit
def _sample(fn, ks):
    return jax.vmap(fn)(ks)


@partial(jax.jit, static_argnums=0)
def _sample_static(fn, ks):
    return jax.vmap(fn)(ks)


def sample(fn, ks) -> np.ndarray:
    """Evaluate a field pytree (or a traceable function) on an ``(n, 3)`` array of wavevectors."""
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    if ks.shape[0] == 0:
        out = jax.eval_shape(fn, jax.ShapeDtypeStruct((3,), jnp.float64))
        return np.zeros((0,) + out.shape, dtype=out.dtype)
    if isinstance(fn, (types.FunctionType, types.MethodType)):
        # plain functions and bound methods are jit keys, not pytrees
        return np.asarray(_sample_static(fn, jnp.asarray(ks)))
    return np.asarray(_sample(fn, jnp.asarray(ks)))


# -- scalar fields ----------------------------------------------------------

class ScalarField:
    """Real scalar function on momentum space."""

    def __call__(self, k):
        raise NotImplementedError

    def grad(self, k):
        return jax.grad(self.__call__)(k)

    def excluded(self, k) -> bool:
        return False


@pytree
class ZeroScalar(ScalarField):
    def __call__(self, k):
        return jnp.zeros((), dtype=k.dtype)


@pytree
class LinearScalar(ScalarField):
    """``b . k + c``."""

    b: Any
    c: Any = 0.0

    def __call__(self, k):
        return jnp.asarray(self.b) @ k + self.c


@pytree
class GaussianBumps(ScalarField):
    """Sum of isotropic Gaussian bumps ``sum_i a_i exp(-|k - m_i|^2 / (2 w_i^2))``."""

    centers: Any
    widths: Any
    amplitudes: Any

    def __call__(self, k):
        d2 = jnp.sum((k - self.centers) ** 2, axis=-1)
        return jnp.sum(self.amplitudes * jnp.exp(-0.5 * d2 / self.widths ** 2))

    @classmethod
    def random(cls, rng: np.random.Generator, n: int = 3, scale: float = 2.0) -> "GaussianBumps":
        return cls(
            centers=jnp.asarray(rng.uniform(-scale, scale, size=(n, 3))),
            widths=jnp.asarray(rng.uniform(0.5, 1.5, size=n)),
            amplitudes=jnp.asarray(rng.normal(size=n)),
        )


@pytree
class AzimuthalAngle(ScalarField):
    """``winding * atan2(k2, k1)``: smooth only on a cut plane around the k3 axis."""

    winding: int = static(default=1)

    def __call__(self, k):
        return self.winding * jnp.arctan2(k[1], k[0])

    def excluded(self, k) -> bool:
        k = np.asarray(k, dtype=float)
        return bool(np.hypot(k[0], k[1]) < 1e-9 * np.linalg.norm(k))


@pytree
class SumScalar(ScalarField):
    first: ScalarField
    second: ScalarField

    def __call__(self, k):
        return self.first(k) + self.second(k)


# -- vector fields ----------------------------------------------------------

class WaveField3:
    """Complex 3-vector field ``k -> psi(k)``.

    ``gauge`` names the frame field relative to which the 3-vector is a
    representative of a photon state, or ``None`` when no frame is attached.
    ``transversal`` is a claim, checked by :func:`photonpos.wavefields.check_transversal`.
    """

    transversal: bool = False
    gauge: Any = None

    def __call__(self, k):
        raise NotImplementedError

    def jacobian(self, k):
        """``J[i, j] = d psi_i / d k_j`` by forward-mode autodiff."""
        return jax.jacfwd(self.__call__)(k)


class Section2:
    """Complex 2-vector field on punctured momentum space.

    ``basis`` is ``"cartesian"`` (components against the real sections
    ``t_A``) or ``"polarization"`` (components against ``(t1 +- i t2)/sqrt 2``).
    """

    basis: str = "cartesian"

    def __call__(self, k):
        raise NotImplementedError

    def jacobian(self, k):
        return jax.jacfwd(self.__call__)(k)


@pytree
class Sum3(WaveField3):
    first: WaveField3
    second: WaveField3

    def __call__(self, k):
        return self.first(k) + self.second(k)

    @property
    def transversal(self):
        return self.first.transversal and self.second.transversal

    @property
    def gauge(self):
        return self.first.gauge if self.first.gauge == self.second.gauge else None


@pytree
class Scaled3(WaveField3):
    """``c * psi`` for a complex constant ``c``."""

    factor: Any
    inner: WaveField3

    def __call__(self, k):
        return self.factor * self.inner(k)

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.inner.gauge


@pytree
class Diff3(WaveField3):
    first: WaveField3
    second: WaveField3

    def __call__(self, k):
        return self.first(k) - self.second(k)


@pytree
class Sum2(Section2):
    first: Section2
    second: Section2

    def __call__(self, k):
        return self.first(k) + self.second(k)

    @property
    def basis(self):
        return self.first.basis


@pytree
class Diff2(Section2):
    first: Section2
    second: Section2

    def __call__(self, k):
        return self.first(k) - self.second(k)

    @property
    def basis(self):
        return self.first.basis


@pytree
class Lambda3(WaveField3):
    """Wrap a jax-traceable function (static, so one compile per function)."""

    fn: Any = static()
    transversal: bool = static(default=False)
    gauge: Any = static(default=None)

    def __call__(self, k):
        return jnp.asarray(self.fn(k), dtype=complex)


@pytree
class Lambda2(Section2):
    fn: Any = static()
    basis: str = static(default="cartesian")

    def __call__(self, k):
        return jnp.asarray(self.fn(k), dtype=complex)
