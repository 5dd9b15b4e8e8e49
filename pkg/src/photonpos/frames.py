"""Orthonormal frame fields on punctured momentum space.

A frame at ``k`` is a right-handed orthonormal triad ``(E1, E2, E3)`` with
``E3 = k/|k|``, stored as the 3x3 matrix ``E`` whose column ``mu`` is ``E_mu``.
No such triad is smooth on a whole sphere, so every frame field here has a
string: the *south* field is singular on the ray ``{(0, 0, k3): k3 >= 0}``,
the *north* field on ``{(0, 0, k3): k3 <= 0}``.

In spherical angles (theta measured from +k3) the two fields are

    south:  E1 = cos(phi) theta_hat + sin(phi) phi_hat
            E2 = -sin(phi) theta_hat + cos(phi) phi_hat
    north:  E1 = cos(phi) theta_hat - sin(phi) phi_hat
            E2 = sin(phi) theta_hat + cos(phi) phi_hat

They are evaluated below in Cartesian form, which has an honest limit on the
good half of the k3 axis and no trigonometric calls.  On the overlap the two
fields differ by an in-plane rotation by ``2 phi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np

from ._pytree import pytree
from .errors import DomainError, InvariantError
from .fields import ScalarField

#: Relative perpendicular distance below which a point counts as "on" a string.
RAY_TOL = 1e-9
ORTHO_TOL = 1e-12

CHARTS = ("south", "north", "custom")


def as_wavevector(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise ValueError(f"wavevector must have shape (3,), got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise DomainError(f"non-finite wavevector {k}")
    if np.linalg.norm(k) == 0.0:
        raise DomainError("the origin is excluded from momentum space")
    return k


def ray_distance(k, sign: int):
    """Distance of ``k`` (shape ``(3,)`` or ``(n, 3)``) to the ray ``{(0,0,t): sign*t >= 0}``."""
    k = np.asarray(k, dtype=float)
    d = np.where(sign * k[..., 2] >= 0, np.hypot(k[..., 0], k[..., 1]), np.linalg.norm(k, axis=-1))
    return float(d) if d.ndim == 0 else d


def on_ray(k, sign: int, tol: float = RAY_TOL):
    k = np.asarray(k, dtype=float)
    hit = ray_distance(k, sign) < tol * np.linalg.norm(k, axis=-1)
    return bool(hit) if np.ndim(hit) == 0 else hit


# -- traced kernels ---------------------------------------------------------

def _unit(k):
    r = jnp.sqrt(k @ k)
    return k / r, r


def _south_matrix(k):
    (x, y, z), _ = _unit(k)
    rho2 = x * x + y * y
    upper = z >= 0
    # 1 - z, written as rho^2 / (1 + z) where the direct form cancels
    w = jnp.where(upper, rho2 / jnp.where(upper, 1.0 + z, 1.0), 1.0 - z)
    e1 = jnp.stack([-1.0 + x * x / w, x * y / w, -x])
    e2 = jnp.stack([-x * y / w, 1.0 - y * y / w, y])
    e3 = jnp.stack([x, y, z])
    return jnp.stack([e1, e2, e3], axis=1)


def _north_matrix(k):
    (x, y, z), _ = _unit(k)
    rho2 = x * x + y * y
    lower = z <= 0
    # 1 + z, written as rho^2 / (1 - z) where the direct form cancels
    w = jnp.where(lower, rho2 / jnp.where(lower, 1.0 - z, 1.0), 1.0 + z)
    e1 = jnp.stack([1.0 - x * x / w, -x * y / w, -x])
    e2 = jnp.stack([-x * y / w, 1.0 - y * y / w, -y])
    e3 = jnp.stack([x, y, z])
    return jnp.stack([e1, e2, e3], axis=1)


def rotation_u(a, b):
    """The in-plane rotation ``U`` with ``E'' = E U``."""
    zero = jnp.zeros_like(a)
    one = jnp.ones_like(a)
    return jnp.stack([
        jnp.stack([a, b, zero]),
        jnp.stack([-b, a, zero]),
        jnp.stack([zero, zero, one]),
    ])


# -- plane rotations --------------------------------------------------------

class PlaneRotation:
    """Field of in-plane rotations ``(a(k), b(k))`` with ``a^2 + b^2 = 1``."""

    def ab(self, k):
        raise NotImplementedError

    def a(self, k):
        return self.ab(k)[0]

    def b(self, k):
        return self.ab(k)[1]

    def u(self, k):
        return rotation_u(*self.ab(k))

    def excluded(self, k) -> bool:
        return False


@pytree
class TransitionRotation(PlaneRotation):
    """South-to-north transition: ``(a, b) = (cos 2phi, sin 2phi)``."""

    def ab(self, k):
        rho2 = k[0] * k[0] + k[1] * k[1]
        return (k[0] * k[0] - k[1] * k[1]) / rho2, 2.0 * k[0] * k[1] / rho2

    def excluded(self, k) -> bool:
        k = np.asarray(k, dtype=float)
        return bool(np.hypot(k[0], k[1]) < RAY_TOL * np.linalg.norm(k))


@pytree
class AngleRotation(PlaneRotation):
    """Rotation by a real gauge angle: ``(a, b) = (cos B, sin B)``."""

    angle: ScalarField

    def ab(self, k):
        beta = self.angle(k)
        return jnp.cos(beta), jnp.sin(beta)

    def excluded(self, k) -> bool:
        return self.angle.excluded(k)


@pytree
class ConstantRotation(PlaneRotation):
    a0: Any
    b0: Any

    def ab(self, k):
        return jnp.asarray(self.a0, dtype=float), jnp.asarray(self.b0, dtype=float)


# -- frame fields -----------------------------------------------------------

class FrameField:
    """Smooth map ``k -> E(k)`` on momentum space minus a string."""

    chart: str = "custom"

    def matrix(self, k):
        """Traced evaluation of ``E(k)``; no domain checks."""
        raise NotImplementedError

    def excluded(self, k) -> bool:
        raise NotImplementedError

    def validate(self, k) -> np.ndarray:
        k = as_wavevector(k)
        if self.excluded(k):
            raise DomainError(f"{k} lies on the string of the {self.chart} frame field")
        return k

    def ray_clearance(self, k) -> float:
        """Distance from ``k`` to the nearest point where the field is singular."""
        raise NotImplementedError

    def __call__(self, k) -> "Frame":
        k = self.validate(k)
        return Frame(np.asarray(self.matrix(jnp.asarray(k))), self.chart, k)


@pytree
class SouthFrame(FrameField):
    chart = "south"

    def matrix(self, k):
        return _south_matrix(k)

    def excluded(self, k) -> bool:
        return on_ray(k, +1)

    def ray_clearance(self, k) -> float:
        return ray_distance(k, +1)


@pytree
class NorthFrame(FrameField):
    chart = "north"

    def matrix(self, k):
        return _north_matrix(k)

    def excluded(self, k) -> bool:
        return on_ray(k, -1)

    def ray_clearance(self, k) -> float:
        return ray_distance(k, -1)


@pytree
class RotatedFrame(FrameField):
    """``E''(k) = E(k) U(k)`` for a base frame field and a rotation field."""

    base: FrameField
    rotation: PlaneRotation

    def matrix(self, k):
        return self.base.matrix(k) @ self.rotation.u(k)

    def excluded(self, k) -> bool:
        return self.base.excluded(k) or self.rotation.excluded(k)

    def ray_clearance(self, k) -> float:
        clear = self.base.ray_clearance(k)
        if isinstance(self.rotation, TransitionRotation):
            k = np.asarray(k, dtype=float)
            clear = min(clear, float(np.hypot(k[0], k[1])))
        return clear


# -- concrete frames --------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """A frame evaluated at one wavevector."""

    E: np.ndarray
    chart: str = "custom"
    k: np.ndarray | None = field(default=None, compare=False)

    def columns(self):
        return self.E[:, 0], self.E[:, 1], self.E[:, 2]

    @property
    def perp(self) -> np.ndarray:
        """The 3x2 block ``(E1 E2)``."""
        return self.E[:, :2]

    def deviations(self) -> dict[str, float]:
        E = self.E
        out = {
            "orthonormality": float(np.max(np.abs(E.T @ E - np.eye(3)))),
            "determinant": float(abs(np.linalg.det(E) - 1.0)),
        }
        if self.k is not None:
            out["direction"] = float(np.max(np.abs(E[:, 2] - self.k / np.linalg.norm(self.k))))
        return out

    def check(self, tol: float = ORTHO_TOL) -> "Frame":
        for name, dev in self.deviations().items():
            if dev > tol:
                raise InvariantError(f"frame {name} deviation {dev:.3e} exceeds {tol:.1e}")
        return self

    def to_json(self) -> dict:
        return {
            "k": None if self.k is None else [float(v) for v in self.k],
            "E": [[float(v) for v in row] for row in self.E],
            "chart": self.chart,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Frame":
        chart = data.get("chart", "custom")
        if chart not in CHARTS:
            raise ValueError(f"unknown chart {chart!r}")
        k = data.get("k")
        return cls(np.asarray(data["E"], dtype=float), chart,
                   None if k is None else np.asarray(k, dtype=float))


SOUTH = SouthFrame()
NORTH = NorthFrame()


def south_frame(k) -> Frame:
    return SOUTH(k)


def north_frame(k) -> Frame:
    return NORTH(k)


def rotate_frame(f: Frame, a: float, b: float, tol: float = 1e-10) -> Frame:
    """Columns ``a E1 - b E2``, ``b E1 + a E2``, ``E3``."""
    if abs(a * a + b * b - 1.0) > tol:
        raise InvariantError(f"a^2 + b^2 = {a * a + b * b!r} is not 1")
    U = np.array([[a, b, 0.0], [-b, a, 0.0], [0.0, 0.0, 1.0]])
    return Frame(f.E @ U, "custom", f.k)


def transition_rotation(k) -> tuple[float, float]:
    """``(a, b)`` taking the south frame at ``k`` to the north frame."""
    k = as_wavevector(k)
    if TransitionRotation().excluded(k):
        raise DomainError(f"{k} lies on the k3 axis, outside the chart overlap")
    a, b = TransitionRotation().ab(jnp.asarray(k))
    return float(a), float(b)


def conjugation_matrix(f: Frame, f2: Frame, tol: float = 1e-10) -> np.ndarray:
    """``V = E'' E^T``: the real orthogonal map between two frame gauges."""
    if np.max(np.abs(f.E[:, 2] - f2.E[:, 2])) > tol:
        raise InvariantError("frames do not share the momentum direction E3")
    if f.k is not None and f2.k is not None and not np.allclose(f.k, f2.k, rtol=0, atol=tol):
        raise InvariantError("frames are attached to different wavevectors")
    return f2.E @ f.E.T


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


# -- gauge one-form ---------------------------------------------------------

def gauge_one_form(rot: PlaneRotation, k, h: float = 1e-5) -> np.ndarray:
    """``a grad(b) - b grad(a)`` by central differences of step ``h``."""
    k = np.asarray(k, dtype=float)
    a0, b0 = (float(v) for v in rot.ab(jnp.asarray(k)))
    out = np.empty(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        ap, bp = (float(v) for v in rot.ab(jnp.asarray(k + e)))
        am, bm = (float(v) for v in rot.ab(jnp.asarray(k - e)))
        out[j] = a0 * (bp - bm) / (2 * h) - b0 * (ap - am) / (2 * h)
    return out


@jax.jit
def _one_form_batch(rot, ks, h):
    def one(k):
        a0, b0 = rot.ab(k)
        eye = jnp.eye(3) * h
        ap, bp = jax.vmap(rot.ab)(k + eye)
        am, bm = jax.vmap(rot.ab)(k - eye)
        return a0 * (bp - bm) / (2 * h) - b0 * (ap - am) / (2 * h)

    return jax.vmap(one)(ks)


def loop_integral(rot: PlaneRotation, path, velocity, n: int = 512, h: float = 1e-5) -> float:
    """Line integral of the gauge one-form over a closed loop.

    ``path(tau)`` and ``velocity(tau)`` map ``tau`` in ``[0, 2 pi)`` to points and
    tangent vectors (arrays of shape ``(n, 3)``).  The integrand is periodic, so
    the trapezoid rule on ``n`` equispaced nodes converges geometrically.
    """
    tau = 2 * np.pi * np.arange(n) / n
    pts = np.asarray(path(tau), dtype=float)
    vel = np.asarray(velocity(tau), dtype=float)
    sigma = np.asarray(_one_form_batch(rot, jnp.asarray(pts), h))
    return float(np.sum(np.einsum("ij,ij->i", sigma, vel)) * (2 * np.pi / n))


def circle(center, radius: float, normal=(0.0, 0.0, 1.0)):
    """``(path, velocity)`` callables for a circle in the plane orthogonal to ``normal``."""
    c = np.asarray(center, dtype=float)
    nrm = np.asarray(normal, dtype=float)
    nrm = nrm / np.linalg.norm(nrm)
    seed = np.array([1.0, 0.0, 0.0]) if abs(nrm[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(nrm, seed)
    u /= np.linalg.norm(u)
    v = np.cross(nrm, u)

    def path(tau):
        return c + radius * (np.cos(tau)[:, None] * u + np.sin(tau)[:, None] * v)

    def velocity(tau):
        return radius * (-np.sin(tau)[:, None] * u + np.cos(tau)[:, None] * v)

    return path, velocity
