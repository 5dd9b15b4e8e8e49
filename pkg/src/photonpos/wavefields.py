"""Photon wave functions in momentum space and their scalar product.

The scalar product uses the measure ``d^3k / |k|``:

    <phi | psi> = integral d^3k / |k|  phi(k)^dagger psi(k),

evaluated on a spherical product grid (mapped Gauss-Legendre in ``r``,
Gauss-Legendre in ``cos theta``, trapezoid in ``phi``).  The grid's polar axis
may be tilted toward the region where the integrand lives; the measure is
rotation invariant so this changes only the node placement.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import jax.numpy as jnp
import numpy as np
from scipy.special import erf

from ._pytree import pytree
from .errors import ConfigError, ConvergenceError, DomainError, TransversalityError
from .fields import Scaled3, WaveField3, sample
from .frames import FrameField, as_wavevector
from .operators import MatrixMul, sigma_squared

MEASURES = ("bb", "d3k")


# -- test families ----------------------------------------------------------

def packet_norm(center, width) -> float:
    """Normalization constant of ``exp(-|k - K0|^2 / (2 s^2))`` times a unit polarization.

    Uses the closed form ``integral d^3k exp(-|k-K0|^2/s^2) / |k| = pi^{3/2} s^3 erf(|K0|/s) / |K0|``.
    """
    kc = float(np.linalg.norm(center))
    integral = np.pi ** 1.5 * width ** 3 * erf(kc / width) / kc
    return float(1.0 / np.sqrt(integral))


@pytree
class GaussianPacket(WaveField3):
    """``N exp(-|k-K0|^2/(2s^2)) exp(-i k.X0) (E1 + i h E2)/sqrt 2`` in the gauge of ``frame``."""

    frame: FrameField
    center: Any
    width: Any
    helicity: Any
    phase_center: Any
    norm: Any

    transversal = True

    @property
    def gauge(self):
        return self.frame

    def envelope(self, k):
        d = k - self.center
        return self.norm * jnp.exp(-0.5 * (d @ d) / self.width ** 2 - 1j * (k @ self.phase_center))

    def __call__(self, k):
        E = self.frame.matrix(k)
        pol = (E[:, 0] + 1j * self.helicity * E[:, 1]) / np.sqrt(2.0)
        return self.envelope(k) * pol


def _check_support(ff, center, width, support):
    clearance = ff.ray_clearance(center)
    if clearance <= support * width:
        raise DomainError(
            f"packet support of radius {support}*{width} around {center} reaches the "
            f"{ff.chart} frame string (clearance {clearance:.3g})")
    if np.linalg.norm(center) <= support * width:
        raise DomainError("packet support reaches the origin")


def gaussian_packet(center, width: float, helicity: int, ff: FrameField, phase_center=(0.0, 0.0, 0.0),
                    support: float = 6.0) -> GaussianPacket:
    center = as_wavevector(center)
    if width <= 0:
        raise ValueError("packet width must be positive")
    if helicity not in (1, -1):
        raise ValueError("helicity must be +1 or -1")
    _check_support(ff, center, width, support)
    return GaussianPacket(ff, jnp.asarray(center), float(width), float(helicity),
                          jnp.asarray(phase_center, dtype=float), packet_norm(center, width))


@pytree
class PolarizedPacket(WaveField3):
    """``exp(-|k-K0|^2/(2s^2)) exp(-i k.X0) Sigma^2(k) eps``: frame-free transversal field."""

    center: Any
    width: Any
    polarization: Any
    phase_center: Any
    norm: Any = 1.0

    transversal = True

    def __call__(self, k):
        d = k - self.center
        env = self.norm * jnp.exp(-0.5 * (d @ d) / self.width ** 2 - 1j * (k @ self.phase_center))
        return env * (sigma_squared(k) @ self.polarization)


def polarized_packet(center, width: float, polarization, phase_center=(0.0, 0.0, 0.0),
                     support: float = 6.0) -> PolarizedPacket:
    center = as_wavevector(center)
    if np.linalg.norm(center) <= support * width:
        raise DomainError("packet support reaches the origin")
    pol = np.asarray(polarization, dtype=complex)
    # transverse part has norm ~ |pol| near the center
    norm = packet_norm(center, width) / np.linalg.norm(pol)
    return PolarizedPacket(jnp.asarray(center), float(width), jnp.asarray(pol),
                           jnp.asarray(phase_center, dtype=float), norm)


@pytree
class ConstantField(WaveField3):
    value: Any

    def __call__(self, k):
        return jnp.asarray(self.value, dtype=complex) + 0.0 * k[0]


@pytree
class RadialField(WaveField3):
    """``psi(k) = k``: purely longitudinal."""

    def __call__(self, k):
        return k.astype(complex)


def transversal_project(phi: WaveField3) -> WaveField3:
    """``k -> Sigma^2(k) phi(k)``."""
    return MatrixMul("sigma2", phi)


def check_transversal(psi: WaveField3, ks, tol: float = 1e-12) -> float:
    """Largest ``|k . psi(k)| / (|k| |psi(k)|)`` over ``ks``; raises above ``tol``."""
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    vals = sample(psi, ks)
    num = np.abs(np.einsum("ij,ij->i", ks, vals))
    den = np.linalg.norm(ks, axis=1) * np.linalg.norm(vals, axis=1)
    ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    worst = float(ratio.max(initial=0.0))
    if worst > tol:
        raise TransversalityError(f"field has longitudinal part {worst:.3e} > {tol:.1e}")
    return worst


# -- quadrature -------------------------------------------------------------

def _align(axis) -> np.ndarray:
    """Rotation taking +k3 onto ``axis``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    c = float(n @ z)
    v = np.cross(z, n)
    s = np.linalg.norm(v)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]]) / s
    return np.eye(3) + s * K + (1 - c) * (K @ K)


@dataclass(frozen=True)
class QuadratureGrid:
    """Spherical product grid on ``(0, inf) x S^2`` with ``r = r0 t / (1 - t)``."""

    Nr: int = 128
    Ntheta: int = 64
    Nphi: int = 16
    r0: float = 2.0
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        for name in ("Nr", "Ntheta", "Nphi"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.r0 <= 0:
            raise ConfigError("r0 must be positive")

    @property
    def size(self) -> int:
        return self.Nr * self.Ntheta * self.Nphi

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``(n, 3)`` and ``d^3k`` weights ``(n,)`` in (r, theta, phi) C order."""
        if self.size == 0:
            return np.zeros((0, 3)), np.zeros(0)
        x, w = np.polynomial.legendre.leggauss(self.Nr)
        t = 0.5 * (x + 1.0)
        r = self.r0 * t / (1.0 - t)
        wr = 0.5 * w * self.r0 / (1.0 - t) ** 2 * r ** 2
        mu, wmu = np.polynomial.legendre.leggauss(self.Ntheta)
        phi = 2 * np.pi * np.arange(self.Nphi) / self.Nphi
        wphi = 2 * np.pi / self.Nphi
        st = np.sqrt(1.0 - mu ** 2)
        unit = np.stack([
            st[:, None] * np.cos(phi)[None, :],
            st[:, None] * np.sin(phi)[None, :],
            np.broadcast_to(mu[:, None], (self.Ntheta, self.Nphi)),
        ], axis=-1)
        unit = unit @ _align(self.axis).T
        nodes = r[:, None, None, None] * unit[None]
        weights = wr[:, None, None] * wmu[None, :, None] * wphi
        weights = np.broadcast_to(weights, (self.Nr, self.Ntheta, self.Nphi))
        return nodes.reshape(-1, 3), np.ascontiguousarray(weights).reshape(-1)

    def weights_for(self, measure: str = "bb") -> tuple[np.ndarray, np.ndarray]:
        nodes, w = self.nodes_and_weights()
        if measure == "bb":
            return nodes, w / np.linalg.norm(nodes, axis=1)
        if measure == "d3k":
            return nodes, w
        raise ConfigError(f"unknown measure {measure!r}")

    def refined(self, factor: int = 2) -> "QuadratureGrid":
        return replace(self, Nr=self.Nr * factor, Ntheta=self.Ntheta * factor, Nphi=self.Nphi * factor)

    def radially_refined(self, factor: int = 2) -> "QuadratureGrid":
        return replace(self, Nr=self.Nr * factor)

    def for_packets(self, *packets) -> "QuadratureGrid":
        """Grid with ``r0 = |K0| + 3 s`` and the polar axis through the mean packet center."""
        centers = np.array([np.asarray(p.center) for p in packets])
        widths = np.array([float(p.width) for p in packets])
        mean = centers.mean(axis=0)
        r0 = float(np.linalg.norm(mean) + 3 * widths.max())
        return replace(self, r0=r0, axis=tuple(float(v) for v in mean / np.linalg.norm(mean)))

    def to_json(self) -> dict:
        return {"Nr": self.Nr, "Ntheta": self.Ntheta, "Nphi": self.Nphi, "r0": self.r0,
                "axis": list(self.axis)}

    @classmethod
    def from_json(cls, data: dict) -> "QuadratureGrid":
        if not isinstance(data, dict):
            raise ConfigError("grid spec must be a JSON object")
        unknown = set(data) - {"Nr", "Ntheta", "Nphi", "r0", "axis"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        try:
            kw = {k: int(data[k]) for k in ("Nr", "Ntheta", "Nphi") if k in data}
            if "r0" in data:
                kw["r0"] = float(data["r0"])
            if "axis" in data:
                kw["axis"] = tuple(float(v) for v in data["axis"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid spec: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "QuadratureGrid":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read grid spec {path}: {exc}") from exc
        return cls.from_json(data)


def inner_values(phi_vals, psi_vals, weights) -> complex:
    """Fixed-order weighted sum of ``phi^dagger psi`` over sampled nodes."""
    dens = np.sum(np.conj(phi_vals) * psi_vals, axis=-1)
    return complex(np.sum(weights * dens))


def bb_inner(phi: WaveField3, psi: WaveField3, grid: QuadratureGrid, measure: str = "bb",
             tol: float | None = None) -> complex:
    """Quadrature of ``<phi|psi>``; with ``tol`` the radial resolution is doubled and compared."""
    nodes, weights = grid.weights_for(measure)
    val = inner_values(sample(phi, nodes), sample(psi, nodes), weights)
    if tol is not None:
        fine = bb_inner(phi, psi, grid.radially_refined(2), measure)
        if abs(fine - val) > tol:
            raise ConvergenceError(
                f"doubling Nr changed the scalar product by {abs(fine - val):.3e} > {tol:.1e}")
    return val


def bb_norm(psi: WaveField3, grid: QuadratureGrid, measure: str = "bb") -> float:
    return float(np.sqrt(bb_inner(psi, psi, grid, measure).real))


def normalized(psi: WaveField3, grid: QuadratureGrid, measure: str = "bb") -> WaveField3:
    return Scaled3(1.0 / bb_norm(psi, grid, measure), psi)


# -- export -----------------------------------------------------------------

FIELD3_COLUMNS = ["k1", "k2", "k3", "re1", "im1", "re2", "im2", "re3", "im3"]


def write_rows(header, rows, out) -> None:
    own = isinstance(out, (str, Path))
    fh = open(out, "w", newline="") if own else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def complex_columns(ks, vals) -> np.ndarray:
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    vals = np.asarray(vals, dtype=complex)
    vals = vals.reshape(len(ks), int(np.prod(vals.shape[1:])))
    parts = np.empty((len(ks), 2 * vals.shape[1]))
    parts[:, 0::2] = vals.real
    parts[:, 1::2] = vals.imag
    return np.hstack([ks, parts])


def export_csv(psi: WaveField3, ks, out) -> None:
    """Sampled field as CSV with columns ``k1,k2,k3,re1,im1,re2,im2,re3,im3``."""
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    write_rows(FIELD3_COLUMNS, complex_columns(ks, sample(psi, ks)), out)


def export_csv_text(psi: WaveField3, ks) -> str:
    buf = io.StringIO()
    export_csv(psi, ks, buf)
    return buf.getvalue()
