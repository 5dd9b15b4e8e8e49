"""Free evolution and position expectations.

The Hamiltonian ``H = c |k|`` is diagonal in momentum space, so evolution is
the exact phase ``exp(-i c |k| t)`` and never time-stepped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import jax.numpy as jnp
import numpy as np

from ._pytree import pytree
from .bundle import NWPositionAll, Trivialization, Trivialized
from .errors import HermiticityError, StepError
from .fields import Section2, WaveField3, sample
from .operators import ANALYTIC, DiffEngine, PositionAll
from .wavefields import QuadratureGrid

IMAG_TOL = 1e-6


@dataclass(frozen=True)
class EvolutionParams:
    """Speed of light ``c`` (1 in natural units) and time ``t``."""

    c: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("time must be finite")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("c must be positive")


def _phase(k, c, t):
    return jnp.exp(-1j * c * t * jnp.sqrt(k @ k))


@pytree
class Evolved3(WaveField3):
    inner: WaveField3
    c: Any = 1.0
    t: Any = 0.0

    def __call__(self, k):
        return _phase(k, self.c, self.t) * self.inner(k)

    @property
    def transversal(self):
        return self.inner.transversal

    @property
    def gauge(self):
        return self.inner.gauge


@pytree
class Evolved2(Section2):
    inner: Section2
    c: Any = 1.0
    t: Any = 0.0

    def __call__(self, k):
        return _phase(k, self.c, self.t) * self.inner(k)

    @property
    def basis(self):
        return self.inner.basis


def evolve(psi, p: EvolutionParams):
    """``k -> exp(-i c |k| t) psi(k)`` for a 3-vector field or a section."""
    if isinstance(psi, (Evolved3, Evolved2)) and psi.c == p.c:
        # compose phases exactly: one exponential of the summed time
        return type(psi)(psi.inner, p.c, psi.t + p.t)
    if isinstance(psi, Section2):
        return Evolved2(psi, p.c, p.t)
    return Evolved3(psi, p.c, p.t)


def _real(vec, label: str) -> np.ndarray:
    vec = np.asarray(vec)
    worst = float(np.abs(vec.imag).max(initial=0.0))
    if worst > IMAG_TOL:
        raise HermiticityError(f"{label} has imaginary part {worst:.3e} > {IMAG_TOL:.0e}")
    return vec.real.copy()


def expectation_position(psi, grid: QuadratureGrid, tr: Trivialization | None = None,
                         d: DiffEngine = ANALYTIC, measure: str = "bb") -> np.ndarray:
    """``<psi|X|psi> / <psi|psi>`` by quadrature.

    Sections use the Newton-Wigner operator.  Three-vector fields use the frame
    operator of their gauge, or, when ``tr`` is given, are trivialized first
    and take the section route.
    """
    if isinstance(psi, WaveField3) and tr is not None:
        psi = Trivialized(psi, psi.gauge, tr)
    if isinstance(psi, Section2):
        op = NWPositionAll(psi, d)
    else:
        if psi.gauge is None:
            raise ValueError("the field carries no frame gauge")
        op = PositionAll(psi.gauge, psi, d)
    nodes, weights = grid.weights_for(measure)
    vals = sample(psi, nodes)
    xvals = sample(op, nodes)
    if not np.all(np.isfinite(xvals)):
        raise StepError("position operator is not finite at some grid node")
    norm = float(np.sum(weights * np.sum(np.abs(vals) ** 2, axis=-1)))
    num = np.einsum("n,ni,nji->j", weights, np.conj(vals), xvals)
    return _real(num / norm, "position expectation")


def mean_direction(psi, grid: QuadratureGrid, measure: str = "bb") -> np.ndarray:
    """``<psi| k/|k| |psi> / <psi|psi>``."""
    nodes, weights = grid.weights_for(measure)
    dens = weights * np.sum(np.abs(sample(psi, nodes)) ** 2, axis=-1)
    unit = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    return dens @ unit / dens.sum()


def velocity_check(psi, grid: QuadratureGrid, tr: Trivialization | None = None, dt: float = 1e-2,
                   p: EvolutionParams = EvolutionParams(), d: DiffEngine = ANALYTIC
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Centred difference of ``<X>`` around ``p.t`` against ``c <k/|k|>``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    fwd = expectation_position(evolve(psi, EvolutionParams(p.c, p.t + dt)), grid, tr, d)
    bwd = expectation_position(evolve(psi, EvolutionParams(p.c, p.t - dt)), grid, tr, d)
    lhs = (fwd - bwd) / (2 * dt)
    rhs = p.c * mean_direction(psi, grid)
    return lhs, rhs


def trajectory(psi, grid: QuadratureGrid, times, c: float = 1.0, tr: Trivialization | None = None,
               d: DiffEngine = ANALYTIC) -> np.ndarray:
    """Rows ``(t, <X1>, <X2>, <X3>, V1, V2, V3)`` with ``V = c <k/|k|>``."""
    v = c * mean_direction(psi, grid)
    rows = []
    for t in times:
        x = expectation_position(evolve(psi, EvolutionParams(c, float(t))), grid, tr, d)
        rows.append([float(t), *x, *v])
    return np.array(rows, dtype=float).reshape(-1, 7)


__all__ = ["EvolutionParams", "Evolved3", "Evolved2", "evolve", "expectation_position",
           "mean_direction", "velocity_check", "trajectory"]
