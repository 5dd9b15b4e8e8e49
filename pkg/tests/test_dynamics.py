import jax.numpy as jnp
import numpy as np
import pytest

from photonpos import HermiticityError
from photonpos import dynamics as dy
from photonpos.bundle import GLOBAL, trivialized
from photonpos.frames import NORTH, SOUTH
from photonpos.operators import MatrixMul
from photonpos.wavefields import QuadratureGrid, bb_inner, bb_norm, gaussian_packet


def brute_mean_direction(center, width, n=81, span=6.0):
    """<k/|k|> on a Cartesian box with the d^3k/|k| weight (helicity packets have |psi| = envelope)."""
    axes = [np.linspace(c - span * width, c + span * width, n) for c in center]
    K = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    r = np.linalg.norm(K, axis=1)
    dens = np.exp(-np.sum((K - center) ** 2, axis=1) / width ** 2) / r
    return (dens[:, None] * K / r[:, None]).sum(0) / dens.sum()


@pytest.fixture(scope="module")
def south_packet():
    p = gaussian_packet([0.0, 0.0, -3.0], 0.3, 1, SOUTH, [0.4, -0.3, 0.7])
    return p, QuadratureGrid().for_packets(p)


def test_params_validation():
    with pytest.raises(ValueError):
        dy.EvolutionParams(c=0.0)
    with pytest.raises(ValueError):
        dy.EvolutionParams(t=float("nan"))


def test_evolution_is_a_phase(south_packet):
    p, _ = south_packet
    k = jnp.asarray([0.1, 0.2, -2.9])
    t, c = 1.7, 2.0
    got = np.asarray(dy.evolve(p, dy.EvolutionParams(c, t))(k))
    np.testing.assert_allclose(got, np.exp(-1j * c * t * np.linalg.norm(k)) * np.asarray(p(k)), atol=1e-15)
    twice = dy.evolve(dy.evolve(p, dy.EvolutionParams(c, 0.5)), dy.EvolutionParams(c, 1.2))
    assert twice.t == pytest.approx(1.7) and twice.inner is p


def test_norm_and_helicity_conserved(south_packet):
    p, grid = south_packet
    n0 = bb_norm(p, grid)
    h0 = bb_inner(p, MatrixMul("sigma", p), grid)
    for t in (0.5, 3.0, -2.0):
        q = dy.evolve(p, dy.EvolutionParams(1.0, t))
        assert abs(bb_norm(q, grid) - n0) <= 1e-10
        assert abs(bb_inner(q, MatrixMul("sigma", q), grid) - h0) <= 1e-10
    assert h0.real == pytest.approx(1.0, abs=1e-8)


def test_expectation_is_phase_center(south_packet):
    p, grid = south_packet
    np.testing.assert_allclose(dy.expectation_position(p, grid), [0.4, -0.3, 0.7], atol=1e-6)
    np.testing.assert_allclose(dy.expectation_position(p, grid, GLOBAL), [0.4, -0.3, 0.7], atol=1e-6)
    np.testing.assert_allclose(dy.expectation_position(trivialized(p), grid), [0.4, -0.3, 0.7], atol=1e-6)


def test_zero_phase_center():
    p = gaussian_packet([1.0, 1.5, 2.0], 0.25, -1, NORTH)
    grid = QuadratureGrid().for_packets(p)
    np.testing.assert_allclose(dy.expectation_position(p, grid), 0, atol=1e-8)


def test_mean_direction_matches_brute_force(south_packet):
    p, grid = south_packet
    ref = brute_mean_direction(np.array([0.0, 0.0, -3.0]), 0.3)
    np.testing.assert_allclose(dy.mean_direction(p, grid), ref, atol=1e-6)


def test_ehrenfest(south_packet):
    p, grid = south_packet
    v = dy.mean_direction(p, grid)
    assert v[2] == pytest.approx(-1.0, abs=0.01)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        lhs, rhs = dy.velocity_check(p, grid, dt=dt)
        errs.append(np.abs(lhs - rhs).max())
        assert errs[-1] <= 1e-4
    # <X>(t) is linear in t, so the centred difference carries no dt^2 term
    for dt, e in zip((0.1, 0.05, 0.025), errs):
        assert e <= max(1e-3 * dt ** 2, 1e-8)
    with pytest.raises(ValueError):
        dy.velocity_check(p, grid, dt=0)


def test_trajectory(south_packet):
    p, grid = south_packet
    rows = dy.trajectory(p, grid, [0.0, 1.0, 2.0], c=2.0)
    assert rows.shape == (3, 7)
    np.testing.assert_allclose(rows[:, 0], [0, 1, 2])
    np.testing.assert_allclose(rows[:, 1:4], [0.4, -0.3, 0.7] + rows[:, :1] * rows[:, 4:7], atol=1e-6)
    np.testing.assert_allclose(rows[0, 4:7], 2 * dy.mean_direction(p, grid))
    assert dy.trajectory(p, grid, []).shape == (0, 7)


def test_gaugeless_field_rejected(south_packet):
    from photonpos.wavefields import ConstantField
    _, grid = south_packet
    with pytest.raises(ValueError):
        dy.expectation_position(ConstantField(jnp.asarray([1.0, 0, 0])), grid)


def test_plain_measure_breaks_reality(south_packet):
    # with d^3k the frame operator is no longer symmetric: <X> picks up an imaginary part
    p, grid = south_packet
    with pytest.raises(HermiticityError):
        dy.expectation_position(p, grid, measure="d3k")


def test_identity_and_group_law(south_packet):
    p, _ = south_packet
    k = jnp.asarray([0.3, -0.1, -2.7])
    np.testing.assert_array_equal(np.asarray(dy.evolve(p, dy.EvolutionParams())(k)), np.asarray(p(k)))
    a = dy.evolve(dy.evolve(p, dy.EvolutionParams(1.0, 0.7)), dy.EvolutionParams(1.0, 1.9))
    b = dy.evolve(p, dy.EvolutionParams(1.0, 2.6))
    np.testing.assert_allclose(np.asarray(a(k)), np.asarray(b(k)), atol=1e-14)


def test_projector_commutes_with_evolution(south_packet):
    from photonpos.operators import helicity_projectors
    from photonpos.wavefields import polarized_packet
    q = polarized_packet([0.4, 0.1, -2.5], 0.3, [1.0, 0.5j, 0.3])
    k = np.array([0.3, -0.1, -2.7])
    plus, _ = helicity_projectors(k)
    ev = np.asarray(dy.evolve(q, dy.EvolutionParams(1.0, 1.3))(jnp.asarray(k)))
    direct = np.exp(-1.3j * np.linalg.norm(k)) * (plus @ np.asarray(q(jnp.asarray(k))))
    np.testing.assert_allclose(plus @ ev, direct, atol=1e-13)


def test_symmetric_superposition_is_at_rest():
    from photonpos.fields import Sum3
    a = gaussian_packet([3.0, 0.0, 0.0], 0.3, 1, SOUTH)
    b = gaussian_packet([-3.0, 0.0, 0.0], 0.3, 1, SOUTH)
    psi = Sum3(a, b)
    grid = QuadratureGrid(128, 64, 32, r0=4.0, axis=(0.0, 1.0, 0.0))
    lhs, rhs = dy.velocity_check(psi, grid, dt=0.05)
    np.testing.assert_allclose(lhs, 0, atol=1e-5)
    np.testing.assert_allclose(rhs, 0, atol=1e-5)
