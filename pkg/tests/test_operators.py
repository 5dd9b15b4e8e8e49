import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import spherical_frame
from photonpos import StepError
from photonpos import operators as ops
from photonpos.bundle import eigenfunction
from photonpos.fields import Diff3, GaussianBumps, LinearScalar, Lambda3
from photonpos.frames import NORTH, SOUTH
from photonpos.operators import ANALYTIC, DiffEngine, GaugeData, KMul, Position
from photonpos.wavefields import gaussian_packet, polarized_packet


def packet(ff=NORTH, center=(1.2, 0.8, 2.0), h=1, x0=(0.3, -0.2, 0.5)):
    return gaussian_packet(center, 0.3, h, ff, x0)


def test_spin_algebra():
    S = ops.spin_matrices()
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        np.testing.assert_allclose(S[a] @ S[b] - S[b] @ S[a], 1j * S[c], atol=1e-15)
    total = sum(s @ s for s in S)
    np.testing.assert_allclose(total, 2 * np.eye(3), atol=1e-15)
    for s in S:
        np.testing.assert_allclose(s, s.conj().T)
    np.testing.assert_allclose(np.linalg.eigvalsh(S[2]), [-1, 0, 1], atol=1e-15)


def test_spin_matrices_returns_copies():
    S = ops.spin_matrices()
    S.S1[0, 0] = 5
    assert ops.spin_matrices().S1[0, 0] == 0


def test_helicity_matrix(rng):
    for _ in range(20):
        k = rng.normal(size=3)
        sig = ops.helicity(k)
        np.testing.assert_allclose(sig, sig.conj().T, atol=1e-15)
        np.testing.assert_allclose(sig @ k, 0, atol=1e-14)
        P = np.eye(3) - np.outer(k, k) / (k @ k)
        np.testing.assert_allclose(sig @ sig, P, atol=1e-14)
        np.testing.assert_allclose(sig @ sig @ sig, sig, atol=1e-14)
        S = ops.spin_matrices()
        np.testing.assert_allclose(sig, sum(k[i] * S[i] for i in range(3)) / np.linalg.norm(k), atol=1e-15)


def test_projector_on_axis_matches_eigenvector():
    plus, minus = ops.helicity_projectors([0, 0, 1])
    w, v = np.linalg.eigh(ops.spin_matrices().S3)
    up = v[:, np.argmax(w)]
    np.testing.assert_allclose(plus, np.outer(up, up.conj()), atol=1e-15)
    dn = v[:, np.argmin(w)]
    np.testing.assert_allclose(minus, np.outer(dn, dn.conj()), atol=1e-15)


def test_projectors(rng):
    k = rng.normal(size=3)
    plus, minus = ops.helicity_projectors(k)
    np.testing.assert_allclose(plus @ plus, plus, atol=1e-14)
    np.testing.assert_allclose(plus @ minus, 0, atol=1e-14)
    np.testing.assert_allclose(np.trace(plus), 1, atol=1e-14)


@pytest.mark.parametrize("ff", [SOUTH, NORTH])
def test_frame_helicity_vectors(ff, rng):
    for _ in range(10):
        k = rng.normal(size=3)
        E = np.asarray(ff.matrix(jnp.asarray(k)))
        sig = ops.helicity(k)
        for h in (1, -1):
            v = (E[:, 0] + 1j * h * E[:, 1]) / np.sqrt(2)
            np.testing.assert_allclose(sig @ v, h * v, atol=1e-14)


def test_differentiate_sine():
    fn = lambda k: jnp.sin(k[1])  # noqa: E731
    k = np.array([0.3, 0.7, -0.2])
    assert ops.differentiate(ANALYTIC, fn, k, 1) == pytest.approx(np.cos(0.7), abs=1e-15)
    assert ops.differentiate(ANALYTIC, fn, k, 0) == 0.0
    errs = [abs(ops.differentiate(DiffEngine("fd", h), fn, k, 1) - np.cos(0.7)) for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-3)
    # leading error h^2/6 f'''
    assert errs[0] == pytest.approx(1e-4 / 6 * np.cos(0.7), rel=1e-3)
    rich = abs(ops.differentiate(DiffEngine("richardson", 1e-2), fn, k, 1) - np.cos(0.7))
    assert rich < errs[0] * 1e-3


def test_differentiate_rejects_singular():
    fn = lambda k: jnp.log(k[0])  # noqa: E731
    with pytest.raises(StepError):
        ops.differentiate(DiffEngine("fd", 0.1), fn, np.array([0.05, 1.0, 1.0]), 0)


def test_unknown_mode():
    with pytest.raises(ValueError):
        DiffEngine("spline")


def reference_position(E_of, psi, k, j, h=1e-4):
    """X_j psi by numpy central differences on the spherical frame formulas."""
    def reduced(q):
        return np.linalg.norm(q) ** -0.5 * E_of(q).T @ np.asarray(psi(jnp.asarray(q)))

    e = np.zeros(3)
    e[j] = h
    d = (reduced(k + e) - reduced(k - e)) / (2 * h)
    return 1j * np.linalg.norm(k) ** 0.5 * E_of(k) @ d


@pytest.mark.parametrize("ff,chart", [(SOUTH, "south"), (NORTH, "north")])
def test_position_matches_independent_reference(ff, chart):
    psi = polarized_packet((1.0, -0.7, 0.9), 0.4, (0.2, 1j, -0.5), (0.2, 0.1, -0.3), support=3)
    k = np.array([1.1, -0.5, 0.8])
    for j in range(3):
        got = ops.position_apply(ff, j, psi, k)
        ref = reference_position(lambda q: spherical_frame(q, chart), psi, k, j)
        np.testing.assert_allclose(got, ref, atol=1e-7)


def test_position_all_matches_components():
    psi = packet()
    k = jnp.asarray([1.0, 0.6, 1.9])
    allc = np.asarray(ops.PositionAll(NORTH, psi)(k))
    for j in range(3):
        np.testing.assert_allclose(allc[j], np.asarray(Position(NORTH, j, psi)(k)), atol=1e-14)


def test_eigenfunction_eigenvalue():
    X = np.array([0.4, -1.3, 0.2])
    for h in (1, -1):
        psi = eigenfunction(X, h, "field3-north")
        for k in ([0.3, 0.5, 1.0], [-2.0, 0.1, -0.4]):
            val = np.asarray(psi(jnp.asarray(k)))
            for j in range(3):
                np.testing.assert_allclose(ops.position_apply(NORTH, j, psi, k), X[j] * val, atol=1e-13)


def test_commuting_and_canonical():
    psi = packet()
    k = jnp.asarray([1.0, 0.9, 2.1])
    for a in range(3):
        for b in range(3):
            comm = ops.commutator(lambda f: Position(NORTH, a, f), lambda f: Position(NORTH, b, f), psi)
            assert np.abs(np.asarray(comm(k))).max() <= 1e-12
            can = ops.commutator(lambda f: Position(NORTH, a, f), lambda f: KMul(b, f), psi)
            expected = 1j * (a == b) * np.asarray(psi(k))
            np.testing.assert_allclose(np.asarray(can(k)), expected, atol=1e-12)


def test_position_commutes_with_helicity_and_keeps_transversality():
    psi = polarized_packet((0.5, 1.0, 1.5), 0.4, (1.0, 0.3j, 0.2), support=3)
    k = jnp.asarray([0.6, 1.1, 1.3])
    for j in range(3):
        comm = ops.commutator(lambda f: Position(SOUTH, j, f), ops.sigma, psi)
        assert np.abs(np.asarray(comm(k))).max() <= 1e-12
        assert abs(np.asarray(k) @ np.asarray(Position(SOUTH, j, psi)(k))) <= 1e-12


def test_spin_commutator():
    # k_l [X_j, S_l] psi = i (k_j Sigma / |k| - S_j) psi
    psi = polarized_packet((0.5, 1.0, -1.5), 0.4, (1.0, -0.3j, 0.2), support=3)
    k = jnp.asarray([0.6, 1.1, -1.3])
    kn = np.asarray(k) / np.linalg.norm(k)
    for j in range(3):
        lhs = 0
        for l in range(3):
            comm = ops.commutator(lambda f: Position(SOUTH, j, f), lambda f: ops.spin(l, f), psi)
            lhs = lhs + k[l] * np.asarray(comm(k))
        rhs = 1j * (kn[j] * np.asarray(ops.sigma(psi)(k)) - np.asarray(ops.spin(j, psi)(k)))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_gauged_position_reduces_to_frame_operator():
    psi = packet()
    k = np.array([1.1, 0.7, 2.2])
    for j in range(3):
        np.testing.assert_allclose(ops.gauged_position_apply(NORTH, j, psi, k),
                                   ops.position_apply(NORTH, j, psi, k), atol=1e-15)


def test_gauged_linear_a_and_phase():
    psi = packet()
    k = np.array([1.1, 0.7, 2.2])
    b = np.array([0.3, -0.2, 0.9])
    g = GaugeData(A=LinearScalar(jnp.asarray(b)))
    base = ops.position_apply(NORTH, 1, psi, k)
    val = np.asarray(psi(jnp.asarray(k)))
    np.testing.assert_allclose(ops.gauged_position_apply(NORTH, 1, psi, k, g=g), base + b[1] * val, atol=1e-14)
    # exp(iF) X exp(-iF) with F = b.k equals X + b
    gf = GaugeData(F=LinearScalar(jnp.asarray(b)))
    np.testing.assert_allclose(ops.gauged_position_apply(NORTH, 1, psi, k, g=gf), base + b[1] * val, atol=1e-13)


def test_gauged_all_matches_components():
    psi = packet()
    g = GaugeData(*(GaussianBumps.random(np.random.default_rng(i)) for i in range(4)))
    k = jnp.asarray([1.0, 0.6, 1.9])
    fn = ops.gauged_position_all(NORTH, g, psi)
    allc = np.asarray(fn(k))
    for j in range(3):
        np.testing.assert_allclose(allc[j], np.asarray(ops.GaugedPosition(NORTH, j, psi, ANALYTIC, g)(k)),
                                   atol=1e-13)


def test_fd_stencil_near_string_rejected():
    psi = packet(SOUTH, center=(1.2, 0.8, -2.0))
    with pytest.raises(StepError):
        ops.position_apply(SOUTH, 0, psi, [1e-4, 0.0, 1.0], DiffEngine("fd", 1e-3))
    # analytic mode has no stencil
    ops.position_apply(SOUTH, 0, psi, [1e-2, 0.0, 1.0])


def test_orbital_flipped_sign_is_caught():
    psi = packet()
    k = jnp.asarray([1.0, 0.6, 1.9])
    L = [np.asarray(ops.orbital(NORTH, l, psi)(k)) for l in range(3)]
    # [L1, k2] = i k3 on the orbital part
    lhs = np.asarray(Diff3(ops.orbital(NORTH, 0, KMul(1, psi)), KMul(1, ops.orbital(NORTH, 0, psi)))(k))
    np.testing.assert_allclose(lhs, 1j * k[2] * np.asarray(psi(k)), atol=1e-12)
    assert all(np.all(np.isfinite(v)) for v in L)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_eigenfunction_property(kv, X):
    k = np.array(kv)
    if np.hypot(k[0], k[1]) < 1e-2:
        return
    psi = eigenfunction(X, 1, "field3-south")
    val = np.asarray(psi(jnp.asarray(k)))
    j = 2
    np.testing.assert_allclose(ops.position_apply(SOUTH, j, psi, k), X[j] * val, atol=1e-12)


def test_matrix_json_round_trip():
    m = np.array([[1 + 2j, 0], [3j, -1]])
    np.testing.assert_array_equal(ops.matrix_from_json(ops.matrix_to_json(m)), m)


def test_lambda_field():
    f = Lambda3(lambda k: jnp.stack([k[1], -k[0], 0.0 * k[0]]))
    assert ops.position_apply(NORTH, 0, f, [1.0, 1.0, 1.0]).shape == (3,)


def test_spin_entries_and_axis_helicity():
    S3 = ops.spin_matrices().S3
    assert S3[0, 1] == -1j and S3[1, 0] == 1j
    assert not S3[2].any() and not S3[:, 2].any()
    np.testing.assert_allclose(ops.helicity([0, 0, 1]), S3, atol=1e-15)
    np.testing.assert_allclose(ops.helicity([0, 0, 1]) @ ops.helicity([0, 0, 1]), np.diag([1, 1, 0]), atol=1e-15)
    plus, _ = ops.helicity_projectors([0, 0, 1])
    np.testing.assert_allclose(plus, 0.5 * np.array([[1, -1j, 0], [1j, 1, 0], [0, 0, 0]]), atol=1e-15)


def test_projectors_decompose_transversal_vectors(rng):
    for _ in range(20):
        k = rng.normal(size=3)
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        v -= k * (k @ v) / (k @ k)
        plus, minus = ops.helicity_projectors(k)
        np.testing.assert_allclose(plus @ v + minus @ v, v, atol=1e-14)
        np.testing.assert_allclose(ops.helicity(k) @ plus, plus, atol=1e-14)


def test_differentiate_polynomial_and_plane_wave():
    fd = DiffEngine("fd", 1e-3)
    assert ops.differentiate(fd, lambda k: k[0] ** 2, [2.0, 0.0, 0.0], 0) == pytest.approx(4.0, abs=1e-9)
    # central differences are exact on quadratics
    quad = lambda k: 3 * k[0] * k[1] - k[2] ** 2 + 0.5 * k[1]  # noqa: E731
    k = np.array([0.7, -1.2, 0.4])
    assert ops.differentiate(fd, quad, k, 1) == pytest.approx(3 * 0.7 + 0.5, abs=1e-12)
    X = jnp.asarray([0.3, -0.8, 1.1])
    wave = lambda q: jnp.exp(-1j * (q @ X))  # noqa: E731
    for j in range(3):
        got = ops.differentiate(ANALYTIC, wave, k, j)
        assert abs(got - (-1j * X[j] * np.exp(-1j * (k @ np.asarray(X))))) <= 1e-15


def test_richardson_fourth_order():
    fn = lambda k: jnp.sin(k[1])  # noqa: E731
    k = np.array([0.0, 0.7, 0.0])
    errs = [abs(ops.differentiate(DiffEngine("richardson", h), fn, k, 1) - np.cos(0.7)) for h in (0.2, 0.1)]
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)


def test_gauged_special_cases():
    psi = packet()
    k = np.array([1.1, 0.7, 2.2])
    base = [ops.position_apply(NORTH, j, psi, k) for j in range(3)]
    gc = GaugeData(C=GaussianBumps.random(np.random.default_rng(5)))
    b = np.array([0.5, -0.1, 0.3])
    gb = GaugeData(B=LinearScalar(jnp.asarray(b)))
    sig_psi = ops.helicity(k) @ np.asarray(psi(jnp.asarray(k)))
    for j in range(3):
        np.testing.assert_allclose(ops.gauged_position_apply(NORTH, j, psi, k, g=gc), base[j], atol=1e-14)
        np.testing.assert_allclose(ops.gauged_position_apply(NORTH, j, psi, k, g=gb), base[j] + b[j] * sig_psi,
                                   atol=1e-14)
