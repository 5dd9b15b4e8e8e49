import io
import json

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from photonpos import ConfigError, ConvergenceError, DomainError, TransversalityError
from photonpos import wavefields as wf
from photonpos.fields import Lambda3, Scaled3
from photonpos.frames import NORTH, SOUTH


def radial_norm_oracle(kc, s):
    """integral d^3k/|k| exp(-|k-K0|^2/s^2) after the angular integral."""
    def integrand(r):
        x = 2 * r * kc / s ** 2
        # sinh(x)/x exp(-(r^2+K^2)/s^2), written to avoid overflow
        return 4 * np.pi * r * (np.exp(-(r - kc) ** 2 / s ** 2) - np.exp(-(r + kc) ** 2 / s ** 2)) / (2 * x)
    return quad(integrand, 0, kc + 12 * s, points=[kc], epsabs=1e-14, epsrel=1e-13)[0]


@pytest.mark.parametrize("kc,s", [(3.0, 0.3), (2.0, 0.5), (1.0, 0.8)])
def test_packet_norm_matches_radial_quadrature(kc, s):
    assert wf.packet_norm([0, 0, -kc], s) ** -2 == pytest.approx(radial_norm_oracle(kc, s), rel=1e-10)


def test_radial_weight_integral():
    # integral d^3k/|k| exp(-|k|^2) = 2 pi
    grid = wf.QuadratureGrid(64, 16, 4, r0=1.0)
    nodes, w = grid.weights_for("bb")
    assert np.sum(w * np.exp(-np.sum(nodes ** 2, axis=1))) == pytest.approx(2 * np.pi, rel=1e-12)
    nodes, w = grid.weights_for("d3k")
    assert np.sum(w * np.exp(-np.sum(nodes ** 2, axis=1))) == pytest.approx(np.pi ** 1.5, rel=1e-12)


def test_tilted_grid_has_same_volume():
    g = wf.QuadratureGrid(32, 16, 8, r0=1.0, axis=(1.0, 2.0, -0.5))
    nodes, w = g.nodes_and_weights()
    zg = wf.QuadratureGrid(32, 16, 8, r0=1.0)
    zn, zw = zg.nodes_and_weights()
    gauss = lambda n: np.exp(-np.sum(n ** 2, axis=1))  # noqa: E731
    assert np.sum(w * gauss(nodes)) == pytest.approx(np.sum(zw * gauss(zn)), rel=1e-13)
    np.testing.assert_allclose(np.sort(np.linalg.norm(nodes, axis=1)),
                               np.sort(np.linalg.norm(zg.nodes_and_weights()[0], axis=1)))


def test_packet_unit_norm():
    p = wf.gaussian_packet([0.5, -0.4, -2.5], 0.3, 1, SOUTH)
    grid = wf.QuadratureGrid().for_packets(p)
    assert wf.bb_norm(p, grid) == pytest.approx(1.0, abs=1e-8)
    q = wf.normalized(Scaled3(3.0, p), grid)
    assert wf.bb_inner(q, q, grid).real == pytest.approx(1.0, abs=1e-10)


def test_conjugate_symmetry_exact():
    p = wf.gaussian_packet([0.5, -0.4, -2.5], 0.3, 1, SOUTH)
    q = wf.polarized_packet([0.6, -0.2, -2.4], 0.35, [1, 1j, 0], [0.2, 0.0, 0.1])
    grid = wf.QuadratureGrid(48, 24, 8).for_packets(p, q)
    assert wf.bb_inner(p, q, grid) == np.conj(wf.bb_inner(q, p, grid))


def test_orthogonal_helicities():
    kw = dict(center=[0.5, -0.4, -2.5], width=0.3, ff=SOUTH)
    p = wf.gaussian_packet(helicity=1, **kw)
    m = wf.gaussian_packet(helicity=-1, **kw)
    grid = wf.QuadratureGrid().for_packets(p)
    assert abs(wf.bb_inner(p, m, grid)) <= 1e-14


def test_packet_validation():
    wf.gaussian_packet([0, 0.1, 3.0], 0.3, 1, NORTH)
    with pytest.raises(DomainError):
        wf.gaussian_packet([0, 0.1, 3.0], 0.3, 1, SOUTH)
    with pytest.raises(DomainError):
        wf.gaussian_packet([0.2, 0, 0.2], 0.3, 1, NORTH)
    with pytest.raises(ValueError):
        wf.gaussian_packet([1, 1, 1], -1, 1, NORTH)
    with pytest.raises(ValueError):
        wf.gaussian_packet([1, 1, 1], 0.1, 0, NORTH)


def test_transversal_checks():
    p = wf.gaussian_packet([1.0, 1.0, 1.0], 0.2, -1, NORTH)
    ks = np.random.default_rng(0).normal(size=(200, 3))
    assert wf.check_transversal(p, ks) <= 1e-14
    with pytest.raises(TransversalityError):
        wf.check_transversal(wf.RadialField(), ks)
    proj = wf.transversal_project(wf.ConstantField(jnp.asarray([1.0, 2.0, 3j])))
    assert wf.check_transversal(proj, ks) <= 1e-14
    assert proj.transversal


def test_convergence_error():
    p = wf.gaussian_packet([0.0, 0.6, -3.0], 0.3, 1, SOUTH)
    coarse = wf.QuadratureGrid(4, 32, 8).for_packets(p)
    with pytest.raises(ConvergenceError):
        wf.bb_inner(p, p, coarse, tol=1e-6)
    fine = wf.QuadratureGrid(128, 64, 16).for_packets(p)
    assert wf.bb_inner(p, p, fine, tol=1e-8).real == pytest.approx(1.0, abs=1e-8)


def test_grid_json():
    g = wf.QuadratureGrid(10, 6, 4, r0=1.5, axis=(0.0, 1.0, 0.0))
    assert wf.QuadratureGrid.from_json(json.loads(json.dumps(g.to_json()))) == g
    assert wf.QuadratureGrid.from_json({"Nr": 3}) == wf.QuadratureGrid(Nr=3)
    for bad in ({"Nr": -1}, {"Nx": 3}, {"r0": 0}, {"Nr": "abc"}, [1]):
        with pytest.raises(ConfigError):
            wf.QuadratureGrid.from_json(bad)
    assert wf.QuadratureGrid(0, 4, 4).nodes_and_weights()[0].shape == (0, 3)
    with pytest.raises(ConfigError):
        g.weights_for("flat")


def test_grid_load(tmp_path):
    path = tmp_path / "g.json"
    path.write_text('{"Nr": 8, "Ntheta": 4, "Nphi": 2}')
    assert wf.QuadratureGrid.load(path).size == 64
    with pytest.raises(ConfigError):
        wf.QuadratureGrid.load(tmp_path / "missing.json")


def test_csv_export():
    f = Lambda3(lambda k: jnp.stack([k[0] + 1j, 2 * k[1], -1j * k[2]]))
    text = wf.export_csv_text(f, [[1.0, 2.0, 3.0], [0.5, 0.0, -1.0]])
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(wf.FIELD3_COLUMNS)
    row = [float(v) for v in lines[1].split(",")]
    assert row == [1.0, 2.0, 3.0, 1.0, 1.0, 4.0, 0.0, 0.0, -3.0]
    assert len(lines) == 3
    assert wf.export_csv_text(f, np.zeros((0, 3))).strip() == ",".join(wf.FIELD3_COLUMNS)
    buf = io.StringIO()
    wf.export_csv(f, [[1.0, 1.0, 1.0]], buf)
    assert buf.getvalue() == wf.export_csv_text(f, [[1.0, 1.0, 1.0]])


@given(st.floats(0.2, 0.6), st.floats(2.0, 4.0))
def test_norm_scaling_property(s, kc):
    # the closed form is the radial oracle for every width and distance
    assert wf.packet_norm([kc, 0, 0], s) ** -2 == pytest.approx(radial_norm_oracle(kc, s), rel=1e-9)


def test_transversal_projection_examples():
    from photonpos.fields import sample
    ks = np.random.default_rng(2).normal(size=(50, 3))
    np.testing.assert_allclose(sample(wf.transversal_project(wf.RadialField()), ks), 0, atol=1e-14)
    p = wf.gaussian_packet([1.0, 1.0, 1.0], 0.2, 1, NORTH)
    np.testing.assert_allclose(sample(wf.transversal_project(p), ks), sample(p, ks), atol=1e-13)
    const = wf.transversal_project(wf.ConstantField(jnp.asarray([1.0, 0.0, 0.0])))
    np.testing.assert_allclose(np.asarray(const(jnp.asarray([0.0, 0.0, 1.0]))), [1, 0, 0], atol=1e-15)


def test_packet_is_helicity_eigenvector():
    from photonpos.fields import sample
    from photonpos.operators import helicity_matrix
    ks = np.random.default_rng(3).normal(size=(1000, 3)) + [1.0, 1.0, -1.0]
    for h in (1, -1):
        p = wf.gaussian_packet([1.0, 1.0, -1.0], 0.15, h, SOUTH)
        vals = sample(p, ks)
        sig = sample(helicity_matrix, ks)
        np.testing.assert_allclose(np.einsum("nij,nj->ni", sig, vals), h * vals, atol=1e-12)
        assert wf.check_transversal(p, ks, tol=1e-13) <= 1e-13


def test_grid_doubling():
    p = wf.gaussian_packet([0.5, -0.4, -2.5], 0.3, 1, SOUTH)
    q = wf.polarized_packet([0.6, -0.2, -2.4], 0.35, [1, 1j, 0], [0.2, 0.0, 0.1])
    grid = wf.QuadratureGrid().for_packets(p, q)
    assert abs(wf.bb_inner(p, q, grid) - wf.bb_inner(p, q, grid.refined(2))) < 1e-10


def test_frame_change_is_unitary():
    from photonpos.operators import FrameTransport
    p = wf.gaussian_packet([1.2, 0.5, -1.0], 0.2, 1, SOUTH)
    q = wf.polarized_packet([1.2, 0.6, -0.9], 0.2, [0.3, 1j, 1.0])
    grid = wf.QuadratureGrid().for_packets(p, q)
    ref = wf.bb_inner(p, q, grid)
    moved = wf.bb_inner(FrameTransport(SOUTH, NORTH, p), FrameTransport(SOUTH, NORTH, q), grid)
    assert abs(moved - ref) <= 1e-10
