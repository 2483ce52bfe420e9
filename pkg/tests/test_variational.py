"""Tests for the sixth-order operator, the identity suite, and the
finite-difference consistency harness."""

import numpy as np
import pytest

from confcurv import flow, immersions, variational
from confcurv.geometry import GeometryFrame


def rel(err, scale):
    return float(np.max(np.abs(err))) / (float(np.max(np.abs(scale))) + 1e-300)


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def bumpy_torus():
    """A perturbed product torus with genuinely nonzero operator values."""
    return flow.FourierImmersion(flow.perturbed_clifford(5, magnitude=0.1))


@pytest.fixture(scope="module")
def torus_points(rng):
    return rng.uniform(0.0, 2.0 * np.pi, size=(4, 5))


@pytest.fixture(scope="module")
def bumpy_value(bumpy_torus, torus_points):
    return variational.willmore_operator(bumpy_torus.point(torus_points, 6))


def test_operator_rejects_low_order():
    pl = immersions.Plane()
    with pytest.raises(ValueError):
        variational.willmore_operator(pl.point(np.zeros((4, 1)), 5))


def test_operator_zero_on_plane():
    pl = immersions.Plane()
    x = np.linspace(-0.4, 0.4, 12).reshape(4, 3)
    ev = variational.willmore_operator(pl.point(x, 6))
    assert np.max(np.abs(ev.total)) == 0.0
    for v in ev.terms.values():
        assert np.max(np.abs(v)) == 0.0


def test_operator_termwise_zero_on_minimal_product(rng):
    """Mean curvature vanishes identically, so every named summand must
    vanish on its own, not only the total."""
    cat = immersions.CatenoidProduct()
    x = rng.uniform(-0.4, 0.4, size=(4, 4))
    ev = variational.willmore_operator(cat.point(x, 6))
    for name, v in ev.terms.items():
        assert np.max(np.abs(v)) <= 1e-12, name


def test_operator_zero_on_round_sphere(rng):
    sp = immersions.Sphere(1.0)
    x = rng.uniform(-0.8, 0.8, size=(4, 6))
    ev = variational.willmore_operator(sp.point(x, 6))
    assert np.max(ev.scale) > 1.0
    assert rel(ev.total, ev.scale) <= 1e-9


def test_operator_zero_on_clifford_torus_charts(torus_points):
    """The product torus is a critical point; the reparametrized chart of
    the same surface must agree."""
    for imm in (immersions.clifford_torus(), immersions.WarpedTorus()):
        ev = variational.willmore_operator(imm.point(torus_points, 6))
        assert np.max(ev.scale) > 0.1
        assert rel(ev.total, ev.scale) <= 1e-10


def test_operator_normal_valued(bumpy_torus, torus_points, bumpy_value):
    W = bumpy_value.total
    assert np.max(np.abs(W)) > 1.0
    fr = GeometryFrame(bumpy_torus.point(torus_points, 2))
    gi = [[fr.ginv[i][j].c[0] for j in range(4)] for i in range(4)]
    dphi = [fr.dphi[i].c[0] for i in range(4)]
    tang = np.zeros_like(W)
    for l in range(4):
        s = sum(gi[l][k] * np.sum(dphi[k] * W, axis=0) for k in range(4))
        tang += s * dphi[l]
    assert rel(tang, W) <= 1e-10


def test_operator_rotation_equivariant(rng, bumpy_torus, torus_points,
                                       bumpy_value):
    R = immersions.random_rotation(rng, 8)
    rot = immersions.Rotated(bumpy_torus, R)
    evr = variational.willmore_operator(rot.point(torus_points, 6))
    assert rel(evr.total - R @ bumpy_value.total, bumpy_value.total) <= 1e-12


def test_operator_dilation_homogeneous(bumpy_torus, torus_points,
                                       bumpy_value):
    W = bumpy_value.total
    for lam, tol in ((2.0, 1e-12), (1.7, 1e-9)):
        dil = immersions.Dilated(bumpy_torus, lam)
        evd = variational.willmore_operator(dil.point(torus_points, 6))
        assert rel(evd.total - W / lam ** 5, W / lam ** 5) <= tol


def test_operator_translation_invariant(bumpy_torus, torus_points,
                                        bumpy_value):
    shift = np.linspace(-1.0, 2.5, 8)
    tr = immersions.Translated(bumpy_torus, shift)
    evt = variational.willmore_operator(tr.point(torus_points, 6))
    assert rel(evt.total - bumpy_value.total, bumpy_value.total) <= 1e-11


def test_term_breakdown_sums_exactly(bumpy_value):
    total = None
    for name in variational.TERM_NAMES:
        v = bumpy_value.terms[name]
        total = v if total is None else total + v
    assert np.array_equal(total, bumpy_value.total)
    assert set(bumpy_value.terms) == set(variational.TERM_NAMES)


def test_willmore_field_chunking(bumpy_torus, torus_points, bumpy_value):
    W = variational.willmore_field(bumpy_torus, torus_points, chunk=2)
    assert rel(W - bumpy_value.total, bumpy_value.total) <= 1e-13


def test_identity_suite_random_polynomial_immersions(rng):
    """Every implemented pointwise identity holds on a sample of random
    degree-three immersions."""
    worst = {}
    for _ in range(10):
        imm = immersions.random_polynomial_immersion(rng)
        x = rng.uniform(-0.3, 0.3, size=(4, 2))
        suite = variational.identity_suite(imm.point(x, 4))
        for k, v in suite.items():
            worst[k] = max(worst.get(k, 0.0), v)
    for k, v in worst.items():
        assert v <= 1e-8, (k, v)


def test_identity_suite_on_torus_chart(bumpy_torus, torus_points):
    suite = variational.identity_suite(bumpy_torus.point(torus_points, 4))
    for k, v in suite.items():
        assert v <= 1e-8, (k, v)


def test_identity_errors_on_low_order():
    pl = immersions.Plane()
    pt = pl.point(np.zeros((4, 1)), 3)
    with pytest.raises(ValueError):
        variational.identity_mean_flux_trace(pt)
    with pytest.raises(ValueError):
        variational.identity_perp_conversion(pt)
    with pytest.raises(ValueError):
        variational.noether_pieces(pt)


def test_noether_current_zero_on_sphere(rng):
    """Parallel mean curvature and pure-trace shape tensor kill both
    displayed summands of the current."""
    sp = immersions.Sphere(1.3)
    x = rng.uniform(-0.6, 0.6, size=(4, 4))
    pieces = variational.noether_pieces(sp.point(x, 4))
    scale = np.max(np.abs(pieces.flux_lead)) + 1.0
    assert np.max(np.abs(pieces.current)) <= 1e-12 * scale


def test_noether_current_dilation_scaling(bumpy_torus, torus_points):
    base = variational.noether_pieces(bumpy_torus.point(torus_points, 4))
    lam = 2.0
    dil = immersions.Dilated(bumpy_torus, lam)
    scaled = variational.noether_pieces(dil.point(torus_points, 4))
    assert rel(scaled.current - base.current / lam ** 5,
               base.current / lam ** 5) <= 1e-12


def test_shape_wedge_form_degrees(bumpy_torus, torus_points):
    pieces = variational.noether_pieces(bumpy_torus.point(torus_points, 4))
    assert (pieces.shape_wedge.p, pieces.shape_wedge.q) == (1, 2)
    assert (pieces.area_wedge.p, pieces.area_wedge.q) == (2, 2)


# ---------------------------------------------------------------------------
# consistency harness (structure-level checks; the full tolerance run
# lives in the acceptance suite)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sphere_base():
    sph = immersions.Sphere(1.0)
    field = variational.AmbientPolynomialField.random(
        sph, np.random.default_rng(101), degree=2, scale=0.25)
    return variational.Displaced(sph, field, 0.05)


@pytest.fixture(scope="module")
def sphere_pairing(sphere_base):
    return variational.PairingField(sphere_base, resolution=6, chunk=64)


def test_consistency_quadratic_convergence(sphere_base, sphere_pairing):
    var = variational.AmbientPolynomialField.random(
        sphere_base, np.random.default_rng(202), degree=2, scale=0.25)
    rep = variational.variational_consistency(
        sphere_base, var, resolution=8, pairing=sphere_pairing)
    errs = [abs(d - rep.extrapolated) for d in rep.diffs]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)
    assert np.isfinite(rep.constant) and rep.constant != 0.0


def test_consistency_tangential_field_has_no_first_variation(sphere_base,
                                                             sphere_pairing):
    # A tangential displacement only reparametrizes the surface, so the
    # energy slope along it must vanish.  The discrete slope decays with
    # the quadrature: the grid at resolution 12 keeps it three orders
    # below the slope of the untouched (normal-carrying) field.
    raw = variational.AmbientPolynomialField.random(
        sphere_base, np.random.default_rng(303), degree=2, scale=0.25)
    tang = variational.TangentialField(sphere_base, raw)
    rep_t = variational.variational_consistency(
        sphere_base, tang, resolution=12, pairing=sphere_pairing)
    rep_n = variational.variational_consistency(
        sphere_base, raw, resolution=8, pairing=sphere_pairing)
    scale = abs(rep_n.extrapolated)
    assert scale > 0.1
    assert all(abs(d) <= 1e-3 * scale for d in rep_t.diffs)
    assert abs(rep_t.extrapolated) <= 1e-3 * scale


def test_consistency_zero_field(sphere_base, sphere_pairing):
    zero = variational.AmbientPolynomialField(
        sphere_base, {(): np.zeros(sphere_base.m)})
    rep = variational.variational_consistency(
        sphere_base, zero, resolution=8, pairing=sphere_pairing)
    assert rep.diffs == (0.0, 0.0, 0.0)
    assert rep.pairing == 0.0
    assert np.isnan(rep.constant)


def test_consistency_validates_steps(sphere_base, sphere_pairing):
    var = variational.AmbientPolynomialField.random(
        sphere_base, np.random.default_rng(404), degree=1, scale=0.2)
    with pytest.raises(ValueError):
        variational.variational_consistency(
            sphere_base, var, steps=(1e-2, 3e-3, 1e-3),
            pairing=sphere_pairing)
    with pytest.raises(ValueError):
        variational.variational_consistency(
            sphere_base, var, steps=(4e-7, 2e-7, 1e-7),
            pairing=sphere_pairing)
    with pytest.raises(ValueError):
        variational.variational_consistency(
            sphere_base, var, steps=(1e-2, 5e-3),
            pairing=sphere_pairing)


def test_displaced_dimension_mismatch():
    sp = immersions.Sphere(1.0)
    torus = immersions.clifford_torus()
    field = variational.AmbientPolynomialField.random(
        torus, np.random.default_rng(1), degree=1)
    with pytest.raises(ValueError):
        variational.Displaced(sp, field, 0.1)


def test_pairing_is_linear_in_field(sphere_base, sphere_pairing):
    f1 = variational.AmbientPolynomialField.random(
        sphere_base, np.random.default_rng(7), degree=2, scale=0.3)
    doubled = variational.AmbientPolynomialField(
        sphere_base, {k: 2.0 * v for k, v in f1.coeffs.items()})
    p1 = sphere_pairing.pair(f1)
    p2 = sphere_pairing.pair(doubled)
    assert p2 == pytest.approx(2.0 * p1, rel=1e-13)
