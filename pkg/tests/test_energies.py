"""Energy quadrature checks against closed-form oracles.

Hand-derived values used below:
  * affine plane: h = 0, so every density vanishes identically
  * unit sphere: |H| = 1 and h is pure trace, density 3, total
    3 * vol(S^4) = 8 pi^2
  * unit-radii product torus: g = I, the four normal curvature vectors
    are orthonormal, density 3/16, total 3 pi^4 over volume (2 pi)^4;
    trace-free quartic densities (9, 3, 9/4, 9/4)
  * in codimension one h0 = s nu for a unit normal nu, which makes all
    four quartic invariants equal to (|s0|^2)^2
"""

import math
import time

import numpy as np
import pytest

from confcurv import energies, immersions, jets
from confcurv import _kernel as kernel
from confcurv.energies import ImmersionSpec, EnergyError
from confcurv.geometry import GeometryFrame, ImmersionPoint
from confcurv.jets import Jet

EA_TORUS = 3.0 * math.pi ** 4
EA_SPHERE = 8.0 * math.pi ** 2
VOL_TORUS = (2.0 * math.pi) ** 4


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def fields_at(immersion, x):
    pt = immersion.point(np.asarray(x, dtype=float), 3)
    D1, D2, D3 = energies.derivative_arrays(pt)
    return energies.integrand_fields(D1, D2, D3)


# ------------------------------------------------------------ flat plane


def test_plane_energy_is_zero():
    rep = energies.integrate(ImmersionSpec(immersions.Plane(), 8))
    assert rep.conformal_total == 0.0
    assert np.all(rep.quartic_totals == 0.0)
    assert rep.weighted_total == 0.0


# ------------------------------------------------------------ round sphere


def test_sphere_pointwise_density_is_three():
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.5, 1.5, size=(4, 32))
    f = fields_at(immersions.Sphere(), x)
    assert np.max(np.abs(f["conformal"] - 3.0)) < 1e-8
    for name in energies.QUARTIC_NAMES:
        assert np.max(np.abs(f[name])) < 1e-12


def test_sphere_total_matches_oracle():
    rep = energies.integrate(ImmersionSpec(immersions.Sphere(), 16))
    assert rel(rep.conformal_total, EA_SPHERE) < 1e-6
    assert np.max(np.abs(rep.quartic_totals)) < 1e-12


# ------------------------------------------------------------ flat torus


def test_clifford_pointwise_densities():
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 2.0 * math.pi, size=(4, 32))
    f = fields_at(immersions.clifford_torus(), x)
    assert np.max(np.abs(f["area"] - 1.0)) < 1e-13
    assert np.max(np.abs(f["conformal"] - 3.0 / 16.0)) < 1e-13
    oracle = dict(zip(energies.QUARTIC_NAMES, (9.0, 3.0, 2.25, 2.25)))
    for name, val in oracle.items():
        assert np.max(np.abs(f[name] - val)) < 1e-12


def test_clifford_total_within_budget():
    t0 = time.perf_counter()
    rep = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 16))
    elapsed = time.perf_counter() - t0
    assert rel(rep.conformal_total, EA_TORUS) < 1e-10
    assert elapsed < 60.0


def test_clifford_quartic_totals():
    rep = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 8))
    oracle = np.array([9.0, 3.0, 2.25, 2.25]) * VOL_TORUS
    assert np.max(np.abs(rep.quartic_totals / oracle - 1.0)) < 1e-12


def test_default_weighting_uses_first_quartic():
    assert energies.DEFAULT_BETA == (1.0 / 12.0 + 0.01, 0.0, 0.0, 0.0)
    rep = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 8))
    want = rep.conformal_total + energies.DEFAULT_BETA[0] * rep.quartic_totals[0]
    assert rep.weighted_total == pytest.approx(want, rel=1e-15)


def test_custom_weighting_applies_all_quartics():
    beta = (0.5, 0.25, -0.125, 2.0)
    rep = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 8),
                             beta=beta)
    want = rep.conformal_total + float(np.dot(beta, rep.quartic_totals))
    assert rep.weighted_total == pytest.approx(want, rel=1e-15)


# ------------------------------------------- quartic invariant structure


def test_quartics_nonnegative_on_random_immersions():
    rng = np.random.default_rng(23)
    for _ in range(5):
        imm = immersions.random_polynomial_immersion(rng)
        x = rng.uniform(-0.8, 0.8, size=(4, 64))
        f = fields_at(imm, x)
        assert np.min(f["quartic_norm"]) >= 0.0
        assert np.min(f["quartic_gram"]) >= 0.0
        assert np.min(f["quartic_square"]) >= 0.0


def test_codimension_one_quartics_coincide_pairwise():
    """With one normal direction the four quartics collapse to two.

    The norm and gram invariants both reduce to (tr S^2)^2 for the
    shape matrix S, while the square and trace invariants both reduce
    to tr(S^4), so they must agree in coinciding pairs pointwise.  The
    two pairs stay genuinely different from each other.
    """
    rng = np.random.default_rng(101)
    n = 1000
    D1 = 0.15 * rng.standard_normal((4, 5, n))
    for i in range(4):
        D1[i, i] += 1.0
    D2 = 0.6 * rng.standard_normal((10, 5, n))
    D3 = rng.standard_normal((20, 5, n))
    f = energies.integrand_fields(D1, D2, D3)
    assert np.min(f["_det"]) > 0.05
    vals = [f[name] for name in energies.QUARTIC_NAMES]
    scale = np.maximum(np.abs(vals[0]), 1e-300)
    assert np.max(np.abs(vals[0] - vals[1]) / scale) < 1e-12
    assert np.max(np.abs(vals[2] - vals[3]) / scale) < 1e-12
    assert np.max(np.abs(vals[0] - vals[2]) / scale) > 1e-2


def test_frame_and_array_routes_agree():
    rng = np.random.default_rng(40)
    for _ in range(3):
        imm = immersions.random_polynomial_immersion(rng)
        x = rng.uniform(-0.7, 0.7, size=(4, 6))
        pt = imm.point(x, 3)
        D1, D2, D3 = energies.derivative_arrays(pt)
        f = energies.integrand_fields(D1, D2, D3)
        fr = GeometryFrame(imm.point(x, 3))
        conf = energies.integrand_conformal(fr)
        assert np.max(np.abs(conf - f["conformal"])
                      / np.maximum(np.abs(conf), 1.0)) < 1e-9
        quart = energies.integrand_quartics(fr)
        for name, q in zip(energies.QUARTIC_NAMES, quart):
            assert np.max(np.abs(q - f[name])
                          / np.maximum(np.abs(q), 1.0)) < 1e-9


# ------------------------------------------------- conformal invariance


def test_dilation_invariance():
    spec = ImmersionSpec(immersions.clifford_torus(), 8)
    rep = energies.conformal_invariance_check(spec, ("dilate", 2.0))
    assert rep["mode"] == "totals"
    assert max(rep["residual"].values()) < 1e-12


def test_rotation_and_translation_invariance():
    rng = np.random.default_rng(3)
    spec = ImmersionSpec(immersions.clifford_torus(), 8)
    rot = immersions.random_rotation(rng, 8)
    for transform in (("rotate", rot), ("translate", np.linspace(-1, 2, 8))):
        rep = energies.conformal_invariance_check(spec, transform)
        assert max(rep["residual"].values()) < 1e-12
        assert rep["pointwise_max"] < 1e-10


def test_inversion_far_center():
    spec = ImmersionSpec(immersions.clifford_torus(), 16)
    center = np.zeros(8)
    center[0] = 5.0
    assert energies.image_distance(spec, center) > 3.0
    rep = energies.conformal_invariance_check(spec, ("invert", center))
    assert rep["residual"]["conformal"] < 1e-5
    base = rep["baseline"]["conformal"]
    assert rel(base, EA_TORUS) < 1e-9
    assert rel(rep["transformed"]["conformal"], EA_TORUS) < 1e-5


def test_inversion_near_center_rejected():
    spec = ImmersionSpec(immersions.clifford_torus(), 8)
    on_image = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="inversion center"):
        energies.conformal_invariance_check(spec, ("invert", on_image))


def test_open_chart_rejects_non_isometries():
    spec = ImmersionSpec(immersions.CatenoidProduct(), 8)
    with pytest.raises(ValueError, match="isometries"):
        energies.conformal_invariance_check(spec, ("dilate", 2.0))
    center = np.full(6, 30.0)
    with pytest.raises(ValueError, match="isometries"):
        energies.conformal_invariance_check(spec, ("invert", center))


def test_open_chart_isometry_pointwise():
    rng = np.random.default_rng(3)
    spec = ImmersionSpec(immersions.CatenoidProduct(), 8)
    rot = immersions.random_rotation(rng, 6)
    rep = energies.conformal_invariance_check(spec, ("rotate", rot))
    assert rep["mode"] == "pointwise"
    assert rep["pointwise_max"] < 1e-8
    rep = energies.conformal_invariance_check(spec, ("translate", np.ones(6)))
    assert rep["pointwise_max"] < 1e-12


def test_chart_diffeomorphism_invariance():
    base = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 12))
    warp = energies.integrate(ImmersionSpec(immersions.WarpedTorus(), 12))
    assert rel(warp.conformal_total, base.conformal_total) < 1e-10
    for a, b in zip(warp.quartic_totals, base.quartic_totals):
        assert rel(a, b) < 1e-10


def test_resolution_doubling_reduces_error():
    center = np.zeros(8)
    center[0] = 5.0
    imm = immersions.Inverted(immersions.clifford_torus(), center)
    err = {}
    for res in (8, 16):
        rep = energies.integrate(ImmersionSpec(imm, res), beta=(0,) * 4)
        err[res] = abs(rep.conformal_total - EA_TORUS)
    assert err[16] < err[8] / 4.0


# --------------------------------------------------- failure diagnostics


class _PinchedTorus:
    """First circle collapsed to its cosine only: rank drops at sin = 0."""

    chart = "torus"
    m = 8

    def point(self, x, order):
        c = [Jet.coordinate(v, x[v], order) for v in range(4)]
        comps = []
        for a in range(4):
            comps.append(jets.cos(c[a]))
            comps.append(jets.sin(c[a]) * (0.0 if a == 0 else 1.0))
        return ImmersionPoint(comps, x)


def test_degenerate_immersion_reports_offending_node():
    with pytest.raises(EnergyError, match="not finite") as exc:
        energies.integrate(ImmersionSpec(_PinchedTorus(), 8))
    assert exc.value.node is not None
    assert exc.value.coords.shape == (4,)


# ----------------------------------------------- reports and determinism


def test_totals_do_not_depend_on_chunking():
    spec = ImmersionSpec(immersions.WarpedTorus(), 8)
    a = energies.integrate(spec, chunk=512)
    b = energies.integrate(spec, chunk=4096)
    assert a.conformal_total == b.conformal_total
    assert np.all(a.quartic_totals == b.quartic_totals)


def test_record_lines_are_parseable():
    rep = energies.integrate(ImmersionSpec(immersions.clifford_torus(), 8))
    lines = rep.record_lines()
    assert len(lines) == 6
    names = [ln.split("=", 1)[0] for ln in lines]
    assert names == ["conformal", *energies.QUARTIC_NAMES, "weighted"]
    for ln in lines:
        body, resolution, rule = ln.split(" ")
        float(body.split("=", 1)[1])
        assert resolution == "resolution=8"
        assert rule.startswith("rule=")


def test_spec_validation():
    with pytest.raises(ValueError, match="resolution"):
        ImmersionSpec(immersions.clifford_torus(), 4)

    class NoChart:
        m = 5

    with pytest.raises(ValueError, match="chart"):
        ImmersionSpec(NoChart(), 8)


# ------------------------------------------------------ compiled kernels


def _packed_perturbed_torus(res, seed=0):
    rule = energies._rule_for("torus", res)
    n = rule.total_nodes
    x, w = rule.node_block(0, n)
    pt = immersions.clifford_torus().point(x, 3)
    D1, D2, D3 = energies.derivative_arrays(pt)
    rng = np.random.default_rng(seed)
    D1 = D1 + 0.03 * np.sin(x.sum(0))[None, None, :] \
        * rng.standard_normal((4, 8, 1))
    return (D1, D2, D3), kernel.pack_derivatives(D1, D2, D3), w


def test_kernel_matches_array_route():
    (D1, D2, D3), D, w = _packed_perturbed_torus(8)
    f = energies.integrand_fields(D1, D2, D3)
    wa = w * f["area"]
    want = [np.sum(w * f["area"])] + [np.sum(wa * f[name])
                                      for name in energies.FIELD_NAMES[1:]]
    probe = np.zeros((D.shape[0], 34))
    got = kernel.density_sums(D, w, probe, 0, 0.0, True)
    for a, b in zip(got[:6], want):
        assert rel(a, b) < 1e-11
    assert got[6] == pytest.approx(np.min(f["_det"]), rel=1e-12)


def test_kernel_probe_blend_matches_direct_perturbation():
    """Blending a probe inside the kernel equals perturbing the input.

    The two routes may differ by fused-multiply-add rounding in the
    blend itself, so the comparison is at the rounding level, while a
    repeated identical call must be deterministic bit for bit.
    """
    _, D, w = _packed_perturbed_torus(8, seed=1)
    n = D.shape[0]
    rng = np.random.default_rng(2)
    probe = np.ascontiguousarray(rng.standard_normal((n, 34)))
    comp, scale = 5, 0.043
    blended = kernel.density_sums(D, w, probe, comp, scale, True)
    Dp = D.copy()
    Dp[:, :, comp] += scale * probe
    direct = kernel.density_sums(Dp, w, np.zeros((n, 34)), 0, 0.0, True)
    for a, b in zip(blended, direct):
        assert abs(a - b) <= 1e-13 * max(abs(a), abs(b))
    again = kernel.density_sums(D, w, probe, comp, scale, True)
    assert again == blended


def test_gradient_table_matches_single_probes():
    _, D, w = _packed_perturbed_torus(8, seed=3)
    n = D.shape[0]
    rng = np.random.default_rng(4)
    nmodes = 5
    PT = np.ascontiguousarray(0.2 * rng.standard_normal((n, nmodes, 34)))
    steps = 1e-4 + 1e-4 * rng.random((nmodes, 8))
    # lane width 24 does not divide 4096, so the padded tail is exercised
    Db = kernel.pack_lanes(D, 24)
    wb = kernel.pack_weight_lanes(w, 24)
    PTb = kernel.pack_probe_lanes(PT, 24)
    conf, q1, mdet = kernel.gradient_table(Db, wb, PTb, steps)
    for mu in range(nmodes):
        for comp in range(8):
            for sgn, sign in enumerate((1.0, -1.0)):
                col = np.ascontiguousarray(PT[:, mu, :])
                out = kernel.density_sums(D, w, col, comp,
                                          sign * steps[mu, comp], False)
                assert rel(conf[mu, comp, sgn], out[1]) < 1e-12
                assert rel(q1[mu, comp, sgn], out[2]) < 1e-12
                assert rel(mdet[mu, comp, sgn], out[6]) < 1e-12
