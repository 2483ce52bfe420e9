"""Intrinsic conformal curvature: Schouten, Weyl, Cotton, Bach, Paneitz, Q."""

import itertools

import numpy as np
import pytest

from confcurv import intrinsic, jets
from confcurv.geometry import NV, MetricJets
from confcurv.immersions import Sphere
from confcurv.jets import Jet

ORDER = 6


def rand_poly(rng, pts, scale, degree=2):
    terms = []
    for d in range(1, degree + 1):
        for beta in {tuple(sorted(t)) for t in
                     itertools.combinations_with_replacement(range(4), d)}:
            e = [0, 0, 0, 0]
            for v in beta:
                e[v] += 1
            terms.append((tuple(e), scale * rng.standard_normal()))
    return jets.polynomial_jet(terms, pts, ORDER)


def perturbed_metric(rng, pts, scale=0.08):
    g = [[None] * NV for _ in range(NV)]
    for i in range(NV):
        for j in range(i, NV):
            p = rand_poly(rng, pts, scale)
            if i == j:
                p = p + 1.0
            g[i][j] = g[j][i] = p
    return MetricJets(g)


def entry_max(tensor):
    return intrinsic.component_max(tensor)


@pytest.fixture(scope="module")
def generic():
    rng = np.random.default_rng(310)
    pts = rng.uniform(-0.35, 0.35, (4, 3))
    g = perturbed_metric(rng, pts)
    w = rand_poly(rng, pts, 0.15)
    return g, w, pts


@pytest.fixture(scope="module")
def flat_conformal():
    rng = np.random.default_rng(312)
    pts = rng.uniform(-0.35, 0.35, (4, 3))
    w = rand_poly(rng, pts, 0.2, degree=3)
    return intrinsic.conformally_flat_metric(w)


@pytest.fixture(scope="module")
def sphere_point():
    rng = np.random.default_rng(311)
    return Sphere(1.0).point(rng.uniform(-0.8, 0.8, (4, 3)), ORDER)


def test_schouten_trace_and_ricci_reconstruction(generic):
    g, _, _ = generic
    S, J = intrinsic.schouten(g)
    o = S[0][0].order
    gi = [[g.ginv[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    tr = None
    for i in range(NV):
        for j in range(NV):
            t = gi[i][j] * S[i][j]
            tr = t if tr is None else tr + t
    assert entry_max(tr - J.truncate(o)) <= 1e-12 * entry_max(J)
    for i in range(NV):
        for j in range(NV):
            ric = S[i][j] * 2.0 + intrinsic._mul(J, g.g[i][j])
            err = entry_max(intrinsic._sub(ric, g.ricci[i][j]))
            assert err <= 1e-12 * (1.0 + entry_max(g.ricci[i][j]))


def test_weyl_all_traces_vanish(generic):
    g, _, _ = generic
    W = intrinsic.weyl(g)
    o = W[0][0][0][0].order
    gi = [[g.ginv[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    scale = entry_max(W)
    for b in range(NV):
        for j in range(NV):
            tr = None
            for a in range(NV):
                for i in range(NV):
                    t = gi[a][i] * W[a][b][i][j]
                    tr = t if tr is None else tr + t
            assert entry_max(tr) <= 1e-12 * (1.0 + scale)
    for a in range(NV):
        for i in range(NV):
            tr = None
            for b in range(NV):
                for j in range(NV):
                    t = gi[b][j] * W[a][b][i][j]
                    tr = t if tr is None else tr + t
            assert entry_max(tr) <= 1e-12 * (1.0 + scale)


def test_weyl_symmetries(generic):
    g, _, _ = generic
    W = intrinsic.weyl(g)
    scale = 1.0 + entry_max(W)
    for a in range(NV):
        for b in range(NV):
            for i in range(NV):
                for j in range(NV):
                    assert entry_max(W[a][b][i][j] + W[b][a][i][j]) \
                        <= 1e-13 * scale
                    assert entry_max(W[a][b][i][j] + W[a][b][j][i]) \
                        <= 1e-13 * scale
                    assert entry_max(W[a][b][i][j] - W[i][j][a][b]) \
                        <= 1e-13 * scale


def test_weyl_vanishes_on_model_metrics(sphere_point, flat_conformal):
    gs = intrinsic.induced_metric(sphere_point)
    assert entry_max(intrinsic.weyl(gs)) <= 1e-12
    assert entry_max(intrinsic.weyl(flat_conformal)) <= 1e-12


def test_weyl_conformal_weight(generic):
    g, w, _ = generic
    gh = intrinsic.conformal_rescale(g, w)
    Wg = intrinsic.weyl(g)
    Wh = intrinsic.weyl(gh)
    e2w = jets.exp(w * 2.0)
    scale = 1.0 + entry_max(Wg)
    for a in range(NV):
        for b in range(NV):
            for i in range(NV):
                for j in range(NV):
                    lhs = intrinsic._mul(e2w, Wg[a][b][i][j])
                    err = entry_max(intrinsic._sub(Wh[a][b][i][j], lhs))
                    assert err <= 1e-12 * scale


def test_cotton_antisymmetry_and_flat_zero(generic, flat_conformal):
    g, _, _ = generic
    C = intrinsic.cotton(g)
    scale = 1.0 + entry_max(C)
    for a in range(NV):
        for b in range(NV):
            for c in range(NV):
                assert entry_max(C[a][b][c] + C[a][c][b]) <= 1e-13 * scale
    assert entry_max(intrinsic.cotton(flat_conformal)) <= 1e-12


def test_bach_zero_conformally_flat(flat_conformal):
    assert entry_max(intrinsic.bach(flat_conformal)) <= 1e-12


def test_bach_zero_round_sphere(sphere_point):
    gs = intrinsic.induced_metric(sphere_point)
    assert entry_max(intrinsic.bach(gs)) <= 1e-12


def test_bach_symmetric_tracefree_divfree(generic):
    g, _, _ = generic
    B = intrinsic.bach(g)
    scale = 1.0 + entry_max(B)
    o = B[0][0].order
    gi = [[g.ginv[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    tr = None
    for a in range(NV):
        for b in range(NV):
            assert entry_max(B[a][b] - B[b][a]) <= 1e-12 * scale
            t = gi[a][b] * B[a][b]
            tr = t if tr is None else tr + t
    assert entry_max(tr) <= 1e-12 * scale
    DB = g.cov_deriv(B, "dd")
    od = DB[0][0][0].order
    giv = [[g.ginv[i][j].truncate(od) for j in range(NV)]
           for i in range(NV)]
    for b in range(NV):
        acc = None
        for e in range(NV):
            for a in range(NV):
                t = giv[e][a] * DB[e][a][b].truncate(od)
                acc = t if acc is None else acc + t
        assert entry_max(acc) <= 1e-12 * scale


def test_bach_conformal_weight(generic):
    g, w, _ = generic
    gh = intrinsic.conformal_rescale(g, w)
    Bg = intrinsic.bach(g)
    Bh = intrinsic.bach(gh)
    e2w = jets.exp(w * 2.0)
    scale = 1.0 + entry_max(Bg)
    for a in range(NV):
        for b in range(NV):
            lhs = intrinsic._mul(e2w, Bh[a][b])
            assert entry_max(intrinsic._sub(lhs, Bg[a][b])) <= 1e-12 * scale


def test_bach_constant_rescale(generic):
    g, _, _ = generic
    g4 = MetricJets([[g.g[i][j] * 4.0 for j in range(NV)]
                     for i in range(NV)])
    Bg = intrinsic.bach(g)
    B4 = intrinsic.bach(g4)
    scale = 1.0 + entry_max(Bg)
    for a in range(NV):
        for b in range(NV):
            err = entry_max(intrinsic._sub(B4[a][b] * 4.0, Bg[a][b]))
            assert err <= 1e-12 * scale


def test_paneitz_sphere_harmonics(sphere_point):
    gs = intrinsic.induced_metric(sphere_point)
    for a in range(sphere_point.m):
        f = sphere_point.components[a]
        Pf = intrinsic.paneitz(gs, f)
        err = entry_max(intrinsic._sub(Pf, f * 24.0))
        assert err <= 1e-12 * 24.0
    one = Jet.constant(np.ones(gs.g[0][0].batch_shape), ORDER)
    assert entry_max(intrinsic.paneitz(gs, one)) <= 1e-12


def test_paneitz_conformal_covariance(generic):
    g, w, pts = generic
    rng = np.random.default_rng(313)
    probe = rand_poly(rng, pts, 0.5, degree=3)
    gh = intrinsic.conformal_rescale(g, w)
    e4w = jets.exp(w * 4.0)
    Pg = intrinsic.paneitz(g, probe)
    Ph = intrinsic.paneitz(gh, probe)
    err = entry_max(intrinsic._sub(intrinsic._mul(e4w, Ph), Pg))
    assert err <= 1e-12 * (1.0 + entry_max(Pg))


def test_q_round_sphere(sphere_point):
    gs = intrinsic.induced_metric(sphere_point)
    q = intrinsic.q_curvature(gs)
    assert np.max(np.abs(q.c[0] - 6.0)) <= 1e-12
    rng = np.random.default_rng(314)
    big = Sphere(2.0).point(rng.uniform(-0.8, 0.8, (4, 3)), ORDER)
    qb = intrinsic.q_curvature(intrinsic.induced_metric(big))
    assert np.max(np.abs(qb.c[0] - 6.0 / 16.0)) <= 1e-12


def test_q_conformal_transformation(generic):
    g, w, _ = generic
    gh = intrinsic.conformal_rescale(g, w)
    e4w = jets.exp(w * 4.0)
    Qg = intrinsic.q_curvature(g)
    Qh = intrinsic.q_curvature(gh)
    Pw = intrinsic.paneitz(g, w)
    lhs = intrinsic._mul(e4w, Qh)
    rhs = intrinsic._add(Qg, Pw)
    err = entry_max(intrinsic._sub(lhs, rhs))
    assert err <= 1e-12 * (1.0 + entry_max(Qg) + entry_max(Pw))


def test_rejects_low_order_metrics():
    rng = np.random.default_rng(315)
    pts = rng.uniform(-0.3, 0.3, (4, 2))
    w = rand_poly(rng, pts, 0.1)
    low = intrinsic.conformally_flat_metric(w.truncate(3))
    with pytest.raises(ValueError):
        intrinsic.bach(low)
    with pytest.raises(ValueError):
        intrinsic.q_curvature(low)
    ok = intrinsic.conformally_flat_metric(w)
    with pytest.raises(ValueError):
        intrinsic.paneitz(ok, w.truncate(3))
