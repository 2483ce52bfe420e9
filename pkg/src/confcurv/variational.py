"""Sixth-order Euler-Lagrange machinery for the conformal energy.

The operator is evaluated literally, term by term, from sixth-order
jets of the immersion: five differential summands plus a bracketed
2-tensor contracted against the second fundamental form.  The module
also carries the explicit conservation-law pieces, the wedge-form
identities used by the regularity theory, and a finite-difference
consistency harness that measures the pairing constant between the
first variation of the energy and the operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import forms
from .energies import ImmersionSpec, _rule_for, integrate
from .forms import Form, ambient_wedge
from .geometry import NV, GeometryFrame, dot, smul
from .jets import Jet


def _addt(a, b):
    """Sum of two jets truncated to the smaller order."""
    o = min(a.order, b.order)
    return a.truncate(o) + b.truncate(o)


def _acc(acc, term):
    return term if acc is None else _addt(acc, term)


def _mult(a, b):
    """Product of two scalar jets truncated to the smaller order."""
    o = min(a.order, b.order)
    return a.truncate(o) * b.truncate(o)


def _val(jet):
    """Value block of a jet (drops the Taylor tail)."""
    return np.asarray(jet.c[0])


def _rel(err, scale):
    """Max residual normalized by the max reference magnitude."""
    return float(np.max(err)) / (float(np.max(scale)) + 1e-30)


class _Workspace:
    """Shared contractions of one geometry frame."""

    def __init__(self, fr):
        self.fr = fr
        gi = fr.ginv
        o = fr.order - 2
        self.h_up = [[None] * NV for _ in range(NV)]
        self.h_mixed = [[None] * NV for _ in range(NV)]
        for i in range(NV):
            for j in range(NV):
                up = None
                for k in range(NV):
                    for l in range(NV):
                        s = (gi[i][k] * gi[j][l]).truncate(o)
                        up = _acc(up, smul(s, fr.h[k][l]))
                self.h_up[i][j] = up
                mixed = None
                for k in range(NV):
                    mixed = _acc(mixed, smul(gi[j][k].truncate(o),
                                             fr.h[i][k]))
                self.h_mixed[i][j] = mixed
        self.pin_up = []
        for i in range(NV):
            acc = None
            for k in range(NV):
                acc = _acc(acc, smul(gi[i][k], fr.pin_dH[k]))
            self.pin_up.append(acc)
        self.mean_sq = dot(fr.H, fr.H)

    def cov_div(self, X):
        """Covariant divergence of an upper-index ambient vector list."""
        fr = self.fr
        acc = None
        for j in range(NV):
            acc = _acc(acc, X[j].partial(j))
        G = fr.gamma
        for j in range(NV):
            for l in range(NV):
                acc = _acc(acc, smul(G[j][j][l], X[l]))
        return acc

    def shape_pairing(self):
        """The normal vector sum_{ij} (H . h^{ij}) h_ij."""
        fr = self.fr
        acc = None
        for i in range(NV):
            for j in range(NV):
                acc = _acc(acc, smul(dot(fr.H, self.h_up[i][j]),
                                     fr.h[i][j]))
        return acc


TERM_NAMES = (
    "perp_bilaplacian",
    "perp_laplacian_shape_pairing",
    "perp_laplacian_mean_cube",
    "mean_gradient_divergence",
    "shape_mean_gradient_divergence",
    "contract_shape_perp_laplacian",
    "contract_mean_gradient_pair",
    "contract_mean_shape_square",
    "contract_shape_pairing",
    "contract_mean_square_shape",
    "contract_energy_density",
)


@dataclass
class ELValue:
    """Pointwise operator value with its term breakdown.

    total is the (m, n) ambient value; terms maps each named summand to
    its own (m, n) contribution, and total is their exact sum.
    """

    total: np.ndarray
    terms: dict

    @property
    def scale(self):
        """Natural pointwise magnitude: sum of term norms, shape (n,)."""
        out = 0.0
        for v in self.terms.values():
            out = out + np.sqrt(np.sum(v * v, axis=0))
        return out


def willmore_operator(point):
    """The sixth-order operator, every displayed summand evaluated.

    Needs jets of order >= 6: the leading term applies the normal
    Laplacian twice to the mean curvature vector.
    """
    if point.order < 6:
        raise ValueError(
            "operator needs jets of order >= 6, got %d" % point.order)
    fr = GeometryFrame(point)
    ws = _Workspace(fr)
    gi = fr.ginv
    H = fr.H
    lapH = fr.lap_perp_H

    terms = {}

    terms["perp_bilaplacian"] = 0.5 * _val(fr.lap_perp(lapH))

    pairing = ws.shape_pairing()
    terms["perp_laplacian_shape_pairing"] = 0.5 * _val(fr.lap_perp(pairing))

    terms["perp_laplacian_mean_cube"] = -7.0 * _val(
        fr.lap_perp(smul(ws.mean_sq, H)))

    dH2 = [ws.mean_sq.partial(k) for k in range(NV)]
    X = []
    for j in range(NV):
        up = None
        for k in range(NV):
            up = _acc(up, _mult(gi[j][k], dH2[k]))
        X.append(smul(up, H))
    terms["mean_gradient_divergence"] = 8.0 * _val(
        fr.project_normal(ws.cov_div(X)))

    Y = []
    for j in range(NV):
        acc = None
        for i in range(NV):
            acc = _acc(acc, smul(dot(H, ws.h_mixed[i][j]), ws.pin_up[i]))
        Y.append(acc)
    terms["shape_mean_gradient_divergence"] = 4.0 * _val(
        fr.project_normal(ws.cov_div(Y)))

    # bracket entries, each contracted against h_ij separately
    def contracted(entry):
        acc = None
        for i in range(NV):
            for j in range(NV):
                acc = _acc(acc, smul(entry(i, j), fr.h[i][j]))
        return _val(acc)

    terms["contract_shape_perp_laplacian"] = contracted(
        lambda i, j: 0.5 * dot(ws.h_up[i][j], lapH))
    terms["contract_mean_gradient_pair"] = contracted(
        lambda i, j: -2.0 * dot(ws.pin_up[i], ws.pin_up[j]))

    def mean_shape_sq(i, j):
        acc = None
        for k in range(NV):
            acc = _acc(acc, _mult(dot(H, ws.h_up[i][k]),
                                  dot(H, ws.h_mixed[k][j])))
        return 2.0 * acc

    terms["contract_mean_shape_square"] = contracted(mean_shape_sq)
    terms["contract_shape_pairing"] = contracted(
        lambda i, j: 0.5 * dot(pairing, ws.h_up[i][j]))
    terms["contract_mean_square_shape"] = contracted(
        lambda i, j: -7.0 * _mult(ws.mean_sq, dot(H, ws.h_up[i][j])))

    grad_sq = None
    for i in range(NV):
        grad_sq = _acc(grad_sq, dot(fr.pin_dH[i], ws.pin_up[i]))
    mean_shape_norm = None
    for i in range(NV):
        for j in range(NV):
            mean_shape_norm = _acc(
                mean_shape_norm,
                _mult(dot(H, fr.h[i][j]), dot(H, ws.h_up[i][j])))
    density = _addt(_addt(grad_sq, -1.0 * mean_shape_norm),
                    7.0 * _mult(ws.mean_sq, ws.mean_sq))
    terms["contract_energy_density"] = contracted(
        lambda i, j: _mult(density, gi[i][j]))

    total = None
    for name in TERM_NAMES:
        total = terms[name] if total is None else total + terms[name]
    return ELValue(total, terms)


def willmore_field(immersion, x, chunk=64):
    """Operator values over a batch of chart points, chunked for memory."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[1]
    out = None
    for lo in range(0, n, chunk):
        block = willmore_operator(immersion.point(x[:, lo:lo + chunk], 6))
        if out is None:
            out = np.empty((block.total.shape[0], n))
        out[:, lo:lo + chunk] = block.total
    return out


# ---------------------------------------------------------------------------
# conservation-law pieces
# ---------------------------------------------------------------------------

@dataclass
class NoetherPieces:
    """Explicit pieces of the translation-invariance current.

    current: (4, m, n), the exactly displayed vector piece per upper
    index.  flux_lead: (4, 4, m, n), the leading normal-derivative
    piece per index pair.  stress_lead: dict of the three displayed
    scalar 2-tensor pieces, each (4, 4, n).  shape_wedge and area_wedge
    are the 2-vector-valued forms entering the flux identities.
    """

    current: np.ndarray
    flux_lead: np.ndarray
    stress_lead: dict
    shape_wedge: Form
    area_wedge: Form


def shape_wedge_form(fr):
    """2-vector-valued 1-form: the raised-index shape tensor wedged with
    the tangent frame, free index stored lower."""
    entries = {}
    gi = fr.ginv
    for a in range(NV):
        acc = None
        for i in range(NV):
            up = None
            for k in range(NV):
                up = _acc(up, smul(gi[i][k], fr.h[a][k]))
            acc = _acc(acc, ambient_wedge(up, fr.dphi[i]))
        entries[(a,)] = acc
    return Form.from_param_entries(1, 2, fr.m, entries)


def area_wedge_form(fr):
    """Canonical 2-vector-valued 2-form: half the tangent frame wedged
    with itself."""
    dphi = Form.from_param_entries(
        1, 1, fr.m, {(i,): fr.dphi[i] for i in range(NV)})
    return forms.wedge(dphi, dphi, ambient="wedge") * 0.5


def noether_pieces(point):
    """Evaluate the exactly displayed conservation-law pieces."""
    if point.order < 4:
        raise ValueError("conservation pieces need jets of order >= 4")
    fr = GeometryFrame(point)
    ws = _Workspace(fr)
    H = fr.H
    lapH = fr.lap_perp_H
    n = point.x.shape[1]
    m = fr.m

    current = np.empty((NV, m, n))
    for j in range(NV):
        acc = None
        for i in range(NV):
            acc = _acc(acc, smul(-2.0 * dot(ws.h_up[i][j], fr.dH[i]), H))
            acc = _acc(acc, smul(2.0 * dot(H, ws.h_up[i][j]),
                                 fr.pin_dH[i]))
        current[j] = _val(acc)

    flux_lead = np.empty((NV, NV, m, n))
    for i in range(NV):
        for j in range(NV):
            flux_lead[i, j] = _val(
                smul(-0.5 * fr.ginv[i][j].truncate(lapH.order), lapH))

    grad_sq = None
    for i in range(NV):
        grad_sq = _acc(grad_sq, dot(fr.pin_dH[i], ws.pin_up[i]))
    stress = {
        "shape_perp_laplacian": np.empty((NV, NV, n)),
        "gradient_square_metric": np.empty((NV, NV, n)),
        "gradient_pair": np.empty((NV, NV, n)),
    }
    for i in range(NV):
        for j in range(NV):
            stress["shape_perp_laplacian"][i, j] = _val(
                0.5 * dot(ws.h_up[i][j], lapH))
            stress["gradient_square_metric"][i, j] = _val(
                _mult(grad_sq, fr.ginv[i][j]))
            stress["gradient_pair"][i, j] = _val(
                -2.0 * dot(ws.pin_up[j], ws.pin_up[i]))

    return NoetherPieces(current, flux_lead, stress,
                         shape_wedge_form(fr), area_wedge_form(fr))


# ---------------------------------------------------------------------------
# identity suite
# ---------------------------------------------------------------------------

def identity_mean_trace(point):
    """Residual of: metric Laplacian of the immersion = 4 x mean vector."""
    fr = GeometryFrame(point)
    n = point.x.shape[1]
    lap = np.empty((fr.m, n))
    for a in range(fr.m):
        comp = Jet(fr.phi.order, fr.phi.c[:, a])
        lap[a] = _val(fr.lap_beltrami(comp))
    want = 4.0 * _val(fr.H)
    return _rel(np.abs(lap - want), np.sqrt(np.sum(want * want, axis=0)))


def identity_gauss(point):
    """Residual of the Gauss equation: intrinsic curvature against the
    antisymmetrized shape dot products."""
    fr = GeometryFrame(point)
    R = fr.riemann
    rhs = fr.gauss_rhs
    err = 0.0
    scale = 0.0
    for a in range(NV):
        for b in range(NV):
            for i in range(NV):
                for j in range(NV):
                    lhs = _val(R[a][b][i][j])
                    r = _val(rhs[a][b][i][j])
                    err = np.maximum(err, np.abs(lhs - r))
                    scale = np.maximum(scale, np.abs(r))
    return _rel(err, scale)


def identity_shape_flux(point):
    """Residuals of the two wedge identities of the shape 1-form.

    codifferential: d* of the shape wedge equals four times the raised
    normal mean gradient wedged with the tangent frame.  exterior: d of
    the shape wedge equals the curvature contraction plus twice the
    shape self-wedge, all indices lowered, with the curvature sign
    fixed by this module's convention.
    """
    if point.order < 3:
        raise ValueError("shape flux identities need jets of order >= 3")
    fr = GeometryFrame(point)
    ws = _Workspace(fr)
    gi = fr.ginv
    hw = shape_wedge_form(fr)

    lhs1 = forms.codifferential(hw, fr.metric).component_ambient(())
    rhs1 = None
    for i in range(NV):
        rhs1 = _acc(rhs1, ambient_wedge(ws.pin_up[i], fr.dphi[i]))
    e1 = np.max(np.abs(_val(lhs1) - 4.0 * _val(rhs1)), axis=0)
    s1 = 4.0 * np.max(np.abs(_val(rhs1)), axis=0)
    res1 = _rel(e1, s1)

    lhs2 = forms.exterior_d(hw)
    o = fr.order - 3
    err2 = 0.0
    scale2 = 0.0
    R = fr.riemann
    for a in range(NV):
        for b in range(a + 1, NV):
            acc = None
            for i in range(NV):
                for j in range(NV):
                    rup = None
                    for k in range(NV):
                        for l in range(NV):
                            s = (gi[i][k] * gi[j][l]).truncate(o)
                            rup = _acc(rup, _mult(s, R[a][b][k][l]))
                    w = ambient_wedge(fr.dphi[i].truncate(o),
                                      fr.dphi[j].truncate(o))
                    acc = _acc(acc, smul(-1.0 * rup, w))
            for i in range(NV):
                acc = _acc(acc, 2.0 * ambient_wedge(ws.h_mixed[b][i],
                                                    fr.h[a][i]))
            got = lhs2.component_ambient((a, b))
            e = np.abs(_val(got) - _val(acc))
            err2 = np.maximum(err2, np.max(e, axis=0))
            scale2 = np.maximum(scale2, np.max(np.abs(_val(acc)), axis=0))
    res2 = _rel(err2, scale2)
    return {"codifferential": res1, "exterior": res2}


def _dphi_up(fr, j, order):
    gi = fr.ginv
    acc = None
    for k in range(NV):
        acc = _acc(acc, smul(gi[j][k].truncate(order),
                             fr.dphi[k].truncate(order)))
    return acc


def identity_mean_flux_trace(point):
    """Residuals of the mean-square flux identities.

    expansion: the four-term display of d* applied to the wedge of the
    mean-square gradient with the tangent frame.  trace: one third of
    its metric contraction against the frame (ambient dot) equals the
    metric Laplacian of the squared mean vector.  divergence_form: one
    third of the same contraction with ambient wedge equals the
    displayed covariant divergence.
    """
    if point.order < 4:
        raise ValueError("mean flux identities need jets of order >= 4")
    fr = GeometryFrame(point)
    ws = _Workspace(fr)
    gi = fr.ginv

    mean_sq = ws.mean_sq
    dphi = Form.from_param_entries(
        1, 1, fr.m, {(i,): fr.dphi[i] for i in range(NV)})
    dH2 = Form.from_param_entries(
        1, 0, fr.m, {(i,): mean_sq.partial(i) for i in range(NV)})
    wedge2 = forms.wedge(dH2, dphi, ambient="mul")
    star = forms.codifferential(wedge2, fr.metric)
    o = star.order

    lap = fr.lap_beltrami(mean_sq)
    hess = fr.cov_deriv([mean_sq.partial(i) for i in range(NV)], "d")
    err = 0.0
    scale = 0.0
    for j in range(NV):
        acc = smul(lap, _dphi_up(fr, j, o))
        for i in range(NV):
            hij = None
            for k in range(NV):
                for l in range(NV):
                    s = (gi[i][k] * gi[j][l]).truncate(o)
                    hij = _acc(hij, _mult(s, hess[k][l]))
            acc = _addt(acc, smul(-1.0 * hij, fr.dphi[i].truncate(o)))
        for i in range(NV):
            acc = _addt(acc, smul(mean_sq.partial(i), ws.h_up[i][j]))
        dH2_up = None
        for k in range(NV):
            dH2_up = _acc(dH2_up, _mult(gi[j][k], mean_sq.partial(k)))
        acc = _addt(acc, smul(-4.0 * dH2_up, fr.H))
        got = None
        for k in range(NV):
            got = _acc(got, smul(gi[j][k].truncate(o),
                                 star.component_ambient((k,))))
        e = np.abs(_val(got) - _val(acc))
        err = np.maximum(err, np.max(e, axis=0))
        scale = np.maximum(scale, np.max(np.abs(_val(acc)), axis=0))
    res_exp = _rel(err, scale)

    traced = forms.contract(star, dphi.truncate(o), fr.metric,
                            ambient="dot")
    got_tr = _val(traced.component(())) / 3.0
    want_tr = _val(lap)
    res_tr = _rel(np.abs(got_tr - want_tr), np.abs(want_tr))

    wtraced = forms.contract(star, dphi.truncate(o), fr.metric,
                             ambient="wedge")
    got_w = _val(wtraced.component_ambient(())) / 3.0
    o2 = fr.order - 3
    X = []
    for i in range(NV):
        acc = None
        for j in range(NV):
            t = ws.h_up[i][j].truncate(o2) - smul(
                4.0 * gi[i][j].truncate(o2), fr.H.truncate(o2))
            acc = _acc(acc, ambient_wedge(t, fr.dphi[j].truncate(o2)))
        X.append(smul(mean_sq, acc))
    want_w = _val(ws.cov_div(X)) / 3.0
    res_div = _rel(np.max(np.abs(got_w - want_w), axis=0),
                   np.max(np.abs(want_w), axis=0))
    return {"expansion": res_exp, "trace": res_tr,
            "divergence_form": res_div}


def identity_perp_conversion(point):
    """Residual of the normal-vs-metric Laplacian conversion for the
    mean vector."""
    if point.order < 4:
        raise ValueError("conversion identity needs jets of order >= 4")
    fr = GeometryFrame(point)
    ws = _Workspace(fr)
    gi = fr.ginv
    n = point.x.shape[1]

    Hjet = fr.H
    lapg = np.empty((fr.m, n))
    for a in range(fr.m):
        comp = Jet(Hjet.order, Hjet.c[:, a])
        lapg[a] = _val(fr.lap_beltrami(comp))

    acc = _addt(fr.lap_perp_H, -1.0 * ws.shape_pairing())

    o = fr.order - 3
    S = [[_addt(_mult(ws.mean_sq, gi[i][j]),
                -1.0 * dot(fr.H, ws.h_up[i][j])).truncate(o)
          for j in range(NV)] for i in range(NV)]
    G = fr.gamma
    for j in range(NV):
        divj = None
        for i in range(NV):
            divj = _acc(divj, S[i][j].partial(i))
            for k in range(NV):
                divj = _acc(divj, _mult(G[i][i][k], S[k][j]))
                divj = _acc(divj, _mult(G[j][i][k], S[i][k]))
        acc = _addt(acc, smul(2.0 * divj, fr.dphi[j]))

    want = _val(acc)
    scale = np.sqrt(np.sum(want * want, axis=0))
    return _rel(np.max(np.abs(lapg - want), axis=0), scale)


def identity_suite(point):
    """Max relative residual of every implemented identity at a batch."""
    out = {"mean_trace": identity_mean_trace(point),
           "gauss": identity_gauss(point)}
    flux = identity_shape_flux(point)
    out["shape_flux_codifferential"] = flux["codifferential"]
    out["shape_flux_exterior"] = flux["exterior"]
    mean = identity_mean_flux_trace(point)
    out["mean_flux_expansion"] = mean["expansion"]
    out["mean_flux_trace"] = mean["trace"]
    out["mean_flux_divergence"] = mean["divergence_form"]
    out["perp_conversion"] = identity_perp_conversion(point)
    return out


# ---------------------------------------------------------------------------
# variational consistency
# ---------------------------------------------------------------------------

class AmbientPolynomialField:
    """Polynomial vector field on the ambient space, pulled back along a
    base immersion.

    coeffs maps a monomial (tuple of ambient component indices, empty
    for the constant term) to a length-m coefficient vector; the field
    value at a chart point is sum_mono coeffs[mono] * prod_a y_a with
    y the base immersion value.  Composing with the immersion keeps
    every jet rational on rational charts, which is what makes the
    pairing quadrature converge quickly on decay charts.
    """

    def __init__(self, base, coeffs):
        self.base = base
        self.coeffs = {tuple(k): np.asarray(v, dtype=np.float64)
                       for k, v in coeffs.items()}
        for vec in self.coeffs.values():
            if vec.shape != (base.m,):
                raise ValueError("coefficient vectors must have length m")
        self.chart = base.chart
        self.m = base.m

    @staticmethod
    def random(base, rng, degree=2, scale=0.25):
        """Dense random field with all monomials up to the given degree."""
        coeffs = {}
        for d in range(1, degree + 1):
            for mono in itertools.combinations_with_replacement(
                    range(base.m), d):
                coeffs[mono] = scale * rng.standard_normal(base.m)
        return AmbientPolynomialField(base, coeffs)

    def point(self, x, order):
        p = self.base.point(x, order)
        comps = [Jet(p.phi.order, p.phi.c[:, a]) for a in range(self.m)]
        out = None
        for mono, vec in self.coeffs.items():
            t = None
            for a in mono:
                t = comps[a] if t is None else t * comps[a]
            if t is None:
                c = np.zeros_like(comps[0].c)
                c[0] = 1.0
                t = Jet(p.phi.order, c)
            term = Jet(t.order, t.c[:, None] * vec[:, None])
            out = term if out is None else out + term
        return type(p)(out, x)


class TangentialField:
    """Tangent-space projection of a displacement field along a base."""

    def __init__(self, base, field):
        if base.m != field.m:
            raise ValueError("field dimension mismatch")
        self.base = base
        self.field = field
        self.chart = base.chart
        self.m = base.m

    def point(self, x, order):
        deep = self.base.point(x, order + 1)
        q = self.field.point(x, order)
        fr = GeometryFrame(deep)
        return type(deep)(fr.project_tangent(q.phi), x)


class Displaced:
    """Immersion plus a scalar multiple of an ambient displacement field."""

    def __init__(self, base, field, scale):
        if base.m != field.m:
            raise ValueError("displacement field dimension mismatch")
        self.base = base
        self.field = field
        self.scale = float(scale)
        self.chart = base.chart
        self.m = base.m

    def point(self, x, order):
        p = self.base.point(x, order)
        q = self.field.point(x, order)
        return type(p)(p.phi + q.phi * self.scale, x)


class PairingField:
    """Operator values over a quadrature grid, reusable across variations."""

    def __init__(self, immersion, resolution=8, chunk=64):
        rule = _rule_for(immersion.chart, resolution)
        self.immersion = immersion
        self.resolution = resolution
        n = rule.total_nodes
        self.values = np.empty((immersion.m, n))
        self.weights = np.empty(n)
        self.area = np.empty(n)
        self.nodes = np.empty((4, n))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            x, w = rule.node_block(lo, hi)
            pt = immersion.point(x, 6)
            self.values[:, lo:hi] = willmore_operator(pt).total
            self.area[lo:hi] = _val(GeometryFrame(pt).sqrtg)
            self.weights[lo:hi] = w
            self.nodes[:, lo:hi] = x

    def pair(self, field):
        """Integral of the operator dotted with the field over the grid."""
        pt = field.point(self.nodes, 0)
        phi = np.asarray(pt.phi.c[0])
        return float(np.sum(self.weights * self.area
                            * np.sum(self.values * phi, axis=0)))


@dataclass
class VariationalReport:
    """Central differences of the energy against the operator pairing."""

    steps: tuple
    diffs: tuple
    pairing: float
    ratios: tuple
    extrapolated: float

    @property
    def constant(self):
        if self.pairing == 0.0:
            return float("nan")
        return self.extrapolated / self.pairing


def variational_consistency(base, field, steps=(1e-2, 5e-3, 2.5e-3),
                            resolution=12, pairing=None):
    """Measure the pairing constant between energy variation and operator.

    Returns the central differences D(t) of the conformal energy along
    the displacement field, the grid pairing P of the operator with the
    field, the ratios D(t)/P, and the Richardson limit of D (two
    second-order eliminations over the halving step sequence).
    """
    steps = tuple(float(t) for t in steps)
    if len(steps) != 3 or not all(t > 0 for t in steps):
        raise ValueError("needs three positive halving steps")
    if abs(steps[0] / steps[1] - 2.0) > 1e-9 or \
            abs(steps[1] / steps[2] - 2.0) > 1e-9:
        raise ValueError("steps must halve: (t, t/2, t/4)")
    if steps[-1] < 1e-6:
        raise ValueError("smallest step is below the roundoff floor")
    diffs = []
    for t in steps:
        plus = integrate(ImmersionSpec(Displaced(base, field, t),
                                       resolution), integrand="conformal")
        minus = integrate(ImmersionSpec(Displaced(base, field, -t),
                                        resolution), integrand="conformal")
        diffs.append((plus.conformal_total - minus.conformal_total)
                     / (2.0 * t))
    if pairing is None:
        pairing = PairingField(base)
    P = pairing.pair(field)
    r1 = (4.0 * diffs[1] - diffs[0]) / 3.0
    r2 = (4.0 * diffs[2] - diffs[1]) / 3.0
    extrap = (16.0 * r2 - r1) / 15.0
    ratios = tuple(d / P if P != 0.0 else float("nan") for d in diffs)
    return VariationalReport(steps, tuple(diffs), P, ratios, extrap)
