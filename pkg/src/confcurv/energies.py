"""Curvature energies of immersed four-manifolds and their quadrature.

The conformal density combines the projected gradient of the mean
curvature vector with contractions of the second fundamental form;
four quartic invariants of the trace-free second fundamental form make
up the lower-order part of the weighted energy.  Two independent
evaluation routes are kept side by side:

* a packed-derivative pipeline (`derivative_arrays` + `integrand_fields`)
  that works on plain numpy arrays of first, second and third partials
  and vectorizes over large node batches, and
* a jet route (`integrand_conformal` / `integrand_quartics`) built on
  GeometryFrame, written to mirror the defining contractions term by
  term.

`integrate` runs the fast route over a quadrature rule chosen by the
chart of the immersion and returns an EnergyReport; the frame route is
the reference the fast route is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .geometry import GeometryFrame, dot

NV = 4

# default weight on the |h0|^4 invariant: the smallest coefficient that
# keeps the weighted energy bounded below, plus a small margin
DEFAULT_BETA = (1.0 / 12.0 + 0.01, 0.0, 0.0, 0.0)

# ---------------------------------------------------------------------------
# packed symmetric index tables
# ---------------------------------------------------------------------------

PAIRS = [(i, j) for i in range(NV) for j in range(i, NV)]
TRIPLES = [(i, j, k) for i in range(NV) for j in range(i, NV)
           for k in range(j, NV)]

PAIR_POS = {p: r for r, p in enumerate(PAIRS)}
TRIP_POS = {t: r for r, t in enumerate(TRIPLES)}

PAIR_IDX = np.empty((NV, NV), dtype=np.int64)
for (i, j), r in PAIR_POS.items():
    PAIR_IDX[i, j] = PAIR_IDX[j, i] = r

TRIP_IDX = np.empty((NV, NV, NV), dtype=np.int64)
for (i, j, k) in [(a, b, c) for a in range(NV) for b in range(NV)
                  for c in range(NV)]:
    TRIP_IDX[i, j, k] = TRIP_POS[tuple(sorted((i, j, k)))]

PAIR_I = np.array([p[0] for p in PAIRS])
PAIR_J = np.array([p[1] for p in PAIRS])
# how many ordered index pairs map to each packed slot
PAIR_MULT = np.array([1.0 if i == j else 2.0 for (i, j) in PAIRS])

# rows of the packed third-derivative array contracted against each pair
# slot, for every value of the free first index
TRIP_OF = np.stack([TRIP_IDX[i, PAIR_I, PAIR_J] for i in range(NV)])

# extraction tables: which jet coefficient holds each packed partial and
# the factorial that turns the coefficient into the derivative value
_SP3 = jets.jet_space(3)


def _unit(k):
    e = [0, 0, 0, 0]
    e[k] = 1
    return tuple(e)


def _multi(ix):
    e = [0, 0, 0, 0]
    for k in ix:
        e[k] += 1
    return tuple(e)


D1_ROWS = np.array([_SP3.index[_unit(k)] for k in range(NV)])
D2_ROWS = np.array([_SP3.index[_multi(p)] for p in PAIRS])
D3_ROWS = np.array([_SP3.index[_multi(t)] for t in TRIPLES])
D2_FACS = np.array([_SP3.factorials[r] for r in D2_ROWS])
D3_FACS = np.array([_SP3.factorials[r] for r in D3_ROWS])


def derivative_arrays(point):
    """Extract packed partial derivatives of the immersion.

    Returns (D1, D2, D3) with shapes (4, m, n), (10, m, n), (20, m, n):
    first derivatives, symmetric second derivatives on increasing index
    pairs, and symmetric third derivatives on increasing triples.
    """
    if point.order < 3:
        raise ValueError("third derivatives need a jet of order >= 3")
    c = point.phi.c
    if c.ndim == 2:
        c = c[:, :, None]
    D1 = c[D1_ROWS]
    D2 = c[D2_ROWS] * D2_FACS[:, None, None]
    D3 = c[D3_ROWS] * D3_FACS[:, None, None]
    return D1, D2, D3


# ---------------------------------------------------------------------------
# fast vectorized densities
# ---------------------------------------------------------------------------

FIELD_NAMES = ("area", "conformal", "quartic_norm", "quartic_gram",
               "quartic_square", "quartic_trace")
QUARTIC_NAMES = FIELD_NAMES[2:]


def _inv4(g):
    """Determinant and inverse of a stack of 4x4 matrices, cofactor form.

    g has shape (4, 4, n).  A singular matrix yields inf/nan entries
    rather than an exception, so downstream finiteness checks can point
    at the offending node.
    """
    s0 = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    s1 = g[0, 0] * g[1, 2] - g[0, 2] * g[1, 0]
    s2 = g[0, 0] * g[1, 3] - g[0, 3] * g[1, 0]
    s3 = g[0, 1] * g[1, 2] - g[0, 2] * g[1, 1]
    s4 = g[0, 1] * g[1, 3] - g[0, 3] * g[1, 1]
    s5 = g[0, 2] * g[1, 3] - g[0, 3] * g[1, 2]
    c5 = g[2, 2] * g[3, 3] - g[2, 3] * g[3, 2]
    c4 = g[2, 1] * g[3, 3] - g[2, 3] * g[3, 1]
    c3 = g[2, 1] * g[3, 2] - g[2, 2] * g[3, 1]
    c2 = g[2, 0] * g[3, 3] - g[2, 3] * g[3, 0]
    c1 = g[2, 0] * g[3, 2] - g[2, 2] * g[3, 0]
    c0 = g[2, 0] * g[3, 1] - g[2, 1] * g[3, 0]
    det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
    gi = np.empty_like(g)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rd = 1.0 / det
        gi[0, 0] = (g[1, 1] * c5 - g[1, 2] * c4 + g[1, 3] * c3) * rd
        gi[0, 1] = (-g[0, 1] * c5 + g[0, 2] * c4 - g[0, 3] * c3) * rd
        gi[0, 2] = (g[3, 1] * s5 - g[3, 2] * s4 + g[3, 3] * s3) * rd
        gi[0, 3] = (-g[2, 1] * s5 + g[2, 2] * s4 - g[2, 3] * s3) * rd
        gi[1, 0] = (-g[1, 0] * c5 + g[1, 2] * c2 - g[1, 3] * c1) * rd
        gi[1, 1] = (g[0, 0] * c5 - g[0, 2] * c2 + g[0, 3] * c1) * rd
        gi[1, 2] = (-g[3, 0] * s5 + g[3, 2] * s2 - g[3, 3] * s1) * rd
        gi[1, 3] = (g[2, 0] * s5 - g[2, 2] * s2 + g[2, 3] * s1) * rd
        gi[2, 0] = (g[1, 0] * c4 - g[1, 1] * c2 + g[1, 3] * c0) * rd
        gi[2, 1] = (-g[0, 0] * c4 + g[0, 1] * c2 - g[0, 3] * c0) * rd
        gi[2, 2] = (g[3, 0] * s4 - g[3, 1] * s2 + g[3, 3] * s0) * rd
        gi[2, 3] = (-g[2, 0] * s4 + g[2, 1] * s2 - g[2, 3] * s0) * rd
        gi[3, 0] = (-g[1, 0] * c3 + g[1, 1] * c1 - g[1, 2] * c0) * rd
        gi[3, 1] = (g[0, 0] * c3 - g[0, 1] * c1 + g[0, 2] * c0) * rd
        gi[3, 2] = (-g[3, 0] * s3 + g[3, 1] * s1 - g[3, 2] * s0) * rd
        gi[3, 3] = (g[2, 0] * s3 - g[2, 1] * s1 + g[2, 2] * s0) * rd
    return det, gi


def integrand_fields(D1, D2, D3, quartics=True):
    """All pointwise densities from packed derivative arrays.

    Returns a dict of (n,) arrays: "area" is the metric volume density
    sqrt(det g); "conformal" is the conformally invariant density; the
    four "quartic_*" fields are the quartic invariants of the trace-free
    second fundamental form.  Densities are reported without the area
    weight.  With quartics=False only "area", "conformal" and
    "quartic_norm" are computed (the combination the descent flow
    weights), and the remaining entries are omitted.
    """
    g = np.einsum("ian,jan->ijn", D1, D1)
    det, gi = _inv4(g)

    # second-derivative contractions and Christoffel symbols
    t2 = np.einsum("pan,kan->pkn", D2, D1)
    gam = np.einsum("lkn,pkn->lpn", gi, t2)
    h = D2 - np.einsum("lpn,lan->pan", gam, D1)

    giw = gi[PAIR_I, PAIR_J] * PAIR_MULT[:, None]
    H = 0.25 * np.einsum("pn,pan->an", giw, h)
    H2 = np.einsum("an,an->n", H, H)

    # mixed and fully raised forms of h
    hfull = h[PAIR_IDX]
    hmix = np.einsum("ikn,klan->ilan", gi, hfull)
    hup = np.einsum("jln,ilan->ijan", gi, hmix)

    # normal part of the derivative of H, assembled from the identity
    # pi_n d_i H = v_i + pi_n(w_i) with v_i collecting the metric and
    # Christoffel derivative terms (v_i is normal already) and w_i the
    # raw third-derivative trace
    P = t2[PAIR_IDX]
    dg = P + P.transpose(0, 2, 1, 3)
    ctr = np.einsum("pn,lpn->ln", giw, gam)
    v = -0.25 * (np.einsum("iabn,abcn->icn", dg, hup)
                 + np.einsum("ln,ilan->ian", ctr, hfull))
    w = 0.25 * np.stack([np.einsum("pn,pan->an", giw, D3[TRIP_OF[i]])
                         for i in range(NV)])
    tw = np.einsum("kan,ian->kin", D1, w)
    sw = np.einsum("lkn,kin->lin", gi, tw)
    pdH = v + w - np.einsum("lin,lan->ian", sw, D1)

    pdH2 = np.einsum("ijn,ian,jan->n", gi, pdH, pdH)

    Hh = np.einsum("an,pan->pn", H, h)
    Hhf = Hh[PAIR_IDX]
    Hh2 = np.einsum("ikn,jln,ijn,kln->n", gi, gi, Hhf, Hhf)

    conformal = pdH2 - Hh2 + 7.0 * H2 * H2

    h2 = np.einsum("ijan,ijan->n", hup, hfull)
    h02 = h2 - 4.0 * H2
    with np.errstate(invalid="ignore"):
        area = np.sqrt(det)
    out = {
        "area": area,
        "conformal": conformal,
        "quartic_norm": h02 * h02,
        "_det": det,
    }
    if not quartics:
        return out

    h0f = hfull - g[:, :, None, :] * H[None, None, :, :]
    h0up = hup - gi[:, :, None, :] * H[None, None, :, :]

    K = np.einsum("ijan,ijbn->abn", h0up, h0f)
    out["quartic_gram"] = np.einsum("abn,abn->n", K, K)

    P = np.einsum("ikan,jkan->ijn", h0f, h0up)
    out["quartic_square"] = np.einsum("ijn,jin->n", P, P)

    M = np.einsum("ijan,ilbn->jlabn", h0up, h0f)
    out["quartic_trace"] = np.einsum("jlabn,ljabn->n", M, M)
    return out


# ---------------------------------------------------------------------------
# frame route: term-by-term reference densities
# ---------------------------------------------------------------------------

def integrand_conformal(fr: GeometryFrame):
    """Conformal density from a GeometryFrame, at the value level.

    |pi_n dH|^2 - |H.h|^2 + 7 |H|^4 with
    |pi_n dH|^2 = g^{ij} (pi_n d_i H).(pi_n d_j H) and
    |H.h|^2 = g^{ik} g^{jl} (H.h_ij)(H.h_kl).
    """
    o = fr.order - 3
    gi = [[fr.ginv[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    pd = [p.truncate(o) for p in fr.pin_dH]
    acc = None
    for i in range(NV):
        for j in range(NV):
            t = gi[i][j] * dot(pd[i], pd[j])
            acc = t if acc is None else acc + t
    pdH2 = acc.c[0]

    Hh = [[dot(fr.H, fr.h[i][j]) for j in range(NV)] for i in range(NV)]
    oh = fr.order - 2
    gih = [[fr.ginv[i][j].truncate(oh) for j in range(NV)] for i in range(NV)]
    Hh2 = 0.0
    for i in range(NV):
        for j in range(NV):
            for k in range(NV):
                for l in range(NV):
                    Hh2 = Hh2 + (gih[i][k] * gih[j][l] * Hh[i][j]
                                 * Hh[k][l]).c[0]
    H2 = dot(fr.H, fr.H)
    return pdH2 - Hh2 + 7.0 * (H2 * H2).c[0]


def integrand_quartics(fr: GeometryFrame):
    """The four quartic invariants of h0 from a GeometryFrame.

    Returns (norm, gram, square, trace) at the value level, written as
    the literal index contractions: (|h0|^2)^2; the pairing of the fully
    raised h0 with itself against the fully lowered one; the trace of
    the squared mixed matrix P_i^j = h0_{ik} . h0^{jk}; and the cyclic
    fourth trace h0^{ij} h0^{kl} h0_{il} h0_{kj}.
    """
    o = fr.order - 2
    gi = [[fr.ginv[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    h0 = fr.h0
    h0up = [[None] * NV for _ in range(NV)]
    for i in range(NV):
        for j in range(NV):
            up = None
            for k in range(NV):
                for l in range(NV):
                    s = jets.Jet(o, (gi[i][k] * gi[j][l]).c[:, None]) \
                        * h0[k][l]
                    up = s if up is None else up + s
            h0up[i][j] = up

    norm = 0.0
    gram = 0.0
    trace = 0.0
    for i in range(NV):
        for j in range(NV):
            norm = norm + dot(h0up[i][j], h0[i][j]).c[0]
            for k in range(NV):
                for l in range(NV):
                    a = dot(h0up[i][j], h0up[k][l]).c[0]
                    gram = gram + a * dot(h0[i][j], h0[k][l]).c[0]
                    trace = trace + (dot(h0up[i][j], h0up[k][l]).c[0]
                                     * dot(h0[i][l], h0[k][j]).c[0])
    pmix = [[None] * NV for _ in range(NV)]
    for i in range(NV):
        for j in range(NV):
            acc = None
            for k in range(NV):
                t = dot(h0[i][k], h0up[j][k])
                acc = t if acc is None else acc + t
            pmix[i][j] = acc
    square = 0.0
    for i in range(NV):
        for j in range(NV):
            square = square + (pmix[i][j] * pmix[j][i]).c[0]
    return norm * norm, gram, square, trace


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

class _TorusRule:
    """Uniform product grid on [0, 2pi)^4; trapezoid weights.

    Spectrally accurate for smooth periodic integrands.
    """

    def __init__(self, res):
        self.res = res
        self.name = "torus-trapezoid"
        self.total_nodes = res ** 4
        self._w = (2.0 * math.pi / res) ** 4
        self._step = 2.0 * math.pi / res

    def node_block(self, lo, hi):
        idx = np.arange(lo, hi)
        r = self.res
        x = np.stack([(idx // r ** 3) % r, (idx // r ** 2) % r,
                      (idx // r) % r, idx % r]).astype(np.float64)
        return x * self._step, np.full(hi - lo, self._w)


class _BoxRule:
    """Midpoint product grid on a bounded box, for open flat pieces."""

    def __init__(self, res, half=1.0):
        self.res = res
        self.half = half
        self.name = "box-midpoint"
        self.total_nodes = res ** 4
        self._w = (2.0 * half / res) ** 4

    def node_block(self, lo, hi):
        idx = np.arange(lo, hi)
        r = self.res
        cells = np.stack([(idx // r ** 3) % r, (idx // r ** 2) % r,
                          (idx // r) % r, idx % r]).astype(np.float64)
        x = -self.half + (cells + 0.5) * (2.0 * self.half / r)
        return x, np.full(hi - lo, self._w)


class _SphereRule:
    """Radial-angular rule for decaying charts on all of R^4.

    The radius is compactified by r = tan(u/2), u in (0, pi), with
    Gauss-Legendre nodes in u and in the two polar angles and a uniform
    (spectrally exact) grid in the azimuth.  The weight carries the
    full Euclidean volume element r^3 sin^2(psi) sin(theta) together
    with the Jacobian (1 + r^2)/2 of the compactification, so the rule
    integrates f(x) d^4x for any integrand decaying at infinity.
    """

    def __init__(self, res):
        self.res = res
        self.name = "sphere-radial-gl"
        self.total_nodes = res ** 4
        un, uw = np.polynomial.legendre.leggauss(res)
        self._u = 0.5 * math.pi * (un + 1.0)
        self._uw = 0.5 * math.pi * uw
        self._psi = self._u
        self._psiw = self._uw
        self._th = self._u
        self._thw = self._uw
        self._ph = 2.0 * math.pi * (np.arange(res) + 0.5) / res
        self._phw = np.full(res, 2.0 * math.pi / res)

    def node_block(self, lo, hi):
        idx = np.arange(lo, hi)
        r = self.res
        iu, ip = (idx // r ** 3) % r, (idx // r ** 2) % r
        it, iq = (idx // r) % r, idx % r
        u = self._u[iu]
        rad = np.tan(0.5 * u)
        psi, th, ph = self._psi[ip], self._th[it], self._ph[iq]
        sp, st = np.sin(psi), np.sin(th)
        omega = np.stack([sp * st * np.cos(ph), sp * st * np.sin(ph),
                          sp * np.cos(th), np.cos(psi)])
        w = (self._uw[iu] * self._psiw[ip] * self._thw[it] * self._phw[iq]
             * rad ** 3 * sp * sp * st * 0.5 * (1.0 + rad * rad))
        return rad * omega, w


def _rule_for(chart, res):
    if chart == "torus":
        return _TorusRule(res)
    if chart == "decay":
        return _SphereRule(res)
    if chart == "plane":
        return _BoxRule(res)
    raise ValueError(f"unknown chart kind: {chart!r}")


# ---------------------------------------------------------------------------
# specs and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImmersionSpec:
    """An immersion generator plus the grid it is evaluated on."""

    immersion: object
    resolution: int = 16

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8 per axis")
        chart = getattr(self.immersion, "chart", None)
        if chart not in ("torus", "decay", "plane"):
            raise ValueError(f"immersion chart {chart!r} not supported")

    @property
    def chart(self):
        return self.immersion.chart


class EnergyError(RuntimeError):
    """Raised when an integrand field is not finite at some node."""

    def __init__(self, message, node=None, coords=None):
        super().__init__(message)
        self.node = node
        self.coords = coords


@dataclass
class EnergyReport:
    """Quadrature totals and per-node densities of one energy evaluation."""

    conformal_total: float
    quartic_totals: np.ndarray
    weighted_total: float
    beta: tuple
    fields: dict
    weights: np.ndarray
    rule: str
    resolution: int
    nodes: int

    def record_lines(self):
        """Line-delimited records: name value resolution rule."""
        rows = [("conformal", self.conformal_total)]
        rows += list(zip(QUARTIC_NAMES, self.quartic_totals))
        rows.append(("weighted", self.weighted_total))
        return [f"{name}={value:.16e} resolution={self.resolution} "
                f"rule={self.rule}" for name, value in rows]


def _check_finite(fields, lo, x):
    for name, arr in fields.items():
        bad = ~np.isfinite(arr)
        if bad.any():
            k = int(np.argmax(bad))
            raise EnergyError(
                f"integrand field '{name}' is not finite at node "
                f"{lo + k} (chart point {x[:, k].tolist()})",
                node=lo + k, coords=x[:, k].copy())


def integrate(spec, integrand="all", beta=None, chunk=4096):
    """Evaluate energy totals for an ImmersionSpec.

    integrand selects which densities are computed: "all" (default),
    "conformal", or "quartics".  Totals are quadrature sums of density
    times the metric area element; the reduction is a fixed-tree
    pairwise sum over the whole grid, so results do not depend on the
    chunk size.
    """
    if integrand not in ("all", "conformal", "quartics"):
        raise ValueError(f"unknown integrand selector: {integrand!r}")
    if beta is None:
        beta = DEFAULT_BETA
    beta = tuple(float(b) for b in beta)
    if len(beta) != 4:
        raise ValueError("beta must supply four quartic coefficients")

    imm = spec.immersion
    rule = _rule_for(spec.chart, spec.resolution)
    n = rule.total_nodes
    names = FIELD_NAMES
    grids = {name: np.empty(n) for name in names}
    wts = np.empty(n)

    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        x, w = rule.node_block(lo, hi)
        pt = imm.point(x, 3)
        D1, D2, D3 = derivative_arrays(pt)
        f = integrand_fields(D1, D2, D3)
        del f["_det"]
        _check_finite(f, lo, x)
        for name in names:
            grids[name][lo:hi] = f[name]
        wts[lo:hi] = w

    wa = wts * grids["area"]
    conformal = float(np.sum(wa * grids["conformal"]))
    quartics = np.array([float(np.sum(wa * grids[name]))
                         for name in QUARTIC_NAMES])
    weighted = conformal + float(np.dot(beta, quartics))
    return EnergyReport(conformal_total=conformal, quartic_totals=quartics,
                        weighted_total=weighted, beta=beta, fields=grids,
                        weights=wts, rule=rule.name,
                        resolution=spec.resolution, nodes=n)


# ---------------------------------------------------------------------------
# conformal invariance harness
# ---------------------------------------------------------------------------

ISOMETRIES = ("translate", "rotate")
TRANSFORMS = ("translate", "rotate", "dilate", "invert")


def _apply_transform(imm, kind, param):
    from . import immersions as im

    if kind == "translate":
        return im.Translated(imm, param)
    if kind == "rotate":
        return im.Rotated(imm, param)
    if kind == "dilate":
        return im.Dilated(imm, param)
    if kind == "invert":
        return im.Inverted(imm, param)
    raise ValueError(f"unknown transform kind: {kind!r}")


def image_distance(spec, center, chunk=4096):
    """Smallest distance from the sampled image to an ambient point."""
    rule = _rule_for(spec.chart, spec.resolution)
    c = np.asarray(center, dtype=np.float64)
    best = np.inf
    for lo in range(0, rule.total_nodes, chunk):
        x, _ = rule.node_block(lo, min(lo + chunk, rule.total_nodes))
        pt = spec.immersion.point(x, 0)
        d = pt.phi.c[0] - c[:, None]
        best = min(best, float(np.sqrt(np.einsum("an,an->n", d, d).min())))
    return best


def conformal_invariance_check(spec, transform, beta=None,
                               min_distance=1.0):
    """Compare energy totals before and after an ambient conformal map.

    transform is a (kind, parameter) pair with kind in
    {"translate", "rotate", "dilate", "invert"}.  Closed charts (torus,
    decay) compare totals under every transform; open plane pieces only
    admit isometries and compare densities pointwise.  An inversion
    whose center comes within min_distance of the sampled image is
    rejected.  Returns a report dict with both sets of totals and
    relative residuals.
    """
    kind, param = transform
    if kind not in TRANSFORMS:
        raise ValueError(f"unknown transform kind: {kind!r}")
    closed = spec.chart in ("torus", "decay")
    if not closed and kind not in ISOMETRIES:
        raise ValueError(
            "open pieces admit pointwise comparison under isometries only")
    if kind == "invert":
        gap = image_distance(spec, param)
        if not gap > min_distance:
            raise ValueError(
                f"inversion center at distance {gap:.3g} from the image; "
                f"need more than {min_distance:.3g}")

    mapped = ImmersionSpec(_apply_transform(spec.immersion, kind, param),
                           spec.resolution)
    base = integrate(spec, beta=beta)
    moved = integrate(mapped, beta=beta)

    names = ("conformal",) + QUARTIC_NAMES
    bvals = dict(zip(names, [base.conformal_total, *base.quartic_totals]))
    mvals = dict(zip(names, [moved.conformal_total, *moved.quartic_totals]))
    scale = max(max(abs(v) for v in bvals.values()), 1e-300)
    resid = {k: abs(bvals[k] - mvals[k]) / max(abs(bvals[k]), 1e-6 * scale)
             for k in names}

    report = {"transform": kind, "mode": "totals" if closed else "pointwise",
              "baseline": bvals, "transformed": mvals, "residual": resid}
    if kind in ISOMETRIES:
        # normalize each field against its own scale, floored by the
        # largest field so identically-zero densities stay comparable
        big = max(float(np.max(np.abs(base.fields[name]))) for name in names)
        pw = 0.0
        for name in names:
            a, b = base.fields[name], moved.fields[name]
            den = max(float(np.max(np.abs(a))), 1e-9 * big, 1e-300)
            pw = max(pw, float(np.max(np.abs(a - b))) / den)
        report["pointwise_max"] = pw
    return report
