"""Intrinsic conformal curvature of four-dimensional metrics.

Everything here consumes a metric handed over as component jets on a
four-dimensional chart (see geometry.MetricJets) and returns pointwise
curvature jets.  The toolbox covers the trace-adjusted Ricci tensor
(Schouten), the totally trace-free curvature (Weyl), its antisymmetrized
first derivative (Cotton), the fourth-order conformally covariant scalar
operator (Paneitz), the fourth-order curvature scalar it prescribes
(Q-curvature), and the conformal obstruction tensor (Bach).

Conventions.  The Laplacian is the plain trace g^{ij} nabla_i nabla_j,
negative on low sphere harmonics.  The stored curvature layout follows
geometry.MetricJets.riemann: R[a][b][i][j] equals g_ai g_bj - g_aj g_bi
on the unit round sphere, and contracting slots one and three with the
inverse metric yields the Ricci tensor.  The Q-curvature is normalized
to the value six on the unit round four-sphere, which pairs with the
Paneitz operator through

    exp(4 w) Q[exp(2 w) g] = Q[g] + P[g] w.

The Bach tensor is assembled by contracting the Schouten derivative into
the Cotton tensor first and differentiating once more, so the four-index
trace-free curvature is never differentiated twice.
"""

import numpy as np

from . import jets
from .jets import Jet
from .geometry import NV, GeometryFrame, MetricJets

__all__ = [
    "induced_metric",
    "conformally_flat_metric",
    "conformal_rescale",
    "schouten",
    "weyl",
    "cotton",
    "bach",
    "paneitz",
    "q_curvature",
    "component_max",
]


def _pair(a, b):
    """Truncate two jets to their common order."""
    o = min(a.order, b.order)
    return a.truncate(o), b.truncate(o)


def _mul(a, b):
    a, b = _pair(a, b)
    return a * b


def _add(a, b):
    a, b = _pair(a, b)
    return a + b


def _sub(a, b):
    a, b = _pair(a, b)
    return a - b


def component_max(tensor):
    """Largest absolute pointwise value over a nested tensor of jets."""
    if isinstance(tensor, Jet):
        return float(np.max(np.abs(tensor.c[0])))
    return max(component_max(entry) for entry in tensor)


# -- metric constructors ------------------------------------------------


def induced_metric(point):
    """Pullback metric of an immersion jet, as MetricJets."""
    return GeometryFrame(point).metric


def conformally_flat_metric(w):
    """The metric exp(2 w) delta_ij built from a scalar jet w."""
    f = jets.exp(w * 2.0)
    zero = Jet(f.order, np.zeros_like(f.c))
    g = [[f if i == j else zero for j in range(NV)] for i in range(NV)]
    return MetricJets(g)


def conformal_rescale(metric, w):
    """The metric exp(2 w) g for a scalar jet w on the same chart."""
    o = min(metric.order, w.order)
    f = jets.exp(w.truncate(o) * 2.0)
    g = [[_mul(f, metric.g[i][j]) for j in range(NV)] for i in range(NV)]
    return MetricJets(g)


# -- curvature tensors ---------------------------------------------------


def schouten(metric):
    """Trace-adjusted Ricci tensor S[i][j] and its trace, as a pair.

    In dimension four S = (Ric - J g) / 2 with J = scal / 6, so the
    Ricci tensor reassembles as Ric = 2 S + J g.
    """
    if metric.order < 2:
        raise ValueError("schouten needs metric jets of order two or more")
    o = metric.order - 2
    J = metric.scal * (1.0 / 6.0)
    ric = metric.ricci
    S = [[None] * NV for _ in range(NV)]
    for i in range(NV):
        for j in range(i, NV):
            sym = (ric[i][j] + ric[j][i]) * 0.5
            entry = (sym - _mul(J, metric.g[i][j].truncate(o))) * 0.5
            S[i][j] = S[j][i] = entry
    return S, J


def _schouten_upper(metric, S):
    o = S[0][0].order
    gi = [[metric.ginv[i][j].truncate(o) for j in range(NV)]
          for i in range(NV)]
    up = [[None] * NV for _ in range(NV)]
    for c in range(NV):
        for d in range(c, NV):
            acc = None
            for a in range(NV):
                for b in range(NV):
                    t = gi[c][a] * gi[d][b] * S[a][b]
                    acc = t if acc is None else acc + t
            up[c][d] = up[d][c] = acc
    return up


def weyl(metric):
    """Totally trace-free part of the curvature, in the riemann layout.

    W[a][b][i][j] subtracts the Kulkarni-Nomizu product of the Schouten
    tensor with the metric, so every inverse-metric trace over slots one
    and three vanishes.
    """
    if metric.order < 2:
        raise ValueError("weyl needs metric jets of order two or more")
    o = metric.order - 2
    S, _ = schouten(metric)
    g = [[metric.g[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    R = metric.riemann
    W = [[[[None] * NV for _ in range(NV)] for _ in range(NV)]
         for _ in range(NV)]
    for a in range(NV):
        for b in range(NV):
            for i in range(NV):
                for j in range(NV):
                    kn = (S[a][i] * g[b][j] - S[a][j] * g[b][i]
                          + g[a][i] * S[b][j] - g[a][j] * S[b][i])
                    W[a][b][i][j] = R[a][b][i][j] - kn
    return W


def cotton(metric):
    """Antisymmetrized Schouten derivative C[a][b][c] = D_c S_ab - D_b S_ac."""
    if metric.order < 3:
        raise ValueError("cotton needs metric jets of order three or more")
    S, _ = schouten(metric)
    D = metric.cov_deriv(S, "dd")
    C = [[[D[c][a][b] - D[b][a][c] for c in range(NV)] for b in range(NV)]
         for a in range(NV)]
    return C


def bach(metric):
    """Conformal obstruction tensor B[a][b].

    Assembled as the divergence of the Cotton tensor over its last slot
    plus the Schouten contraction of the trace-free curvature,

        B_ab = D^c C_abc + S^cd W_acbd,

    which keeps every derivative on tensors of rank three or lower.  The
    result is symmetric, trace free, divergence free, vanishes whenever
    the trace-free curvature does, and rescales as exp(-2 w) B under the
    conformal change exp(2 w) g.
    """
    if metric.order < 4:
        raise ValueError("bach needs metric jets of order four or more")
    C = cotton(metric)
    D = metric.cov_deriv(C, "ddd")
    o = D[0][0][0][0].order
    gi = [[metric.ginv[i][j].truncate(o) for j in range(NV)]
          for i in range(NV)]
    S, _ = schouten(metric)
    up = _schouten_upper(metric, S)
    W = weyl(metric)
    B = [[None] * NV for _ in range(NV)]
    for a in range(NV):
        for b in range(NV):
            acc = None
            for e in range(NV):
                for c in range(NV):
                    t = gi[e][c] * D[e][a][b][c].truncate(o)
                    acc = t if acc is None else acc + t
            for c in range(NV):
                for d in range(NV):
                    acc = _add(acc, _mul(up[c][d], W[a][c][b][d]))
            B[a][b] = acc
    return B


# -- fourth-order conformal operator and its curvature -------------------


def paneitz(metric, f):
    """Fourth-order conformally covariant scalar operator applied to f.

    P f = Lap(Lap f) + D_j [(2 Ric^{jk} - (2/3) scal g^{jk}) D_k f],
    with the plain trace Laplacian.  Under g -> exp(2 w) g the operator
    obeys P[exp(2 w) g] f = exp(-4 w) P[g] f, and on the unit round
    sphere it acts on degree-one harmonics with eigenvalue 24.
    """
    if metric.order < 4:
        raise ValueError("paneitz needs metric jets of order four or more")
    if f.order < 4:
        raise ValueError("paneitz needs an argument jet of order four or more")
    lap2 = metric.lap_scalar(metric.lap_scalar(f))
    S, J = schouten(metric)
    up = _schouten_upper(metric, S)
    o = up[0][0].order
    gi = [[metric.ginv[i][j].truncate(o) for j in range(NV)]
          for i in range(NV)]
    df = [f.partial(k) for k in range(NV)]
    X = []
    for j in range(NV):
        acc = None
        for k in range(NV):
            coef = up[j][k] * 4.0 - _mul(J, gi[j][k]) * 2.0
            t = _mul(coef, df[k])
            acc = t if acc is None else acc + t
        X.append(acc)
    DX = metric.cov_deriv(X, "u")
    div = DX[0][0]
    for j in range(1, NV):
        div = div + DX[j][j]
    return _add(lap2, div)


def q_curvature(metric):
    """Fourth-order curvature scalar, equal to six on the unit round sphere.

    Q = -Lap J + 2 J^2 - 2 |S|^2, the scalar the Paneitz operator
    prescribes under conformal change:
    exp(4 w) Q[exp(2 w) g] = Q[g] + P[g] w.
    """
    if metric.order < 4:
        raise ValueError("q_curvature needs metric jets of order four or more")
    S, J = schouten(metric)
    up = _schouten_upper(metric, S)
    s2 = None
    for a in range(NV):
        for b in range(NV):
            t = up[a][b] * S[a][b]
            s2 = t if s2 is None else s2 + t
    lapJ = metric.lap_scalar(J)
    return _add(-lapJ, _sub(_mul(J, J) * 2.0, s2 * 2.0))
