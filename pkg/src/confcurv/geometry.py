"""Geometry of immersed four-manifolds from jets.

GeometryFrame turns the jet of an immersion Phi: chart -> R^m into the
pull-back metric, Christoffel symbols, both routes to the second
fundamental form, the mean curvature vector (normalized so that
Delta_g Phi = 4 H), normal projection, the rough normal Laplacian, and the
curvature tensors of the induced metric.  MetricJets carries the purely
intrinsic part and is reused for metrics given directly as jets.

Ambient-vector-valued fields are stored as a single Jet whose first batch
axis enumerates the m ambient components; scalars live on the remaining
batch axes (grid nodes).
"""

from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np

from . import jets
from .jets import Jet

NV = 4


def stack_ambient(components):
    """Combine m scalar jets into one ambient-vector jet."""
    order = components[0].order
    return Jet(order, np.stack([j.c for j in components], axis=1))


def _ins(s):
    """Make a scalar jet broadcast against ambient-vector jets."""
    return Jet(s.order, s.c[:, None])


def smul(s, v):
    """scalar jet * ambient jet, truncated to the smaller order."""
    o = min(s.order, v.order)
    return _ins(s.truncate(o)) * v.truncate(o)


def dot(u, v):
    """Euclidean ambient dot product of two ambient jets -> scalar jet."""
    o = min(u.order, v.order)
    p = u.truncate(o) * v.truncate(o)
    return Jet(p.order, p.c.sum(axis=1))


def _inv4(m):
    """Inverse and determinant of a 4x4 matrix of same-order jets."""
    s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1]
    s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2]
    s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3]
    s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2]
    s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3]
    s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3]
    c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3]
    c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3]
    c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2]
    c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3]
    c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2]
    c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1]
    det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
    r = jets.recip(det)
    b = [[None] * 4 for _ in range(4)]
    b[0][0] = (m[1][1] * c5 - m[1][2] * c4 + m[1][3] * c3) * r
    b[0][1] = (-m[0][1] * c5 + m[0][2] * c4 - m[0][3] * c3) * r
    b[0][2] = (m[3][1] * s5 - m[3][2] * s4 + m[3][3] * s3) * r
    b[0][3] = (-m[2][1] * s5 + m[2][2] * s4 - m[2][3] * s3) * r
    b[1][0] = (-m[1][0] * c5 + m[1][2] * c2 - m[1][3] * c1) * r
    b[1][1] = (m[0][0] * c5 - m[0][2] * c2 + m[0][3] * c1) * r
    b[1][2] = (-m[3][0] * s5 + m[3][2] * s2 - m[3][3] * s1) * r
    b[1][3] = (m[2][0] * s5 - m[2][2] * s2 + m[2][3] * s1) * r
    b[2][0] = (m[1][0] * c4 - m[1][1] * c2 + m[1][3] * c0) * r
    b[2][1] = (-m[0][0] * c4 + m[0][1] * c2 - m[0][3] * c0) * r
    b[2][2] = (m[3][0] * s4 - m[3][1] * s2 + m[3][3] * s0) * r
    b[2][3] = (-m[2][0] * s4 + m[2][1] * s2 - m[2][3] * s0) * r
    b[3][0] = (-m[1][0] * c3 + m[1][1] * c1 - m[1][2] * c0) * r
    b[3][1] = (m[0][0] * c3 - m[0][1] * c1 + m[0][2] * c0) * r
    b[3][2] = (-m[3][0] * s3 + m[3][1] * s1 - m[3][2] * s0) * r
    b[3][3] = (m[2][0] * s3 - m[2][1] * s1 + m[2][2] * s0) * r
    return b, det


class MetricJets:
    """Levi-Civita structure of a metric given as component jets g[i][j]."""

    def __init__(self, g):
        self.g = g
        self.order = g[0][0].order

    @cached_property
    def _invdet(self):
        return _inv4(self.g)

    @property
    def ginv(self):
        return self._invdet[0]

    @property
    def det(self):
        return self._invdet[1]

    @cached_property
    def sqrtg(self):
        return jets.sqrt(self.det)

    @cached_property
    def gamma(self):
        """gamma[l][i][j] = Christoffel symbol with upper index l."""
        o = self.order - 1
        dg = [[[self.g[i][j].partial(k) for j in range(NV)] for i in range(NV)]
              for k in range(NV)]
        gi = [[self.ginv[l][k].truncate(o) for k in range(NV)] for l in range(NV)]
        out = [[[None] * NV for _ in range(NV)] for _ in range(NV)]
        for i in range(NV):
            for j in range(i, NV):
                comb = [dg[i][j][k] + dg[j][i][k] - dg[k][i][j] for k in range(NV)]
                for l in range(NV):
                    acc = gi[l][0] * comb[0]
                    for k in range(1, NV):
                        acc = acc + gi[l][k] * comb[k]
                    acc = acc * 0.5
                    out[l][i][j] = acc
                    out[l][j][i] = acc
        return out

    @cached_property
    def riemann_mixed(self):
        """rm[l][a][b][j]: curvature operator R(e_a, e_b) e_j = rm^l e_l."""
        o = self.order - 2
        G = [[[self.gamma[l][i][j].truncate(o) for j in range(NV)]
              for i in range(NV)] for l in range(NV)]
        dG = [[[[self.gamma[l][b][j].partial(a).truncate(o) for j in range(NV)]
                for b in range(NV)] for l in range(NV)] for a in range(NV)]
        out = [[[[None] * NV for _ in range(NV)] for _ in range(NV)] for _ in range(NV)]
        for l in range(NV):
            for a in range(NV):
                for b in range(NV):
                    for j in range(NV):
                        acc = dG[a][l][b][j] - dG[b][l][a][j]
                        for mm in range(NV):
                            acc = acc + G[l][a][mm] * G[mm][b][j]
                            acc = acc - G[l][b][mm] * G[mm][a][j]
                        out[l][a][b][j] = acc
        return out

    @cached_property
    def riemann(self):
        """R[a][b][i][j] = <R(e_a,e_b) e_j, e_i>; on the round sphere this
        gives Ric = +3 g and matches the Gauss pairing h_ai.h_bj - h_aj.h_bi."""
        o = self.order - 2
        rm = self.riemann_mixed
        gl = [[self.g[i][l].truncate(o) for l in range(NV)] for i in range(NV)]
        out = [[[[None] * NV for _ in range(NV)] for _ in range(NV)] for _ in range(NV)]
        for a in range(NV):
            for b in range(NV):
                for i in range(NV):
                    for j in range(NV):
                        acc = gl[i][0] * rm[0][a][b][j]
                        for l in range(1, NV):
                            acc = acc + gl[i][l] * rm[l][a][b][j]
                        out[a][b][i][j] = acc
        return out

    @cached_property
    def ricci(self):
        """ric[b][j] = trace of a -> R(e_a, e_b) e_j."""
        rm = self.riemann_mixed
        out = [[None] * NV for _ in range(NV)]
        for b in range(NV):
            for j in range(NV):
                acc = rm[0][0][b][j]
                for a in range(1, NV):
                    acc = acc + rm[a][a][b][j]
                out[b][j] = acc
        return out

    @cached_property
    def scal(self):
        o = self.order - 2
        acc = None
        for b in range(NV):
            for j in range(NV):
                t = self.ginv[b][j].truncate(o) * self.ricci[b][j]
                acc = t if acc is None else acc + t
        return acc

    def lap_scalar(self, f):
        """Laplace-Beltrami of a jet field (ambient-valued allowed)."""
        ambient = f.c.ndim >= 2 and f.c.shape[1:] != self.g[0][0].c.shape[1:]
        o = f.order - 2
        gi = self.ginv
        G = self.gamma
        acc = None
        for i in range(NV):
            dfi = f.partial(i)
            for j in range(NV):
                t = dfi.partial(j)
                for k in range(NV):
                    gk = G[k][i][j].truncate(o)
                    fk = f.partial(k).truncate(o)
                    t = t - (smul(gk, fk) if ambient else gk * fk)
                gij = gi[i][j].truncate(o)
                t = smul(gij, t) if ambient else gij * t
                acc = t if acc is None else acc + t
        return acc

    def cov_deriv(self, tensor, valence, ambient=False):
        """Covariant derivative of a parameter-index tensor of jets.

        tensor: nested lists, one level per character of `valence`
        ('d' lower, 'u' upper); values are scalar or ambient jets.
        Returns the rank+1 tensor with the new derivative index first
        (a lower index).
        """
        k = len(valence)
        if k == 0:
            return [tensor.partial(e) for e in range(NV)]
        T = np.empty((NV,) * k, dtype=object)
        for idx in itertools.product(range(NV), repeat=k):
            e = tensor
            for i in idx:
                e = e[i]
            T[idx] = e
        r = T[(0,) * k].order
        o = r - 1
        G = self.gamma
        out = np.empty((NV,) + (NV,) * k, dtype=object)
        for e in range(NV):
            for idx in itertools.product(range(NV), repeat=k):
                acc = T[idx].partial(e).truncate(o)
                for s, kind in enumerate(valence):
                    for f in range(NV):
                        jdx = idx[:s] + (f,) + idx[s + 1:]
                        Tf = T[jdx].truncate(o)
                        if kind == "d":
                            gam = G[f][e][idx[s]].truncate(o)
                            corr = smul(gam, Tf) if ambient else gam * Tf
                            acc = acc - corr
                        else:
                            gam = G[idx[s]][e][f].truncate(o)
                            corr = smul(gam, Tf) if ambient else gam * Tf
                            acc = acc + corr
                out[(e,) + idx] = acc
        return out


class ImmersionPoint:
    """Jet of an immersion at a batch of chart points."""

    def __init__(self, phi, x):
        if isinstance(phi, (list, tuple)):
            phi = stack_ambient(list(phi))
        self.phi = phi
        self.x = np.atleast_2d(np.asarray(x, dtype=np.float64))

    @property
    def order(self):
        return self.phi.order

    @property
    def m(self):
        return self.phi.c.shape[1]

    @property
    def components(self):
        return [Jet(self.phi.order, self.phi.c[:, a]) for a in range(self.m)]


class GeometryFrame:
    """All first- through higher-order extrinsic data at an ImmersionPoint.

    Fields are computed lazily so low-order jets can still serve the
    quantities they support; each derived field truncates its inputs to
    the jet order it actually needs.
    """

    def __init__(self, point):
        if isinstance(point, Jet):
            raise TypeError("wrap the jet in an ImmersionPoint")
        self.point = point
        self.phi = point.phi
        self.order = point.order
        self.m = point.m

    # first derivatives & metric -------------------------------------

    @cached_property
    def dphi(self):
        return [self.phi.partial(i) for i in range(NV)]

    @cached_property
    def metric(self):
        g = [[None] * NV for _ in range(NV)]
        for i in range(NV):
            for j in range(i, NV):
                g[i][j] = g[j][i] = dot(self.dphi[i], self.dphi[j])
        return MetricJets(g)

    @property
    def g(self):
        return self.metric.g

    @property
    def ginv(self):
        return self.metric.ginv

    @property
    def sqrtg(self):
        return self.metric.sqrtg

    @property
    def gamma(self):
        return self.metric.gamma

    # projections -----------------------------------------------------

    def project_normal(self, v):
        """Component of an ambient jet orthogonal to the tangent plane."""
        o = v.order
        gi = self.ginv
        t = [dot(self.dphi[k], v) for k in range(NV)]
        out = v
        for l in range(NV):
            s = gi[l][0].truncate(o) * t[0]
            for k in range(1, NV):
                s = s + gi[l][k].truncate(o) * t[k]
            out = out - smul(s, self.dphi[l])
        return out

    def project_tangent(self, v):
        return v - self.project_normal(v)

    # second fundamental form ------------------------------------------

    @cached_property
    def ddphi(self):
        return [[self.dphi[i].partial(j) for j in range(NV)] for i in range(NV)]

    @cached_property
    def h(self):
        """h[i][j] = dd_ij Phi - Gamma^l_ij d_l Phi (ambient-valued)."""
        o = self.order - 2
        G = self.gamma
        out = [[None] * NV for _ in range(NV)]
        for i in range(NV):
            for j in range(i, NV):
                acc = self.ddphi[i][j]
                for l in range(NV):
                    acc = acc - smul(G[l][i][j].truncate(o), self.dphi[l])
                out[i][j] = out[j][i] = acc
        return out

    @cached_property
    def h_projected(self):
        """Second route: normal projection of the bare second derivatives."""
        return [[self.project_normal(self.ddphi[i][j].truncate(self.order - 2))
                 for j in range(NV)] for i in range(NV)]

    @cached_property
    def h_cross_residual(self):
        r = 0.0
        for i in range(NV):
            for j in range(NV):
                d = self.h[i][j] - self.h_projected[i][j]
                r = max(r, float(np.max(np.abs(d.c))))
        return r

    @cached_property
    def H(self):
        """Mean curvature vector, normalized so that Delta_g Phi = 4 H."""
        o = self.order - 2
        acc = None
        for i in range(NV):
            for j in range(NV):
                t = smul(self.ginv[i][j].truncate(o), self.h[i][j])
                acc = t if acc is None else acc + t
        return acc * 0.25

    @cached_property
    def h0(self):
        """Trace-free second fundamental form h - g H."""
        o = self.order - 2
        return [[self.h[i][j] - smul(self.g[i][j].truncate(o), self.H)
                 for j in range(NV)] for i in range(NV)]

    # derivatives of H --------------------------------------------------

    @cached_property
    def dH(self):
        return [self.H.partial(i) for i in range(NV)]

    @cached_property
    def pin_dH(self):
        return [self.project_normal(v) for v in self.dH]

    def lap_perp(self, v):
        """Rough normal Laplacian: pi_n nabla_j (pi_n nabla^j v)."""
        o1, o2 = v.order - 1, v.order - 2
        gi = self.ginv
        W = []
        for j in range(NV):
            acc = smul(gi[j][0].truncate(o1), v.partial(0))
            for k in range(1, NV):
                acc = acc + smul(gi[j][k].truncate(o1), v.partial(k))
            W.append(self.project_normal(acc))
        div = W[0].partial(0)
        for j in range(1, NV):
            div = div + W[j].partial(j)
        G = self.gamma
        for j in range(NV):
            for l in range(NV):
                div = div + smul(G[j][j][l].truncate(o2), W[l].truncate(o2))
        return self.project_normal(div)

    @cached_property
    def lap_perp_H(self):
        return self.lap_perp(self.H)

    def lap_beltrami(self, f):
        return self.metric.lap_scalar(f)

    # curvature ----------------------------------------------------------

    @property
    def riemann(self):
        return self.metric.riemann

    @cached_property
    def h_dots(self):
        """Cache of ambient dot products h_ai . h_bj."""
        dots = {}
        for (a, i) in itertools.product(range(NV), repeat=2):
            for (b, j) in itertools.product(range(NV), repeat=2):
                if (b, j, a, i) in dots:
                    dots[(a, i, b, j)] = dots[(b, j, a, i)]
                else:
                    dots[(a, i, b, j)] = dot(self.h[a][i], self.h[b][j])
        return dots

    @cached_property
    def gauss_rhs(self):
        """h_ai . h_bj - h_aj . h_bi, the extrinsic side of the Gauss equation."""
        d = self.h_dots
        return [[[[d[(a, i, b, j)] - d[(a, j, b, i)]
                   for j in range(NV)] for i in range(NV)]
                 for b in range(NV)] for a in range(NV)]

    def cov_deriv(self, tensor, valence, ambient=False):
        return self.metric.cov_deriv(tensor, valence, ambient=ambient)


def frame(point):
    """Build the geometry frame of an immersion point."""
    return GeometryFrame(point)
