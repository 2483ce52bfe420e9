"""Catalog of immersions of four-manifolds into R^m.

Every entry exposes

    m        -- ambient dimension
    chart    -- "torus" (periodic cube [0, 2pi)^4), "plane" (all of R^4),
                or "decay" (R^4 chart whose integrand decays at infinity,
                suitable for the compactified radial quadrature)
    point(x, order) -- ImmersionPoint with jets of the given order at the
                chart points x, shape (4, n)

plus ambient transforms (translate / rotate / dilate / invert) that wrap
any base immersion, acting on the jets directly so every derived quantity
is transformed consistently.
"""

from __future__ import annotations

import numpy as np

from . import jets
from .jets import Jet
from .geometry import ImmersionPoint, smul


def _coords(x, order):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != 4:
        raise ValueError("chart points must have shape (4, n)")
    return [Jet.coordinate(v, x[v], order) for v in range(4)], x


class Plane:
    """Flat linear embedding: the first four components copy the chart."""

    chart = "plane"

    def __init__(self, m=5):
        self.m = m

    def point(self, x, order):
        c, x = _coords(x, order)
        comps = [c[a] if a < 4 else Jet.constant(np.zeros(x.shape[1]), order)
                 for a in range(self.m)]
        return ImmersionPoint(comps, x)


class Sphere:
    """Round sphere of the given radius in R^5, stereographic chart.

    Phi = (2 r^2 x, r (|x|^2 - r^2)) / (|x|^2 + r^2); at x = 0 the metric
    is 4 * identity for r = 1.
    """

    chart = "decay"

    def __init__(self, radius=1.0):
        self.radius = float(radius)
        self.m = 5

    def point(self, x, order):
        c, x = _coords(x, order)
        r2 = self.radius * self.radius
        s = c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]
        den = jets.recip(s + r2)
        comps = [(c[a] * (2.0 * r2)) * den for a in range(4)]
        comps.append((s - r2) * den * self.radius)
        return ImmersionPoint(comps, x)


class ProductTorus:
    """Product of four circles in R^8 with prescribed radii.

    Component pairs are (r_a cos x_a, r_a sin x_a); equal radii give the
    flat torus whose induced metric is radius^2 * identity.
    """

    chart = "torus"

    def __init__(self, radii=(1.0, 1.0, 1.0, 1.0)):
        self.radii = tuple(float(r) for r in radii)
        self.m = 8

    def point(self, x, order):
        c, x = _coords(x, order)
        comps = []
        for a in range(4):
            comps.append(jets.cos(c[a]) * self.radii[a])
            comps.append(jets.sin(c[a]) * self.radii[a])
        return ImmersionPoint(comps, x)


def clifford_torus():
    """Unit-radii product torus: induced metric is the identity."""
    return ProductTorus((1.0, 1.0, 1.0, 1.0))


class CatenoidProduct:
    """Product of two catenoids in R^6; minimal (H = 0), non-flat."""

    chart = "plane"
    m = 6

    def point(self, x, order):
        c, x = _coords(x, order)
        comps = [
            jets.cosh(c[1]) * jets.cos(c[0]),
            jets.cosh(c[1]) * jets.sin(c[0]),
            c[1],
            jets.cosh(c[3]) * jets.cos(c[2]),
            jets.cosh(c[3]) * jets.sin(c[2]),
            c[3],
        ]
        return ImmersionPoint(comps, x)


class PolynomialImmersion:
    """Immersion with polynomial components, for randomized identity checks.

    terms: list (one entry per ambient component) of dicts
    {exponent tuple: coefficient}.
    """

    chart = "plane"

    def __init__(self, terms):
        self.terms = terms
        self.m = len(terms)

    def point(self, x, order):
        _, x = _coords(x, order)
        comps = [jets.polynomial_jet(t.items(), x, order) for t in self.terms]
        return ImmersionPoint(comps, x)


def random_polynomial_immersion(rng, m=6, degree=3, scale=0.25):
    """Random near-linear polynomial immersion of degree <= 3.

    The linear part has orthonormal columns, so the metric stays positive
    for moderate higher-order coefficients.
    """
    B = rng.standard_normal((m, 4))
    Q, _ = np.linalg.qr(B)
    terms = []
    exps = []
    for d in range(2, degree + 1):
        exps.extend(_exponents_of_degree(d))
    for a in range(m):
        t = {}
        for v in range(4):
            e = [0, 0, 0, 0]
            e[v] = 1
            t[tuple(e)] = Q[a, v]
        for e in exps:
            t[e] = scale * rng.standard_normal() / (2.0 ** sum(e))
        terms.append(t)
    return PolynomialImmersion(terms)


def _exponents_of_degree(d):
    out = []
    for i in range(d + 1):
        for j in range(d - i + 1):
            for k in range(d - i - j + 1):
                out.append((i, j, k, d - i - j - k))
    return out


class WarpedTorus:
    """Clifford-type torus precomposed with a periodic chart diffeomorphism.

    psi_a(y) = y_a + eps * sin(y_a + y_{a+1 mod 4} + delta_a) is periodic
    (integer frequency in every variable) and stays a diffeomorphism of
    the torus for small eps; the image surface is unchanged, so every
    chart-independent integral must agree with the unwarped torus.
    """

    chart = "torus"
    m = 8

    def __init__(self, radii=(1.0, 1.0, 1.0, 1.0), eps=0.15):
        self.radii = tuple(float(r) for r in radii)
        self.eps = float(eps)

    def point(self, x, order):
        c, x = _coords(x, order)
        deltas = (0.3, 1.1, 2.2, 0.7)
        comps = []
        for a in range(4):
            arg = c[a] + c[(a + 1) % 4] + deltas[a]
            psi = c[a] + jets.sin(arg) * self.eps
            comps.append(jets.cos(psi) * self.radii[a])
            comps.append(jets.sin(psi) * self.radii[a])
        return ImmersionPoint(comps, x)


# ambient transforms -------------------------------------------------------


class Translated:
    def __init__(self, base, offset):
        self.base = base
        self.offset = np.asarray(offset, dtype=np.float64)
        self.m = base.m
        self.chart = base.chart

    def point(self, x, order):
        p = self.base.point(x, order)
        c = p.phi.c.copy()
        c[0] += self.offset[:, None]
        return ImmersionPoint(Jet(order, c), p.x)


class Rotated:
    def __init__(self, base, rotation):
        self.base = base
        self.rotation = np.asarray(rotation, dtype=np.float64)
        self.m = base.m
        self.chart = base.chart

    def point(self, x, order):
        p = self.base.point(x, order)
        c = np.einsum("ab,cb...->ca...", self.rotation, p.phi.c)
        return ImmersionPoint(Jet(order, c), p.x)


class Dilated:
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.m = base.m
        self.chart = base.chart

    def point(self, x, order):
        p = self.base.point(x, order)
        return ImmersionPoint(Jet(order, p.phi.c * self.factor), p.x)


class Inverted:
    """Sphere inversion u -> u / |u|^2 about the given center."""

    def __init__(self, base, center):
        self.base = base
        self.center = np.asarray(center, dtype=np.float64)
        self.m = base.m
        self.chart = base.chart

    def point(self, x, order):
        p = self.base.point(x, order)
        c = p.phi.c.copy()
        c[0] -= self.center[:, None]
        u = Jet(order, c)
        s = Jet(order, (u * u).c.sum(axis=1))
        return ImmersionPoint(smul(jets.recip(s), u), p.x)


def random_rotation(rng, m):
    """Haar-ish orthogonal matrix from QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


CATALOG = {
    "plane": lambda: Plane(),
    "sphere": lambda: Sphere(),
    "clifford": clifford_torus,
    "torus-aniso": lambda: ProductTorus((1.0, 1.3, 0.8, 1.1)),
    "catenoid-product": lambda: CatenoidProduct(),
    "warped-clifford": lambda: WarpedTorus(),
}
