"""Calculus of multivector-valued differential forms on a four-chart.

A Form has parameter degree p (antisymmetric in p chart indices) and
ambient degree q (values in q-vectors of R^m).  Components are stored
only for strictly increasing index tuples, as one Jet whose batch axes
are (parameter tuple, ambient tuple, *grid).

Products combine a parameter-space operation (wedge, interior
multiplication, full contraction) with an ambient operation (scalar
multiply, dot, wedge, or the first-order contraction), mirroring the
stacked-symbol notation the objects are usually written in.

Conventions, fixed here and exercised by the tests:
  * wedge via scaled antisymmetrization, so (A^B)_{ij} = A_i B_j - A_j B_i
    for 1-forms;
  * interior multiplication contracts the raised leading block of A
    against B, leaving one lower index: (A .| B)_j =
    (1/(p-1)!) A^{i_1..i_{p-1}}{}_j B_{i_1..i_{p-1}};
  * volume form with upper indices carries |g|^{-1/2}; the Hodge star is
    computed with upper indices and lowered, so star(1) = sqrt|g| e^1234;
  * d is the covariant exterior derivative (Christoffel corrections
    cancel, so it reduces to antisymmetrized partials) and
    d* A = grad^j A_{j...}; with these normalizations the flat-torus L2
    pairing satisfies int<dA,B> = -int<A,d*B>.
"""

from __future__ import annotations

import itertools
import warnings
from functools import lru_cache
from math import comb

import numpy as np

from . import jets
from .jets import Jet

NV = 4


class DegreeOverflow(UserWarning):
    """Raised degree exceeds the space dimension; result is the zero form."""


# ---------------------------------------------------------------- tables


@lru_cache(maxsize=None)
def ituples(n, k):
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def ituple_index(n, k):
    return {t: i for i, t in enumerate(ituples(n, k))}


def seq_lookup(n, seq):
    """(storage index, permutation sign) of an arbitrary index sequence."""
    if len(set(seq)) != len(seq):
        return -1, 0.0
    inv = 0
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                inv += 1
    return ituple_index(n, len(seq))[tuple(sorted(seq))], float((-1) ** inv)


@lru_cache(maxsize=None)
def wedge_table(n, k1, k2):
    rows = []
    for ia, s in enumerate(ituples(n, k1)):
        for ib, t in enumerate(ituples(n, k2)):
            io, sgn = seq_lookup(n, s + t)
            if sgn:
                rows.append((io, ia, ib, sgn))
    return tuple(rows)


@lru_cache(maxsize=None)
def mul_table(n, k1, k2):
    """One side has degree zero: plain multiplication."""
    if k1 == 0:
        return tuple((i, 0, i, 1.0) for i in range(comb(n, k2)))
    if k2 == 0:
        return tuple((i, i, 0, 1.0) for i in range(comb(n, k1)))
    raise ValueError("mul requires a degree-zero factor")


@lru_cache(maxsize=None)
def dot_table(n, k):
    """Full contraction of equal degrees against an orthonormal metric."""
    return tuple((0, i, i, 1.0) for i in range(comb(n, k)))


@lru_cache(maxsize=None)
def contract_table(n, k):
    """Full parameter contraction (first factor already raised)."""
    return tuple((0, i, i, 1.0) for i in range(comb(n, k)))


@lru_cache(maxsize=None)
def interior_table(n, p):
    """(A .| B)_j for A of degree p (raised), B of degree p-1."""
    rows = []
    for ib, s in enumerate(ituples(n, p - 1)):
        for j in range(n):
            ia, sgn = seq_lookup(n, s + (j,))
            if sgn:
                rows.append((j, ia, ib, sgn))
    return tuple(rows)


@lru_cache(maxsize=None)
def bullet_table(n, q):
    """First-order contraction of a 2-vector against a q-vector.

    (A * B)_{u_1..u_q} = sum_s sum_i A_{i u_s} B_{u_1.. i ..u_q},
    exactly the extension of A .| B from 1-vectors by the Leibniz rule.
    """
    rows = {}
    uts = ituples(n, q)
    for iu, u in enumerate(uts):
        for s in range(q):
            for i in range(n):
                ia, sa = seq_lookup(n, (i, u[s]))
                if not sa:
                    continue
                ib, sb = seq_lookup(n, u[:s] + (i,) + u[s + 1:])
                if not sb:
                    continue
                key = (iu, ia, ib)
                rows[key] = rows.get(key, 0.0) + sa * sb
    return tuple((k[0], k[1], k[2], v) for k, v in rows.items() if v != 0.0)


# ----------------------------------------------------------------- Form


class Form:
    """p-form on the chart valued in ambient q-vectors."""

    __slots__ = ("p", "q", "m", "jet")

    def __init__(self, p, q, m, jet):
        self.p, self.q, self.m = p, q, m
        if jet.c.shape[1] != comb(NV, p) or jet.c.shape[2] != comb(m, q):
            raise ValueError("component array does not match degrees")
        self.jet = jet

    @property
    def order(self):
        return self.jet.order

    @property
    def batch(self):
        return self.jet.c.shape[3:]

    def values(self):
        return self.jet.value

    @staticmethod
    def zero(p, q, m, order, batch):
        sp = jets.jet_space(order)
        c = np.zeros((sp.ncoef, comb(NV, p), comb(m, q)) + tuple(batch))
        return Form(p, q, m, Jet(order, c))

    @staticmethod
    def from_scalar(jet, m):
        return Form(0, 0, m, Jet(jet.order, jet.c[:, None, None]))

    @staticmethod
    def from_ambient(jet):
        """Ambient-vector jet (batch (m, *grid)) as a 0-form of ambient degree 1."""
        m = jet.c.shape[1]
        return Form(0, 1, m, Jet(jet.order, jet.c[:, None]))

    @staticmethod
    def from_param_entries(p, q, m, entries):
        """entries: dict {param tuple: jet with batch (ambient tuples, *grid)};
        for q = 0 the entry jets are plain scalars."""
        sample = next(iter(entries.values()))
        if q == 0:
            entries = {k: Jet(v.order, v.c[:, None]) for k, v in entries.items()}
            sample = next(iter(entries.values()))
        f = Form.zero(p, q, m, sample.order, sample.c.shape[2:])
        pi = ituple_index(NV, p)
        for pt, val in entries.items():
            f.jet.c[:, pi[tuple(pt)]] = val.c
        return f

    @staticmethod
    def from_components(p, q, m, entries, order, batch):
        """entries: dict {(param tuple, ambient tuple): scalar jet}."""
        f = Form.zero(p, q, m, order, batch)
        pi = ituple_index(NV, p)
        ai = ituple_index(m, q)
        for (pt, at), val in entries.items():
            f.jet.c[:, pi[tuple(pt)], ai[tuple(at)]] = val.c
        return f

    def component(self, pt, at=()):
        pi = ituple_index(NV, self.p)[tuple(pt)]
        ai = ituple_index(self.m, self.q)[tuple(at)]
        return Jet(self.order, self.jet.c[:, pi, ai])

    def component_ambient(self, pt):
        """All ambient components at one parameter tuple, batch (A, *grid)."""
        pi = ituple_index(NV, self.p)[tuple(pt)]
        return Jet(self.order, self.jet.c[:, pi])

    def truncate(self, order):
        return Form(self.p, self.q, self.m, self.jet.truncate(order))

    def __add__(self, other):
        self._check_like(other)
        return Form(self.p, self.q, self.m, self.jet + other.jet)

    def __sub__(self, other):
        self._check_like(other)
        return Form(self.p, self.q, self.m, self.jet - other.jet)

    def __mul__(self, scalar):
        return Form(self.p, self.q, self.m, self.jet * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def _check_like(self, other):
        if (self.p, self.q, self.m) != (other.p, other.q, other.m):
            raise ValueError("form degree mismatch")

    def max_abs(self):
        return float(np.max(np.abs(self.jet.c)))


def _sx(scalar_jet):
    """Scalar jet -> broadcastable against form component arrays."""
    return Jet(scalar_jet.order, scalar_jet.c[:, None, None])


def ambient_wedge(u, v):
    """Wedge of two ambient-vector jets -> 2-vector jet, batch (C(m,2), *grid)."""
    m = u.c.shape[1]
    o = min(u.order, v.order)
    pairs = ituples(m, 2)
    ai = [t[0] for t in pairs]
    bi = [t[1] for t in pairs]
    uu, vv = u.truncate(o), v.truncate(o)
    return (Jet(o, uu.c[:, ai]) * Jet(o, vv.c[:, bi])
            - Jet(o, uu.c[:, bi]) * Jet(o, vv.c[:, ai]))


# ------------------------------------------------------------ pair engine


def _pairwise(A, B, ptab, atab, p_out, q_out):
    o = min(A.order, B.order)
    Ac, Bc = A.jet.truncate(o), B.jet.truncate(o)
    rows = [(po * comb(A.m, q_out) + ao, pa, aa, pb, ab, ps * as_)
            for (po, pa, pb, ps) in ptab
            for (ao, aa, ab, as_) in atab]
    if not rows:
        return Form.zero(p_out, q_out, A.m, o, A.batch)
    out_flat, pa, aa, pb, ab, coef = map(np.array, zip(*rows))
    pa = pa.astype(int); aa = aa.astype(int)
    pb = pb.astype(int); ab = ab.astype(int)
    a_sl = Jet(o, Ac.c[:, pa, aa])
    b_sl = Jet(o, Bc.c[:, pb, ab])
    prod = a_sl * b_sl
    vals = np.moveaxis(prod.c, 1, 0) * coef.reshape((-1,) + (1,) * (prod.c.ndim - 1))
    P, Q = comb(NV, p_out), comb(A.m, q_out)
    out = np.zeros((P * Q,) + vals.shape[1:])
    np.add.at(out, out_flat.astype(int), vals)
    out = np.moveaxis(out, 0, 1).reshape((vals.shape[1], P, Q) + vals.shape[2:])
    return Form(p_out, q_out, A.m, Jet(o, out))


def _ambient_tab(A, B, flavor):
    if flavor == "mul":
        return mul_table(A.m, A.q, B.q), A.q + B.q
    if flavor == "dot":
        if A.q != B.q:
            raise ValueError("ambient dot requires equal ambient degrees")
        return dot_table(A.m, A.q), 0
    if flavor == "wedge":
        return wedge_table(A.m, A.q, B.q), A.q + B.q
    if flavor == "bullet":
        if A.q != 2:
            raise ValueError("first-order contraction needs an ambient 2-vector")
        return bullet_table(A.m, B.q), B.q
    raise ValueError(f"unknown ambient flavor {flavor!r}")


# ------------------------------------------------------------ operations


def wedge(A, B, ambient="mul"):
    """Parameter wedge, combined with the given ambient operation."""
    atab, q_out = _ambient_tab(A, B, ambient)
    if A.p + B.p > NV or q_out > A.m:
        warnings.warn("degree overflow: result is the zero form", DegreeOverflow)
        return Form.zero(min(A.p + B.p, NV), min(q_out, A.m), A.m,
                         min(A.order, B.order), A.batch)
    return _pairwise(A, B, wedge_table(NV, A.p, B.p), atab, A.p + B.p, q_out)


def raise_param(A, metric):
    """Raise all parameter indices with the compound of the inverse metric."""
    if A.p == 0:
        return A
    o = A.order
    M = compound_matrix(metric.ginv, A.p, o)
    P = comb(NV, A.p)
    cs = np.zeros_like(A.jet.c)
    for K in range(P):
        acc = None
        for S in range(P):
            t = Jet(o, M[K][S].c[:, None]) * Jet(o, A.jet.c[:, S])
            acc = t if acc is None else acc + t
        cs[:, K] = acc.c
    return Form(A.p, A.q, A.m, Jet(o, cs))


def lower_param(A, metric):
    if A.p == 0:
        return A
    o = A.order
    M = compound_matrix(metric.g, A.p, o)
    P = comb(NV, A.p)
    cs = np.zeros_like(A.jet.c)
    for K in range(P):
        acc = None
        for S in range(P):
            t = Jet(o, M[K][S].c[:, None]) * Jet(o, A.jet.c[:, S])
            acc = t if acc is None else acc + t
        cs[:, K] = acc.c
    return Form(A.p, A.q, A.m, Jet(o, cs))


def interior_mult(A, B, metric, ambient="mul"):
    """(A .| B)_j: contract the raised leading p-1 indices of A against B.

    Only the contracted block is raised; the surviving index stays lower,
    so with g = c * identity a degree-p first factor scales the flat result
    by c^{-(p-1)}.
    """
    if B.p != A.p - 1:
        raise ValueError("interior multiplication needs degrees (p, p-1)")
    atab, q_out = _ambient_tab(A, B, ambient)
    o = min(A.order, B.order)
    p1 = A.p - 1
    out = Form.zero(1, q_out, A.m, o, A.batch)
    Ac, Bc = A.jet.truncate(o), B.jet.truncate(o)
    if p1 == 0:
        for j in range(NV):
            for (ao, aa, ab, s) in atab:
                t = Jet(o, Ac.c[:, j, aa]) * Jet(o, Bc.c[:, 0, ab]) * s
                out.jet.c[:, j, ao] += t.c
        return out
    M = compound_matrix(metric.ginv, p1, o)
    sts = ituples(NV, p1)
    for j in range(NV):
        for si, S in enumerate(sts):
            # half-raised component sum_T C(ginv)[S][T] A_{(T, j)}
            half = None
            for ti, T in enumerate(sts):
                it, sgn = seq_lookup(NV, T + (j,))
                if not sgn:
                    continue
                t = Jet(o, M[si][ti].c[:, None]) * Jet(o, Ac.c[:, it]) * sgn
                half = t if half is None else half + t
            if half is None:
                continue
            for (ao, aa, ab, s) in atab:
                t = Jet(o, half.c[:, aa]) * Jet(o, Bc.c[:, si, ab]) * s
                out.jet.c[:, j, ao] += t.c
    return out


def contract(A, B, metric, ambient="mul"):
    """Full parameter contraction <A,B>-style with an ambient flavor."""
    if A.p != B.p:
        raise ValueError("full contraction needs equal parameter degrees")
    atab, q_out = _ambient_tab(A, B, ambient)
    Ar = raise_param(A, metric)
    return _pairwise(Ar, B, contract_table(NV, A.p), atab, 0, q_out)


def inner(A, B, metric):
    """Scalar jet <A,B>_g with ambient values paired orthonormally."""
    f = contract(A, B, metric, ambient="dot" if A.q else "mul")
    return Jet(f.order, f.jet.c[:, 0, 0])


def first_order_contraction(A, B):
    """Ambient first-order contraction of 2-vector values against q-vector
    values; parameter parts are paired pointwise (both must share p)."""
    if A.q != 2:
        raise ValueError("first argument must have ambient degree 2")
    if B.q == 0:
        return Form.zero(B.p, 0, B.m, min(A.order, B.order), B.batch)
    if A.p != 0:
        raise ValueError("ambient contraction implemented for 0-form first factor")
    atab, q_out = _ambient_tab(A, B, "bullet")
    ptab = mul_table(NV, 0, B.p)
    return _pairwise(A, B, ptab, atab, B.p, q_out)


def odot(A, B, metric):
    """(A (.) B)^{kl} = A^{lj} B_j{}^k - A^{kj} B_j{}^l for parameter 2-forms,
    returned with lowered indices."""
    if A.p != 2 or B.p != 2:
        raise ValueError("this pairing is defined for parameter 2-forms")
    if A.q or B.q:
        raise ValueError("scalar-valued parameter 2-forms only")
    o = min(A.order, B.order)
    gi = metric.ginv
    idx2 = ituple_index(NV, 2)

    def dense(F):
        out = np.empty((NV, NV), dtype=object)
        for i in range(NV):
            out[i, i] = None
        for (i, j), t in idx2.items():
            out[i, j] = Jet(o, F.jet.truncate(o).c[:, t, 0])
            out[j, i] = out[i, j] * (-1.0)
        z = Jet(o, np.zeros_like(out[0, 1].c))
        for i in range(NV):
            out[i, i] = z
        return out

    Ad, Bd = dense(A), dense(B)
    giT = [[gi[i][j].truncate(o) for j in range(NV)] for i in range(NV)]
    # raise everything: A^{ab} = g^{ai} g^{bj} A_ij ; B_j{}^k = g^{kl} B_jl
    Aup = [[None] * NV for _ in range(NV)]
    Bmix = [[None] * NV for _ in range(NV)]
    for a in range(NV):
        for b in range(NV):
            acc = None
            for i in range(NV):
                for j in range(NV):
                    t = giT[a][i] * giT[b][j] * Ad[i][j]
                    acc = t if acc is None else acc + t
            Aup[a][b] = acc
    for j in range(NV):
        for k in range(NV):
            acc = None
            for l in range(NV):
                t = giT[k][l] * Bd[j][l]
                acc = t if acc is None else acc + t
            Bmix[j][k] = acc
    out = Form.zero(2, 0, A.m, o, A.batch)
    for (k, l), t in idx2.items():
        acc = None
        for j in range(NV):
            u = Aup[l][j] * Bmix[j][k] - Aup[k][j] * Bmix[j][l]
            acc = u if acc is None else acc + u
        upper = acc  # (A (.) B)^{kl}
        out.jet.c[:, t, 0] = upper.c
    return lower_param(out, metric)


# ------------------------------------------------- star, d, codifferential


def _det_jets(entries, o):
    """Determinant of a small matrix of jets by Leibniz expansion."""
    n = len(entries)
    acc = None
    for perm in itertools.permutations(range(n)):
        sgn = 1.0
        for a in range(n):
            for b in range(a + 1, n):
                if perm[a] > perm[b]:
                    sgn = -sgn
        t = entries[0][perm[0]].truncate(o)
        for r in range(1, n):
            t = t * entries[r][perm[r]].truncate(o)
        t = t * sgn
        acc = t if acc is None else acc + t
    return acc


def compound_matrix(mat, p, o):
    """p-th compound (minor determinants) of a 4x4 matrix of jets."""
    tups = ituples(NV, p)
    out = [[None] * len(tups) for _ in tups]
    for a, K in enumerate(tups):
        for b, S in enumerate(tups):
            sub = [[mat[i][j] for j in S] for i in K]
            out[a][b] = _det_jets(sub, o) if p > 1 else mat[K[0]][S[0]].truncate(o)
    return out


def hodge_star(A, metric):
    """Hodge star on the parameter part; ambient values are untouched."""
    o = min(A.order, metric.sqrtg.order)
    p_out = NV - A.p
    tups_in = ituples(NV, A.p)
    idx_out = ituple_index(NV, p_out)
    inv_sqrt = jets.recip(metric.sqrtg.truncate(o))
    upper = Form.zero(p_out, A.q, A.m, o, A.batch)
    for i_in, J in enumerate(tups_in):
        K = tuple(sorted(set(range(NV)) - set(J)))
        _, sgn = seq_lookup(NV, K + J)
        comp = Jet(o, A.jet.truncate(o).c[:, i_in])
        val = Jet(o, inv_sqrt.c[:, None]) * comp * sgn
        upper.jet.c[:, idx_out[K]] += val.c
    return lower_param(upper, metric)


def exterior_d(A):
    """Covariant exterior derivative; symmetric-connection corrections cancel,
    leaving antisymmetrized partials."""
    if A.p == NV:
        warnings.warn("degree overflow: result is the zero form", DegreeOverflow)
        return Form.zero(NV, A.q, A.m, A.order - 1, A.batch)
    o = A.order - 1
    p_out = A.p + 1
    idx_in = ituple_index(NV, A.p)
    out = Form.zero(p_out, A.q, A.m, o, A.batch)
    for i_out, K in enumerate(ituples(NV, p_out)):
        acc = None
        for s in range(p_out):
            rest = K[:s] + K[s + 1:]
            comp = Jet(A.order, A.jet.c[:, idx_in[rest]])
            t = comp.partial(K[s]) * float((-1) ** s)
            acc = t if acc is None else acc + t
        out.jet.c[:, i_out] = acc.truncate(o).c
    return out


def codifferential(A, metric):
    """d* A = grad^j A_{j i_1..i_{p-1}} with Christoffel corrections on the
    parameter indices (ambient values ride along flat)."""
    if A.p == 0:
        raise ValueError("codifferential of a 0-form is zero by convention")
    o = A.order - 1
    p_out = A.p - 1
    gi = metric.ginv
    G = metric.gamma
    idx_in = ituple_index(NV, A.p)

    def comp_at(seq, order):
        i, sgn = seq_lookup(NV, seq)
        if not sgn:
            return None
        return Jet(order, A.jet.truncate(order).c[:, i]) * sgn

    def _b1(scalar):
        return Jet(scalar.order, scalar.c[:, None])

    out = Form.zero(p_out, A.q, A.m, o, A.batch)
    for i_out, I in enumerate(ituples(NV, p_out)):
        acc = None
        for k in range(NV):
            for j in range(NV):
                gkj = _b1(gi[k][j].truncate(o))
                base = comp_at((j,) + I, A.order)
                if base is not None:
                    t = gkj * base.partial(k)
                    acc = t if acc is None else acc + t
                for f in range(NV):
                    gam = G[f][k][j].truncate(o)
                    c = comp_at((f,) + I, o)
                    if c is not None:
                        t = gkj * _b1(gam) * c * (-1.0)
                        acc = t if acc is None else acc + t
                for s in range(p_out):
                    for f in range(NV):
                        gam = G[f][k][I[s]].truncate(o)
                        c = comp_at((j,) + I[:s] + (f,) + I[s + 1:], o)
                        if c is not None:
                            t = gkj * _b1(gam) * c * (-1.0)
                            acc = t if acc is None else acc + t
        if acc is not None:
            out.jet.c[:, i_out] = acc.c
    return out
