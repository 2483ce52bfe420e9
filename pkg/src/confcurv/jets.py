"""Truncated multivariate Taylor (jet) arithmetic in four chart variables.

A jet of order K at a point stores the coefficients d^a f / a! for every
multi-index a with |a| <= K, in graded lexicographic order.  Coefficient
arrays carry an arbitrary trailing batch shape, so one Jet can hold the
expansion of a field at every node of a grid simultaneously; all operations
are vectorized over that batch.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

NVARS = 4

# Temporary size ceiling (floats) below which multiplication uses the
# single-call reduceat path instead of the per-output-group loop.
_REDUCEAT_CEILING = 1 << 23


def coefficient_count(order):
    """Number of multi-indices a in 4 variables with |a| <= order."""
    return math.comb(order + NVARS, NVARS)


class JetSpace:
    """Lookup tables for one truncation order: exponent list, index map,
    multiplication triples grouped by output coefficient, and the gather
    maps that implement each partial derivative."""

    def __init__(self, order):
        self.order = order
        exps = []
        for total in range(order + 1):
            block = [e for e in itertools.product(range(total + 1), repeat=NVARS)
                     if sum(e) == total]
            block.sort()
            exps.extend(block)
        self.exps = np.array(exps, dtype=np.int64)
        self.ncoef = len(exps)
        assert self.ncoef == coefficient_count(order)
        self.index = {tuple(e): i for i, e in enumerate(exps)}

        # Multiplication triples (ia, ib, ic), sorted by ic so that each
        # output coefficient owns a contiguous segment.
        trip = []
        for ia, ea in enumerate(exps):
            ra = order - sum(ea)
            for ib, eb in enumerate(exps):
                if sum(eb) <= ra:
                    ec = tuple(x + y for x, y in zip(ea, eb))
                    trip.append((self.index[ec], ia, ib))
        trip.sort()
        t = np.array(trip, dtype=np.int64)
        self.mul_ic = t[:, 0]
        self.mul_ia = t[:, 1]
        self.mul_ib = t[:, 2]
        starts = np.searchsorted(self.mul_ic, np.arange(self.ncoef))
        self.mul_starts = np.concatenate([starts, [len(trip)]])

        # Partial derivative d_v: child coefficient j (in the order-1 space)
        # comes from parent coefficient psrc[v][j] scaled by pfac[v][j].
        if order >= 1:
            cexps = []
            for total in range(order):
                block = [e for e in itertools.product(range(total + 1), repeat=NVARS)
                         if sum(e) == total]
                block.sort()
                cexps.extend(block)
            self.child_ncoef = len(cexps)
            self.psrc = []
            self.pfac = []
            for v in range(NVARS):
                src = np.empty(self.child_ncoef, dtype=np.int64)
                fac = np.empty(self.child_ncoef, dtype=np.float64)
                for j, e in enumerate(cexps):
                    ep = list(e)
                    ep[v] += 1
                    src[j] = self.index[tuple(ep)]
                    fac[j] = ep[v]
                self.psrc.append(src)
                self.pfac.append(fac)

        # a! per coefficient, for derivative extraction.
        self.factorials = np.array(
            [math.prod(math.factorial(int(x)) for x in e) for e in exps],
            dtype=np.float64)


@functools.lru_cache(maxsize=None)
def jet_space(order):
    if order < 0:
        raise ValueError("jet order must be nonnegative")
    return JetSpace(order)


class Jet:
    """Order-K Taylor expansion with coefficients of shape (ncoef, *batch)."""

    __slots__ = ("order", "c")

    def __init__(self, order, coeffs):
        self.order = order
        self.c = coeffs

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value, order):
        value = np.asarray(value, dtype=np.float64)
        c = np.zeros((coefficient_count(order),) + value.shape)
        c[0] = value
        return Jet(order, c)

    @staticmethod
    def coordinate(v, base, order):
        """Jet of the chart coordinate x_v expanded at base (array-valued)."""
        base = np.asarray(base, dtype=np.float64)
        c = np.zeros((coefficient_count(order),) + base.shape)
        c[0] = base
        if order >= 1:
            e = [0] * NVARS
            e[v] = 1
            c[jet_space(order).index[tuple(e)]] = 1.0
        return Jet(order, c)

    # -- bookkeeping ---------------------------------------------------

    @property
    def batch_shape(self):
        return self.c.shape[1:]

    @property
    def value(self):
        return self.c[0]

    def deriv(self, alpha):
        """Value of d^alpha f at the base point (factorials reapplied)."""
        sp = jet_space(self.order)
        i = sp.index[tuple(alpha)]
        return self.c[i] * sp.factorials[i]

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot raise jet order by truncation")
        if order == self.order:
            return self
        return Jet(order, self.c[:coefficient_count(order)])

    def copy(self):
        return Jet(self.order, self.c.copy())

    def __repr__(self):
        return f"Jet(order={self.order}, batch={self.batch_shape})"

    # -- linear arithmetic ---------------------------------------------

    def _check(self, other):
        if self.order != other.order:
            raise ValueError(
                f"jet order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.order, self.c + other.c)
        arr = np.asarray(other)
        shape = (self.c.shape[0],) + np.broadcast_shapes(self.batch_shape,
                                                         arr.shape)
        c = np.zeros(shape, dtype=np.result_type(self.c.dtype, arr.dtype))
        c += self.c
        c[0] += arr
        return Jet(self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.order, -self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return _mul(self, other)
        return Jet(self.order, self.c * np.asarray(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * recip(other)
        return Jet(self.order, self.c / np.asarray(other))

    def __rtruediv__(self, other):
        return recip(self) * other

    def partial(self, v):
        """Jet of d f / d x_v, one order lower."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        sp = jet_space(self.order)
        fac = sp.pfac[v].reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(self.order - 1, self.c[sp.psrc[v]] * fac)


def _mul(a, b):
    sp = jet_space(a.order)
    ca, cb = np.broadcast_arrays(a.c, b.c)
    batch = ca.shape[1:]
    nbatch = int(np.prod(batch, dtype=np.int64)) if batch else 1
    out = np.empty((sp.ncoef,) + batch,
                   dtype=np.result_type(ca.dtype, cb.dtype))
    if len(sp.mul_ia) * nbatch <= _REDUCEAT_CEILING:
        prod = ca[sp.mul_ia] * cb[sp.mul_ib]
        np.add.reduceat(prod, sp.mul_starts[:-1], axis=0, out=out)
    else:
        st = sp.mul_starts
        for g in range(sp.ncoef):
            s, e = st[g], st[g + 1]
            np.sum(ca[sp.mul_ia[s:e]] * cb[sp.mul_ib[s:e]], axis=0, out=out[g])
    return Jet(a.order, out)


def compose_univariate(series, inner):
    """f(inner) for a scalar function f given by its Taylor coefficients.

    series : array (order+1, *batch-or-broadcastable), series[k] = f^(k)(c)/k!
    where c = inner.value.  Evaluated by Horner on the zero-constant part of
    inner, which makes the truncation exact.
    """
    dev = Jet(inner.order, inner.c.copy())
    dev.c[0] = 0.0
    first = np.broadcast_to(series[-1], inner.batch_shape)
    c = np.zeros((coefficient_count(inner.order),) + first.shape,
                 dtype=np.result_type(np.asarray(series).dtype, inner.c.dtype))
    c[0] = first
    out = Jet(inner.order, c)
    for k in range(inner.order - 1, -1, -1):
        out = out * dev
        out.c[0] = out.c[0] + series[k]
    return out


def _series(inner, rule):
    c = inner.value
    return np.stack([rule(k, c) for k in range(inner.order + 1)])


def recip(a):
    """1/a as a jet; rejects a singular constant term."""
    c0 = np.asarray(a.value)
    if np.any(np.abs(c0) < 1e-300) or not np.all(np.isfinite(c0)):
        raise ValueError("reciprocal of a jet with (near-)vanishing constant term")
    return compose_univariate(_series(a, lambda k, c: (-1.0) ** k / c ** (k + 1)), a)


def sqrt(a):
    c0 = np.asarray(a.value)
    if np.any(c0 <= 0):
        raise ValueError("jet sqrt requires a positive constant term")
    return compose_univariate(
        _series(a, lambda k, c: math.comb(2 * k, k) * (-0.25) ** k / (1 - 2 * k) * c ** (0.5 - k)), a)


def exp(a):
    e0 = np.exp(a.value)
    return compose_univariate(
        np.stack([e0 / math.factorial(k) for k in range(a.order + 1)]), a)


def log(a):
    c0 = np.asarray(a.value)
    if np.any(c0 <= 0):
        raise ValueError("jet log requires a positive constant term")
    def rule(k, c):
        if k == 0:
            return np.log(c)
        return (-1.0) ** (k + 1) / (k * c ** k)
    return compose_univariate(_series(a, rule), a)


def cos(a):
    c0 = a.value
    cycle = [np.cos(c0), -np.sin(c0), -np.cos(c0), np.sin(c0)]
    return compose_univariate(
        np.stack([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)]), a)


def sin(a):
    c0 = a.value
    cycle = [np.sin(c0), np.cos(c0), -np.sin(c0), -np.cos(c0)]
    return compose_univariate(
        np.stack([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)]), a)


def cosh(a):
    c0 = a.value
    cycle = [np.cosh(c0), np.sinh(c0)]
    return compose_univariate(
        np.stack([cycle[k % 2] / math.factorial(k) for k in range(a.order + 1)]), a)


def sinh(a):
    c0 = a.value
    cycle = [np.sinh(c0), np.cosh(c0)]
    return compose_univariate(
        np.stack([cycle[k % 2] / math.factorial(k) for k in range(a.order + 1)]), a)


def polynomial_jet(terms, base, order):
    """Jet at `base` of the polynomial sum(coef * x^beta).

    terms : iterable of (beta, coef) with beta a length-4 exponent tuple;
    base : array (4, *batch) of expansion points.
    """
    base = np.asarray(base, dtype=np.float64)
    batch = base.shape[1:]
    sp = jet_space(order)
    c = np.zeros((sp.ncoef,) + batch)
    for beta, coef in terms:
        beta = tuple(int(x) for x in beta)
        for alpha in itertools.product(*(range(b + 1) for b in beta)):
            if sum(alpha) > order:
                continue
            w = coef * math.prod(math.comb(b, a) for b, a in zip(beta, alpha))
            mono = np.ones(batch)
            for v in range(NVARS):
                if beta[v] - alpha[v]:
                    mono = mono * base[v] ** (beta[v] - alpha[v])
            c[sp.index[alpha]] += w * mono
    return Jet(order, c)
