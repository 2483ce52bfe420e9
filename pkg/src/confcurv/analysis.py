"""Measure-theoretic and potential-theoretic tools on flat 4-dimensional grids.

Everything here works on uniformly sampled data: Lorentz norms through the
non-increasing rearrangement, a periodic Riesz-type potential, the fractional
maximal function with its associated interpolation ratio, local curvature
decay profiles of an immersion, and the spectral Hodge decomposition of
periodic forms under the flat metric.

Rearrangements treat each cell value as constant on its cell, so every
t-integral below is evaluated exactly on the resulting step function; grid
refinement is the accuracy knob.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryFrame, dot, smul

__all__ = [
    "SampledFunction",
    "FormFieldFlat",
    "lorentz_norm",
    "lorentz_inclusion_check",
    "riesz_potential",
    "frac_maximal",
    "frac_maximal_field",
    "adams_ratio",
    "morrey_profile",
    "MorreyProfile",
    "hodge_decompose_flat",
    "HodgeParts",
]

NV = 4


@dataclass
class SampledFunction:
    """Real values on a uniform grid over a 4-dimensional box or torus.

    side is the physical edge length (same for every axis); the cell
    volume follows from the grid shape.
    """

    values: np.ndarray
    side: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != NV:
            raise ValueError("expected a 4-dimensional grid of values")
        if min(self.values.shape) < 8:
            raise ValueError("grid axes need at least 8 nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.side <= 0:
            raise ValueError("side must be positive")

    @property
    def cell_volume(self):
        return float(self.side ** NV / self.values.size)

    @property
    def volume(self):
        return float(self.side ** NV)

    def rearrangement(self):
        """Decreasing rearrangement as (levels, right endpoints in t)."""
        flat = np.sort(np.abs(self.values).reshape(-1))[::-1]
        bounds = self.cell_volume * np.arange(1, flat.size + 1)
        return flat, bounds


def _step_lq_norm(levels, bounds, p, q):
    """|| t^(1/p) s(t) ||_{L^q(dt/t)} for the step function s.

    s(t) = levels[i] on (bounds[i-1], bounds[i]], evaluated in closed form.
    """
    left = np.concatenate(([0.0], bounds[:-1]))
    if np.isinf(q):
        return float(np.max(bounds ** (1.0 / p) * levels, initial=0.0))
    e = q / p
    chunks = levels ** q * (bounds ** e - left ** e) / e
    return float(np.sum(chunks) ** (1.0 / q))


def _average_rearrangement(levels, bounds):
    """Running-average levels f**(t) = (1/t) int_0^t f*(s) ds on each cell.

    Returns per-interval (slope level v_i, offset c_i) with
    f**(t) = v_i + c_i / t on (left_i, bounds_i].
    """
    left = np.concatenate(([0.0], bounds[:-1]))
    cum = np.concatenate(([0.0], np.cumsum(levels * (bounds - left))[:-1]))
    offs = cum - levels * left
    return levels, offs, left


def lorentz_norm(f, p, q, flavor="star"):
    """Lorentz-scale norm of |f| from its decreasing rearrangement.

    flavor "star" integrates t^(1/p) f*(t); flavor "doublestar" integrates
    t^(1/p) f**(t) with f** the running average of f*, which dominates f*
    and turns the quasi-norm into a norm.  Both integrals are evaluated
    piecewise on the rearrangement: exactly for "star", and with per-piece
    Gauss quadrature (exact to roundoff for these smooth pieces) for
    "doublestar".
    """
    if p <= 1.0 or not np.isfinite(p):
        raise ValueError("p must satisfy 1 < p < infinity")
    if q < 1.0:
        raise ValueError("q must satisfy 1 <= q <= infinity")
    levels, bounds = f.rearrangement()
    keep = levels > 0
    if not np.any(keep):
        return 0.0
    if flavor == "star":
        idx = np.nonzero(keep)[0]
        return _step_lq_norm(levels[idx], bounds[idx.max() + 1 - len(idx):
                                                 idx.max() + 1], p, q) \
            if False else _step_lq_norm(levels[keep], bounds[keep], p, q)
    if flavor != "doublestar":
        raise ValueError("flavor must be 'star' or 'doublestar'")
    v, c, left = _average_rearrangement(levels, bounds)
    if np.isinf(q):
        # t^(1/p) (v + c/t) is monotone on each piece; check both ends.
        lo = np.where(left > 0, left, bounds)
        ends = np.maximum(bounds ** (1.0 / p) * (v + c / bounds),
                          lo ** (1.0 / p) * (v + c / lo))
        return float(np.max(ends, initial=0.0))
    nodes, wts = np.polynomial.legendre.leggauss(24)
    half = 0.5 * (bounds - left)
    mid = 0.5 * (bounds + left)
    t = mid[:, None] + half[:, None] * nodes[None, :]
    vals = (t ** (q / p - 1.0)
            * (v[:, None] + c[:, None] / t) ** q)
    total = np.sum(half * np.sum(vals * wts[None, :], axis=1))
    return float(total ** (1.0 / q))


def lorentz_inclusion_check(f, p, q, p2, q2):
    """Ratio testing the embedding of the finer scale into the coarser one.

    Returns ||f||_(p,q) / (|U|^((p2-p)/(p2 p)) ||f||_(p2,q2)); zero input
    returns 0 by convention.
    """
    if not p < p2:
        raise ValueError("inclusion check needs p < p2")
    num = lorentz_norm(f, p, q)
    if num == 0.0:
        return 0.0
    den = f.volume ** ((p2 - p) / (p2 * p)) * lorentz_norm(f, p2, q2)
    return float(num / den)


def _torus_distance_grids(shape, side):
    axes = [np.minimum(np.arange(s), s - np.arange(s)) * (side / s)
            for s in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(a ** 2 for a in mesh))


def _riesz_kernel(shape, side, a, subgrid=8):
    dist = _torus_distance_grids(shape, side)
    kern = np.zeros(shape)
    mask = dist > 0
    kern[mask] = dist[mask] ** (-a)
    # Cell average over the singular central cell, by Gauss quadrature
    # (even node count, so the singularity itself is never sampled).
    h = side / shape[0]
    nodes, wts = np.polynomial.legendre.leggauss(subgrid)
    pts = 0.5 * h * nodes
    xs = np.meshgrid(pts, pts, pts, pts, indexing="ij")
    r = np.sqrt(sum(x ** 2 for x in xs))
    w = (wts[:, None, None, None] * wts[None, :, None, None]
         * wts[None, None, :, None] * wts[None, None, None, :])
    kern[(0,) * NV] = float(np.sum(w * r ** (-a)) / 2.0 ** NV)
    return kern


def riesz_potential(f, a=3.0):
    """Periodic convolution of f with the |x|^(-a) kernel on its torus.

    The kernel is the min-image distance power on the fundamental cell,
    with its singular cell replaced by the cell average; the convolution
    runs spectrally and is exactly linear and translation equivariant.
    """
    if a >= NV:
        raise ValueError("kernel exponent must stay integrable: a < 4")
    if a <= 0:
        raise ValueError("kernel exponent must be positive")
    kern = _riesz_kernel(f.values.shape, f.side, a)
    out = np.fft.ifftn(np.fft.fftn(f.values) * np.fft.fftn(kern)).real
    return SampledFunction(out * f.cell_volume, f.side)


def _ball_indicator_hats(shape, side, radii):
    dist = _torus_distance_grids(shape, side)
    hats = []
    for r in radii:
        hats.append(np.fft.fftn((dist <= r).astype(np.float64)))
    return hats


def _dyadic_radii(f, levels=None):
    shape = f.values.shape
    h = f.side / max(shape)
    if levels is None:
        levels = max(2, int(math.floor(math.log2(0.5 * f.side / (2 * h)))) + 1)
    return [0.5 * f.side * 2.0 ** (-j) for j in range(levels)]


def frac_maximal_field(f, beta, radii=None):
    """Dyadic fractional maximal function at every grid point.

    For each radius r in the ladder the local mass ||f||_{L^1(B_r(x))}
    comes from one spectral convolution with the ball indicator; the
    field is the maximum of r^(-1-beta) times that mass over the ladder.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if radii is None:
        radii = _dyadic_radii(f)
    absf = np.abs(f.values)
    fhat = np.fft.fftn(absf)
    out = np.zeros(f.values.shape)
    for r, hat in zip(radii, _ball_indicator_hats(f.values.shape,
                                                  f.side, radii)):
        mass = np.fft.ifftn(fhat * hat).real * f.cell_volume
        np.maximum(out, r ** (-1.0 - beta) * np.clip(mass, 0.0, None),
                   out=out)
    return SampledFunction(out, f.side)


def frac_maximal(f, beta, center=None, radii=None):
    """Fractional maximal value at one grid point (default: the origin)."""
    field_vals = frac_maximal_field(f, beta, radii=radii).values
    if center is None:
        center = (0,) * NV
    return float(field_vals[tuple(center)])


def adams_ratio(f, beta, p):
    """Interpolation ratio bounding the potential by maximal and plain norms.

    ratio = ||I f||_{L^s} / (||M f||_inf^(p/lam) ||f||_{L^p}^(1 - p/lam))
    with lam = (3 - beta) p and s = p (3 - beta) / (2 - beta).  Finite,
    refinement-stable values over function families are the test target.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    lam = (3.0 - beta) * p
    if not 1.0 < p < lam:
        raise ValueError("need 1 < p < (3 - beta) p")
    s = p * (3.0 - beta) / (2.0 - beta)
    pot = riesz_potential(f, a=3.0)
    vol = f.cell_volume
    num = float(np.sum(np.abs(pot.values) ** s) * vol) ** (1.0 / s)
    msup = float(np.max(frac_maximal_field(f, beta).values))
    fp = float(np.sum(np.abs(f.values) ** p) * vol) ** (1.0 / p)
    if msup == 0.0 or fp == 0.0:
        return 0.0
    return num / (msup ** (p / lam) * fp ** (1.0 - p / lam))


@dataclass
class MorreyProfile:
    """Local curvature decay data: radii, values, and fitted exponent."""

    radii: np.ndarray
    values: np.ndarray
    exponent: float

    def lines(self):
        return ["%.8e %.8e" % (r, v)
                for r, v in zip(self.radii, self.values)]


def morrey_profile(immersion, center, max_radius=0.5, levels=5,
                   resolution=12, order=3):
    """Decay profile of the scale-invariant local curvature quantity.

    For dyadic radii r the profile records the chart-ball quantity
    ||h||_{L^4(B_r)} + ||normal dH||_{L^2(B_r)}, both norms taken with
    raised indices and the induced measure, plus the least-squares slope
    of log value against log r over the shrinking balls.
    """
    center = np.asarray(center, dtype=np.float64).reshape(NV)
    n = resolution
    axes = [np.linspace(c - max_radius, c + max_radius, n) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.stack([a.reshape(-1) for a in mesh])
    cell = (2.0 * max_radius / (n - 1)) ** NV
    pt = immersion.point(x, order)
    fr = GeometryFrame(pt)
    gi = fr.ginv
    h_up = [[None] * NV for _ in range(NV)]
    o = fr.order - 2
    for i in range(NV):
        for j in range(NV):
            up = None
            for k in range(NV):
                for l in range(NV):
                    s = (gi[i][k] * gi[j][l]).truncate(o)
                    up = up + smul(s, fr.h[k][l]) if up is not None \
                        else smul(s, fr.h[k][l])
            h_up[i][j] = up
    hsq = 0.0
    for i in range(NV):
        for j in range(NV):
            hsq = hsq + dot(fr.h[i][j], h_up[i][j]).c[0]
    gsq = 0.0
    for i in range(NV):
        up = None
        for k in range(NV):
            t = smul(gi[i][k], fr.pin_dH[k])
            up = t if up is None else up + t
        gsq = gsq + dot(fr.pin_dH[i], up).c[0]
    hsq = np.clip(hsq, 0.0, None)
    gsq = np.clip(gsq, 0.0, None)
    area = fr.sqrtg.c[0]
    dist = np.sqrt(np.sum((x - center[:, None]) ** 2, axis=0))
    radii = np.array([max_radius * 2.0 ** (-j) for j in range(levels)])
    values = []
    for r in radii:
        inside = dist <= r
        m4 = float(np.sum(hsq[inside] ** 2 * area[inside]) * cell)
        m2 = float(np.sum(gsq[inside] * area[inside]) * cell)
        values.append(m4 ** 0.25 + m2 ** 0.5)
    values = np.array(values)
    good = values > 0
    if np.count_nonzero(good) >= 2:
        slope = np.polyfit(np.log(radii[good]), np.log(values[good]), 1)[0]
    else:
        slope = float("inf")
    return MorreyProfile(radii, values, float(slope))


# -- flat-torus Hodge decomposition ------------------------------------


def _combos(k):
    return list(itertools.combinations(range(NV), k))


@dataclass
class FormFieldFlat:
    """Periodic k-form on the flat 4-torus, sampled on a uniform grid.

    comps[c] holds the coefficient of the c-th increasing index tuple;
    trailing axes beyond the four grid axes are carried along untouched,
    so multivector-valued forms ride through every operation.
    """

    degree: int
    comps: np.ndarray
    side: float = 1.0
    metric: object = None

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=np.float64)
        want = len(_combos(self.degree))
        if self.comps.shape[0] != want:
            raise ValueError("component count mismatch for the degree")
        if self.comps.ndim < 1 + NV:
            raise ValueError("expected grid axes after the component axis")

    @property
    def grid_shape(self):
        return self.comps.shape[1:1 + NV]

    def l2_inner(self, other):
        cell = self.side ** NV / float(np.prod(self.grid_shape))
        return float(np.sum(self.comps * other.comps) * cell)


def _wavevectors(shape, side):
    ks = []
    for s in shape:
        ks.append(2.0 * np.pi / side * np.fft.fftfreq(s, d=1.0 / s))
    return np.meshgrid(*ks, indexing="ij")


def _wedge_interior_tables(k):
    """Index plumbing for xi-wedge (k -> k+1) and xi-contraction (k -> k-1)."""
    lo = _combos(k)
    hi = _combos(k + 1) if k < NV else []
    wedge = []
    for ci, comb in enumerate(lo):
        for v in range(NV):
            if v in comb:
                continue
            tgt = tuple(sorted(comb + (v,)))
            sign = (-1.0) ** sum(1 for u in comb if u < v)
            wedge.append((hi.index(tgt), v, ci, sign))
    inter = []
    for ci, comb in enumerate(lo):
        for pos, v in enumerate(comb):
            tgt = tuple(u for u in comb if u != v)
            lo1 = _combos(k - 1) if k > 0 else []
            inter.append((lo1.index(tgt), v, ci, (-1.0) ** pos))
    return wedge, inter


def hodge_decompose_flat(A):
    """Split a periodic form into exact, co-exact, and constant parts.

    Works per Fourier mode with the flat metric: the mode component along
    the wavevector goes to the exact part, the rest to the co-exact part,
    and the zero mode is the harmonic (constant) summand.  Returns
    (a, b, omega) with d a recovering the exact part under the gauge
    d* a = 0, and d* b the co-exact part under d b = 0.
    """
    if A.metric is not None:
        raise NotImplementedError(
            "only the flat metric is supported; general coefficients have "
            "no constructive recipe here")
    k = A.degree
    shape = A.grid_shape
    extra = A.comps.shape[1 + NV:]
    ncomp = A.comps.shape[0]
    axes = tuple(range(1, 1 + NV))
    hat = np.fft.fftn(A.comps, axes=axes)
    kvecs = _wavevectors(shape, A.side)
    k2 = sum(kk ** 2 for kk in kvecs)
    k2safe = np.where(k2 > 0, k2, 1.0)

    def expand(arr):
        return arr.reshape(arr.shape + (1,) * len(extra))

    # interior product with the wavevector: k-form -> (k-1)-form
    def contract(src, deg):
        lo = _combos(deg - 1)
        out = np.zeros((len(lo),) + shape + extra, dtype=complex)
        _, inter = _wedge_interior_tables(deg)
        for tgt, v, ci, sign in inter:
            out[tgt] += sign * expand(kvecs[v]) * src[ci]
        return out

    # wedge with the wavevector: k-form -> (k+1)-form
    def wedge(src, deg):
        hi = _combos(deg + 1)
        out = np.zeros((len(hi),) + shape + extra, dtype=complex)
        table, _ = _wedge_interior_tables(deg)
        for tgt, v, ci, sign in table:
            out[tgt] += sign * expand(kvecs[v]) * src[ci]
        return out

    zero_mode = hat[(slice(None),) + (0,) * NV].copy()
    omega_hat = np.zeros_like(hat)
    omega_hat[(slice(None),) + (0,) * NV] = zero_mode
    hat0 = hat - omega_hat

    if k > 0:
        pot_a = contract(hat0, k) * (-1j) / expand(k2safe)
    else:
        pot_a = np.zeros((0,) + shape + extra, dtype=complex)
    if k < NV:
        pot_b = wedge(hat0, k) * 1j / expand(k2safe)
    else:
        pot_b = np.zeros((len(_combos(k + 1)) if k < NV else 0,)
                         + shape + extra, dtype=complex)

    def ifft_real(arr):
        return np.fft.ifftn(arr, axes=axes).real

    a = FormFieldFlat(k - 1, ifft_real(pot_a), A.side) if k > 0 else None
    b = FormFieldFlat(k + 1, ifft_real(pot_b), A.side) if k < NV else None
    omega = FormFieldFlat(k, ifft_real(omega_hat), A.side)
    return a, b, omega


def form_d(A):
    """Covariant exterior derivative of a flat periodic form, spectrally."""
    k = A.degree
    if k >= NV:
        return FormFieldFlat(k, np.zeros_like(A.comps), A.side) \
            if False else None
    axes = tuple(range(1, 1 + NV))
    hat = np.fft.fftn(A.comps, axes=axes)
    kvecs = _wavevectors(A.grid_shape, A.side)
    extra = A.comps.shape[1 + NV:]
    hi = _combos(k + 1)
    out = np.zeros((len(hi),) + A.grid_shape + extra, dtype=complex)
    table, _ = _wedge_interior_tables(k)
    for tgt, v, ci, sign in table:
        out[tgt] += sign * (1j * kvecs[v]).reshape(
            kvecs[v].shape + (1,) * len(extra)) * hat[ci]
    return FormFieldFlat(k + 1, np.fft.ifftn(out, axes=axes).real, A.side)


def form_codifferential(A):
    """Codifferential under the flat metric, spectrally."""
    k = A.degree
    if k <= 0:
        return None
    axes = tuple(range(1, 1 + NV))
    hat = np.fft.fftn(A.comps, axes=axes)
    kvecs = _wavevectors(A.grid_shape, A.side)
    extra = A.comps.shape[1 + NV:]
    lo = _combos(k - 1)
    out = np.zeros((len(lo),) + A.grid_shape + extra, dtype=complex)
    _, inter = _wedge_interior_tables(k)
    for tgt, v, ci, sign in inter:
        out[tgt] += sign * (-1j * kvecs[v]).reshape(
            kvecs[v].shape + (1,) * len(extra)) * hat[ci]
    return FormFieldFlat(k - 1, np.fft.ifftn(out, axes=axes).real, A.side)
