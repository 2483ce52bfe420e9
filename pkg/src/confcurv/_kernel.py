"""Compiled inner loops for energy quadrature and coefficient gradients.

The kernels walk a node-major packed derivative array (n, 34, m) holding
first (rows 0-3), symmetric second (rows 4-13) and symmetric third
(rows 14-33) partials of the immersion, evaluate the same densities as
energies.integrand_fields one node at a time, and accumulate weighted
totals.

Two entry points share one inlined per-node core:

* density_sums: one pass over all nodes for a single configuration.  A
  probe column (n, 34) can be blended into one ambient component on the
  fly, so a finite-difference evaluation never has to materialize a
  perturbed derivative array.
* gradient_table: all central-difference probe energies for a whole
  coefficient table in one pass.  Per node the base rows are loaded
  once and stay cache-hot while every (mode, component, sign) probe
  blends a single column in place, which is what makes dense
  finite-difference gradients affordable.

Kernels are generated per ambient dimension with m baked in as a
compile-time constant, so every loop over ambient components has a
fixed trip count.

Accumulation order is the node order, fixed by the caller, so repeated
runs on identical inputs are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .energies import PAIR_I, PAIR_J, PAIR_MULT, PAIR_IDX, TRIP_OF

# row offsets of the packed blocks inside the 34-row derivative stack
PROW = PAIR_IDX + 4
TROW = TRIP_OF + 14

# static index tables for the metric-derivative coefficients: the slot
# dgc[p] multiplying hup[p] in the normal-derivative assembly is
# mult_p * (t2[pair(i,a), b] + t2[pair(i,b), a]) for p = (a, b), read
# here from the flattened 40-entry t2 store.
_DG_I1 = np.empty((4, 10), dtype=np.int64)
_DG_I2 = np.empty((4, 10), dtype=np.int64)
for _i in range(4):
    for _p in range(10):
        _a = PAIR_I[_p]
        _b = PAIR_J[_p]
        _DG_I1[_i, _p] = PAIR_IDX[_i, _a] * 4 + _b
        _DG_I2[_i, _p] = PAIR_IDX[_i, _b] * 4 + _a
_DG_C = 0.25 * PAIR_MULT

_FM = {"reassoc", "contract", "arcp", "nsz"}


def pack_derivatives(D1, D2, D3):
    """Node-major contiguous (n, 34, m) stack of the packed partials."""
    cat = np.concatenate([D1, D2, D3], axis=0)
    return np.ascontiguousarray(cat.transpose(2, 0, 1))


def _make_core(m):
    pair_i = PAIR_I
    pair_j = PAIR_J
    pair_mult = PAIR_MULT
    pair_idx = PAIR_IDX
    trow = TROW
    dg_i1 = _DG_I1
    dg_i2 = _DG_I2
    dg_c = _DG_C

    @njit(inline="always", fastmath=_FM, error_model="numpy")
    def core(B, g, gi, t2f, gam, qw, hb, hmx, hup, H, Hh, vv, tw, uu):
        """Light densities at one node; fills the passed scratch arrays.

        Returns (det, sqrt(det), conformal, quartic_norm).  The scratch
        arrays g, gi, H, hb, hmx, hup are left holding the node values
        so callers can build the remaining quartics from them.
        """
        # metric and its cofactor inverse
        for i in range(4):
            for j in range(i, 4):
                acc = 0.0
                for a in range(m):
                    acc += B[i, a] * B[j, a]
                g[i, j] = acc
                g[j, i] = acc
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
        det = (s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1
               + s5 * c0)
        rdet = 1.0 / det
        gi[0, 0] = (g[1, 1] * c5 - g[1, 2] * c4 + g[1, 3] * c3) * rdet
        gi[0, 1] = (-g[0, 1] * c5 + g[0, 2] * c4 - g[0, 3] * c3) * rdet
        gi[0, 2] = (g[3, 1] * s5 - g[3, 2] * s4 + g[3, 3] * s3) * rdet
        gi[0, 3] = (-g[2, 1] * s5 + g[2, 2] * s4 - g[2, 3] * s3) * rdet
        gi[1, 0] = (-g[1, 0] * c5 + g[1, 2] * c2 - g[1, 3] * c1) * rdet
        gi[1, 1] = (g[0, 0] * c5 - g[0, 2] * c2 + g[0, 3] * c1) * rdet
        gi[1, 2] = (-g[3, 0] * s5 + g[3, 2] * s2 - g[3, 3] * s1) * rdet
        gi[1, 3] = (g[2, 0] * s5 - g[2, 2] * s2 + g[2, 3] * s1) * rdet
        gi[2, 0] = (g[1, 0] * c4 - g[1, 1] * c2 + g[1, 3] * c0) * rdet
        gi[2, 1] = (-g[0, 0] * c4 + g[0, 1] * c2 - g[0, 3] * c0) * rdet
        gi[2, 2] = (g[3, 0] * s4 - g[3, 1] * s2 + g[3, 3] * s0) * rdet
        gi[2, 3] = (-g[2, 0] * s4 + g[2, 1] * s2 - g[2, 3] * s0) * rdet
        gi[3, 0] = (-g[1, 0] * c3 + g[1, 1] * c1 - g[1, 2] * c0) * rdet
        gi[3, 1] = (g[0, 0] * c3 - g[0, 1] * c1 + g[0, 2] * c0) * rdet
        gi[3, 2] = (-g[3, 0] * s3 + g[3, 1] * s1 - g[3, 2] * s0) * rdet
        gi[3, 3] = (g[2, 0] * s3 - g[2, 1] * s1 + g[2, 2] * s0) * rdet
        sq = np.sqrt(det)

        # Christoffel contractions, second fundamental form, mean
        # curvature (the hb pass accumulates H on the fly)
        for p in range(10):
            for k in range(4):
                acc = 0.0
                for a in range(m):
                    acc += B[4 + p, a] * B[k, a]
                t2f[4 * p + k] = acc
        for l in range(4):
            for p in range(10):
                gam[l, p] = (gi[l, 0] * t2f[4 * p] + gi[l, 1] * t2f[4 * p + 1]
                             + gi[l, 2] * t2f[4 * p + 2]
                             + gi[l, 3] * t2f[4 * p + 3])
        for p in range(10):
            qw[p] = 0.25 * pair_mult[p] * gi[pair_i[p], pair_j[p]]
        for a in range(m):
            H[a] = 0.0
        for p in range(10):
            g0 = gam[0, p]
            g1 = gam[1, p]
            g2 = gam[2, p]
            g3 = gam[3, p]
            cq = qw[p]
            for a in range(m):
                hv = (B[4 + p, a] - g0 * B[0, a] - g1 * B[1, a]
                      - g2 * B[2, a] - g3 * B[3, a])
                hb[p, a] = hv
                H[a] += cq * hv
        H2 = 0.0
        for a in range(m):
            H2 += H[a] * H[a]

        # mixed and raised h
        for i in range(4):
            for l in range(4):
                r0 = pair_idx[0, l]
                r1 = pair_idx[1, l]
                r2 = pair_idx[2, l]
                r3 = pair_idx[3, l]
                gi0 = gi[i, 0]
                gi1 = gi[i, 1]
                gi2 = gi[i, 2]
                gi3 = gi[i, 3]
                for a in range(m):
                    hmx[i, l, a] = (gi0 * hb[r0, a] + gi1 * hb[r1, a]
                                    + gi2 * hb[r2, a] + gi3 * hb[r3, a])
        for p in range(10):
            i = pair_i[p]
            j = pair_j[p]
            gj0 = gi[j, 0]
            gj1 = gi[j, 1]
            gj2 = gi[j, 2]
            gj3 = gi[j, 3]
            for a in range(m):
                hup[p, a] = (gj0 * hmx[i, 0, a] + gj1 * hmx[i, 1, a]
                             + gj2 * hmx[i, 2, a] + gj3 * hmx[i, 3, a])

        h2 = 0.0
        for p in range(10):
            au = 0.0
            ah = 0.0
            for a in range(m):
                au += hup[p, a] * hb[p, a]
                ah += H[a] * hb[p, a]
            h2 += pair_mult[p] * au
            Hh[p] = ah
        h02 = h2 - 4.0 * H2
        q1 = h02 * h02

        # |H.h|^2 via the mixed matrix trace
        Hh2 = 0.0
        for i in range(4):
            u0 = (gi[i, 0] * Hh[pair_idx[0, 0]] + gi[i, 1] * Hh[pair_idx[1, 0]]
                  + gi[i, 2] * Hh[pair_idx[2, 0]]
                  + gi[i, 3] * Hh[pair_idx[3, 0]])
            u1 = (gi[i, 0] * Hh[pair_idx[0, 1]] + gi[i, 1] * Hh[pair_idx[1, 1]]
                  + gi[i, 2] * Hh[pair_idx[2, 1]]
                  + gi[i, 3] * Hh[pair_idx[3, 1]])
            u2 = (gi[i, 0] * Hh[pair_idx[0, 2]] + gi[i, 1] * Hh[pair_idx[1, 2]]
                  + gi[i, 2] * Hh[pair_idx[2, 2]]
                  + gi[i, 3] * Hh[pair_idx[3, 2]])
            u3 = (gi[i, 0] * Hh[pair_idx[0, 3]] + gi[i, 1] * Hh[pair_idx[1, 3]]
                  + gi[i, 2] * Hh[pair_idx[2, 3]]
                  + gi[i, 3] * Hh[pair_idx[3, 3]])
            uu[i, 0] = u0
            uu[i, 1] = u1
            uu[i, 2] = u2
            uu[i, 3] = u3
        for i in range(4):
            for j in range(4):
                Hh2 += uu[i, j] * uu[j, i]

        # normal derivative of H: metric/Christoffel part plus the
        # projected third-derivative trace
        for l in range(4):
            acc = 0.0
            for p in range(10):
                acc += qw[p] * gam[l, p]
            uu[0, l] = acc
        for i in range(4):
            for a in range(m):
                vv[i, a] = 0.0
            for p in range(10):
                cw = qw[p]
                cp = dg_c[p] * (t2f[dg_i1[i, p]] + t2f[dg_i2[i, p]])
                r = trow[i, p]
                for a in range(m):
                    vv[i, a] += cw * B[r, a] - cp * hup[p, a]
            for l in range(4):
                cl = uu[0, l]
                r = pair_idx[i, l]
                for a in range(m):
                    vv[i, a] -= cl * hb[r, a]

        # squared norm of the normal projection, Gram form: subtract
        # the tangential Gram correction instead of rewriting vv
        for i in range(4):
            for k in range(4):
                acc = 0.0
                for a in range(m):
                    acc += B[k, a] * vv[i, a]
                tw[i, k] = acc
        for i in range(4):
            for l in range(4):
                uu[i, l] = (tw[i, 0] * gi[0, l] + tw[i, 1] * gi[1, l]
                            + tw[i, 2] * gi[2, l] + tw[i, 3] * gi[3, l])
        pdH2 = 0.0
        for i in range(4):
            for j in range(i, 4):
                acc = 0.0
                for a in range(m):
                    acc += vv[i, a] * vv[j, a]
                tm = (uu[i, 0] * tw[j, 0] + uu[i, 1] * tw[j, 1]
                      + uu[i, 2] * tw[j, 2] + uu[i, 3] * tw[j, 3])
                cc = gi[i, j] * (acc - tm)
                pdH2 += cc if i == j else 2.0 * cc

        conf = pdH2 - Hh2 + 7.0 * H2 * H2
        return det, sq, conf, q1, H2

    return core


def _make_kernels(m):
    core = _make_core(m)
    pair_i = PAIR_I
    pair_j = PAIR_J
    pair_mult = PAIR_MULT
    pair_idx = PAIR_IDX
    trow = TROW
    dg_i1 = _DG_I1
    dg_i2 = _DG_I2
    dg_c = _DG_C

    @njit(fastmath=_FM, error_model="numpy")
    def density_sums(D, wts, probe, comp, scale, full):
        n = D.shape[0]

        B = np.empty((34, m))
        g = np.empty((4, 4))
        gi = np.empty((4, 4))
        t2f = np.empty(40)
        gam = np.empty((4, 10))
        qw = np.empty(10)
        hb = np.empty((10, m))
        hmx = np.empty((4, 4, m))
        hup = np.empty((10, m))
        H = np.empty(m)
        Hh = np.empty(10)
        vv = np.empty((4, m))
        tw = np.empty((4, 4))
        uu = np.empty((4, 4))
        h0b = np.empty((10, m))
        h0up = np.empty((10, m))
        K = np.empty((m, m))
        M4 = np.empty((4, 4, m, m))
        F1 = np.empty((4, 4))

        s_area = 0.0
        s_conf = 0.0
        s_q1 = 0.0
        s_q2 = 0.0
        s_q3 = 0.0
        s_q4 = 0.0
        min_det = np.inf

        for node in range(n):
            for d in range(34):
                for a in range(m):
                    B[d, a] = D[node, d, a]
            if scale != 0.0:
                for d in range(34):
                    B[d, comp] += scale * probe[node, d]

            det, sq, conf, q1, H2 = core(B, g, gi, t2f, gam, qw, hb, hmx,
                                         hup, H, Hh, vv, tw, uu)
            if det < min_det:
                min_det = det

            wn = wts[node] * sq
            s_area += wn
            s_conf += wn * conf
            s_q1 += wn * q1

            if full:
                for p in range(10):
                    gl = g[pair_i[p], pair_j[p]]
                    gu = gi[pair_i[p], pair_j[p]]
                    for a in range(m):
                        h0b[p, a] = hb[p, a] - gl * H[a]
                        h0up[p, a] = hup[p, a] - gu * H[a]
                for a in range(m):
                    for b in range(m):
                        K[a, b] = 0.0
                for p in range(10):
                    mu = pair_mult[p]
                    for a in range(m):
                        cu = mu * h0up[p, a]
                        for b in range(m):
                            K[a, b] += cu * h0b[p, b]
                q2 = 0.0
                for a in range(m):
                    for b in range(m):
                        q2 += K[a, b] * K[a, b]

                for i in range(4):
                    for j in range(4):
                        a1 = 0.0
                        for k in range(4):
                            r1 = pair_idx[i, k]
                            r2 = pair_idx[j, k]
                            for a in range(m):
                                a1 += h0b[r1, a] * h0up[r2, a]
                        F1[i, j] = a1
                q3 = 0.0
                for i in range(4):
                    for j in range(4):
                        q3 += F1[i, j] * F1[j, i]

                for j in range(4):
                    for l in range(4):
                        for a in range(m):
                            for b in range(m):
                                M4[j, l, a, b] = 0.0
                        for i in range(4):
                            r1 = pair_idx[i, j]
                            r2 = pair_idx[i, l]
                            for a in range(m):
                                cu = h0up[r1, a]
                                for b in range(m):
                                    M4[j, l, a, b] += cu * h0b[r2, b]
                q4 = 0.0
                for j in range(4):
                    for l in range(4):
                        for a in range(m):
                            for b in range(m):
                                q4 += M4[j, l, a, b] * M4[l, j, a, b]

                s_q2 += wn * q2
                s_q3 += wn * q3
                s_q4 += wn * q4

        return s_area, s_conf, s_q1, s_q2, s_q3, s_q4, min_det

    @njit(fastmath=_FM, error_model="numpy")
    def gradient_table(Db, wb, PTb, steps):
        # lane-blocked layout: Db (nblk, 34, m, VL), wb (nblk, VL),
        # PTb (nblk, nmodes, 34, VL); trailing lanes are nodes, so the
        # innermost loops run over a long contiguous axis and vectorize
        nblk = Db.shape[0]
        vl = Db.shape[3]
        nmodes = PTb.shape[1]

        B = np.empty((34, m, vl))
        g = np.empty((4, 4, vl))
        gi = np.empty((4, 4, vl))
        s6 = np.empty((6, vl))
        c6 = np.empty((6, vl))
        det = np.empty(vl)
        sq = np.empty(vl)
        t2f = np.empty((40, vl))
        gam = np.empty((4, 10, vl))
        qw = np.empty((10, vl))
        hb = np.empty((10, m, vl))
        hmx = np.empty((4, 4, m, vl))
        hup = np.empty((10, m, vl))
        H = np.empty((m, vl))
        H2 = np.empty(vl)
        Hh = np.empty((10, vl))
        hh = np.empty(vl)
        q1v = np.empty(vl)
        hh2 = np.empty(vl)
        vv = np.empty((4, m, vl))
        tw = np.empty((4, 4, vl))
        uu = np.empty((4, 4, vl))
        ct4 = np.empty((4, vl))
        pd2 = np.empty(vl)
        acc = np.empty(vl)

        s_conf = np.zeros((nmodes, m, 2))
        s_q1 = np.zeros((nmodes, m, 2))
        min_det = np.full((nmodes, m, 2), np.inf)

        for blk in range(nblk):
            for d in range(34):
                for a in range(m):
                    for q in range(vl):
                        B[d, a, q] = Db[blk, d, a, q]
            for mu in range(nmodes):
                for comp in range(m):
                    hstep = steps[mu, comp]
                    for sgn in range(2):
                        sc = hstep if sgn == 0 else -hstep
                        for d in range(34):
                            for q in range(vl):
                                B[d, comp, q] = (Db[blk, d, comp, q]
                                                 + sc * PTb[blk, mu, d, q])

                        # metric and cofactor inverse
                        for i in range(4):
                            for j in range(i, 4):
                                for q in range(vl):
                                    acc[q] = B[i, 0, q] * B[j, 0, q]
                                for a in range(1, m):
                                    for q in range(vl):
                                        acc[q] += B[i, a, q] * B[j, a, q]
                                for q in range(vl):
                                    g[i, j, q] = acc[q]
                                    g[j, i, q] = acc[q]
                        for q in range(vl):
                            s6[0, q] = (g[0, 0, q] * g[1, 1, q]
                                        - g[0, 1, q] * g[1, 0, q])
                            s6[1, q] = (g[0, 0, q] * g[1, 2, q]
                                        - g[0, 2, q] * g[1, 0, q])
                            s6[2, q] = (g[0, 0, q] * g[1, 3, q]
                                        - g[0, 3, q] * g[1, 0, q])
                            s6[3, q] = (g[0, 1, q] * g[1, 2, q]
                                        - g[0, 2, q] * g[1, 1, q])
                            s6[4, q] = (g[0, 1, q] * g[1, 3, q]
                                        - g[0, 3, q] * g[1, 1, q])
                            s6[5, q] = (g[0, 2, q] * g[1, 3, q]
                                        - g[0, 3, q] * g[1, 2, q])
                            c6[5, q] = (g[2, 2, q] * g[3, 3, q]
                                        - g[2, 3, q] * g[3, 2, q])
                            c6[4, q] = (g[2, 1, q] * g[3, 3, q]
                                        - g[2, 3, q] * g[3, 1, q])
                            c6[3, q] = (g[2, 1, q] * g[3, 2, q]
                                        - g[2, 2, q] * g[3, 1, q])
                            c6[2, q] = (g[2, 0, q] * g[3, 3, q]
                                        - g[2, 3, q] * g[3, 0, q])
                            c6[1, q] = (g[2, 0, q] * g[3, 2, q]
                                        - g[2, 2, q] * g[3, 0, q])
                            c6[0, q] = (g[2, 0, q] * g[3, 1, q]
                                        - g[2, 1, q] * g[3, 0, q])
                        for q in range(vl):
                            det[q] = (s6[0, q] * c6[5, q]
                                      - s6[1, q] * c6[4, q]
                                      + s6[2, q] * c6[3, q]
                                      + s6[3, q] * c6[2, q]
                                      - s6[4, q] * c6[1, q]
                                      + s6[5, q] * c6[0, q])
                            sq[q] = np.sqrt(det[q])
                        for q in range(vl):
                            rd = 1.0 / det[q]
                            gi[0, 0, q] = (g[1, 1, q] * c6[5, q]
                                           - g[1, 2, q] * c6[4, q]
                                           + g[1, 3, q] * c6[3, q]) * rd
                            gi[0, 1, q] = (-g[0, 1, q] * c6[5, q]
                                           + g[0, 2, q] * c6[4, q]
                                           - g[0, 3, q] * c6[3, q]) * rd
                            gi[0, 2, q] = (g[3, 1, q] * s6[5, q]
                                           - g[3, 2, q] * s6[4, q]
                                           + g[3, 3, q] * s6[3, q]) * rd
                            gi[0, 3, q] = (-g[2, 1, q] * s6[5, q]
                                           + g[2, 2, q] * s6[4, q]
                                           - g[2, 3, q] * s6[3, q]) * rd
                            gi[1, 0, q] = (-g[1, 0, q] * c6[5, q]
                                           + g[1, 2, q] * c6[2, q]
                                           - g[1, 3, q] * c6[1, q]) * rd
                            gi[1, 1, q] = (g[0, 0, q] * c6[5, q]
                                           - g[0, 2, q] * c6[2, q]
                                           + g[0, 3, q] * c6[1, q]) * rd
                            gi[1, 2, q] = (-g[3, 0, q] * s6[5, q]
                                           + g[3, 2, q] * s6[2, q]
                                           - g[3, 3, q] * s6[1, q]) * rd
                            gi[1, 3, q] = (g[2, 0, q] * s6[5, q]
                                           - g[2, 2, q] * s6[2, q]
                                           + g[2, 3, q] * s6[1, q]) * rd
                            gi[2, 0, q] = (g[1, 0, q] * c6[4, q]
                                           - g[1, 1, q] * c6[2, q]
                                           + g[1, 3, q] * c6[0, q]) * rd
                            gi[2, 1, q] = (-g[0, 0, q] * c6[4, q]
                                           + g[0, 1, q] * c6[2, q]
                                           - g[0, 3, q] * c6[0, q]) * rd
                            gi[2, 2, q] = (g[3, 0, q] * s6[4, q]
                                           - g[3, 1, q] * s6[2, q]
                                           + g[3, 3, q] * s6[0, q]) * rd
                            gi[2, 3, q] = (-g[2, 0, q] * s6[4, q]
                                           + g[2, 1, q] * s6[2, q]
                                           - g[2, 3, q] * s6[0, q]) * rd
                            gi[3, 0, q] = (-g[1, 0, q] * c6[3, q]
                                           + g[1, 1, q] * c6[1, q]
                                           - g[1, 2, q] * c6[0, q]) * rd
                            gi[3, 1, q] = (g[0, 0, q] * c6[3, q]
                                           - g[0, 1, q] * c6[1, q]
                                           + g[0, 2, q] * c6[0, q]) * rd
                            gi[3, 2, q] = (-g[3, 0, q] * s6[3, q]
                                           + g[3, 1, q] * s6[1, q]
                                           - g[3, 2, q] * s6[0, q]) * rd
                            gi[3, 3, q] = (g[2, 0, q] * s6[3, q]
                                           - g[2, 1, q] * s6[1, q]
                                           + g[2, 2, q] * s6[0, q]) * rd

                        # Christoffel contractions, h, mean curvature
                        for p in range(10):
                            for k in range(4):
                                for q in range(vl):
                                    acc[q] = B[4 + p, 0, q] * B[k, 0, q]
                                for a in range(1, m):
                                    for q in range(vl):
                                        acc[q] += B[4 + p, a, q] * B[k, a, q]
                                for q in range(vl):
                                    t2f[4 * p + k, q] = acc[q]
                        for l in range(4):
                            for p in range(10):
                                for q in range(vl):
                                    gam[l, p, q] = (
                                        gi[l, 0, q] * t2f[4 * p, q]
                                        + gi[l, 1, q] * t2f[4 * p + 1, q]
                                        + gi[l, 2, q] * t2f[4 * p + 2, q]
                                        + gi[l, 3, q] * t2f[4 * p + 3, q])
                        for p in range(10):
                            pm = 0.25 * pair_mult[p]
                            pi = pair_i[p]
                            pj = pair_j[p]
                            for q in range(vl):
                                qw[p, q] = pm * gi[pi, pj, q]
                        for a in range(m):
                            for q in range(vl):
                                H[a, q] = 0.0
                        for p in range(10):
                            for a in range(m):
                                for q in range(vl):
                                    hv = (B[4 + p, a, q]
                                          - gam[0, p, q] * B[0, a, q]
                                          - gam[1, p, q] * B[1, a, q]
                                          - gam[2, p, q] * B[2, a, q]
                                          - gam[3, p, q] * B[3, a, q])
                                    hb[p, a, q] = hv
                                    H[a, q] += qw[p, q] * hv
                        for q in range(vl):
                            H2[q] = H[0, q] * H[0, q]
                        for a in range(1, m):
                            for q in range(vl):
                                H2[q] += H[a, q] * H[a, q]

                        # mixed and raised h
                        for i in range(4):
                            for l in range(4):
                                r0 = pair_idx[0, l]
                                r1 = pair_idx[1, l]
                                r2 = pair_idx[2, l]
                                r3 = pair_idx[3, l]
                                for a in range(m):
                                    for q in range(vl):
                                        hmx[i, l, a, q] = (
                                            gi[i, 0, q] * hb[r0, a, q]
                                            + gi[i, 1, q] * hb[r1, a, q]
                                            + gi[i, 2, q] * hb[r2, a, q]
                                            + gi[i, 3, q] * hb[r3, a, q])
                        for p in range(10):
                            i = pair_i[p]
                            j = pair_j[p]
                            for a in range(m):
                                for q in range(vl):
                                    hup[p, a, q] = (
                                        gi[j, 0, q] * hmx[i, 0, a, q]
                                        + gi[j, 1, q] * hmx[i, 1, a, q]
                                        + gi[j, 2, q] * hmx[i, 2, a, q]
                                        + gi[j, 3, q] * hmx[i, 3, a, q])

                        for q in range(vl):
                            hh[q] = 0.0
                        for p in range(10):
                            pm = pair_mult[p]
                            for q in range(vl):
                                acc[q] = hup[p, 0, q] * hb[p, 0, q]
                            for a in range(1, m):
                                for q in range(vl):
                                    acc[q] += hup[p, a, q] * hb[p, a, q]
                            for q in range(vl):
                                hh[q] += pm * acc[q]
                            for q in range(vl):
                                acc[q] = H[0, q] * hb[p, 0, q]
                            for a in range(1, m):
                                for q in range(vl):
                                    acc[q] += H[a, q] * hb[p, a, q]
                            for q in range(vl):
                                Hh[p, q] = acc[q]
                        for q in range(vl):
                            hv = hh[q] - 4.0 * H2[q]
                            q1v[q] = hv * hv

                        # |H.h|^2 via the mixed matrix trace
                        for i in range(4):
                            for j in range(4):
                                r0 = pair_idx[0, j]
                                r1 = pair_idx[1, j]
                                r2 = pair_idx[2, j]
                                r3 = pair_idx[3, j]
                                for q in range(vl):
                                    uu[i, j, q] = (gi[i, 0, q] * Hh[r0, q]
                                                   + gi[i, 1, q] * Hh[r1, q]
                                                   + gi[i, 2, q] * Hh[r2, q]
                                                   + gi[i, 3, q] * Hh[r3, q])
                        for q in range(vl):
                            hh2[q] = 0.0
                        for i in range(4):
                            for j in range(4):
                                for q in range(vl):
                                    hh2[q] += uu[i, j, q] * uu[j, i, q]

                        # normal derivative of the mean curvature
                        for l in range(4):
                            for q in range(vl):
                                acc[q] = qw[0, q] * gam[l, 0, q]
                            for p in range(1, 10):
                                for q in range(vl):
                                    acc[q] += qw[p, q] * gam[l, p, q]
                            for q in range(vl):
                                ct4[l, q] = acc[q]
                        for i in range(4):
                            for a in range(m):
                                for q in range(vl):
                                    vv[i, a, q] = 0.0
                            for p in range(10):
                                r = trow[i, p]
                                i1 = dg_i1[i, p]
                                i2 = dg_i2[i, p]
                                dc = dg_c[p]
                                for a in range(m):
                                    for q in range(vl):
                                        cp = dc * (t2f[i1, q] + t2f[i2, q])
                                        vv[i, a, q] += (qw[p, q] * B[r, a, q]
                                                        - cp * hup[p, a, q])
                            for l in range(4):
                                r = pair_idx[i, l]
                                for a in range(m):
                                    for q in range(vl):
                                        vv[i, a, q] -= (ct4[l, q]
                                                        * hb[r, a, q])

                        # Gram-form squared norm of the normal projection
                        for i in range(4):
                            for k in range(4):
                                for q in range(vl):
                                    acc[q] = B[k, 0, q] * vv[i, 0, q]
                                for a in range(1, m):
                                    for q in range(vl):
                                        acc[q] += B[k, a, q] * vv[i, a, q]
                                for q in range(vl):
                                    tw[i, k, q] = acc[q]
                        for i in range(4):
                            for l in range(4):
                                for q in range(vl):
                                    uu[i, l, q] = (tw[i, 0, q] * gi[0, l, q]
                                                   + tw[i, 1, q] * gi[1, l, q]
                                                   + tw[i, 2, q] * gi[2, l, q]
                                                   + tw[i, 3, q] * gi[3, l, q])
                        for q in range(vl):
                            pd2[q] = 0.0
                        for i in range(4):
                            for j in range(i, 4):
                                for q in range(vl):
                                    acc[q] = vv[i, 0, q] * vv[j, 0, q]
                                for a in range(1, m):
                                    for q in range(vl):
                                        acc[q] += vv[i, a, q] * vv[j, a, q]
                                fac = 1.0 if i == j else 2.0
                                for q in range(vl):
                                    tm = (uu[i, 0, q] * tw[j, 0, q]
                                          + uu[i, 1, q] * tw[j, 1, q]
                                          + uu[i, 2, q] * tw[j, 2, q]
                                          + uu[i, 3, q] * tw[j, 3, q])
                                    pd2[q] += (fac * gi[i, j, q]
                                               * (acc[q] - tm))

                        cacc = 0.0
                        qacc = 0.0
                        mind = np.inf
                        for q in range(vl):
                            wn = wb[blk, q] * sq[q]
                            conf = (pd2[q] - hh2[q]
                                    + 7.0 * H2[q] * H2[q])
                            cacc += wn * conf
                            qacc += wn * q1v[q]
                            if det[q] < mind:
                                mind = det[q]
                        s_conf[mu, comp, sgn] += cacc
                        s_q1[mu, comp, sgn] += qacc
                        if mind < min_det[mu, comp, sgn]:
                            min_det[mu, comp, sgn] = mind

                    for d in range(34):
                        for q in range(vl):
                            B[d, comp, q] = Db[blk, d, comp, q]

        return s_conf, s_q1, min_det

    return density_sums, gradient_table


_KERNELS = {}


def kernels_for(m):
    """(density_sums, gradient_table) pair specialized to dimension m."""
    m = int(m)
    if m not in _KERNELS:
        _KERNELS[m] = _make_kernels(m)
    return _KERNELS[m]


def density_sums(D, wts, probe, comp, scale, full):
    """Weighted density totals over all nodes; see _make_kernels.

    Returns (area, conformal, quartic_norm, quartic_gram,
    quartic_square, quartic_trace, min_det).
    """
    return kernels_for(D.shape[2])[0](D, wts, probe, comp, scale, full)


def lane_blocks(n, vl):
    """Number of lane blocks covering n nodes at block width vl."""
    return (n + vl - 1) // vl


def _pad_nodes(arr, vl):
    """Pad the leading node axis up to a multiple of vl by replicating
    the last node, so padded lanes stay geometrically valid."""
    n = arr.shape[0]
    pad = lane_blocks(n, vl) * vl - n
    if pad == 0:
        return arr
    tail = np.repeat(arr[-1:], pad, axis=0)
    return np.concatenate([arr, tail], axis=0)


def pack_lanes(D, vl=64):
    """Re-block a node-major (n, 34, m) stack to lanes (nblk, 34, m, vl)."""
    Dp = _pad_nodes(D, vl)
    nblk = Dp.shape[0] // vl
    return np.ascontiguousarray(
        Dp.reshape(nblk, vl, 34, D.shape[2]).transpose(0, 2, 3, 1))


def pack_probe_lanes(PT, vl=64):
    """Re-block mode derivative columns (n, nmodes, 34) to lanes
    (nblk, nmodes, 34, vl)."""
    Pp = _pad_nodes(PT, vl)
    nblk = Pp.shape[0] // vl
    return np.ascontiguousarray(
        Pp.reshape(nblk, vl, PT.shape[1], 34).transpose(0, 2, 3, 1))


def pack_weight_lanes(wts, vl=64):
    """Re-block quadrature weights (n,) to lanes (nblk, vl); padded
    lanes get weight zero so they never contribute."""
    n = wts.shape[0]
    pad = lane_blocks(n, vl) * vl - n
    wp = np.concatenate([wts, np.zeros(pad)]) if pad else wts
    return np.ascontiguousarray(wp.reshape(-1, vl))


def gradient_table(Db, wb, PTb, steps):
    """Central-difference probe totals for a whole coefficient table.

    Takes the lane-blocked arrays from pack_lanes, pack_weight_lanes
    and pack_probe_lanes, plus the positive half-step per
    (mode, component).  Returns (conf, quartic_norm, min_det), each of
    shape (nmodes, m, 2) with the plus sign in slot 0 and the minus
    sign in slot 1.
    """
    return kernels_for(Db.shape[2])[1](Db, wb, PTb, steps)
