"""Band-limited gradient descent for the weighted curvature energy.

The configuration space is the table of real Fourier coefficients of a
trigonometric immersion of the 4-torus with a bounded frequency band.
The descent is plain steepest descent on that table with central
finite-difference gradients and Armijo backtracking.  Everything is
kept deliberately deterministic: fixed loop orders, no randomness
inside the driver, and a trace format precise enough that a repeated
run replays bit for bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernel as kernel
from . import jets
from .energies import PAIRS, TRIPLES, derivative_arrays
from .geometry import ImmersionPoint
from .jets import Jet

AMBIENT = 8


# ---------------------------------------------------------------------------
# frequency band and basis bookkeeping
# ---------------------------------------------------------------------------

def frequency_band(band):
    """Lexicographically ordered frequency representatives.

    All integer vectors k with |k|_1 <= band whose first nonzero entry
    is positive, one per antipodal pair {k, -k}, plus the zero vector.
    Each representative carries the full two-dimensional real span of
    e^{i k.x} through its cos and sin rows.
    """
    band = int(band)
    if band < 0:
        raise ValueError("band must be nonnegative")
    out = []
    for k in itertools.product(range(-band, band + 1), repeat=4):
        if sum(abs(v) for v in k) > band:
            continue
        lead = next((v for v in k if v != 0), 0)
        if lead < 0:
            continue
        out.append(k)
    out.sort()
    return out


def mode_rows(band):
    """Ordered list of (frequency, kind) basis rows, kind 0=cos 1=sin.

    Frequencies appear in lexicographic order with the cos row before
    the sin row; the zero frequency contributes its constant cos row
    only.  band=2 gives 41 rows.
    """
    rows = []
    for k in frequency_band(band):
        rows.append((k, 0))
        if any(k):
            rows.append((k, 1))
    return rows


def mode_tables(band, x):
    """Packed derivative rows of every basis function at the nodes.

    Returns an (n, nrows, 34) array whose last axis matches the packed
    layout of kernel.pack_derivatives: rows 0..3 first derivatives,
    4..13 second derivatives on increasing index pairs, 14..33 third
    derivatives on increasing triples.
    """
    x = np.asarray(x, dtype=np.float64)
    rows = mode_rows(band)
    n = x.shape[1]
    table = np.empty((n, len(rows), 34))
    for r, (k, kind) in enumerate(rows):
        kv = np.asarray(k, dtype=np.float64)
        ph = kv @ x
        cs = np.cos(ph)
        sn = np.sin(ph)
        if kind == 0:
            d1, d2, d3 = -sn, -cs, sn
        else:
            d1, d2, d3 = cs, -sn, -cs
        for i in range(4):
            table[:, r, i] = kv[i] * d1
        for p, (i, j) in enumerate(PAIRS):
            table[:, r, 4 + p] = (kv[i] * kv[j]) * d2
        for t, (i, j, l) in enumerate(TRIPLES):
            table[:, r, 14 + t] = (kv[i] * kv[j] * kv[l]) * d3
    return table


def torus_grid(resolution):
    """Uniform periodic nodes (4, res^4) and trapezoid weights (res^4,)."""
    resolution = int(resolution)
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    t = np.arange(resolution) * (2.0 * np.pi / resolution)
    grid = np.stack(np.meshgrid(t, t, t, t, indexing="ij")).reshape(4, -1)
    w = np.full(grid.shape[1], (2.0 * np.pi / resolution) ** 4)
    return np.ascontiguousarray(grid), w


class FourierImmersion:
    """Trigonometric immersion of the 4-torus from a coefficient table.

    coeffs has one row per mode_rows entry and one column per ambient
    component, so the component functions are

        Phi_c(x) = sum_rows coeffs[r, c] * trig_r(k_r . x).

    The jet-valued point() method exists so the banded representation
    can be cross-checked against the generic immersion pipeline.
    """

    chart = "torus"

    def __init__(self, coeffs, band=2):
        rows = mode_rows(band)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.ndim != 2 or coeffs.shape[0] != len(rows):
            raise ValueError(
                "coefficient table must have %d rows for band %d"
                % (len(rows), band))
        self.coeffs = coeffs
        self.band = int(band)
        self.rows = rows
        self.m = coeffs.shape[1]

    def point(self, x, order):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[0] != 4:
            raise ValueError("chart points must have shape (4, n)")
        coords = [Jet.coordinate(v, x[v], order) for v in range(4)]
        n = x.shape[1]
        comps = [Jet.constant(np.zeros(n), order) for _ in range(self.m)]
        for r, (k, kind) in enumerate(self.rows):
            if any(k):
                ph = None
                for i in range(4):
                    if k[i] == 0:
                        continue
                    term = coords[i] * float(k[i])
                    ph = term if ph is None else ph + term
                trig = jets.cos(ph) if kind == 0 else jets.sin(ph)
            else:
                trig = Jet.constant(np.ones(n), order)
            for c in range(self.m):
                w = self.coeffs[r, c]
                if w != 0.0:
                    comps[c] = comps[c] + trig * w
        return ImmersionPoint(comps, x)


def clifford_coefficients(band=2, m=AMBIENT):
    """Coefficient table of the unit product torus in R^8.

    Component pairs (cos x_a, sin x_a) occupy the four unit frequency
    vectors, so the table is exact inside any band >= 1.
    """
    if band < 1:
        raise ValueError("the product torus needs band >= 1")
    if m < 8:
        raise ValueError("the product torus needs at least 8 components")
    rows = mode_rows(band)
    pos = {row: idx for idx, row in enumerate(rows)}
    c = np.zeros((len(rows), m))
    for a in range(4):
        k = tuple(1 if i == a else 0 for i in range(4))
        c[pos[(k, 0)], 2 * a] = 1.0
        c[pos[(k, 1)], 2 * a + 1] = 1.0
    return c


def perturbed_clifford(seed, magnitude=0.05, band=2, m=AMBIENT):
    """Product torus coefficients plus a seeded banded perturbation.

    The perturbation is drawn once from the seeded generator over the
    whole table and rescaled so its sup norm is exactly `magnitude`.
    """
    c = clifford_coefficients(band, m)
    rng = np.random.default_rng(seed)
    delta = rng.standard_normal(c.shape)
    delta *= magnitude / np.max(np.abs(delta))
    peak = np.unravel_index(np.argmax(np.abs(delta)), delta.shape)
    delta[peak] = np.copysign(magnitude, delta[peak])
    np.clip(delta, -magnitude, magnitude, out=delta)
    return c + delta


# ---------------------------------------------------------------------------
# energy and gradient on the coefficient table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowConfig:
    """Descent parameters.

    beta weights the first quartic invariant on top of the conformal
    density; the default sits above the 1/12 coercivity threshold.
    fd_scale and fd_floor set the central-difference half step per
    coefficient as fd_scale * max(|c|, fd_floor).
    """

    resolution: int = 12
    band: int = 2
    ambient: int = AMBIENT
    beta: float = 0.1
    max_steps: int = 50
    armijo: float = 1e-4
    step0: float = 1.0
    shrink: float = 0.5
    max_backtracks: int = 60
    fd_scale: float = 1e-5
    fd_floor: float = 0.1
    grad_tol: float = 1e-8
    det_floor: float = 1e-9
    vl: int = 64

    def __post_init__(self):
        if self.resolution < 4:
            raise ValueError("resolution must be at least 4")
        if self.band < 1:
            raise ValueError("band must be at least 1")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.armijo < 1.0:
            raise ValueError("armijo must lie in (0, 1)")
        if self.beta < 0.0:
            raise ValueError("beta must be nonnegative")


class DegenerateProbe(RuntimeError):
    """A finite-difference probe left the immersed regime."""


class BandEnergy:
    """Weighted energy and gradient as functions of the coefficient table.

    value() integrates the conformal density plus beta times the first
    quartic invariant over the periodic grid; a Gram determinant at or
    below det_floor anywhere makes the value +inf (barrier), so the
    line search backs away from degenerate immersions on its own.
    """

    def __init__(self, config):
        self.config = config
        nodes, weights = torus_grid(config.resolution)
        self.nodes = nodes
        self.weights = weights
        self.rows = mode_rows(config.band)
        self.table = mode_tables(config.band, nodes)
        n = nodes.shape[1]
        self._flat = np.ascontiguousarray(
            self.table.transpose(0, 2, 1).reshape(n * 34, len(self.rows)))
        self._blocked_table = kernel.pack_probe_lanes(self.table, config.vl)
        self._blocked_weights = kernel.pack_weight_lanes(weights, config.vl)
        self._zero_probe = np.zeros((n, 34))
        self.evaluations = 0
        self.gradients = 0

    @property
    def size(self):
        return (len(self.rows), self.config.ambient)

    def check_coeffs(self, coeffs):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        if coeffs.shape != self.size:
            raise ValueError("coefficient table must have shape %r"
                             % (self.size,))
        return coeffs

    def assemble(self, coeffs):
        """Packed derivative stack (n, 34, m) of the banded immersion."""
        coeffs = self.check_coeffs(coeffs)
        n = self.nodes.shape[1]
        return (self._flat @ coeffs).reshape(n, 34, self.config.ambient)

    def value(self, coeffs):
        """Weighted energy, or +inf on a degenerate immersion."""
        D = self.assemble(coeffs)
        out = kernel.density_sums(D, self.weights, self._zero_probe,
                                  0, 0.0, False)
        self.evaluations += 1
        area, conf, q1 = out[0], out[1], out[2]
        min_det = out[6]
        if not min_det > self.config.det_floor:
            return np.inf
        return conf + self.config.beta * q1

    def gradient(self, coeffs):
        """Central-difference gradient over the whole table at once."""
        coeffs = self.check_coeffs(coeffs)
        steps = self.config.fd_scale * np.maximum(
            np.abs(coeffs), self.config.fd_floor)
        blocked = kernel.pack_lanes(self.assemble(coeffs), self.config.vl)
        conf2, q12, det2 = kernel.gradient_table(
            blocked, self._blocked_weights, self._blocked_table, steps)
        self.gradients += 1
        if not det2.min() > self.config.det_floor:
            raise DegenerateProbe(
                "a finite-difference probe hit Gram determinant <= %g"
                % self.config.det_floor)
        beta = self.config.beta
        plus = conf2[:, :, 0] + beta * q12[:, :, 0]
        minus = conf2[:, :, 1] + beta * q12[:, :, 1]
        return (plus - minus) / (2.0 * steps)


# ---------------------------------------------------------------------------
# descent driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceLine:
    """One accepted state of the descent."""

    step: int
    energy: float
    grad_norm: float
    step_size: float

    def text(self):
        return ("step=%d energy=%.17e grad_norm=%.17e step_size=%.17e"
                % (self.step, self.energy, self.grad_norm, self.step_size))


@dataclass
class FlowResult:
    """Final coefficients plus the full per-step trace."""

    coeffs: np.ndarray
    trace: list
    status: str
    evaluations: int
    gradients: int

    def trace_text(self):
        return "\n".join(line.text() for line in self.trace)

    @property
    def energies(self):
        return np.array([line.energy for line in self.trace])


def run_flow(coeffs, config=None):
    """Armijo-backtracking steepest descent on the coefficient table.

    Produces a trace whose line 0 records the starting state (step size
    0); every further line is one accepted strictly decreasing step.
    If the starting gradient is already below grad_tol the trace has
    that single line ("zero-step" run).  The driver raises ValueError
    when the starting immersion itself is degenerate.
    """
    if config is None:
        config = FlowConfig()
    energy = BandEnergy(config)
    c = energy.check_coeffs(coeffs).copy()
    value = energy.value(c)
    if not np.isfinite(value):
        raise ValueError("starting immersion is degenerate "
                         "(Gram determinant at or below det_floor)")
    grad = energy.gradient(c)
    gnorm = float(np.sqrt(np.sum(grad * grad)))
    trace = [TraceLine(0, float(value), gnorm, 0.0)]
    status = "max_steps"
    if gnorm < config.grad_tol:
        status = "converged"
        return FlowResult(c, trace, status, energy.evaluations,
                          energy.gradients)
    t = config.step0
    for step in range(1, config.max_steps + 1):
        gg = gnorm * gnorm
        accepted = False
        for _ in range(config.max_backtracks):
            trial = c - t * grad
            trial_value = energy.value(trial)
            if trial_value <= value - config.armijo * t * gg:
                accepted = True
                break
            t *= config.shrink
        if not accepted:
            status = "stalled"
            break
        c = trial
        value = trial_value
        grad = energy.gradient(c)
        gnorm = float(np.sqrt(np.sum(grad * grad)))
        trace.append(TraceLine(step, float(value), gnorm, t))
        t = t / config.shrink
        if gnorm < config.grad_tol:
            status = "converged"
            break
    return FlowResult(c, trace, status, energy.evaluations,
                      energy.gradients)


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

_KIND_NAMES = ("cos", "sin")


def save_snapshot(path, coeffs, band=2):
    """Write a coefficient table as plain text.

    First line: ambient dimension and band.  Then one line per mode
    row, frequencies in lexicographic order with cos before sin:
    k1 k2 k3 k4 kind c_1 ... c_m, full double precision.
    """
    rows = mode_rows(band)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != len(rows):
        raise ValueError("coefficient table does not match the band")
    lines = ["%d %d" % (coeffs.shape[1], band)]
    for r, (k, kind) in enumerate(rows):
        vals = " ".join("%.17g" % v for v in coeffs[r])
        lines.append("%d %d %d %d %s %s"
                     % (k[0], k[1], k[2], k[3], _KIND_NAMES[kind], vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path):
    """Read a save_snapshot file back into (coeffs, band)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValueError("empty snapshot file")
    head = raw[0].split()
    if len(head) != 2:
        raise ValueError("snapshot header must be 'm band'")
    m, band = int(head[0]), int(head[1])
    rows = mode_rows(band)
    if len(raw) - 1 != len(rows):
        raise ValueError("snapshot has %d mode lines, band %d needs %d"
                         % (len(raw) - 1, band, len(rows)))
    coeffs = np.empty((len(rows), m))
    for r, line in enumerate(raw[1:]):
        parts = line.split()
        if len(parts) != 5 + m:
            raise ValueError("bad snapshot line %d" % (r + 2))
        k = tuple(int(v) for v in parts[:4])
        kind = _KIND_NAMES.index(parts[4])
        if (k, kind) != rows[r]:
            raise ValueError("snapshot line %d is out of order" % (r + 2))
        coeffs[r] = [float(v) for v in parts[5:]]
    return coeffs, band
