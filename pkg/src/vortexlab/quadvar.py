"""Two-scale partitions, quadratic-variation estimators and tail bounds.

The estimator recovers sum_i int Y_i^2 ds from squared increments of
Z = X + sum_i Y_i W_i along refining partitions, without adaptedness of the
coefficient processes. The companion machinery (coarse blocks of width Delta
subdivided at delta = Delta^(5/3), the small-ball events on the subdivided
increments, chi-square tails, Hoelder transfer inequalities) quantifies when
the finite-sample estimate is trustworthy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRID_TOL = 1e-9


@dataclass
class SampledProcess:
    """A real process recorded on a uniform grid over [0, T]."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if len(self.times) < 2:
            raise ValueError("need at least two nodes")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=0.0, atol=GRID_TOL):
            raise ValueError("time grid must be uniform")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    def grid_index(self, t: float) -> int:
        dt = self.times[1] - self.times[0]
        i = int(round((t - self.times[0]) / dt))
        if i < 0 or i >= len(self.times) or abs(self.times[i] - t) > GRID_TOL:
            raise ValueError(f"time {t} is not on the sample grid")
        return i


def qv_estimate(z: SampledProcess, partition) -> float:
    """Sum of squared increments of z over the given partition times."""
    idx = [z.grid_index(t) for t in partition]
    if sorted(idx) != idx:
        raise ValueError("partition times must be nondecreasing")
    vals = z.values[idx]
    return float(np.sum(np.diff(vals) ** 2))


def cross_qv(z1: SampledProcess, z2: SampledProcess, partition) -> float:
    """Sum of increment products of two processes over a shared partition."""
    i1 = [z1.grid_index(t) for t in partition]
    i2 = [z2.grid_index(t) for t in partition]
    return float(np.sum(np.diff(z1.values[i1]) * np.diff(z2.values[i2])))


@dataclass
class PartitionScheme:
    """Blocks of width delta_cap subdivided at delta = delta_cap^(5/3)."""

    delta_cap: float                # coarse block width
    delta: float                    # fine subdivision width
    horizon: float
    block_times: np.ndarray         # t_0 .. t_m, t_m = horizon
    m: int                          # number of blocks
    block_nodes: list               # per block k: array s_0(k) .. s_M(k)

    def counts(self) -> np.ndarray:
        """M(k) per block: number of fine increments inside block k."""
        return np.array([len(nodes) - 1 for nodes in self.block_nodes])

    def all_nodes(self) -> np.ndarray:
        """Sorted union of every within-block node."""
        return np.unique(np.concatenate(self.block_nodes))


def partition_scheme(delta_cap: float, horizon: float) -> PartitionScheme:
    if not 0 < delta_cap <= horizon:
        raise ValueError("need 0 < delta_cap <= horizon")
    delta = delta_cap ** (5.0 / 3.0)
    block_times = [0.0]
    while block_times[-1] < horizon - GRID_TOL:
        block_times.append(min(len(block_times) * delta_cap, horizon))
    block_times = np.asarray(block_times)
    m = len(block_times) - 1
    block_nodes = []
    for k in range(m):
        t0, t1 = block_times[k], block_times[k + 1]
        nodes = [t0]
        ell = 1
        while nodes[-1] < t1 - GRID_TOL:
            nodes.append(min(t0 + ell * delta, t1))
            ell += 1
        block_nodes.append(np.asarray(nodes))
    return PartitionScheme(delta_cap, delta, horizon, block_times, m,
                           block_nodes)


def sample_wiener_ensemble(times, n_processes: int, n_paths: int,
                           seed: int = 0) -> np.ndarray:
    """Exact Wiener samples at the given times, shape (n_paths, N, n_times).

    Increments are drawn per (seed, path) stream, so any path can be
    regenerated in isolation.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase")
    sd = np.sqrt(np.diff(times))
    out = np.zeros((n_paths, n_processes, len(times)))
    for p in range(n_paths):
        gen = np.random.Generator(
            np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, p]))
        xi = gen.standard_normal((len(sd), n_processes))
        out[p, :, 1:] = np.cumsum(sd[:, None] * xi, axis=0).T
    return out


def holder_constant(times, values, alpha: float) -> float:
    """Grid-level alpha-Hoelder constant over pairs with 0 < |s-r| <= 1."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dtmat = np.abs(times[:, None] - times[None, :])
    mask = (dtmat > 0.0) & (dtmat <= 1.0 + GRID_TOL)
    dv = np.abs(values[:, None] - values[None, :])
    ratios = np.where(mask, dv / np.where(mask, dtmat, 1.0) ** alpha, 0.0)
    return float(np.max(ratios))


@dataclass
class EventFrequencies:
    n_paths: int
    freq_a: float
    freq_b: float
    freq_c: float
    ci_a: tuple
    ci_b: tuple
    ci_c: tuple
    bound_a: float
    bound_b: float


def omega_a_bound(delta_cap: float, horizon: float, n_processes: int) -> float:
    """Analytic tail bound for the small-squared-increment event."""
    x = delta_cap ** (-2.0 / 3.0)
    return 2.0 * horizon * n_processes / math.sqrt(math.pi) * x * math.exp(-x / 20.0)


def omega_b_bound(delta_cap: float, horizon: float, n_processes: int) -> float:
    """Analytic tail bound for the large-cross-increment event."""
    return (6.0 * n_processes ** 2 * horizon / delta_cap
            * math.exp(-delta_cap ** (-19.0 / 42.0) / (3.0 * n_processes ** 2)))


def event_frequencies(wiener_paths: np.ndarray, scheme: PartitionScheme,
                      times=None, events: str = "abc") -> EventFrequencies:
    """Empirical frequencies of the three bad events over an ensemble.

    wiener_paths has shape (n_paths, N, n_times) sampled on `times` (the
    scheme's node union by default). Event a: some block/process has mean
    normalized squared increment <= 1/2. Event b: some block and process
    pair has mean normalized cross product >= delta_cap^(3/14) / (3 N^2).
    Event c: some process exceeds delta_cap^(-1/28) in the max of sup norm
    and 1/4-Hoelder constant. `events` selects which indicators to evaluate
    (the Hoelder scan is quadratic in the node count); skipped events report
    frequency 0 with the trivial [0, 1] interval.
    """
    paths = np.asarray(wiener_paths, dtype=float)
    if paths.ndim != 3:
        raise ValueError("expected (n_paths, N, n_times) ensemble")
    n_paths, n_proc, n_times = paths.shape
    if times is None:
        times = scheme.all_nodes()
    times = np.asarray(times, dtype=float)
    if len(times) != n_times:
        raise ValueError("ensemble does not match the node times")
    # locate each block's nodes inside the sample grid
    block_idx = []
    for nodes in scheme.block_nodes:
        pos = np.searchsorted(times, nodes - GRID_TOL)
        if np.any(np.abs(times[pos] - nodes) > GRID_TOL):
            raise ValueError("ensemble resolution does not cover the scheme")
        block_idx.append(pos)
    thresh_b = scheme.delta_cap ** (3.0 / 14.0) / (3.0 * n_proc ** 2)
    thresh_c = scheme.delta_cap ** (-1.0 / 28.0)
    hit_a = np.zeros(n_paths, dtype=bool)
    hit_b = np.zeros(n_paths, dtype=bool)
    if "a" in events or "b" in events:
        for pos in block_idx:
            dt = np.diff(times[pos])
            incr = np.diff(paths[:, :, pos], axis=2) / np.sqrt(dt)
            if "a" in events:
                qa = np.mean(incr ** 2, axis=2)       # (n_paths, N)
                hit_a |= np.any(qa <= 0.5, axis=1)
            if "b" in events and n_proc > 1:
                cross = np.abs(np.einsum("pit,pjt->pij", incr, incr)) / len(dt)
                iu = np.triu_indices(n_proc, k=1)
                hit_b |= np.any(cross[:, iu[0], iu[1]] >= thresh_b, axis=1)
    hit_c = np.zeros(n_paths, dtype=bool)
    if "c" in events:
        for p in range(n_paths):
            for i in range(n_proc):
                w = paths[p, i]
                norm = max(np.max(np.abs(w)), holder_constant(times, w, 0.25))
                if norm > thresh_c:
                    hit_c[p] = True
                    break
    from .malliavin import wilson_interval

    def interval(hits, wanted):
        if not wanted:
            return (0.0, 1.0)
        return wilson_interval(int(hits.sum()), n_paths)

    return EventFrequencies(
        n_paths,
        float(hit_a.mean()), float(hit_b.mean()), float(hit_c.mean()),
        interval(hit_a, "a" in events),
        interval(hit_b, "b" in events),
        interval(hit_c, "c" in events),
        omega_a_bound(scheme.delta_cap, scheme.horizon, n_proc),
        omega_b_bound(scheme.delta_cap, scheme.horizon, n_proc))


def _adaptive_simpson(f, a, b, rtol=1e-10):
    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, depth):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth > 60:
            return left + right
        if abs(left + right - whole) <= 15.0 * rtol * (abs(left + right) + 1e-300):
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, xm, f0, fl, f1, left, depth + 1)
                + recurse(xm, x2, f1, fr, f2, right, depth + 1))

    fa, fb = f(a), f(b)
    xm = 0.5 * (a + b)
    fm = f(xm)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 0)


def chi_square_cdf(x: float, dof: int) -> float:
    """P(chi^2_dof <= x) by adaptive Simpson integration of the density."""
    if x <= 0:
        return 0.0
    log_norm = -0.5 * dof * math.log(2.0) - math.lgamma(0.5 * dof)

    def density(t):
        if t <= 0.0:
            return 0.0
        return math.exp(log_norm + (0.5 * dof - 1.0) * math.log(t) - 0.5 * t)

    return float(_adaptive_simpson(density, 0.0, float(x)))


def chi_square_small_ball_bound(c: float, m_terms: int):
    """Analytic bounds for chi-square small balls and cross-term tails.

    Returns (small_ball, cross_tail): P(chi^2_M <= c M) <= small_ball and
    P(|sum eta_l eta'_l| >= c M) <= cross_tail.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if m_terms <= 2.0 / (1.0 - c):
        raise ValueError("need M > 2 / (1 - c)")
    gamma = c - 1.0 - math.log(c)
    small_ball = math.exp(-0.5 * gamma * m_terms) / math.sqrt(math.pi * m_terms)
    cross_tail = 2.0 * math.exp(-0.25 * c * c * m_terms)
    return small_ball, cross_tail


def chi_square_small_ball_bound_corrected(c: float, m_terms: int) -> float:
    """Provable variant of the small-ball bound.

    Bounding the incomplete-gamma integrand at its right endpoint and using
    Gamma(M/2) >= sqrt(4 pi / M) (M/2e)^(M/2) gives prefactor sqrt(M/(4 pi))
    instead of 1/sqrt(pi M); the exact CDF does sit below this one.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if m_terms <= 2.0 / (1.0 - c):
        raise ValueError("need M > 2 / (1 - c)")
    gamma = c - 1.0 - math.log(c)
    return math.sqrt(m_terms / (4.0 * math.pi)) * math.exp(-0.5 * gamma * m_terms)


@dataclass
class HolderTransferReport:
    alpha: float
    gamma: float
    eps: float
    ell: float
    sup_h: float                 # sup of the supplied series
    holder_h: float              # its Hoelder constant
    sup_g: float                 # sup of its running integral
    integral_power: float        # int |series|^ell
    c_fitted: float              # Hoelder constant in units of eps^-gamma
    premise_integral_ok: bool
    bound_integral: float
    conclusion_integral_ok: bool
    premise_sup_ok: bool
    bound_sup: float
    conclusion_sup_ok: bool


def holder_transfer(series: SampledProcess, alpha: float, gamma: float,
                    eps: float, ell: float = 1.0) -> HolderTransferReport:
    """Check the two Hoelder-interpolation implications on a sample series.

    Implication 1 treats the series as the derivative H of its running
    integral G: if sup|G| <= eps and H_alpha(H) <= c eps^-gamma then
    sup|H| <= (2+c) eps^((alpha-gamma)/(1+alpha)). Implication 2 treats the
    series as G itself: if int |G|^ell < eps and H_alpha(G) < c eps^-gamma
    then sup|G| < (1+c) eps^((alpha-gamma)/(1+ell*alpha)). The constant c
    is fitted from the measured Hoelder constant.
    """
    if not alpha > gamma > 0:
        raise ValueError("need alpha > gamma > 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = series.times
    h = series.values
    dt = t[1] - t[0]
    g = np.concatenate([[0.0], np.cumsum(0.5 * dt * (h[1:] + h[:-1]))])
    sup_h = float(np.max(np.abs(h)))
    sup_g = float(np.max(np.abs(g)))
    hold_h = holder_constant(t, h, alpha)
    integral_power = float(np.trapezoid(np.abs(h) ** ell, t))
    c_fit = hold_h * eps ** gamma
    premise_sup = sup_g <= eps
    bound_sup = (2.0 + c_fit) * eps ** ((alpha - gamma) / (1.0 + alpha))
    concl_sup = (not premise_sup) or sup_h <= bound_sup
    premise_int = integral_power < eps
    bound_int = (1.0 + c_fit) * eps ** ((alpha - gamma) / (1.0 + ell * alpha))
    concl_int = (not premise_int) or sup_h < bound_int
    return HolderTransferReport(
        alpha, gamma, eps, ell, sup_h, hold_h, sup_g, integral_power, c_fit,
        premise_int, bound_int, concl_int, premise_sup, bound_sup, concl_sup)


CASCADE_RATIO = 1.0 / 152.0
BLOCK_EXPONENT = 14.0 / 75.0


def cascade_table(eps: float, levels: int, horizon: float,
                  n_processes: int):
    """Exponent cascade for the composite bad event.

    Level j uses the inner scale eps^((1/152)^j) and block width
    (inner scale)^(14/75); rows carry the analytic event-a and event-b
    bounds at that width. Probabilities are astronomically small at desk
    scale, so only the exponent arithmetic is exposed.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    rows = []
    for j in range(1, levels + 1):
        exponent = CASCADE_RATIO ** j
        inner = eps ** exponent
        width = inner ** BLOCK_EXPONENT
        rows.append({
            "level": j,
            "exponent": exponent,
            "inner_eps": inner,
            "delta_cap": width,
            "bound_a": omega_a_bound(width, horizon, n_processes),
            "bound_b": omega_b_bound(width, horizon, n_processes),
        })
    return rows
