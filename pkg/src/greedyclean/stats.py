"""Trial orchestration, interval estimators, and environment diagnostics.

Sweeps fan independent trials out over processes; every trial's seed is
derived from (root seed, N, alpha bits, trial index), so results are a
pure function of the root seed no matter how many workers run them or in
what order they finish.  Censored trials (event-cap stops) are never
dropped silently: frequencies are computed over decided trials and the
censored fraction is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .dynamics import SimConfig, run_trial
from .seeds import derive_seed

SWEEP_CSV_HEADER = ("N,alpha,m,trials,violation_freq,wilson_lo,wilson_hi,"
                    "theta_p50,theta_p95,mean_skips,censored_frac")
ENV_CSV_HEADER = "N,trials,f0,f1,f2,f3,f4"
RHO_CSV_HEADER = "t,rho"

_F_NAMES = ("f0", "f1", "f2", "f3", "f4")


def critical_scale(alpha: float) -> float:
    """The spatial scale constant sqrt(2 (1 - alpha) log 2)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(2.0 * (1.0 - alpha) * math.log(2.0))


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    spread = z * math.sqrt((p * (1.0 - p) + z2 / (4.0 * n)) / n) / denom
    return max(0.0, center - spread), min(1.0, center + spread)


# -- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    n_values: tuple[int, ...]
    alpha_values: tuple[float, ...]
    trials: int
    root_seed: int
    m_values: tuple[int, ...] = (2, 3)
    config_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.n_values or not self.alpha_values:
            raise ValueError("sweep needs at least one cell")
        if any(m < 2 for m in self.m_values):
            raise ValueError("m values start at 2")


@dataclass
class SweepCell:
    n: int
    alpha: float
    trials: int
    m_values: tuple[int, ...]
    violation_freq: dict[int, float]
    wilson: dict[int, tuple[float, float]]
    theta_p50: float
    theta_p95: float
    mean_skips: float
    censored_fraction: float

    @property
    def unreliable(self) -> bool:
        return self.censored_fraction > 0.20


def trial_config(spec: SweepSpec, n: int, alpha: float, index: int) -> SimConfig:
    seed = derive_seed(spec.root_seed, "trial", n, alpha, index)
    return SimConfig(n=n, alpha=alpha, seed=seed, **spec.config_overrides)


def _trial_stats(config: SimConfig) -> tuple[bool, float, int, int]:
    s = run_trial(config)
    theta = s.theta_hat if s.theta_hat is not None else 0.0
    peak = max(s.settled_multiplicities.values(), default=0)
    return (s.censored, theta, s.skip_count, peak)


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with get_context("fork").Pool(processes=jobs) as pool:
        chunk = max(1, len(tasks) // (jobs * 8))
        return pool.map(fn, tasks, chunksize=chunk)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepCell]:
    """All cells of the sweep; deterministic given the root seed."""
    cells = []
    for n in spec.n_values:
        for alpha in spec.alpha_values:
            tasks = [trial_config(spec, n, alpha, i) for i in range(spec.trials)]
            rows = _map_tasks(_trial_stats, tasks, jobs)
            cells.append(_aggregate_cell(n, alpha, spec, rows))
    return cells


def _aggregate_cell(n: int, alpha: float, spec: SweepSpec, rows) -> SweepCell:
    censored = sum(1 for c, _, _, _ in rows if c)
    decided = [(t, s, peak) for c, t, s, peak in rows if not c]
    thetas = sorted(t for t, _, _ in decided)
    freq: dict[int, float] = {}
    wilson: dict[int, tuple[float, float]] = {}
    for m in spec.m_values:
        hits = sum(1 for _, _, peak in decided if peak >= m)
        if decided:
            freq[m] = hits / len(decided)
            wilson[m] = wilson_interval(hits, len(decided))
        else:
            freq[m] = 0.0
            wilson[m] = (0.0, 1.0)
    return SweepCell(
        n=n,
        alpha=alpha,
        trials=spec.trials,
        m_values=spec.m_values,
        violation_freq=freq,
        wilson=wilson,
        theta_p50=_quantile(thetas, 0.50),
        theta_p95=_quantile(thetas, 0.95),
        mean_skips=(sum(s for _, s, _ in decided) / len(decided)) if decided else 0.0,
        censored_fraction=censored / spec.trials,
    )


def _quantile(sorted_values: list[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    if len(sorted_values) == 1:
        return sorted_values[0]
    pos = q * (len(sorted_values) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac


def write_sweep_csv(cells: list[SweepCell], path, config_echo: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if config_echo:
            fh.write(f"# {config_echo}\n")
        fh.write(SWEEP_CSV_HEADER + "\n")
        for cell in cells:
            for m in cell.m_values:
                lo, hi = cell.wilson[m]
                fh.write(
                    f"{cell.n},{cell.alpha!r},{m},{cell.trials},"
                    f"{cell.violation_freq[m]!r},{lo!r},{hi!r},"
                    f"{cell.theta_p50!r},{cell.theta_p95!r},"
                    f"{cell.mean_skips!r},{cell.censored_fraction!r}\n"
                )


def write_rho_csv(trace, path, config_echo: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if config_echo:
            fh.write(f"# {config_echo}\n")
        fh.write(RHO_CSV_HEADER + "\n")
        for t, rho in trace:
            fh.write(f"{t!r},{rho!r}\n")


# -- environment regularity -------------------------------------------------

@dataclass
class RegularityReport:
    n: int
    trials: int
    freqs: dict[str, float]


def _rowwise_count(positions: np.ndarray, queries: np.ndarray, offset: float) -> np.ndarray:
    """Count entries <= query per row; both inputs row-sorted."""
    rows = positions.shape[0]
    stride = np.arange(rows)[:, None] * offset
    flat_pos = (positions + stride).ravel()
    flat_q = (queries + stride).ravel()
    idx = np.searchsorted(flat_pos, flat_q, side="right")
    idx = idx.reshape(queries.shape) - np.arange(rows)[:, None] * positions.shape[1]
    return idx


def _f0_exact_line(pts: np.ndarray, low: float, high: float) -> bool:
    """Exact scan of the prefix count M(y) against (y/2, 2y) on [low, high]."""
    left = np.concatenate([[0.0], pts])
    right = np.append(pts, np.inf)
    counts = np.arange(len(left))
    lo = np.clip(left, low, high)
    hi = np.clip(right, low, high)
    ok = (left <= high) & (right >= low) & (hi >= lo)
    viol = ok & ((hi >= 2.0 * counts) | (lo <= counts / 2.0))
    return bool(viol.any())


def _f2_exact_line(pts: np.ndarray, low: float, high: float) -> bool:
    """Exact scan of the window count #]y, 5y/4[ over y in [low, high]."""
    entries = 0.8 * pts
    values = np.concatenate([entries, pts])
    deltas = np.concatenate([np.ones(len(pts)), -np.ones(len(pts))])
    order = np.argsort(values, kind="stable")
    values = values[order]
    counts = np.cumsum(deltas[order])
    # pieces are [values[i], values[i+1]) with count counts[i]
    starts = values
    ends = np.append(values[1:], np.inf)
    lo = np.clip(starts, low, high)
    hi = np.clip(ends, low, high)
    ok = (starts <= high) & (ends >= low) & (hi >= lo)
    viol = ok & ((counts <= hi / 8.0) | (counts >= lo / 2.0))
    if bool(viol.any()):
        return True
    # piece below the first breakpoint has count zero
    if len(values) == 0 or values[0] > low:
        return True  # zero points in some admissible window
    return False


def _env_sample_flags(args) -> tuple[bool, bool, bool, bool, bool]:
    n, alpha, seed = args
    rng = np.random.Generator(np.random.PCG64(seed))
    log_n = math.log(n)
    big_l = log_n ** 2
    y_max = 8.0 * big_l
    gen_hi = 1.25 * y_max
    draws = int(gen_hi + 6.0 * math.sqrt(gen_hi) + 16.0)
    f0 = f1 = f2 = False

    w_alpha = max(1, math.floor(n ** alpha))
    idx_max = math.floor(n / log_n) + w_alpha
    tau = (2.0 * idx_max + 20.0) / n
    small_points: list[np.ndarray] = []

    chunk = max(1, min(n, (1 << 22) // draws))
    start = 1
    while start <= n:
        size = min(chunk, n - start + 1)
        pos = rng.exponential(size=(size, draws)).cumsum(axis=1)
        if not (pos[:, -1] > gen_hi).all():
            raise RuntimeError("per-line draw budget exceeded")
        small = pos[pos <= tau]
        if small.size:
            small_points.append(small)

        # F1: some line with at least log N points within distance 2
        if not f1:
            f1 = bool(((pos <= 2.0).sum(axis=1) >= log_n).any())

        # F0/F2: necessary conditions on a geometric y-grid bound the count
        # functions between consecutive grid values; exact scans only run on
        # the surviving lines
        if not (f0 and f2):
            grid = np.geomspace(big_l, y_max, 48)
            queries = np.sort(np.concatenate([grid, 1.25 * grid]))
            cnt = _rowwise_count(pos, np.broadcast_to(queries, (size, queries.size)),
                                 offset=16.0 * gen_hi)
            at = {v: cnt[:, i] for i, v in enumerate(queries)}
            maybe0 = np.zeros(size, dtype=bool)
            maybe2 = np.zeros(size, dtype=bool)
            for g in range(len(grid) - 1):
                y0, y1 = grid[g], grid[g + 1]
                maybe0 |= (at[y1] >= 2.0 * y0) | (at[y0] <= y1 / 2.0)
                q_lo = at[1.25 * y0] - at[y1]
                q_hi = at[1.25 * y1] - at[y0]
                maybe2 |= (q_lo <= y1 / 8.0) | (q_hi >= y0 / 2.0)
            if not f0:
                for row in np.where(maybe0)[0]:
                    pts = pos[row]
                    if _f0_exact_line(pts[pts <= gen_hi], big_l, y_max):
                        f0 = True
                        break
            if not f2:
                for row in np.where(maybe2)[0]:
                    pts = pos[row]
                    if _f2_exact_line(pts[pts <= gen_hi], big_l, y_max):
                        f2 = True
                        break
        start += size

    merged = np.sort(np.concatenate(small_points)) if small_points else np.empty(0)
    if len(merged) < idx_max + 1:
        raise RuntimeError("small-point pool too small for order statistics")
    # F3: spacing of N^alpha-separated order statistics of the merged process
    i_hi = math.floor(n / log_n)
    first = merged[:i_hi]
    shifted = merged[w_alpha:w_alpha + i_hi]
    diffs = shifted - first
    band_lo = 1.0 / (2.0 * n ** (1.0 - alpha))
    band_hi = 2.0 / n ** (1.0 - alpha)
    f3 = bool(((diffs <= band_lo) | (diffs >= band_hi)).any())
    # F4: relative deviation of N t_i / i for sqrt(N) < i < N / log N
    i_lo = math.floor(math.sqrt(n))
    idx = np.arange(i_lo + 1, i_hi)
    f4 = False
    if len(idx):
        t_i = merged[idx - 1]
        f4 = bool((np.abs(n * t_i / idx - 1.0) >= 2.0 / log_n).any())
    return (f0, f1, f2, f3, f4)


def env_regularity(n: int, trials: int, seed: int, alpha: float = 0.5,
                   jobs: int = 1) -> RegularityReport:
    """Frequencies of the five environment irregularity events."""
    if n < 16:
        raise ValueError("regularity scales need n >= 16")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    tasks = [(n, alpha, derive_seed(seed, "envreg", n, i)) for i in range(trials)]
    flags = _map_tasks(_env_sample_flags, tasks, jobs)
    freqs = {
        name: sum(1 for f in flags if f[i]) / trials
        for i, name in enumerate(_F_NAMES)
    }
    return RegularityReport(n=n, trials=trials, freqs=freqs)


def write_env_csv(reports: list[RegularityReport], path, config_echo: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if config_echo:
            fh.write(f"# {config_echo}\n")
        fh.write(ENV_CSV_HEADER + "\n")
        for r in reports:
            cols = ",".join(repr(r.freqs[name]) for name in _F_NAMES)
            fh.write(f"{r.n},{r.trials},{cols}\n")


# -- first-visit supply and rho bound ----------------------------------------

@dataclass
class WnReport:
    n: int
    count: int
    ratio: float
    lo_edge: float
    hi_edge: float
    expected_mean: float
    expected_sd: float


def wn_count(n: int, k1: float, k2: float, seed: int) -> WnReport:
    """Halflines whose first particle falls in (e^{-k1 sqrt(log N)}, e^{-k2 sqrt(log N)})."""
    if not 0.0 < k2 < k1:
        raise ValueError("need 0 < k2 < k1")
    root = math.sqrt(math.log(n))
    lo_edge = math.exp(-k1 * root)
    hi_edge = math.exp(-k2 * root)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "wn", n)))
    firsts = rng.exponential(size=n)
    count = int(((firsts > lo_edge) & (firsts < hi_edge)).sum())
    p = math.exp(-lo_edge) - math.exp(-hi_edge)
    return WnReport(
        n=n,
        count=count,
        ratio=count / (n * hi_edge),
        lo_edge=lo_edge,
        hi_edge=hi_edge,
        expected_mean=n * p,
        expected_sd=math.sqrt(n * p * (1.0 - p)),
    )


def _rho_task(args) -> bool:
    config, threshold = args
    return run_trial(config).rho_final >= threshold


def rho_bound_check(n: int, alpha: float, k: float, delta: float, trials: int,
                    seed: int, jobs: int = 1) -> float:
    """Fraction of trials whose rho at time N^{1-a} e^{-k sqrt(log N)} is
    already past e^{-(k-delta) sqrt(log N)}; expected near zero."""
    if not 0.0 < delta < k:
        raise ValueError("need 0 < delta < k")
    root = math.sqrt(math.log(n))
    s0 = n ** (1.0 - alpha) * math.exp(-k * root)
    threshold = math.exp(-(k - delta) * root)
    tasks = []
    for i in range(trials):
        cfg = SimConfig(
            n=n, alpha=alpha, seed=derive_seed(seed, "rhobound", n, i),
            horizon=s0, quiescence_k=2 ** 62, quiescence_rho=math.inf,
            rho_sample_interval=max(s0, 1e-9), sigma_thresholds=(),
        )
        tasks.append((cfg, threshold))
    flags = _map_tasks(_rho_task, tasks, jobs)
    return sum(flags) / trials
