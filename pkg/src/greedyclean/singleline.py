"""Single-halfline escape experiments and blocking-array checks.

The auxiliary model: k workers on one halfline, a dust particle at the
origin, and rate-1 Poisson dust beyond the rightmost start.  Because every
jump goes either to the origin (ending the trial) or to the first
surviving particle on the right, the whole state is the k worker positions
plus the next revealed particle, which keeps both the scalar reference
runner and the vectorized Monte Carlo kernel O(k).

Escape is certified, not observed: once every worker is past the barrier
and closer to its next right particle than to the origin, the trial is
declared escaped.  The residual error of that certificate is bounded by
1 - P1(barrier), which the oracle module can evaluate.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .seeds import derive_seed

_BLOCK = 1 << 16  # trials per vectorized block; fixed so seeds replay


@dataclass(frozen=True)
class SingleLineConfig:
    k: int
    initial_positions: tuple[float, ...]
    origin_particle: bool = True
    mover: str | tuple[int, ...] = "poisson"   # or a cyclic order of worker ids
    escape_barrier: float = 30.0
    max_jumps: int = 100_000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one worker")
        if len(self.initial_positions) != self.k:
            raise ValueError("initial_positions must have k entries")
        if any(p <= 0 for p in self.initial_positions):
            raise ValueError("initial positions must be positive")
        if list(self.initial_positions) != sorted(self.initial_positions):
            raise ValueError("initial positions must be nondecreasing")
        if self.escape_barrier <= 0:
            raise ValueError("escape barrier must be positive")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be positive")
        if not isinstance(self.mover, str):
            if set(self.mover) != set(range(self.k)):
                raise ValueError("fixed order must mention every worker")


def at_same_point(x: float, k: int, **kw) -> SingleLineConfig:
    """All k workers starting at the same distance x."""
    return SingleLineConfig(k=k, initial_positions=(x,) * k, **kw)


@dataclass(frozen=True)
class Outcome:
    origin_removed: bool
    censored: bool
    jumps_used: int

    def __post_init__(self):
        if self.origin_removed and self.censored:
            raise ValueError("a decided trial cannot be censored")

    @property
    def escaped(self) -> bool:
        return not self.origin_removed and not self.censored


def _certified(positions: list[float], dnext: float, barrier: float) -> bool:
    mn = min(positions)
    return mn > barrier and 2.0 * mn > dnext


def run_single(config: SingleLineConfig, rng) -> Outcome:
    """One trial of the k-worker halfline model.

    rng needs .random() and .expovariate(); jump-to-origin wins exact
    distance ties, matching the deterministic model's convention.
    """
    k = config.k
    positions = list(config.initial_positions)
    dnext = positions[-1] + rng.expovariate(1.0)
    if isinstance(config.mover, str):
        order = None
    else:
        order = config.mover
    jumps = 0
    while True:
        if _certified(positions, dnext, config.escape_barrier):
            return Outcome(False, False, jumps)
        if jumps >= config.max_jumps:
            return Outcome(False, True, jumps)
        if order is not None:
            mover = order[jumps % len(order)]
        elif k == 1:
            mover = 0
        else:
            mover = int(rng.random() * k)
        p = positions[mover]
        if config.origin_particle and 2.0 * p <= dnext:
            return Outcome(True, False, jumps + 1)
        positions[mover] = dnext
        dnext += rng.expovariate(1.0)
        jumps += 1


@dataclass(frozen=True)
class EscapeEstimate:
    trials: int
    n_escaped: int
    n_failed: int
    n_censored: int

    @property
    def p_hat(self) -> float:
        decided = self.n_escaped + self.n_failed
        return self.n_escaped / decided if decided else 0.0

    @property
    def stderr(self) -> float:
        decided = self.n_escaped + self.n_failed
        if decided == 0:
            return 0.0
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / decided)

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / self.trials

    @property
    def p_low(self) -> float:
        """Censored trials counted as failures."""
        return self.n_escaped / self.trials

    @property
    def p_high(self) -> float:
        """Censored trials counted as escapes."""
        return (self.n_escaped + self.n_censored) / self.trials


def _kernel_block(config: SingleLineConfig, size: int, gap_rng, ring_rng) -> np.ndarray:
    """Vectorized trials; one ring and one gap drawn per step for coupling."""
    k = config.k
    barrier = config.escape_barrier
    origin = config.origin_particle
    pos = np.tile(np.array(config.initial_positions), (size, 1))
    dnext = config.initial_positions[-1] + gap_rng.exponential(size=size)
    status = np.zeros(size, dtype=np.int8)  # 0 active 1 escaped 2 failed 3 censored
    rows = np.arange(size)
    for _ in range(config.max_jumps):
        mn = pos.min(axis=1)
        escaped = (status == 0) & (mn > barrier) & (2.0 * mn > dnext)
        status[escaped] = 1
        active = status == 0
        if not active.any():
            return status
        ring = ring_rng.integers(0, k, size=size)
        gap = gap_rng.exponential(size=size)
        ring_pos = pos[rows, ring]
        if origin:
            to_origin = active & (2.0 * ring_pos <= dnext)
            status[to_origin] = 2
            advancing = active & ~to_origin
        else:
            advancing = active
        pos[rows[advancing], ring[advancing]] = dnext[advancing]
        dnext[advancing] += gap[advancing]
    status[status == 0] = 3
    return status


def estimate_Pk(config: SingleLineConfig, trials: int, seed: int) -> EscapeEstimate:
    """Monte Carlo escape probability with a censoring band.

    Trials are processed in fixed-size blocks whose draw streams depend
    only on (seed, block index, step), so runs with a shared seed couple
    trial by trial across different start vectors or worker counts.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if not isinstance(config.mover, str):
        raise ValueError("estimate_Pk uses the stochastic mover")
    counts = [0, 0, 0, 0]
    done = 0
    block_index = 0
    while done < trials:
        size = min(_BLOCK, trials - done)
        gap_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "gaps", block_index)))
        ring_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "rings", block_index)))
        status = _kernel_block(config, size, gap_rng, ring_rng)
        for code in (1, 2, 3):
            counts[code] += int(np.count_nonzero(status == code))
        done += size
        block_index += 1
    return EscapeEstimate(trials, counts[1], counts[2], counts[3])


def escape_outcomes(config: SingleLineConfig, trials: int, seed: int) -> np.ndarray:
    """Per-trial status codes (1 escaped, 2 failed, 3 censored); for coupled tests."""
    out = np.empty(trials, dtype=np.int8)
    done = 0
    block_index = 0
    while done < trials:
        size = min(_BLOCK, trials - done)
        gap_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "gaps", block_index)))
        ring_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "rings", block_index)))
        out[done:done + size] = _kernel_block(config, size, gap_rng, ring_rng)
        done += size
        block_index += 1
    return out


# -- conditional-on-environment escape ------------------------------------

@dataclass(frozen=True)
class ConditionalEscape:
    z_values: np.ndarray        # one conditional escape probability per environment
    threshold: float            # x0^M
    freq_above: float           # empirical P(Z > x0^M)
    lower_bound: float          # e^{-k (1+delta) log^2 x0 / (2 log 2)}


def estimate_conditional_escape(config: SingleLineConfig, n_envs: int,
                                clock_reps: int, seed: int, *,
                                M: float = 10.0, delta: float = 0.1) -> ConditionalEscape:
    """Two-stage estimator: freeze the dust, average over clocks only.

    Reveal order is left to right, so an environment is just its gap
    sequence; every clock replay consumes the same particle positions.
    """
    k = config.k
    x0 = config.initial_positions[-1]
    reveal_cap = config.max_jumps + 1
    z_values = np.empty(n_envs)
    rows = np.arange(clock_reps)
    for e in range(n_envs):
        env_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "cond-env", e)))
        particles = x0 + np.cumsum(env_rng.exponential(size=reveal_cap))
        clock_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "cond-clock", e)))
        pos = np.tile(np.array(config.initial_positions), (clock_reps, 1))
        reveal = np.zeros(clock_reps, dtype=np.int64)
        status = np.zeros(clock_reps, dtype=np.int8)
        for _ in range(config.max_jumps):
            dnext = particles[reveal]
            mn = pos.min(axis=1)
            escaped = (status == 0) & (mn > config.escape_barrier) & (2.0 * mn > dnext)
            status[escaped] = 1
            active = status == 0
            if not active.any():
                break
            ring = clock_rng.integers(0, k, size=clock_reps)
            ring_pos = pos[rows, ring]
            if config.origin_particle:
                to_origin = active & (2.0 * ring_pos <= dnext)
                status[to_origin] = 2
                advancing = active & ~to_origin
            else:
                advancing = active
            pos[rows[advancing], ring[advancing]] = dnext[advancing]
            reveal[advancing] += 1
        # censored replays count as failures: Z is then a lower estimate
        z_values[e] = float(np.count_nonzero(status == 1)) / clock_reps
    threshold = x0 ** M
    freq = float(np.count_nonzero(z_values > threshold)) / n_envs
    bound = math.exp(-k * (1.0 + delta) * math.log(x0) ** 2 / (2.0 * math.log(2.0)))
    return ConditionalEscape(z_values, threshold, freq, bound)


# -- blocking arrays -------------------------------------------------------

def is_blocking(points: Sequence[float], x: float, k: int, delta: float) -> bool:
    """Whether some window (y, 2y] inside (delta, 1) holds fewer than k points.

    Exact decision: the window count is piecewise constant in y with
    breakpoints at shifted points p and at p/2, so evaluating at every
    breakpoint, at the range ends, and at midpoints between consecutive
    candidates covers all pieces.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if delta >= 0.5:
        return False  # no admissible window
    pts = sorted(p - x for p in points if p > x)
    lo, hi = delta, 0.5
    cands = {lo, hi}
    for p in pts:
        if p > 1.0:
            break
        if lo <= p <= hi:
            cands.add(p)
        half = 0.5 * p
        if lo <= half <= hi:
            cands.add(half)
    ys = sorted(cands)
    probes = list(ys)
    probes.extend(0.5 * (a + b) for a, b in zip(ys, ys[1:]))
    for y in probes:
        count = bisect_right(pts, 2.0 * y) - bisect_right(pts, y)
        if count < k:
            return True
    return False


def is_blocking_grid(points: Sequence[float], x: float, k: int, delta: float,
                     grid_size: int = 100_000) -> bool:
    """Grid brute force over y; test oracle for the exact scanner."""
    if delta >= 0.5:
        return False
    pts = np.sort(np.array([p - x for p in points if p > x]))
    ys = np.linspace(delta, 0.5, grid_size)
    counts = np.searchsorted(pts, 2.0 * ys, side="right") - np.searchsorted(pts, ys, side="right")
    return bool((counts < k).any())


def estimate_nonblocking_prob(k: int, delta: float, trials: int,
                              seed: int) -> tuple[float, float]:
    """Fraction of fresh unit-rate Poisson samples on (0, 2] that are not
    k-(delta)blocking, with binomial standard error."""
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "nonblock")))
    cap = 24  # P(Poisson(2) > 24 - 1) is far below 1/trials at any sane scale
    hits = 0
    done = 0
    while done < trials:
        size = min(_BLOCK, trials - done)
        gaps = rng.exponential(size=(size, cap))
        positions = np.cumsum(gaps, axis=1)
        if not (positions[:, -1] > 2.0).all():
            raise RuntimeError("gap cap exceeded; raise cap")
        for row in positions:
            pts = row[row <= 2.0]
            if not is_blocking(pts.tolist(), 0.0, k, delta):
                hits += 1
        done += size
    p_hat = hits / trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return p_hat, stderr


def willwriteit_bound(k: int, delta: float, gamma: float) -> float:
    """Upper bound e^{-(log delta)^2 k (1-gamma) / (2 log 2)} on the
    non-blocking probability."""
    return math.exp(-math.log(delta) ** 2 * k * (1.0 - gamma) / (2.0 * math.log(2.0)))


# -- deterministic fixed-order model ---------------------------------------

def deterministic_run(x: Sequence[float], d: Sequence[float],
                      order: Sequence[int], max_steps: int = 10_000) -> bool:
    """Unit-time greedy dynamics with a fixed move order.

    Escape convention: consuming every listed particle without removing
    the origin counts as escape.  Equidistant candidates resolve to the
    origin (the leftmost).
    """
    k = len(x)
    if k < 1:
        raise ValueError("need at least one worker")
    if list(x) != sorted(x):
        raise ValueError("worker positions must be nondecreasing")
    if x[0] <= 0:
        raise ValueError("worker positions must be positive")
    if list(d) != sorted(d):
        raise ValueError("particles must be nondecreasing")
    if not d or d[0] <= x[-1]:
        raise ValueError("first particle must lie beyond the last worker")
    if set(order) != set(range(k)):
        raise ValueError("order must mention every worker")
    if any(p in set(d) for p in x):
        raise ValueError("coincident worker and particle positions are not modeled")
    positions = list(x)
    idx = 0
    step = 0
    while idx < len(d):
        if step >= max_steps:
            raise RuntimeError("max_steps exhausted before the particle list")
        mover = order[step % len(order)]
        p = positions[mover]
        dnext = d[idx]
        if 2.0 * p <= dnext:        # tie chooses the origin
            return False
        positions[mover] = dnext
        idx += 1
        step += 1
    return True


def check_monotonicity(property_id: int, x: Sequence[float], d: Sequence[float],
                       order: Sequence[int], *, x_hat: Sequence[float] | None = None,
                       shift: float | None = None, max_steps: int = 10_000) -> bool:
    """Verify one monotonicity implication on a concrete instance.

    Property 1: componentwise larger starts (same dust) preserve escape.
    Property 2: escape survives a uniform shift of workers and dust away
    from the origin (the right-jump condition 2p > d only loosens under
    p -> p + c, d -> d + c; this is also the direction that makes the
    escape probability increasing in the start).
    """
    if property_id == 1:
        if x_hat is None:
            raise ValueError("property 1 needs x_hat")
        if len(x_hat) != len(x) or any(b < a for a, b in zip(x, x_hat)):
            raise ValueError("x_hat must dominate x componentwise")
        if x_hat[-1] >= d[0]:
            raise ValueError("x_hat must stay below the first particle")
        base = deterministic_run(x, d, order, max_steps)
        if not base:
            return True
        return deterministic_run(x_hat, d, order, max_steps)
    if property_id == 2:
        if shift is None or shift <= 0:
            raise ValueError("property 2 needs a positive shift")
        base = deterministic_run(x, d, order, max_steps)
        if not base:
            return True
        return deterministic_run([v + shift for v in x], [v + shift for v in d],
                                 order, max_steps)
    raise ValueError("property_id must be 1 or 2")
