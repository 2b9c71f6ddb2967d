"""Event-driven simulation of greedy cleaners on the star of N halflines.

floor(N^alpha) workers start at the origin.  A single global clock rings
after an Exponential(rate = W) wait and a uniformly chosen worker jumps to
the closest surviving particle, which is equivalent in law to W
independent rate-1 clocks racing.  Distances use the star metric: |x - y|
on the same line, x + y across lines.  A jump within a line (or the first
jump from the origin) is an advance; a jump crossing the origin is a skip.

Settlement is undecidable in finite time, so trials certify a worker as
settled once it has made quiescence_k consecutive advances; a trial stops
at quiescence (all workers settled and rho above a floor), at the horizon,
or at the event cap (censored).
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .env import Env, init_env
from .seeds import derive_seed

ADVANCE = "advance"
SKIP = "skip"

EVENT_CSV_HEADER = "time,worker,from_line,from_pos,to_line,to_pos,kind"


class JumpEvent(NamedTuple):
    time: float
    worker_id: int
    from_line: int
    from_pos: float
    to_line: int
    to_pos: float
    kind: str


def classify(event: JumpEvent) -> str:
    """Advance iff the jump starts at the origin or stays on one line."""
    if event.from_line == 0 or event.from_line == event.to_line:
        return ADVANCE
    return SKIP


@dataclass(frozen=True)
class WorkerState:
    worker_id: int
    line: int
    position: float
    streak: int
    last_skip_time: float | None
    jump_count: int


@dataclass
class SimConfig:
    n: int
    alpha: float
    seed: int = 0
    horizon: float | None = None          # None -> 8 * n^(1 - alpha + 0.3)
    quiescence_k: int | None = None       # None -> ceil(log^3 n)
    quiescence_rho: float = 1.0
    sigma_thresholds: tuple[float, ...] = (1.0,)
    rho_sample_interval: float = 1.0
    max_events: int = 10_000_000
    streak_milestone: int | None = None   # extra diagnostic, see TrialSummary

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_events <= 0:
            raise ValueError("max_events must be positive")
        if self.quiescence_rho < 0.0:
            raise ValueError("quiescence_rho must be nonnegative")
        if self.rho_sample_interval <= 0.0:
            raise ValueError("rho_sample_interval must be positive")
        if any(x <= 0 for x in self.sigma_thresholds):
            raise ValueError("sigma thresholds must be positive")
        if list(self.sigma_thresholds) != sorted(self.sigma_thresholds):
            raise ValueError("sigma thresholds must be ascending")

    @property
    def worker_count(self) -> int:
        return max(1, int(math.floor(self.n ** self.alpha)))

    @property
    def horizon_effective(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return 8.0 * self.n ** (1.0 - self.alpha + 0.3)

    @property
    def quiescence_k_effective(self) -> int:
        if self.quiescence_k is not None:
            return self.quiescence_k
        return math.ceil(math.log(self.n) ** 3) if self.n > 1 else 1


@dataclass
class Trackers:
    sigma_thresholds: tuple[float, ...]
    sigma_hits: dict[float, float | None]
    theta: float | None = None
    rho_samples: list[tuple[float, float]] = field(default_factory=list)
    skip_count: int = 0
    advance_count: int = 0


@dataclass
class TrialSummary:
    n: int
    alpha: float
    worker_count: int
    seed: int
    stop_reason: str                      # quiescence | horizon | event_cap
    t_end: float
    events: int
    skip_count: int
    advance_count: int
    theta_hat: float | None
    sigma_hits: dict[float, float | None]
    workers: list[WorkerState]
    settled_multiplicities: dict[int, int]
    unsettled_count: int
    rho_trace: list[tuple[float, float]]
    rho_final: float
    quiescence_k: int
    quiescence_rho: float
    milestone: int | None = None
    milestone_reached: int = 0
    milestone_relapsed: int = 0

    def a_m_violation(self, m: int) -> bool:
        """Whether at least m settled workers share one halfline."""
        if m < 2:
            raise ValueError("m must be at least 2")
        peak = max(self.settled_multiplicities.values(), default=0)
        return peak >= m

    @property
    def censored(self) -> bool:
        return self.stop_reason == "event_cap"


class SimState:
    """Mutable trial state: environment, workers, clock, trackers."""

    __slots__ = (
        "config", "n", "w", "k", "env", "clock", "t", "events",
        "wline", "wpos", "wstreak", "wjumps", "wlastskip",
        "settled", "trackers", "next_sample", "sample_interval",
        "sigma_pending", "sigma_next_idx",
        "milestone", "m_reached", "m_relapsed",
    )

    def __init__(self, config: SimConfig):
        self.config = config
        self.n = config.n
        self.w = config.worker_count
        self.k = config.quiescence_k_effective
        trial_seed = config.seed
        self.env = init_env(config.n, derive_seed(trial_seed, "env"))
        self.clock = random.Random(derive_seed(trial_seed, "clock"))
        self.t = 0.0
        self.events = 0
        W = self.w
        self.wline = [0] * W
        self.wpos = [0.0] * W
        self.wstreak = [0] * W
        self.wjumps = [0] * W
        self.wlastskip: list[float | None] = [None] * W
        self.settled = 0
        thresholds = tuple(config.sigma_thresholds)
        self.trackers = Trackers(thresholds, {x: None for x in thresholds})
        self.sigma_pending = list(thresholds)
        self.sigma_next_idx = 0
        self.sample_interval = config.rho_sample_interval
        rho0 = self.env.rho()
        self.trackers.rho_samples.append((0.0, rho0))
        self.next_sample = self.sample_interval
        self.milestone = config.streak_milestone
        if self.milestone is not None:
            self.m_reached = [False] * W
            self.m_relapsed = [False] * W
        else:
            self.m_reached = self.m_relapsed = None

    def worker_states(self) -> list[WorkerState]:
        return [
            WorkerState(w + 1, self.wline[w], self.wpos[w], self.wstreak[w],
                        self.wlastskip[w], self.wjumps[w])
            for w in range(self.w)
        ]


def nearest_target(state: SimState, worker: int) -> tuple[int, float, float]:
    """Closest surviving particle for a worker, as (line, position, distance).

    At the origin this is the globally leftmost particle.  Otherwise the
    candidates are the same-line successor and predecessor and the leftmost
    particle over the other lines (star distance x + pos).  Ties prefer the
    same line, then the smaller line id, then the smaller position.
    """
    env = state.env
    line = state.wline[worker]
    if line == 0:
        lid, pos = env.global_min_leftmost()
        return lid, pos, pos
    x = state.wpos[worker]
    particles = env.lines[line].particles
    i = bisect_right(particles, x)
    if i == len(particles):
        dline = env.lines[line]
        dline.extend(x)
        while i == len(dline.particles):
            dline.reveal_one()
        particles = dline.particles
    best_pos = particles[i]
    best_dist = best_pos - x
    if i > 0:
        pred = particles[i - 1]
        if x - pred <= best_dist:  # tie -> smaller position
            best_pos = pred
            best_dist = x - pred
    if state.n >= 2:
        clid, cpos = env.global_min_leftmost(exclude=line)
        if x + cpos < best_dist:  # tie -> same line preferred
            return clid, cpos, x + cpos
    return line, best_pos, best_dist


def step(state: SimState, t_limit: float | None = None) -> JumpEvent | None:
    """Advance the clock and execute one jump.

    Returns None without jumping when the next ring would land past
    t_limit (the clock is then parked at t_limit).
    """
    uniform = state.clock.random
    w_count = state.w
    # global ring: Exponential(rate = W), then a uniform worker; equal in
    # law to W independent rate-1 clocks racing
    t = state.t - math.log(1.0 - uniform()) / w_count
    if t_limit is not None and t >= t_limit:
        state.t = t_limit
        _sample_rho_until(state, t_limit, inclusive=True)
        return None
    worker = int(uniform() * w_count)
    if state.next_sample < t:
        _sample_rho_until(state, t, inclusive=False)
    state.t = t

    env = state.env
    from_line = state.wline[worker]
    from_pos = state.wpos[worker]
    to_line, to_pos, _dist = nearest_target(state, worker)

    if to_line == from_line:
        # same-line removal: index known to exist; leftmost fix-up handled
        particles = env.lines[to_line].particles
        idx = bisect_right(particles, to_pos) - 1
        env.remove_at(to_line, idx)
    else:
        # cross-line (or first) jumps always land on the target line's
        # leftmost surviving particle
        particles = env.lines[to_line].particles
        if particles[0] != to_pos:
            raise RuntimeError("cross-line jump does not hit the line's leftmost")
        env.remove_at(to_line, 0)

    is_skip = from_line != 0 and to_line != from_line
    state.events += 1
    if is_skip:
        tr = state.trackers
        tr.skip_count += 1
        tr.theta = t
        tr.rho_samples.append((t, env.rho()))
        idx = state.sigma_next_idx
        pending = state.sigma_pending
        while idx < len(pending) and pending[idx] <= to_pos:
            tr.sigma_hits[pending[idx]] = t
            idx += 1
        state.sigma_next_idx = idx
        old = state.wstreak[worker]
        if old >= state.k:
            state.settled -= 1
        if state.m_reached is not None and state.m_reached[worker]:
            state.m_relapsed[worker] = True
        state.wstreak[worker] = 0
        state.wlastskip[worker] = t
    else:
        state.trackers.advance_count += 1
        streak = state.wstreak[worker] + 1
        state.wstreak[worker] = streak
        if streak == state.k:
            state.settled += 1
        if state.m_reached is not None and streak == state.milestone:
            state.m_reached[worker] = True
    state.wline[worker] = to_line
    state.wpos[worker] = to_pos
    state.wjumps[worker] += 1
    return JumpEvent(t, worker + 1, from_line, from_pos, to_line, to_pos,
                     SKIP if is_skip else ADVANCE)


def _sample_rho_until(state: SimState, t: float, inclusive: bool) -> None:
    nxt = state.next_sample
    if not (nxt <= t if inclusive else nxt < t):
        return
    rho = state.env.rho()
    samples = state.trackers.rho_samples
    interval = state.sample_interval
    while (nxt <= t if inclusive else nxt < t):
        samples.append((nxt, rho))
        nxt += interval
    state.next_sample = nxt


def settled_lines(state: SimState, k: int) -> dict[int, int]:
    """Per-line counts of workers with streak at least k."""
    if k < 1:
        raise ValueError("k must be at least 1")
    counts: dict[int, int] = {}
    for w in range(state.w):
        if state.wstreak[w] >= k:
            line = state.wline[w]
            counts[line] = counts.get(line, 0) + 1
    return counts


def run_trial(config: SimConfig,
              event_sink: Callable[[JumpEvent], None] | None = None) -> TrialSummary:
    """Run one trial to quiescence, the horizon, or the event cap."""
    state = SimState(config)
    horizon = config.horizon_effective
    max_events = config.max_events
    rho_floor = config.quiescence_rho
    w_count = state.w
    stop_reason = None
    while True:
        if state.settled == w_count and (rho_floor == 0.0 or state.env.rho() > rho_floor):
            stop_reason = "quiescence"
            break
        if state.events >= max_events:
            stop_reason = "event_cap"
            break
        event = step(state, t_limit=horizon)
        if event is None:
            stop_reason = "horizon"
            break
        if event_sink is not None:
            event_sink(event)

    tr = state.trackers
    if tr.advance_count + tr.skip_count != sum(state.wjumps):
        raise RuntimeError("event-count conservation violated")
    jumped = [state.wpos[w] for w in range(w_count) if state.wjumps[w] > 0]
    if len(set(jumped)) != len(jumped):
        raise RuntimeError("two workers share a position")
    multiplicities = settled_lines(state, state.k)
    summary = TrialSummary(
        n=config.n,
        alpha=config.alpha,
        worker_count=w_count,
        seed=config.seed,
        stop_reason=stop_reason,
        t_end=state.t,
        events=state.events,
        skip_count=tr.skip_count,
        advance_count=tr.advance_count,
        theta_hat=tr.theta,
        sigma_hits=dict(tr.sigma_hits),
        workers=state.worker_states(),
        settled_multiplicities=multiplicities,
        unsettled_count=w_count - sum(multiplicities.values()),
        rho_trace=list(tr.rho_samples),
        rho_final=state.env.rho(),
        quiescence_k=state.k,
        quiescence_rho=rho_floor,
        milestone=state.milestone,
        milestone_reached=(sum(state.m_reached) if state.m_reached else 0),
        milestone_relapsed=(sum(state.m_relapsed) if state.m_relapsed else 0),
    )
    return summary
