"""Dynamics: greedy targeting vs exhaustive scan, clock laws, trial contracts."""

import math
import random

import pytest

from greedyclean.dynamics import (
    ADVANCE,
    SKIP,
    JumpEvent,
    SimConfig,
    SimState,
    classify,
    nearest_target,
    run_trial,
    settled_lines,
    step,
)
from greedyclean.env import env_from_gaps


def make_state(n=2, alpha=0.5, **kw):
    return SimState(SimConfig(n=n, alpha=alpha, **kw))


def plant_env(state, gap_lists):
    """Swap in a scripted environment (line ids must cover 1..n)."""
    state.env = env_from_gaps(gap_lists)
    state.n = len(gap_lists)
    return state


# -- classify -------------------------------------------------------------

def test_classify_from_origin_is_advance():
    ev = JumpEvent(0.1, 1, 0, 0.0, 3, 0.2, ADVANCE)
    assert classify(ev) == ADVANCE


def test_classify_same_line_advance_and_cross_skip():
    assert classify(JumpEvent(1.0, 1, 1, 0.5, 1, 0.9, ADVANCE)) == ADVANCE
    assert classify(JumpEvent(1.0, 1, 1, 0.5, 2, 0.1, SKIP)) == SKIP


# -- nearest_target -------------------------------------------------------

def test_target_from_origin_is_global_leftmost():
    state = make_state(n=2, seed=1)
    plant_env(state, {1: [0.4], 2: [0.2]})
    assert nearest_target(state, 0) == (2, 0.2, 0.2)


def test_target_same_line_successor_beats_far_cross():
    state = make_state(n=2, seed=1)
    plant_env(state, {1: [1.0, 0.3, 5.0], 2: [0.2]})
    state.env.remove(1, 1.0)
    state.wline[0] = 1
    state.wpos[0] = 1.0
    # successor 1.3 at distance 0.3; cross target distance 1.0 + 0.2 = 1.2
    assert nearest_target(state, 0) == (1, pytest.approx(1.3), pytest.approx(0.3))


def brute_force_target(state, worker):
    """Exhaustive scan over every revealed particle with the star metric."""
    line = state.wline[worker]
    x = state.wpos[worker]
    best = None
    for dline in state.env.lines[1:]:
        for pos in dline.particles:
            dist = abs(pos - x) if dline.line_id == line else x + pos
            same = 0 if dline.line_id == line else 1
            key = (dist, same, dline.line_id, pos)
            if best is None or key < best:
                best = key
    dist, _, lid, pos = best
    return lid, pos, dist


def test_nearest_target_matches_brute_force():
    rng = random.Random(1234)
    checked = 0
    while checked < 10_000:
        n = rng.randint(2, 10)

        def gap_run():
            out, total = [], 0.0
            while total <= 8.0:
                g = rng.expovariate(1.0)
                out.append(g)
                total += g
            out.extend(rng.expovariate(1.0) for _ in range(8))  # reveal slack
            return out

        gaps = {lid: gap_run() for lid in range(1, n + 1)}
        state = make_state(n=n, seed=rng.getrandbits(32))
        plant_env(state, gaps)
        env = state.env
        for lid in range(1, n + 1):
            env.lines[lid].extend(rng.uniform(0.5, 6.0))
        # place the lone worker on a random particle of a random line
        lid = rng.randint(1, n)
        pos = rng.choice(env.lines[lid].particles)
        env.remove(lid, pos)
        state.wline[0] = lid
        state.wpos[0] = pos
        got = nearest_target(state, 0)
        want = brute_force_target(state, 0)
        assert got[0] == want[0] and got[1] == pytest.approx(want[1])
        checked += 1


# -- step: clock law ------------------------------------------------------

def test_single_worker_always_rings():
    cfg = SimConfig(n=2, alpha=0.3, seed=7)  # floor(2^0.3) = 1 worker
    state = SimState(cfg)
    assert state.w == 1
    for _ in range(20):
        ev = step(state)
        assert ev.worker_id == 1


def test_inter_ring_times_exponential_rate_w():
    state = make_state(n=10_000, alpha=0.5, seed=3)  # W = 100
    assert state.w == 100
    times = [0.0]
    for _ in range(100_000):
        ev = step(state)
        times.append(ev.time)
    mean = times[-1] / 100_000
    assert abs(mean - 0.01) < 3e-4


def test_ring_counts_uniform_over_workers():
    # W = 10: each worker within 4 sigma of 10^4 rings out of 10^5
    state = make_state(n=215, alpha=0.43, seed=5)
    assert state.w == 10
    counts = [0] * 10
    for _ in range(100_000):
        ev = step(state)
        counts[ev.worker_id - 1] += 1
    for c in counts:
        assert abs(c - 10_000) <= 400


# -- run_trial contracts ----------------------------------------------------

def test_single_worker_trial_never_doubles():
    cfg = SimConfig(n=2, alpha=0.3, seed=11, quiescence_k=16,
                    quiescence_rho=0.0, rho_sample_interval=10.0)
    summary = run_trial(cfg)
    assert summary.worker_count == 1
    assert summary.stop_reason == "quiescence"
    for m in (2, 3, 4):
        assert not summary.a_m_violation(m)


def test_degenerate_single_line_has_no_skips():
    cfg = SimConfig(n=1, alpha=0.5, seed=13, quiescence_k=8,
                    quiescence_rho=0.0, rho_sample_interval=10.0)
    summary = run_trial(cfg)
    assert summary.skip_count == 0
    assert summary.theta_hat is None
    assert not summary.a_m_violation(2)


def test_trial_determinism_bit_for_bit():
    cfg = dict(n=4096, alpha=0.5, seed=987, quiescence_k=32,
               quiescence_rho=1e-9, rho_sample_interval=5.0)
    a = run_trial(SimConfig(**cfg))
    b = run_trial(SimConfig(**cfg))
    assert a == b


def test_event_conservation_and_stop_reasons():
    cfg = SimConfig(n=256, alpha=0.5, seed=21, quiescence_k=24,
                    quiescence_rho=1e-9, rho_sample_interval=2.0)
    s = run_trial(cfg)
    assert s.advance_count + s.skip_count == s.events
    assert s.stop_reason in ("quiescence", "horizon", "event_cap")
    capped = run_trial(SimConfig(n=256, alpha=0.5, seed=21, max_events=50))
    assert capped.stop_reason == "event_cap"
    assert capped.censored


def test_horizon_stop():
    cfg = SimConfig(n=64, alpha=0.5, seed=2, horizon=1.5, quiescence_k=10**9,
                    rho_sample_interval=0.25)
    s = run_trial(cfg)
    assert s.stop_reason == "horizon"
    assert s.t_end == 1.5
    assert all(t <= 1.5 for t, _ in s.rho_trace)


def test_rho_nondecreasing_and_sigma_consistency():
    cfg = SimConfig(n=512, alpha=0.6, seed=31, quiescence_k=24,
                    quiescence_rho=1e-9, rho_sample_interval=0.5,
                    sigma_thresholds=(0.05, 0.2, 1.0))
    s = run_trial(cfg)
    rhos = [r for _, r in s.rho_trace]
    assert all(b >= a for a, b in zip(rhos, rhos[1:]))
    # recorded sigma_x must not precede any sampled time with rho_t <= x
    for x, hit in s.sigma_hits.items():
        if hit is None:
            continue
        last_low = max((t for t, r in s.rho_trace if r <= x), default=0.0)
        assert hit >= last_low
    # hits are nondecreasing in the threshold
    hits = [s.sigma_hits[x] for x in (0.05, 0.2, 1.0) if s.sigma_hits[x] is not None]
    assert hits == sorted(hits)


def test_cross_line_jumps_only_hit_leftmost_particles():
    # every skip's landing position equals rho-candidate order: checked
    # internally by step(); here we just confirm a busy trial runs clean
    cfg = SimConfig(n=128, alpha=0.7, seed=41, quiescence_k=16,
                    quiescence_rho=1e-9, rho_sample_interval=1.0)
    events = []
    s = run_trial(cfg, event_sink=events.append)
    skips = [e for e in events if e.kind == SKIP]
    assert s.skip_count == len(skips)
    assert all(classify(e) == e.kind for e in events)


def test_settled_lines_counts():
    state = make_state(n=4, alpha=0.5, seed=1)
    assert settled_lines(state, 1) == {}  # nobody has jumped yet
    state.wstreak[:2] = [5, 4]
    state.wline[:2] = [3, 3]
    assert settled_lines(state, 5) == {3: 1}
    assert settled_lines(state, 1) == {3: 2}
    assert sum(settled_lines(state, 4).values()) == sum(
        1 for s in state.wstreak if s >= 4
    )
    with pytest.raises(ValueError):
        settled_lines(state, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=16, alpha=1.5)
    with pytest.raises(ValueError):
        SimConfig(n=16, alpha=0.0)
    with pytest.raises(ValueError):
        SimConfig(n=0, alpha=0.5)
    with pytest.raises(ValueError):
        SimConfig(n=16, alpha=0.5, max_events=0)
    cfg = SimConfig(n=4096, alpha=0.5)
    assert cfg.quiescence_k_effective == math.ceil(math.log(4096) ** 3)
    assert cfg.horizon_effective == pytest.approx(8.0 * 4096 ** 0.8)


def test_streak_milestone_tracking():
    cfg = SimConfig(n=256, alpha=0.5, seed=77, quiescence_k=40,
                    quiescence_rho=1e-9, rho_sample_interval=2.0,
                    streak_milestone=8)
    s = run_trial(cfg)
    assert s.milestone == 8
    assert 0 <= s.milestone_relapsed <= s.milestone_reached <= s.worker_count
