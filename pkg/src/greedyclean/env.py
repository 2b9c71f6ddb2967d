"""Lazily revealed rate-1 Poisson dust on N halflines.

Each halfline carries a unit-rate Poisson process of dust particles,
revealed left to right on demand: by the Markov property of Poisson
processes, drawing fresh Exponential(1) gaps beyond the revealed frontier
realizes the same law as the full process conditioned on everything seen
so far.  Surviving particles are kept sorted per line, and a lazy
min-priority index over the lines' leftmost particles answers global
nearest-particle queries; stale heap entries are discarded on query.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from heapq import heapify, heappop, heappush

from .seeds import ExpStream, derive_seed


class EnvCorruptionError(RuntimeError):
    """Internal state no longer satisfies an invariant; not recoverable."""


class DustLine:
    """One halfline: sorted surviving particles plus the revealed frontier."""

    __slots__ = ("line_id", "particles", "frontier", "removed_count", "gaps")

    def __init__(self, line_id: int, gaps):
        self.line_id = line_id
        self.particles: list[float] = []
        self.frontier = 0.0
        self.removed_count = 0
        self.gaps = gaps

    def reveal_one(self) -> float:
        pos = self.frontier + self.gaps.next()
        self.particles.append(pos)
        self.frontier = pos
        return pos

    def extend(self, up_to: float) -> None:
        """Reveal dust until the frontier passes up_to.

        Stops at the first particle strictly beyond up_to, which is
        retained so a successor query at up_to does not re-extend.
        No-op when the frontier is already at or past up_to.
        """
        while self.frontier < up_to:
            self.reveal_one()


class Env:
    """N dust lines plus a lazy heap over their leftmost particles."""

    __slots__ = ("n", "lines", "_heap")

    def __init__(self, n: int, lines: list[DustLine]):
        self.n = n
        self.lines = lines  # 1-based: lines[0] is None
        self._heap = [(line.particles[0], line.line_id) for line in lines[1:]]
        heapify(self._heap)

    # -- queries ---------------------------------------------------------

    def _clean_top(self) -> tuple[float, int]:
        heap = self._heap
        while True:
            pos, lid = heap[0]
            particles = self.lines[lid].particles
            if particles and particles[0] == pos:
                return pos, lid
            heappop(heap)

    def rho(self) -> float:
        """Distance from the origin to the closest surviving particle."""
        return self._clean_top()[0]

    def global_min_leftmost(self, exclude: int | None = None) -> tuple[int, float]:
        """Line with the minimal leftmost particle, ties to smaller line id."""
        pos, lid = self._clean_top()
        if exclude is None or lid != exclude:
            return lid, pos
        if self.n < 2:
            raise ValueError("exclude requires at least two lines")
        held = heappop(self._heap)
        pos2, lid2 = self._clean_top()
        heappush(self._heap, held)
        return lid2, pos2

    def successor(self, line_id: int, x: float) -> float:
        """Smallest surviving particle strictly greater than x on the line."""
        line = self.lines[line_id]
        particles = line.particles
        i = bisect_right(particles, x)
        if i == len(particles):
            line.extend(x)
            while i == len(particles):
                line.reveal_one()
        return particles[i]

    def predecessor(self, line_id: int, x: float) -> float | None:
        """Largest surviving particle strictly below x, or None."""
        line = self.lines[line_id]
        if x > line.frontier:
            line.extend(x)
        i = bisect_left(line.particles, x)
        return line.particles[i - 1] if i > 0 else None

    # -- mutations -------------------------------------------------------

    def remove_at(self, line_id: int, index: int) -> None:
        line = self.lines[line_id]
        line.particles.pop(index)
        line.removed_count += 1
        if index == 0:
            if not line.particles:
                # keep every line's revealed set nonempty so the leftmost
                # index never has to consult a hidden particle
                line.reveal_one()
            heappush(self._heap, (line.particles[0], line_id))

    def remove(self, line_id: int, pos: float) -> None:
        particles = self.lines[line_id].particles
        i = bisect_left(particles, pos)
        if i == len(particles) or particles[i] != pos:
            raise EnvCorruptionError(
                f"particle {pos!r} not present on line {line_id}"
            )
        self.remove_at(line_id, i)

    def check_invariants(self) -> None:
        """Assert sorted order and heap coverage; for tests on small instances."""
        for line in self.lines[1:]:
            particles = line.particles
            if not particles:
                raise EnvCorruptionError(f"line {line.line_id} has no revealed dust")
            if any(b < a for a, b in zip(particles, particles[1:])):
                raise EnvCorruptionError(f"line {line.line_id} is out of order")
            if particles[-1] > line.frontier:
                raise EnvCorruptionError(f"line {line.line_id} beyond its frontier")
            if particles[0] <= 0.0:
                raise EnvCorruptionError(f"line {line.line_id} has nonpositive dust")
        covered = {
            lid for pos, lid in self._heap
            if self.lines[lid].particles and self.lines[lid].particles[0] == pos
        }
        if len(covered) != self.n:
            raise EnvCorruptionError("leftmost heap does not cover every line")


def init_env(n: int, env_seed: int) -> Env:
    """Fresh environment with the first particle of every line revealed."""
    if n < 1:
        raise ValueError("environment needs at least one halfline")
    lines: list[DustLine | None] = [None]
    for lid in range(1, n + 1):
        line = DustLine(lid, ExpStream(derive_seed(env_seed, "line", lid)))
        line.reveal_one()
        lines.append(line)
    return Env(n, lines)


def env_from_gaps(gap_lists: dict[int, list[float]]) -> Env:
    """Environment with scripted per-line gaps (tests only)."""
    from .seeds import ListStream

    n = len(gap_lists)
    lines: list[DustLine | None] = [None]
    for lid in range(1, n + 1):
        line = DustLine(lid, ListStream(gap_lists[lid]))
        line.reveal_one()
        lines.append(line)
    return Env(n, lines)


# module-level function forms, matching the operation surface

def extend(env: Env, line_id: int, up_to: float) -> None:
    env.lines[line_id].extend(up_to)


def successor(env: Env, line_id: int, x: float) -> float:
    return env.successor(line_id, x)


def predecessor(env: Env, line_id: int, x: float) -> float | None:
    return env.predecessor(line_id, x)


def remove(env: Env, line_id: int, pos: float) -> None:
    env.remove(line_id, pos)


def global_min_leftmost(env: Env, exclude: int | None = None) -> tuple[int, float]:
    return env.global_min_leftmost(exclude)
