"""Numerical ground truth for the single-worker escape probability.

The escape probability from a start at x satisfies

    P(x) = int_0^x exp(-y) P(x + y) dy,

with P nondecreasing, P(0) = 0 and P(x) -> 1 as x -> infinity.  The table
is built by fixed-point iteration from the upper solution P_0 = 1, with
the boundary closure P = 1 beyond x_max, so iterates decrease monotonically
to the maximal solution.  Quadrature is composite trapezoid on a hybrid
grid: geometric spacing below a refinement threshold (the integral for
P(x) lives entirely on (x, 2x), so tiny x needs nodes inside that window)
and uniform spacing h above it.  Down to the grid floor the values stay
within double range (P(1e-5) ~ 1e-42), so no log-space accumulation is
needed; evaluation below the floor is refused instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LIMIT_CONSTANT = -1.0 / (2.0 * math.log(2.0))  # -0.721348...


class OracleConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted max_iter above tolerance."""


class OracleRangeError(ValueError):
    """Evaluation requested below the table's accuracy floor."""


@dataclass
class EscapeTable:
    xs: np.ndarray               # grid nodes, ascending, xs[0] == 0
    values: np.ndarray           # P at the nodes
    h: float                     # uniform spacing above refine_below
    x_max: float
    x_min: float                 # smallest positive node; accuracy floor
    refine_below: float
    tol: float
    iterations_used: int
    residual: float
    residual_history: list[float] = field(default_factory=list)

    def to_csv_rows(self):
        for x, p in zip(self.xs, self.values):
            yield float(x), float(p)


def _build_grid(h: float, x_max: float, refine_below: float,
                x_min: float, octave_density: int) -> np.ndarray:
    # geometric nodes refine_below * 2^(-j/q), aligned so doubling maps
    # nodes to nodes within the refined region
    octaves = math.log2(refine_below / x_min)
    j_max = math.ceil(octaves * octave_density)
    geo = refine_below * 2.0 ** (-np.arange(j_max, 0, -1) / octave_density)
    uniform = refine_below + h * np.arange(0, math.floor((x_max - refine_below) / h) + 1)
    if uniform[-1] < x_max - 1e-12 * x_max:
        uniform = np.append(uniform, x_max)
    return np.concatenate(([0.0], geo, uniform)), len(geo)


def _operator_factory(xs: np.ndarray, x_max: float, n_small: int):
    """One application of the quadrature operator, precomputed for the grid.

    In the substituted form P(x) = e^x * int_{x}^{2x} e^{-u} P(u) du (plus
    the closure tail beyond x_max) the integral must not be formed as a
    difference of a forward cumulative: rounding in the cumulative is
    amplified by e^x at the right end and swamps the tiny values at the
    left end.  Instead the tail uses a right-anchored cumulative (rounding
    stays at local scale) and the first n_small nodes, whose integrands
    are far below cumulative roundoff, use direct local window sums.
    """
    n = len(xs)
    dx = np.diff(xs)
    two_x = 2.0 * xs
    cell = np.minimum(np.searchsorted(xs, two_x, side="right") - 1, n - 1)
    beyond = two_x > x_max
    upper = np.where(beyond, x_max, two_x)
    base = xs[cell]
    nxt = np.minimum(cell + 1, n - 1)
    width = np.where(xs[nxt] > base, xs[nxt] - base, 1.0)
    frac = np.clip((upper - base) / width, 0.0, 1.0)
    part = upper - base
    rem = np.maximum(xs[nxt] - upper, 0.0)
    exp_x = np.exp(xs)
    # closure: dust beyond x_max is escaped from with probability one
    tail = np.where(beyond, exp_x * (math.exp(-x_max) - np.exp(-two_x)), 0.0)

    # local trapezoid weights for the small-x window integrals
    flat_idx: list[int] = []
    flat_w: list[float] = []
    starts: list[int] = []
    for j in range(1, n_small):
        starts.append(len(flat_idx))
        k = int(cell[j])
        for i in range(j, k):
            w = 0.5 * (xs[i + 1] - xs[i])
            flat_idx.extend((i, i + 1))
            flat_w.extend((w, w))
        # partial end cell [xs[k], 2x): interpolated endpoint folded into
        # weights on the bracketing nodes
        d = part[j]
        if d > 0.0 and k + 1 < n:
            f = frac[j]
            flat_idx.extend((k, k + 1))
            flat_w.extend((0.5 * d * (2.0 - f), 0.5 * d * f))
    starts.append(len(flat_idx))
    flat_idx_arr = np.array(flat_idx, dtype=np.intp)
    flat_w_arr = np.array(flat_w)
    start_arr = np.array(starts[:-1], dtype=np.intp)

    def apply(values: np.ndarray) -> np.ndarray:
        g = np.exp(-xs) * values
        # right-anchored cumulative: D[i] = int_{xs[i]}^{x_max} g du
        areas = 0.5 * (g[1:] + g[:-1]) * dx
        d_cum = np.zeros(n)
        d_cum[:-1] = areas[::-1].cumsum()[::-1]
        g_up = g[cell] + (g[nxt] - g[cell]) * frac
        d_at_upper = d_cum[nxt] + 0.5 * (g_up + g[nxt]) * rem
        d_at_upper[beyond] = 0.0
        out = exp_x * (d_cum - d_at_upper) + tail
        if len(start_arr):
            local = np.add.reduceat(g[flat_idx_arr] * flat_w_arr, start_arr)
            out[1:n_small] = exp_x[1:n_small] * local
        out[0] = 0.0
        return np.minimum(out, 1.0)

    return apply


def solve_P1(h: float = 1e-3, x_max: float = 30.0, tol: float = 1e-10,
             max_iter: int = 400, *, refine_below: float = 0.05,
             x_min: float = 1e-5, octave_density: int = 32) -> EscapeTable:
    """Solve the escape integral equation on [0, x_max]."""
    if h <= 0:
        raise ValueError("h must be positive")
    if x_max < 10:
        raise ValueError("x_max must be at least 10")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < x_min < refine_below < x_max:
        raise ValueError("need 0 < x_min < refine_below < x_max")

    xs, n_geo = _build_grid(h, x_max, refine_below, x_min, octave_density)
    apply_op = _operator_factory(xs, x_max, n_geo + 1)
    values = np.ones(len(xs))
    values[0] = 0.0
    history: list[float] = []
    for iteration in range(1, max_iter + 1):
        updated = apply_op(values)
        residual = float(np.max(np.abs(updated - values)))
        history.append(residual)
        values = updated
        if residual < tol:
            # iron out quadrature-scale wiggles at the closure boundary; a
            # real monotonicity defect would exceed this and is a bug
            enforced = np.minimum.accumulate(values[::-1])[::-1]
            if float(np.max(values - enforced)) > 10.0 * tol + h * h:
                raise OracleConvergenceError("table monotonicity broken beyond roundoff")
            return EscapeTable(xs, enforced, h, x_max, x_min, refine_below,
                               tol, iteration, residual, history)
    raise OracleConvergenceError(
        f"no convergence in {max_iter} iterations; last residual {history[-1]:.3e}"
    )


def operator_defect(table: EscapeTable) -> float:
    """Sup-norm defect of the table under one more operator application."""
    n_small = int(np.searchsorted(table.xs, table.refine_below)) + 1
    apply_op = _operator_factory(table.xs, table.x_max, n_small)
    return float(np.max(np.abs(apply_op(table.values) - table.values)))


def eval_P1(table: EscapeTable, x: float) -> float:
    """Linear interpolation on the grid; 1 beyond x_max."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x > table.x_max:
        return 1.0
    return float(np.interp(x, table.xs, table.values))


def log_ratio(table: EscapeTable, x: float) -> float:
    """log P(x) / log^2 x, the quantity converging to -1/(2 log 2)."""
    if not 0.0 < x < 1.0:
        raise ValueError("log_ratio needs 0 < x < 1")
    if x < table.x_min:
        raise OracleRangeError(
            f"x={x:g} is below the table floor {table.x_min:g}; "
            "rebuild with a smaller x_min"
        )
    p = eval_P1(table, x)
    if p <= 0.0:
        raise OracleRangeError(f"P({x:g}) underflowed; rebuild with finer grid")
    return math.log(p) / math.log(x) ** 2


def write_csv(table: EscapeTable, path, config_echo: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if config_echo:
            fh.write(f"# {config_echo}\n")
        fh.write("x,P\n")
        for x, p in table.to_csv_rows():
            fh.write(f"{x!r},{p!r}\n")
