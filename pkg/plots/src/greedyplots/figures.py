"""Figure builders over the simulator's CSV outputs.

Inputs are the exact schemas the greedyclean CLI emits (sweep.csv,
oracle.csv, rho.csv), read-only; a missing or renamed column is a hard
error, never a silent default.  Rendering is deterministic: fixed Agg
backend, fixed style, no timestamps in image metadata.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "greedyplots"

LIMIT_CONSTANT = -1.0 / (2.0 * math.log(2.0))

SWEEP_COLUMNS = ["N", "alpha", "m", "trials", "violation_freq", "wilson_lo",
                 "wilson_hi", "theta_p50", "theta_p95", "mean_skips",
                 "censored_frac"]
ORACLE_COLUMNS = ["x", "P"]
RHO_COLUMNS = ["t", "rho"]


class SchemaError(ValueError):
    """Input file does not match the expected CSV schema."""


def read_rows(path, columns: list[str]) -> list[dict[str, float]]:
    """Parse a CSV with an optional leading comment, demanding the schema."""
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            lines.append(line)
    if not lines:
        raise SchemaError(f"{path}: empty input")
    header = lines[0].strip().split(",")
    if header != columns:
        raise SchemaError(f"{path}: expected columns {columns}, found {header}")
    rows = []
    for record in csv.DictReader(lines[1:], fieldnames=columns):
        if any(v is None for v in record.values()):
            raise SchemaError(f"{path}: short row {record}")
        try:
            rows.append({k: float(v) for k, v in record.items()})
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric field ({exc})")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _save(fig, out_path) -> None:
    out = Path(out_path)
    metadata = {"Date": None} if out.suffix == ".svg" else None
    fig.savefig(out, dpi=120, metadata=metadata)
    plt.close(fig)


def plot_phase_curve(sweep_csv, out_path, title: str = "Settled-doubling frequency") -> None:
    """Violation frequency vs alpha, one series per (N, m), Wilson bands."""
    rows = read_rows(sweep_csv, SWEEP_COLUMNS)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    series: dict[tuple[int, int], list[dict]] = {}
    for row in rows:
        series.setdefault((int(row["N"]), int(row["m"])), []).append(row)
    for (n, m), pts in sorted(series.items()):
        pts.sort(key=lambda r: r["alpha"])
        alphas = [r["alpha"] for r in pts]
        freqs = [r["violation_freq"] for r in pts]
        ax.plot(alphas, freqs, marker="o", label=f"N={n}, m={m}")
        ax.fill_between(alphas, [r["wilson_lo"] for r in pts],
                        [r["wilson_hi"] for r in pts], alpha=0.2)
    for m in sorted({int(r["m"]) for r in rows}):
        critical = (2 * m - 2) / (2 * m - 1)
        ax.axvline(critical, color="gray", linestyle="--", linewidth=0.8)
        ax.annotate(f"(2m-2)/(2m-1), m={m}", (critical, 1.0), fontsize=7,
                    rotation=90, va="top", ha="right", color="gray")
    ax.set_xlabel("alpha")
    ax.set_ylabel("frequency of >= m settled workers sharing a line")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, out_path)


def plot_log_ratio(oracle_csv, out_path, title: str = "Escape tail exponent") -> None:
    """log P(x) / log^2 x against log10 x with the -1/(2 log 2) asymptote."""
    rows = read_rows(oracle_csv, ORACLE_COLUMNS)
    xs, ratios = [], []
    for row in rows:
        x, p = row["x"], row["P"]
        if 0.0 < x < 1.0 and p > 0.0:
            xs.append(math.log10(x))
            ratios.append(math.log(p) / math.log(x) ** 2)
    if not xs:
        raise SchemaError(f"{oracle_csv}: no usable points in (0, 1)")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(xs, ratios, lw=1.2, label="log P(x) / log^2 x")
    ax.axhline(LIMIT_CONSTANT, color="crimson", linestyle="--",
               label=f"limit {LIMIT_CONSTANT:.5f}")
    ax.set_xlabel("log10 x")
    ax.set_ylabel("log P(x) / log^2 x")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, out_path)


def plot_rho(rho_csv, out_path, title: str = "Closest surviving dust") -> None:
    """Step plot of rho over time; rejects non-monotone trajectories."""
    rows = read_rows(rho_csv, RHO_COLUMNS)
    ts = [row["t"] for row in rows]
    rhos = [row["rho"] for row in rows]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise SchemaError(f"{rho_csv}: time column must be nondecreasing")
    if any(b < a for a, b in zip(rhos, rhos[1:])):
        raise SchemaError(f"{rho_csv}: rho must be nondecreasing (dust is only removed)")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.step(ts, rhos, where="post")
    ax.set_xlabel("time")
    ax.set_ylabel("rho")
    ax.set_title(title)
    _save(fig, out_path)
