"""Command-line entry point with reproducible, machine-readable outputs.

Every command is a pure function of its arguments and seed: reruns write
byte-identical files (config echoes carry no timestamps, floats print as
shortest round-trip reprs, and trial scheduling never influences output
order).  Exit codes: 0 ok, 2 bad configuration, 3 result-quality failure
(censoring or non-convergence), 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dynamics, oracle, singleline, stats
from .env import EnvCorruptionError

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUALITY = 3
EXIT_INTERNAL = 4


def _default_seed() -> int:
    return int(os.environ.get("GC_SEED", "0"))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _echo(command: str, args: argparse.Namespace, keys: list[str]) -> str:
    parts = [f"command={command}", f"schema_version={SCHEMA_VERSION}"]
    parts.extend(f"{key}={getattr(args, key)!r}" for key in sorted(keys))
    return "config: " + " ".join(parts)


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _sim_config(args: argparse.Namespace) -> dynamics.SimConfig:
    return dynamics.SimConfig(
        n=args.n,
        alpha=args.alpha,
        seed=args.seed,
        horizon=args.horizon,
        quiescence_k=args.quiescence_k,
        quiescence_rho=args.quiescence_rho,
        sigma_thresholds=args.sigma_thresholds,
        rho_sample_interval=args.rho_interval,
        max_events=args.max_events,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _sim_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo_keys = ["n", "alpha", "seed", "horizon", "quiescence_k", "quiescence_rho",
                 "sigma_thresholds", "rho_interval", "max_events"]
    echo = _echo("simulate", args, echo_keys)

    sink = None
    events_fh = None
    if args.emit_events:
        events_fh = open(out / "events.csv", "w", newline="")
        events_fh.write(f"# {echo}\n{dynamics.EVENT_CSV_HEADER}\n")

        def sink(ev):
            events_fh.write(f"{ev.time!r},{ev.worker_id},{ev.from_line},"
                            f"{ev.from_pos!r},{ev.to_line},{ev.to_pos!r},{ev.kind}\n")

    try:
        summary = dynamics.run_trial(config, event_sink=sink)
    finally:
        if events_fh is not None:
            events_fh.close()

    stats.write_rho_csv(summary.rho_trace, out / "rho.csv", config_echo=echo)
    m_values = args.m or (2, 3, 4)
    payload = {
        "config": {
            "n": config.n, "alpha": config.alpha, "seed": config.seed,
            "horizon": config.horizon_effective,
            "quiescence_k": summary.quiescence_k,
            "quiescence_rho": summary.quiescence_rho,
            "sigma_thresholds": list(config.sigma_thresholds),
            "rho_sample_interval": config.rho_sample_interval,
            "max_events": config.max_events,
        },
        "worker_count": summary.worker_count,
        "stop_reason": summary.stop_reason,
        "t_end": summary.t_end,
        "events": summary.events,
        "skip_count": summary.skip_count,
        "advance_count": summary.advance_count,
        "theta_hat": summary.theta_hat,
        "sigma_hits": {repr(x): t for x, t in summary.sigma_hits.items()},
        "a_m_violation": {str(m): summary.a_m_violation(m) for m in m_values},
        "settled_multiplicities": {str(k): v for k, v
                                   in sorted(summary.settled_multiplicities.items())},
        "unsettled_count": summary.unsettled_count,
        "rho_final": summary.rho_final,
    }
    _write_json(out / "summary.json", payload)
    return EXIT_QUALITY if summary.censored else EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = stats.SweepSpec(
        n_values=args.n,
        alpha_values=args.alpha,
        trials=args.trials,
        root_seed=args.seed,
        m_values=args.m or (2, 3),
        config_overrides=_sweep_overrides(args),
    )
    cells = stats.run_sweep(spec, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo = _echo("sweep", args, ["n", "alpha", "m", "trials", "seed", "horizon",
                                 "quiescence_k", "quiescence_rho", "max_events"])
    stats.write_sweep_csv(cells, out / "sweep.csv", config_echo=echo)
    return EXIT_QUALITY if any(cell.unreliable for cell in cells) else EXIT_OK


def _sweep_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.quiescence_k is not None:
        overrides["quiescence_k"] = args.quiescence_k
    if args.quiescence_rho is not None:
        overrides["quiescence_rho"] = args.quiescence_rho
    if args.sigma_thresholds is not None:
        overrides["sigma_thresholds"] = args.sigma_thresholds
    if args.rho_interval is not None:
        overrides["rho_sample_interval"] = args.rho_interval
    if args.max_events is not None:
        overrides["max_events"] = args.max_events
    return overrides


def cmd_singleline(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    worst_censoring = 0.0
    for x in args.x:
        config = singleline.at_same_point(
            x, args.k, escape_barrier=args.barrier, max_jumps=args.max_jumps)
        est = singleline.estimate_Pk(config, args.trials, args.seed)
        worst_censoring = max(worst_censoring, est.censored_fraction)
        results.append({
            "x": x, "k": args.k, "trials": args.trials,
            "p_hat": est.p_hat, "stderr": est.stderr,
            "p_low": est.p_low, "p_high": est.p_high,
            "censored_fraction": est.censored_fraction,
        })
    payload = {
        "config": {"k": args.k, "x": list(args.x), "trials": args.trials,
                   "seed": args.seed, "barrier": args.barrier,
                   "max_jumps": args.max_jumps},
        "results": results,
    }
    if args.delta is not None:
        p_hat, stderr = singleline.estimate_nonblocking_prob(
            args.k, args.delta, args.trials, args.seed)
        payload["nonblocking"] = {
            "delta": args.delta, "trials": args.trials,
            "p_hat": p_hat, "stderr": stderr,
            "willwriteit_bound_gamma_0.1": singleline.willwriteit_bound(
                args.k, args.delta, 0.1),
        }
    _write_json(out / "singleline.json", payload)
    return EXIT_QUALITY if worst_censoring > 0.2 else EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        table = oracle.solve_P1(h=args.h, x_max=args.x_max, tol=args.tol)
    except oracle.OracleConvergenceError as exc:
        print(f"oracle failed to converge: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo = _echo("oracle", args, ["h", "x_max", "tol", "seed"])
    oracle.write_csv(table, out / "oracle.csv", config_echo=echo)
    return EXIT_OK


def cmd_envcheck(args: argparse.Namespace) -> int:
    reports = [
        stats.env_regularity(n, args.trials, args.seed, alpha=args.alpha_scale,
                             jobs=args.jobs)
        for n in args.n
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo = _echo("envcheck", args, ["n", "trials", "seed", "alpha_scale"])
    stats.write_env_csv(reports, out / "env.csv", config_echo=echo)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyclean",
        description="Greedy cleaners on Poisson-dusted halflines: simulation and oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one trial")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--alpha", type=float, required=True)
    sim.add_argument("--seed", type=int, default=_default_seed())
    sim.add_argument("--horizon", type=float, default=None)
    sim.add_argument("--quiescence-k", type=int, default=None)
    sim.add_argument("--quiescence-rho", type=float, default=1.0)
    sim.add_argument("--sigma-thresholds", type=_floats, default=(1.0,))
    sim.add_argument("--rho-interval", type=float, default=1.0)
    sim.add_argument("--max-events", type=int, default=10_000_000)
    sim.add_argument("--m", type=_ints, default=None)
    sim.add_argument("--emit-events", action="store_true")
    sim.add_argument("--out", default=".")
    sim.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep", help="trial sweep over (N, alpha) cells")
    sweep.add_argument("--n", type=_ints, required=True)
    sweep.add_argument("--alpha", type=_floats, required=True)
    sweep.add_argument("--m", type=_ints, default=None)
    sweep.add_argument("--trials", type=int, required=True)
    sweep.add_argument("--seed", type=int, default=_default_seed())
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--horizon", type=float, default=None)
    sweep.add_argument("--quiescence-k", type=int, default=None)
    sweep.add_argument("--quiescence-rho", type=float, default=None)
    sweep.add_argument("--sigma-thresholds", type=_floats, default=None)
    sweep.add_argument("--rho-interval", type=float, default=None)
    sweep.add_argument("--max-events", type=int, default=None)
    sweep.add_argument("--out", default=".")
    sweep.set_defaults(func=cmd_sweep)

    single = sub.add_parser("singleline", help="single-halfline escape estimates")
    single.add_argument("--k", type=int, required=True)
    single.add_argument("--x", type=_floats, required=True)
    single.add_argument("--trials", type=int, required=True)
    single.add_argument("--seed", type=int, default=_default_seed())
    single.add_argument("--barrier", type=float, default=30.0)
    single.add_argument("--max-jumps", type=int, default=100_000)
    single.add_argument("--delta", type=float, default=None,
                        help="also estimate the non-blocking probability")
    single.add_argument("--out", default=".")
    single.set_defaults(func=cmd_singleline)

    orc = sub.add_parser("oracle", help="solve the escape integral equation")
    orc.add_argument("--h", type=float, default=1e-3)
    orc.add_argument("--x-max", type=float, default=30.0)
    orc.add_argument("--tol", type=float, default=1e-10)
    orc.add_argument("--seed", type=int, default=_default_seed())
    orc.add_argument("--out", default=".")
    orc.set_defaults(func=cmd_oracle)

    env = sub.add_parser("envcheck", help="environment regularity frequencies")
    env.add_argument("--n", type=_ints, required=True)
    env.add_argument("--trials", type=int, required=True)
    env.add_argument("--seed", type=int, default=_default_seed())
    env.add_argument("--alpha-scale", type=float, default=0.5)
    env.add_argument("--jobs", type=int, default=1)
    env.add_argument("--out", default=".")
    env.set_defaults(func=cmd_envcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError,) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnvCorruptionError, RuntimeError) as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
