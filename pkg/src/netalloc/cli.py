"""Command line entry point.

Subcommands:
    simulate   one algorithm over its Monte Carlo realizations; writes
               trajectory.csv and summary.csv
    compare    algorithm sweep under common random numbers; writes
               comparison_summary.csv
    oracle     sample-average dual solve plus structural certificates;
               writes oracle_report.txt
    validate   built-in invariant suites; exit code 2 on any failure

Exit codes: 0 success, 2 validation failure, 1 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .harness import ConfigError, SimulationConfig, compare, emit_trajectory_csv, \
    monte_carlo, parse_config, write_summary_csv
from .oracle import reference_dual_solution, verify_structural_constants, write_oracle_report
from .scenario import build_geo_load_balancing
from .validate import run_validation


def _load_config(args) -> SimulationConfig:
    cfg = parse_config(args.config) if args.config else SimulationConfig()
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if args.out is not None:
        overrides["out_dir"] = args.out
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _out_dir(cfg: SimulationConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    record, trajectories = monte_carlo(cfg, keep_trajectories=True)
    emit_trajectory_csv(trajectories, out / "trajectory.csv",
                        node_queues=cfg.record_node_queues)
    write_summary_csv([record], out / "summary.csv")
    print(f"{cfg.algo}: steady cost {record.steady_cost:.6g} "
          f"(+/- {record.steady_cost_halfwidth:.3g}), "
          f"steady queue {record.steady_queue:.6g} "
          f"(+/- {record.steady_queue_halfwidth:.3g})")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'summary.csv'}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    records = compare(cfg)
    write_summary_csv(records, out / "comparison_summary.csv")
    for rec in records:
        label = rec.algo if rec.algo != "heavy_ball" else f"heavy_ball(beta={rec.beta})"
        print(f"mu={rec.mu:<6g} {label:<22s} cost {rec.steady_cost:12.6g}  "
              f"queue {rec.steady_queue:12.6g}")
    print(f"wrote {out / 'comparison_summary.csv'}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    scenario = build_geo_load_balancing(cfg.scenario)
    report, dist = reference_dual_solution(
        scenario, count=cfg.oracle_samples,
        seed=cfg.oracle_seed if args.seed is None else args.seed,
        tol=cfg.oracle_tol)
    write_oracle_report(report, out / "oracle_report.txt")
    structural = verify_structural_constants(dist, scenario.graph, scenario.box,
                                             report.lam_star, seed=cfg.oracle_seed, pairs=50)
    print(f"dual optimum {report.dual_optimum:.8g} after {report.iterations} iterations "
          f"({report.sample_count} samples, KKT residual {report.kkt_residual:.3e}, "
          f"{report.clip_events} clip events)")
    print(f"sigma {report.sigma:.6g}, rho(A^T A) {report.spectral_radius:.6g}, "
          f"dual smoothness {report.dual_smoothness:.6g}")
    print(f"sampled Lipschitz ratio {structural.max_lipschitz_ratio:.6g} "
          f"(bound {structural.smoothness_bound:.6g}, ok={structural.smoothness_ok}), "
          f"quadratic growth {structural.quadratic_growth:.3e}")
    print(f"wrote {out / 'oracle_report.txt'}")
    return 0


def cmd_validate(args) -> int:
    cfg = parse_config(args.config) if args.config else None
    results = run_validation(cfg)
    failed = 0
    for res in results:
        mark = "ok" if res.ok else "FAIL"
        print(f"[{mark:>4}] {res.name}: {res.detail}")
        failed += 0 if res.ok else 1
    if failed:
        print(f"{failed} of {len(results)} suites failed")
        return 2
    print(f"all {len(results)} suites passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netalloc",
                                     description="Online network resource allocation testbed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("compare", cmd_compare),
                     ("oracle", cmd_oracle), ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--horizon", type=int, default=None, help="override slot count")
        p.add_argument("--realizations", type=int, default=None, help="override realization count")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
