"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 Picard divergence or
non-convergence, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .conditions import search_feasible
from .config import ConfigError, load
from .generator import integrability_check, lipschitz_audit
from .scheme import TerminalCompatibilityError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("rbdsde")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve(args):
    cfg = load(args.config, seed=args.seed, threads=args.threads)
    return cfg, experiments.run(cfg)


def _status(res) -> int:
    if res.diagnostics.diverged or not res.diagnostics.converged:
        how = "diverged" if res.diagnostics.diverged else "did not converge"
        print(f"picard iteration {how}: distances {res.diagnostics.distances}", file=sys.stderr)
        return EXIT_DIVERGED
    if not res.audit["passed"]:
        print("invariant violation: " + ", ".join(res.audit["violations"]), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, res = _solve(args)
    out = _out_dir(args)
    _write_json(out / "conditions.json", res.conditions.to_dict())
    _write_json(out / "summary.json", res.summary)
    (out / "per_time.csv").write_text(experiments.per_time_csv(res))
    _write_json(out / "audit.json", res.audit)
    s = res.summary
    print(f"Y0 = {s['Y0_mean']:.6g} +/- {s['Y0_stderr']:.3g}, K_T = {s['K_T_mean']:.6g}, "
          f"iterations = {s['iterations']}")
    return _status(res)


def cmd_check_conditions(args) -> int:
    cfg = load(args.config, seed=args.seed, threads=args.threads)
    report = experiments.conditions_for(cfg)
    payload = {"configured": report.to_dict()}
    if args.search:
        payload["best_on_grid"] = search_feasible(cfg.generator.L, cfg.generator.alpha, cfg.ensemble.T,
                                                  cfg.measure, cfg.constants.C_hat).to_dict()
    _write_json(_out_dir(args) / "conditions.json", payload)
    print(report.format_text())
    return EXIT_OK


def cmd_convergence_study(args) -> int:
    cfg = load(args.config, seed=args.seed, threads=args.threads)
    seeds = [args.seed] if args.seed is not None else cfg.study.seeds
    rows = experiments.convergence_study(cfg, cfg.study.N, cfg.study.M, seeds, timing=args.timing)
    (_out_dir(args) / "convergence.csv").write_text(experiments.rows_to_csv(rows))
    print(experiments.rows_to_csv(rows), end="")
    return EXIT_OK


def cmd_compare_oracle(args) -> int:
    cfg, res = _solve(args)
    cmp = experiments.compare(res, cfg)
    _write_json(_out_dir(args) / "oracle_comparison.json", cmp)
    print(json.dumps(cmp, indent=2, sort_keys=True))
    return _status(res)


def cmd_audit(args) -> int:
    cfg, res = _solve(args)
    lip = lipschitz_audit(cfg.spec, res.problem.measure, seed=cfg.ensemble.seed)
    integ = integrability_check(cfg.spec, res.solution.Y, res.solution.Z, res.problem.measure,
                                res.problem.ensemble.dt)
    payload = dict(res.audit, lipschitz=lip.to_dict(), integrability=integ.to_dict())
    passed = res.audit["passed"] and lip.passed and integ.passed
    payload["passed"] = passed
    _write_json(_out_dir(args) / "audit.json", payload)
    print(f"lipschitz {'ok' if lip.passed else 'FAILED'} (max ratio {lip.max_ratio:.4g}), "
          f"integrability {'ok' if integ.passed else 'FAILED'}, "
          f"invariants {'ok' if res.audit['passed'] else 'FAILED'}")
    if not passed:
        return EXIT_INVARIANT
    return _status(res)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbdsde", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    commands = {
        "run": (cmd_run, "solve and write conditions, summary, per-time table and audit"),
        "check-conditions": (cmd_check_conditions, "evaluate the smallness constants"),
        "convergence-study": (cmd_convergence_study, "errors against the oracle over N, M and seeds"),
        "compare-oracle": (cmd_compare_oracle, "solve and compare with the configured oracle"),
        "audit": (cmd_audit, "Lipschitz, integrability and invariant audit"),
    }
    for name, (fn, help_) in commands.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
        sp.add_argument("--out-dir", default="out", help="directory for output files")
        sp.add_argument("--threads", type=int, default=None, help="override ensemble.threads")
        if name == "convergence-study":
            sp.add_argument("--timing", action="store_true", help="add a runtime_s column")
        if name == "check-conditions":
            sp.add_argument("--search", action="store_true", help="also report the best grid point")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TerminalCompatibilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
