"""Config-driven runs: solve, summarise, audit, compare with oracles, convergence studies.

Everything returned here is a deterministic function of the config and seed;
wall-clock time is only added when explicitly requested.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .conditions import ConditionReport, check_all
from .config import ConfigError, ExperimentConfig, constant_g, delay_lag
from .delay_measure import fubini_sides
from .estimates import apriori_for, skorokhod_residual
from .oracles import backward_integral_reference, delay_ode_closed_form, delay_ode_reference, \
    martingale_reference, snell_reference
from .paths import PathEnsemble, simulate
from .picard import PicardDiagnostics, Problem, solve
from .scheme import SolutionTriple, invariant_violations

_FUBINI_RTOL = 1e-12


@dataclass
class RunResult:
    problem: Problem
    solution: SolutionTriple
    diagnostics: PicardDiagnostics
    conditions: ConditionReport
    summary: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)

    @property
    def Y0(self) -> float:
        return self.summary["Y0_mean"]


def conditions_for(cfg: ExperimentConfig) -> ConditionReport:
    c = cfg.constants
    return check_all(c.beta, c.theta, c.epsilon, cfg.generator.L, cfg.generator.alpha,
                     cfg.ensemble.T, cfg.measure, c.C_hat)


def cash_flow(problem: Problem, sol: SolutionTriple) -> np.ndarray:
    """Pathwise ``xi + sum F dt + sum G dB + K_N`` with integrands along the returned iterate.

    With a constant regression feature its sample mean equals the mean of
    ``Y_0`` for the inputs of the final solve, so its spread gives the
    Monte Carlo error band of the initial value.
    """
    ens = problem.ensemble
    F, G = problem.integrands(sol.Y, sol.Z)
    return (problem.xi + np.sum(F[:, :-1], axis=1) * ens.dt + np.sum(G[:, 1:] * ens.dB, axis=1)
            + sol.K[:, -1])


def summarize(problem: Problem, sol: SolutionTriple, diag: PicardDiagnostics) -> dict:
    M = problem.ensemble.M
    pi = cash_flow(problem, sol)
    sigma = float(np.std(pi, ddof=1)) if M > 1 else 0.0
    return {
        "Y0_mean": float(np.mean(sol.Y[:, 0])),
        "Y0_stderr": float(sigma / np.sqrt(M)),
        "K_T_mean": float(np.mean(sol.K[:, -1])),
        "iterations": diag.iterations,
        "ratios": diag.ratios,
        "distances": diag.distances,
        "converged": diag.converged,
        "diverged": diag.diverged,
        "M": M,
        "N": problem.ensemble.N,
        "seed": problem.ensemble.seed,
    }


def audit_solution(problem: Problem, sol: SolutionTriple) -> dict:
    """Invariant audit: solution-triple checks, Skorokhod residual and the discrete Fubini bound."""
    dt, beta = problem.ensemble.dt, problem.beta
    failed = invariant_violations(sol, problem.xi, beta, dt)
    resid = skorokhod_residual(sol, problem.S, beta, dt)
    fubini = {}
    for name, x in (("Y", sol.Y[:, :-1]), ("Z", sol.Z)):
        lhs, rhs = fubini_sides(x, problem.measure, beta, dt)
        excess = float(np.max(lhs - rhs * (1 + _FUBINI_RTOL)))
        fubini[name] = excess
        if excess > 0:
            failed.append(f"Fubini inequality ({name})")
    obstacle_gap = None if problem.S is None else float(np.min(sol.Y - problem.S))
    return {
        "passed": not failed,
        "violations": failed,
        "skorokhod_residual_max": float(np.max(resid)),
        "min_Y_minus_S": obstacle_gap,
        "min_dK": float(np.min(sol.dK)) if sol.dK.size else 0.0,
        "terminal_mismatch_max": float(np.max(np.abs(sol.Y[:, -1] - problem.xi))),
        "fubini_excess": fubini,
    }


def ensemble_for(cfg: ExperimentConfig) -> PathEnsemble:
    e = cfg.ensemble
    return simulate(e.M, e.N, e.T, e.seed, e.threads)


def run(cfg: ExperimentConfig, ensemble: PathEnsemble | None = None) -> RunResult:
    ensemble = ensemble_for(cfg) if ensemble is None else ensemble
    try:
        problem = cfg.problem(ensemble)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sol, diag = solve(problem, cfg.solver.tol, cfg.solver.max_iter)
    res = RunResult(problem, sol, diag, conditions_for(cfg))
    res.summary = summarize(problem, sol, diag)
    res.audit = audit_solution(problem, sol)
    res.audit["apriori"] = apriori_for(problem, sol).to_dict()
    return res


def per_time_csv(res: RunResult) -> str:
    sol, t = res.solution, res.problem.ensemble.times
    Zp = np.concatenate([sol.Z, sol.Z[:, -1:]], axis=1)  # Z at t_N held at Z_{N-1}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mean_Y", "std_Y", "mean_Z", "mean_K"])
    for i in range(t.size):
        w.writerow([repr(float(t[i])), repr(float(np.mean(sol.Y[:, i]))), repr(float(np.std(sol.Y[:, i]))),
                    repr(float(np.mean(Zp[:, i]))), repr(float(np.mean(sol.K[:, i])))])
    return buf.getvalue()


def _pathwise_reference(cfg: ExperimentConfig, ens: PathEnsemble):
    if cfg.oracle.kind == "martingale":
        return martingale_reference(ens)
    if cfg.oracle.kind == "backward_integral":
        return backward_integral_reference(ens, constant_g(cfg))
    return None


def oracle_values(cfg: ExperimentConfig, ens: PathEnsemble) -> dict:
    """Reference initial value and, where available, a node-wise reference mean path."""
    kind = cfg.oracle.kind
    T, t = cfg.ensemble.T, ens.times
    if kind in ("martingale", "backward_integral"):
        Yref, _ = _pathwise_reference(cfg, ens)
        return {"Y0_ref": float(np.mean(Yref[:, 0])), "pathwise": Yref}
    if kind == "delay_ode":
        a, lag = cfg.spec.f.a, delay_lag(cfg)
        xi0 = float(cfg.terminal_spec.of(0.0))
        dense = delay_ode_reference(a, -lag, T, xi0, cfg.oracle.dense_N)
        return {"Y0_ref": delay_ode_closed_form(a, -lag, T, xi0, 0.0), "Y0_dense": dense.initial,
                "mean_path": delay_ode_closed_form(a, -lag, T, xi0, t)}
    if kind == "snell":
        ref = snell_reference(cfg.obstacle_spec, cfg.terminal_spec, T)
        out = {"Y0_ref": ref.Y0, "tree_agreement": ref.agreement}
        if ref.table is not None:
            out["mean_path"] = ref.table.at(t)
            out["K_T_ref"] = float(ref.table.extras["K"][-1])
        return out
    raise ConfigError("oracle.kind = 'none': this problem has no oracle")


def compare(res: RunResult, cfg: ExperimentConfig) -> dict:
    ref = oracle_values(cfg, res.problem.ensemble)
    sol = res.solution
    out = {"kind": cfg.oracle.kind, "Y0": res.Y0, "Y0_stderr": res.summary["Y0_stderr"],
           "Y0_ref": ref["Y0_ref"], "Y0_error": abs(res.Y0 - ref["Y0_ref"])}
    for key in ("Y0_dense", "tree_agreement", "K_T_ref"):
        if key in ref:
            out[key] = ref[key]
    if "pathwise" in ref:
        d = sol.Y - ref["pathwise"]
        out["max_node_mse"] = float(np.max(np.mean(d * d, axis=0)))
        out["path_rmse_max"] = float(np.max(np.sqrt(np.mean(d * d, axis=1))))
        out["Z_mean"] = float(np.mean(sol.Z))
    if "mean_path" in ref:
        out["max_mean_path_error"] = float(np.max(np.abs(np.mean(sol.Y, axis=0) - ref["mean_path"])))
    if "K_T_ref" in ref:
        out["K_T_error"] = abs(res.summary["K_T_mean"] - ref["K_T_ref"])
    return out


STUDY_COLUMNS = ["N", "M", "seed", "Y0", "Y0_ref", "Y0_error", "path_rmse_max", "iterations"]


def convergence_study(cfg: ExperimentConfig, N_list, M_list, seeds, timing: bool = False) -> list[dict]:
    """Errors against the oracle for every ``(N, M, seed)``.

    For each seed one ensemble is simulated at the largest ``N`` and ``M``;
    coarser grids sum its increments and smaller ``M`` take its first paths, so
    rows differ by resolution only, not by noise.
    """
    if cfg.oracle.kind == "none":
        raise ConfigError("oracle.kind: convergence-study needs an oracle-backed problem")
    for name, lst in (("study.N", N_list), ("study.M", M_list), ("study.seeds", seeds)):
        if not lst:
            raise ConfigError(f"{name} is empty")
    N_max, M_max = max(N_list), max(M_list)
    if any(n < 1 or N_max % n for n in N_list):
        raise ConfigError(f"study.N: every entry must divide the largest ({N_max}), got {list(N_list)}")
    if any(m < 1 for m in M_list):
        raise ConfigError(f"study.M: entries must be positive, got {list(M_list)}")
    rows = []
    for seed in seeds:
        fine = simulate(M_max, N_max, cfg.ensemble.T, seed, cfg.ensemble.threads)
        for N in N_list:
            coarse = fine.coarsened(N)
            for M in M_list:
                ens = coarse.head(M)
                t0 = time.perf_counter()
                res = run(cfg, ens)
                elapsed = time.perf_counter() - t0
                cmp = compare(res, cfg)
                row = {"N": N, "M": M, "seed": seed, "Y0": cmp["Y0"], "Y0_ref": cmp["Y0_ref"],
                       "Y0_error": cmp["Y0_error"], "path_rmse_max": cmp.get("path_rmse_max", ""),
                       "iterations": res.diagnostics.iterations}
                if timing:
                    row["runtime_s"] = elapsed
                rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    cols = list(rows[0]) if rows else STUDY_COLUMNS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in (r[c] for c in cols)])
    return buf.getvalue()
