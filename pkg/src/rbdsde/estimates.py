"""Both sides of the a priori and stability estimates, and the Skorokhod residual.

The constants in those estimates are existential, so a report carries the
raw sides and their ratio; nothing here asserts a particular constant.
Continuous sups become maxima over grid nodes ``0..N`` and ``ds`` integrals
become left-node Riemann sums over ``0..N-1``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .generator import evaluate_grid
from .picard import Problem
from .scheme import SolutionTriple


@dataclass
class EstimateReport:
    lhs: float
    rhs: float
    psi: float | None = None
    components: dict[str, float] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else float("inf")

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "psi": self.psi,
                "components": dict(self.components)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def reports_to_csv(reports: dict[str, EstimateReport]) -> str:
    """One CSV row per labelled run, columns ``run,lhs,rhs,ratio,psi`` plus components."""
    comp_keys = sorted({k for r in reports.values() for k in r.components})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", "lhs", "rhs", "ratio", "psi"] + comp_keys)
    for name, r in reports.items():
        writer.writerow([name, repr(r.lhs), repr(r.rhs), repr(r.ratio), "" if r.psi is None else repr(r.psi)]
                        + [repr(r.components.get(k, 0.0)) for k in comp_keys])
    return buf.getvalue()


def _weights(beta: float, dt: float, n_nodes: int) -> np.ndarray:
    return np.exp(beta * np.arange(n_nodes) * dt)


def _sup_weighted(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.max(w * x * x, axis=-1)


def _integral_weighted(x: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    N = w.size - 1
    x = np.broadcast_to(x, x.shape[:-1] + (x.shape[-1],))
    return np.sum(w[:N] * x[..., :N] ** 2, axis=-1) * dt


def _data_terms(xi, f0, g0, S, beta, dt, n_nodes) -> dict[str, float]:
    w = _weights(beta, dt, n_nodes)
    T = (n_nodes - 1) * dt
    s_term = 0.0 if S is None else float(np.mean(_sup_weighted(np.maximum(S, 0.0), w)))
    return {
        "xi": float(np.exp(beta * T) * np.mean(np.asarray(xi) ** 2)),
        "f0": float(np.mean(_integral_weighted(np.atleast_1d(f0), w, dt))),
        "g0": float(np.mean(_integral_weighted(np.atleast_1d(g0), w, dt))),
        "S_plus": s_term,
    }


def apriori_sides(solution: SolutionTriple, xi, f0, g0, S, beta: float, dt: float) -> EstimateReport:
    """Empirical sides of the a priori bound.

    ``lhs = E[sup e^{bt}|Y|^2 + sum e^{bt}|Z|^2 dt + e^{bT}|K_T|^2]``,
    ``rhs = E[e^{bT}|xi|^2 + sum e^{bt}(|f0|^2 + |g0|^2) dt + sup e^{bt}(S^+)^2]``.
    ``f0``, ``g0`` are node values (length ``N+1`` or ``M x (N+1)``).
    """
    n_nodes = solution.Y.shape[1]
    w = _weights(beta, dt, n_nodes)
    T = (n_nodes - 1) * dt
    lhs_parts = {
        "sup_Y": float(np.mean(_sup_weighted(solution.Y, w))),
        "Z": float(np.mean(np.sum(w[:-1] * solution.Z**2, axis=1) * dt)),
        "K_T": float(np.exp(beta * T) * np.mean(solution.K[:, -1] ** 2)),
    }
    rhs_parts = _data_terms(xi, f0, g0, S, beta, dt, n_nodes)
    components = {f"lhs_{k}": v for k, v in lhs_parts.items()}
    components.update({f"rhs_{k}": v for k, v in rhs_parts.items()})
    return EstimateReport(sum(lhs_parts.values()), sum(rhs_parts.values()), components=components)


def apriori_for(problem: Problem, solution: SolutionTriple) -> EstimateReport:
    t = problem.ensemble.times
    return apriori_sides(solution, problem.xi, problem.generator.f0(t), problem.generator.g0(t),
                         problem.S, problem.beta, problem.ensemble.dt)


def _same_form(a, b) -> bool:
    return (a.kind, a.a, a.b, a.c, a.lag, a.label, a.h if a.label is None else None) == \
           (b.kind, b.a, b.b, b.c, b.lag, b.label, b.h if b.label is None else None)


def stability_gap(solA: SolutionTriple, solB: SolutionTriple, probA: Problem, probB: Problem) -> EstimateReport:
    """Sides of the stability bound between two problems sharing noise and ``g``.

    ``lhs = E[sup e^{bt}|dY|^2 + sum e^{bt}|dZ|^2 dt]``; ``rhs`` adds
    ``e^{bT} E|dxi|^2``, ``E sum e^{bt}|f_A - f_B|^2 dt`` evaluated along the
    first solution, and ``(E sup e^{bt}|dS|^2)^{1/2} psi^{1/2}``.
    """
    ea, eb = probA.ensemble, probB.ensemble
    if ea is not eb and not (ea.W.shape == eb.W.shape and np.array_equal(ea.W, eb.W)
                             and np.array_equal(ea.B, eb.B)):
        raise ValueError("stability_gap needs both solutions on the same ensemble")
    if not _same_form(probA.generator.g, probB.generator.g):
        raise ValueError("stability_gap needs both problems to share g")
    if (probA.S is None) != (probB.S is None):
        raise ValueError("stability_gap needs both problems with or without an obstacle")
    if probA.beta != probB.beta:
        raise ValueError("stability_gap needs a common beta")
    beta, dt = probA.beta, ea.dt
    n_nodes = ea.N + 1
    w = _weights(beta, dt, n_nodes)
    T = ea.T

    dY, dZ = solA.Y - solB.Y, solA.Z - solB.Z
    lhs = float(np.mean(_sup_weighted(dY, w) + np.sum(w[:-1] * dZ**2, axis=1) * dt))

    fA = evaluate_grid(probA.generator, "f", solA.Y, solA.Z, probA.measure, dt)
    fB = evaluate_grid(probB.generator, "f", solA.Y, solA.Z, probB.measure, dt)
    xi_term = float(np.exp(beta * T) * np.mean((probA.xi - probB.xi) ** 2))
    f_term = float(np.mean(_integral_weighted(fA - fB, w, dt)))
    dS_term = 0.0 if probA.S is None else float(np.mean(_sup_weighted(probA.S - probB.S, w)))

    t = ea.times
    dataA = _data_terms(probA.xi, probA.generator.f0(t), probA.generator.g0(t), probA.S, beta, dt, n_nodes)
    dataB = _data_terms(probB.xi, probB.generator.f0(t), 0.0, probB.S, beta, dt, n_nodes)
    psi = sum(dataA.values()) + dataB["xi"] + dataB["f0"] + dataB["S_plus"]
    s_term = float(np.sqrt(dS_term) * np.sqrt(psi))
    comps = {"xi": xi_term, "f": f_term, "S_psi": s_term, "sup_dS": dS_term}
    return EstimateReport(lhs, xi_term + f_term + s_term, psi=psi, components=comps)


def skorokhod_residual(solution: SolutionTriple, S: np.ndarray | None, beta: float, dt: float) -> np.ndarray:
    """Per-path ``|sum_i e^{b t_i} (Y_i - S_i) (K_{i+1} - K_i)|``; zero without obstacle."""
    S = solution.S if S is None else S
    M = solution.Y.shape[0]
    if S is None:
        return np.zeros(M)
    w = _weights(beta, dt, solution.Y.shape[1])[:-1]
    return np.abs(np.sum(w * (solution.Y[:, :-1] - S[:, :-1]) * solution.dK, axis=1))
