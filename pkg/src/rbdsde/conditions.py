"""Smallness constants for the a priori estimate and the Picard contraction.

    D1    = beta - theta
    D2    = 1 - 2 gamma_tilde (L / theta + alpha)
    kappa = gamma_tilde (L / epsilon + 2 L + 2 alpha) max(1, T) (2 C_hat + 3)

A configuration is feasible for the estimate when ``D1, D2 > 0`` and for the
contraction when ``kappa <= 1/2`` and ``beta > epsilon``. ``C_hat`` is the
martingale-inequality constant of the contraction argument; it has no known
value, so every contraction verdict is relative to the configured ``C_hat``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .delay_measure import DelayMeasure, gamma_tilde


@dataclass
class ConditionReport:
    beta: float
    gamma_tilde: float
    L: float
    alpha: float
    C_hat: float = 1.0
    T: float | None = None
    theta: float | None = None
    epsilon: float | None = None
    D1: float | None = None
    D2: float | None = None
    kappa: float | None = None
    feasible_prop2: bool | None = None
    feasible_thm6: bool | None = None
    slack: float | None = None

    @property
    def feasible(self) -> bool:
        """Both verdicts that were evaluated are true."""
        verdicts = [v for v in (self.feasible_prop2, self.feasible_thm6) if v is not None]
        return bool(verdicts) and all(verdicts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feasible"] = self.feasible
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_text(self) -> str:
        rows = [(k, v) for k, v in self.to_dict().items() if v is not None]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:.10g}" if isinstance(v, float) else f"{k:<{width}}  {v}"
                         for k, v in rows)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def _nonnegative(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{k} must be nonnegative, got {v}")


def d2_value(gt: float, L: float, theta: float, alpha: float) -> float:
    return 1 - 2 * gt * (L / theta + alpha)


def kappa_value(gt: float, L: float, epsilon: float, alpha: float, T: float, C_hat: float) -> float:
    return gt * (L / epsilon + 2 * L + 2 * alpha) * max(1.0, T) * (2 * C_hat + 3)


def check_prop2(beta: float, theta: float, L: float, alpha: float, measure: DelayMeasure) -> ConditionReport:
    _positive(beta=beta, theta=theta)
    _nonnegative(L=L, alpha=alpha)
    gt = gamma_tilde(measure, beta)
    D1 = beta - theta
    D2 = d2_value(gt, L, theta, alpha)
    return ConditionReport(beta=beta, gamma_tilde=gt, L=L, alpha=alpha, theta=theta,
                           D1=D1, D2=D2, feasible_prop2=bool(D1 > 0 and D2 > 0))


def check_thm6(beta: float, epsilon: float, L: float, alpha: float, T: float,
               measure: DelayMeasure, C_hat: float = 1.0) -> ConditionReport:
    _positive(beta=beta, epsilon=epsilon, C_hat=C_hat, T=T)
    _nonnegative(L=L, alpha=alpha)
    gt = gamma_tilde(measure, beta)
    kappa = kappa_value(gt, L, epsilon, alpha, T, C_hat)
    return ConditionReport(beta=beta, gamma_tilde=gt, L=L, alpha=alpha, C_hat=C_hat, T=T,
                           epsilon=epsilon, kappa=kappa,
                           feasible_thm6=bool(kappa <= 0.5 and beta - epsilon > 0))


def check_all(beta: float, theta: float, epsilon: float, L: float, alpha: float, T: float,
              measure: DelayMeasure, C_hat: float = 1.0) -> ConditionReport:
    """Both checks at a shared ``beta``, merged into one report."""
    p2 = check_prop2(beta, theta, L, alpha, measure)
    t6 = check_thm6(beta, epsilon, L, alpha, T, measure, C_hat)
    p2.C_hat, p2.T, p2.epsilon, p2.kappa, p2.feasible_thm6 = C_hat, T, epsilon, t6.kappa, t6.feasible_thm6
    p2.slack = min(p2.D1, p2.D2, 0.5 - t6.kappa, beta - epsilon)
    return p2


@dataclass
class GridSpec:
    betas: Sequence[float] = field(default_factory=lambda: np.geomspace(1e-3, 20.0, 41).tolist())
    thetas: Sequence[float] = field(default_factory=lambda: np.geomspace(1e-3, 20.0, 41).tolist())
    epsilons: Sequence[float] = field(default_factory=lambda: np.geomspace(1e-3, 20.0, 41).tolist())

    def __post_init__(self):
        if not (len(self.betas) and len(self.thetas) and len(self.epsilons)):
            raise ValueError("feasibility grid must be nonempty in beta, theta and epsilon")


def search_feasible(L: float, alpha: float, T: float, measure: DelayMeasure,
                    C_hat: float = 1.0, grid: GridSpec | None = None) -> ConditionReport:
    """Grid point maximising ``min(D1, D2, 1/2 - kappa, beta - epsilon)``.

    Feasible points (both verdicts true) win over infeasible ones; the returned
    report's :attr:`~ConditionReport.feasible` is the overall verdict.
    """
    grid = grid or GridSpec()
    best, best_key = None, None
    for beta in grid.betas:
        gt = gamma_tilde(measure, beta)
        for theta in grid.thetas:
            D1 = beta - theta
            D2 = d2_value(gt, L, theta, alpha)
            for eps in grid.epsilons:
                kappa = kappa_value(gt, L, eps, alpha, T, C_hat)
                ok = D1 > 0 and D2 > 0 and kappa <= 0.5 and beta - eps > 0
                key = (ok, min(D1, D2, 0.5 - kappa, beta - eps))
                if best_key is None or key > best_key:
                    best_key, best = key, (beta, theta, eps)
    return check_all(best[0], best[1], best[2], L, alpha, T, measure, C_hat)


def kappa_lower_bound(L: float, alpha: float, T: float, measure: DelayMeasure, C_hat: float = 1.0) -> float:
    """``inf`` of kappa over ``beta > epsilon > 0`` (numerical, golden-section in log epsilon).

    gamma_tilde grows with beta, so the infimum is approached as ``beta -> epsilon+``.
    """
    def k(log_eps):
        eps = float(np.exp(log_eps))
        return kappa_value(gamma_tilde(measure, eps), L, eps, alpha, T, C_hat)

    res = minimize_scalar(k, bounds=(-12.0, 6.0), method="bounded", options={"xatol": 1e-10})
    return float(min(res.fun, k(-12.0), k(6.0)))
