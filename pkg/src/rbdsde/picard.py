"""Picard iteration of the frozen-generator map on a fixed noise ensemble.

Starting from ``(U, V) = (0, 0)``, each step evaluates ``f`` and ``g`` on the
delayed segments of the current iterate, solves the reflected problem with
those integrands frozen, and takes its ``(Y, Z)`` as the next iterate.
Distances between successive iterates are measured in the exponentially
weighted norm ``(E sum_i e^{beta t_i} (|dY_i|^2 + |dZ_i|^2) dt)^{1/2}``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .delay_measure import DelayMeasure
from .generator import GeneratorSpec, evaluate_grid
from .paths import PathEnsemble
from .scheme import ObstacleSpec, RegressionBasis, SolutionTriple, TerminalCondition, solve_frozen

log = logging.getLogger(__name__)

_RATIO_FLOOR = 1e-15
_DIVERGENCE_FACTOR = 10.0


@dataclass
class Problem:
    """Everything needed for one solve. The delay measure is snapped to the grid on construction."""

    ensemble: PathEnsemble
    generator: GeneratorSpec
    measure: DelayMeasure
    obstacle: ObstacleSpec
    terminal: TerminalCondition
    basis: RegressionBasis = field(default_factory=RegressionBasis)
    beta: float = 1.0

    def __post_init__(self):
        dt = self.ensemble.dt
        self.measure = self.measure.snapped(dt)
        self.generator = _snap_point_lags(self.generator, dt, self.measure.horizon)
        problems = self.generator.declared_violations(self.measure) if self.generator.strict else []
        if problems:
            raise ValueError("; ".join(problems))
        self.xi = self.terminal.values(self.ensemble)
        self.S = self.obstacle.values(self.ensemble)

    def with_ensemble(self, ensemble: PathEnsemble) -> "Problem":
        return Problem(ensemble, self.generator, self.measure, self.obstacle, self.terminal, self.basis, self.beta)

    def scaled(self, lam: float) -> "Problem":
        """Terminal value, obstacle and generator intercepts all multiplied by ``lam > 0``."""
        return Problem(self.ensemble, self.generator.scaled(lam), self.measure, self.obstacle.scaled(lam),
                       self.terminal.scaled(lam), self.basis, self.beta)

    def integrands(self, U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dt = self.ensemble.dt
        F = evaluate_grid(self.generator, "f", U, V, self.measure, dt)
        G = evaluate_grid(self.generator, "g", U, V, self.measure, dt)
        return F, G


def _snap_point_lags(spec: GeneratorSpec, dt: float, horizon: float) -> GeneratorSpec:
    """Round point_delay lags exactly as the measure's atoms are rounded."""
    def snap(form):
        if form.kind != "point_delay":
            return form
        return replace(form, lag=DelayMeasure.point_mass(form.lag, horizon).snapped(dt).lags[0])

    f, g = snap(spec.f), snap(spec.g)
    if f is spec.f and g is spec.g:
        return spec
    return replace(spec, f=f, g=g)


def beta_norm_distance(Y1, Z1, Y2, Z2, beta: float, dt: float) -> float:
    """Empirical weighted distance over the left nodes ``i = 0 .. N-1``."""
    Y1, Z1, Y2, Z2 = (np.asarray(a, dtype=float) for a in (Y1, Z1, Y2, Z2))
    if Y1.shape != Y2.shape or Z1.shape != Z2.shape:
        raise ValueError(f"shape mismatch: Y {Y1.shape} vs {Y2.shape}, Z {Z1.shape} vs {Z2.shape}")
    N = Z1.shape[-1]
    if Y1.shape[-1] != N + 1:
        raise ValueError("Y must have one more time column than Z")
    w = np.exp(beta * np.arange(N) * dt)
    dy = Y1[..., :N] - Y2[..., :N]
    dz = Z1 - Z2
    energy = np.sum(w * (dy * dy + dz * dz), axis=-1) * dt
    return float(np.sqrt(np.mean(energy)))


@dataclass
class PicardDiagnostics:
    """``distances[k]`` is the distance between iterates ``k+1`` and ``k`` (iterate 0 is zero)."""

    distances: list[float] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    tol: float = 0.0

    @property
    def iterations(self) -> int:
        """Index of the last measured distance; solves performed = iterations + 1."""
        return max(len(self.distances) - 1, 0)

    @property
    def ratios(self) -> list[float | None]:
        d = self.distances
        return [d[k + 1] / d[k] if d[k] > _RATIO_FLOOR else None for k in range(len(d) - 1)]

    @property
    def final_distance(self) -> float:
        return self.distances[-1] if self.distances else float("nan")

    def to_dict(self) -> dict:
        return {"distances": self.distances, "ratios": self.ratios, "iterations": self.iterations,
                "converged": self.converged, "diverged": self.diverged,
                "final_distance": self.final_distance, "tol": self.tol}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def picard_map(problem: Problem, U: np.ndarray, V: np.ndarray) -> SolutionTriple:
    """One application of the frozen-input solve to the iterate ``(U, V)``."""
    F, G = problem.integrands(U, V)
    return solve_frozen(problem.ensemble, F, G, problem.xi, problem.S, problem.basis)


def solve(problem: Problem, tol: float = 1e-8, max_iter: int = 50) -> tuple[SolutionTriple, PicardDiagnostics]:
    """Iterate until the successive distance drops below ``tol``.

    Stops early and sets ``diverged`` when a distance grows by more than a
    factor 10; returns the last iterate with ``converged=False`` when
    ``max_iter`` distances were measured without reaching ``tol``.
    """
    ens = problem.ensemble
    U = np.zeros((ens.M, ens.N + 1))
    V = np.zeros((ens.M, ens.N))
    diag = PicardDiagnostics(tol=tol)
    sol = None
    for k in range(max_iter):
        sol = picard_map(problem, U, V)
        d = beta_norm_distance(sol.Y, sol.Z, U, V, problem.beta, ens.dt)
        diag.distances.append(d)
        log.debug("picard iteration %d: distance %.3e", k, d)
        if d < tol:
            diag.converged = True
            break
        if k > 0 and d > _DIVERGENCE_FACTOR * diag.distances[-2]:
            diag.diverged = True
            log.warning("picard iteration diverging: d_%d = %.3e > 10 d_%d", k, d, k - 1)
            break
        U, V = sol.Y, sol.Z
    return sol, diag
