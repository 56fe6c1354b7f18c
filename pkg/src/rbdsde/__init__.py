"""Monte Carlo solver for reflected backward doubly stochastic equations with delayed generators."""
from .conditions import ConditionReport, check_all, check_prop2, check_thm6, search_feasible
from .delay_measure import DelayMeasure, gamma_tilde
from .estimates import EstimateReport, apriori_sides, skorokhod_residual, stability_gap
from .generator import Form, GeneratorSpec
from .paths import PathEnsemble, simulate
from .picard import PicardDiagnostics, Problem, solve
from .scheme import ObstacleSpec, RegressionBasis, SolutionTriple, TerminalCondition, solve_frozen

__all__ = [
    "ConditionReport", "check_all", "check_prop2", "check_thm6", "search_feasible",
    "DelayMeasure", "gamma_tilde", "EstimateReport", "apriori_sides", "skorokhod_residual",
    "stability_gap", "Form", "GeneratorSpec", "PathEnsemble", "simulate", "PicardDiagnostics",
    "Problem", "solve", "ObstacleSpec", "RegressionBasis", "SolutionTriple", "TerminalCondition",
    "solve_frozen",
]
