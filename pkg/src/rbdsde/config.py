"""TOML experiment configs.

Sections and keys (all optional unless noted; unknown keys are errors)::

    [ensemble]   M, N, T, seed, threads
    [generator]  f, f_params, g, g_params, L, alpha, strict
    [delay]      atoms = [[lag, weight], ...]          (default: point mass at 0)
    [obstacle]   form = none | linear | put | call, params
    [terminal]   form = constant | linear_W | put | call, params
    [constants]  beta, theta, epsilon, C_hat
    [solver]     tol, max_iter, degree, obstacle_powers
    [oracle]     kind = none | martingale | backward_integral | delay_ode | snell, dense_N
    [study]      N = [...], M = [...], seeds = [...]
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .delay_measure import DelayMeasure
from .generator import Form, GeneratorSpec, UnknownFormError
from .paths import PathEnsemble
from .picard import Problem
from .scheme import ObstacleSpec, RegressionBasis, TerminalCondition

ORACLE_KINDS = ("none", "martingale", "backward_integral", "delay_ode", "snell")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; the message names the offending key."""


@dataclass
class EnsembleConfig:
    M: int = 10_000
    N: int = 50
    T: float = 1.0
    seed: int = 0
    threads: int = 1


@dataclass
class GeneratorConfig:
    f: str = "zero"
    f_params: list = field(default_factory=list)
    g: str = "zero"
    g_params: list = field(default_factory=list)
    L: float = 0.01
    alpha: float = 0.01
    strict: bool = True


@dataclass
class DelayConfig:
    atoms: list = field(default_factory=lambda: [[0.0, 1.0]])


@dataclass
class ObstacleConfig:
    form: str = "none"
    params: list = field(default_factory=list)


@dataclass
class TerminalConfig:
    form: str = "linear_W"
    params: list = field(default_factory=lambda: [1.0, 0.0])


@dataclass
class ConstantsConfig:
    beta: float = 1.0
    theta: float = 0.5
    epsilon: float = 0.5
    C_hat: float = 1.0


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 50
    degree: int = 1
    obstacle_powers: int = 0


@dataclass
class OracleConfig:
    kind: str = "none"
    dense_N: int = 20_000


@dataclass
class StudyConfig:
    N: list = field(default_factory=lambda: [10, 25, 50])
    M: list = field(default_factory=lambda: [10_000])
    seeds: list = field(default_factory=lambda: [0, 1, 2])


_SECTIONS = {
    "ensemble": EnsembleConfig, "generator": GeneratorConfig, "delay": DelayConfig,
    "obstacle": ObstacleConfig, "terminal": TerminalConfig, "constants": ConstantsConfig,
    "solver": SolverConfig, "oracle": OracleConfig, "study": StudyConfig,
}

_TYPES = {int: (int,), float: (int, float), bool: (bool,), str: (str,), list: (list,)}


@dataclass
class ExperimentConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    delay: DelayConfig = field(default_factory=DelayConfig)
    obstacle: ObstacleConfig = field(default_factory=ObstacleConfig)
    terminal: TerminalConfig = field(default_factory=TerminalConfig)
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    # built objects, filled by validate()
    measure: DelayMeasure | None = field(default=None, repr=False)
    spec: GeneratorSpec | None = field(default=None, repr=False)
    obstacle_spec: ObstacleSpec | None = field(default=None, repr=False)
    terminal_spec: TerminalCondition | None = field(default=None, repr=False)

    @property
    def basis(self) -> RegressionBasis:
        return RegressionBasis(self.solver.degree, self.solver.obstacle_powers)

    def problem(self, ensemble: PathEnsemble) -> Problem:
        return Problem(ensemble, self.spec, self.measure, self.obstacle_spec, self.terminal_spec,
                       self.basis, self.constants.beta)


def _typed_section(name: str, raw: dict):
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}; known: {', '.join(known)}")
    obj = cls()
    for key, value in raw.items():
        default = getattr(obj, key)
        kind = type(default)
        ok = isinstance(value, _TYPES[kind]) and not (kind is not bool and isinstance(value, bool))
        if not ok:
            raise ConfigError(f"{name}.{key} must be {kind.__name__}, got {value!r}")
        setattr(obj, key, float(value) if kind is float else value)
    return obj


def parse(raw: dict) -> ExperimentConfig:
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section [{key}]; known: {', '.join(_SECTIONS)}")
    cfg = ExperimentConfig(**{name: _typed_section(name, raw.get(name, {})) for name in _SECTIONS})
    validate(cfg)
    return cfg


def load(path: str | Path, seed: int | None = None, threads: int | None = None) -> ExperimentConfig:
    """Read, override and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} does not parse: {exc}") from exc
    if seed is not None:
        raw.setdefault("ensemble", {})["seed"] = seed
    if threads is not None:
        raw.setdefault("ensemble", {})["threads"] = threads
    return parse(raw)


def _obstacle(oc: ObstacleConfig) -> ObstacleSpec:
    arity = {"none": 0, "linear": 2, "put": 1, "call": 1}
    if oc.form not in arity:
        raise ConfigError(f"obstacle.form {oc.form!r} unknown; known: {', '.join(arity)}")
    if len(oc.params) != arity[oc.form]:
        raise ConfigError(f"obstacle.params: form {oc.form!r} takes {arity[oc.form]} values, got {len(oc.params)}")
    p = [float(x) for x in oc.params]
    return {"none": ObstacleSpec.none, "linear": ObstacleSpec.linear,
            "put": ObstacleSpec.put, "call": ObstacleSpec.call}[oc.form](*p)


def _check_h6(obstacle: ObstacleSpec, terminal: TerminalCondition, T: float) -> None:
    if not obstacle.present:
        return
    probe = np.linspace(-12.0, 12.0, 2401) * math.sqrt(T)
    gap = obstacle.of(T, probe) - terminal.of(probe)
    if np.any(gap > 0):
        j = int(np.argmax(gap))
        where = "" if terminal.deterministic and obstacle.form == "deterministic" else f" at W_T = {probe[j]:.4g}"
        raise ConfigError(f"obstacle / terminal: S_T = {obstacle.of(T, probe[j]):.6g} > xi = "
                          f"{terminal.of(probe[j]):.6g}{where}; assumption H6 requires S_T <= xi")


def validate(cfg: ExperimentConfig) -> None:
    e = cfg.ensemble
    for key, ok in (("M", e.M >= 1), ("N", e.N >= 1), ("T", e.T > 0), ("threads", e.threads >= 1),
                    ("seed", 0 <= e.seed < 2**64)):
        if not ok:
            raise ConfigError(f"ensemble.{key} = {getattr(e, key)!r} out of range")

    g = cfg.generator
    if not g.L > 0:
        raise ConfigError(f"generator.L = {g.L} must be positive (assumption H2)")
    if not 0 < g.alpha < 1:
        raise ConfigError(f"generator.alpha = {g.alpha} must lie in the open interval (0, 1) (assumption H2)")
    try:
        f_form = Form.from_tag(g.f, g.f_params)
        g_form = Form.from_tag(g.g, g.g_params)
    except (UnknownFormError, ValueError) as exc:
        raise ConfigError(f"generator.f / generator.g: {exc}") from exc

    try:
        cfg.measure = DelayMeasure.from_pairs(cfg.delay.atoms, e.T)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"delay.atoms: {exc}") from exc
    try:
        cfg.spec = GeneratorSpec(f_form, g_form, g.L, g.alpha, strict=g.strict)
    except ValueError as exc:
        raise ConfigError(f"generator: {exc}") from exc
    problems = cfg.spec.declared_violations(cfg.measure.snapped(e.T / e.N)) if g.strict else []
    if problems:
        raise ConfigError("generator: " + "; ".join(problems))

    cfg.obstacle_spec = _obstacle(cfg.obstacle)
    try:
        cfg.terminal_spec = TerminalCondition(cfg.terminal.form, tuple(cfg.terminal.params))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"terminal: {exc}") from exc
    _check_h6(cfg.obstacle_spec, cfg.terminal_spec, e.T)

    c = cfg.constants
    for key in ("beta", "theta", "epsilon", "C_hat"):
        if not getattr(c, key) > 0:
            raise ConfigError(f"constants.{key} = {getattr(c, key)} must be positive")

    s = cfg.solver
    if not s.tol > 0 or s.max_iter < 1 or s.degree < 0 or s.obstacle_powers < 0:
        raise ConfigError(f"solver: need tol > 0, max_iter >= 1, degree >= 0, obstacle_powers >= 0; got {s}")

    if cfg.oracle.kind not in ORACLE_KINDS:
        raise ConfigError(f"oracle.kind {cfg.oracle.kind!r} unknown; known: {', '.join(ORACLE_KINDS)}")
    if cfg.oracle.kind != "none":
        reason = oracle_mismatch(cfg)
        if reason:
            raise ConfigError(f"oracle.kind = {cfg.oracle.kind!r} does not match this problem: {reason}")


def oracle_mismatch(cfg: ExperimentConfig) -> str | None:
    """Why the configured problem is not covered by ``oracle.kind`` (None if it is)."""
    kind = cfg.oracle.kind
    f, g = cfg.spec.f, cfg.spec.g
    term, obst = cfg.terminal_spec, cfg.obstacle_spec
    is_W_T = term.form == "linear_W" and term.params == (1.0, 0.0)
    if kind in ("martingale", "backward_integral"):
        if f.kind != "zero":
            return "needs generator.f = 'zero'"
        if kind == "martingale" and g.kind != "zero":
            return "needs generator.g = 'zero'"
        if kind == "backward_integral" and not (g.kind == "zero" or g.label and g.label.startswith("constant")):
            return "needs generator.g = 'constant'"
        if not is_W_T or obst.present:
            return "needs terminal linear_W [1, 0] and no obstacle"
    elif kind == "delay_ode":
        if g.kind != "zero" or obst.present or not term.deterministic:
            return "needs g = 'zero', no obstacle and a constant terminal value"
        if f.kind not in ("affine", "point_delay") or f.b != 0 or f.c != 0:
            return "needs f = affine [a] or point_delay [a, 0, 0, lag]"
        if f.kind == "affine" and len(cfg.measure.lags) != 1:
            return "needs a single-atom delay measure"
        if delay_lag(cfg) >= 0:
            return "needs a strictly negative lag"
    elif kind == "snell":
        if f.kind != "zero" or g.kind != "zero":
            return "needs zero generators"
    return None


def delay_lag(cfg: ExperimentConfig) -> float:
    f = cfg.spec.f
    return f.lag if f.kind == "point_delay" else cfg.measure.lags[0]


def constant_g(cfg: ExperimentConfig) -> float:
    g = cfg.spec.g
    return 0.0 if g.kind == "zero" else float(g.c)
