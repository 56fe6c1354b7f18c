"""Delayed generators f and g from a closed registry of forms.

Every form acts on the gamma-averaged past of the solution,

    <Y>_gamma(t) = sum_j w_j Y(t + u_j),    <Z>_gamma(t) likewise,

(or on a single lag for ``point_delay``) and vanishes for ``t < 0``. Lipschitz
constants declared next to the forms are checked against the closed-form
sharp bound, and can be audited empirically with :func:`lipschitz_audit`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .delay_measure import DelayMeasure, delayed_aggregate, delayed_aggregate_grid

FORM_KINDS = ("zero", "time_only", "affine", "point_delay")
_LAG_MATCH_TOL = 1e-9


class UnknownFormError(ValueError):
    pass


@dataclass(frozen=True)
class Form:
    """One registry member.

    ``zero``: 0. ``time_only``: ``h(t)``. ``affine``: ``a <Y>_gamma + b <Z>_gamma + c``.
    ``point_delay``: ``a Y(t + lag) + b Z(t + lag) + c`` where ``lag`` must be an
    atom of the delay measure.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    h: Callable[[np.ndarray], np.ndarray] | None = None
    lag: float | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in FORM_KINDS:
            raise UnknownFormError(f"unknown generator form {self.kind!r}; known: {', '.join(FORM_KINDS)}")
        if self.kind == "time_only" and self.h is None:
            raise ValueError("time_only form needs a function h(t)")
        if self.kind == "point_delay" and (self.lag is None or self.lag > 0):
            raise ValueError("point_delay form needs a lag <= 0")

    @classmethod
    def zero(cls) -> "Form":
        return cls("zero", label="zero")

    @classmethod
    def time_only(cls, h: Callable[[np.ndarray], np.ndarray], label: str | None = None) -> "Form":
        return cls("time_only", h=h, label=label)

    @classmethod
    def constant(cls, c: float) -> "Form":
        c = float(c)
        return cls("time_only", h=lambda t: np.full(np.shape(t), c), c=c, label=f"constant({c})")

    @classmethod
    def affine(cls, a: float, b: float = 0.0, c: float = 0.0) -> "Form":
        return cls("affine", a=float(a), b=float(b), c=float(c))

    @classmethod
    def point_delay(cls, a: float, b: float, c: float, lag: float) -> "Form":
        return cls("point_delay", a=float(a), b=float(b), c=float(c), lag=float(lag))

    @classmethod
    def from_tag(cls, tag: str, params: Sequence[float] = ()) -> "Form":
        """Config-file constructor: ``zero``, ``constant [c]``, ``time_linear [c0, c1]``,
        ``affine [a, b, c]`` or ``point_delay [a, b, c, lag]``."""
        arity = {"zero": (0,), "constant": (1,), "time_linear": (2,), "affine": (1, 2, 3), "point_delay": (4,)}
        if tag not in arity:
            raise UnknownFormError(f"unknown generator form tag {tag!r}; known: {', '.join(arity)}")
        params = [float(p) for p in params]
        if len(params) not in arity[tag]:
            raise ValueError(f"generator form {tag!r} takes {arity[tag]} parameters, got {len(params)}")
        if tag == "zero":
            return cls.zero()
        if tag == "constant":
            return cls.constant(params[0])
        if tag == "time_linear":
            c0, c1 = params
            return cls.time_only(lambda t: c0 + c1 * np.asarray(t, dtype=float), label=f"time_linear({c0}, {c1})")
        if tag == "affine":
            return cls.affine(*params)
        return cls.point_delay(*params)

    def scaled(self, lam: float) -> "Form":
        """Form whose intercept part ``f(t, 0, 0)`` is multiplied by ``lam``; slopes unchanged."""
        if self.kind == "zero" or lam == 1:
            return self
        if self.kind == "time_only":
            h = self.h
            label = None if self.label is None else f"{lam} * {self.label}"
            return Form("time_only", c=self.c * lam, h=lambda t: lam * np.asarray(h(t), dtype=float), label=label)
        return Form(self.kind, self.a, self.b, self.c * lam, None, self.lag, self.label)

    def at_zero(self, t) -> np.ndarray:
        """``f(t, 0, 0)`` on an array of times (zero for ``t < 0``)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(t)
        elif self.kind == "time_only":
            out = np.asarray(self.h(t), dtype=float) * np.ones_like(t)
        else:
            out = np.full_like(t, self.c)
        return np.where(t < 0, 0.0, out)

    def is_constant_map(self) -> bool:
        """True when the form ignores the solution arguments."""
        return self.kind in ("zero", "time_only") or (self.a == 0 and self.b == 0)

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.kind == "point_delay":
            return f"point_delay(a={self.a}, b={self.b}, c={self.c}, lag={self.lag})"
        return f"{self.kind}(a={self.a}, b={self.b}, c={self.c})"


def _lag_weight(measure: DelayMeasure, lag: float) -> float:
    for u, w in zip(measure.lags, measure.weights):
        if abs(u - lag) <= _LAG_MATCH_TOL * max(1.0, measure.horizon):
            return w
    raise ValueError(f"point_delay lag {lag} is not an atom of the delay measure {measure.lags}")


def sharp_ratio(form: Form, y_const: float, z_const: float, measure: DelayMeasure | None = None) -> float:
    """Worst-case ``|Delta form|^2 / (y_const |Dy|^2 + z_const |Dz|^2)`` over all segment pairs.

    For ``a <Dy> + b <Dz>``, Cauchy-Schwarz with weights followed by Jensen gives
    ``a^2 / y_const + b^2 / z_const``; a single lag of weight ``w`` divides it by ``w``.
    """
    if form.is_constant_map():
        return 0.0
    r = 0.0
    for coef, const in ((form.a, y_const), (form.b, z_const)):
        if coef != 0:
            r = math.inf if const <= 0 else r + coef * coef / const
    if form.kind == "point_delay":
        if measure is None:
            raise ValueError("point_delay needs the delay measure to bound its Lipschitz ratio")
        r /= _lag_weight(measure, form.lag)
    return r


@dataclass(frozen=True)
class GeneratorSpec:
    """Pair (f, g) with declared constants ``L > 0`` and ``0 < alpha < 1``.

    ``f`` must satisfy ``|Df|^2 <= L (int |Dy|^2 dgamma + int |Dz|^2 dgamma)`` and
    ``g`` the split bound ``L int |Dy|^2 dgamma + alpha int |Dz|^2 dgamma``. With
    ``strict=True`` (default) declared constants that cannot satisfy these bounds
    are rejected; ``strict=False`` lets :func:`lipschitz_audit` expose them instead.
    """

    f: Form
    g: Form
    L: float
    alpha: float
    strict: bool = True

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L = {self.L} must be positive (assumption H2)")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha = {self.alpha} must lie in the open interval (0, 1) (assumption H2)")
        if self.strict:
            problems = self.declared_violations(None)
            if problems:
                raise ValueError("; ".join(problems))

    @classmethod
    def zero(cls, L: float = 1e-2, alpha: float = 1e-2) -> "GeneratorSpec":
        return cls(Form.zero(), Form.zero(), L, alpha)

    def declared_violations(self, measure: DelayMeasure | None) -> list[str]:
        """Messages for each form whose coefficients exceed the declared constants.

        ``point_delay`` forms are only checked when ``measure`` is given.
        """
        out = []
        for name, form, zc in (("f", self.f, self.L), ("g", self.g, self.alpha)):
            if form.kind == "point_delay" and measure is None:
                continue
            r = sharp_ratio(form, self.L, zc, measure)
            if r > 1 + 1e-12:
                out.append(f"{name} = {form.describe()} violates the declared Lipschitz bound "
                           f"(L={self.L}, alpha={self.alpha}): sharp ratio {r:.6g} > 1")
        return out

    def scaled(self, lam: float) -> "GeneratorSpec":
        """Intercepts of both forms scaled by ``lam`` (the forms stay linear in the solution)."""
        return GeneratorSpec(self.f.scaled(lam), self.g.scaled(lam), self.L, self.alpha, self.strict)

    def form(self, which: str) -> Form:
        if which == "f":
            return self.f
        if which == "g":
            return self.g
        raise ValueError(f"which must be 'f' or 'g', got {which!r}")

    def f0(self, t) -> np.ndarray:
        return self.f.at_zero(t)

    def g0(self, t) -> np.ndarray:
        return self.g.at_zero(t)


def _pad_z(Z: np.ndarray, n_times: int) -> np.ndarray:
    """Extend Z (defined on left endpoints) to all grid nodes by holding the last value."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] == n_times:
        return Z
    if Z.shape[-1] != n_times - 1:
        raise ValueError(f"Z must have {n_times - 1} or {n_times} time columns, got {Z.shape[-1]}")
    return np.concatenate([Z, Z[..., -1:]], axis=-1)


def evaluate_grid(spec: GeneratorSpec, which: str, Y: np.ndarray, Z: np.ndarray,
                  measure: DelayMeasure, dt: float) -> np.ndarray:
    """Evaluate f or g at every node ``t_i = i dt`` of the ``(M, N+1)`` path arrays.

    ``Z`` may have ``N`` columns; its value at ``t_N`` is then taken equal to ``Z_{N-1}``.
    """
    form = spec.form(which)
    Y = np.asarray(Y, dtype=float)
    n_times = Y.shape[-1]
    t = np.arange(n_times) * dt
    if form.is_constant_map():
        return np.broadcast_to(form.at_zero(t), Y.shape).copy()
    Z = _pad_z(Z, n_times)
    if form.kind == "affine":
        out = np.full(Y.shape, form.c)
        if form.a:
            out += form.a * delayed_aggregate_grid(Y, measure, dt)
        if form.b:
            out += form.b * delayed_aggregate_grid(Z, measure, dt)
        return out
    point = DelayMeasure.point_mass(form.lag, measure.horizon)
    return (form.a * delayed_aggregate_grid(Y, point, dt)
            + form.b * delayed_aggregate_grid(Z, point, dt) + form.c)


def evaluate(spec: GeneratorSpec, which: str, t: float, Y_path, Z_path,
             measure: DelayMeasure, dt: float) -> float:
    """Scalar evaluation of f or g at time ``t`` (a grid node or negative) on one path."""
    form = spec.form(which)
    if t < 0:
        return 0.0
    i = int(round(t / dt))
    if abs(i * dt - t) > 1e-9 * max(dt, 1.0):
        raise ValueError(f"t = {t} is not a grid node of spacing {dt}")
    if form.is_constant_map():
        return float(form.at_zero(np.array([t]))[0])
    Y_path = np.asarray(Y_path, dtype=float)
    Z_path = _pad_z(Z_path, Y_path.shape[-1]) if len(Z_path) else np.zeros_like(Y_path)
    if form.kind == "affine":
        m = measure
    else:
        m = DelayMeasure.point_mass(form.lag, measure.horizon)
    y = delayed_aggregate(Y_path, i, m, dt)
    z = delayed_aggregate(Z_path, i, m, dt)
    return form.a * y + form.b * z + form.c


@dataclass
class LipschitzAudit:
    max_ratio_f: float
    max_ratio_g: float
    samples: int
    passed: bool

    @property
    def max_ratio(self) -> float:
        return max(self.max_ratio_f, self.max_ratio_g)

    def to_dict(self) -> dict:
        return {"max_ratio_f": self.max_ratio_f, "max_ratio_g": self.max_ratio_g,
                "samples": self.samples, "passed": self.passed}


def _segment_ratio(spec: GeneratorSpec, which: str, y1, z1, y2, z2, t_idx, measure, dt) -> np.ndarray:
    zc = spec.L if which == "f" else spec.alpha
    f1 = evaluate_grid(spec, which, y1, z1, measure, dt)
    f2 = evaluate_grid(spec, which, y2, z2, measure, dt)
    rows = np.arange(len(t_idx))
    lhs = (f1 - f2)[rows, t_idx] ** 2
    dy = delayed_aggregate_grid((y1 - y2) ** 2, measure, dt)[rows, t_idx]
    dz = delayed_aggregate_grid((z1 - z2) ** 2, measure, dt)[rows, t_idx]
    rhs = spec.L * dy + zc * dz
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return ratio


def lipschitz_audit(spec: GeneratorSpec, measure: DelayMeasure, sample_count: int = 10_000,
                    seed: int = 0, n_steps: int = 16, tol: float = 1e-12) -> LipschitzAudit:
    """Empirical check of the delayed Lipschitz bounds on random segment pairs.

    Samples ``sample_count`` Gaussian segment pairs (random scales) on an
    ``n_steps`` grid over ``[0, T]`` plus constant segments along the
    coordinate axes and along ``(a, b)`` of each form, also concentrated on
    single atoms of the measure. Passes iff the largest
    observed ``lhs / rhs`` is at most ``1 + tol``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    T = measure.horizon
    dt = T / n_steps
    measure = measure.snapped(dt)
    rng = np.random.default_rng(seed)
    n = n_steps + 1
    scale = np.exp(rng.normal(0.0, 1.0, size=(sample_count, 1)))
    y1, y2, z1, z2 = (scale * rng.standard_normal((sample_count, n)) for _ in range(4))
    t_idx = rng.integers(0, n, size=sample_count)

    crafted = []
    for form in (spec.f, spec.g):
        crafted += [(1.0, 0.0), (0.0, 1.0), (form.a, form.b), (form.a / spec.L, form.b / spec.alpha)]
    cy = np.array([[c[0]] for c in crafted]) * np.ones((1, n))
    cz = np.array([[c[1]] for c in crafted]) * np.ones((1, n))
    # single-atom spikes: the worst case for point_delay forms
    for k in measure.lag_steps(dt).tolist():
        spike = np.zeros((len(crafted), n))
        spike[:, n - 1 - k] = 1.0
        cy = np.vstack([cy, cy[: len(crafted)] * spike])
        cz = np.vstack([cz, cz[: len(crafted)] * spike])
    y1 = np.vstack([y1, cy])
    z1 = np.vstack([z1, cz])
    y2 = np.vstack([y2, np.zeros_like(cy)])
    z2 = np.vstack([z2, np.zeros_like(cz)])
    t_idx = np.concatenate([t_idx, np.full(len(cy), n - 1)])

    rf = _segment_ratio(spec, "f", y1, z1, y2, z2, t_idx, measure, dt)
    rg = _segment_ratio(spec, "g", y1, z1, y2, z2, t_idx, measure, dt)
    mf, mg = float(np.max(rf)), float(np.max(rg))
    return LipschitzAudit(mf, mg, len(t_idx), max(mf, mg) <= 1 + tol)


@dataclass
class IntegrabilityReport:
    """Per-path sides of the discrete square-integrability bound for f and g."""

    lhs_f: np.ndarray
    rhs_f: np.ndarray
    lhs_g: np.ndarray
    rhs_g: np.ndarray

    @property
    def passed(self) -> bool:
        slack = 1e-12 * (1 + np.maximum(self.rhs_f, self.rhs_g))
        return bool(np.all(self.lhs_f <= self.rhs_f + slack) and np.all(self.lhs_g <= self.rhs_g + slack))

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "max_lhs_f": float(np.max(self.lhs_f)), "max_rhs_f": float(np.max(self.rhs_f)),
                "max_lhs_g": float(np.max(self.lhs_g)), "max_rhs_g": float(np.max(self.rhs_g)),
                "paths": int(np.size(self.lhs_f))}


def integrability_check(spec: GeneratorSpec, Y: np.ndarray, Z: np.ndarray,
                        measure: DelayMeasure, dt: float) -> IntegrabilityReport:
    """Check ``sum_i |f(t_i)|^2 dt <= 2 sum_i |f(t_i,0,0)|^2 dt + 2L(T sup|Y|^2 + sum_i |Z_i|^2 dt)``.

    The g bound uses ``2(L T sup|Y|^2 + alpha sum_i |Z_i|^2 dt)``. Sums run over
    the left nodes ``i = 0 .. N-1``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Z))):
        raise ValueError("solution paths must be finite")
    N = Y.shape[1] - 1
    T = N * dt
    t = np.arange(N) * dt
    sup_y = np.max(Y * Y, axis=1)
    z_energy = np.sum(Z[:, :N] ** 2, axis=1) * dt
    sides = []
    for which, zc in (("f", spec.L), ("g", spec.alpha)):
        vals = evaluate_grid(spec, which, Y, Z, measure, dt)[:, :N]
        lhs = np.sum(vals * vals, axis=1) * dt
        base = np.sum(spec.form(which).at_zero(t) ** 2) * dt
        rhs = 2 * base + 2 * (spec.L * T * sup_y + zc * z_energy)
        sides += [lhs, rhs]
    return IntegrabilityReport(*sides)
