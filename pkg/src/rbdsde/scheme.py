"""Discretely reflected backward regression scheme for frozen generator inputs.

Given exogenous integrand paths ``F`` (dt integral) and ``G`` (backward dB
integral), terminal values ``xi`` and an obstacle ``S``, the recursion for
``i = N-1, ..., 0`` is

    target   = Y_{i+1} + F_i dt + G_{i+1} dB_i
    Ytilde_i = E_i[target]
    Z_i      = E_i[(target - Ytilde_i) dW_i] / dt
    Y_i      = max(Ytilde_i, S_i),   K_{i+1} - K_i = Y_i - Ytilde_i

where ``E_i`` is least-squares projection on functions of
``(W_{t_i}, B_T - B_{t_i})``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .paths import PathEnsemble

_DROP_RTOL = 1e-10


class TerminalCompatibilityError(ValueError):
    """Obstacle exceeds the terminal condition at maturity."""


@dataclass(frozen=True)
class ObstacleSpec:
    """Lower barrier ``S_t``: ``none``, ``deterministic`` h(t), or ``payoff_of_W`` phi(t, W_t).

    ``scale`` and ``shift`` act on the values (``scale * raw + shift``) so that
    homogeneity and shift properties can be exercised on the same form.
    """

    form: str = "none"
    func: Callable | None = None
    scale: float = 1.0
    shift: float = 0.0
    label: str = "none"

    def __post_init__(self):
        if self.form not in ("none", "deterministic", "payoff_of_W"):
            raise ValueError(f"unknown obstacle form {self.form!r}")
        if self.form != "none" and self.func is None:
            raise ValueError(f"obstacle form {self.form!r} needs a function")

    @classmethod
    def none(cls) -> "ObstacleSpec":
        return cls()

    @classmethod
    def deterministic(cls, h: Callable[[np.ndarray], np.ndarray], label: str = "deterministic") -> "ObstacleSpec":
        return cls("deterministic", h, label=label)

    @classmethod
    def payoff_of_W(cls, phi: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    label: str = "payoff_of_W") -> "ObstacleSpec":
        return cls("payoff_of_W", phi, label=label)

    @classmethod
    def linear(cls, s0: float, s1: float) -> "ObstacleSpec":
        """``S_t = s0 + s1 t``."""
        return cls.deterministic(lambda t: s0 + s1 * np.asarray(t, dtype=float), label=f"linear({s0}, {s1})")

    @classmethod
    def put(cls, strike: float) -> "ObstacleSpec":
        """``S_t = (strike - W_t)^+``."""
        return cls.payoff_of_W(lambda t, w: np.maximum(strike - w, 0.0), label=f"put({strike})")

    @classmethod
    def call(cls, strike: float) -> "ObstacleSpec":
        return cls.payoff_of_W(lambda t, w: np.maximum(w - strike, 0.0), label=f"call({strike})")

    @property
    def present(self) -> bool:
        return self.form != "none"

    def scaled(self, lam: float) -> "ObstacleSpec":
        return ObstacleSpec(self.form, self.func, self.scale * lam, self.shift * lam, self.label)

    def shifted(self, c: float) -> "ObstacleSpec":
        return ObstacleSpec(self.form, self.func, self.scale, self.shift + c, self.label)

    def of(self, t, w) -> np.ndarray:
        """Obstacle value at times ``t`` and forward-driver values ``w`` (broadcast)."""
        t = np.asarray(t, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.form == "none":
            return np.full(np.broadcast(t, w).shape, -np.inf)
        if self.form == "deterministic":
            raw = np.asarray(self.func(t), dtype=float) * np.ones(np.broadcast(t, w).shape)
        else:
            raw = np.asarray(self.func(t, w), dtype=float)
        return self.scale * raw + self.shift

    def values(self, ensemble: PathEnsemble) -> np.ndarray | None:
        """``(M, N+1)`` obstacle values on the ensemble, or None without obstacle."""
        if not self.present:
            return None
        return self.of(ensemble.times[None, :], ensemble.W)


@dataclass(frozen=True)
class TerminalCondition:
    """Terminal value xi as a function of ``W_T``: ``constant``, ``linear_W``, ``put`` or ``call``."""

    form: str
    params: tuple[float, ...] = ()
    scale: float = 1.0
    shift: float = 0.0

    _ARITY = {"constant": 1, "linear_W": 2, "put": 1, "call": 1}

    def __post_init__(self):
        if self.form not in self._ARITY:
            raise ValueError(f"unknown terminal form {self.form!r}; known: {', '.join(self._ARITY)}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != self._ARITY[self.form]:
            raise ValueError(f"terminal form {self.form!r} takes {self._ARITY[self.form]} parameters")

    @classmethod
    def constant(cls, c: float) -> "TerminalCondition":
        return cls("constant", (c,))

    @classmethod
    def W_T(cls) -> "TerminalCondition":
        return cls("linear_W", (1.0, 0.0))

    @classmethod
    def put(cls, strike: float) -> "TerminalCondition":
        return cls("put", (strike,))

    @property
    def deterministic(self) -> bool:
        return self.form == "constant"

    def scaled(self, lam: float) -> "TerminalCondition":
        return TerminalCondition(self.form, self.params, self.scale * lam, self.shift * lam)

    def shifted(self, c: float) -> "TerminalCondition":
        return TerminalCondition(self.form, self.params, self.scale, self.shift + c)

    def of(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        p = self.params
        if self.form == "constant":
            raw = np.full(w.shape, p[0])
        elif self.form == "linear_W":
            raw = p[0] * w + p[1]
        elif self.form == "put":
            raw = np.maximum(p[0] - w, 0.0)
        else:
            raw = np.maximum(w - p[0], 0.0)
        return self.scale * raw + self.shift

    def values(self, ensemble: PathEnsemble) -> np.ndarray:
        return self.of(ensemble.W[:, -1])


@dataclass(frozen=True)
class RegressionBasis:
    """Monomials in ``(W_{t_i}, B_T - B_{t_i})`` of total degree ``<= degree``.

    ``obstacle_powers = q > 0`` appends ``S_i, S_i^2, ..., S_i^q`` (the obstacle
    value at the same step, itself a function of the conditioning state).
    """

    degree: int = 1
    obstacle_powers: int = 0

    def __post_init__(self):
        if self.degree < 0 or self.obstacle_powers < 0:
            raise ValueError("basis degree and obstacle_powers must be nonnegative")

    @property
    def monomial_count(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def exponents(self) -> list[tuple[int, int]]:
        return [(tot - j, j) for tot in range(self.degree + 1) for j in range(tot + 1)]

    def features(self, w: np.ndarray, b_tail: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
        cols = [w**p * b_tail**q for p, q in self.exponents()]
        if self.obstacle_powers and s is not None:
            cols += [s**k for k in range(1, self.obstacle_powers + 1)]
        return np.column_stack(cols)

    def features_at(self, ensemble: PathEnsemble, i: int, S: np.ndarray | None = None) -> np.ndarray:
        s = None if S is None else S[:, i]
        return self.features(ensemble.W[:, i], ensemble.B[:, -1] - ensemble.B[:, i], s)


class Projector:
    """Least-squares projector onto the column span of a feature matrix.

    Columns are scaled to unit norm and factored with an unpivoted Householder
    QR, so ``|R_jj|`` is the distance of column ``j`` from the span of columns
    ``0..j-1``. Columns within ``1e-10`` of that span are dropped, which keeps
    the lowest-index member of any dependent set.
    """

    def __init__(self, features: np.ndarray):
        X = np.asarray(features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        M, p = X.shape
        if M < p:
            raise ValueError(f"regression needs at least as many samples as features (M={M} < p={p})")
        norms = np.linalg.norm(X, axis=0)
        self.scale = np.where(norms > 0, norms, 1.0)
        Xs = X / self.scale
        Q, R = np.linalg.qr(Xs)
        diag = np.abs(np.diag(R))
        self.keep = (norms > 0) & (diag > _DROP_RTOL)
        if not np.any(self.keep):
            self.Q = np.zeros((M, 0))
            self.R = np.zeros((0, 0))
        elif np.all(self.keep):
            self.Q, self.R = Q, R
        else:
            self.Q, self.R = np.linalg.qr(Xs[:, self.keep])
        self.p = p

    def project(self, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients (original feature scale, zero for dropped columns) and fitted values."""
        y = np.asarray(targets, dtype=float)
        qty = self.Q.T @ y
        fitted = self.Q @ qty
        coef = np.zeros((self.p,) + y.shape[1:])
        if self.R.size:
            coef[self.keep] = solve_triangular(self.R, qty, check_finite=False)
        coef /= self.scale.reshape((-1,) + (1,) * (y.ndim - 1))
        return coef, fitted


def condexp_project(targets, features) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fit of ``targets`` (``M`` or ``M x k``) on ``features`` (``M x p``)."""
    return Projector(features).project(targets)


@dataclass
class SolutionTriple:
    """Discrete ``(Y, Z, K)``: Y and K are ``M x (N+1)``, Z is ``M x N``.

    ``S`` holds the obstacle values used in the solve (None if absent).
    """

    Y: np.ndarray
    Z: np.ndarray
    K: np.ndarray
    S: np.ndarray | None = None

    @property
    def dK(self) -> np.ndarray:
        return np.diff(self.K, axis=1)

    def scaled_copy(self, lam: float) -> "SolutionTriple":
        return SolutionTriple(lam * self.Y, lam * self.Z, lam * self.K, None if self.S is None else lam * self.S)


def check_terminal_compatibility(xi: np.ndarray, S: np.ndarray | None) -> None:
    if S is None:
        return
    bad = np.flatnonzero(S[:, -1] > xi)
    if bad.size:
        m = int(bad[0])
        raise TerminalCompatibilityError(
            f"obstacle exceeds terminal value on {bad.size} path(s), first path {m}: "
            f"S_T={S[m, -1]!r} > xi={xi[m]!r} (assumption H6 requires S_T <= xi)")


def solve_frozen(ensemble: PathEnsemble, F: np.ndarray, G: np.ndarray, xi: np.ndarray,
                 S: np.ndarray | None, basis: RegressionBasis) -> SolutionTriple:
    """Solve the reflected problem with frozen integrands ``F``, ``G`` (both ``M x (N+1)``).

    ``F`` is used at left nodes ``0..N-1``; ``G`` at right nodes ``1..N`` against
    ``dB_i``. Both regressions at step ``i`` share one factorisation.
    """
    M, N, dt = ensemble.M, ensemble.N, ensemble.dt
    xi = np.asarray(xi, dtype=float)
    F = np.broadcast_to(np.asarray(F, dtype=float), (M, N + 1))
    G = np.broadcast_to(np.asarray(G, dtype=float), (M, N + 1))
    if xi.shape != (M,):
        raise ValueError(f"xi must have shape ({M},), got {xi.shape}")
    if S is not None and S.shape != (M, N + 1):
        raise ValueError(f"obstacle values must have shape ({M}, {N + 1})")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G)) and np.all(np.isfinite(xi))):
        raise FloatingPointError("non-finite terminal value or generator input")
    check_terminal_compatibility(xi, S)

    Y = np.empty((M, N + 1))
    Z = np.empty((M, N))
    dK = np.zeros((M, N))
    Y[:, N] = xi
    dW, dB = ensemble.dW, ensemble.dB
    for i in range(N - 1, -1, -1):
        target = Y[:, i + 1] + F[:, i] * dt + G[:, i + 1] * dB[:, i]
        if not np.all(np.isfinite(target)):
            raise FloatingPointError(f"non-finite regression target at step {i}")
        proj = Projector(basis.features_at(ensemble, i, S))
        _, y_tilde = proj.project(target)
        if not np.all(np.isfinite(y_tilde)):
            raise FloatingPointError(f"non-finite regression output at step {i}")
        # centred target: same limit since E_i[dW_i] = 0, and invariant under shifts of the data
        _, Z[:, i] = proj.project((target - y_tilde) * dW[:, i] / dt)
        if S is None:
            Y[:, i] = y_tilde
        else:
            Y[:, i] = np.maximum(y_tilde, S[:, i])
            dK[:, i] = Y[:, i] - y_tilde
    K = np.zeros((M, N + 1))
    np.cumsum(dK, axis=1, out=K[:, 1:])
    return SolutionTriple(Y, Z, K, S)


def equation_residual(ensemble: PathEnsemble, Y, Z, K, F, G) -> np.ndarray:
    """``Y_i - (Y_{i+1} + F_i dt + G_{i+1} dB_i + dK_i - Z_i dW_i)`` for ``i < N``."""
    Y, Z, K = (np.asarray(a, dtype=float) for a in (Y, Z, K))
    M, N = ensemble.M, ensemble.N
    F = np.broadcast_to(np.asarray(F, dtype=float), (M, N + 1))
    G = np.broadcast_to(np.asarray(G, dtype=float), (M, N + 1))
    return Y[:, :-1] - (Y[:, 1:] + F[:, :-1] * ensemble.dt + G[:, 1:] * ensemble.dB
                        + np.diff(K, axis=1) - Z * ensemble.dW)


def invariant_violations(sol: SolutionTriple, xi: np.ndarray, beta: float, dt: float,
                         residual_tol: float = 1e-12) -> list[str]:
    """Names of the solution-triple invariants that fail on some path."""
    out = []
    if np.any(sol.K[:, 0] != 0):
        out.append("K_0 = 0")
    if np.any(np.diff(sol.K, axis=1) < 0):
        out.append("K nondecreasing")
    if np.any(sol.Y[:, -1] != xi):
        out.append("Y_N = xi")
    if sol.S is not None:
        if np.any(sol.Y < sol.S):
            out.append("Y >= S")
        w = np.exp(beta * np.arange(sol.Y.shape[1] - 1) * dt)
        resid = np.abs(np.sum(w * (sol.Y[:, :-1] - sol.S[:, :-1]) * sol.dK, axis=1))
        if np.any(resid > residual_tol):
            out.append("Skorokhod condition")
    elif np.any(sol.K != 0):
        out.append("K = 0 without obstacle")
    return out
