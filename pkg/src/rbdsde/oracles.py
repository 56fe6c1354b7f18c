"""Independent reference solutions: closed forms on an ensemble and dense deterministic solvers.

None of these call the regression scheme; they exist so that solver outputs
can be compared with something computed a different way.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .paths import PathEnsemble
from .scheme import ObstacleSpec, TerminalCondition

_TREE_AGREEMENT = 5e-3


@dataclass
class ReferenceTable:
    """Reference values on a dense time grid, with optional extra columns (e.g. ``K``)."""

    times: np.ndarray
    values: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def at(self, t) -> np.ndarray | float:
        """Linear interpolation of ``values`` at ``t``."""
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def extra_at(self, name: str, t) -> np.ndarray | float:
        out = np.interp(t, self.times, self.extras[name])
        return float(out) if np.ndim(out) == 0 else out

    @property
    def initial(self) -> float:
        return float(self.values[0])

    def to_csv(self, path: str | Path) -> None:
        names = sorted(self.extras)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Y"] + names)
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t)), repr(float(self.values[i]))]
                           + [repr(float(self.extras[n][i])) for n in names])


def martingale_reference(ensemble: PathEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """``Y = W``, ``Z = 1``: the exact solution for ``xi = W_T`` with zero generators."""
    return ensemble.W.copy(), np.ones((ensemble.M, ensemble.N))


def backward_integral_reference(ensemble: PathEnsemble, c: float) -> tuple[np.ndarray, np.ndarray]:
    """``Y_i = W_i + c (B_N - B_i)``, ``Z = 1``: exact for ``xi = W_T``, ``f = 0``, ``g = c``."""
    Y = ensemble.W + c * ensemble.B_tail
    return Y, np.ones((ensemble.M, ensemble.N))


def _check_delay(delta0: float, T: float):
    if not T > 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if not 0 < delta0 <= T:
        raise ValueError(f"delay delta0 must satisfy 0 < delta0 <= T={T}, got {delta0}")


def delay_ode_closed_form(a: float, delta0: float, T: float, xi0: float, t) -> np.ndarray | float:
    """Exact solution of ``Y(t) = xi0 + a int_t^T Y(s - delta0) ds`` with ``Y = 0`` before 0.

    Differentiating gives ``Y'(t) = -a Y(t - delta0)``; by linearity
    ``Y = xi0 phi / phi(T)`` with the method-of-steps series
    ``phi(t) = sum_k (-a)^k (t - k delta0)_+^k / k!``.
    """
    _check_delay(delta0, T)

    def phi(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for k in range(int(math.floor(T / delta0)) + 1):
            x = s - k * delta0
            out += np.where(x >= 0, (-a) ** k * np.maximum(x, 0.0) ** k / math.factorial(k), 0.0)
        return out

    pT = float(phi(T))
    if pT == 0:
        raise ZeroDivisionError(f"delay equation is singular for a={a}, delta0={delta0}, T={T}")
    out = xi0 * phi(t) / pT
    return float(out) if np.ndim(out) == 0 else out


def delay_ode_reference(a: float, delta0: float, T: float, xi0: float, dense_N: int = 20_000) -> ReferenceTable:
    """Dense rectangle-rule solve of the delayed integral equation.

    The integrand at ``s`` lies ``delta0`` in the past, so a backward sweep from
    ``T`` would need unknown values. Instead the unit-start solution ``phi``
    (``phi = 1`` on ``[0, delta0]``) is marched forward with
    ``phi_{j+1} = phi_j - a h phi_{j-d}``; linearity then fixes the scale from
    ``Y(T) = xi0``.
    """
    _check_delay(delta0, T)
    if dense_N < 10_000:
        raise ValueError(f"dense_N must be at least 10000, got {dense_N}")
    h = T / dense_N
    d = int(round(delta0 / h))
    phi = np.empty(dense_N + 1)
    phi[0] = 1.0
    for j in range(dense_N):
        lagged = phi[j - d] if j - d >= 0 else 0.0
        phi[j + 1] = phi[j] - a * h * lagged
    if phi[-1] == 0:
        raise ZeroDivisionError(f"delay equation is singular for a={a}, delta0={delta0}, T={T}")
    return ReferenceTable(np.linspace(0.0, T, dense_N + 1), xi0 * phi / phi[-1])


def _snell_deterministic(obstacle: ObstacleSpec, xi: float, T: float, dense_N: int) -> ReferenceTable:
    t = np.linspace(0.0, T, dense_N + 1)
    S = obstacle.of(t, np.zeros_like(t))
    # Z = 0 and Y_t = xi + K_T - K_t, so Y is the running max of S from the right, floored at xi
    Y = np.maximum(np.maximum.accumulate(S[::-1])[::-1], xi)
    return ReferenceTable(t, Y, {"K": Y[0] - Y})


def binomial_snell(obstacle: ObstacleSpec, terminal: TerminalCondition, T: float, n: int) -> float:
    """Value at 0 of ``max(S, E[next])`` on an ``n``-step recombining tree for ``W``."""
    h = T / n
    dx = math.sqrt(h)
    w = dx * (2.0 * np.arange(n + 1) - n)
    V = terminal.of(w)
    if obstacle.present:
        V = np.maximum(V, obstacle.of(T, w))
    for j in range(n - 1, -1, -1):
        w = dx * (2.0 * np.arange(j + 1) - j)
        V = 0.5 * (V[:-1] + V[1:])
        if obstacle.present:
            V = np.maximum(V, obstacle.of(j * h, w))
    return float(V[0])


@dataclass
class SnellReference:
    Y0: float
    table: ReferenceTable | None = None
    resolutions: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    @property
    def agreement(self) -> float:
        """Relative gap between the two tree resolutions (0 for closed-form cases)."""
        if len(self.values) < 2:
            return 0.0
        return abs(self.values[1] - self.values[0]) / max(abs(self.values[1]), 1e-300)


def snell_reference(obstacle: ObstacleSpec, terminal: TerminalCondition, T: float,
                    dense_N: int = 2000) -> SnellReference:
    """Zero-generator reflected solution.

    Deterministic obstacle and terminal value: exact running maximum on a dense
    grid. Obstacle depending on ``W``: binomial tree at ``dense_N`` and
    ``2 dense_N`` steps, accepted only if they agree to 0.5% relative.
    """
    if not obstacle.present:
        if terminal.deterministic:
            xi = float(terminal.of(0.0))
            t = np.linspace(0.0, T, dense_N + 1)
            return SnellReference(xi, ReferenceTable(t, np.full_like(t, xi), {"K": np.zeros_like(t)}))
    elif obstacle.form == "deterministic" and terminal.deterministic:
        table = _snell_deterministic(obstacle, float(terminal.of(0.0)), T, dense_N)
        return SnellReference(table.initial, table)
    coarse = binomial_snell(obstacle, terminal, T, dense_N)
    fine = binomial_snell(obstacle, terminal, T, 2 * dense_N)
    ref = SnellReference(fine, None, (dense_N, 2 * dense_N), (coarse, fine))
    if ref.agreement >= _TREE_AGREEMENT:
        raise RuntimeError(f"tree oracle not resolved: {coarse:.6g} at {dense_N} steps vs "
                           f"{fine:.6g} at {2 * dense_N} (relative gap {ref.agreement:.3g} >= 0.5%)")
    return ref


def bachelier_put(strike: float, T: float) -> float:
    """``E[(strike - W_T)^+]``; equals the Snell value for the put obstacle since W is a martingale."""
    s = math.sqrt(T)
    d = strike / s
    return float(strike * norm.cdf(d) + s * norm.pdf(d))
