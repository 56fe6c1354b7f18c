"""Finitely-atomic delay measures on [-T, 0] and delayed path aggregates.

Paths are zero-extended before time 0: ``x(v) = 0`` for ``v < 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_WEIGHT_SUM_TOL = 1e-12


class LagSnapWarning(UserWarning):
    """A delay lag did not fall on the time grid and was moved to the nearest node."""


@dataclass(frozen=True)
class DelayMeasure:
    """Probability measure ``sum_j w_j * delta_{u_j}`` with lags ``-T <= u_j <= 0``.

    Atoms must be sorted by lag with no duplicates. Use :meth:`from_pairs` to
    build one from unsorted ``[lag, weight]`` pairs.
    """

    lags: tuple[float, ...]
    weights: tuple[float, ...]
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(float(u) for u in self.lags))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.horizon > 0:
            raise ValueError(f"delay horizon must be positive, got {self.horizon}")
        if len(self.lags) != len(self.weights):
            raise ValueError("lags and weights must have the same length")
        if not self.lags:
            raise ValueError("delay measure needs at least one atom")
        for j, (u, w) in enumerate(zip(self.lags, self.weights)):
            if not (-self.horizon <= u <= 0.0):
                raise ValueError(f"atom {j}: lag {u} outside [-{self.horizon}, 0]")
            if not w > 0:
                raise ValueError(f"atom {j}: weight {w} must be positive")
            if j > 0:
                prev = self.lags[j - 1]
                if u == prev:
                    raise ValueError(f"atom {j}: duplicate lag {u}")
                if u < prev:
                    raise ValueError(f"atom {j}: lags must be sorted ascending")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], horizon: float) -> "DelayMeasure":
        """Build from ``[lag, weight]`` pairs in any order (config-file form)."""
        atoms = []
        for j, pair in enumerate(pairs):
            if len(pair) != 2:
                raise ValueError(f"atom {j}: expected [lag, weight], got {pair!r}")
            atoms.append((float(pair[0]), float(pair[1]), j))
        atoms.sort(key=lambda a: a[0])
        for (u0, _, j0), (u1, _, j1) in zip(atoms, atoms[1:]):
            if u0 == u1:
                raise ValueError(f"atom {j1}: duplicate lag {u1} (also atom {j0})")
        return cls(tuple(a[0] for a in atoms), tuple(a[1] for a in atoms), horizon)

    @classmethod
    def point_mass(cls, lag: float, horizon: float) -> "DelayMeasure":
        return cls((lag,), (1.0,), horizon)

    def to_pairs(self) -> list[list[float]]:
        return [[u, w] for u, w in zip(self.lags, self.weights)]

    def lag_steps(self, dt: float) -> np.ndarray:
        """Number of grid steps back for each atom (nearest node)."""
        return np.rint(-np.asarray(self.lags) / dt).astype(np.int64)

    def snapped(self, dt: float) -> "DelayMeasure":
        """Return the measure with every lag moved to the nearest multiple of ``dt``.

        Atoms landing on the same node are merged. Emits :class:`LagSnapWarning`
        when any lag moves by more than ``dt/2 * 1e-9``.
        """
        steps = self.lag_steps(dt)
        snapped = -steps * dt
        err = np.abs(snapped - np.asarray(self.lags))
        if np.any(err > 0.5 * dt * 1e-9):
            j = int(np.argmax(err))
            warnings.warn(
                f"delay atom {j}: lag {self.lags[j]} snapped to {snapped[j]} "
                f"(error {err[j]:.3g}, dt={dt})",
                LagSnapWarning,
                stacklevel=2,
            )
        merged: dict[int, float] = {}
        for k, w in zip(steps.tolist(), self.weights):
            merged[k] = merged.get(k, 0.0) + w
        keys = sorted(merged, reverse=True)  # most negative lag first
        lags = tuple(max(-k * dt, -self.horizon) for k in keys)
        return DelayMeasure(lags, tuple(merged[k] for k in keys), self.horizon)


def gamma_tilde(measure: DelayMeasure, beta: float) -> float:
    """Amplification factor ``sum_j w_j exp(-beta u_j)``; at least 1 for ``beta >= 0``."""
    return math.fsum(w * math.exp(-beta * u) for u, w in zip(measure.lags, measure.weights))


def _shifted(path: np.ndarray, k: int) -> np.ndarray:
    """``out[..., i] = path[..., i - k]`` with zeros where ``i - k < 0``."""
    out = np.zeros_like(path, dtype=float)
    if k == 0:
        out[...] = path
    elif k < path.shape[-1]:
        out[..., k:] = path[..., :-k]
    return out


def delayed_aggregate_grid(paths: np.ndarray, measure: DelayMeasure, dt: float) -> np.ndarray:
    """Vectorised ``sum_j w_j x(t_i + u_j)`` at every grid index of ``paths``.

    The last axis is time. Lags are rounded to the nearest grid step.
    """
    paths = np.asarray(paths, dtype=float)
    out = np.zeros_like(paths)
    for k, w in zip(measure.lag_steps(dt).tolist(), measure.weights):
        out += w * _shifted(paths, k)
    return out


def delayed_aggregate(path: Sequence[float], t_index: int, measure: DelayMeasure, dt: float) -> float:
    """gamma-weighted average of past values ``x(t_i + u_j)``, zero before time 0."""
    x = np.asarray(path, dtype=float)
    total = 0.0
    for k, w in zip(measure.lag_steps(dt).tolist(), measure.weights):
        idx = t_index - k
        if idx >= 0:
            total += w * x[idx]
    return float(total)


def delayed_sq_distance(path1, path2, t_index: int, measure: DelayMeasure, dt: float) -> float:
    """``sum_j w_j |x1(t_i + u_j) - x2(t_i + u_j)|^2`` with zero extension."""
    d = np.asarray(path1, dtype=float) - np.asarray(path2, dtype=float)
    return delayed_aggregate(d * d, t_index, measure, dt)


def fubini_sides(paths: np.ndarray, measure: DelayMeasure, beta: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-path sides of ``sum_i e^{b t_i} <x^2>_gamma(t_i) dt <= gamma_tilde sum_r e^{b t_r} x_r^2 dt``.

    Sums run over the columns of ``paths`` (left nodes). The inequality is exact
    for grid-aligned lags since the shift only drops terms past the last column.
    """
    x2 = np.asarray(paths, dtype=float) ** 2
    w = np.exp(beta * np.arange(x2.shape[-1]) * dt)
    lhs = np.sum(w * delayed_aggregate_grid(x2, measure, dt), axis=-1) * dt
    rhs = gamma_tilde(measure, beta) * np.sum(w * x2, axis=-1) * dt
    return lhs, rhs
