"""Seeded ensembles of the forward (W) and backward (B) Brownian drivers."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_MAX_SEED = 2**64


def _cumulative(increments: np.ndarray) -> np.ndarray:
    M, N = increments.shape
    out = np.zeros((M, N + 1))
    np.cumsum(increments, axis=1, out=out[:, 1:])
    return out


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``M`` paths of two independent Brownian motions on a uniform ``N``-step grid.

    Increments are stored as ``np.diff`` of the cumulative paths, so
    ``W[:, i+1] - W[:, i] == dW[:, i]`` holds bit-for-bit.
    """

    W: np.ndarray
    B: np.ndarray
    T: float
    seed: int | None = None
    dW: np.ndarray = field(init=False, repr=False)
    dB: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        B = np.array(self.B, dtype=float)
        if W.ndim != 2 or W.shape != B.shape or W.shape[1] < 2:
            raise ValueError("W and B must be matching M x (N+1) arrays with N >= 1")
        if np.any(W[:, 0] != 0) or np.any(B[:, 0] != 0):
            raise ValueError("W and B must start at 0")
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        dW, dB = np.diff(W, axis=1), np.diff(B, axis=1)
        for arr in (W, B, dW, dB):
            arr.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "dW", dW)
        object.__setattr__(self, "dB", dB)

    @classmethod
    def from_increments(cls, dW, dB, T: float, seed: int | None = None) -> "PathEnsemble":
        dW = np.atleast_2d(np.asarray(dW, dtype=float))
        dB = np.atleast_2d(np.asarray(dB, dtype=float))
        return cls(_cumulative(dW), _cumulative(dB), T, seed)

    @property
    def M(self) -> int:
        return self.W.shape[0]

    @property
    def N(self) -> int:
        return self.W.shape[1] - 1

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    @property
    def B_tail(self) -> np.ndarray:
        """``B_T - B_{t_i}`` for every path and grid index."""
        return self.B[:, -1:] - self.B

    def coarsened(self, N: int) -> "PathEnsemble":
        """Same Brownian paths sampled on a coarser grid; ``N`` must divide ``self.N``."""
        if N < 1 or self.N % N:
            raise ValueError(f"N={N} does not divide the ensemble's N={self.N}")
        step = self.N // N
        return PathEnsemble(self.W[:, ::step], self.B[:, ::step], self.T, self.seed)

    def head(self, M: int) -> "PathEnsemble":
        """First ``M`` paths (identical to simulating with ``M`` paths)."""
        if not 1 <= M <= self.M:
            raise ValueError(f"cannot take {M} of {self.M} paths")
        return PathEnsemble(self.W[:M], self.B[:M], self.T, self.seed)


def _fill(out: np.ndarray, seed: int, start: int, stop: int) -> None:
    for m in range(start, stop):
        out[m] = np.random.default_rng([seed, m]).standard_normal(out.shape[1])


def simulate(M: int, N: int, T: float, seed: int, threads: int = 1) -> PathEnsemble:
    """Simulate ``M`` paths of (W, B) with ``N`` steps on ``[0, T]``.

    Path ``m`` draws from its own stream seeded by ``(seed, m)``: the first ``N``
    standard normals drive ``dW``, the next ``N`` drive ``dB``. Output is
    therefore identical for any ``threads`` and any ``M`` that includes path ``m``.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    M, N = int(M), int(N)
    normals = np.empty((M, 2 * N))
    threads = max(1, min(int(threads), M))
    if threads == 1:
        _fill(normals, seed, 0, M)
    else:
        bounds = np.linspace(0, M, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(lambda k: _fill(normals, seed, bounds[k], bounds[k + 1]), range(threads)))
    normals *= np.sqrt(T / N)
    return PathEnsemble.from_increments(normals[:, :N], normals[:, N:], T, seed)


def backward_state(ensemble: PathEnsemble, m: int, i: int) -> tuple[float, float]:
    """Conditioning state ``(W_{t_i}, B_T - B_{t_i})`` of path ``m`` at grid index ``i``."""
    if not 0 <= i <= ensemble.N:
        raise IndexError(f"grid index {i} outside [0, {ensemble.N}]")
    if not 0 <= m < ensemble.M:
        raise IndexError(f"path index {m} outside [0, {ensemble.M})")
    return float(ensemble.W[m, i]), float(ensemble.B[m, -1] - ensemble.B[m, i])


def dump_ensemble(ensemble: PathEnsemble, path: str | Path) -> None:
    """Write ``path,step,dW,dB`` rows for debugging. Not a stable format."""
    M, N = ensemble.M, ensemble.N
    idx_m, idx_i = np.divmod(np.arange(M * N), N)
    table = np.column_stack([idx_m, idx_i, ensemble.dW.ravel(), ensemble.dB.ravel()])
    np.savetxt(path, table, delimiter=",", header="path,step,dW,dB", comments="",
               fmt=["%d", "%d", "%.17g", "%.17g"])
