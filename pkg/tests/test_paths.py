import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbdsde.paths import PathEnsemble, backward_state, dump_ensemble, simulate


def test_determinism_single_path():
    a, b = simulate(1, 1, 1.0, 5), simulate(1, 1, 1.0, 5)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.B, b.B)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_thread_count_does_not_change_output(threads):
    a = simulate(257, 6, 2.0, 99, threads=1)
    b = simulate(257, 6, 2.0, 99, threads=threads)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.B, b.B)


def test_prefix_paths_identical():
    big, small = simulate(300, 5, 1.0, 4), simulate(40, 5, 1.0, 4)
    assert np.array_equal(big.W[:40], small.W)
    assert np.array_equal(big.head(40).B, small.B)


@given(st.integers(1, 30), st.integers(1, 30), st.floats(0.1, 5.0), st.integers(0, 2**63))
def test_increments_exact(M, N, T, seed):
    ens = simulate(M, N, T, seed)
    assert np.all(ens.W[:, 0] == 0) and np.all(ens.B[:, 0] == 0)
    assert np.array_equal(ens.W[:, 1:] - ens.W[:, :-1], ens.dW)
    assert np.array_equal(ens.B[:, 1:] - ens.B[:, :-1], ens.dB)


def test_moments_large_ensemble():
    M, N = 100_000, 1
    ens = simulate(M, N, 1.0, 2024)
    band = 5 * np.sqrt(1.0 / M)
    assert abs(ens.dW.mean()) < 0.016 and abs(ens.dB.mean()) < 0.016
    assert abs(np.corrcoef(ens.dW[:, 0], ens.dB[:, 0])[0, 1]) < 0.016
    # var of a sample variance is 2 dt^2 / M
    assert abs(ens.dW.var(ddof=1) - 1.0) < 5 * np.sqrt(2.0 / M)
    assert band < 0.016


def test_variance_per_column():
    ens = simulate(20_000, 4, 2.0, 3)
    se = ens.dt * np.sqrt(2.0 / ens.M)
    assert np.all(np.abs(ens.dW.var(axis=0, ddof=1) - ens.dt) < 5 * se)
    assert np.all(np.abs(ens.dB.var(axis=0, ddof=1) - ens.dt) < 5 * se)


@pytest.mark.parametrize("args", [(0, 1, 1.0, 0), (1, 0, 1.0, 0), (1, 1, 0.0, 0), (1, 1, -1.0, 0), (1, 1, 1.0, -1)])
def test_rejects_bad_inputs(args):
    with pytest.raises(ValueError):
        simulate(*args)


def test_backward_state():
    ens = PathEnsemble.from_increments([[0.5, -0.2]], [[1.0, 2.0]], T=1.0)
    assert backward_state(ens, 0, 1) == (0.5, 2.0)
    assert backward_state(ens, 0, 0) == (0.0, 3.0)
    assert backward_state(ens, 0, 2) == (pytest.approx(0.3), 0.0)
    with pytest.raises(IndexError):
        backward_state(ens, 0, 3)
    with pytest.raises(IndexError):
        backward_state(ens, 1, 0)


def test_coarsened_sums_increments():
    ens = simulate(7, 12, 1.0, 8)
    c = ens.coarsened(4)
    assert c.N == 4 and c.dt == pytest.approx(0.25)
    assert np.allclose(c.dW, ens.dW.reshape(7, 4, 3).sum(axis=2))
    with pytest.raises(ValueError):
        ens.coarsened(5)


def test_ensemble_is_read_only():
    ens = simulate(3, 3, 1.0, 0)
    with pytest.raises(ValueError):
        ens.W[0, 1] = 1.0


def test_dump(tmp_path):
    ens = simulate(2, 3, 1.0, 0)
    p = tmp_path / "ens.csv"
    dump_ensemble(ens, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "path,step,dW,dB"
    assert len(lines) == 1 + 6
    m, i, dw, db = lines[4].split(",")
    assert (int(m), int(i)) == (1, 0) and float(dw) == ens.dW[1, 0] and float(db) == ens.dB[1, 0]
