import numpy as np
import pytest

from cppc.jacobi import EigenSolverError, jacobi_eigh


def test_agrees_with_lapack_on_random_matrices():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 5, 8, 20, 40):
        a = rng.standard_normal((n, n))
        a = a + a.T
        w, v = jacobi_eigh(a)
        assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10)
        assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)
        assert np.allclose(v.T @ v, np.eye(n), atol=1e-12)


def test_eigenvalues_sorted_ascending():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    w, _ = jacobi_eigh(a + a.T)
    assert np.all(np.diff(w) >= 0)


def test_handles_zero_and_diagonal():
    w, v = jacobi_eigh(np.zeros((3, 3)))
    assert np.all(w == 0.0)
    w, _ = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(w, [-1.0, 2.0, 3.0])


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        jacobi_eigh(np.ones((2, 3)))
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[np.inf, 0.0], [0.0, 1.0]]))


def test_nonconvergence_reported():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((8, 8))
    with pytest.raises(EigenSolverError):
        jacobi_eigh(a + a.T, max_sweeps=0)
