"""Backend equivalence and contracts of the propagation kernels."""

import numpy as np
import pytest
import scipy.linalg

from sympsturm._kernels import fallback

try:
    from sympsturm._kernels import _fast
except ImportError:
    _fast = None

needs_ext = pytest.mark.skipif(_fast is None, reason="compiled kernel not built")


def test_fallback_expm_matches_scipy():
    rng = np.random.default_rng(11)
    for dim in (2, 4, 6):
        A = rng.standard_normal((dim, dim))
        np.testing.assert_allclose(fallback.expm(A), scipy.linalg.expm(A),
                                   rtol=1e-12, atol=1e-12)


def test_fallback_propagate_is_cumulative_product():
    rng = np.random.default_rng(12)
    gens = rng.standard_normal((9, 4, 4)) * 0.3
    dts = rng.uniform(0.05, 0.2, size=9)
    out = fallback.propagate(gens, dts)
    assert out.shape == (10, 4, 4)
    np.testing.assert_allclose(out[0], np.eye(4), atol=1e-15)
    acc = np.eye(4)
    for k in range(9):
        acc = scipy.linalg.expm(dts[k] * gens[k]) @ acc
        np.testing.assert_allclose(out[k + 1], acc, rtol=1e-12, atol=1e-12)


@needs_ext
def test_compiled_expm_matches_fallback():
    rng = np.random.default_rng(13)
    for dim in (2, 3, 4, 8):
        A = rng.standard_normal((dim, dim)) * rng.uniform(0.1, 3.0)
        np.testing.assert_allclose(_fast.expm(A), fallback.expm(A),
                                   rtol=1e-11, atol=1e-11)


@needs_ext
def test_compiled_propagate_matches_fallback():
    rng = np.random.default_rng(14)
    gens = rng.standard_normal((32, 6, 6)) * 0.4
    dts = rng.uniform(0.01, 0.1, size=32)
    np.testing.assert_allclose(_fast.propagate(gens, dts),
                               fallback.propagate(gens, dts),
                               rtol=1e-11, atol=1e-11)


def test_propagate_of_hamiltonian_generators_is_symplectic():
    """exp of J0 B steps must preserve the form to roundoff."""
    rng = np.random.default_rng(15)
    n = 2
    J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    B = rng.standard_normal((2 * n, 2 * n))
    B = 0.5 * (B + B.T)
    gens = np.repeat((J @ B)[None], 20, axis=0)
    out = fallback.propagate(gens, np.full(20, 0.05))
    for M in out:
        np.testing.assert_allclose(M.T @ J @ M, J, atol=1e-12)


def test_backend_selection_env(monkeypatch):
    import importlib
    import sympsturm._kernels as K

    monkeypatch.setenv("SYMPSTURM_NO_EXT", "1")
    mod = importlib.reload(K)
    assert mod.IMPLEMENTATION == "python"
    monkeypatch.delenv("SYMPSTURM_NO_EXT")
    importlib.reload(K)
