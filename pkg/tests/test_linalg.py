import importlib
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priorest import _kernels, _pykernels, linalg
from priorest.errors import ValidationError

from conftest import random_hermitian


def herm(seed, n):
    return random_hermitian(np.random.default_rng(seed), n)


@given(st.integers(0, 10_000), st.integers(1, 12))
@settings(max_examples=60, deadline=None)
def test_eig_reconstructs_and_sorts(seed, n):
    h = herm(seed, n)
    spec = linalg.eig_hermitian(h)
    assert np.all(np.diff(spec.eigenvalues) >= 0)
    assert np.allclose(spec.reconstruct(), h, atol=1e-12 * max(1, np.abs(h).max()))
    v = spec.eigenvectors
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
    assert np.allclose(spec.eigenvalues, np.linalg.eigvalsh(h), atol=1e-11)


def test_eig_phase_convention():
    spec = linalg.eig_hermitian(herm(3, 6))
    v = spec.eigenvectors
    for k in range(v.shape[1]):
        i = np.argmax(np.abs(v[:, k]))
        assert abs(v[i, k].imag) < 1e-14 and v[i, k].real > 0


def test_eig_is_deterministic():
    h = herm(5, 8)
    a, b = linalg.eig_hermitian(h), linalg.eig_hermitian(h.copy())
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_eig_rejects_non_hermitian():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError, match=r"entry \(0, 1\)"):
        linalg.eig_hermitian(a)


def test_degenerate_spectrum():
    spec = linalg.eig_hermitian(np.diag([1.0, 1.0, 2.0]))
    assert np.allclose(spec.eigenvalues, [1, 1, 2])
    assert np.allclose(spec.reconstruct(), np.diag([1.0, 1.0, 2.0]))


def test_kron_convention():
    a = np.arange(4).reshape(2, 2)
    b = np.array([[1, 10], [100, 1000]])
    k = linalg.kron(a, b)
    for i in range(2):
        for j in range(2):
            for r in range(2):
                for c in range(2):
                    assert k[i * 2 + r, j * 2 + c] == a[i, j] * b[r, c]
    assert np.array_equal(linalg.kron_all(a, b), k)


def test_hermitian_basis_is_orthogonal_and_complete():
    for d in (1, 2, 3, 4):
        basis = linalg.hermitian_basis(d)
        assert len(basis) == d * d
        gram = np.array([[np.vdot(x, y).real for y in basis] for x in basis])
        assert np.allclose(gram, np.diag(np.diag(gram)))
        for e in basis:
            assert np.allclose(e, e.conj().T)


def test_compress_and_lift():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng, 4)
    q, _ = np.linalg.qr(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    c = linalg.compress(q, h)
    assert np.allclose(c, q.conj().T @ h @ q)
    p = linalg.lift(q, np.eye(2))
    assert np.allclose(p @ p, p)
    with pytest.raises(ValidationError, match="orthonormal"):
        linalg.compress(2 * q, h)


def test_backends_agree():
    for n in (1, 2, 5, 16):
        h = herm(n, n)
        for impl in (_pykernels,) + ((_kernels._ext,) if _kernels._ext is not None else ()):
            w, v, sweeps = impl.jacobi_eigh(h.copy())
            assert np.allclose((v * w) @ v.conj().T, h, atol=1e-12)
            assert sweeps >= 0


def test_schur_backends_agree():
    if _kernels._ext is None:
        pytest.skip("compiled extension not built")
    import scipy.sparse as sp
    rng = np.random.default_rng(2)
    n, m = 6, 9
    mats = []
    for _ in range(m):
        a = rng.normal(size=(n, n)) * (rng.random((n, n)) < 0.3)
        mats.append((a + a.T).ravel())
    a = sp.csr_matrix(np.array(mats))
    ptr, r, c = a.indptr.astype(np.intc), (a.indices // n).astype(np.intc), (a.indices % n).astype(np.intc)
    q = rng.normal(size=(n, n))
    x = q @ q.T + np.eye(n)
    s = np.linalg.inv(q.T @ q + np.eye(n))
    ref = np.array([[np.trace(mi.reshape(n, n) @ x @ mj.reshape(n, n) @ s) for mj in mats] for mi in mats])
    for impl in (_pykernels, _kernels._ext):
        assert np.allclose(impl.schur_complement(ptr, r, c, a.data, x, s), ref, atol=1e-12)


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("PRIOREST_PURE_PYTHON", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.jacobi_eigh is _pykernels.jacobi_eigh
    finally:
        monkeypatch.delenv("PRIOREST_PURE_PYTHON")
        importlib.reload(_kernels)
