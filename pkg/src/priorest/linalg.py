"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Functions that
require Hermitian input validate it and raise :class:`ValidationError` with the
offending entry in the message.
"""

from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ValidationError

HERMITIAN_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, orthonormal

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def as_hermitian(a, tol=HERMITIAN_TOL, name="matrix"):
    """Return ``a`` as a complex array after checking it is Hermitian within ``tol``."""
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} is not square: shape {a.shape}")
    dev = np.abs(a - a.conj().T)
    if a.size and dev.max() > tol:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValidationError(
            f"{name} is not Hermitian: entry ({i}, {j}) = {a[i, j]} but ({j}, {i}) = {a[j, i]}"
        )
    return a


def hermitian_part(a):
    a = np.asarray(a, dtype=np.complex128)
    return 0.5 * (a + a.conj().T)


def _fix_phases(v):
    # largest-magnitude component of each column made real-positive; ties go to the lowest index
    mags = np.abs(v)
    out = v.copy()
    for k in range(v.shape[1]):
        col = mags[:, k]
        idx = int(np.flatnonzero(col >= col.max() * (1 - 1e-9))[0])
        z = v[idx, k]
        if z != 0:
            out[:, k] *= abs(z) / z
    return out


def eig_hermitian(h, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in ascending order.  Each eigenvector has its
    largest-magnitude component real and positive, so the output is
    reproducible for a fixed input.

    Raises
    ------
    ValidationError
        If ``h`` is not Hermitian within ``tol``.
    """
    h = as_hermitian(h, tol, name="H")
    w, v, _ = _kernels.jacobi_eigh(hermitian_part(h))
    order = np.argsort(w, kind="stable")
    return SpectralDecomposition(w[order], _fix_phases(v[:, order]))


def kron(a, b):
    """Kronecker product; ``kron(a, b)[i*rb + k, j*cb + l] == a[i, j] * b[k, l]``."""
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(*mats):
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def check_orthonormal(basis, tol=1e-8, name="basis"):
    basis = as_matrix(basis, name)
    gram = basis.conj().T @ basis
    err = np.abs(gram - np.eye(basis.shape[1])).max() if basis.shape[1] else 0.0
    if err > tol:
        raise ValidationError(f"{name} columns are not orthonormal (max Gram deviation {err:.3e})")
    return basis


def compress(basis, a, tol=1e-8):
    """Matrix of ``a`` on the subspace spanned by the orthonormal columns of ``basis``.

    ``out[i, j] = <v_i| a |v_j>``.
    """
    basis = check_orthonormal(basis, tol)
    a = as_hermitian(a, name="operator")
    return hermitian_part(basis.conj().T @ a @ basis)


def lift(basis, b):
    """Inverse of :func:`compress`: ``V b V^dagger`` on the full space."""
    return basis @ b @ basis.conj().T


def hermitian_basis(dim):
    """Real-orthogonal basis of dim x dim Hermitian matrices.

    Ordered as the diagonal units, then for each pair i < j the symmetric
    real element followed by the antisymmetric imaginary one.  Has ``dim**2``
    elements.
    """
    out = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=np.complex128)
        e[i, i] = 1.0
        out.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = e[j, i] = 1.0
            out.append(e)
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = 1j
            e[j, i] = -1j
            out.append(e)
    return out


def psd_floor_ok(a, floor=-1e-10):
    return eig_hermitian(a, tol=1e-9).eigenvalues[0] >= floor
