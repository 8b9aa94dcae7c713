"""Pure-numpy versions of the compiled kernels in ``_ext.pyx``.

Both modules expose the same two functions with the same signatures; the
choice between them is made once, in ``priorest._kernels``.
"""

import numpy as np
import scipy.sparse as sp

_CHUNK = 1024


def jacobi_eigh(a, max_sweeps=100):
    """Cyclic Jacobi diagonalisation of a complex Hermitian matrix.

    Returns the (unsorted) eigenvalues and the unitary whose columns are the
    matching eigenvectors.  ``a`` is not modified.
    """
    a = np.array(a, dtype=np.complex128, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    if n < 2:
        return a.diagonal().real.copy(), v, 0
    frob = np.linalg.norm(a)
    if frob == 0.0:
        return np.zeros(n), v, 0
    skip = 1e-18 * frob
    sweeps = 0
    iu = np.triu_indices(n, 1)
    for sweeps in range(1, max_sweeps + 1):
        off = np.sqrt(2.0 * np.sum(np.abs(a[iu]) ** 2))
        if off <= 1e-15 * frob:
            sweeps -= 1
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g <= skip:
                    a[p, q] = a[q, p] = 0.0
                    continue
                u = apq / g
                theta = (a[q, q].real - a[p, p].real) / (2.0 * g)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                uc = u.conjugate()
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * uc * col_q
                a[:, q] = s * col_p + c * uc * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * u * row_q
                a[q, :] = s * row_p + c * u * row_q
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * uc * vq
                v[:, q] = s * vp + c * uc * vq
    return a.diagonal().real.copy(), v, sweeps


def schur_complement(ptr, rows, cols, vals, x, sinv):
    """M[i, j] = tr(A_i X A_j S^-1) for sparse symmetric A_i stored in CSR-by-constraint form.

    ``ptr`` has length m + 1; the entries of constraint ``i`` are
    ``rows/cols/vals[ptr[i]:ptr[i+1]]`` and list both triangles.
    """
    m = len(ptr) - 1
    nnz = int(ptr[-1])
    out = np.zeros((m, m))
    if nnz == 0:
        return out
    owner = np.repeat(np.arange(m), np.diff(ptr))
    incidence = sp.csr_matrix((np.ones(nnz), (np.arange(nnz), owner)), shape=(nnz, m))
    vals = np.asarray(vals, dtype=float)
    right = vals[None, :] * x[:, rows]  # X[., r_f] v_f
    sinv_c = sinv[cols, :]  # S^-1[c_f, .]
    for start in range(0, nnz, _CHUNK):
        stop = min(start + _CHUNK, nnz)
        sl = slice(start, stop)
        # K[e, f] = v_e v_f X[c_e, r_f] S^-1[c_f, r_e]
        k = (vals[sl, None] * right[cols[sl], :]) * sinv_c[:, rows[sl]].T
        out += incidence[sl].T @ (incidence.T @ k.T).T
    return out
