"""Dense primal-dual interior-point solver for small semidefinite programs.

Standard form, with block-diagonal real symmetric matrices::

    minimize    <C, X>                  maximize    b.y
    subject to  <A_i, X> = b_i          subject to  sum_i y_i A_i + S = C
                X >= 0                              S >= 0

The iteration is an infeasible-start path-following method with Mehrotra
predictor-corrector steps in the Nesterov-Todd direction.  Constraint matrices are kept
sparse per block; the Schur complement ``M_ij = tr(A_i W A_j W)`` is the
hot loop and is delegated to :mod:`priorest._kernels`.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _kernels
from .errors import SolverError, ValidationError

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98
STALL_ITERS = 10


@dataclass
class SdpProblem:
    """``constraints[k]`` is a sparse (m x n_k**2) matrix whose row i is vec(A_i) on block k."""

    block_dims: list
    c: list
    constraints: list
    b: np.ndarray

    def __post_init__(self):
        self.block_dims = [int(n) for n in self.block_dims]
        self.c = [np.asarray(ck, dtype=float) for ck in self.c]
        self.constraints = [sp.csr_matrix(a) for a in self.constraints]
        self.b = np.asarray(self.b, dtype=float).ravel()
        if len(self.c) != len(self.block_dims) or len(self.constraints) != len(self.block_dims):
            raise ValidationError("one objective block and one constraint block per block dimension")
        for n, ck, ak in zip(self.block_dims, self.c, self.constraints):
            if ck.shape != (n, n):
                raise ValidationError(f"objective block has shape {ck.shape}, expected {(n, n)}")
            if ak.shape != (self.m, n * n):
                raise ValidationError(f"constraint block has shape {ak.shape}, expected {(self.m, n * n)}")
            ak.sum_duplicates()
            ak.sort_indices()

    @property
    def m(self):
        return self.b.size

    @classmethod
    def from_dense(cls, c_blocks, a_blocks, b):
        """Build from dense blocks; ``a_blocks[i][k]`` is constraint i on block k."""
        dims = [np.shape(ck)[0] for ck in c_blocks]
        cons = []
        for k, n in enumerate(dims):
            rows = [np.asarray(a[k], dtype=float).reshape(1, n * n) for a in a_blocks]
            cons.append(sp.csr_matrix(np.vstack(rows)) if rows else sp.csr_matrix((0, n * n)))
        return cls(dims, list(c_blocks), cons, b)

    def op(self, x):
        """A(X): the vector of ``<A_i, X>``."""
        out = np.zeros(self.m)
        for ak, xk in zip(self.constraints, x):
            out += ak @ xk.ravel()
        return out

    def adjoint(self, y):
        """sum_i y_i A_i, blockwise."""
        return [(ak.T @ y).reshape(n, n) for ak, n in zip(self.constraints, self.block_dims)]

    def validate(self, sym_tol=1e-12, cond_limit=1e10):
        for k, (n, ck, ak) in enumerate(zip(self.block_dims, self.c, self.constraints)):
            if np.abs(ck - ck.T).max(initial=0.0) > sym_tol:
                raise ValidationError(f"objective block {k} is not symmetric")
            perm = np.arange(n * n).reshape(n, n).T.ravel()
            if ak.nnz and abs(ak - ak[:, perm]).max() > sym_tol:
                raise ValidationError(f"a constraint matrix on block {k} is not symmetric")
        gram = sum((ak @ ak.T).toarray() for ak in self.constraints)
        if self.m and np.linalg.cond(gram) > cond_limit:
            raise ValidationError("constraint matrices are linearly dependent")
        return self


@dataclass
class SdpSolution:
    x: list
    y: np.ndarray
    s: list
    primal_obj: float
    dual_obj: float
    gap: float
    status: str
    iterations: int
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    history: list = field(default_factory=list, repr=False)


def embed_hermitian(h):
    """Real symmetric ``[[A, -B], [B, A]]`` for Hermitian ``h = A + iB``.

    The embedding is PSD exactly when ``h`` is, and doubles every eigenvalue's
    multiplicity.  Inner products pick up a factor two:
    ``<embed(G), embed(H)> = 2 Re tr(G H)``.
    """
    h = np.asarray(h, dtype=np.complex128)
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])


def _inner(u, v):
    return sum(float(np.vdot(uk, vk)) for uk, vk in zip(u, v))


def _sym(z):
    return 0.5 * (z + z.T)


def _max_step(chol, dx):
    """Largest alpha with X + alpha dX >= 0, given the Cholesky factor of X."""
    w = sla.solve_triangular(chol, dx, lower=True)
    w = sla.solve_triangular(chol, w.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(w))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _schur_dense(ak, n, x, sinv):
    a = ak.toarray().reshape(-1, n, n)
    right = np.einsum("ab,jbc,cd->jad", x, a, sinv, optimize=True)
    return a.reshape(len(a), -1) @ right.reshape(len(a), -1).T


def _chol(z):
    try:
        return np.linalg.cholesky(z)
    except np.linalg.LinAlgError:
        return None


def solve(problem, max_iter=200, tol=1e-8, trace_path=None):
    """Solve ``problem``; returns an :class:`SdpSolution`.

    ``status`` is ``"optimal"`` when relative gap and both residuals are at
    most ``tol``; ``"infeasible"`` when a primal or dual improving ray is
    detected; otherwise ``"max_iter"`` with the best iterate seen (also used
    after ``STALL_ITERS`` iterations without progress).
    """
    p = problem
    dims = p.block_dims
    n_tot = sum(dims)
    # starting scales balance the data norms against the constraint norms
    x0, s0 = [], []
    for k, n in enumerate(dims):
        ak_norms = np.asarray(np.sqrt(p.constraints[k].multiply(p.constraints[k]).sum(axis=1))).ravel()
        xi = max(10.0, np.sqrt(n), *(n * (1.0 + np.abs(p.b)) / (1.0 + ak_norms))) if p.m else 10.0
        eta = max(10.0, np.sqrt(n), np.linalg.norm(p.c[k]), *(ak_norms if p.m else [0.0]))
        x0.append(xi * np.eye(n))
        s0.append(eta * np.eye(n))
    x, s = x0, s0
    y = np.zeros(p.m)
    b_norm = 1.0 + np.linalg.norm(p.b)
    c_norm = 1.0 + np.sqrt(_inner(p.c, p.c))
    kern = [(ak.indptr.astype(np.intc), (ak.indices // n).astype(np.intc),
             (ak.indices % n).astype(np.intc), ak.data) for ak, n in zip(p.constraints, dims)]

    history = []
    best = None
    best_score = np.inf
    since_best = 0
    status = "max_iter"
    it = 0
    for it in range(max_iter + 1):
        aty = p.adjoint(y)
        rp = p.b - p.op(x)
        rd = [ck - ak - sk for ck, ak, sk in zip(p.c, aty, s)]
        pobj = _inner(p.c, x)
        dobj = float(p.b @ y)
        mu = _inner(x, s) / n_tot
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        pinf = np.linalg.norm(rp) / b_norm
        dinf = np.sqrt(_inner(rd, rd)) / c_norm
        history.append((it, pobj, dobj, gap, pinf, dinf, mu))
        log.debug("sdp it=%d pobj=%.10g dobj=%.10g gap=%.2e pinf=%.2e dinf=%.2e", it, pobj, dobj, gap, pinf, dinf)
        score = max(gap, pinf, dinf)
        if score < best_score * 0.999:
            best_score, since_best = score, 0
            best = (list(x), y.copy(), list(s), pobj, dobj, gap, pinf, dinf)
        else:
            since_best += 1
        if gap <= tol and pinf <= tol and dinf <= tol:
            status = "optimal"
            best = (x, y, s, pobj, dobj, gap, pinf, dinf)
            break
        if dobj > 0 and np.sqrt(_inner([a + b for a, b in zip(aty, s)], [a + b for a, b in zip(aty, s)])) <= tol * dobj \
                and dobj > 1e8 * c_norm:
            status = "infeasible"
            break
        if pobj < 0 and np.linalg.norm(p.op(x)) <= tol * abs(pobj) and -pobj > 1e8 * b_norm:
            status = "infeasible"
            break
        if it == max_iter or since_best >= STALL_ITERS:
            break

        chol_x = [_chol(xk) for xk in x]
        chol_s = [_chol(sk) for sk in s]
        if any(c is None for c in chol_x + chol_s):
            # common once the gap is near machine precision; only worth a warning before that
            (log.debug if best_score <= 1e3 * tol else log.warning)(
                "sdp: iterate lost positive definiteness at iteration %d", it)
            break
        # Nesterov-Todd scaling: G^T S G = G^-1 X G^-T = diag(lam), W = G G^T
        g_mats, lams = [], []
        for lx, ls in zip(chol_x, chol_s):
            u, lam, vt = np.linalg.svd(ls.T @ lx)
            g_mats.append(lx @ vt.T / np.sqrt(lam))
            lams.append(lam)
        w_mats = [_sym(g @ g.T) for g in g_mats]
        m_mat = np.zeros((p.m, p.m))
        for (ptr, rows, cols, vals), ak, n, wk in zip(kern, p.constraints, dims, w_mats):
            nnz = int(ptr[-1])
            if not nnz:
                continue
            if nnz * nnz <= p.m * n ** 3 + p.m * p.m * n * n:
                m_mat += _kernels.schur_complement(ptr, rows, cols, vals, wk, wk)
            else:
                m_mat += _schur_dense(ak, n, wk, wk)
        m_mat = _sym(m_mat)
        try:
            factor = sla.cho_factor(m_mat, lower=True)
        except np.linalg.LinAlgError:
            m_mat += 1e-14 * np.trace(m_mat) / max(p.m, 1) * np.eye(p.m)
            try:
                factor = sla.cho_factor(m_mat, lower=True)
            except np.linalg.LinAlgError:
                log.warning("sdp: Schur complement not positive definite at iteration %d", it)
                break
        w_rd_w = [wk @ rdk @ wk for wk, rdk in zip(w_mats, rd)]

        def direction(rc):
            # rc holds the scaled complementarity residuals; solve lam*P + P*lam = rc
            gpg = [g @ (r / (lam[:, None] + lam[None, :])) @ g.T for g, r, lam in zip(g_mats, rc, lams)]
            rhs = rp - p.op(gpg) + p.op(w_rd_w)
            dy = sla.cho_solve(factor, rhs)
            ds = [rdk - ak for rdk, ak in zip(rd, p.adjoint(dy))]
            dx = [_sym(z - wk @ dsk @ wk) for z, wk, dsk in zip(gpg, w_mats, ds)]
            return dx, dy, ds

        def steps(dx, ds):
            ap = min([1.0] + [STEP_FRACTION * _max_step(c, d) for c, d in zip(chol_x, dx)])
            ad = min([1.0] + [STEP_FRACTION * _max_step(c, d) for c, d in zip(chol_s, ds)])
            return ap, ad

        def scaled(g, dx, ds):
            gi = np.linalg.inv(g)
            return gi @ dx @ gi.T, g.T @ ds @ g

        dx_a, dy_a, ds_a = direction([-2.0 * np.diag(lam ** 2) for lam in lams])
        ap_a, ad_a = steps(dx_a, ds_a)
        mu_aff = _inner([xk + ap_a * d for xk, d in zip(x, dx_a)], [sk + ad_a * d for sk, d in zip(s, ds_a)]) / n_tot
        expon = max(1.0, 3.0 * min(ap_a, ad_a) ** 2)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** expon if mu > 0 else 0.0
        rc = []
        for g, lam, dxa, dsa in zip(g_mats, lams, dx_a, ds_a):
            tx, ts = scaled(g, dxa, dsa)
            rc.append(2.0 * np.diag(sigma * mu - lam ** 2) - (tx @ ts + ts @ tx))
        dx, dy, ds = direction(rc)
        ap, ad = steps(dx, ds)
        log.debug("sdp steps: affine %.3g %.3g sigma %.3g final %.3g %.3g", ap_a, ad_a, sigma, ap, ad)
        x = [xk + ap * d for xk, d in zip(x, dx)]
        y = y + ad * dy
        s = [sk + ad * d for sk, d in zip(s, ds)]

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "primal_obj", "dual_obj", "gap", "primal_inf", "dual_inf", "mu"])
            for row in history:
                w.writerow([row[0]] + [format(v, ".17g") for v in row[1:]])

    if status == "infeasible":
        sol = (x, y, s, _inner(p.c, x), float(p.b @ y), np.inf, np.nan, np.nan)
    else:
        if best is None:
            raise SolverError("SDP solver produced no iterate")
        sol = best
    xs, ys, ss, pobj, dobj, gap, pinf, dinf = sol
    return SdpSolution(xs, ys, ss, pobj, dobj, gap, status, it, pinf, dinf, history)


def lmi_problem(g0, gs, c):
    """Problem whose dual is ``minimize c.y  s.t.  g0 + sum_i y_i gs[i] >= 0`` (single block).

    ``gs`` is a sparse (m x n**2) matrix of vectorised symmetric matrices.
    The optimum of the LMI is ``-solution.dual_obj`` and the minimiser is
    ``solution.y``.
    """
    g0 = np.asarray(g0, dtype=float)
    return SdpProblem([g0.shape[0]], [g0], [-sp.csr_matrix(gs)], -np.asarray(c, dtype=float))
