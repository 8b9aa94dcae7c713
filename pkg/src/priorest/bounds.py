"""Nagaoka-Hayashi bounds, weighted sweeps and trade-off curves.

For a two-parameter model and a 2x2 weight matrix ``W`` the bound is

    C(W) = min  sum_jk W_jk tr[rho L_jk]
    s.t.  [[L11, L12, X1], [L12, L22, X2], [X1, X2, I]] >= 0,
          Re tr[drho_k X_j] = delta_jk,   tr[rho X_j] = 0,

over Hermitian ``L_jk`` and ``X_j``.  The linear constraints on ``X_j`` are
eliminated by pivoting, every remaining real coordinate becomes one LMI
variable and the complex block matrix enters the solver through its real
embedding.  Each ``C(W)`` gives the half-plane ``a V1 + b V2 >= C`` for
``W = diag(a, b)``; the trade-off curve is the lower-left boundary of their
intersection.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import linalg, sdp
from .errors import DomainError, SolverError, ValidationError

log = logging.getLogger(__name__)

GAP_TOL = 1e-7
ENDPOINT_EPS = 1e-4


class NhBound(NamedTuple):
    value: float
    observables: tuple  # X_1, X_2
    variances: np.ndarray  # (tr[rho L11], tr[rho L22]) at the optimum
    solution: sdp.SdpSolution


def _weight(w):
    w = np.asarray(w, dtype=float)
    if w.shape != (2, 2):
        raise ValidationError(f"weight matrix must be 2x2, got shape {w.shape}")
    if np.abs(w - w.T).max() > 1e-12:
        raise ValidationError("weight matrix is not symmetric")
    if np.linalg.eigvalsh(w)[0] < -1e-12:
        raise ValidationError("weight matrix is not PSD")
    return 0.5 * (w + w.T)


def _hermitian_coords(basis, a):
    return np.array([np.real(np.vdot(e, a)) for e in basis])


class _Assembly:
    """LMI data for one model; reused across weight matrices."""

    def __init__(self, model):
        if model.n_params != 2:
            raise ValidationError("the Nagaoka-Hayashi bound is implemented for two parameters")
        d = model.dim
        self.dim = d
        basis = linalg.hermitian_basis(d)
        self.basis = basis
        # value of tr[A H_k] for Hermitian A is vdot(H_k, A) up to the real part
        cons = np.array([_hermitian_coords(basis, a) for a in (*model.drho, model.rho)])
        rho_w = cons[2]
        _, _, piv = sla.qr(cons, pivoting=True, mode="economic")
        pivots = np.sort(piv[:3])
        free = np.setdiff1d(np.arange(d * d), pivots)
        bp = cons[:, pivots]
        if np.linalg.cond(bp) > 1e12:
            raise ValidationError("rho and its derivatives are linearly dependent")
        # x_pivot = bp^-1 (rhs - cons_free x_free)
        corr = np.linalg.solve(bp, cons[:, free])
        self.pivots, self.free, self.corr = pivots, free, corr
        x0 = []
        for j in range(2):
            rhs = np.zeros(3)
            rhs[j] = 1.0
            coords = np.zeros(d * d)
            coords[pivots] = np.linalg.solve(bp, rhs)
            x0.append(coords)
        self.x0 = x0

        big = 3 * d  # complex size of the block matrix
        n = 2 * big  # real embedded size
        self.n = n
        # constant term: identity block plus particular X_j
        g0 = np.zeros((big, big), dtype=complex)
        g0[2 * d:, 2 * d:] = np.eye(d)
        for j in range(2):
            xj = sum(c * e for c, e in zip(x0[j], basis) if c != 0.0)
            g0[j * d:(j + 1) * d, 2 * d:] = xj
            g0[2 * d:, j * d:(j + 1) * d] = xj
        self.g0 = sdp.embed_hermitian(g0)

        rows, cols, vals = [], [], []
        col_of = np.arange(n * n).reshape(n, n)

        def put(var, r, c, v):
            # complex entry v at (r, c) of the block matrix, through the real embedding
            if v.real != 0.0:
                rows.extend((var, var))
                cols.extend((col_of[r, c], col_of[r + big, c + big]))
                vals.extend((v.real, v.real))
            if v.imag != 0.0:
                rows.extend((var, var))
                cols.extend((col_of[r, c + big], col_of[r + big, c]))
                vals.extend((-v.imag, v.imag))

        def put_hermitian(var, coords, bi, bj):
            for k in np.flatnonzero(coords):
                e = basis[k]
                ii, jj = np.nonzero(e)
                for r, c in zip(ii, jj):
                    v = coords[k] * e[r, c]
                    put(var, bi * d + r, bj * d + c, v)
                    if bi != bj:
                        put(var, bj * d + c, bi * d + r, np.conj(v))

        var = 0
        self.l_index = {}
        for bi, bj in ((0, 0), (0, 1), (1, 1)):
            start = var
            for k in range(d * d):
                unit = np.zeros(d * d)
                unit[k] = 1.0
                put_hermitian(var, unit, bi, bj)
                var += 1
            self.l_index[(bi, bj)] = slice(start, var)
        self.x_index = []
        for j in range(2):
            start = var
            for f_pos, f in enumerate(free):
                coords = np.zeros(d * d)
                coords[f] = 1.0
                coords[pivots] = -corr[:, f_pos]
                coords[np.abs(coords) < 1e-15] = 0.0
                put_hermitian(var, coords, j, 2)
                var += 1
            self.x_index.append(slice(start, var))
        self.m = var
        self.gs = sp.csr_matrix((vals, (rows, cols)), shape=(self.m, n * n))
        self.gs.sum_duplicates()
        self.rho_w = rho_w

    def costs(self, w):
        c = np.zeros(self.m)
        c[self.l_index[(0, 0)]] = w[0, 0] * self.rho_w
        c[self.l_index[(0, 1)]] = 2.0 * w[0, 1] * self.rho_w
        c[self.l_index[(1, 1)]] = w[1, 1] * self.rho_w
        return c

    def observable(self, y, j):
        coords = self.x0[j].copy()
        z = y[self.x_index[j]]
        coords[self.free] += z
        coords[self.pivots] -= self.corr @ z
        return sum(cf * e for cf, e in zip(coords, self.basis))

    def variances(self, y):
        return np.array([self.rho_w @ y[self.l_index[(0, 0)]], self.rho_w @ y[self.l_index[(1, 1)]]])


def nagaoka_hayashi(model, w, full_output=False, tol=1e-9, trace_path=None, _assembly=None):
    """Nagaoka-Hayashi lower bound on ``tr[W V]`` for locally unbiased estimators.

    Parameters
    ----------
    model : StatisticalModel
        Two-parameter model with full-rank QFI.
    w : array_like
        2x2 real symmetric PSD weight matrix.
    full_output : bool
        Return an :class:`NhBound` with the optimal variances and the raw
        solver output instead of ``(C, (X1, X2))``.
    trace_path : path, optional
        Write the solver iterates there as CSV.

    Raises
    ------
    SolverError
        If the SDP does not converge.
    """
    w = _weight(w)
    asm = _assembly if _assembly is not None else _Assembly(model)
    problem = sdp.lmi_problem(asm.g0, asm.gs, asm.costs(w))
    sol = sdp.solve(problem, tol=tol, trace_path=trace_path)
    if sol.status != "optimal" and not (sol.gap <= GAP_TOL and sol.primal_infeasibility <= 1e-7
                                        and sol.dual_infeasibility <= 1e-7):
        raise SolverError(
            f"Nagaoka-Hayashi SDP for W = {w.tolist()} ended with status {sol.status!r} "
            f"(gap {sol.gap:.2e}, after {sol.iterations} iterations)"
        )
    value = -sol.dual_obj
    xs = (asm.observable(sol.y, 0), asm.observable(sol.y, 1))
    if full_output:
        return NhBound(value, xs, asm.variances(sol.y), sol)
    return value, xs


def sweep_weights(n_points=40, endpoint_eps=ENDPOINT_EPS):
    """``a`` values for ``W = diag(a, 2 - a)``: log-uniform in the ratio ``a / (2 - a)``."""
    if n_points < 3:
        raise ValidationError("a sweep needs at least 3 points")
    if not 0.0 < endpoint_eps < 1.0:
        raise ValidationError("endpoint_eps must lie in (0, 1)")
    top = np.log((2.0 - endpoint_eps) / endpoint_eps)
    u = np.linspace(-top, top, n_points)
    return 1.0 + np.tanh(u / 2.0)


@dataclass
class TradeoffCurve:
    """Half-planes ``a V1 + b V2 >= C`` and the vertices of their boundary.

    ``vertices`` run along the boundary with V1 ascending.  The first and
    last vertices approximate the limits of exactly degenerate weights
    (``limit`` marks them).  ``points`` holds the optimal variance pair of
    each successful sweep point.
    """

    halfplanes: np.ndarray  # rows (a, b, C)
    status: list
    vertices: np.ndarray
    active: list
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scaling: Optional[tuple] = None

    @property
    def limit(self):
        flags = np.zeros(len(self.vertices), dtype=bool)
        if len(flags):
            flags[[0, -1]] = True
        return flags

    def intercept(self, p):
        """Limiting boundary point for parameter ``p`` weighted alone (0 or 1)."""
        if not len(self.vertices):
            raise ValidationError("curve has no vertices")
        return self.vertices[0] if p == 0 else self.vertices[-1]


def _sweep_point(asm, a, tol):
    w = np.diag([a, 2.0 - a])
    try:
        res = nagaoka_hayashi(None, w, full_output=True, tol=tol, _assembly=asm)
    except SolverError as exc:
        log.warning("sweep point a=%.6g failed: %s", a, exc)
        return a, None
    return a, res


def sweep(model, n_points=40, endpoint_eps=ENDPOINT_EPS, threads=None, tol=1e-9):
    """Bounds for ``W = diag(a, 2 - a)`` over a grid of ``a``; returns a :class:`TradeoffCurve`.

    Failed points are logged and marked in ``status``; at least three must
    succeed.
    """
    asm = _Assembly(model)
    grid = sweep_weights(n_points, endpoint_eps)
    if threads is None or threads <= 1:
        results = [_sweep_point(asm, a, tol) for a in grid]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _sweep_point(asm, a, tol), grid))
    results.sort(key=lambda r: r[0])
    planes, status, points, gaps = [], [], [], []
    for a, res in results:
        if res is None:
            planes.append((a, 2.0 - a, np.nan))
            status.append("failed")
            continue
        planes.append((a, 2.0 - a, res.value))
        status.append(res.solution.status)
        points.append(res.variances)
        gaps.append(res.solution.gap)
    planes = np.array(planes)
    ok = np.isfinite(planes[:, 2])
    if ok.sum() < 3:
        raise SolverError(f"only {int(ok.sum())} of {n_points} sweep points succeeded")
    vertices, active = halfplane_intersect(planes[ok])
    active = [int(np.flatnonzero(ok)[k]) for k in active]
    return TradeoffCurve(planes, status, vertices, active, np.array(points), np.array(gaps))


def halfplane_intersect(halfplanes, tol=1e-12):
    """Vertices of the lower-left boundary of ``{a V1 + b V2 >= C}``.

    Lines with ``b > 0`` form an upper envelope ``V2 >= (C - a V1) / b``;
    lines with ``b = 0`` clip it at ``V1 >= C / a``.  Lines that never touch
    the boundary, or touch it at a single point, are dropped.

    Returns
    -------
    vertices : ndarray, shape (k, 2)
        Sorted by V1 ascending.  Empty when fewer than two lines survive.
    active : list of int
        Indices of the surviving lines, in boundary order.
    """
    h = np.atleast_2d(np.asarray(halfplanes, dtype=float))
    if h.size == 0:
        return np.zeros((0, 2)), []
    if h.shape[1] != 3:
        raise ValidationError("half-planes must be rows (a, b, C)")
    if np.any(h[:, :2] < 0) or np.any((h[:, 0] == 0) & (h[:, 1] == 0)):
        raise ValidationError("half-plane normals must be non-negative and nonzero")

    vert = np.flatnonzero(h[:, 1] <= tol * h[:, 0])
    x_min, x_min_idx = -np.inf, None
    if vert.size:
        cut = h[vert, 2] / h[vert, 0]
        x_min_idx = int(vert[np.argmax(cut)])
        x_min = float(cut.max())
    rest = np.setdiff1d(np.arange(len(h)), vert)
    slope = -h[rest, 0] / h[rest, 1]
    icpt = h[rest, 2] / h[rest, 1]

    # steepest first; equal slopes keep the largest intercept
    order = np.lexsort((-icpt, slope))
    hull = []
    for k in order:
        if hull and abs(slope[hull[-1]] - slope[k]) <= tol * max(1.0, abs(slope[k])):
            continue
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # j is redundant if lines i and k meet on or above it
            x_ik = (icpt[k] - icpt[i]) / (slope[i] - slope[k])
            y_ik = slope[i] * x_ik + icpt[i]
            if y_ik >= slope[j] * x_ik + icpt[j] - tol * max(1.0, abs(y_ik)):
                hull.pop()
            else:
                break
        hull.append(k)

    def meet(i, j):
        x = (icpt[j] - icpt[i]) / (slope[i] - slope[j])
        return x, slope[i] * x + icpt[i]

    xs = [meet(hull[q], hull[q + 1])[0] for q in range(len(hull) - 1)]
    # clip at the vertical line: drop segments lying wholly left of it
    start = 0
    if x_min_idx is not None:
        while start < len(xs) and xs[start] <= x_min + tol * max(1.0, abs(x_min)):
            start += 1
    lines = hull[start:]
    verts = []
    active = []
    if x_min_idx is not None and lines:
        active.append(x_min_idx)
        verts.append((x_min, slope[lines[0]] * x_min + icpt[lines[0]]))
    active.extend(int(rest[k]) for k in lines)
    for q in range(len(lines) - 1):
        verts.append(meet(lines[q], lines[q + 1]))
    if len(active) < 2:
        return np.zeros((0, 2)), active
    return np.array(verts, dtype=float).reshape(-1, 2), active


def boundary(curve, v1):
    """Lower bound on ``V2`` at ``V1 = v1`` implied by the curve's half-planes (``-inf`` if none binds)."""
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    h = curve.halfplanes[np.isfinite(curve.halfplanes[:, 2])]
    h = h[h[:, 1] > 0]
    vals = (h[:, 2][None, :] - h[:, 0][None, :] * v1[:, None]) / h[:, 1][None, :]
    return vals.max(axis=1) if h.size else np.full(v1.shape, -np.inf)


def is_convex(vertices, tol=1e-9):
    """True when the vertex chain turns consistently (slopes non-decreasing)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return True
    d = np.diff(v, axis=0)
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    scale = np.linalg.norm(d[:-1], axis=1) * np.linalg.norm(d[1:], axis=1)
    return bool(np.all(cross >= -tol * scale))


def analytic_tradeoff_phase_dephasing(delta, v1):
    """Smallest ``V(Delta)`` allowed for a given ``V(phi)`` on one phase-dephasing qubit."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    v1 = np.asarray(v1, dtype=float)
    q = 1.0 / (1.0 - delta) ** 2
    if np.any(v1 <= q):
        raise DomainError(f"V1 must exceed the phase QCRB {q:.6g}")
    s = delta * (2.0 - delta)
    out = s + s * q / (v1 - q)
    return float(out) if out.ndim == 0 else out


def scaled_curve(curve, j, copies=1):
    """Curve in units of the per-copy QCRB: ``(V1, V2) -> copies * (V1 J11, V2 J22)``."""
    j = np.asarray(j, dtype=float)
    if j.shape != (2, 2) or abs(j[0, 1]) > 1e-9 * np.sqrt(abs(j[0, 0] * j[1, 1])) or np.any(np.diag(j) <= 0):
        raise ValidationError("scaling needs a diagonal positive QFI")
    s = copies * np.diag(j)
    planes = curve.halfplanes.copy()
    planes[:, 0] /= s[0]
    planes[:, 1] /= s[1]
    return replace(curve, halfplanes=planes, vertices=curve.vertices * s,
                   points=curve.points * s if len(curve.points) else curve.points,
                   scaling=(float(s[0]), float(s[1])))


def write_halfplanes_csv(curve, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["a", "b", "C", "status"])
        for (a, b, c), st in zip(curve.halfplanes, curve.status):
            out.writerow([format(a, ".17g"), format(b, ".17g"), format(c, ".17g"), st])


def write_vertices_csv(curve, path, scaled=None):
    """Vertices, raw and (if ``scaled`` is given) scaled, with the endpoint flag."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        head = ["V1", "V2"] + (["V1_scaled", "V2_scaled"] if scaled is not None else []) + ["kind"]
        out.writerow(head)
        for k, (v, lim) in enumerate(zip(curve.vertices, curve.limit)):
            row = [format(v[0], ".17g"), format(v[1], ".17g")]
            if scaled is not None:
                row += [format(scaled.vertices[k, 0], ".17g"), format(scaled.vertices[k, 1], ".17g")]
            out.writerow(row + ["limit" if lim else "vertex"])
