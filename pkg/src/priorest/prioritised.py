"""Prioritised estimation: saturate the QCRB for one parameter, keep information on the other.

A measurement in the eigenspaces ``{P_j}`` of the optimal observable for
``theta_p`` is QCRB-optimal for ``theta_p``.  It can be refined to learn
``theta_o`` exactly when some compressed derivative ``P_j (d_o rho) P_j`` is
nonzero; the refinement measures each eigenspace in the eigenbasis of the
SLD of the compressed state.  Rank-deficient states have a whole family of
SLDs, and the best member is found by local search.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import ModelInconsistencyError, RankDeficientError, SolverError, ValidationError
from .fisher import KERNEL_TOL, Povm, classical_fisher, qfi, sld, sld_family, spectral_projectors
from .model import orthogonalize

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-9


@dataclass
class PrioritisedReport:
    possible: bool
    p: int
    witnesses: list  # (eigenvalue, max-norm of the compressed derivative)
    fine_povm: Optional[Povm] = None
    fisher: Optional[np.ndarray] = None
    mse_point: Optional[tuple] = None
    margin: float = field(default=np.nan)  # smallest witness above the threshold, over the threshold

    def to_json(self):
        return {
            "possible": bool(self.possible),
            "witnesses": [{"eigenvalue": float(lam), "norm": float(nrm)} for lam, nrm in self.witnesses],
            "fisher": None if self.fisher is None else np.asarray(self.fisher).tolist(),
            "mse_point": None if self.mse_point is None else [float(v) for v in self.mse_point],
        }


def _require_full_rank(model):
    lam = linalg.eig_hermitian(model.rho, tol=1e-10).eigenvalues
    if lam[0] <= KERNEL_TOL:
        raise RankDeficientError(
            f"rho has rank {int(np.sum(lam > KERNEL_TOL))} < {model.dim}; the eigenspace test "
            "is only conclusive for full-rank states, use sld_family_search instead"
        )


def _setup(model, p):
    if model.n_params != 2:
        raise ValidationError("prioritised estimation is defined for two-parameter models")
    p = model.index(p)
    _require_full_rank(model)
    orth = orthogonalize(model, p)
    o = 1 - p
    projs = spectral_projectors(sld(orth, p).particular)
    return orth, p, o, projs


def check(model, p, witness_tol=WITNESS_TOL):
    """Decide whether ``theta_p`` can be estimated optimally while still learning the other parameter.

    Returns a :class:`PrioritisedReport`; when estimation is possible the
    report also carries the refined measurement from :func:`build_measurement`.

    Raises
    ------
    RankDeficientError
        For rank-deficient states (use :func:`sld_family_search`).
    """
    orth, p, o, projs = _setup(model, p)
    witnesses = []
    for pr in projs:
        d = pr.basis.conj().T @ orth.drho[o] @ pr.basis
        witnesses.append((pr.eigenvalue, float(np.abs(d).max())))
    norms = np.array([w for _, w in witnesses])
    possible = bool(np.any(norms > witness_tol))
    above = norms[norms > witness_tol]
    margin = float(above.min() / witness_tol) if above.size else np.nan
    log.debug("prioritised check p=%d: witnesses %s, margin %.3g", p, witnesses, margin)
    report = PrioritisedReport(possible, p, witnesses, margin=margin)
    if possible:
        report.fine_povm, report.fisher, report.mse_point = build_measurement(model, p)
    return report


def build_measurement(model, p):
    """Refined measurement keeping ``theta_p`` optimal.

    Each eigenspace of the optimal observable is measured in the eigenbasis
    of the SLD of the compressed pair ``(P rho P, P d_o rho P)``.

    Returns
    -------
    povm : Povm
        Rank-one projective measurement.
    fisher : ndarray
        Its classical Fisher information in the orthogonalised parameters.
    mse_point : tuple
        ``([J^-1]_pp, 1 / F_oo)``.
    """
    orth, p, o, projs = _setup(model, p)
    vectors = []
    for pr in projs:
        v = pr.basis
        if pr.rank == 1:
            vectors.append(v[:, 0])
            continue
        rho_j = linalg.hermitian_part(v.conj().T @ orth.rho @ v)
        d_j = linalg.hermitian_part(v.conj().T @ orth.drho[o] @ v)
        try:
            ell = sld_family(rho_j, d_j, what=f"compressed derivative on eigenspace {pr.eigenvalue:.6g}").particular
        except ModelInconsistencyError as exc:
            raise ModelInconsistencyError(f"eigenspace with eigenvalue {pr.eigenvalue:.6g}: {exc}") from None
        u = linalg.eig_hermitian(ell, tol=1e-9).eigenvectors
        vectors.extend((v @ u).T)
    povm = Povm.from_vectors(np.array(vectors))
    f, singular = classical_fisher(orth, povm, full_output=True)
    if singular.size:
        log.warning("outcomes %s have vanishing probability but nonzero derivative", singular.tolist())
    j = qfi(orth)
    if f[o, o] <= 1e-12:
        raise SolverError("refined measurement carries no information on the other parameter")
    return povm, f, (1.0 / j[p, p], 1.0 / f[o, o])


def _family_fisher(model, family, coeffs):
    lp = family.member(coeffs)
    u = linalg.eig_hermitian(lp, tol=1e-9).eigenvectors
    povm = Povm.projective(u)
    f = classical_fisher(model, povm)
    return f, povm


def sld_family_search(model, p, o=None, restarts=32, tol=1e-8, seed=0, box=3.0, threads=None, family=None):
    """Best SLD-family member for prioritising ``theta_p`` on a rank-deficient model.

    Every member ``L_p(c)`` of the SLD family is QCRB-optimal for ``theta_p``;
    its eigenbasis measurement gives some ``F_oo``.  Nelder-Mead maximises
    ``F_oo`` over ``c`` from the zero start plus ``restarts`` uniform starts in
    ``[-box, box]``.  A failed search means "not found", not "impossible".
    ``family`` overrides the SLD family of ``theta_p`` (e.g. a reordered
    kernel basis).

    Returns
    -------
    coeffs : ndarray
    f_oo : float
    povm : Povm
    """
    p = model.index(p)
    o = 1 - p if o is None else model.index(o)
    family = sld(model, p) if family is None else family
    if family.free_dim == 0:
        raise ValidationError("the SLD is unique here; use check/build_measurement")
    rng = np.random.default_rng(seed)
    starts = [np.zeros(family.free_dim)] + list(rng.uniform(-box, box, size=(restarts, family.free_dim)))

    def objective(c):
        f, _ = _family_fisher(model, family, c)
        val = f[o, o]
        return -val if np.isfinite(val) else np.inf

    def run(start):
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol, "maxiter": 4000, "maxfev": 8000})
        return res.x, -res.fun

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    finite = [(c, v) for c, v in results if np.isfinite(v)]
    if not finite:
        base, _ = _family_fisher(model, family, starts[0])
        raise SolverError(f"no restart reached a finite F_oo; zero-coefficient baseline F_oo = {base[o, o]:.6g}")
    best_val = max(v for _, v in finite)
    # deterministic tie-break: lexicographically smallest coefficients among near-best results
    ties = [c for c, v in finite if v >= best_val - tol * max(1.0, abs(best_val))]
    best = min(ties, key=lambda c: tuple(np.round(c, 8)))
    hit = np.max(np.abs(best))
    if hit > 0.9 * box:
        log.info("best coefficients reach %.3g, close to the search box %.3g", hit, box)
    f, povm = _family_fisher(model, family, best)
    return best, float(f[o, o]), povm
