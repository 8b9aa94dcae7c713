"""SLD operators, quantum and classical Fisher information, spectral projectors."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import linalg
from .errors import ModelInconsistencyError, ValidationError

KERNEL_TOL = 1e-10
CONSISTENCY_TOL = 1e-9
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class SldFamily:
    """All Hermitian solutions of ``drho = (L rho + rho L) / 2``.

    ``particular`` is the minimal-norm solution (zero on the kernel of rho);
    any real combination of ``kernel_basis`` may be added to it.
    """

    particular: np.ndarray
    kernel_basis: tuple

    @property
    def free_dim(self):
        return len(self.kernel_basis)

    def member(self, coeffs=None):
        if coeffs is None:
            return self.particular
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.free_dim,):
            raise ValidationError(f"expected {self.free_dim} coefficients, got shape {coeffs.shape}")
        out = self.particular.copy()
        for c, k in zip(coeffs, self.kernel_basis):
            out = out + c * k
        return out


def _sld_eigenbasis(rho, drho, kernel_tol, what="drho"):
    spec = linalg.eig_hermitian(rho, tol=1e-10)
    lam, u = spec.eigenvalues, spec.eigenvectors
    d = u.conj().T @ drho @ u
    kernel = np.abs(lam) <= kernel_tol
    denom = lam[:, None] + lam[None, :]
    free = kernel[:, None] & kernel[None, :]
    bad = np.abs(np.where(free, d, 0.0))
    if bad.size and bad.max() > CONSISTENCY_TOL:
        raise ModelInconsistencyError(
            f"{what} has weight {bad.max():.3e} on the kernel of rho; no SLD exists"
        )
    ell = np.where(free, 0.0, 2.0 * d / np.where(free, 1.0, denom))
    return u, ell, kernel


def sld_family(rho, drho, kernel_tol=KERNEL_TOL, what="drho"):
    """SLD family for an arbitrary (rho, drho) pair given as matrices."""
    u, ell, kernel = _sld_eigenbasis(rho, drho, kernel_tol, what)
    particular = linalg.hermitian_part(u @ ell @ u.conj().T)
    uk = u[:, kernel]
    basis = tuple(linalg.hermitian_part(uk @ e @ uk.conj().T) for e in linalg.hermitian_basis(uk.shape[1]))
    return SldFamily(particular, basis)


def sld(model, i, kernel_tol=KERNEL_TOL):
    """SLD family of parameter ``i`` (index or label)."""
    i = model.index(i)
    return sld_family(model.rho, model.drho[i], kernel_tol, what=f"drho[{model.labels[i]}]")


def qfi_from(rho, slds):
    k = len(slds)
    j = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            j[a, b] = j[b, a] = np.real(np.trace(rho @ slds[a] @ slds[b]))
    return j


def qfi(model, kernel_tol=KERNEL_TOL):
    """Quantum Fisher information ``J_ij = Re tr[rho L_i L_j]``."""
    slds = [sld(model, i, kernel_tol).particular for i in range(model.n_params)]
    return qfi_from(model.rho, slds)


@dataclass(frozen=True)
class Povm:
    elements: tuple
    labels: tuple = ()
    estimator: Optional[np.ndarray] = None  # n_params x n_outcomes
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        els = tuple(linalg.as_hermitian(e, tol=1e-9, name=f"POVM element {k}")
                    for k, e in enumerate(self.elements))
        if not els:
            raise ValidationError("POVM has no elements")
        dim = els[0].shape[0]
        for k, e in enumerate(els):
            if e.shape != (dim, dim):
                raise ValidationError(f"POVM element {k} has shape {e.shape}, expected {(dim, dim)}")
            lo = linalg.eig_hermitian(e, tol=1e-9).eigenvalues[0]
            if lo < -1e-10:
                raise ValidationError(f"POVM element {k} is not PSD (eigenvalue {lo:.3e})")
        total = sum(els)
        err = np.abs(total - np.eye(dim)).max()
        if err > 1e-9:
            raise ValidationError(f"POVM elements do not sum to identity (max deviation {err:.3e})")
        object.__setattr__(self, "elements", els)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(k + 1) for k in range(len(els))))
        if self.estimator is not None:
            est = np.atleast_2d(np.asarray(self.estimator, dtype=float))
            if est.shape[1] != len(els):
                raise ValidationError(f"estimator has {est.shape[1]} columns for {len(els)} outcomes")
            object.__setattr__(self, "estimator", est)
            off = np.zeros(est.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=float)
            object.__setattr__(self, "offset", off)

    @property
    def dim(self):
        return self.elements[0].shape[0]

    def __len__(self):
        return len(self.elements)

    @classmethod
    def from_vectors(cls, vectors, **kw):
        """Rank-one POVM from state vectors (rows of ``vectors``)."""
        vecs = np.asarray(vectors, dtype=np.complex128)
        return cls(tuple(np.outer(v, v.conj()) for v in vecs), **kw)

    @classmethod
    def projective(cls, basis, **kw):
        """Rank-one projectors onto the columns of a unitary ``basis``."""
        basis = np.asarray(basis, dtype=np.complex128)
        return cls(tuple(np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1])), **kw)


def probabilities(model, povm):
    """Outcome probabilities and their derivatives (n_params x n_outcomes)."""
    if povm.dim != model.dim:
        raise ValidationError(f"POVM dimension {povm.dim} does not match model dimension {model.dim}")
    p = np.array([np.real(np.trace(e @ model.rho)) for e in povm.elements])
    dp = np.array([[np.real(np.trace(e @ d)) for e in povm.elements] for d in model.drho])
    return p, dp


def classical_fisher(model, povm, prob_floor=PROB_FLOOR, full_output=False):
    """Classical Fisher information of ``povm`` measured on ``model``.

    Outcomes with probability at or below ``prob_floor`` are left out of the
    sum.  If such an outcome still has a non-negligible derivative the
    information is singular there; those outcome indices are returned as the
    second element when ``full_output`` is true.
    """
    p, dp = probabilities(model, povm)
    keep = p > prob_floor
    singular = np.flatnonzero(~keep & (np.abs(dp).max(axis=0) > 1e-9))
    f = (dp[:, keep] / p[keep]) @ dp[:, keep].T
    f = 0.5 * (f + f.T)
    if full_output:
        return f, singular
    return f


class Projector(NamedTuple):
    eigenvalue: float
    basis: np.ndarray
    rank: int

    @property
    def matrix(self):
        return self.basis @ self.basis.conj().T


def spectral_projectors(op, degeneracy_tol=1e-8):
    """Eigenspace projectors of a Hermitian operator with near-equal eigenvalues merged.

    Consecutive (ascending) eigenvalues join one group while their gap is at
    most ``degeneracy_tol * max(1, |lambda|)``.
    """
    spec = linalg.eig_hermitian(op, tol=1e-9)
    lam, v = spec.eigenvalues, spec.eigenvectors
    groups = [[0]] if lam.size else []
    for k in range(1, lam.size):
        if lam[k] - lam[k - 1] <= degeneracy_tol * max(1.0, abs(lam[k])):
            groups[-1].append(k)
        else:
            groups.append([k])
    return [Projector(float(np.mean(lam[g])), v[:, g], len(g)) for g in groups]


def povm_to_json(povm):
    out = {
        "dim": povm.dim,
        "elements": [{"re": np.real(e).tolist(), "im": np.imag(e).tolist()} for e in povm.elements],
    }
    if povm.estimator is not None:
        out["estimator"] = povm.estimator.tolist()
        out["offset"] = povm.offset.tolist()
    return out


def povm_from_json(obj):
    if not isinstance(obj, dict) or "elements" not in obj or "dim" not in obj:
        raise ValidationError("POVM file must hold an object with 'dim' and 'elements'")
    els = []
    for k, e in enumerate(obj["elements"]):
        try:
            els.append(np.asarray(e["re"], dtype=float) + 1j * np.asarray(e["im"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"POVM element {k}: expected {{'re': .., 'im': ..}} ({exc})") from None
        if els[-1].shape != (obj["dim"], obj["dim"]):
            raise ValidationError(f"POVM element {k} has shape {els[-1].shape}, expected dim {obj['dim']}")
    return Povm(tuple(els), estimator=obj.get("estimator"), offset=obj.get("offset"))


def save_povm(povm, path):
    Path(path).write_text(json.dumps(povm_to_json(povm), indent=1))


def load_povm(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse POVM file {path}: {exc}") from None
    return povm_from_json(obj)
