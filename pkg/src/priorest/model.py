"""Two-parameter quantum statistical models.

A model is the local data needed for estimation theory at one point:
the state ``rho`` and its partial derivatives ``drho[i]`` with respect to
each parameter.  Built-in families are the phase-dephasing qubit and the
displaced Fock state (in its effective three-level basis); any model can be
lifted to ``N`` copies or reparameterised so its QFI becomes diagonal.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .fisher import qfi
from .errors import DomainError, ResourceError, ValidationError

MAX_DIM = 256
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-10
INDEPENDENCE_COND = 1e10


@dataclass(frozen=True)
class StatisticalModel:
    rho: np.ndarray
    drho: tuple
    theta: tuple
    labels: tuple
    info: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self):
        return self.rho.shape[0]

    @property
    def n_params(self):
        return len(self.drho)

    def index(self, p):
        """Parameter index from an int or a label."""
        if isinstance(p, str):
            try:
                return self.labels.index(p)
            except ValueError:
                raise ValidationError(f"unknown parameter {p!r}; have {self.labels}") from None
        if not 0 <= p < self.n_params:
            raise ValidationError(f"parameter index {p} out of range")
        return int(p)

    def replace(self, **kw):
        fields = dict(rho=self.rho, drho=self.drho, theta=self.theta, labels=self.labels, info=self.info)
        fields.update(kw)
        return make_model(**fields)


def _derivative_gram(drho):
    vecs = np.array([np.concatenate([d.real.ravel(), d.imag.ravel()]) for d in drho])
    return vecs @ vecs.T


def validate(model):
    """Check every model invariant, raising ValidationError naming the first one broken."""
    rho = model.rho
    linalg.as_hermitian(rho, tol=1e-10, name="rho (Hermiticity)")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"trace of rho is {tr.real:.12g}, expected 1")
    lam = linalg.eig_hermitian(rho, tol=1e-10).eigenvalues
    if lam[0] < PSD_FLOOR:
        raise ValidationError(f"rho is not PSD: smallest eigenvalue {lam[0]:.3e}")
    if len(model.drho) != len(model.theta) or len(model.labels) != len(model.theta):
        raise ValidationError("theta, labels and drho lengths differ")
    for k, d in enumerate(model.drho):
        if d.shape != rho.shape:
            raise ValidationError(f"drho[{k}] has shape {d.shape}, expected {rho.shape}")
        linalg.as_hermitian(d, tol=1e-10, name=f"drho[{k}] (Hermiticity)")
        if abs(np.trace(d)) > TRACE_TOL:
            raise ValidationError(f"drho[{k}] is not traceless: trace {np.trace(d):.3e}")
    gram = _derivative_gram(model.drho)
    if np.linalg.cond(gram) > INDEPENDENCE_COND:
        raise ValidationError("derivatives fail linear independence (Gram matrix singular)")
    return model


def make_model(rho, drho, theta, labels=None, info=None, check=True):
    rho = linalg.as_matrix(rho, "rho").copy()
    drho = tuple(linalg.as_matrix(d, "drho").copy() for d in drho)
    theta = tuple(float(t) for t in theta)
    if labels is None:
        labels = tuple(f"theta{k}" for k in range(len(theta)))
    for a in (rho, *drho):
        a.setflags(write=False)
    model = StatisticalModel(rho, drho, theta, tuple(labels), dict(info or {}))
    return validate(model) if check else model


def phase_dephasing(phi, delta):
    """Qubit ``(|0>+|1>)/sqrt2`` after a phase shift ``phi`` and dephasing ``delta``.

    ``delta`` must lie strictly inside (0, 1); the endpoints are rank deficient.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    e = np.exp(-1j * phi)
    coh = 1.0 - delta
    rho = 0.5 * np.array([[1.0, coh * e], [coh * e.conjugate(), 1.0]])
    d_phi = 0.5 * np.array([[0.0, -1j * coh * e], [1j * coh * e.conjugate(), 0.0]])
    d_delta = 0.5 * np.array([[0.0, -e], [-e.conjugate(), 0.0]])
    return make_model(rho, (d_phi, d_delta), (phi, delta), ("phi", "delta"),
                      info={"family": "phase-dephasing", "copies": 1})


def fock_displacement(n):
    """Displacement sensing with Fock probe ``|n>`` at zero displacement.

    Works in the effective basis ``{|n-1>, |n>, |n+1>}``; ``n = 0`` is
    two-dimensional there and is rejected.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"photon number must be a non-negative integer, got {n}")
    n = int(n)
    if n == 0:
        raise DomainError("n = 0 is unsupported: the effective model is two-dimensional")
    rn, rn1 = np.sqrt(n), np.sqrt(n + 1)
    rho = np.diag([0.0, 1.0, 0.0]).astype(complex)
    dx = np.array([[0, -rn, 0], [-rn, 0, rn1], [0, rn1, 0]]) / np.sqrt(2)
    dy = 1j * np.array([[0, rn, 0], [-rn, 0, -rn1], [0, rn1, 0]]) / np.sqrt(2)
    return make_model(rho, (dx, dy), (0.0, 0.0), ("x", "y"),
                      info={"family": "fock", "n": n, "c": 1.0 / (2 * n + 1), "copies": 1})


def incompatibility_coefficient(n):
    if n < 0:
        raise DomainError("n must be non-negative")
    return 1.0 / (2 * n + 1)


def n_copy(model, copies):
    """The model for ``rho^{(x)copies}``; derivatives follow the product rule."""
    copies = int(copies)
    if copies < 1:
        raise DomainError("copies must be >= 1")
    if model.dim ** copies > MAX_DIM:
        raise ResourceError(f"{copies} copies of a dim-{model.dim} model exceed dimension {MAX_DIM}")
    if copies == 1:
        return model
    rho = linalg.kron_all(*[model.rho] * copies)
    drho = []
    for d in model.drho:
        acc = np.zeros_like(rho)
        for k in range(copies):
            factors = [model.rho] * copies
            factors[k] = d
            acc += linalg.kron_all(*factors)
        drho.append(acc)
    info = dict(model.info)
    info["copies"] = info.get("copies", 1) * copies
    return make_model(rho, drho, model.theta, model.labels, info=info)


def combine(a, b):
    """Model of two independent systems ``a (x) b`` sharing parameters."""
    if a.theta != b.theta:
        raise ValidationError("models disagree on the parameter point")
    rho = linalg.kron(a.rho, b.rho)
    drho = [linalg.kron(da, b.rho) + linalg.kron(a.rho, db) for da, db in zip(a.drho, b.drho)]
    return make_model(rho, drho, a.theta, a.labels, info={"copies": a.info.get("copies", 1) + b.info.get("copies", 1)})


def orthogonalize(model, p):
    """Reparameterise so the QFI is diagonal while keeping parameter ``p``.

    The derivative of the other parameter is kept; the derivative of ``p``
    becomes ``drho_p - (J_po / J_oo) drho_o``, so the new ``J_pp`` is the
    Schur complement ``J_pp - J_po J_oo^-1 J_op``.
    """
    p = model.index(p)
    if model.n_params != 2:
        raise ValidationError("orthogonalize supports two-parameter models")
    o = 1 - p
    j = qfi(model)
    if abs(np.linalg.det(j)) <= 1e-12 * max(1.0, np.abs(j).max()) ** 2 or j[o, o] <= 0:
        raise ValidationError("QFI is singular; cannot orthogonalise")
    if abs(j[p, o]) <= 1e-12 * np.sqrt(abs(j[p, p] * j[o, o])):
        return model
    coef = j[p, o] / j[o, o]
    drho = list(model.drho)
    drho[p] = drho[p] - coef * drho[o]
    info = dict(model.info)
    info["orthogonalized"] = p
    return model.replace(drho=tuple(drho), info=info)


def reparameterize(model, jacobian):
    """Linear reparameterisation: new derivative k is ``sum_i jacobian[i, k] drho_i``."""
    jac = np.asarray(jacobian, dtype=float)
    drho = tuple(sum(jac[i, k] * model.drho[i] for i in range(model.n_params))
                 for k in range(jac.shape[1]))
    return model.replace(drho=drho)


def finite_difference_derivatives(rho_of_theta, theta, step=1e-6):
    """Central differences with one Richardson extrapolation step.

    For models known only through a callable ``theta -> rho``.
    """
    theta = np.asarray(theta, dtype=float)
    out = []
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = 1.0

        def central(h):
            return (np.asarray(rho_of_theta(theta + h * e)) - np.asarray(rho_of_theta(theta - h * e))) / (2 * h)

        out.append((4.0 * central(step / 2) - central(step)) / 3.0)
    return out


def _encode(a):
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def _decode(obj, what):
    try:
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{what}: expected {{'re': [[..]], 'im': [[..]]}} ({exc})") from None


def to_json(model):
    return {
        "dim": model.dim,
        "theta": list(model.theta),
        "labels": list(model.labels),
        "rho": _encode(model.rho),
        "drho": [_encode(d) for d in model.drho],
    }


def from_json(obj):
    if not isinstance(obj, dict):
        raise ValidationError("model file must hold a JSON object")
    missing = {"dim", "theta", "rho", "drho"} - obj.keys()
    if missing:
        raise ValidationError(f"model file lacks keys {sorted(missing)}")
    rho = _decode(obj["rho"], "rho")
    if rho.shape != (obj["dim"], obj["dim"]):
        raise ValidationError(f"rho shape {rho.shape} does not match dim {obj['dim']}")
    drho = [_decode(d, f"drho[{k}]") for k, d in enumerate(obj["drho"])]
    return make_model(rho, drho, obj["theta"], obj.get("labels"), info={"source": "file"})


def save_model(model, path):
    Path(path).write_text(json.dumps(to_json(model), indent=1))


def load_model(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse model file {path}: {exc}") from None
    return from_json(obj)
