import functools

import numpy as np
import pytest

from priorest import bounds, fisher, model


@functools.lru_cache(maxsize=None)
def dephasing_curve(copies, points=40):
    """Sweep for ``copies`` copies of the phase-dephasing qubit at (0, 1/2); cached per session."""
    base = model.phase_dephasing(0.0, 0.5)
    curve = bounds.sweep(model.n_copy(base, copies), n_points=points)
    return curve, bounds.scaled_curve(curve, fisher.qfi(base), copies)


def random_state(rng, dim, rank=None):
    rank = dim if rank is None else rank
    z = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (z + z.conj().T)


def random_model(rng, dim):
    """Full-rank model with derivatives of the form i[H, rho] + traceless diagonal-ish noise."""
    rho = random_state(rng, dim)
    drho = []
    for _ in range(2):
        h = random_hermitian(rng, dim)
        g = random_hermitian(rng, dim)
        g -= np.trace(g) / dim * np.eye(dim)
        drho.append(1j * (h @ rho - rho @ h) + 0.1 * g)
    return model.make_model(rho, drho, (0.0, 0.0))


def random_povm(rng, dim, outcomes):
    """Random POVM: ``S^-1/2 A_k S^-1/2`` with ``S = sum A_k``."""
    mats = []
    for _ in range(outcomes):
        z = rng.normal(size=(dim, 2)) + 1j * rng.normal(size=(dim, 2))
        mats.append(z @ z.conj().T)
    s = sum(mats)
    w, u = np.linalg.eigh(s)
    r = u @ np.diag(w ** -0.5) @ u.conj().T
    return fisher.Povm(tuple(r @ m @ r for m in mats))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Remember one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
