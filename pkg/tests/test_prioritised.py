import json
from importlib import resources

import numpy as np
import pytest

from priorest import bounds, fisher, model, prioritised
from priorest.errors import RankDeficientError, ValidationError

from conftest import dephasing_curve, random_model

BASE = model.phase_dephasing(0.0, 0.5)


def two_copy():
    return model.n_copy(BASE, 2)


@pytest.mark.parametrize("copies,p,expected", [
    (1, "phi", False), (1, "delta", False),
    (2, "phi", True), (2, "delta", False),
    (3, "delta", False),
])
def test_decisions(copies, p, expected):
    report = prioritised.check(model.n_copy(BASE, copies), p)
    assert report.possible is expected
    if not expected:
        assert all(n <= prioritised.WITNESS_TOL for _, n in report.witnesses)
        assert report.fine_povm is None


def test_two_copy_witness_on_null_eigenspace():
    report = prioritised.check(two_copy(), "phi")
    live = [lam for lam, n in report.witnesses if n > prioritised.WITNESS_TOL]
    assert len(live) == 1 and abs(live[0]) < 1e-9
    assert report.margin > 1e6


def test_two_copy_measurement():
    m = two_copy()
    povm, f, mse = prioritised.build_measurement(m, "phi")
    assert len(povm) == 4
    assert all(np.linalg.matrix_rank(e, tol=1e-9) == 1 for e in povm.elements)
    assert np.allclose(f, np.diag([0.5, 8 / 15]), atol=1e-8)
    assert mse == pytest.approx((2.0, 15 / 8), abs=1e-8)
    # same Fisher as the built-in fixture measurement
    fixture = fisher.povm_from_json(json.loads((resources.files("priorest") / "data" / "two_copy_phi.json").read_text()))
    assert np.allclose(fisher.classical_fisher(m, fixture), f, atol=1e-3)


def test_report_invariants_and_json():
    report = prioritised.check(two_copy(), 0)
    j = fisher.qfi(model.orthogonalize(two_copy(), 0))
    assert np.linalg.eigvalsh(report.fisher).min() > 1e-10
    assert report.mse_point[0] == pytest.approx(1 / j[0, 0], abs=1e-8)
    body = report.to_json()
    assert set(body) == {"possible", "witnesses", "fisher", "mse_point"}
    assert body["possible"] is True and len(body["mse_point"]) == 2


def test_measurement_saturates_priority_and_is_diagonal():
    rng = np.random.default_rng(5)
    for m in [two_copy(), random_model(rng, 3), random_model(rng, 4)]:
        report = prioritised.check(m, 0)
        if not report.possible:
            continue
        orth = model.orthogonalize(m, 0)
        j = fisher.qfi(orth)
        f = report.fisher
        assert f[0, 0] == pytest.approx(j[0, 0], abs=1e-8)
        assert abs(f[0, 1]) < 1e-8


def test_mse_point_on_or_above_curve():
    curve, _ = dephasing_curve(2)
    _, _, (v1, v2) = prioritised.build_measurement(two_copy(), "phi")
    assert np.all(curve.halfplanes[:, 0] * v1 + curve.halfplanes[:, 1] * v2 >= curve.halfplanes[:, 2] * (1 - 1e-3))
    assert curve.intercept(0) == pytest.approx([v1, v2], abs=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_reparameterisation_stability(seed):
    rng = np.random.default_rng(seed)
    models = [two_copy(), model.n_copy(model.phase_dephasing(0.3, 0.4), 2), random_model(rng, 3)]
    for m in models:
        for p in (0, 1):
            ref = prioritised.check(m, p).possible
            o = 1 - p
            for _ in range(10):
                jac = np.zeros((2, 2))
                jac[p, p] = 1.0
                jac[o, p] = rng.normal()
                jac[o, o] = rng.choice([-1, 1]) * rng.uniform(0.2, 3.0)
                assert prioritised.check(model.reparameterize(m, jac), p).possible is ref


def test_commuting_model_reaches_qfi():
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    d0 = np.diag([0.2, -0.1, -0.1]).astype(complex)
    d1 = np.diag([0.05, 0.15, -0.2]).astype(complex)
    m = model.make_model(rho, (d0, d1), (0.0, 0.0))
    report = prioritised.check(m, 0)
    assert report.possible
    j = fisher.qfi(model.orthogonalize(m, 0))
    assert np.allclose(report.fisher, j, atol=1e-10)


def test_rank_deficient_redirect():
    with pytest.raises(RankDeficientError, match="sld_family_search"):
        prioritised.check(model.fock_displacement(1), "x")


def test_search_rejects_unique_sld():
    with pytest.raises(ValidationError):
        prioritised.sld_family_search(BASE, 0, restarts=1)


@pytest.fixture(scope="module")
def fock_search():
    return prioritised.sld_family_search(model.fock_displacement(1), "x")


def test_fock_search(fock_search):
    m = model.fock_displacement(1)
    coeffs, f_yy, povm = fock_search
    assert f_yy == pytest.approx(16 / 3, abs=1e-6)
    assert f_yy / fisher.qfi(m)[1, 1] == pytest.approx(8 / 9, abs=1e-6)
    f = fisher.classical_fisher(m, povm)
    assert f[0, 0] == pytest.approx(fisher.qfi(m)[0, 0], abs=1e-8)
    # the reported optimum (0, 0, 0, 1) in our kernel basis order is also optimal
    fam = fisher.sld(m, "x")
    f_ref, _ = prioritised._family_fisher(m, fam, np.array([0.0, 0.0, 0.0, 1.0]))
    assert f_ref[1, 1] == pytest.approx(16 / 3, abs=1e-8)
    base, _ = prioritised._family_fisher(m, fam, np.zeros(fam.free_dim))
    assert base[1, 1] < 16 / 3 - 1e-3


def test_fock_search_permutation_invariant(fock_search):
    m = model.fock_displacement(1)
    fam = fisher.sld(m, "x")
    perm = fisher.SldFamily(fam.particular, tuple(fam.kernel_basis[k] for k in (2, 0, 3, 1)))
    _, f_yy, _ = prioritised.sld_family_search(m, "x", family=perm)
    assert f_yy == pytest.approx(fock_search[1], abs=1e-6)
