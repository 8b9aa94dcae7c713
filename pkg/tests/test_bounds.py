import numpy as np
import pytest

from priorest import bounds, fisher, model
from priorest.errors import DomainError, ValidationError

from conftest import dephasing_curve, random_model

SINGLE = model.phase_dephasing(0.0, 0.5)


def exact_single_copy(a, b):
    """min a V1 + b V2 on (V1 - 4)(V2 - 3/4) = 3, by Lagrange conditions."""
    return 4 * a + 0.75 * b + 2 * np.sqrt(3 * a * b)


def test_identity_weight_value():
    c, xs = bounds.nagaoka_hayashi(SINGLE, np.eye(2))
    assert c == pytest.approx(4 + 0.75 + 2 * np.sqrt(3), abs=1e-6)
    # the optimal observables are locally unbiased
    for j, x in enumerate(xs):
        assert abs(np.trace(SINGLE.rho @ x)) < 1e-7
        for k in range(2):
            assert np.real(np.trace(SINGLE.drho[k] @ x)) == pytest.approx(float(j == k), abs=1e-7)


@pytest.mark.parametrize("a", [0.05, 0.5, 1.0, 1.7, 1.99])
def test_single_copy_matches_exact_relation(a):
    res = bounds.nagaoka_hayashi(SINGLE, np.diag([a, 2 - a]), full_output=True)
    assert res.value == pytest.approx(exact_single_copy(a, 2 - a), rel=1e-7)
    v1, v2 = res.variances
    assert v2 == pytest.approx(bounds.analytic_tradeoff_phase_dephasing(0.5, v1), rel=1e-6)


def test_endpoint_limits():
    # phase weighted alone: C/a -> [J^-1]_phiphi = 4, approached like sqrt(b)
    b = 1e-6
    c, _ = bounds.nagaoka_hayashi(SINGLE, np.diag([2 - b, b]))
    assert c / (2 - b) == pytest.approx(4.0, abs=3e-3)
    assert c == pytest.approx(exact_single_copy(2 - b, b), rel=1e-7)
    # dephasing weighted alone: C/b -> 3/4 while the phase variance diverges
    res = bounds.nagaoka_hayashi(SINGLE, np.diag([b, 2 - b]), full_output=True)
    assert res.value / (2 - b) == pytest.approx(0.75, abs=3e-3)
    assert res.variances[0] > 1e3


def test_homogeneous_and_concave():
    rng = np.random.default_rng(3)
    m = random_model(rng, 2)
    w1 = np.array([[1.0, 0.2], [0.2, 0.5]])
    w2 = np.array([[0.3, -0.1], [-0.1, 1.4]])
    c1 = bounds.nagaoka_hayashi(m, w1)[0]
    c2 = bounds.nagaoka_hayashi(m, w2)[0]
    for t in (0.5, 2.0):
        assert bounds.nagaoka_hayashi(m, t * w1)[0] == pytest.approx(t * c1, rel=1e-6)
    assert bounds.nagaoka_hayashi(m, (w1 + w2) / 2)[0] >= (c1 + c2) / 2 - 1e-7


def test_dominates_qcrb():
    rng = np.random.default_rng(9)
    for dim in (2, 3):
        m = random_model(rng, dim)
        jinv = np.linalg.inv(fisher.qfi(m))
        for _ in range(3):
            z = rng.normal(size=(2, 2))
            w = z @ z.T
            assert bounds.nagaoka_hayashi(m, w)[0] >= np.trace(w @ jinv) - 1e-6


def test_weight_validation():
    with pytest.raises(ValidationError, match="PSD"):
        bounds.nagaoka_hayashi(SINGLE, np.diag([1.0, -1.0]))
    with pytest.raises(ValidationError, match="symmetric"):
        bounds.nagaoka_hayashi(SINGLE, np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_sweep_grid():
    a = bounds.sweep_weights(40)
    assert a[0] == pytest.approx(1e-4) and a[-1] == pytest.approx(2 - 1e-4)
    r = np.log(a / (2 - a))
    assert np.allclose(np.diff(r), r[1] - r[0])
    with pytest.raises(ValidationError):
        bounds.sweep_weights(2)


def test_minimal_sweep():
    curve = bounds.sweep(SINGLE, n_points=3)
    assert curve.halfplanes.shape == (3, 3)
    assert len(curve.vertices) == 2


def test_single_copy_curve_invariants():
    curve, scaled = dephasing_curve(1)
    assert max(curve.gaps) <= 1e-7
    v = curve.vertices
    assert np.all(np.diff(v[:, 0]) > 0) and np.all(np.diff(v[:, 1]) < 0)
    for a, b, c in curve.halfplanes:
        assert np.all(a * v[:, 0] + b * v[:, 1] >= c - 1e-7)
    # the analytic curve satisfies every half-plane
    grid = np.geomspace(4 + 1e-4, 1e4, 2000)
    v2 = bounds.analytic_tradeoff_phase_dephasing(0.5, grid)
    for a, b, c in curve.halfplanes:
        assert np.all(a * grid + b * v2 >= c * (1 - 1e-3))
    # contact points lie on the relation; vertices lie on or below it
    pts = curve.points
    assert np.allclose(pts[:, 1], bounds.analytic_tradeoff_phase_dephasing(0.5, pts[:, 0]), rtol=1e-6)
    assert np.all(v[:, 1] <= bounds.analytic_tradeoff_phase_dephasing(0.5, v[:, 0]) * (1 + 1e-9))
    assert bounds.is_convex(v)
    assert scaled.vertices.min() >= 1 - 1e-6


def test_two_copy_vertical_intercept():
    curve, scaled = dephasing_curve(2)
    assert curve.intercept(0) == pytest.approx([2.0, 15 / 8], abs=1e-3)
    assert scaled.intercept(0) == pytest.approx([1.0, 5.0], rel=1e-3)
    assert np.all(np.isfinite(scaled.vertices))


def test_halfplane_axis_pair():
    v, active = bounds.halfplane_intersect([(1, 0, 1), (0, 1, 1)])
    assert np.allclose(v, [[1, 1]])
    assert sorted(active) == [0, 1]


def test_halfplane_middle_line_dropped():
    v, active = bounds.halfplane_intersect([(1, 1, 2), (2, 1, 3), (1, 2, 3)])
    assert np.allclose(v, [[1, 1]])
    assert 0 not in active


def test_halfplane_single_survivor():
    v, active = bounds.halfplane_intersect([(1, 1, 2), (2, 2, 1)])
    assert v.shape == (0, 2) and active == [0]


def test_halfplane_rejects_bad_normals():
    with pytest.raises(ValidationError):
        bounds.halfplane_intersect([(0, 0, 1)])
    with pytest.raises(ValidationError):
        bounds.halfplane_intersect([(-1, 1, 1)])


def _poly_value(v, x):
    return np.interp(x, v[:, 0], v[:, 1])


@pytest.mark.parametrize("seed", range(20))
def test_halfplane_matches_grid_scan(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 8))
    h = np.column_stack([rng.uniform(0, 1, k), rng.uniform(0, 1, k), rng.uniform(0.5, 2, k)])
    h[rng.random(k) < 0.15, int(rng.integers(0, 2))] = 0.0
    h = h[(h[:, 0] > 0) | (h[:, 1] > 0)]
    v, active = bounds.halfplane_intersect(h)
    if len(v) == 0:
        return
    # every vertex is feasible
    assert np.all(h[:, :2] @ v.T >= h[:, 2:3] - 1e-9)
    lo, hi = v[:, 0].min(), v[:, 0].max()
    if hi - lo < 1e-6:
        return
    xs = np.linspace(lo, hi, 2000)
    span = np.ptp(v[:, 1]) + 1e-3
    ys = np.linspace(v[:, 1].min() - 0.05 * span, v[:, 1].max() + 0.05 * span, 2000)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    feas = np.ones((2000, 2000), dtype=bool)
    for a, b, c in h:
        feas &= (a * xs[:, None] + b * ys[None, :]) >= c - 1e-12
    first = np.argmax(feas, axis=1)
    ok = feas.any(axis=1)
    y_grid = ys[first[ok]]
    y_poly = _poly_value(v, xs[ok])
    slope = np.abs(np.diff(v[:, 1]) / np.maximum(np.diff(v[:, 0]), 1e-300)).max() if len(v) > 1 else 0.0
    assert np.all(np.abs(y_grid - y_poly) <= dy + slope * dx + 1e-9)


def test_analytic_relation_examples():
    assert bounds.analytic_tradeoff_phase_dephasing(0.5, 8.0) == pytest.approx(1.5)
    assert bounds.analytic_tradeoff_phase_dephasing(0.5, 1e12) == pytest.approx(0.75, abs=1e-9)
    assert bounds.analytic_tradeoff_phase_dephasing(0.5, 4 + 1e-9) > 1e8
    with pytest.raises(DomainError):
        bounds.analytic_tradeoff_phase_dephasing(0.5, 4.0)


def test_scaled_curve_examples():
    curve = bounds.TradeoffCurve(np.array([[1.0, 1.0, 1.0]]), ["optimal"], np.array([[4.0, 0.75], [2.0, 15 / 8]]), [0])
    j = np.diag([0.25, 4 / 3])
    s = bounds.scaled_curve(curve, j, 1)
    assert np.allclose(s.vertices[0], [1, 1])
    s2 = bounds.scaled_curve(curve, j, 2)
    assert np.allclose(s2.vertices[1], [1, 5])
    assert np.allclose(bounds.scaled_curve(curve, np.eye(2), 1).vertices, curve.vertices)
    with pytest.raises(ValidationError):
        bounds.scaled_curve(curve, np.array([[1.0, 0.5], [0.5, 1.0]]), 1)


def test_csv_format(tmp_path):
    curve, scaled = dephasing_curve(1)
    bounds.write_halfplanes_csv(curve, tmp_path / "h.csv")
    bounds.write_vertices_csv(curve, tmp_path / "v.csv", scaled=scaled)
    h = (tmp_path / "h.csv").read_bytes()
    v = (tmp_path / "v.csv").read_bytes()
    assert b"\r" not in h and b"\r" not in v
    rows = h.decode().splitlines()
    assert rows[0] == "a,b,C,status" and len(rows) == 41
    a, b, c, st = rows[1].split(",")
    assert float(a) == curve.halfplanes[0, 0] and float(c) == curve.halfplanes[0, 2]
    vrows = v.decode().splitlines()
    assert vrows[0] == "V1,V2,V1_scaled,V2_scaled,kind"
    assert vrows[1].endswith(",limit") and vrows[2].endswith(",vertex")


def test_boundary_function():
    curve, _ = dephasing_curve(1)
    x = np.array([5.0, 10.0, 100.0])
    assert np.all(bounds.boundary(curve, x) <= bounds.analytic_tradeoff_phase_dephasing(0.5, x) + 1e-9)
