import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mafh import (
    AntennaLayout,
    ArmijoParams,
    FeasiblePolytope,
    ObjectiveEvaluator,
    RadarConfig,
    StallError,
    ValidationError,
    active_set,
    armijo_step,
    build_grid,
    generate_fh_code,
    mmlwd_layout,
    projection_matrix,
    random_feasible_layout,
    rgpm_multistart,
    rgpm_optimize,
)
from mafh.rgpm import write_trace_csv


@pytest.fixture(scope="module")
def small():
    """M_t=2 angular-only problem: cheap enough for exhaustive checks."""
    cfg = RadarConfig()
    code = generate_fh_code(cfg, 2, seed=0)
    lay = AntennaLayout(d=np.array([0.5]), L=1.2)
    grid = build_grid(cfg, lay, (1.0, 0.0, 0.0))
    poly = FeasiblePolytope.spacing_bounds(2, 1.2)
    return cfg, code, grid, poly


def test_polytope_structure():
    poly = FeasiblePolytope.spacing_bounds(8, 7.0)
    assert poly.A.shape == (8, 7)
    assert_array_equal(poly.A[:7], np.eye(7))
    assert_array_equal(poly.A[7], -np.ones(7))
    assert_allclose(poly.b, [0.5] * 7 + [-7.0])
    assert poly.contains(np.full(7, 0.5))
    assert poly.contains(np.full(7, 1.0))
    assert not poly.contains(np.full(7, 1.1))   # sum exceeds the budget
    assert not poly.contains(np.full(7, 0.4))   # below the spacing floor


def test_polytope_validation():
    with pytest.raises(ValidationError, match="^M_t:"):
        FeasiblePolytope.spacing_bounds(1, 5.0)
    with pytest.raises(ValidationError, match="^L:"):
        FeasiblePolytope.spacing_bounds(8, 3.0)
    with pytest.raises(ValidationError, match="polytope"):
        FeasiblePolytope(A=np.eye(3), b=np.zeros(2))


def test_active_set_selection(poly8):
    # all seven floors bind at the half-wavelength start
    rows = active_set(np.full(7, 0.5), poly8)
    assert rows.shape == (7, 7)
    # interior point: nothing binds
    assert active_set(np.full(7, 0.9), poly8).shape == (0, 7)
    # width-optimal layout: six floors plus the budget row
    rows = active_set(mmlwd_layout(8, 7.0).d, poly8)
    assert rows.shape == (7, 7)
    assert np.any(np.all(rows == -1.0, axis=1))


def test_active_set_rejects_infeasible(poly8):
    with pytest.raises(ValidationError, match="infeasible"):
        active_set(np.full(7, 0.4), poly8)


def test_projection_matrix_algebra():
    n = 5
    assert_array_equal(projection_matrix(np.zeros((0, n))), np.eye(n))
    rows = np.zeros((2, n))
    rows[0, 0] = 1.0
    rows[1] = -1.0
    P = projection_matrix(rows)
    assert_allclose(P, P.T, atol=1e-12)
    assert_allclose(P @ P, P, atol=1e-12)
    assert_allclose(rows @ P, np.zeros((2, n)), atol=1e-12)


def test_projection_matrix_rejects_dependent_rows():
    rows = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValidationError, match="dependent"):
        projection_matrix(rows)


def test_armijo_params_validation():
    p = ArmijoParams()
    assert (p.omega0, p.rho, p.sigma, p.omega_min) == (1.0, 0.5, 1e-4, 1e-12)
    with pytest.raises(ValidationError):
        ArmijoParams(rho=1.5)
    with pytest.raises(ValidationError):
        ArmijoParams(omega_min=2.0, omega0=1.0)


def test_armijo_step_respects_feasibility_cap(small):
    cfg, code, grid, poly = small
    # pushing the single spacing toward the budget: at most 0.05 of headroom
    d = AntennaLayout(d=np.array([1.15]), L=1.2)
    omega = armijo_step(d, np.array([-1.0]), poly, grid, code, cfg)
    assert 0.0 < omega <= 0.05 + 1e-12
    assert poly.contains(d.d + omega * np.array([1.0]))


def test_armijo_step_zero_direction_rejected(small):
    cfg, code, grid, poly = small
    d = AntennaLayout(d=np.array([0.8]), L=1.2)
    with pytest.raises(ValidationError, match="direction"):
        armijo_step(d, np.zeros(1), poly, grid, code, cfg)


def test_armijo_step_stalls_uphill(small):
    cfg, code, grid, poly = small
    ev = ObjectiveEvaluator(grid, code, cfg)
    d = AntennaLayout(d=np.array([0.8]), L=1.2)
    uphill = -ev.grad_f_weighted(d.d)   # a step along +gradient cannot descend
    if np.linalg.norm(uphill) > 0:
        with pytest.raises(StallError):
            armijo_step(d, uphill, poly, grid, code, cfg)


def test_rgpm_monotone_and_feasible(small):
    cfg, code, grid, poly = small
    res = rgpm_optimize(AntennaLayout(d=np.array([1.0]), L=1.2), poly, grid,
                        code, cfg, K_max=50)
    fs = [r.f for r in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(fs, fs[1:]))
    assert poly.contains(res.layout.d)
    assert res.converged
    assert res.certificate["reason"] in ("interior-gradient", "kkt-multipliers")


def test_rgpm_matches_exhaustive_search(small):
    """Multistart lands on the global optimum of the 1-D landscape."""
    cfg, code, grid, poly = small
    ev = ObjectiveEvaluator(grid, code, cfg)
    ds = np.arange(0.5, 1.2 + 1e-12, 1e-3)
    vals = [ev.f_weighted(np.array([x])) for x in ds]
    d_star = ds[int(np.argmin(vals))]
    best, _ = rgpm_multistart(poly, grid, code, cfg, 2, 1.2, seed=0)
    assert abs(best.layout.d[0] - d_star) <= 1e-2
    assert best.f_final <= min(vals) + 1e-9


def test_rgpm_deterministic(small):
    cfg, code, grid, poly = small
    d0 = AntennaLayout(d=np.array([0.95]), L=1.2)
    r1 = rgpm_optimize(d0, poly, grid, code, cfg)
    r2 = rgpm_optimize(d0, poly, grid, code, cfg)
    assert_array_equal(r1.layout.d, r2.layout.d)
    assert [a.f for a in r1.trace] == [a.f for a in r2.trace]


def test_rgpm_argument_validation(small):
    cfg, code, grid, poly = small
    d0 = AntennaLayout(d=np.array([0.8]), L=1.2)
    with pytest.raises(ValidationError, match="^K_max:"):
        rgpm_optimize(d0, poly, grid, code, cfg, K_max=0)
    with pytest.raises(ValidationError, match="^T_threshold:"):
        rgpm_optimize(d0, poly, grid, code, cfg, T_threshold=0.0)
    with pytest.raises(ValidationError, match="^d0:"):
        rgpm_optimize(AntennaLayout(d=np.array([1.25]), L=1.3), poly, grid,
                      code, cfg)


def test_rgpm_degenerate_polytope(cfg):
    # budget exactly equal to the sum of floors: a single feasible point
    code = generate_fh_code(cfg, 4, seed=0)
    lay = AntennaLayout(d=np.full(3, 0.5), L=1.5)
    grid = build_grid(cfg, lay, (1, 0, 0))
    poly = FeasiblePolytope.spacing_bounds(4, 1.5)
    res = rgpm_optimize(lay, poly, grid, code, cfg)
    assert res.converged and res.certificate["reason"] == "degenerate"
    assert_allclose(res.layout.d, [0.5, 0.5, 0.5])


def test_rgpm_iteration_cap(small):
    cfg, code, grid, poly = small
    res = rgpm_optimize(AntennaLayout(d=np.array([1.0]), L=1.2), poly, grid,
                        code, cfg, K_max=1, T_threshold=1e-12)
    assert not res.converged
    assert res.certificate["reason"] == "max-iterations"
    assert res.trace[-1].k <= 1


def test_rgpm_stall_returns_best_so_far(cfg, code8, poly8, equid8):
    class NoDecrease:
        """Objective that admits no sufficient-decrease step anywhere."""

        def f_weighted(self, d):
            return 1.0

        def grad_f_weighted(self, d):
            return np.ones_like(d)

    grid = build_grid(cfg, equid8, (1, 0, 0))
    d0 = AntennaLayout(d=np.full(7, 0.9), L=7.0)
    res = rgpm_optimize(d0, poly8, grid, code8, cfg, evaluator=NoDecrease())
    assert res.stalled and not res.converged
    assert res.certificate["reason"] == "stalled"
    assert_allclose(res.layout.d, d0.d)
    assert res.f_final == 1.0


def test_multistart_start_count_and_best(small):
    cfg, code, grid, poly = small
    best, results = rgpm_multistart(poly, grid, code, cfg, 2, 1.2, n_starts=4,
                                    seed=0)
    assert len(results) == 4
    assert best.f_final == min(r.f_final for r in results)
    # first two starts are the deterministic layouts
    assert results[0].trace[0].f == pytest.approx(
        ObjectiveEvaluator(grid, code, cfg).f_weighted(np.array([0.5])))
    with pytest.raises(ValidationError, match="^n_starts:"):
        rgpm_multistart(poly, grid, code, cfg, 2, 1.2, n_starts=0)


def test_multistart_thread_count_invariance(small, monkeypatch):
    cfg, code, grid, poly = small
    monkeypatch.setenv("MAFH_THREADS", "1")
    b1, _ = rgpm_multistart(poly, grid, code, cfg, 2, 1.2, seed=3)
    monkeypatch.setenv("MAFH_THREADS", "4")
    b4, _ = rgpm_multistart(poly, grid, code, cfg, 2, 1.2, seed=3)
    assert_array_equal(b1.layout.d, b4.layout.d)
    assert b1.f_final == b4.f_final


def test_multistart_rejects_bad_thread_env(small, monkeypatch):
    cfg, code, grid, poly = small
    monkeypatch.setenv("MAFH_THREADS", "plenty")
    with pytest.raises(ValidationError, match="MAFH_THREADS"):
        rgpm_multistart(poly, grid, code, cfg, 2, 1.2)


def test_write_trace_csv(tmp_path, small):
    cfg, code, grid, poly = small
    res = rgpm_optimize(AntennaLayout(d=np.array([1.0]), L=1.2), poly, grid,
                        code, cfg, K_max=20)
    path = tmp_path / "trace.csv"
    write_trace_csv(res, path, {"M_t": 2}, seed=0)
    lines = path.read_text().splitlines()
    assert any(ln.startswith("# reason=") for ln in lines if ln.startswith("#"))
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "k,f,grad_norm,active_count,omega"
    assert len(body) == 1 + len(res.trace)
