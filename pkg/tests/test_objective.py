import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mafh import (
    AntennaLayout,
    ObjectiveEvaluator,
    RadarConfig,
    ValidationError,
    build_grid,
    f1_bar,
    f2_bar,
    f3_bar,
    f_weighted,
    finite_diff_grad,
    generate_fh_code,
    grad_f_weighted,
    random_feasible_layout,
)
from mafh.objective import ObjectiveGrid

ALPHA_CORNERS = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]


def _scaled_grid(g, cfg, k1, k2, k3):
    """Same axes ranges with k-times finer subdivisions."""
    n1, n2, n3 = g.n1 * k1, g.n2 * k2, g.n3 * k3
    th = -np.pi / 2 + np.arange(n1 + 1) * (np.pi / n1)
    v = -cfg.f_max + np.arange(n2 + 1) * (2 * cfg.f_max / n2)
    tau = -cfg.T_w + np.arange(n3 + 1) * (2 * cfg.T_w / n3)
    return ObjectiveGrid(
        n1=n1, n2=n2, n3=n3, theta_samples=th, v_samples=v, tau_samples=tau,
        d_theta=np.pi / n1, d_v=2 * cfg.f_max / n2 * cfg.delta_t,
        d_tau=2 * cfg.T_w / n3 / cfg.delta_t, alpha=g.alpha,
        theta_eval=None, theta_f23=th, w_theta23=np.pi / n1)


def test_grid_sizes_default_config(cfg, equid8):
    g = build_grid(cfg, equid8, (1 / 3, 1 / 3, 1 / 3))
    assert (g.n1, g.n2, g.n3) == (35, 240, 192)
    assert g.theta_samples.size == 36
    assert g.v_samples.size == 241
    assert g.tau_samples.size == 193
    assert_allclose(g.d_theta, np.pi / 35)
    # Doppler / delay cell weights are kept in subpulse units so the three
    # objectives stay commensurate under one weight triple
    assert_allclose(g.d_v, 2 * cfg.f_max / 240 * cfg.delta_t)
    assert_allclose(g.d_tau, 2 * cfg.T_w / 192 / cfg.delta_t)


def test_grid_alpha_validation(cfg, equid8):
    with pytest.raises(ValidationError, match="^alpha:"):
        build_grid(cfg, equid8, (0.5, 0.5))
    with pytest.raises(ValidationError, match="^alpha:"):
        build_grid(cfg, equid8, (-0.1, 0.6, 0.5))
    with pytest.raises(ValidationError, match="^alpha:"):
        build_grid(cfg, equid8, (0.5, 0.4, 0.4))


def test_grid_theta_eval_mode(cfg, equid8):
    g = build_grid(cfg, equid8, (0, 0, 1), theta_eval=np.pi / 3)
    assert_allclose(g.theta_f23, [np.pi / 3])
    assert g.w_theta23 == pytest.approx(np.pi)
    with pytest.raises(ValidationError, match="^theta_eval:"):
        build_grid(cfg, equid8, (0, 0, 1), theta_eval=2.0)


def test_frozen_objectives_equidistant(cfg, code8, equid8):
    g = build_grid(cfg, equid8, (1 / 3, 1 / 3, 1 / 3))
    ev = ObjectiveEvaluator(g, code8, cfg)
    assert_allclose(ev.f1(equid8.d), 116.370402, rtol=1e-8)
    assert_allclose(ev.f2(equid8.d), 81.348069, rtol=1e-8)
    assert_allclose(ev.f3(equid8.d), 49.085063, rtol=1e-8)


def test_matched_diagonal_floor(cfg, code8, equid8):
    # the n1+1 matched samples alone contribute M_t^2 * cell each to f1
    g = build_grid(cfg, equid8, (1, 0, 0))
    floor = 64.0 * (g.n1 + 1) * g.d_theta ** 2
    assert f1_bar(equid8, g, code8, cfg) >= floor


def test_single_antenna_degenerate(cfg):
    """M_t=1: |chi| = 1 everywhere, so f1 is the closed-rule square measure."""
    lay = AntennaLayout(d=np.zeros(0), L=0.0)
    code = generate_fh_code(cfg, 1, seed=0)
    g = build_grid(cfg, lay, (1, 0, 0))
    want = (np.pi * (1 + 1 / g.n1)) ** 2  # (n1+1 samples) x (pi/n1 weight), squared
    assert_allclose(f1_bar(lay, g, code, cfg), want, rtol=1e-12)


def test_f2_single_element_reduction():
    """M_t=1, Q=1 collapses f2 to the sampled sinc^2 Doppler energy."""
    cfg = RadarConfig(Q=1, K=8, T_w=None)
    lay = AntennaLayout(d=np.zeros(0), L=0.0)
    code = generate_fh_code(cfg, 1, seed=0)
    g = build_grid(cfg, lay, (0, 1, 0))
    want = (np.sinc(g.v_samples * cfg.delta_t) ** 2).sum() * g.d_v \
        * g.theta_f23.size * g.w_theta23
    assert_allclose(f2_bar(lay, g, code, cfg), want, rtol=1e-12)


def test_f3_single_element_reduction():
    cfg = RadarConfig(Q=1, K=8, T_w=None)
    lay = AntennaLayout(d=np.zeros(0), L=0.0)
    code = generate_fh_code(cfg, 1, seed=0)
    g = build_grid(cfg, lay, (0, 0, 1))
    tri = np.clip(1.0 - np.abs(g.tau_samples) / cfg.delta_t, 0.0, None)
    want = (tri ** 2).sum() * g.d_tau * g.theta_f23.size * g.w_theta23
    assert_allclose(f3_bar(lay, g, code, cfg), want, rtol=1e-12)


def test_weight_collapse(cfg, code8, equid8):
    g1 = build_grid(cfg, equid8, (1, 0, 0))
    assert_allclose(f_weighted(equid8, g1, code8, cfg),
                    f1_bar(equid8, g1, code8, cfg), rtol=1e-12)
    g3 = build_grid(cfg, equid8, (0, 0, 1))
    assert_allclose(f_weighted(equid8, g3, code8, cfg),
                    f3_bar(equid8, g3, code8, cfg), rtol=1e-12)


def test_weighted_convex_combination(cfg, code8, equid8):
    g = build_grid(cfg, equid8, (1 / 3, 1 / 3, 1 / 3))
    parts = [f1_bar(equid8, g, code8, cfg), f2_bar(equid8, g, code8, cfg),
             f3_bar(equid8, g, code8, cfg)]
    f = f_weighted(equid8, g, code8, cfg)
    assert min(parts) <= f <= max(parts)


@pytest.mark.parametrize("alpha", ALPHA_CORNERS)
def test_gradient_matches_finite_differences(cfg, code8, alpha):
    lay = random_feasible_layout(8, 7.0, seed=5)
    g = build_grid(cfg, lay, alpha)
    ga = grad_f_weighted(lay, g, code8, cfg)
    gn = finite_diff_grad(lay, g, code8, cfg, h=1e-6)
    assert_allclose(ga, gn, rtol=1e-4, atol=1e-8)


def test_gradient_matches_fd_theta_eval_mode(cfg, code8):
    lay = random_feasible_layout(8, 7.0, seed=6)
    g = build_grid(cfg, lay, (0.2, 0.3, 0.5), theta_eval=np.pi / 3)
    assert_allclose(grad_f_weighted(lay, g, code8, cfg),
                    finite_diff_grad(lay, g, code8, cfg, h=1e-6),
                    rtol=1e-4, atol=1e-8)


def test_finite_differences_second_order(cfg, code8):
    """Halving h cuts the central-difference error roughly fourfold."""
    lay = random_feasible_layout(8, 7.0, seed=7)
    g = build_grid(cfg, lay, (1, 0, 0))
    exact = grad_f_weighted(lay, g, code8, cfg)
    err = [np.max(np.abs(finite_diff_grad(lay, g, code8, cfg, h=h) - exact))
           for h in (4e-3, 2e-3)]
    assert err[1] < err[0] / 2.5


def test_finite_diff_rejects_bad_step(cfg, code8, equid8):
    g = build_grid(cfg, equid8, (1, 0, 0))
    with pytest.raises(ValidationError, match="^h:"):
        finite_diff_grad(equid8, g, code8, cfg, h=0.0)


def test_gradient_length_excludes_anchor(cfg, code8, equid8):
    # d_{t,0} = 0 is a convention, not a variable: M_t - 1 components only
    g = build_grid(cfg, equid8, (1, 0, 0))
    assert grad_f_weighted(equid8, g, code8, cfg).shape == (7,)


def test_evaluator_deterministic(cfg, code8, equid8):
    g = build_grid(cfg, equid8, (0.4, 0.3, 0.3))
    ev = ObjectiveEvaluator(g, code8, cfg)
    assert ev.f_weighted(equid8.d) == ev.f_weighted(equid8.d)
    a = ev.grad_f_weighted(equid8.d)
    b = ev.grad_f_weighted(equid8.d)
    assert np.array_equal(a, b)


def test_refinement_convergence(cfg, code8, equid8):
    """Finer grids move each objective toward a limit.

    The Doppler/delay integrands are smooth, so doubling stays within 2%;
    the angular square carries an arcsin shear at the visible-region edges
    and its closed-rule sum converges more slowly (about 5% per doubling at
    the minimal n1).
    """
    for alpha, tol in [((1, 0, 0), 0.06), ((0, 1, 0), 0.02), ((0, 0, 1), 0.02)]:
        g = build_grid(cfg, equid8, alpha)
        f_base = ObjectiveEvaluator(g, code8, cfg).f_weighted(equid8.d)
        g2 = _scaled_grid(g, cfg, 2, 2, 2)
        f_fine = ObjectiveEvaluator(g2, code8, cfg).f_weighted(equid8.d)
        assert abs(f_fine - f_base) / f_base < tol


def test_refinement_is_cauchy(cfg, code8, equid8):
    # successive doublings shrink the change: the sums are converging
    g = build_grid(cfg, equid8, (1 / 3, 1 / 3, 1 / 3))
    f1x = ObjectiveEvaluator(g, code8, cfg).f_weighted(equid8.d)
    f2x = ObjectiveEvaluator(_scaled_grid(g, cfg, 2, 2, 2), code8,
                             cfg).f_weighted(equid8.d)
    f4x = ObjectiveEvaluator(_scaled_grid(g, cfg, 4, 4, 4), code8,
                             cfg).f_weighted(equid8.d)
    assert abs(f4x - f2x) < abs(f2x - f1x)
