import numpy as np
import pytest

from mixedcsc.groups import group_sums, unit_group_operator
from mixedcsc.signal import Dictionary, apply_dictionary
from mixedcsc.solvers import (AdmmConfig, InnerState, Penalty, PenaltySpec,
                              functional, prox_max_groups, solve_csc,
                              solve_csc_l1, solve_csc_mixed_nested,
                              solve_csc_mixed_nonneg)
from helpers import cvx_functional, dense_ops, toy_problem

# explicit parameters for 1-D toys; the image-scale defaults are tuned
# for 8x8 filters and converge slowly here
TOY = dict(rho=1.0, alpha0=1.0, alpha1=1.0, max_iter=4000, eps_rel=1e-9,
           inner_max_iter=500, inner_tol=1e-10)


@pytest.fixture(scope="module")
def toy():
    return toy_problem(1)


def test_default_parameters():
    c = AdmmConfig().resolve(Penalty.L1INF, 2.0)
    assert (c.rho, c.alpha0, c.alpha1) == (0.1, 0.06, pytest.approx(1 / 0.06))
    assert not c.residual_balancing
    c = AdmmConfig().resolve(Penalty.L12, 2.0)
    assert (c.rho, c.alpha0) == (6.0, 0.03)
    c = AdmmConfig().resolve(Penalty.L1, 2.0)
    assert c.rho == 101.0 and c.residual_balancing
    assert (c.rb_mu, c.rb_tau) == (10.0, 2.0)
    assert AdmmConfig(rho=3.0).resolve(Penalty.L1, 2.0).rho == 3.0
    with pytest.raises(ValueError):
        AdmmConfig(alpha0=-1.0).resolve(Penalty.L12, 1.0)


def test_penalty_spec_validation():
    with pytest.raises(ValueError):
        PenaltySpec(Penalty.L1, -1.0)
    with pytest.raises(ValueError):
        PenaltySpec("l3", 1.0)


@pytest.mark.parametrize("kind,alg", [("l1", "nonneg"), ("l1inf", "nested"),
                                      ("l1inf", "nonneg"), ("l12", "nested"),
                                      ("l12", "nonneg")])
def test_zero_signal_gives_zero_code(kind, alg):
    d = Dictionary.from_filters(np.ones((2, 2, 2)))
    r = solve_csc(d, np.zeros((6, 6)), PenaltySpec(kind, 0.5),
                  AdmmConfig(max_iter=20), alg)
    assert np.all(r.x == 0)


def test_l1_lambda_zero_fits_signal():
    rng = np.random.default_rng(0)
    d = Dictionary.from_filters(rng.standard_normal((4, 3, 3)))
    s = rng.standard_normal((16, 16))
    r = solve_csc_l1(d, s, PenaltySpec("l1", 0.0),
                     AdmmConfig(rho=1.0, max_iter=500, eps_rel=1e-10))
    res = np.linalg.norm(apply_dictionary(d, r.x) - s) / np.linalg.norm(s)
    D, _ = dense_ops(d, s.shape)
    xls = np.linalg.lstsq(D, s.ravel(), rcond=None)[0]
    oracle = np.linalg.norm(D @ xls - s.ravel()) / np.linalg.norm(s)
    assert oracle < 1e-10
    assert res < 1e-3


def test_l1_toy_matches_convex_oracle(toy):
    d, s = toy
    fo, _ = cvx_functional(d, s, "l1", 0.1)
    r = solve_csc_l1(d, s, PenaltySpec("l1", 0.1),
                     AdmmConfig(max_iter=5000, eps_rel=1e-10))
    assert abs(r.final_functional - fo) <= 1e-5 * fo


def test_weighted_l1_toy_matches_convex_oracle(toy):
    d, s = toy
    w = np.random.default_rng(5).random((2,) + s.shape) + 0.2
    fo, _ = cvx_functional(d, s, "l1", 0.1, l1_w=w)
    r = solve_csc_l1(d, s, PenaltySpec("l1", 0.1, l1_weights=w),
                     AdmmConfig(max_iter=5000, eps_rel=1e-10))
    assert abs(r.final_functional - fo) <= 1e-5 * fo


def test_l1_residuals_small_on_toy(toy):
    d, s = toy
    r = solve_csc_l1(d, s, PenaltySpec("l1", 0.1), AdmmConfig(max_iter=2000))
    n = np.sqrt(r.x.size)
    assert r.converged
    assert np.all(np.isfinite(r.primal_residual))
    assert r.primal_residual[-1] < 1e-4 * n
    assert r.dual_residual[-1] < 1e-4 * n
    assert len(r.primal_residual) == len(r.dual_residual) == r.iterations
    assert len(r.functional) == r.iterations
    assert np.all(np.isfinite(r.functional))


@pytest.mark.parametrize("kind", ["l1inf", "l12"])
def test_mixed_solvers_agree(toy, kind):
    d, s = toy
    p = PenaltySpec(kind, 0.3)
    fo, _ = cvx_functional(d, s, kind, 0.3)
    a = solve_csc_mixed_nested(d, s, p, AdmmConfig(**TOY))
    b = solve_csc_mixed_nonneg(d, s, p, AdmmConfig(**TOY))
    assert abs(a.final_functional - fo) <= 1e-3 * fo
    assert abs(b.final_functional - fo) <= 1e-3 * fo
    assert abs(a.final_functional - b.final_functional) <= \
        0.01 * abs(b.final_functional)


def test_weighted_mixed_matches_oracle(toy):
    d, s = toy
    gw = np.random.default_rng(6).random(s.shape) + 0.5
    for kind in ("l1inf", "l12"):
        p = PenaltySpec(kind, 0.3, group_weights=gw)
        fo, _ = cvx_functional(d, s, kind, 0.3, group_w=gw)
        b = solve_csc_mixed_nonneg(d, s, p, AdmmConfig(**TOY))
        assert abs(b.final_functional - fo) <= 1e-3 * fo


def test_nonneg_complementarity(toy):
    d, s = toy
    r = solve_csc_mixed_nonneg(d, s, PenaltySpec("l12", 0.3),
                               AdmmConfig(**TOY))
    x0, x1 = r.extra["x0"], r.extra["x1"]
    assert np.all(x0 >= 0) and np.all(x1 >= 0)
    overlap = np.mean(np.minimum(x0, x1))
    assert overlap <= 1e-3 * np.mean(np.abs(r.x))
    np.testing.assert_array_equal(r.x, x0 - x1)


def test_large_lambda_kills_code():
    rng = np.random.default_rng(1)
    d = Dictionary.from_filters(rng.standard_normal((2, 3, 3)))
    s = rng.random((8, 8))
    for alg in ("nested", "nonneg"):
        r = solve_csc(d, s, PenaltySpec("l1inf", 1e6), AdmmConfig(max_iter=50),
                      alg)
        assert np.max(np.abs(r.x)) < 1e-6
        assert np.max(np.abs(apply_dictionary(d, r.x))) < 1e-5


@pytest.mark.parametrize("kind,alg", [("l1", "nonneg"), ("l1inf", "nested"),
                                      ("l1inf", "nonneg"), ("l12", "nonneg")])
def test_local_minimality_probe(toy, kind, alg):
    d, s = toy
    p = PenaltySpec(kind, 0.1 if kind == "l1" else 0.3)
    cfg = AdmmConfig(**TOY) if kind != "l1" else AdmmConfig(max_iter=5000,
                                                             eps_rel=1e-10)
    r = solve_csc(d, s, p, cfg, alg)
    f0 = functional(d, s, r.x, p)
    rng = np.random.default_rng(2)
    for _ in range(200):
        dx = rng.standard_normal(r.x.shape) * 1e-3
        assert functional(d, s, r.x + dx, p) >= f0 - 1e-7 * f0


def test_prox_groups_trivial_and_sign():
    rng = np.random.default_rng(3)
    g = unit_group_operator((1, 2), 2, (1, 7))
    v = rng.standard_normal((2, 1, 7))
    out = prox_max_groups(g, v, 0.0)
    np.testing.assert_array_equal(out.x, v)
    a = prox_max_groups(g, v, 0.4).x
    b = prox_max_groups(g, -v, 0.4).x
    np.testing.assert_array_equal(a, -b)


def _prox_objective(g, x, v, tau, outer):
    gs = group_sums(g, x)
    f = np.max(gs) if outer == "max" else np.sqrt(np.sum(gs**2))
    return tau * f + 0.5 * np.sum((x - v)**2)


@pytest.mark.parametrize("outer", ["max", "l2"])
def test_prox_groups_numerical_oracle(outer):
    import cvxpy as cp
    rng = np.random.default_rng(4)
    g = unit_group_operator((1, 2), 1, (1, 6))
    v = rng.standard_normal((1, 1, 6))
    cfg = AdmmConfig(inner_max_iter=5000, inner_tol=1e-12)
    out = prox_max_groups(g, v, 0.5, outer, config=cfg)
    f = _prox_objective(g, out.x, v, 0.5, outer)
    _, G = dense_ops(Dictionary(np.ones((1, 1, 2)), normalized=False),
                     (1, 6))
    x = cp.Variable(6)
    gs = G @ cp.abs(x)
    reg = cp.max(gs) if outer == "max" else cp.norm(gs, 2)
    prob = cp.Problem(cp.Minimize(0.5 * reg + 0.5 * cp.sum_squares(
        x - v.ravel())))
    prob.solve(solver="CLARABEL")
    assert f - prob.value <= 1e-4
    assert out.converged


def test_prox_groups_warm_start_state():
    rng = np.random.default_rng(5)
    g = unit_group_operator((2, 2), 2, (5, 5))
    v = rng.standard_normal((2, 5, 5))
    cfg = AdmmConfig(inner_max_iter=20000, inner_tol=1e-13)
    first = prox_max_groups(g, v, 0.3, config=cfg)
    assert isinstance(first.state, InnerState) and first.converged
    # restarting from a converged state stays put and stops almost at once
    again = prox_max_groups(g, v, 0.3, config=cfg, state=first.state)
    assert again.iterations <= 5
    np.testing.assert_allclose(again.x, first.x, atol=1e-8)


def test_inner_cap_warns_not_fails(toy):
    d, s = toy
    cfg = AdmmConfig(rho=1.0, alpha0=1.0, alpha1=1.0, max_iter=5,
                     inner_max_iter=1, inner_tol=1e-14)
    r = solve_csc_mixed_nested(d, s, PenaltySpec("l1inf", 0.3), cfg)
    assert r.inner_warnings > 0
    assert np.all(np.isfinite(r.x))


def test_fixed_iteration_mode(toy):
    d, s = toy
    r = solve_csc_l1(d, s, PenaltySpec("l1", 0.1),
                     AdmmConfig(max_iter=37, eps_rel=None))
    assert r.iterations == 37 and not r.converged
    assert r.time_per_iteration > 0


def test_functional_tracking_can_be_disabled(toy):
    d, s = toy
    r = solve_csc_mixed_nonneg(d, s, PenaltySpec("l12", 0.3),
                               AdmmConfig(max_iter=10, eps_rel=None,
                                          track_functional=False))
    assert np.all(np.isnan(r.functional))
    assert np.isfinite(r.final_functional)


def test_unknown_algorithm(toy):
    d, s = toy
    with pytest.raises(ValueError):
        solve_csc(d, s, PenaltySpec("l12", 0.3), algorithm="magic")


def test_clamping_property(toy):
    d, s = toy
    r = solve_csc_mixed_nonneg(d, s, PenaltySpec("l1inf", 0.3),
                               AdmmConfig(**dict(TOY, max_iter=20000,
                                                 eps_rel=1e-12)))
    g = unit_group_operator((1, 3), 2, s.shape)
    gs = group_sums(g, r.x)
    assert np.count_nonzero(gs >= gs.max() * (1 - 1e-6)) >= 2
