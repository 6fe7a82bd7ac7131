import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inexactgm.exceptions import CapabilityError, DomainError, OracleError
from inexactgm.oracles import (HolderOracle, HolderParams, InnerMaxOracle, InnerMaxProblem,
                               NoiseWrappedOracle, Oracle, OracleAnswer, QuadraticG, QuarticG,
                               SmoothOracle, holder_L_of_delta, holder_params_from_inner_max,
                               operator_norm, oracle_contract_check)
from inexactgm.spaces import FeasibleSet


def half_square(fset):
    return SmoothOracle(lambda x: 0.5 * float(x @ x), lambda x: x.copy(), fset, L=1.0)


class ShiftedValueOracle(Oracle):
    """Understates f by ten times the requested budget."""

    def __init__(self, inner):
        super().__init__(inner.fset)
        self.inner = inner
        self.f_true = inner.f_true
        self.lipschitz = inner.lipschitz

    def _answer(self, x, delta_c):
        a = self.inner.query(x, delta_c)
        return OracleAnswer(a.f_approx - 10.0 * delta_c, a.g_approx, delta_c, 0.0)

    def L_of_delta(self, delta_c):
        return self.lipschitz


def test_exact_smooth_oracle_answer():
    ans = half_square(FeasibleSet.whole(2)).query([1.0, 0.0], 0.37)
    assert ans.f_approx == 0.5
    assert np.array_equal(ans.g_approx, [1.0, 0.0])
    assert ans.delta_u_bound == 0.0


def test_query_validates_inputs():
    o = half_square(FeasibleSet.box(-1.0, 1.0, dim=2))
    with pytest.raises(DomainError):
        o.query([2.0, 0.0], 0.1)
    with pytest.raises(ValueError):
        o.query([0.0, 0.0], 0.0)


# --- L(delta) and the maximum-function parameters --------------------------


@pytest.mark.parametrize("nu,l_nu,delta,expected", [
    (1.0, 3.5, 0.01, 3.5),
    (0.0, 1.0, 2.0, 1.0),
    (1.0 / 3.0, 2.0, 0.5, 4.0),
])
def test_L_of_delta_examples(nu, l_nu, delta, expected):
    assert holder_L_of_delta(HolderParams(nu, l_nu), delta) == pytest.approx(expected, rel=1e-14)


def test_L_of_delta_high_precision():
    mpmath.mp.dps = 30
    nu, l_nu, delta = mpmath.mpf(1) / 3, mpmath.mpf(2), mpmath.mpf(1) / 2
    e = (1 - nu) / (1 + nu)
    ref = (e * 2 / delta) ** e * l_nu ** (2 / (1 + nu))
    assert float(ref) == pytest.approx(4.0, rel=1e-25)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.01, 10.0), st.floats(1e-6, 10.0), st.floats(1.0, 100.0))
def test_L_of_delta_non_increasing(nu, l_nu, delta, factor):
    p = HolderParams(nu, l_nu)
    assert holder_L_of_delta(p, delta * factor) <= holder_L_of_delta(p, delta) * (1 + 1e-12)


def test_L_of_delta_rejects_nonpositive():
    with pytest.raises(ValueError):
        holder_L_of_delta(HolderParams(0.5, 1.0), 0.0)


@pytest.mark.parametrize("rho,sigma,a,nu,l_nu", [
    (2, 1, 1, 1.0, 1.0),
    (3, 4, 2, 0.5, math.sqrt(2)),
    (2, 2, 3, 1.0, 4.5),
])
def test_inner_max_parameters(rho, sigma, a, nu, l_nu):
    p = holder_params_from_inner_max(rho, sigma, a)
    assert p.nu == pytest.approx(nu)
    assert p.l_nu == pytest.approx(l_nu, rel=1e-14)


def test_inner_max_parameters_reject_low_degree():
    with pytest.raises(ValueError):
        holder_params_from_inner_max(1.5, 1.0, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_operator_norm_matches_svd(seed):
    A = np.random.default_rng(seed).standard_normal((4 + seed, 3))
    assert operator_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-8)


# --- uniformly convex inner functions ---------------------------------------


@pytest.mark.parametrize("G", [QuadraticG(1.0), QuadraticG(2.5), QuarticG(1.0), QuarticG(3.0)])
def test_uniform_convexity(G):
    rng = np.random.default_rng(0)
    for _ in range(500):
        u, v = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        lhs = (G.grad(u) - G.grad(v)) @ (u - v)
        assert lhs >= G.sigma_rho * np.linalg.norm(u - v) ** G.rho - 1e-12


@pytest.mark.parametrize("G", [QuadraticG(1.0), QuarticG(2.0)])
def test_argmax_on_ball_against_sampling(G):
    rng = np.random.default_rng(1)
    ball = FeasibleSet.ball(np.zeros(3), 1.0)
    for _ in range(20):
        c = rng.normal(size=3) * 2
        u = G.argmax_on_ball(c, 1.0)
        best = c @ u - G(u)
        assert ball.contains(u, tol=1e-12)
        for _ in range(200):
            v = ball.sample(rng)
            assert c @ v - G(v) <= best + 1e-12


# --- noise wrapper ----------------------------------------------------------


def test_noise_wrapper_zero_budgets_is_exact():
    box = FeasibleSet.box(-1.0, 1.0, dim=3)
    exact = half_square(box)
    noisy = NoiseWrappedOracle(exact, (0, 0), (0, 0))
    x = np.array([0.1, -0.4, 0.9])
    a, b = exact.query(x, 0.01), noisy.query(x, 0.01)
    assert a.f_approx == b.f_approx
    assert np.array_equal(a.g_approx, b.g_approx)


def test_noise_wrapper_combination_rule():
    exact = half_square(FeasibleSet.box(-1.0, 1.0, dim=1))
    noisy = NoiseWrappedOracle(exact, (0, 0), (0, 0.1), diameter=2.0)
    assert noisy.delta_u == pytest.approx(0.2)
    assert noisy.query([0.0], 1.0).delta_u_bound == pytest.approx(0.2)


def test_noise_wrapper_scales_controlled_budgets():
    exact = half_square(FeasibleSet.box(-1.0, 1.0, dim=2))
    noisy = NoiseWrappedOracle(exact, (0.1, 0), (0.1, 0), seed=3)
    D = exact.fset.diameter()
    assert noisy.query([0.0, 0.0], 10.0).delta_c_used == pytest.approx(0.1 + 0.1 * D)
    assert noisy.query([0.0, 0.0], 1e-3).delta_c_used == pytest.approx(1e-3)


def test_noise_wrapper_is_deterministic():
    exact = half_square(FeasibleSet.box(-1.0, 1.0, dim=2))
    a = NoiseWrappedOracle(exact, (0.1, 0.1), (0.1, 0.1), seed=5).query([0.2, 0.3], 0.05)
    b = NoiseWrappedOracle(exact, (0.1, 0.1), (0.1, 0.1), seed=5).query([0.2, 0.3], 0.05)
    assert a.f_approx == b.f_approx and np.array_equal(a.g_approx, b.g_approx)


def test_noise_wrapper_value_spread_at_one_point():
    exact = half_square(FeasibleSet.box(-1.0, 1.0, dim=2))
    rng = np.random.default_rng(8)
    for seed in range(50):
        noisy = NoiseWrappedOracle(exact, (0.05, 0.02), (0.0, 0.0), seed=seed)
        x = rng.uniform(-1, 1, 2)
        a, b = noisy.query(x, 1.0), noisy.query(x, 1.0)
        assert abs(a.f_approx - b.f_approx) <= 2 * (0.05 + 0.02)
        assert abs(a.f_approx - exact.f_true(x)) <= 0.05 + 0.02


def test_noise_wrapper_needs_bounded_set():
    with pytest.raises(CapabilityError):
        NoiseWrappedOracle(half_square(FeasibleSet.whole(2)), (0.1, 0), (0, 0))


# --- inner-max oracle ---------------------------------------------------------


def identity_inner(G=None):
    ball = FeasibleSet.ball(np.zeros(2), 1.0)
    G = G or QuadraticG(1.0)
    return InnerMaxProblem(np.eye(2), G, ball,
                           exact_maximizer=lambda x: G.argmax_on_ball(x, 1.0))


def test_inner_max_identity_closed_form():
    oracle = InnerMaxOracle(identity_inner(), FeasibleSet.box(-0.6, 0.6, dim=2))
    x = np.array([0.3, -0.4])
    ans = oracle.query(x, 1e-10)
    assert ans.f_approx == pytest.approx(0.5 * x @ x, abs=1e-9)
    assert np.allclose(ans.g_approx, x, atol=1e-4)
    assert oracle.f_true(x) == pytest.approx(0.125)


def test_inner_max_gradient_converges():
    oracle = InnerMaxOracle(identity_inner(QuarticG(1.0)), FeasibleSet.box(-1, 1, dim=2))
    x = np.array([0.5, 0.2])
    errs = [np.linalg.norm(oracle.query(x, d).g_approx - oracle.grad_true(x))
            for d in (1e-2, 1e-5, 1e-8)]
    assert errs[-1] < 1e-3
    assert errs[-1] <= errs[0]


def test_inner_solver_stall_reports_accuracy():
    problem = identity_inner()
    problem.max_inner_iters = 1
    oracle = InnerMaxOracle(problem, FeasibleSet.box(-1, 1, dim=2))
    with pytest.raises(OracleError) as info:
        oracle.query([0.9, 0.9], 1e-12)
    assert info.value.achieved > 1e-12


# --- contract check ----------------------------------------------------------


def test_contract_exact_smooth():
    rep = oracle_contract_check(half_square(FeasibleSet.whole(3)), trials=300)
    assert rep.passed and rep.worst_slack >= 0


def test_contract_holder_three_halves():
    # f(x) = 2/3 |x|^(3/2) has gradient constant 2^(1/2) for nu = 1/2
    f = lambda x: 2.0 / 3.0 * float(np.sum(np.abs(x) ** 1.5))
    g = lambda x: np.sign(x) * np.sqrt(np.abs(x))
    oracle = HolderOracle(f, g, FeasibleSet.box(-4.0, 4.0, dim=1), HolderParams(0.5, math.sqrt(2)))
    assert oracle_contract_check(oracle, trials=1000).passed
    mpmath.mp.dps = 30
    x, y, d = mpmath.mpf("0.25"), mpmath.mpf("-0.25"), mpmath.mpf("1e-3")
    fx = 2 * abs(x) ** mpmath.mpf(1.5) / 3
    fy = 2 * abs(y) ** mpmath.mpf(1.5) / 3
    gx = mpmath.sqrt(x)
    L = oracle.L_of_delta(float(d))
    assert fy - (fx + gx * (y - x)) <= L / 2 * (y - x) ** 2 + d


def test_contract_adversarial_fails():
    bad = ShiftedValueOracle(half_square(FeasibleSet.box(-1.0, 1.0, dim=2)))
    rep = oracle_contract_check(bad, trials=200)
    assert not rep.passed and rep.failures == 200


def test_contract_needs_ground_truth():
    problem = identity_inner()
    problem.exact_maximizer = None
    with pytest.raises(CapabilityError):
        oracle_contract_check(InnerMaxOracle(problem, FeasibleSet.box(-1, 1, dim=2)))
