"""Adaptive gradient method for composite problems with an inexact oracle,
plus verifiers for its rate and complexity guarantees.

Each outer iteration starts from the running estimate ``L_k``, doubles the
trial constant ``M`` until the inexact descent inequality holds, and then
halves the accepted constant for the next iteration.  The controlled
oracle and prox accuracies follow the trial constant, ``eps / (20 M)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CapabilityError
from .spaces import EUCLIDEAN, as_point, inject_prox_noise, min_linear_plus_h, prox_step

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "RunReport",
    "BoundCheck",
    "BoundParams",
    "descent_check",
    "solve",
    "theorem1_bound",
    "inner_check_bound",
    "mk_ceiling",
    "corollary_bounds",
    "verify_trace",
    "stationarity_residual",
]

ARITH_SLACK = 1e-9


@dataclass
class SolverConfig:
    epsilon: float
    x0: np.ndarray
    L0: float = 1.0
    delta_u: float = 0.0
    delta_pu: float = 0.0
    max_outer_iterations: int = 1000
    max_inner_doublings: int = 60
    seed: int = 0

    def validate(self, fset):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.L0 > 0:
            raise ValueError("L0 must be positive")
        if self.delta_u < 0 or self.delta_pu < 0:
            raise ValueError("uncontrolled errors must be non-negative")
        if self.max_outer_iterations < 1 or self.max_inner_doublings < 1:
            raise ValueError("iteration caps must be at least 1")
        x0 = as_point(self.x0, fset.dim, "x0")
        if not fset.contains(x0, tol=1e-9):
            raise ValueError("x0 must lie in the feasible set")
        return x0


@dataclass(frozen=True, eq=False)
class IterationRecord:
    k: int
    M_k: float
    i_k: int
    delta_c_k: float
    f_tilde_at_x: float
    f_tilde_at_w: float
    gmap: np.ndarray
    gmap_norm: float
    oracle_calls_cumulative: int
    prox_calls_cumulative: int
    prox_error: float = 0.0
    psi_at_x: float = None
    psi_at_w: float = None


@dataclass(eq=False)
class RunReport:
    trace: list
    K: int
    x_out: np.ndarray
    best_gmap_norm: float
    stop_reason: str
    oracle_calls: int
    prox_calls: int
    inner_checks: int
    config: SolverConfig = None
    iterates: list = field(default_factory=list, repr=False)
    psi_x0: float = None

    @property
    def N(self):
        return len(self.trace)


class _BlindOracle:
    """Exposes only ``query`` so the solver cannot read declared constants."""

    __slots__ = ("_query",)

    def __init__(self, oracle):
        self._query = oracle.query

    def query(self, x, delta_c):
        return self._query(x, delta_c)


def descent_check(f_w, f_x, g_x, w, x, M, epsilon, delta_u, norm=EUCLIDEAN.norm):
    """Inexact descent inequality accepting the trial constant ``M``."""
    step = np.asarray(w, dtype=float) - np.asarray(x, dtype=float)
    r = norm(step)
    rhs = f_x + float(np.dot(g_x, step)) + 0.5 * M * r * r + epsilon / (10.0 * M) + 2.0 * delta_u
    return bool(f_w <= rhs)


def solve(problem, setup, config):
    """Run the adaptive method on ``problem`` (oracle, h, feasible set).

    Returns a :class:`RunReport`; caps never raise, they set
    ``stop_reason`` to ``"iteration-cap"`` or ``"inner-cap"``.
    """
    fset, h = problem.fset, problem.h
    x = config.validate(fset)
    oracle = _BlindOracle(problem.oracle)
    psi = getattr(problem, "psi", None) if getattr(problem, "has_ground_truth", False) else None
    eps, delta_u, delta_pu = config.epsilon, config.delta_u, config.delta_pu

    trace, iterates = [], [x]
    L = float(config.L0)
    oracle_calls = prox_calls = checks = 0
    best, K = math.inf, None
    stop_reason = "iteration-cap"

    for k in range(config.max_outer_iterations):
        M = L / 2.0
        accepted = None
        for i in range(1, config.max_inner_doublings + 1):
            M *= 2.0
            delta_c = eps / (20.0 * M)
            ans_x = oracle.query(x, delta_c)
            res = prox_step(setup, fset, h, x, ans_x.g_approx, 1.0 / M, delta_c)
            if delta_pu > 0:
                res = inject_prox_noise(res, delta_pu, seed=[config.seed, k, i])
            w = res.point
            ans_w = oracle.query(w, delta_c)
            oracle_calls += 2
            prox_calls += 1
            checks += 1
            if descent_check(ans_w.f_approx, ans_x.f_approx, ans_x.g_approx, w, x, M,
                             eps, delta_u, setup.norm):
                accepted = (i, delta_c, ans_x, ans_w, res)
                break
        if accepted is None:
            stop_reason = "inner-cap"
            break
        i, delta_c, ans_x, ans_w, res = accepted
        w = res.point
        gmap = M * (x - w)
        gnorm = setup.norm(gmap)
        trace.append(IterationRecord(
            k=k, M_k=M, i_k=i, delta_c_k=delta_c,
            f_tilde_at_x=ans_x.f_approx, f_tilde_at_w=ans_w.f_approx,
            gmap=gmap, gmap_norm=gnorm,
            oracle_calls_cumulative=oracle_calls, prox_calls_cumulative=prox_calls,
            prox_error=res.certified_error,
            psi_at_x=None if psi is None else psi(x),
            psi_at_w=None if psi is None else psi(w)))
        if gnorm < best:
            best, K = gnorm, k
        x = w
        iterates.append(x)
        L = M / 2.0
        if best <= eps:
            stop_reason = "criterion-met"
            break

    x_out = iterates[K + 1] if K is not None else iterates[-1]
    return RunReport(trace=trace, K=K, x_out=x_out, best_gmap_norm=best,
                     stop_reason=stop_reason, oracle_calls=oracle_calls,
                     prox_calls=prox_calls, inner_checks=checks, config=config,
                     iterates=iterates,
                     psi_x0=None if psi is None else psi(iterates[0]))


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class BoundCheck:
    name: str
    bound_value: float
    observed: float
    passed: bool

    def as_dict(self):
        return {"bound_value": float(self.bound_value), "observed": float(self.observed),
                "pass": bool(self.passed)}


@dataclass
class BoundParams:
    """Run constants the verifiers need besides the trace itself."""

    psi_x0: float
    psi_star: float
    epsilon: float
    L0: float
    delta_u: float = 0.0
    delta_pu: float = 0.0
    lipschitz: float = None
    nu: float = None
    l_nu: float = None


def _observed_min_sq(trace, N):
    return min(r.gmap_norm for r in trace[:N]) ** 2


def theorem1_bound(trace, psi_x0, psi_star, epsilon, delta_u=0.0, delta_pu=0.0, N=None):
    """Right side of the rate bound on ``min ||M_k (x_k - x_{k+1})||^2``."""
    if not trace:
        raise ValueError("empty trace")
    N = len(trace) if N is None else N
    if not 1 <= N <= len(trace):
        raise ValueError("N must be between 1 and the trace length")
    weight = sum(1.0 / (2.0 * r.M_k) for r in trace[:N])
    return (psi_x0 - psi_star + N * (4.0 * delta_u + delta_pu)) / weight + epsilon / 2.0


def inner_check_bound(N, M_last, L0):
    """Cap on the total number of descent checks after ``N`` iterations."""
    return 2 * N - 1 + math.log2(M_last / L0)


def mk_ceiling(nu, l_nu, epsilon):
    """Largest trial constant the method can accept for a Hölder oracle."""
    a = (1.0 - nu) / (2.0 * nu)
    return (2.0 ** ((1.0 + nu) / (2.0 * nu))
            * ((1.0 - nu) / (1.0 + nu) * 40.0 / epsilon) ** a
            * l_nu ** (1.0 / nu))


def _holder_L(nu, l_nu, delta):
    e = (1.0 - nu) / (1.0 + nu)
    return (e * 2.0 / delta) ** e * l_nu ** (2.0 / (1.0 + nu))


def corollary_bounds(trace, params):
    """Rate, check-count and M_k ceiling bounds for a constant-``L`` or Hölder oracle.

    Returns a list of :class:`BoundCheck`.  Raises :class:`CapabilityError`
    when ``params`` declares neither form.
    """
    if params.lipschitz is None and params.nu is None:
        raise CapabilityError("oracle declares neither a constant L nor Hölder parameters")
    if not trace:
        raise ValueError("empty trace")
    N = len(trace)
    obs = _observed_min_sq(trace, N)
    checks = sum(r.i_k for r in trace)
    gap = params.psi_x0 - params.psi_star
    floor = 4.0 * params.delta_u + params.delta_pu
    eps = params.epsilon
    out = []
    L0 = params.L0
    top = max(r.M_k for r in trace)
    # the printed constants assume L0 <= 2L; a larger first guess is
    # accepted as is, so every ceiling below is max(ceiling, L0)
    if params.lipschitz is not None:
        cap = max(2.0 * params.lipschitz, L0)
        rate = 2.0 * cap * (gap / N + floor) + eps / 2.0
        out.append(BoundCheck("corollary-1", rate, obs, obs <= rate + ARITH_SLACK))
        cb = 2 * N - 1 + math.log2(cap / L0)
        out.append(BoundCheck("corollary-1-checks", cb, checks, checks <= cb + 1e-12))
        out.append(BoundCheck("corollary-1-mk", cap, top, top <= cap))
    if params.nu is not None:
        nu, l_nu = params.nu, params.l_nu
        if not 0 < nu <= 1:
            raise CapabilityError("Hölder corollary needs nu in (0, 1]")
        cap = max(mk_ceiling(nu, l_nu, eps), L0)
        rate = 2.0 * cap * (gap / N + floor) + eps / 2.0
        out.append(BoundCheck("corollary-2", rate, obs, obs <= rate + ARITH_SLACK))
        cb = 2 * N - 1 + math.log2(cap / L0)
        out.append(BoundCheck("corollary-2-checks", cb, checks, checks <= cb + 1e-12))
        out.append(BoundCheck("corollary-2-mk-ceiling", cap, top, top <= cap * (1 + 1e-12)))
        # a constant accepted after a doubling is below 2 L(delta_c); one
        # accepted at the first trial equals the running estimate L_k
        ratio, L_k = 0.0, L0
        for r in trace:
            local = max(2.0 * _holder_L(nu, l_nu, r.delta_c_k), L_k)
            ratio = max(ratio, r.M_k / local)
            L_k = r.M_k / 2.0
        out.append(BoundCheck("corollary-2-mk-local", 1.0, ratio, ratio <= 1.0 + 1e-12))
    return out


def verify_trace(trace, params):
    """All bounds that apply to a finished trace, recomputed from it alone."""
    if not trace:
        raise ValueError("empty trace")
    N = len(trace)
    obs = _observed_min_sq(trace, N)
    t1 = theorem1_bound(trace, params.psi_x0, params.psi_star, params.epsilon,
                        params.delta_u, params.delta_pu, N)
    out = [BoundCheck("theorem-1", t1, obs, obs <= t1 + ARITH_SLACK)]
    checks = sum(r.i_k for r in trace)
    icb = inner_check_bound(N, trace[-1].M_k, params.L0)
    out.append(BoundCheck("inner-check-count", icb, checks, checks <= icb + 1e-12))
    # each accepted constant must sit exactly i_k - 1 doublings above L_k
    worst = 0.0
    L = params.L0
    for r in trace:
        worst = max(worst, abs(r.i_k - 1 - math.log2(r.M_k / L)))
        L = r.M_k / 2.0
    out.append(BoundCheck("doubling-bookkeeping", 0.0, worst, worst <= 1e-9))
    if params.lipschitz is not None or params.nu is not None:
        out.extend(corollary_bounds(trace, params))
    return out


def stationarity_residual(x, grad, fset, h):
    """``min_{u in X} <grad, u - x> + h(u) - h(x)``; zero at a stationary
    point, negative values measure the violation."""
    x = as_point(x, fset.dim, "x")
    grad = as_point(grad, fset.dim, "grad")
    return min_linear_plus_h(fset, h, grad) - float(grad @ x) - h(x)
