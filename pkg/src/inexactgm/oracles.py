"""Inexact first-order oracles.

An oracle answers a query ``(x, delta_c)`` with an approximate value
``f~`` and vector ``g~`` such that, with ``L = L(delta_c)``,

    |f(x) - f~|                                   <= delta_c + delta_u
    f(y) <= f~ + <g~, y - x> + L/2 ||y - x||^2 + delta_c + delta_u

for every ``y`` in the feasible set.  ``delta_c`` can be requested as small
as desired; ``delta_u`` is a fixed floor owned by the oracle.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import CapabilityError, DomainError, OracleError
from .spaces import EUCLIDEAN, as_point

__all__ = [
    "OracleAnswer",
    "HolderParams",
    "holder_L_of_delta",
    "holder_params_from_inner_max",
    "operator_norm",
    "Oracle",
    "SmoothOracle",
    "HolderOracle",
    "NoiseWrappedOracle",
    "make_noise_wrapped_oracle",
    "QuadraticG",
    "QuarticG",
    "InnerMaxProblem",
    "InnerMaxOracle",
    "make_inner_max_oracle",
    "SumOracle",
    "ContractReport",
    "oracle_contract_check",
]


@dataclass(frozen=True, eq=False)
class OracleAnswer:
    f_approx: float
    g_approx: np.ndarray
    delta_c_used: float
    delta_u_bound: float


@dataclass(frozen=True)
class HolderParams:
    """Exponent ``nu`` and constant ``l_nu`` of a Hölder-continuous gradient."""

    nu: float
    l_nu: float

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"Hölder exponent must lie in [0, 1], got {self.nu}")
        if self.l_nu < 0:
            raise ValueError("Hölder constant must be non-negative")


def holder_L_of_delta(p, delta):
    """Quadratic constant that trades the Hölder remainder for an additive
    ``delta``::

        L(delta) = ((1-nu)/(1+nu) * 2/delta) ** ((1-nu)/(1+nu)) * l_nu ** (2/(1+nu))
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    nu = p.nu
    expo = (1.0 - nu) / (1.0 + nu)
    return (expo * 2.0 / delta) ** expo * p.l_nu ** (2.0 / (1.0 + nu))


def holder_params_from_inner_max(rho, sigma_rho, a_norm):
    """Hölder parameters of ``f(x) = max_u -G(u) + <Au, x>`` for ``G``
    uniformly convex of degree ``rho`` with parameter ``sigma_rho``."""
    if not rho >= 2:
        raise ValueError("degree of uniform convexity must be >= 2")
    if not sigma_rho > 0:
        raise ValueError("sigma_rho must be positive")
    if a_norm < 0:
        raise ValueError("operator norm must be non-negative")
    nu = 1.0 / (rho - 1.0)
    l_nu = a_norm ** (rho / (rho - 1.0)) / sigma_rho ** (1.0 / (rho - 1.0))
    return HolderParams(nu, l_nu)


def operator_norm(A, rtol=1e-10, max_iter=100_000):
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v = np.random.default_rng(0).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = math.sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= rtol * new:
            return new
        sigma = new
    return sigma


class Oracle:
    """Base class.  Subclasses implement ``_answer`` and ``L_of_delta``.

    ``lipschitz`` / ``holder`` declare the form of ``L(delta_c)`` when it is
    known: a constant, or the Hölder formula of :func:`holder_L_of_delta`.
    ``f_true`` / ``grad_true`` are exact evaluators when available.
    """

    delta_u = 0.0
    lipschitz = None
    holder = None
    f_true = None
    grad_true = None

    def __init__(self, fset):
        self.fset = fset

    @property
    def dim(self):
        return self.fset.dim

    def query(self, x, delta_c):
        if not delta_c > 0:
            raise ValueError("delta_c must be positive")
        x = as_point(x, self.dim, "x")
        if not self.fset.contains(x, tol=1e-9):
            raise DomainError("oracle queried outside the feasible set")
        return self._answer(x, float(delta_c))

    def _answer(self, x, delta_c):
        raise NotImplementedError

    def L_of_delta(self, delta_c):
        raise NotImplementedError


class SmoothOracle(Oracle):
    """Exact values and gradients of an ``L``-smooth function."""

    def __init__(self, f, grad, fset, L):
        super().__init__(fset)
        if not L > 0:
            raise ValueError("L must be positive")
        self.f_true = f
        self.grad_true = grad
        self.lipschitz = float(L)

    def _answer(self, x, delta_c):
        return OracleAnswer(float(self.f_true(x)), np.asarray(self.grad_true(x), dtype=float),
                            delta_c, self.delta_u)

    def L_of_delta(self, delta_c):
        return self.lipschitz


class HolderOracle(Oracle):
    """Exact values and gradients of a function with Hölder gradient; the
    controlled error is spent on the quadratic model only."""

    def __init__(self, f, grad, fset, holder):
        super().__init__(fset)
        self.f_true = f
        self.grad_true = grad
        self.holder = holder
        if holder.nu == 1.0:
            self.lipschitz = holder.l_nu

    def _answer(self, x, delta_c):
        return OracleAnswer(float(self.f_true(x)), np.asarray(self.grad_true(x), dtype=float),
                            delta_c, self.delta_u)

    def L_of_delta(self, delta_c):
        return holder_L_of_delta(self.holder, delta_c)


def _query_rng(seed, x, delta_c):
    digest = hashlib.blake2b(x.tobytes() + struct.pack("<d", delta_c), digest_size=8).digest()
    return np.random.default_rng([int(seed), int.from_bytes(digest, "little")])


def _unit_dual(rng, n, norm_kind):
    if norm_kind == "l1":
        # dual of l1 is l-infinity
        v = rng.uniform(-1.0, 1.0, n)
        return v / np.max(np.abs(v))
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


class NoiseWrappedOracle(Oracle):
    """Bounded noise on the values and gradients of an exact smooth oracle.

    Value noise is at most ``c1 + u1`` and gradient noise at most
    ``c2 + u2`` in the dual norm, so that the wrapper is an inexact oracle
    with ``delta_c = c1 + c2 D`` and ``delta_u = u1 + u2 D`` over a set of
    diameter ``D``.  Controlled budgets are caps: a query asking for a
    smaller ``delta_c`` scales both down proportionally.  Noise is a
    deterministic function of ``(seed, x, delta_c)``; the uncontrolled
    gradient part always has dual norm exactly ``u2``.
    """

    def __init__(self, exact, value_budgets, grad_budgets, diameter=None, seed=0,
                 setup=EUCLIDEAN):
        super().__init__(exact.fset)
        if exact.lipschitz is None or exact.delta_u != 0:
            raise CapabilityError("noise wrapper needs an exact oracle with constant L")
        if not exact.fset.bounded:
            raise CapabilityError("noise wrapper needs a bounded feasible set")
        if diameter is None:
            diameter = exact.fset.diameter(setup.norm_kind)
        if not np.isfinite(diameter):
            raise CapabilityError("noise wrapper needs a finite diameter")
        self.c1, self.u1 = (float(b) for b in value_budgets)
        self.c2, self.u2 = (float(b) for b in grad_budgets)
        if min(self.c1, self.u1, self.c2, self.u2) < 0:
            raise ValueError("noise budgets must be non-negative")
        self.exact = exact
        self.diameter = float(diameter)
        self.seed = int(seed)
        self.setup = setup
        self.lipschitz = exact.lipschitz
        self.f_true = exact.f_true
        self.grad_true = exact.grad_true
        self.delta_u = self.u1 + self.u2 * self.diameter

    def controlled_budgets(self, delta_c):
        cap = self.c1 + self.c2 * self.diameter
        scale = 1.0 if cap <= delta_c else delta_c / cap
        return self.c1 * scale, self.c2 * scale

    def _answer(self, x, delta_c):
        base = self.exact.query(x, delta_c)
        c1, c2 = self.controlled_budgets(delta_c)
        rng = _query_rng(self.seed, x, delta_c)
        a, b, r = rng.uniform(-1.0, 1.0, 3)
        f = base.f_approx + a * c1 + b * self.u1
        kind = self.setup.norm_kind
        g = (base.g_approx
             + (0.5 * (r + 1.0) * c2) * _unit_dual(rng, self.dim, kind)
             + self.u2 * _unit_dual(rng, self.dim, kind))
        return OracleAnswer(f, g, c1 + c2 * self.diameter, self.delta_u)

    def L_of_delta(self, delta_c):
        return self.lipschitz


def make_noise_wrapped_oracle(exact, value_budgets, grad_budgets, diameter=None, seed=0,
                              setup=EUCLIDEAN):
    return NoiseWrappedOracle(exact, value_budgets, grad_budgets, diameter, seed, setup)


# ---------------------------------------------------------------------------
# functions defined by a maximization subproblem


class QuadraticG:
    """``G(u) = sigma/2 ||u||^2``: uniformly convex of degree 2."""

    rho = 2.0

    def __init__(self, sigma=1.0):
        self.sigma = float(sigma)
        self.sigma_rho = self.sigma

    def __call__(self, u):
        return 0.5 * self.sigma * float(u @ u)

    def grad(self, u):
        return self.sigma * u

    def argmax_on_ball(self, c, radius):
        """Maximizer of ``<c, u> - G(u)`` over the origin ball."""
        u = c / self.sigma
        nu = np.linalg.norm(u)
        return u if nu <= radius else u * (radius / nu)


class QuarticG:
    """``G(u) = s/4 ||u||^4``: uniformly convex of degree 4 with
    ``sigma_4 = s/4``."""

    rho = 4.0

    def __init__(self, s=1.0):
        self.s = float(s)
        self.sigma_rho = self.s / 4.0

    def __call__(self, u):
        n2 = float(u @ u)
        return 0.25 * self.s * n2 * n2

    def grad(self, u):
        return self.s * float(u @ u) * u

    def argmax_on_ball(self, c, radius):
        nc = np.linalg.norm(c)
        if nc == 0.0:
            return np.zeros_like(c)
        t = min(np.cbrt(nc / self.s), radius)
        return c * (t / nc)


@dataclass(eq=False)
class InnerMaxProblem:
    """``f(x) = max_{u in U} -G(u) + <A u, x>`` with ``A`` of shape
    ``(dim x, dim u)``."""

    A: np.ndarray
    G: object
    U: object
    max_inner_iters: int = 20_000
    exact_maximizer: object = field(default=None, repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.shape[1] != self.U.dim:
            raise ValueError("A must map the inner space onto the outer dual")

    @cached_property
    def a_norm(self):
        return operator_norm(self.A)

    @property
    def holder(self):
        return holder_params_from_inner_max(self.G.rho, self.G.sigma_rho, self.a_norm)

    def psi(self, x, u):
        return -self.G(u) + float((self.A @ u) @ x)

    def solve_inner(self, x, delta):
        """Projected gradient ascent with an adaptive step, stopped once the
        Frank-Wolfe gap certifies ``f(x) - Psi(x, u) <= delta``."""
        c = self.A.T @ x
        U = self.U
        u = U.project(np.zeros(U.dim))
        step = 1.0
        val = -self.G(u) + c @ u
        gap = np.inf
        for _ in range(self.max_inner_iters):
            grad = c - self.G.grad(u)
            gap = -U.linear_min(-grad)[0] - grad @ u
            if gap <= delta:
                return u
            while True:
                cand = U.project(u + step * grad)
                diff = cand - u
                cval = -self.G(cand) + c @ cand
                if cval >= val + grad @ diff - (diff @ diff) / (2.0 * step):
                    break
                step *= 0.5
            u, val = cand, cval
            step *= 2.0
        raise OracleError(f"inner solver stalled at gap {gap:.3e} > {delta:.3e}", achieved=gap)


class InnerMaxOracle(Oracle):
    """Oracle ``(Psi(x, u_x), A u_x)`` with ``u_x`` a ``delta_c/4``-accurate
    inner maximizer.

    The quadratic constant is ``2 L_H(delta_c / 4)`` where ``L_H`` is the
    Hölder formula for the parameters of the maximum function; ``holder``
    declares the equivalent Hölder constant ``2**((3-nu)/2) l_nu`` of that
    composite expression.
    """

    def __init__(self, problem, fset):
        super().__init__(fset)
        if problem.A.shape[0] != fset.dim:
            raise ValueError("A has the wrong number of rows for the feasible set")
        self.problem = problem
        self.function_holder = problem.holder
        nu, l_nu = self.function_holder.nu, self.function_holder.l_nu
        self.holder = HolderParams(nu, 2.0 ** ((3.0 - nu) / 2.0) * l_nu)
        if nu == 1.0:
            self.lipschitz = 2.0 * l_nu
        if problem.exact_maximizer is not None:
            self.f_true = self._f_exact
            self.grad_true = self._grad_exact

    def _f_exact(self, x):
        return self.problem.psi(x, self.problem.exact_maximizer(x))

    def _grad_exact(self, x):
        return self.problem.A @ self.problem.exact_maximizer(x)

    def _answer(self, x, delta_c):
        delta = delta_c / 4.0
        u = self.problem.solve_inner(x, delta)
        return OracleAnswer(self.problem.psi(x, u), self.problem.A @ u, 4.0 * delta, 0.0)

    def L_of_delta(self, delta_c):
        return 2.0 * holder_L_of_delta(self.function_holder, delta_c / 4.0)


def make_inner_max_oracle(problem, fset):
    return InnerMaxOracle(problem, fset)


class SumOracle(Oracle):
    """Oracle for a sum of functions; each part gets an equal share of the
    controlled budget and the quadratic constants add up."""

    def __init__(self, parts):
        parts = list(parts)
        super().__init__(parts[0].fset)
        self.parts = parts
        self.delta_u = sum(p.delta_u for p in parts)
        if all(p.lipschitz is not None for p in parts):
            self.lipschitz = sum(p.lipschitz for p in parts)
        if all(p.f_true is not None for p in parts):
            self.f_true = lambda x: sum(p.f_true(x) for p in parts)
            self.grad_true = lambda x: sum(np.asarray(p.grad_true(x), dtype=float) for p in parts)

    def _answer(self, x, delta_c):
        share = delta_c / len(self.parts)
        answers = [p.query(x, share) for p in self.parts]
        return OracleAnswer(sum(a.f_approx for a in answers),
                            sum(a.g_approx for a in answers),
                            sum(a.delta_c_used for a in answers),
                            sum(a.delta_u_bound for a in answers))

    def L_of_delta(self, delta_c):
        share = delta_c / len(self.parts)
        return sum(p.L_of_delta(share) for p in self.parts)


# ---------------------------------------------------------------------------
# statistical verification


@dataclass
class ContractReport:
    passed: bool
    worst_slack: float
    trials: int
    failures: int
    worst_case: dict = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: {self.trials} trials, {self.failures} failures, "
                f"worst slack {self.worst_slack:.3e}")


def oracle_contract_check(oracle, fset=None, L_of_delta=None, trials=1000, seed=0,
                          f_true=None, setup=EUCLIDEAN, delta_range=(1e-6, 1.0),
                          tol=1e-9, radius=10.0):
    """Sample ``(x, y, delta_c)`` and test both oracle inequalities.

    ``y`` is drawn as ``x + s (z - x)`` with ``z`` uniform in the set and
    ``s`` log-uniform in ``[1e-4, 1]`` so that short and long steps are both
    exercised.  Slack is measured after adding the budgets the answer
    declares; a trial fails when slack drops below ``-tol``.
    """
    fset = oracle.fset if fset is None else fset
    L_of_delta = oracle.L_of_delta if L_of_delta is None else L_of_delta
    f_true = oracle.f_true if f_true is None else f_true
    if f_true is None:
        raise CapabilityError("contract check needs a ground-truth evaluator")
    rng = np.random.default_rng(seed)
    lo, hi = np.log(delta_range[0]), np.log(delta_range[1])
    worst = np.inf
    worst_case = {}
    failures = 0
    for _ in range(trials):
        x = fset.sample(rng, radius=radius)
        z = fset.sample(rng, around=x, radius=radius)
        s = np.exp(rng.uniform(np.log(1e-4), 0.0))
        y = x + s * (z - x)
        delta_c = float(np.exp(rng.uniform(lo, hi)))
        ans = oracle.query(x, delta_c)
        budget = ans.delta_c_used + ans.delta_u_bound
        value_slack = budget - abs(f_true(x) - ans.f_approx)
        dist = setup.norm(y - x)
        model = (ans.f_approx + float(ans.g_approx @ (y - x))
                 + 0.5 * L_of_delta(delta_c) * dist * dist + budget)
        upper_slack = model - f_true(y)
        slack = min(value_slack, upper_slack)
        if slack < -tol:
            failures += 1
        if slack < worst:
            worst = slack
            worst_case = {"x": x.tolist(), "y": y.tolist(), "delta_c": delta_c,
                          "value_slack": value_slack, "upper_slack": upper_slack}
    return ContractReport(failures == 0, float(worst), trials, failures, worst_case)
