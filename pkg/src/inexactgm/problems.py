"""Catalog of composite test problems with known ground truth.

Every instance is non-convex in ``f`` (a midpoint-convexity violation is
stored with it), carries a valid lower bound ``psi_star`` derived by hand,
and names the prox setup it is meant to be solved with.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CapabilityError
from .oracles import (HolderOracle, HolderParams, InnerMaxOracle, InnerMaxProblem,
                      NoiseWrappedOracle, QuadraticG, QuarticG, SmoothOracle, SumOracle,
                      operator_norm)
from .solver import BoundParams
from .spaces import FeasibleSet, SimpleConvexPart, get_setup

__all__ = ["CompositeProblem", "PROBLEM_NAMES", "build_problem", "catalog", "find_witness"]


@dataclass(eq=False)
class CompositeProblem:
    """``min_{x in X} f(x) + h(x)`` with ``f`` behind an inexact oracle."""

    name: str
    oracle: object
    h: SimpleConvexPart
    fset: FeasibleSet
    setup_name: str
    x0: np.ndarray
    psi_star: float
    description: str = ""
    lipschitz_f: float = None
    witness: tuple = field(default=None, repr=False)

    @property
    def setup(self):
        return get_setup(self.setup_name)

    @property
    def has_ground_truth(self):
        return self.oracle.f_true is not None

    def f(self, x):
        return float(self.oracle.f_true(x))

    def grad(self, x):
        return np.asarray(self.oracle.grad_true(x), dtype=float)

    def psi(self, x):
        return self.f(x) + self.h(x)

    @property
    def delta_u(self):
        return self.oracle.delta_u

    @property
    def prox_smoothness(self):
        """Lipschitz constant of ``d'`` (``None`` if ``d'`` is unbounded)."""
        return 1.0 if self.setup_name == "euclidean" else None

    @property
    def diameter(self):
        return self.fset.diameter(self.setup.norm_kind)

    def bound_params(self, config, psi_x0=None):
        if psi_x0 is None:
            psi_x0 = self.psi(config.x0)
        holder = self.oracle.holder
        return BoundParams(
            psi_x0=psi_x0, psi_star=self.psi_star, epsilon=config.epsilon, L0=config.L0,
            delta_u=config.delta_u, delta_pu=config.delta_pu,
            lipschitz=self.oracle.lipschitz,
            nu=None if holder is None else holder.nu,
            l_nu=None if holder is None else holder.l_nu)


def find_witness(f, sample, seed=0, tries=20_000):
    """Seeded search for ``(a, b)`` with ``f((a+b)/2) > (f(a)+f(b))/2``."""
    rng = np.random.default_rng(seed)
    for _ in range(tries):
        a, b = sample(rng), sample(rng)
        if f(0.5 * (a + b)) > 0.5 * (f(a) + f(b)) + 1e-6:
            return a, b
    raise RuntimeError("no midpoint-convexity violation found")


# ---------------------------------------------------------------------------
# smooth non-convex: 1/2 ||x||^2 + sum cos(2 x_i)

QUAD_COS_DIM = 10
QUAD_COS_BOUND = 2.0
QUAD_COS_FREQ = 2.0


def _quad_cos_f(x):
    return 0.5 * float(x @ x) + float(np.sum(np.cos(QUAD_COS_FREQ * x)))


def _quad_cos_grad(x):
    return x - QUAD_COS_FREQ * np.sin(QUAD_COS_FREQ * x)


def _quad_cos_exact(n=QUAD_COS_DIM):
    fset = FeasibleSet.box(-QUAD_COS_BOUND, QUAD_COS_BOUND, dim=n)
    # second derivative 1 - 4 cos(2t) lies in [-3, 5]
    return SmoothOracle(_quad_cos_f, _quad_cos_grad, fset, L=1.0 + QUAD_COS_FREQ ** 2)


def _quad_cos(delta_u=0.0, seed=0):
    oracle = _quad_cos_exact()
    return _quad_cos_problem("quad-cos", oracle, "exact oracle")


def _quad_cos_noisy(delta_u=0.0, seed=0):
    exact = _quad_cos_exact()
    D = exact.fset.diameter("l2")
    oracle = NoiseWrappedOracle(exact, value_budgets=(1e-3, 0.5 * delta_u),
                                grad_budgets=(1e-4, 0.5 * delta_u / D), diameter=D, seed=seed)
    return _quad_cos_problem("quad-cos-noisy", oracle, "bounded-noise oracle")


def _quad_cos_problem(name, oracle, what):
    n = oracle.dim
    a = np.zeros(n)
    a[0] = 0.3
    return CompositeProblem(
        name=name, oracle=oracle, h=SimpleConvexPart.zero(), fset=oracle.fset,
        setup_name="euclidean", x0=np.linspace(-1.5, 1.5, n),
        psi_star=-float(n),
        description=f"1/2||x||^2 + sum cos(2x_i) on [-2,2]^{n}, {what}",
        lipschitz_f=oracle.lipschitz, witness=(-a, a))


# ---------------------------------------------------------------------------
# Hölder family: a/(1+nu) sum |x_i|^(1+nu) - c ||x||^2 on a box

HOLDER_DIM = 2
HOLDER_BOUND = 3.0
HOLDER_SCALE = 1.0
HOLDER_NUS = {"13": 1.0 / 3.0, "12": 0.5, "1": 1.0}
HOLDER_CONCAVITY = {"13": 0.25, "12": 0.25, "1": 0.75}


def holder_family_constant(nu, a, c, n, diameter):
    """Valid Hölder constant (euclidean norms) of the gradient
    ``a sign(x)|x|^nu - 2 c x`` on a set of the given diameter."""
    if nu == 1.0:
        return abs(a - 2.0 * c)
    return (2.0 ** (1.0 - nu) * n ** ((1.0 - nu) / 2.0) * a
            + 2.0 * c * diameter ** (1.0 - nu))


def _holder(tag):
    nu, c, a = HOLDER_NUS[tag], HOLDER_CONCAVITY[tag], HOLDER_SCALE
    n, B = HOLDER_DIM, HOLDER_BOUND
    fset = FeasibleSet.box(-B, B, dim=n)

    def f(x):
        return a / (1.0 + nu) * float(np.sum(np.abs(x) ** (1.0 + nu))) - c * float(x @ x)

    def grad(x):
        return a * np.sign(x) * np.abs(x) ** nu - 2.0 * c * x

    l_nu = holder_family_constant(nu, a, c, n, fset.diameter("l2"))
    oracle = HolderOracle(f, grad, fset, HolderParams(nu, l_nu))
    phi_edge = a / (1.0 + nu) * B ** (1.0 + nu) - c * B * B
    e = np.zeros(n)
    e[0] = 1.0

    def builder(delta_u=0.0, seed=0):
        return CompositeProblem(
            name=f"holder-nu-{tag}", oracle=oracle, h=SimpleConvexPart.zero(), fset=fset,
            setup_name="euclidean", x0=np.array([0.4, -0.25]),
            psi_star=n * min(0.0, phi_edge),
            description=f"Hölder gradient, nu={nu:.4g}, on [-{B:g},{B:g}]^{n}",
            lipschitz_f=l_nu if nu == 1.0 else None,
            witness=(0.5 * B * e, B * e))

    return builder


# ---------------------------------------------------------------------------
# maximum functions with a concave quadratic added

INNER_DIM_X = 4
INNER_DIM_U = 3
INNER_CONCAVITY = 0.5


def _inner_matrix():
    return np.random.default_rng(7).standard_normal((INNER_DIM_X, INNER_DIM_U))


def inner_max_problem(G):
    U = FeasibleSet.ball(np.zeros(INNER_DIM_U), 1.0)
    A = _inner_matrix()
    return InnerMaxProblem(A, G, U, exact_maximizer=lambda x: G.argmax_on_ball(A.T @ x, 1.0))


def _inner(G, name):
    n, c = INNER_DIM_X, INNER_CONCAVITY
    fset = FeasibleSet.box(-1.0, 1.0, dim=n)
    problem = inner_max_problem(G)
    inner = InnerMaxOracle(problem, fset)
    concave = SmoothOracle(lambda x: -0.5 * c * float(x @ x), lambda x: -c * x, fset, L=c)
    oracle = SumOracle([inner, concave])
    lip_f = problem.a_norm ** 2 / G.sigma_rho + c if G.rho == 2 else None

    def builder(delta_u=0.0, seed=0):
        witness = find_witness(oracle.f_true, lambda r: r.uniform(-1.0, 1.0, n), seed=11)
        return CompositeProblem(
            name=name, oracle=oracle, h=SimpleConvexPart.zero(), fset=fset,
            setup_name="euclidean", x0=np.array([0.9, -0.6, 0.3, 0.8]),
            psi_star=-0.5 * c * n,
            description=f"max over unit ball with rho={G.rho:g} minus {c}/2||x||^2 on [-1,1]^{n}",
            lipschitz_f=lip_f, witness=witness)

    return builder


# ---------------------------------------------------------------------------
# l1-composite robust regression on the whole space

L1_ROWS, L1_DIM, L1_WEIGHT = 8, 5, 0.1


def _l1_whole(delta_u=0.0, seed=0):
    rng = np.random.default_rng(3)
    R = rng.standard_normal((L1_ROWS, L1_DIM))
    b = rng.standard_normal(L1_ROWS) * 2.0

    def f(x):
        r = R @ x - b
        return float(np.sum(np.log1p(r * r)))

    def grad(x):
        r = R @ x - b
        return R.T @ (2.0 * r / (1.0 + r * r))

    fset = FeasibleSet.whole(L1_DIM)
    # (log(1+t^2))'' lies in [-1/4, 2]
    L = 2.0 * operator_norm(R) ** 2
    oracle = SmoothOracle(f, grad, fset, L=L)
    return CompositeProblem(
        name="l1-whole", oracle=oracle, h=SimpleConvexPart.l1(L1_WEIGHT), fset=fset,
        setup_name="euclidean", x0=np.ones(L1_DIM), psi_star=0.0,
        description="sum log(1 + (Rx-b)^2) + 0.1||x||_1 on R^5",
        lipschitz_f=L,
        witness=find_witness(f, lambda r: r.uniform(-20.0, 20.0, L1_DIM), seed=5))


# ---------------------------------------------------------------------------
# indefinite quadratic on the simplex, entropy setup

SIMPLEX_DIM = 5


def _simplex_entropy(delta_u=0.0, seed=0):
    n = SIMPLEX_DIM
    rng = np.random.default_rng(9)
    B = rng.standard_normal((n, n))
    Q = 0.5 * (B + B.T) - 1.0 * np.eye(n)
    q = rng.uniform(-0.5, 0.5, n)

    def f(x):
        return 0.5 * float(x @ Q @ x) + float(q @ x)

    def grad(x):
        return Q @ x + q

    fset = FeasibleSet.simplex(n)
    # ||Q(x - y)||_inf <= max|Q_ij| ||x - y||_1
    L = float(np.max(np.abs(Q)))
    oracle = SmoothOracle(f, grad, fset, L=L)
    return CompositeProblem(
        name="simplex-entropy", oracle=oracle, h=SimpleConvexPart.zero(), fset=fset,
        setup_name="entropy", x0=np.full(n, 1.0 / n),
        # x^T Q x is a convex combination of the Q_ij on the simplex
        psi_star=0.5 * float(Q.min()) + float(q.min()),
        description="indefinite quadratic on the 5-simplex, entropy prox",
        lipschitz_f=L,
        witness=find_witness(f, lambda r: r.dirichlet(np.ones(n)), seed=13))


_BUILDERS = {
    "quad-cos": _quad_cos,
    "quad-cos-noisy": _quad_cos_noisy,
    "holder-nu-13": _holder("13"),
    "holder-nu-12": _holder("12"),
    "holder-nu-1": _holder("1"),
    "inner-max-quad": _inner(QuadraticG(1.0), "inner-max-quad"),
    "inner-max-quartic": _inner(QuarticG(1.0), "inner-max-quartic"),
    "l1-whole": _l1_whole,
    "simplex-entropy": _simplex_entropy,
}

PROBLEM_NAMES = tuple(_BUILDERS)


def build_problem(name, delta_u=0.0, seed=0):
    """Instantiate a catalog problem.  ``delta_u`` and ``seed`` only affect
    the noise-wrapped instance."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise CapabilityError(
            f"unknown problem {name!r}; valid: {', '.join(PROBLEM_NAMES)}") from None
    return builder(delta_u=delta_u, seed=seed)


def catalog():
    return [build_problem(name) for name in PROBLEM_NAMES]
