"""Feasible sets, prox-functions and composite prox-mappings.

A composite prox-mapping solves

    min_{x in X}  <g, x> + (1/gamma) V[x_bar](x) + h(x)

where ``V`` is the Bregman divergence of the prox-function of a
:class:`ProxSetup`.  Every supported combination is solved in closed form,
and every returned point carries a numerically evaluated certificate: the
smallest ``eps`` such that

    <g + (1/gamma)[d'(x) - d'(x_bar)] + p, u - x>  >=  -eps   for all u in X

for some subgradient ``p`` of ``h`` at ``x``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import CapabilityError, DimensionError, DomainError

#: Membership tolerance for feasible sets.
MEMBERSHIP_TOL = 1e-12
#: Relative size below which a residual on an unbounded set counts as zero.
CERT_RTOL = 1e-9
#: Coordinates of entropy iterates are floored here before taking logs.
ENTROPY_FLOOR = 1e-300

__all__ = [
    "as_point",
    "FeasibleSet",
    "SimpleConvexPart",
    "ProxSetup",
    "EuclideanSetup",
    "EntropySetup",
    "EUCLIDEAN",
    "ENTROPY",
    "get_setup",
    "ProxResult",
    "bregman_divergence",
    "prox_step",
    "prox_certificate",
    "inject_prox_noise",
    "gradient_mapping",
    "min_linear_plus_h",
]


def as_point(x, dim=None, name="point"):
    """Return ``x`` as a finite 1-D float array, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty vector, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"{name} has dimension {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite coordinates")
    return arr


# ---------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Closed convex set ``X``: the whole space, a box, a euclidean ball or
    the standard simplex.

    Use the ``whole``, ``box``, ``ball`` and ``simplex`` constructors.
    """

    kind: str
    dim: int
    lower: np.ndarray = None
    upper: np.ndarray = None
    center: np.ndarray = None
    radius: float = None

    @classmethod
    def whole(cls, dim):
        return cls("whole", int(dim))

    @classmethod
    def box(cls, lower, upper, dim=None):
        if np.ndim(lower) == 0 and np.ndim(upper) == 0:
            if dim is None:
                raise DimensionError("scalar box bounds need an explicit dim")
            lower = np.full(dim, float(lower))
            upper = np.full(dim, float(upper))
        lo = as_point(lower, dim, "lower")
        hi = as_point(upper, lo.size, "upper")
        if np.any(lo > hi):
            raise ValueError("box needs lower <= upper coordinatewise")
        return cls("box", lo.size, lower=lo, upper=hi)

    @classmethod
    def ball(cls, center, radius):
        c = as_point(center, name="center")
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        return cls("ball", c.size, center=c, radius=float(radius))

    @classmethod
    def simplex(cls, dim):
        return cls("simplex", int(dim))

    @property
    def bounded(self):
        return self.kind != "whole"

    def contains(self, x, tol=MEMBERSHIP_TOL):
        x = as_point(x, self.dim)
        if self.kind == "whole":
            return True
        if self.kind == "box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        if self.kind == "ball":
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    def project(self, x):
        """Euclidean projection onto the set."""
        x = as_point(x, self.dim)
        if self.kind == "whole":
            return x.copy()
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        if self.kind == "ball":
            v = x - self.center
            nv = np.linalg.norm(v)
            if nv <= self.radius:
                return x.copy()
            return self.center + v * (self.radius / nv)
        # sort-based projection onto the simplex
        s = np.sort(x)[::-1]
        css = np.cumsum(s) - 1.0
        idx = np.arange(1, x.size + 1)
        rho = np.nonzero(s - css / idx > 0)[0][-1]
        theta = css[rho] / (rho + 1)
        return np.maximum(x - theta, 0.0)

    def diameter(self, norm="l2"):
        """``max ||x - y||`` over the set in the ``l2`` or ``l1`` norm."""
        if norm not in ("l2", "l1"):
            raise ValueError(f"unknown norm {norm!r}")
        if self.kind == "whole":
            return float("inf")
        if self.kind == "box":
            w = self.upper - self.lower
            return float(np.linalg.norm(w, 2 if norm == "l2" else 1))
        if self.kind == "ball":
            scale = 1.0 if norm == "l2" else np.sqrt(self.dim)
            return float(2.0 * self.radius * scale)
        if self.dim == 1:
            return 0.0
        return float(np.sqrt(2.0)) if norm == "l2" else 2.0

    def linear_min(self, c):
        """Return ``(min_{u in X} <c, u>, argmin)``.

        On the whole space the minimum is ``-inf`` (argmin ``None``) unless
        ``c`` vanishes.
        """
        c = as_point(c, self.dim, "c")
        if self.kind == "whole":
            if np.any(c != 0):
                return -np.inf, None
            return 0.0, np.zeros(self.dim)
        if self.kind == "box":
            u = np.where(c > 0, self.lower, self.upper)
        elif self.kind == "ball":
            nc = np.linalg.norm(c)
            u = self.center.copy() if nc == 0 else self.center - self.radius * c / nc
        else:
            u = np.zeros(self.dim)
            u[int(np.argmin(c))] = 1.0
        return float(c @ u), u

    def sample(self, rng, around=None, radius=10.0):
        """Draw one point of the set; whole-space draws stay within
        ``radius`` of ``around`` (the origin by default)."""
        n = self.dim
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper)
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(n))
        center = self.center if self.kind == "ball" else (
            np.zeros(n) if around is None else as_point(around, n))
        r = self.radius if self.kind == "ball" else radius
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        return center + r * rng.uniform() ** (1.0 / n) * d

    def __repr__(self):
        if self.kind == "box":
            return f"FeasibleSet.box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"
        if self.kind == "ball":
            return f"FeasibleSet.ball(center={self.center.tolist()}, radius={self.radius})"
        return f"FeasibleSet.{self.kind}({self.dim})"


# ---------------------------------------------------------------------------
# simple convex part


@dataclass(frozen=True)
class SimpleConvexPart:
    """``h(x) = 0`` or ``h(x) = lam * ||x||_1``."""

    kind: str = "zero"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "l1"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("l1 weight must be non-negative")

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def l1(cls, lam):
        return cls("l1", float(lam))

    def __call__(self, x):
        if self.kind == "zero":
            return 0.0
        return self.lam * float(np.sum(np.abs(x)))

    def subgradient(self, x):
        """Subgradient selection; coordinates at zero get 0."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        return self.lam * np.sign(x)


# ---------------------------------------------------------------------------
# prox setups


class ProxSetup:
    """A norm together with a prox-function ``d`` that is 1-strongly convex
    with respect to it."""

    name = None
    norm_kind = None

    def norm(self, x):
        raise NotImplementedError

    def dual_norm(self, g):
        raise NotImplementedError

    def d(self, x):
        raise NotImplementedError

    def d_prime(self, x):
        raise NotImplementedError

    def check_center(self, z):
        """Raise :class:`DomainError` if ``d'`` does not exist at ``z``."""

    def __repr__(self):
        return f"<ProxSetup {self.name}>"


class EuclideanSetup(ProxSetup):
    name = "euclidean"
    norm_kind = "l2"

    def norm(self, x):
        return float(np.linalg.norm(x))

    def dual_norm(self, g):
        return float(np.linalg.norm(g))

    def d(self, x):
        return 0.5 * float(np.dot(x, x))

    def d_prime(self, x):
        return np.asarray(x, dtype=float)


class EntropySetup(ProxSetup):
    """Negative entropy on the simplex, 1-strongly convex w.r.t. the l1 norm."""

    name = "entropy"
    norm_kind = "l1"

    def norm(self, x):
        return float(np.sum(np.abs(x)))

    def dual_norm(self, g):
        return float(np.max(np.abs(g)))

    def d(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("entropy prox-function needs non-negative coordinates")
        return float(np.sum(_xlogy(x, x)))

    def d_prime(self, x):
        return 1.0 + np.log(np.maximum(x, ENTROPY_FLOOR))

    def check_center(self, z):
        if np.any(np.asarray(z) <= 0):
            raise DomainError("entropy Bregman divergence needs a centre with positive coordinates")


def _xlogy(x, y):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(y[pos])
    return out


EUCLIDEAN = EuclideanSetup()
ENTROPY = EntropySetup()
_SETUPS = {s.name: s for s in (EUCLIDEAN, ENTROPY)}


def get_setup(name):
    try:
        return _SETUPS[name]
    except KeyError:
        raise CapabilityError(
            f"unknown prox setup {name!r}; valid: {', '.join(sorted(_SETUPS))}") from None


def bregman_divergence(setup, z, x):
    """``V[z](x) = d(x) - d(z) - <d'(z), x - z>``."""
    z = as_point(z, name="z")
    x = as_point(x, z.size, "x")
    setup.check_center(z)
    if isinstance(setup, EntropySetup):
        if np.any(x < 0):
            raise DomainError("entropy Bregman divergence needs x >= 0")
        # generalized KL, written to avoid cancellation
        return float(np.sum(_xlogy(x, x) - _xlogy(x, z) - x + z))
    if isinstance(setup, EuclideanSetup):
        return 0.5 * float(np.dot(x - z, x - z))
    return setup.d(x) - setup.d(z) - float(setup.d_prime(z) @ (x - z))


# ---------------------------------------------------------------------------
# prox-mapping


@dataclass(frozen=True, eq=False)
class ProxResult:
    """Output of a composite prox-mapping.

    ``certified_error`` is the slack for which the variational inequality
    is certified.  The inputs of the prox problem are kept so the result
    can be re-certified after perturbation.
    """

    point: np.ndarray
    certified_error: float
    certificate_kind: str
    setup: ProxSetup = field(repr=False, default=None)
    fset: FeasibleSet = field(repr=False, default=None)
    h: SimpleConvexPart = field(repr=False, default=None)
    x_bar: np.ndarray = field(repr=False, default=None)
    g: np.ndarray = field(repr=False, default=None)
    gamma: float = field(repr=False, default=None)


def _check_gamma(gamma):
    if not gamma > 0 or not np.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")


def _closed_form(setup, fset, h, x_bar, g, gamma):
    if isinstance(setup, EuclideanSetup):
        v = x_bar - gamma * g
        if h.kind == "l1" and h.lam > 0:
            if fset.kind == "ball":
                raise CapabilityError("l1 regularizer on a ball has no separable closed form")
            if fset.kind in ("whole", "box"):
                t = gamma * h.lam
                v = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
        if fset.kind in ("whole", "box", "ball"):
            return fset.project(v)
        raise CapabilityError("euclidean setup is supported on whole-space, box and ball")
    if isinstance(setup, EntropySetup):
        if fset.kind != "simplex":
            raise CapabilityError("entropy setup is supported on the simplex only")
        # l1 is constant on the simplex, so it does not move the minimizer
        logits = np.log(np.maximum(x_bar, ENTROPY_FLOOR)) - gamma * g
        logits -= logits.max()
        w = np.exp(logits)
        return w / w.sum()
    raise CapabilityError(f"no closed-form prox for setup {setup!r}")


def prox_step(setup, fset, h, x_bar, g, gamma, delta_pc):
    """Composite prox-mapping with step ``gamma`` (``1/M`` in the solver).

    All supported combinations are solved in closed form, so ``delta_pc``
    only has to be a valid positive budget; the returned certificate is the
    numerically evaluated slack, typically at rounding level.
    """
    _check_gamma(gamma)
    if not delta_pc > 0:
        raise ValueError("delta_pc must be positive")
    x_bar = as_point(x_bar, fset.dim, "x_bar")
    g = as_point(g, fset.dim, "g")
    if not fset.contains(x_bar, tol=1e-9):
        raise DomainError("x_bar must lie in the feasible set")
    x_tilde = _closed_form(setup, fset, h, x_bar, g, gamma)
    cert = prox_certificate(setup, fset, h, x_bar, g, gamma, x_tilde)
    return ProxResult(x_tilde, cert, "closed-form-exact", setup, fset, h, x_bar, g, gamma)


def _residual(setup, h, x_bar, g, gamma, x):
    a = g + (setup.d_prime(x) - setup.d_prime(x_bar)) / gamma
    if h.kind == "l1" and h.lam > 0:
        # element of the subdifferential closest to -a, coordinatewise
        p = np.where(x != 0, h.lam * np.sign(x), np.clip(-a, -h.lam, h.lam))
        a = a + p
    return a


def prox_certificate(setup, fset, h, x_bar, g, gamma, candidate):
    """Smallest ``eps >= 0`` for which ``candidate`` is an ``eps``-inexact
    composite prox point.

    Returns ``inf`` on the whole space when the residual vector does not
    vanish (the inequality cannot hold for every ``u``).
    """
    _check_gamma(gamma)
    x_bar = as_point(x_bar, fset.dim, "x_bar")
    g = as_point(g, fset.dim, "g")
    x = as_point(candidate, fset.dim, "candidate")
    if not fset.contains(x, tol=1e-9):
        raise DomainError("candidate lies outside the feasible set")
    q = _residual(setup, h, x_bar, g, gamma, x)
    # magnitude of the terms that make up q, for a rounding-level cutoff
    scale = (1.0 + np.abs(g) + h.lam
             + (np.abs(setup.d_prime(x_bar)) + np.abs(setup.d_prime(x))) / gamma)
    if fset.kind == "whole":
        return 0.0 if np.all(np.abs(q) <= CERT_RTOL * scale) else float("inf")
    if fset.kind == "box":
        xc = np.clip(x, fset.lower, fset.upper)
        slack = np.sum(np.maximum(q * (xc - fset.lower), q * (xc - fset.upper)))
    elif fset.kind == "ball":
        slack = q @ (x - fset.center) + fset.radius * np.linalg.norm(q)
    else:
        slack = (q - q.min()) @ np.maximum(x, 0.0)
    if slack <= CERT_RTOL * float(scale.sum()) * (1.0 + fset.diameter()):
        return 0.0
    return float(slack)


def _perturb(fset, x, step):
    if fset.kind == "simplex":
        w = x * np.exp(step)
        return w / w.sum()
    return fset.project(x + step)


def inject_prox_noise(result, delta_pu, seed, max_halvings=60):
    """Perturb a prox point so that its certificate degrades by at most
    ``delta_pu``.

    A random direction is drawn from ``seed`` and halved until the
    perturbed point stays feasible and within budget.  If no scale
    qualifies (on the whole space only rounding-level moves do), the
    original result is returned.
    """
    if delta_pu < 0:
        raise ValueError("delta_pu must be non-negative")
    if delta_pu == 0:
        return result
    if result.setup is None:
        raise ValueError("result carries no prox problem to certify against")
    fset = result.fset
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(fset.dim)
    direction /= np.linalg.norm(direction)
    budget = result.certified_error + delta_pu
    t = max(1.0, fset.diameter()) if fset.bounded else 1.0
    for _ in range(max_halvings):
        cand = _perturb(fset, result.point, t * direction)
        if np.all(np.isfinite(cand)) and fset.contains(cand):
            cert = prox_certificate(result.setup, fset, result.h, result.x_bar,
                                    result.g, result.gamma, cand)
            if cert <= budget:
                return replace(result, point=cand, certified_error=cert,
                               certificate_kind="verified-numeric")
        t *= 0.5
    return result


def gradient_mapping(x_bar, x_tilde, gamma):
    """``(x_bar - x_tilde) / gamma``."""
    _check_gamma(gamma)
    x_bar = as_point(x_bar, name="x_bar")
    x_tilde = as_point(x_tilde, x_bar.size, "x_tilde")
    return (x_bar - x_tilde) / gamma


def min_linear_plus_h(fset, h, c):
    """``min_{u in X} <c, u> + h(u)``; may be ``-inf`` on the whole space."""
    c = as_point(c, fset.dim, "c")
    if h.kind == "zero" or h.lam == 0:
        return fset.linear_min(c)[0]
    lam = h.lam
    if fset.kind == "whole":
        return 0.0 if np.max(np.abs(c)) <= lam else -np.inf
    if fset.kind == "simplex":
        return float(c.min()) + lam
    if fset.kind == "box":
        lo, hi = fset.lower, fset.upper
        cands = [c * lo + lam * np.abs(lo), c * hi + lam * np.abs(hi)]
        best = np.minimum(cands[0], cands[1])
        inside = (lo <= 0) & (hi >= 0)
        best = np.where(inside, np.minimum(best, 0.0), best)
        return float(best.sum())
    if np.any(fset.center != 0):
        raise CapabilityError("l1 regularizer is supported on origin-centred balls only")
    excess = np.maximum(np.abs(c) - lam, 0.0)
    return -fset.radius * float(np.linalg.norm(excess))
