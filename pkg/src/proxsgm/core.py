"""Composite weakly convex problems and their standing-assumption checks.

A problem is min phi(x) = g(x) + r(x) where g is rho-weakly convex (adding
(rho/2)*||.||^2 makes it convex), accessed through a stochastic subgradient
oracle, and r is prox-friendly convex.  All randomness flows through an
explicitly seeded ``numpy.random.Generator``; identical seeds give
bit-identical results.  Problem objects are immutable after construction and
safe to share across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .prox import ProxFriendly

Array = np.ndarray


class CapabilityError(RuntimeError):
    """An operation needs an oracle this problem does not expose."""


@dataclass(frozen=True)
class StochasticSample:
    """One stochastic subgradient draw with its reproducibility tag."""

    vector: Array
    draw_id: int = 0


@dataclass(frozen=True)
class StochasticOracle:
    """Sampling access to subgradients of g.

    ``sample(x, rng)`` returns an unbiased draw whose mean lies in the
    subdifferential of g at x.  ``unbiased_mean`` exposes that mean when it
    is computable.  ``sample_batch(x, n, rng)`` returns an ``(n, dim)`` array
    of independent draws; it exists purely so Monte-Carlo checks can
    vectorize, and must match ``n`` repeated ``sample`` calls in
    distribution (not draw-for-draw).
    """

    sample: Callable[[Array, np.random.Generator], StochasticSample]
    unbiased_mean: Callable[[Array], Array] | None = None
    sample_batch: Callable[[Array, int, np.random.Generator], Array] | None = None

    def draw_batch(self, x: Array, n: int, rng: np.random.Generator) -> Array:
        if self.sample_batch is not None:
            return self.sample_batch(x, n, rng)
        return np.stack([self.sample(x, rng).vector for _ in range(n)])


@dataclass(frozen=True)
class ProblemMeta:
    family: str
    m: int = 0
    d: int = 1
    seed: int = 0
    detail: str = ""

    def problem_id(self) -> str:
        if self.family == "toy1d":
            return f"toy1d:{self.detail}"
        return f"{self.family}:{self.m}:{self.d}:{self.seed}"


@dataclass(frozen=True)
class CompositeProblem:
    """min g(x) + r(x) with g weakly convex and r prox-friendly.

    ``rho`` is a certified weak-convexity modulus of g (0 means convex).
    ``lipschitz_L`` bounds the oracle's second moment, ``sigma`` bounds the
    variance around the exact gradient when g is smooth; at least one of the
    two must be present before the solver runs.  ``smooth`` declares that g
    is continuously differentiable and ``g_full_subgradient`` returns the
    exact gradient.
    """

    dim: int
    g_oracle: StochasticOracle
    regularizer: ProxFriendly
    rho: float
    g_value: Callable[[Array], float] | None = None
    g_full_subgradient: Callable[[Array], Array] | None = None
    lipschitz_L: float | None = None
    sigma: float | None = None
    domain_diameter: float | None = None
    smooth: bool = False
    g_value_batch: Callable[[Array], Array] | None = None
    g_subdiff_interval: Callable[[Array], tuple[float, float]] | None = None
    planted_point: Array | None = None
    meta: ProblemMeta | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        for name in ("lipschitz_L", "sigma"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative when given")
        if self.domain_diameter is not None and self.domain_diameter <= 0:
            raise ValueError("domain_diameter must be positive when given")

    def phi(self, x: Array) -> float:
        """Full objective g + r; inf outside dom r."""
        self.require_deterministic()
        rv = self.regularizer.value(x)
        if math.isinf(rv):
            return math.inf
        return float(self.g_value(x)) + rv

    def g_batch(self, pts: Array) -> Array:
        if self.g_value_batch is not None:
            return np.asarray(self.g_value_batch(pts), dtype=float)
        self.require_deterministic()
        return np.array([self.g_value(p) for p in np.asarray(pts, dtype=float)])

    def require_deterministic(self) -> "CompositeProblem":
        if self.g_value is None or self.g_full_subgradient is None:
            raise CapabilityError("problem does not expose deterministic g oracles")
        return self

    def require_bound_constants(self) -> "CompositeProblem":
        if self.lipschitz_L is None and self.sigma is None:
            raise CapabilityError("need lipschitz_L or sigma before solving")
        return self


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of a sampled inequality certification."""

    check: str
    n_pairs: int
    max_violation: float
    tolerance: float
    violated: bool
    worst_pair: tuple[Array, Array] | None = None


def sample_domain_points(
    problem: CompositeProblem, n: int, radius: float, rng: np.random.Generator
) -> Array:
    """n points uniform in the given ball, mapped into dom r by projection."""
    d = problem.dim
    raw = rng.standard_normal((n, d))
    raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-300)
    raw *= radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return np.stack([problem.regularizer.project_domain(p) for p in raw])


def check_weak_convexity(
    problem: CompositeProblem,
    n_pairs: int,
    radius: float,
    rng: np.random.Generator,
) -> ViolationReport:
    """Sampled certification that g is rho-weakly convex.

    For pairs (x, y) in dom r the inequality
    g(y) >= g(x) + <v, y - x> - (rho/2)*||y - x||^2 must hold for the
    subgradient selection v at x.  The violation margin is the left-over of
    the right side; anything above 1e-9 * (1 + |g(y)|) is flagged.
    """
    problem.require_deterministic()
    if n_pairs < 1 or radius <= 0:
        raise ValueError("need n_pairs >= 1 and radius > 0")
    xs = sample_domain_points(problem, n_pairs, radius, rng)
    ys = sample_domain_points(problem, n_pairs, radius, rng)
    worst = -math.inf
    worst_pair = None
    violated = False
    for x, y in zip(xs, ys):
        v = problem.g_full_subgradient(x)
        gap = (
            problem.g_value(x)
            + float(v @ (y - x))
            - 0.5 * problem.rho * float((y - x) @ (y - x))
            - problem.g_value(y)
        )
        tol = 1e-9 * (1.0 + abs(problem.g_value(y)))
        if gap > worst:
            worst, worst_pair = gap, (x, y)
        if gap > tol:
            violated = True
    tol_worst = 1e-9 * (1.0 + abs(problem.g_value(worst_pair[1])))
    return ViolationReport(
        check="weak_convexity",
        n_pairs=n_pairs,
        max_violation=worst,
        tolerance=tol_worst,
        violated=violated,
        worst_pair=worst_pair,
    )


def check_hypomonotonicity(
    problem: CompositeProblem,
    n_pairs: int,
    radius: float,
    rng: np.random.Generator,
) -> ViolationReport:
    """Sampled certification of <v - w, x - y> >= -rho * ||x - y||^2."""
    problem.require_deterministic()
    if n_pairs < 1 or radius <= 0:
        raise ValueError("need n_pairs >= 1 and radius > 0")
    xs = sample_domain_points(problem, n_pairs, radius, rng)
    ys = sample_domain_points(problem, n_pairs, radius, rng)
    worst = -math.inf
    worst_pair = None
    violated = False
    for x, y in zip(xs, ys):
        v = problem.g_full_subgradient(x)
        w = problem.g_full_subgradient(y)
        gap = -(float((v - w) @ (x - y)) + problem.rho * float((x - y) @ (x - y)))
        tol = 1e-9 * (1.0 + abs(problem.g_value(y)))
        if gap > worst:
            worst, worst_pair = gap, (x, y)
        if gap > tol:
            violated = True
    tol_worst = 1e-9 * (1.0 + abs(problem.g_value(worst_pair[1])))
    return ViolationReport(
        check="hypomonotonicity",
        n_pairs=n_pairs,
        max_violation=worst,
        tolerance=tol_worst,
        violated=violated,
        worst_pair=worst_pair,
    )


@dataclass(frozen=True)
class OracleReport:
    check: str
    n_repeats: int
    n_passed: int
    worst_ratio: float
    passed: bool


def check_oracle_unbiasedness(
    problem: CompositeProblem,
    x: Array,
    rng: np.random.Generator,
    n_samples: int = 10_000,
    n_repeats: int = 20,
) -> OracleReport:
    """Empirical mean of oracle draws against the declared unbiased mean.

    Each repeat draws ``n_samples`` subgradients and passes when the mean
    deviates by at most five empirical standard errors.  At least 95% of the
    repeats must pass.
    """
    oracle = problem.g_oracle
    if oracle.unbiased_mean is None:
        raise CapabilityError("oracle does not declare an unbiased mean")
    target = oracle.unbiased_mean(x)
    n_passed = 0
    worst = 0.0
    for _ in range(n_repeats):
        draws = oracle.draw_batch(x, n_samples, rng)
        mean = draws.mean(axis=0)
        spread = float(np.sqrt(np.mean(np.sum((draws - mean) ** 2, axis=1))))
        err = float(np.linalg.norm(mean - target))
        allowance = 5.0 * spread / math.sqrt(n_samples)
        if allowance == 0.0:
            ok = err == 0.0
            ratio = 0.0 if ok else math.inf
        else:
            ratio = err / allowance
            ok = ratio <= 1.0
        worst = max(worst, ratio)
        n_passed += ok
    return OracleReport(
        check="unbiasedness",
        n_repeats=n_repeats,
        n_passed=n_passed,
        worst_ratio=worst,
        passed=n_passed >= math.ceil(0.95 * n_repeats),
    )


def check_second_moment(
    problem: CompositeProblem,
    rng: np.random.Generator,
    n_points: int = 100,
    n_samples: int = 4_000,
    radius: float | None = None,
    slack: float = 0.1,
) -> OracleReport:
    """Empirical second moment of the oracle against lipschitz_L squared."""
    if problem.lipschitz_L is None:
        raise CapabilityError("problem does not certify lipschitz_L")
    if radius is None:
        radius = problem.domain_diameter or 2.0
    pts = sample_domain_points(problem, n_points, radius, rng)
    bound = (1.0 + slack) * problem.lipschitz_L**2
    worst = 0.0
    n_passed = 0
    for x in pts:
        draws = problem.g_oracle.draw_batch(x, n_samples, rng)
        est = float(np.mean(np.sum(draws**2, axis=1)))
        worst = max(worst, est / bound)
        n_passed += est <= bound
    return OracleReport(
        check="second_moment",
        n_repeats=n_points,
        n_passed=n_passed,
        worst_ratio=worst,
        passed=n_passed == n_points,
    )
