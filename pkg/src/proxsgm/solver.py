"""Proximal stochastic subgradient method and its per-step guarantees.

The method is the obvious one: draw a stochastic subgradient, take a step,
apply the proximal map of r.  The only nonstandard piece is the returned
point, which is sampled from the iterates with probabilities proportional
to the step sizes; all the convergence statements in `harness` are about
that randomly selected iterate.

`check_descent_lemma` and `check_prox_identity` turn the two single-step
facts the analysis rests on into Monte-Carlo / algebraic checks that run
against live problem instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import CompositeProblem
from .moreau import MoreauPoint, moreau_prox

Array = np.ndarray

TRAJECTORY_CAP = 1_000_000


class DomainError(ValueError):
    """Start point outside dom r."""


class OracleError(RuntimeError):
    """Non-finite stochastic subgradient; carries the iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


def _coerce_rng(rng_or_seed) -> tuple[np.random.Generator, int]:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed, -1
    return np.random.default_rng(rng_or_seed), int(rng_or_seed)


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes for one run.

    ``constant`` builds the gamma / sqrt(T+1) schedule the constant-step
    corollaries analyze; ``explicit`` takes arbitrary positive steps.  When
    rho_hat is supplied the steps must not exceed 1/rho_hat, which the
    descent lemma needs.
    """

    alphas: Array
    kind: str = "explicit"
    gamma: float | None = None
    rho_hat: float | None = None

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("schedule needs a nonempty 1-D array of steps")
        if not np.all(a > 0):
            raise ValueError("all steps must be positive")
        if self.rho_hat is not None and self.rho_hat > 0:
            if float(a.max()) > 1.0 / self.rho_hat + 1e-15:
                raise ValueError(
                    f"max step {a.max()} exceeds 1/rho_hat = {1.0 / self.rho_hat}"
                )
        object.__setattr__(self, "alphas", a)

    @property
    def horizon(self) -> int:
        """T, so the run takes T+1 steps indexed 0..T."""
        return self.alphas.size - 1

    @property
    def sum_alpha(self) -> float:
        return float(self.alphas.sum())

    @property
    def sum_alpha_sq(self) -> float:
        return float((self.alphas**2).sum())

    @staticmethod
    def constant(gamma: float, T: int, rho_hat: float | None = None) -> "StepSchedule":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if T < 0:
            raise ValueError("horizon must be nonnegative")
        alpha = gamma / math.sqrt(T + 1)
        return StepSchedule(
            alphas=np.full(T + 1, alpha), kind="constant", gamma=gamma, rho_hat=rho_hat
        )

    @staticmethod
    def explicit(alphas, rho_hat: float | None = None) -> "StepSchedule":
        return StepSchedule(alphas=np.asarray(alphas, dtype=float), rho_hat=rho_hat)


@dataclass(frozen=True)
class RunResult:
    """One trajectory plus the step-weighted random iterate choice.

    ``iterates`` holds x_0..x_{T+1} when the trajectory fits under
    TRAJECTORY_CAP entries; otherwise only the endpoints and x_star survive
    (``truncated`` is set).  ``x_star`` is always iterates-consistent:
    x_star = iterates[t_star] in the stored indexing.
    """

    iterates: Array
    t_star: int
    x_star: Array
    oracle_calls: int
    seed: int
    schedule_used: StepSchedule
    truncated: bool = False

    def __post_init__(self):
        if not self.truncated:
            assert np.array_equal(self.iterates[self.t_star], self.x_star)


def sample_tstar(alphas, rng: np.random.Generator) -> int:
    """Index t with probability alpha_t / sum(alphas), by inverse CDF.

    Consumes exactly one uniform variate.
    """
    a = np.asarray(alphas, dtype=float)
    if a.size == 0:
        raise ValueError("empty step list")
    if not np.all(a > 0):
        raise ValueError("steps must be positive")
    cdf = np.cumsum(a)
    u = rng.uniform(0.0, cdf[-1])
    return int(np.searchsorted(cdf, u, side="right").clip(0, a.size - 1))


def run_psgm(
    problem: CompositeProblem,
    x0: Array,
    schedule: StepSchedule,
    rng_or_seed,
) -> RunResult:
    """Run the proximal stochastic subgradient method for T+1 steps.

    Deterministic given (seed, problem data, x0, schedule).  The selection
    index t* is drawn from a single uniform variate after the loop, so the
    subgradient stream is identical across schedules of equal length.
    """
    rng, seed = _coerce_rng(rng_or_seed)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.dim,):
        raise DomainError(f"x0 has shape {x0.shape}, problem dim {problem.dim}")
    if math.isinf(problem.regularizer.value(x0)):
        raise DomainError("x0 outside dom r")

    alphas = schedule.alphas
    T = schedule.horizon
    n_iter = T + 1
    full = (n_iter + 1) * problem.dim <= TRAJECTORY_CAP

    x = x0.copy()
    if full:
        iterates = np.empty((n_iter + 1, problem.dim))
        iterates[0] = x
        for t in range(n_iter):
            g = problem.g_oracle.sample(x, rng).vector
            if not np.all(np.isfinite(g)):
                raise OracleError(f"non-finite subgradient at iteration {t}", t)
            x = problem.regularizer.prox(x - alphas[t] * g, alphas[t])
            iterates[t + 1] = x
        t_star = sample_tstar(alphas, rng)
        return RunResult(
            iterates=iterates,
            t_star=t_star,
            x_star=iterates[t_star].copy(),
            oracle_calls=n_iter,
            seed=seed,
            schedule_used=schedule,
        )

    # long-horizon mode: keep only the selected iterate; the selection
    # index is drawn up front from a spawned substream so the subgradient
    # stream matches the full-trajectory mode draw for draw
    t_star = sample_tstar(alphas, rng.spawn(1)[0])
    x_star = x.copy() if t_star == 0 else None
    for t in range(n_iter):
        g = problem.g_oracle.sample(x, rng).vector
        if not np.all(np.isfinite(g)):
            raise OracleError(f"non-finite subgradient at iteration {t}", t)
        x = problem.regularizer.prox(x - alphas[t] * g, alphas[t])
        if t + 1 == t_star:
            x_star = x.copy()
    endpoints = np.stack([x0, x_star, x])
    return RunResult(
        iterates=endpoints,
        t_star=t_star,
        x_star=x_star,
        oracle_calls=n_iter,
        seed=seed,
        schedule_used=schedule,
        truncated=True,
    )


# ---------------------------------------------------------------------------
# single-step guarantees


@dataclass(frozen=True)
class LemmaReport:
    """Monte-Carlo estimate of the one-step contraction vs its bound."""

    estimate: float
    ci_half_width: float
    bound: float
    n_samples: int
    variant: str
    violated: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "violated", self.estimate - self.ci_half_width > self.bound
        )


def check_descent_lemma(
    problem: CompositeProblem,
    x_t: Array,
    rho_hat: float,
    alpha: float,
    n_samples: int,
    rng_or_seed,
    moreau: Callable[..., MoreauPoint] = moreau_prox,
    variant: str | None = None,
    inner_tol: float = 1e-10,
) -> LemmaReport:
    """One-step mean-square contraction toward the proximal point.

    Estimates E||x_{t+1} - x_hat||^2 over n_samples independent draws and
    compares against the closed-form right side: a (rho_hat - rho)-strength
    contraction plus 2 alpha^2 L^2 for subgradient oracles, or the
    alpha^2 sigma^2 variance term for smooth problems with exact gradient
    plus noise.  Flags violation when the estimate minus its 95% confidence
    half-width exceeds the bound.
    """
    rng, _ = _coerce_rng(rng_or_seed)
    if variant is None:
        variant = "smooth" if problem.smooth else "weakly_convex"
    if rho_hat <= problem.rho:
        raise ValueError("rho_hat must exceed rho")
    if variant == "weakly_convex" and problem.rho > 0 and rho_hat > 2 * problem.rho:
        raise ValueError("weakly convex variant needs rho_hat <= 2 rho")
    if alpha > 1.0 / rho_hat:
        raise ValueError("alpha must not exceed 1/rho_hat")
    x_t = np.asarray(x_t, dtype=float)

    point = moreau(problem, x_t, 1.0 / rho_hat, inner_tol)
    x_hat = point.x_hat
    dist_sq = float(np.sum((x_t - x_hat) ** 2))

    if variant == "weakly_convex":
        L = problem.lipschitz_L
        if L is None:
            raise ValueError("weakly convex variant needs a certified lipschitz_L")
        noise_term = 2.0 * alpha * alpha * L * L
        contraction = 2.0 * alpha * (rho_hat - problem.rho)
    elif variant == "smooth":
        if problem.sigma is None:
            raise ValueError("smooth variant needs a certified sigma")
        noise_term = alpha * alpha * problem.sigma**2
        contraction = alpha * (rho_hat - problem.rho)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    bound = dist_sq + noise_term - contraction * dist_sq

    draws = problem.g_oracle.draw_batch(x_t, n_samples, rng)
    stepped = problem.regularizer.prox(x_t - alpha * draws, alpha)
    sq = np.sum((stepped - x_hat) ** 2, axis=-1)
    est = float(sq.mean())
    sem = float(sq.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return LemmaReport(
        estimate=est,
        ci_half_width=1.96 * sem,
        bound=bound,
        n_samples=n_samples,
        variant=variant,
    )


def check_prox_identity(
    problem: CompositeProblem,
    x: Array,
    rho_hat: float,
    alpha: float,
    moreau: Callable[..., MoreauPoint] = moreau_prox,
    inner_tol: float = 1e-10,
    point: MoreauPoint | None = None,
) -> float:
    """Fixed-point restatement of the proximal subproblem optimality.

    With x_hat = prox at parameter 1/rho_hat and the certificate
    zeta_hat, the update written with the *mean* subgradient must return
    x_hat itself:  x_hat = prox_{alpha r}(alpha rho_hat x - alpha zeta_hat
    + (1 - alpha rho_hat) x_hat).  Returns the residual norm; the contract
    is residual <= inner tolerance times a conditioning factor of 10.

    Pass ``point`` to reuse an already computed MoreauPoint (for example
    from the grid oracle); it must have been evaluated at (x, 1/rho_hat).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    if point is None:
        point = moreau(problem, x, 1.0 / rho_hat, inner_tol)
    if point.zeta_hat is None:
        raise ValueError("Moreau point carries no certificate")
    x_hat = point.x_hat
    arg = alpha * rho_hat * x - alpha * point.zeta_hat + (1.0 - alpha * rho_hat) * x_hat
    return float(np.linalg.norm(x_hat - problem.regularizer.prox(arg, alpha)))
