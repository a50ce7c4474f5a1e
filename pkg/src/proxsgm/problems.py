"""Benchmark problem generators.

Four families, each returning an immutable :class:`CompositeProblem` with
certified constants:

* ``phase_retrieval``  -- g(x) = mean_i |<a_i, x>^2 - b_i|, ball constraint.
* ``robust_regression`` -- g(x) = mean_i |<a_i, x> - b_i|, box constraint.
* ``smooth_ls``        -- g(x) = ||Ax - b||^2 / (2m) with additive gradient
                          noise, box constraint.
* ``toy1d``            -- one-dimensional sanity problems ("abs", "absquad").

Generators accept either an integer seed or a ``numpy.random.Generator``;
regeneration from the same ``(family, m, d, seed)`` is bit-identical, which
is what makes the string ids below ("family:m:d:seed") reproducible
addresses.
"""

from __future__ import annotations

import numpy as np

from .core import CompositeProblem, ProblemMeta, StochasticOracle, StochasticSample
from .prox import ball_indicator, box_indicator, zero_regularizer

Array = np.ndarray

# Fixed per-coordinate noise level for smooth_ls instances built from a
# string id (the id schema carries no real-valued slot).
SMOOTH_LS_DEFAULT_SIGMA = 0.1


def _coerce_seed(rng_or_seed) -> tuple[np.random.Generator, int]:
    if isinstance(rng_or_seed, np.random.Generator):
        # no portable way to read a seed back out; tag as -1
        return rng_or_seed, -1
    seed = int(rng_or_seed)
    return np.random.default_rng(seed), seed


def _phase_retrieval_data(m: int, d: int, rng: np.random.Generator):
    A = rng.standard_normal((m, d))
    x_sharp = rng.standard_normal(d)
    x_sharp /= np.linalg.norm(x_sharp)
    b = (A @ x_sharp) ** 2
    return A, x_sharp, b


def _spectral_start(m: int, d: int, seed: int) -> Array:
    """Leading eigenvector of the measurement-weighted covariance.

    Classical initializer for quadratic measurements: the top eigenvector
    of (1/m) sum_i b_i a_i a_i^T correlates with the planted direction,
    and sqrt(mean b) estimates its norm.  The sign is fixed by the largest
    entry so the start is deterministic.
    """
    A, _, b = _phase_retrieval_data(m, d, np.random.default_rng(seed))
    cov = (A.T * b) @ A / m
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    v = v * np.sign(v[np.argmax(np.abs(v))])
    return v * min(float(np.sqrt(b.mean())), 2.0)


def make_phase_retrieval(m: int, d: int, rng_or_seed) -> CompositeProblem:
    """Real phase retrieval with a planted unit signal.

    Rows a_i are standard Gaussian, b_i = <a_i, x_sharp>^2, and
    g(x) = mean_i |<a_i, x>^2 - b_i|.  The constraint is the Euclidean ball
    of radius 2, which contains the signal.  Certified constants:
    rho = 2 * max_i ||a_i||^2 and the oracle norm bound
    L = 2 * radius * max_i ||a_i||^2.
    """
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    rng, seed = _coerce_seed(rng_or_seed)
    A, x_sharp, b = _phase_retrieval_data(m, d, rng)
    radius = 2.0
    row_sq = np.sum(A**2, axis=1)
    rho = 2.0 * float(np.max(row_sq))
    L = 2.0 * radius * float(np.max(row_sq))

    def g_value(x: Array) -> float:
        return float(np.mean(np.abs((A @ x) ** 2 - b)))

    def g_value_batch(pts: Array) -> Array:
        inner = np.asarray(pts, dtype=float) @ A.T
        return np.mean(np.abs(inner**2 - b), axis=-1)

    def g_full_subgradient(x: Array) -> Array:
        inner = A @ x
        signs = np.sign(inner**2 - b)
        return (2.0 / m) * (A.T @ (signs * inner))

    def sample(x: Array, rng: np.random.Generator) -> StochasticSample:
        i = int(rng.integers(m))
        inner = float(A[i] @ x)
        return StochasticSample(
            vector=2.0 * np.sign(inner**2 - b[i]) * inner * A[i], draw_id=i
        )

    def sample_batch(x: Array, n: int, rng: np.random.Generator) -> Array:
        idx = rng.integers(m, size=n)
        inner = A[idx] @ x
        coef = 2.0 * np.sign(inner**2 - b[idx]) * inner
        return coef[:, None] * A[idx]

    return CompositeProblem(
        dim=d,
        g_oracle=StochasticOracle(
            sample=sample, unbiased_mean=g_full_subgradient, sample_batch=sample_batch
        ),
        regularizer=ball_indicator(np.zeros(d), radius),
        rho=rho,
        g_value=g_value,
        g_full_subgradient=g_full_subgradient,
        lipschitz_L=L,
        domain_diameter=2.0 * radius,
        g_value_batch=g_value_batch,
        planted_point=x_sharp,
        meta=ProblemMeta(family="phase_retrieval", m=m, d=d, seed=seed),
    )


def _robust_regression_data(
    rng: np.random.Generator, m: int, d: int, outlier_fraction: float
) -> tuple[Array, Array, Array]:
    A = rng.standard_normal((m, d))
    x_sharp = rng.uniform(-0.5, 0.5, size=d)
    b = A @ x_sharp
    n_out = int(np.ceil(outlier_fraction * m)) if outlier_fraction > 0 else 0
    if n_out:
        idx = rng.choice(m, size=n_out, replace=False)
        b[idx] += rng.normal(0.0, 10.0, size=n_out)
    return A, b, x_sharp


def make_robust_regression(
    m: int, d: int, rng_or_seed, outlier_fraction: float = 0.1
) -> CompositeProblem:
    """Least absolute deviations with sparse outliers in the responses.

    g(x) = mean_i |<a_i, x> - b_i| with Gaussian rows, b = A x_sharp plus
    large noise on a ceil(outlier_fraction * m) subset.  Convex (rho = 0),
    L = max_i ||a_i||, box constraint [-2, 2]^d with the signal interior.
    """
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    if not 0.0 <= outlier_fraction < 1.0:
        raise ValueError("outlier_fraction must lie in [0, 1)")
    rng, seed = _coerce_seed(rng_or_seed)
    A, b, x_sharp = _robust_regression_data(rng, m, d, outlier_fraction)
    L = float(np.max(np.linalg.norm(A, axis=1)))

    def g_value(x: Array) -> float:
        return float(np.mean(np.abs(A @ x - b)))

    def g_value_batch(pts: Array) -> Array:
        resid = np.asarray(pts, dtype=float) @ A.T - b
        return np.mean(np.abs(resid), axis=-1)

    def g_full_subgradient(x: Array) -> Array:
        return A.T @ np.sign(A @ x - b) / m

    def sample(x: Array, rng: np.random.Generator) -> StochasticSample:
        i = int(rng.integers(m))
        return StochasticSample(vector=np.sign(float(A[i] @ x) - b[i]) * A[i], draw_id=i)

    def sample_batch(x: Array, n: int, rng: np.random.Generator) -> Array:
        idx = rng.integers(m, size=n)
        signs = np.sign(A[idx] @ x - b[idx])
        return signs[:, None] * A[idx]

    lo, hi = -2.0 * np.ones(d), 2.0 * np.ones(d)
    return CompositeProblem(
        dim=d,
        g_oracle=StochasticOracle(
            sample=sample, unbiased_mean=g_full_subgradient, sample_batch=sample_batch
        ),
        regularizer=box_indicator(lo, hi),
        rho=0.0,
        g_value=g_value,
        g_full_subgradient=g_full_subgradient,
        lipschitz_L=L,
        domain_diameter=float(np.linalg.norm(hi - lo)),
        g_value_batch=g_value_batch,
        planted_point=x_sharp,
        meta=ProblemMeta(
            family="robust_regression",
            m=m,
            d=d,
            seed=seed,
            detail=f"outliers={outlier_fraction}",
        ),
    )


def exact_min_1d_robust_regression(problem: CompositeProblem) -> tuple[float, float]:
    """Exact minimizer and value of a one-dimensional robust regression.

    mean_i |a_i x - b_i| restricted to the box is piecewise linear; the
    minimum sits at a breakpoint b_i / a_i or a box endpoint, so scanning
    the breakpoints is exact.  Needs a problem built from a recorded seed.
    """
    meta = problem.meta
    if meta is None or meta.family != "robust_regression" or problem.dim != 1:
        raise ValueError("exact minimum only for 1-D robust regression")
    if meta.seed < 0:
        raise ValueError("problem was built from a raw generator; seed unknown")
    frac = float(meta.detail.split("=", 1)[1]) if "=" in meta.detail else 0.1
    A, b, _ = _robust_regression_data(
        np.random.default_rng(meta.seed), meta.m, meta.d, frac
    )
    r = problem.regularizer
    lo, hi = float(r.lo[0]), float(r.hi[0])
    candidates = [lo, hi]
    a = A[:, 0]
    nz = np.abs(a) > 0
    candidates.extend(np.clip(b[nz] / a[nz], lo, hi).tolist())
    vals = [problem.g_value(np.array([c])) for c in candidates]
    k = int(np.argmin(vals))
    return candidates[k], vals[k]


def make_smooth_ls_noisy(m: int, d: int, sigma: float, rng_or_seed) -> CompositeProblem:
    """Least squares with an exact-gradient-plus-Gaussian-noise oracle.

    g(x) = ||Ax - b||^2 / (2m); the oracle returns grad g(x) + sigma * w with
    w standard normal, so the certified variance constant is sigma * sqrt(d).
    rho = lambda_max(A^T A) / m is the gradient Lipschitz constant.
    """
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng, seed = _coerce_seed(rng_or_seed)
    A = rng.standard_normal((m, d))
    x_sharp = rng.uniform(-0.5, 0.5, size=d)
    b = A @ x_sharp
    rho = float(np.linalg.eigvalsh(A.T @ A / m)[-1])

    def g_value(x: Array) -> float:
        resid = A @ x - b
        return float(resid @ resid) / (2.0 * m)

    def g_value_batch(pts: Array) -> Array:
        resid = np.asarray(pts, dtype=float) @ A.T - b
        return np.sum(resid**2, axis=-1) / (2.0 * m)

    def g_gradient(x: Array) -> Array:
        return A.T @ (A @ x - b) / m

    def sample(x: Array, rng: np.random.Generator) -> StochasticSample:
        return StochasticSample(
            vector=g_gradient(x) + sigma * rng.standard_normal(d), draw_id=0
        )

    def sample_batch(x: Array, n: int, rng: np.random.Generator) -> Array:
        return g_gradient(x) + sigma * rng.standard_normal((n, d))

    lo, hi = -2.0 * np.ones(d), 2.0 * np.ones(d)
    return CompositeProblem(
        dim=d,
        g_oracle=StochasticOracle(
            sample=sample, unbiased_mean=g_gradient, sample_batch=sample_batch
        ),
        regularizer=box_indicator(lo, hi),
        rho=rho,
        g_value=g_value,
        g_full_subgradient=g_gradient,
        sigma=sigma * float(np.sqrt(d)),
        domain_diameter=float(np.linalg.norm(hi - lo)),
        smooth=True,
        g_value_batch=g_value_batch,
        planted_point=x_sharp,
        meta=ProblemMeta(family="smooth_ls", m=m, d=d, seed=seed),
    )


def make_toy1d(kind: str) -> CompositeProblem:
    """One-dimensional test problems with known structure.

    ``"abs"``:     g(x) = |x|, r == 0, convex, L = 1.
    ``"absquad"``: g(x) = |x^2 - 1| on [-2, 2], rho = 2, L = 4.

    Both expose the exact subdifferential interval for stationarity checks
    and use a deterministic oracle (the subgradient selection itself).
    """
    if kind == "abs":

        def g_value(x: Array) -> float:
            return float(np.abs(np.atleast_1d(np.asarray(x, float))[0]))

        def g_sub(x: Array) -> Array:
            return np.sign(np.atleast_1d(np.asarray(x, float))[:1])

        def g_batch(pts: Array) -> Array:
            return np.abs(np.asarray(pts, float))[..., 0]

        def interval(x: Array) -> tuple[float, float]:
            v = float(np.atleast_1d(x)[0])
            if v > 0:
                return 1.0, 1.0
            if v < 0:
                return -1.0, -1.0
            return -1.0, 1.0

        def sample(x: Array, rng: np.random.Generator) -> StochasticSample:
            return StochasticSample(vector=g_sub(x), draw_id=0)

        def sample_batch(x: Array, n: int, rng: np.random.Generator) -> Array:
            return np.tile(g_sub(x), (n, 1))

        return CompositeProblem(
            dim=1,
            g_oracle=StochasticOracle(
                sample=sample, unbiased_mean=g_sub, sample_batch=sample_batch
            ),
            regularizer=zero_regularizer(),
            rho=0.0,
            g_value=g_value,
            g_full_subgradient=g_sub,
            lipschitz_L=1.0,
            g_value_batch=g_batch,
            g_subdiff_interval=interval,
            meta=ProblemMeta(family="toy1d", m=0, d=1, seed=0, detail="abs"),
        )

    if kind == "absquad":

        def g_value(x: Array) -> float:
            v = float(np.atleast_1d(np.asarray(x, float))[0])
            return abs(v * v - 1.0)

        def g_sub(x: Array) -> Array:
            v = float(np.atleast_1d(np.asarray(x, float))[0])
            return np.array([2.0 * v * np.sign(v * v - 1.0)])

        def g_batch(pts: Array) -> Array:
            v = np.asarray(pts, float)[..., 0]
            return np.abs(v * v - 1.0)

        def interval(x: Array) -> tuple[float, float]:
            v = float(np.atleast_1d(x)[0])
            if abs(v * v - 1.0) > 0:
                s = 2.0 * v * np.sign(v * v - 1.0)
                return s, s
            return -2.0 * abs(v), 2.0 * abs(v)

        def sample(x: Array, rng: np.random.Generator) -> StochasticSample:
            return StochasticSample(vector=g_sub(x), draw_id=0)

        def sample_batch(x: Array, n: int, rng: np.random.Generator) -> Array:
            return np.tile(g_sub(x), (n, 1))

        return CompositeProblem(
            dim=1,
            g_oracle=StochasticOracle(
                sample=sample, unbiased_mean=g_sub, sample_batch=sample_batch
            ),
            regularizer=box_indicator(-2.0, 2.0),
            rho=2.0,
            g_value=g_value,
            g_full_subgradient=g_sub,
            lipschitz_L=4.0,
            domain_diameter=4.0,
            g_value_batch=g_batch,
            g_subdiff_interval=interval,
            meta=ProblemMeta(family="toy1d", m=0, d=1, seed=0, detail="absquad"),
        )

    raise ValueError(f"unknown toy kind {kind!r}")


def problem_from_id(problem_id: str) -> CompositeProblem:
    """Build a problem from its string address.

    ``phase_retrieval:m:d:seed``, ``robust_regression:m:d:seed`` and
    ``smooth_ls:m:d:seed`` regenerate data deterministically from the seed;
    ``toy1d:abs`` and ``toy1d:absquad`` take no size arguments.
    """
    parts = problem_id.strip().split(":")
    family = parts[0]
    if family == "toy1d":
        if len(parts) != 2:
            raise ValueError("toy1d ids look like 'toy1d:abs' or 'toy1d:absquad'")
        return make_toy1d(parts[1])
    if len(parts) != 4:
        raise ValueError(f"malformed problem id {problem_id!r}; expected family:m:d:seed")
    m, d, seed = (int(p) for p in parts[1:])
    if family == "phase_retrieval":
        return make_phase_retrieval(m, d, seed)
    if family == "robust_regression":
        return make_robust_regression(m, d, seed)
    if family == "smooth_ls":
        return make_smooth_ls_noisy(m, d, SMOOTH_LS_DEFAULT_SIGMA, seed)
    raise ValueError(f"unknown problem family {family!r}")


def default_x0(problem: CompositeProblem) -> Array:
    """Documented starting point per family.

    phase_retrieval: spectral start recomputed from the data seed (falls
    back to the first basis vector when the problem was built from a live
    generator and the data cannot be regenerated).  robust_regression:
    midpoint of the upper box corner.  smooth_ls: the origin.  toy1d: 0.5
    for "abs", 1.8 for "absquad".
    """
    meta = problem.meta
    fam = meta.family if meta else ""
    d = problem.dim
    if fam == "phase_retrieval":
        if meta.seed >= 0:
            return _spectral_start(meta.m, meta.d, meta.seed)
        e = np.zeros(d)
        e[0] = 1.0
        return e
    if fam == "robust_regression":
        return 0.5 * np.broadcast_to(np.asarray(problem.regularizer.hi, float), (d,)).copy()
    if fam == "smooth_ls":
        return np.zeros(d)
    if fam == "toy1d":
        return np.array([0.5]) if meta.detail == "abs" else np.array([1.8])
    return problem.regularizer.project_domain(np.zeros(d))
