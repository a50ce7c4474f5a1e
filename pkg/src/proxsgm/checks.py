"""Invariant suites behind the CLI `check` subcommand.

Each suite returns CheckResult records; the CLI prints one line per record
and exits nonzero when anything failed.  The suites are also imported by
the tests, so the CLI gate and the pytest gate certify the same facts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .moreau import moreau_prox
from .problems import default_x0, problem_from_id
from .prox import (
    ProxFriendly,
    ball_indicator,
    box_indicator,
    l1_regularizer,
    quadratic_regularizer,
    zero_regularizer,
)
from .core import (
    check_hypomonotonicity,
    check_oracle_unbiasedness,
    check_second_moment,
    check_weak_convexity,
)
from .solver import StepSchedule, run_psgm, sample_tstar

Array = np.ndarray

CERTIFICATION_IDS = (
    "phase_retrieval:50:10:0",
    "robust_regression:40:2:1",
    "smooth_ls:60:5:2",
    "toy1d:abs",
    "toy1d:absquad",
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _prox_zoo(d: int) -> list[tuple[str, ProxFriendly]]:
    return [
        ("zero", zero_regularizer()),
        ("box", box_indicator(-1.5, 2.0)),
        ("ball", ball_indicator(np.zeros(d), 1.3)),
        ("l1", l1_regularizer(0.7)),
        ("quadratic", quadratic_regularizer(0.4, np.full(d, 0.2))),
    ]


def check_prox_nonexpansive(
    n_pairs: int = 10_000, d: int = 4, seed: int = 0
) -> list[CheckResult]:
    """||prox(x) - prox(y)|| <= ||x - y|| up to 1e-12 slack, all kinds."""
    rng = np.random.default_rng(seed)
    out = []
    for name, reg in _prox_zoo(d):
        xs = 3.0 * rng.standard_normal((n_pairs, d))
        ys = 3.0 * rng.standard_normal((n_pairs, d))
        worst = -math.inf
        for alpha in (1e-3, 1.0, 1e3):
            for x, y in zip(xs, ys):
                lhs = float(np.linalg.norm(reg.prox(x, alpha) - reg.prox(y, alpha)))
                rhs = float(np.linalg.norm(x - y))
                worst = max(worst, lhs - rhs)
        out.append(
            CheckResult(
                name=f"prox_nonexpansive[{name}]",
                passed=worst <= 1e-12,
                detail=f"max overshoot {worst:.2e} over {n_pairs} pairs x 3 alphas",
            )
        )
    return out


def check_prox_optimality(
    n_points: int = 20, n_competitors: int = 1_000, d: int = 4, seed: int = 1
) -> list[CheckResult]:
    """prox minimizes r(u) + ||u - x||^2 / (2 alpha) among sampled feasible u."""
    rng = np.random.default_rng(seed)
    out = []
    for name, reg in _prox_zoo(d):
        worst = -math.inf
        for _ in range(n_points):
            x = 3.0 * rng.standard_normal(d)
            alpha = float(10.0 ** rng.uniform(-2, 2))
            p = reg.prox(x, alpha)
            fp = reg.value(p) + float((p - x) @ (p - x)) / (2 * alpha)
            comp = 2.0 * rng.standard_normal((n_competitors, d))
            for z in comp:
                z = reg.project_domain(z)
                fz = reg.value(z) + float((z - x) @ (z - x)) / (2 * alpha)
                worst = max(worst, fp - fz)
        out.append(
            CheckResult(
                name=f"prox_optimality[{name}]",
                passed=worst <= 1e-10,
                detail=f"max objective excess {worst:.2e}",
            )
        )
    return out


def check_certifications(
    n_pairs: int = 1_000, seed: int = 2
) -> list[CheckResult]:
    """Weak convexity / hypomonotonicity on every shipped benchmark family."""
    out = []
    for pid in CERTIFICATION_IDS:
        problem = problem_from_id(pid)
        radius = (problem.domain_diameter or 4.0) / 2.0
        wc = check_weak_convexity(problem, n_pairs, radius, np.random.default_rng(seed))
        hm = check_hypomonotonicity(
            problem, n_pairs, radius, np.random.default_rng(seed + 1)
        )
        out.append(
            CheckResult(
                name=f"weak_convexity[{pid}]",
                passed=not wc.violated,
                detail=f"max violation {wc.max_violation:.2e} (tol {wc.tolerance:.1e})",
            )
        )
        out.append(
            CheckResult(
                name=f"hypomonotonicity[{pid}]",
                passed=not hm.violated,
                detail=f"max violation {hm.max_violation:.2e} (tol {hm.tolerance:.1e})",
            )
        )
    return out


def check_oracles(seed: int = 3) -> list[CheckResult]:
    """Unbiasedness and second-moment certification per family."""
    out = []
    for pid in ("phase_retrieval:50:10:0", "robust_regression:40:2:1", "smooth_ls:60:5:2"):
        problem = problem_from_id(pid)
        x = default_x0(problem)
        ub = check_oracle_unbiasedness(problem, x, np.random.default_rng(seed))
        out.append(
            CheckResult(
                name=f"oracle_unbiased[{pid}]",
                passed=ub.passed,
                detail=f"{ub.n_passed}/{ub.n_repeats} repeats, worst ratio {ub.worst_ratio:.2f}",
            )
        )
        if problem.lipschitz_L is not None:
            sm = check_second_moment(problem, np.random.default_rng(seed + 1))
            out.append(
                CheckResult(
                    name=f"oracle_second_moment[{pid}]",
                    passed=sm.passed,
                    detail=f"{sm.n_passed}/{sm.n_repeats} points, worst ratio {sm.worst_ratio:.2f}",
                )
            )
    return out


def check_tstar_distribution(n_draws: int = 100_000, seed: int = 4) -> list[CheckResult]:
    """Sampled return index matches the step-weight law (chi-square p >= 0.01)."""
    out = []
    # constant schedule: uniform over 0..T
    T = 9
    rng = np.random.default_rng(seed)
    alphas = np.full(T + 1, 0.1)
    counts = np.bincount(
        [sample_tstar(alphas, rng) for _ in range(n_draws)], minlength=T + 1
    )
    p_uni = stats.chisquare(counts).pvalue
    out.append(
        CheckResult(
            name="tstar_uniform",
            passed=p_uni >= 0.01,
            detail=f"chi-square p={p_uni:.4f} over {n_draws} draws",
        )
    )
    # ramp schedule: probabilities proportional to the step sizes
    alphas = np.arange(1, 11, dtype=float)
    expected = alphas / alphas.sum() * n_draws
    counts = np.bincount(
        [sample_tstar(alphas, rng) for _ in range(n_draws)], minlength=10
    )
    p_ramp = stats.chisquare(counts, expected).pvalue
    out.append(
        CheckResult(
            name="tstar_ramp",
            passed=p_ramp >= 0.01,
            detail=f"chi-square p={p_ramp:.4f} over {n_draws} draws",
        )
    )
    return out


def check_determinism() -> list[CheckResult]:
    """Bit-identical reruns: data generation, trajectories, sweep CSV bytes."""
    out = []
    p1 = problem_from_id("phase_retrieval:30:6:7")
    p2 = problem_from_id("phase_retrieval:30:6:7")
    probe = np.linspace(-1, 1, 6)
    same_data = (
        p1.planted_point.tobytes() == p2.planted_point.tobytes()
        and p1.g_value(probe) == p2.g_value(probe)
        and p1.rho == p2.rho
    )
    out.append(CheckResult("regeneration_identical", same_data))

    x0 = default_x0(p1)
    sched = StepSchedule.constant(0.05, 200, rho_hat=2 * p1.rho)
    r1 = run_psgm(p1, x0, sched, np.random.default_rng([11, 200]))
    r2 = run_psgm(p2, x0, sched, np.random.default_rng([11, 200]))
    out.append(
        CheckResult(
            "trajectory_identical",
            r1.iterates.tobytes() == r2.iterates.tobytes()
            and r1.t_star == r2.t_star,
        )
    )

    import tempfile
    from pathlib import Path
    from .harness import ExperimentConfig, run_sweep

    with tempfile.TemporaryDirectory() as tmp:
        paths = [str(Path(tmp) / f"s{i}.csv") for i in (0, 1)]
        blobs = []
        for path in paths:
            cfg = ExperimentConfig(
                problem_id="toy1d:absquad",
                horizons=(50, 100),
                gamma=0.2,
                n_seeds=2,
                inner_tol=1e-8,
                output=path,
                workers=2,
            )
            run_sweep(cfg, clock=lambda: 0.0)
            blobs.append(Path(path).read_bytes())
    out.append(CheckResult("sweep_csv_identical", blobs[0] == blobs[1]))
    return out


def check_envelope_basics(seed: int = 5) -> list[CheckResult]:
    """Cheap envelope sanity: hand value, defining inequalities, gradient form."""
    out = []
    abs1 = problem_from_id("toy1d:abs")
    pt = moreau_prox(abs1, np.array([0.5]), 1.0, 1e-12)
    hand_ok = abs(pt.envelope_value - 0.125) <= 1e-10 and abs(pt.x_hat[0]) <= 1e-10
    out.append(
        CheckResult(
            "envelope_hand_value",
            hand_ok,
            f"value {pt.envelope_value:.12f}, minimizer {pt.x_hat[0]:.2e}",
        )
    )

    rng = np.random.default_rng(seed)
    worst = -math.inf
    for pid in ("toy1d:absquad", "phase_retrieval:20:4:3", "robust_regression:30:2:4"):
        problem = problem_from_id(pid)
        lam = 1.0 / (2 * problem.rho) if problem.rho > 0 else 0.5
        for _ in range(4):
            x = problem.regularizer.project_domain(rng.uniform(-1.5, 1.5, problem.dim))
            p = moreau_prox(problem, x, lam, 1e-9)
            grad_gap = float(
                np.linalg.norm(p.envelope_grad - (x - p.x_hat) / lam)
            )
            worst = max(
                worst,
                p.envelope_value - problem.phi(x),
                problem.phi(p.x_hat) - problem.phi(x),
                grad_gap,
            )
    out.append(
        CheckResult(
            "envelope_inequalities",
            worst <= 1e-9,
            f"max violation {worst:.2e} across sampled anchors",
        )
    )
    return out


def run_all_checks(progress=None) -> list[CheckResult]:
    """Execute every suite; optionally report (name, seconds) as suites finish."""
    suites = (
        check_prox_nonexpansive,
        check_prox_optimality,
        check_certifications,
        check_oracles,
        check_tstar_distribution,
        check_determinism,
        check_envelope_basics,
    )
    results: list[CheckResult] = []
    for suite in suites:
        start = time.perf_counter()
        results.extend(suite())
        if progress is not None:
            progress(suite.__name__, time.perf_counter() - start)
    return results
