"""Monte-Carlo cross-checks of the analytic surplus, revenue and MRD.

Draws are split into ``mc_workers`` partitions, each with its own generator
spawned from the caller's seed, and merged in partition order. A given
(seed, n, mc_workers) therefore always gives the same estimate bit for bit.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence

import numpy as np

from app.core import reliability
from app.core.distributions.base import DemandDistribution
from app.core.errors import DomainError, InvalidParameterError, StepTooSmallError
from app.core.numerics import config_tolerances
from app.logging.logging_config import oracle_logger
from app.logging.logging_decorator import log_function_call
from app.models.model_pydantic import CheckResult, McEstimate, NumericConfig

MIN_SAMPLES = 1000
SINGLE_CHECK_Z = 4.0
SUITE_Z = 3.0
LEMMA1_STEP = 1e-5
LEMMA1_TOL = 1e-4
# fewer significant digits than this between S(p-h) and S(p+h) means cancellation
CANCELLATION_ULPS = 100.0
SUITE_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)


def draw_partitioned(dist: DemandDistribution, n: int, seed: int, workers: int) -> np.ndarray:
    """n draws from ``workers`` independent streams, concatenated in stream order."""
    parts = max(1, min(workers, n))
    sizes = [len(chunk) for chunk in np.array_split(np.arange(n), parts)]
    streams = np.random.SeedSequence(seed).spawn(parts)

    def run(job):
        stream, size = job
        return dist.draw(np.random.default_rng(stream), size)

    with ThreadPoolExecutor(max_workers=parts) as pool:
        chunks = list(pool.map(run, zip(streams, sizes)))
    return np.concatenate(chunks)


def _check_n(n: int):
    if n < MIN_SAMPLES:
        raise InvalidParameterError(f"Monte-Carlo checks need n >= {MIN_SAMPLES}, got {n}")


def estimate_surplus(
    dist: DemandDistribution,
    p: float,
    n: int,
    seed: int,
    config: Optional[NumericConfig] = None,
) -> McEstimate:
    """Sample mean of (α − p)₊ with its standard error."""
    _check_n(n)
    config = config or NumericConfig()
    if p >= dist.support_upper:
        return McEstimate(value=0.0, stderr=0.0, n=n, seed=seed)
    excess = np.maximum(draw_partitioned(dist, n, seed, config.mc_workers) - p, 0.0)
    return McEstimate(
        value=float(excess.mean()),
        stderr=float(excess.std(ddof=1) / math.sqrt(n)),
        n=n,
        seed=seed,
    )


def estimate_mrd(
    dist: DemandDistribution,
    p: float,
    n: int,
    seed: int,
    config: Optional[NumericConfig] = None,
) -> McEstimate:
    """Mean of α − p over the draws with α > p."""
    _check_n(n)
    config = config or NumericConfig()
    sample = draw_partitioned(dist, n, seed, config.mc_workers)
    excess = sample[sample > p] - p
    if excess.size < 2:
        raise DomainError(f"only {excess.size} of {n} draws exceed p={p:g}")
    return McEstimate(
        value=float(excess.mean()),
        stderr=float(excess.std(ddof=1) / math.sqrt(excess.size)),
        n=n,
        seed=seed,
    )


def _z_score(estimate: float, analytic: float, stderr: float) -> float:
    if stderr > 0:
        return (estimate - analytic) / stderr
    return 0.0 if math.isclose(estimate, analytic, rel_tol=1e-12, abs_tol=1e-300) else math.inf


@log_function_call(oracle_logger)
@config_tolerances
def validate_revenue(
    dist: DemandDistribution,
    p: float,
    n: int,
    seed: int,
    config: Optional[NumericConfig] = None,
) -> CheckResult:
    """p times the Monte-Carlo surplus against the analytic revenue; passes at |z| <= 4."""
    estimate = estimate_surplus(dist, p, n, seed, config)
    analytic = reliability.expected_revenue(dist, p)
    mc, stderr = p * estimate.value, p * estimate.stderr
    z = _z_score(mc, analytic, stderr)
    passed = abs(z) <= SINGLE_CHECK_Z
    if not passed:
        oracle_logger.warning(f"revenue check failed for {dist.label} at p={p:g}: z={z:.3g}")
    return CheckResult(check="revenue", p=p, analytic=analytic, mc=mc, stderr=stderr, z=z, passed=passed)


@log_function_call(oracle_logger)
@config_tolerances
def validate_mrd(
    dist: DemandDistribution,
    p: float,
    n: int,
    seed: int,
    config: Optional[NumericConfig] = None,
) -> CheckResult:
    """Mean excess of the draws above p against the analytic MRD; passes at |z| <= 4."""
    estimate = estimate_mrd(dist, p, n, seed, config)
    analytic = reliability.mrd(dist, p)
    z = _z_score(estimate.value, analytic, estimate.stderr)
    passed = abs(z) <= SINGLE_CHECK_Z
    if not passed:
        oracle_logger.warning(f"MRD check failed for {dist.label} at p={p:g}: z={z:.3g}")
    return CheckResult(
        check="mrd", p=p, analytic=analytic, mc=estimate.value, stderr=estimate.stderr, z=z, passed=passed
    )


def finite_difference_lemma1(dist: DemandDistribution, p: float, h: float = LEMMA1_STEP) -> float:
    """|[S(p+h) − S(p−h)]/(2h) + F̄(p)| for the analytic surplus S(p) = E(α − p)₊."""
    if not (h > 0 and p - h > 0):
        raise DomainError(f"central difference needs 0 < p - h, got p={p:g}, h={h:g}")
    if dist.bounded and not p + h < dist.support_upper:
        raise DomainError(f"central difference needs p + h < H={dist.support_upper:g}, got p={p:g}")
    upper = dist.tail_integral(p + h)
    lower = dist.tail_integral(p - h)
    diff = upper - lower
    if abs(diff) < CANCELLATION_ULPS * np.finfo(float).eps * max(abs(upper), abs(lower)):
        raise StepTooSmallError(f"S(p±h) agree to working precision at p={p:g}, h={h:g}")
    return abs(diff / (2.0 * h) + dist.survival(p))


def lemma1_check(dist: DemandDistribution, p: float, h: float = LEMMA1_STEP) -> CheckResult:
    residual = finite_difference_lemma1(dist, p, h)
    return CheckResult(
        check="lemma1",
        p=p,
        analytic=-dist.survival(p),
        residual=residual,
        passed=residual <= LEMMA1_TOL,
    )


def suite_prices(dist: DemandDistribution, levels: Sequence[float] = SUITE_LEVELS) -> List[float]:
    return [dist.quantile(q) for q in levels]


@log_function_call(oracle_logger)
@config_tolerances
def validation_suite(
    dist: DemandDistribution,
    n: int,
    seed: int,
    config: Optional[NumericConfig] = None,
    prices: Optional[Iterable[float]] = None,
) -> List[CheckResult]:
    """Revenue, MRD and surplus-slope checks at each price; the seed is advanced per price."""
    prices = suite_prices(dist) if prices is None else list(prices)
    results = []
    for i, p in enumerate(prices):
        results.append(validate_revenue(dist, p, n, seed + i, config))
        results.append(validate_mrd(dist, p, n, seed + i, config))
        results.append(lemma1_check(dist, p))
    return results


def coverage(results: Iterable[CheckResult], bound: float = SUITE_Z) -> float:
    """Share of z-scores within ±bound among the checks that carry one."""
    zs = [r.z for r in results if r.z is not None]
    if not zs:
        return 1.0
    return sum(abs(z) <= bound for z in zs) / len(zs)
