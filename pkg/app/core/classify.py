"""Numerical class membership (IFR, DMRD, IGFR, DGMRD) and tail limits.

A verdict of ``holds`` means no violation beyond the monotonicity slack was
found on the grid, never a proof. Inclusions checked after classification:
IFR implies IGFR and DMRD, each of which implies DGMRD.
"""

import math
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core import reliability
from app.core.distributions.base import DemandDistribution
from app.core.errors import (
    DemandModelError,
    DivergentIntegralError,
    DomainError,
    InvalidParameterError,
    QuadratureError,
    TooFewPointsError,
)
from app.core.numerics import HORIZON_SURVIVAL, config_tolerances, integrate_tail, merge_grid, relative_spread
from app.logging.logging_config import classify_logger
from app.logging.logging_decorator import log_function_call
from app.models.model_pydantic import (
    NOT_CONVERGED,
    ClassificationReport,
    ClassVerdict,
    LimitValue,
    MonotoneResult,
    NumericConfig,
    Shape,
    Verdict,
)

MIN_POINTS = 16
LIMIT_RELATION_TOL = 1e-3
# Consecutive near-flat GMRD steps that break strict decrease
FLAT_RUN = 3
# Geometric trend thresholds for limits 0 and +inf
SHRINKING_RATIO = 0.6
GROWING_RATIO = 1.6
BOUNDED_TAIL_STEPS = 12
BOUNDARY_REL_TOL = 1e-6


def classify_monotone(
    values: Sequence[Optional[float]],
    slack: float,
    grid: Optional[Sequence[float]] = None,
) -> MonotoneResult:
    """Shape of ``values`` along ``grid`` with the largest rise and fall as witnesses.

    A rise (fall) counts only when it exceeds ``slack * max|values|``. Missing
    or non-finite samples are skipped.
    """
    if grid is None:
        grid = range(len(values))
    pairs = [(float(p), float(v)) for p, v in zip(grid, values) if v is not None and math.isfinite(v)]
    if len(pairs) < MIN_POINTS:
        raise TooFewPointsError(f"need at least {MIN_POINTS} finite samples, got {len(pairs)}")
    xs = np.array([p for p, _ in pairs])
    vs = np.array([v for _, v in pairs])
    threshold = slack * float(np.max(np.abs(vs)))

    run_min_idx = np.zeros(len(vs), dtype=int)
    run_max_idx = np.zeros(len(vs), dtype=int)
    for i in range(1, len(vs)):
        run_min_idx[i] = i if vs[i] < vs[run_min_idx[i - 1]] else run_min_idx[i - 1]
        run_max_idx[i] = i if vs[i] > vs[run_max_idx[i - 1]] else run_max_idx[i - 1]
    rises = vs - vs[run_min_idx]
    falls = vs[run_max_idx] - vs

    result = {}
    j = int(np.argmax(rises))
    if rises[j] > threshold:
        i = run_min_idx[j]
        result["rise"] = (xs[i], xs[j])
        result["rise_values"] = (vs[i], vs[j])
    j = int(np.argmax(falls))
    if falls[j] > threshold:
        i = run_max_idx[j]
        result["fall"] = (xs[i], xs[j])
        result["fall_values"] = (vs[i], vs[j])

    if "rise" in result and "fall" in result:
        shape = Shape.NON_MONOTONE
    elif "rise" in result:
        shape = Shape.NONDECREASING
    elif "fall" in result:
        shape = Shape.NONINCREASING
    else:
        shape = Shape.CONSTANT
    return MonotoneResult(shape=shape, **result)


def strictly_decreasing(values: Sequence[Optional[float]], slack: float) -> bool:
    """False when ``FLAT_RUN`` consecutive steps move by at most ``slack`` relative."""
    vs = [v for v in values if v is not None and math.isfinite(v)]
    run = 0
    for prev, cur in zip(vs, vs[1:]):
        if cur > prev:
            return False
        if prev - cur <= slack * max(abs(prev), abs(cur)):
            run += 1
            if run >= FLAT_RUN:
                return False
        else:
            run = 0
    return True


def classification_grid(dist: DemandDistribution, config: NumericConfig) -> Tuple[np.ndarray, np.ndarray]:
    """The curve grid and the same grid extended into the tail.

    Unbounded support: doublings of the 99.9% quantile while F̄ stays above the
    horizon. Bounded support: points halving the distance to H. Kinks of the
    distribution inside the support are always grid points.
    """
    base = reliability.price_grid(dist, config.grid_points)
    top = float(base[-1])
    extra = []
    if dist.bounded:
        gap = dist.support_upper - top
        extra = [dist.support_upper - gap * 2.0 ** -j for j in range(1, BOUNDED_TAIL_STEPS + 1)]
    else:
        p = top
        for _ in range(config.tail_probe_max_doublings):
            p *= 2.0
            if dist.survival(p) < HORIZON_SURVIVAL:
                break
            extra.append(p)
    kinks = [b for b in dist.breakpoints if b <= top]
    base = merge_grid(base, kinks, lower=0.0, upper=dist.support_upper)
    full = merge_grid(base, extra, lower=0.0, upper=dist.support_upper)
    return base, full


def _sample(fn: Callable, dist: DemandDistribution, grid: Iterable[float]) -> list:
    out = []
    for p in grid:
        try:
            value = fn(dist, float(p))
        except DemandModelError:
            value = None
        out.append(value if value is not None and math.isfinite(value) else None)
    return out


def _verdict(values, grid, slack, want: str) -> ClassVerdict:
    try:
        shape = classify_monotone(values, slack, grid)
    except TooFewPointsError as e:
        return ClassVerdict(verdict=Verdict.UNKNOWN, reason=str(e))
    if want == "nonincreasing":
        if shape.nonincreasing:
            return ClassVerdict(verdict=Verdict.HOLDS)
        return ClassVerdict(verdict=Verdict.FAILS, witness=shape.rise, values=shape.rise_values)
    if shape.nondecreasing:
        return ClassVerdict(verdict=Verdict.HOLDS)
    return ClassVerdict(verdict=Verdict.FAILS, witness=shape.fall, values=shape.fall_values)


@config_tolerances
def estimate_limit(
    fn: Callable[[DemandDistribution, float], float],
    dist: DemandDistribution,
    config: Optional[NumericConfig] = None,
    *,
    bounded_value: float = 0.0,
) -> LimitValue:
    """Limit of ``fn`` as p → ∞, probed at the median times 2^j.

    Converged when the last four values agree within ``tail_agree_tol``
    relative; a steady geometric shrink or growth reports 0 or +inf. With a
    finite upper support the limit is ``bounded_value`` by convention.
    """
    config = config or NumericConfig()
    if dist.bounded:
        return bounded_value
    p = dist.quantile(0.5)
    values = []
    for _ in range(config.tail_probe_max_doublings + 1):
        if dist.survival(p) < HORIZON_SURVIVAL:
            break
        try:
            value = fn(dist, p)
        except DemandModelError as e:
            classify_logger.debug(f"limit probe stopped at p={p:.6g}: {e}")
            break
        if not math.isfinite(value):
            break
        values.append(value)
        spread = relative_spread(values[-4:]) if len(values) >= 4 else None
        if spread is not None and spread <= config.tail_agree_tol:
            return values[-1]
        p *= 2.0
    if len(values) >= 4 and all(v > 0 for v in values[-4:]):
        ratios = [b / a for a, b in zip(values[-4:], values[-3:])]
        if all(r <= SHRINKING_RATIO for r in ratios):
            return 0.0
        if all(r >= GROWING_RATIO for r in ratios):
            return math.inf
    classify_logger.info(f"{getattr(fn, '__name__', 'limit')} of {dist.label} did not converge")
    return NOT_CONVERGED


def _moment_finite_from_limit(order: float, c: float) -> bool:
    if c == 0:
        return True
    bound = 1.0 + 1.0 / c
    # the boundary order 1 + 1/c itself is infinite
    return order < bound * (1.0 - BOUNDARY_REL_TOL)


def moment(
    dist: DemandDistribution,
    order: float,
    report: Optional[ClassificationReport] = None,
    config: Optional[NumericConfig] = None,
) -> float:
    """E α^n, or +inf when the DGMRD tail limit says it diverges."""
    if not (math.isfinite(order) and order > 0):
        raise InvalidParameterError(f"moment order must be positive, got {order}")
    config = config or NumericConfig()
    if report is None:
        report = classify(dist, config)
    c = report.gmrd_limit_c
    predicted = None
    if report.dgmrd.holds and c != NOT_CONVERGED:
        predicted = _moment_finite_from_limit(order, float(c))
        if not predicted:
            return math.inf

    def integrand(u):
        return order * u ** (order - 1.0) * dist.survival(u)

    def log_integrand(v):
        # u = anchor·e^v turns power tails into exponential decay
        if v > 700.0:
            return 0.0
        u = anchor * math.exp(v)
        return order * u ** order * dist.survival(u)

    tol = {"abs_tol": config.quad_abs_tol, "rel_tol": config.quad_rel_tol}
    try:
        if dist.bounded:
            value = integrate_tail(integrand, 0.0, dist.support_upper, points=dist.breakpoints, **tol)
        else:
            anchor = max(dist.quantile(0.5), *(b for b in dist.breakpoints if math.isfinite(b)), 1e-12)
            value = integrate_tail(integrand, 0.0, anchor, points=dist.breakpoints, **tol)
            value += integrate_tail(log_integrand, 0.0, math.inf, **tol)
    except QuadratureError as e:
        if predicted:
            raise
        raise DivergentIntegralError(f"moment of order {order:g} is numerically divergent: {e}") from e
    return value


class LimitRelation(NamedTuple):
    passed: bool
    residual: float


def check_limit_relation(report: ClassificationReport) -> LimitRelation:
    """Compare c against 1/(κ − 1), with 1/(∞ − 1) read as 0."""
    c, kappa = report.gmrd_limit_c, report.gfr_limit_kappa
    if c == NOT_CONVERGED or kappa == NOT_CONVERGED:
        raise DomainError("limit relation needs both tail limits to converge")
    if not kappa > 1:
        raise DomainError(f"limit relation needs kappa > 1, got {kappa}")
    expected = 0.0 if math.isinf(kappa) else 1.0 / (kappa - 1.0)
    residual = abs(float(c) - expected)
    return LimitRelation(passed=residual <= LIMIT_RELATION_TOL, residual=residual)


def _log_convexity(grid, m_values, slack) -> ClassVerdict:
    pts = [(p, m) for p, m in zip(grid, m_values) if m is not None and m > 0]
    if len(pts) < MIN_POINTS + 1:
        return ClassVerdict(verdict=Verdict.UNKNOWN, reason="too few positive MRD samples")
    ps = np.array([p for p, _ in pts])
    logs = np.log([m for _, m in pts])
    slopes = np.diff(logs) / np.diff(ps)
    mids = 0.5 * (ps[1:] + ps[:-1])
    return _verdict(list(slopes), list(mids), slack, want="nondecreasing")


def _lattice_consistent(report: ClassificationReport) -> bool:
    implications = [
        (report.ifr, report.igfr),
        (report.ifr, report.dmrd),
        (report.igfr, report.dgmrd),
        (report.dmrd, report.dgmrd),
    ]
    return not any(a.holds and b.fails for a, b in implications)


@log_function_call(classify_logger)
@config_tolerances
def classify(dist: DemandDistribution, config: Optional[NumericConfig] = None) -> ClassificationReport:
    config = config or NumericConfig()
    slack = config.mono_slack
    base, grid = classification_grid(dist, config)

    m_values = _sample(reliability.mrd, dist, grid)
    l_values = [m / p if m is not None else None for m, p in zip(m_values, grid)]
    dmrd = _verdict(m_values, grid, slack, want="nonincreasing")
    dgmrd = _verdict(l_values, grid, slack, want="nonincreasing")

    if dist.has_density:
        h_values = _sample(reliability.hazard, dist, grid)
        g_values = [h * p if h is not None else None for h, p in zip(h_values, grid)]
        ifr = _verdict(h_values, grid, slack, want="nondecreasing")
        igfr = _verdict(g_values, grid, slack, want="nondecreasing")
    else:
        reason = f"{dist.label} has no density"
        ifr = ClassVerdict(verdict=Verdict.UNKNOWN, reason=reason)
        igfr = ClassVerdict(verdict=Verdict.UNKNOWN, reason=reason)

    base_l = [v for v, p in zip(l_values, grid) if p <= base[-1]]
    dgmrd_strict = dgmrd.holds and strictly_decreasing(base_l, slack)

    c = estimate_limit(reliability.gmrd, dist, config, bounded_value=0.0)
    if dist.has_density:
        kappa = estimate_limit(reliability.gfr, dist, config, bounded_value=math.inf)
    else:
        kappa = NOT_CONVERGED

    second = Verdict.UNKNOWN
    if dgmrd.holds and c != NOT_CONVERGED:
        second = Verdict.HOLDS if _moment_finite_from_limit(2.0, float(c)) else Verdict.FAILS

    base_m = [m for m, p in zip(m_values, grid) if p <= base[-1]]
    log_convex = _log_convexity([p for p in grid if p <= base[-1]], base_m, slack)
    implication = "inapplicable"
    if dgmrd.holds and log_convex.holds and igfr.verdict is not Verdict.UNKNOWN:
        implication = "consistent" if igfr.holds else "violated"

    report = ClassificationReport(
        ifr=ifr,
        dmrd=dmrd,
        igfr=igfr,
        dgmrd=dgmrd,
        dgmrd_strict=dgmrd_strict,
        gmrd_limit_c=c,
        gfr_limit_kappa=kappa,
        second_moment_finite=second,
        tolerance_used=slack,
        mrd_log_convex=log_convex,
        log_convex_implication=implication,
    )
    lattice = _lattice_consistent(report)
    if not lattice:
        classify_logger.warning(f"class inclusions violated for {dist.label}: {report.to_json_dict()}")
    residual = None
    try:
        residual = check_limit_relation(report).residual
    except DomainError:
        pass
    return report.model_copy(update={"lattice_consistent": lattice, "limit_relation_residual": residual})


def mrl_order_holds(
    dist: DemandDistribution,
    factor: float,
    grid: Sequence[float],
    slack: float = 1e-7,
) -> bool:
    """m(x) <= λ·m(x/λ) at every grid point, for λ >= 1."""
    lam = float(factor)
    if lam < 1:
        raise InvalidParameterError(f"scale factor must be at least 1, got {factor}")
    for x in grid:
        try:
            lhs = reliability.mrd(dist, float(x))
            rhs = lam * reliability.mrd(dist, float(x) / lam)
        except DemandModelError:
            continue
        if lhs > rhs + slack * max(1.0, abs(rhs)):
            classify_logger.debug(f"scale order fails at x={x:.6g}: {lhs:.10g} > {rhs:.10g}")
            return False
    return True
