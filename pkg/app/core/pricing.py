"""The seller's pricing problem for linear demand (α − p)₊.

The first-order condition reads p = m(p). A unique fixed point is certified
as the revenue maximizer when the GMRD is decreasing and p₁ is finite; rays of
fixed points (intervals where F̄(p)p² is constant) block the certificate.
"""

import math
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from app.core import classify as classify_module
from app.core import reliability
from app.core.distributions.base import DemandDistribution
from app.core.errors import DemandModelError, MissingDensityError
from app.core.numerics import HORIZON_SURVIVAL, bisect_predicate, config_tolerances, find_root, merge_grid, price_points
from app.logging.logging_config import pricing_logger
from app.logging.logging_decorator import log_function_call
from app.models.model_pydantic import (
    Certificate,
    ClassificationReport,
    NumericConfig,
    PricingSolution,
    SingleUnitSolution,
)

RAY_MIN_POINTS = 3
# Smallest scanned price, relative to E α
SCAN_FLOOR = 1e-6
RISING_TOL = 1e-12


class FixedPoints(NamedTuple):
    points: List[float]
    rays: List[Tuple[float, float]]
    grid: np.ndarray
    phi: np.ndarray
    # the scan stopped at a numerical horizon of an unbounded support
    open_horizon: bool


def _phi(dist: DemandDistribution, p: float) -> float:
    return reliability.mrd(dist, p) - p


def _scan_grid(dist: DemandDistribution, config: NumericConfig) -> Tuple[np.ndarray, bool]:
    """Scan prices from a small fraction of E α up to a horizon where ℓ < 1."""
    base = reliability.price_grid(dist, config.grid_points)
    hi = float(base[-1])
    extra = []
    open_horizon = False
    if dist.bounded:
        gap = dist.support_upper - hi
        extra = [dist.support_upper - gap * 2.0 ** -j for j in range(1, classify_module.BOUNDED_TAIL_STEPS + 1)]
    else:
        threshold = 1.0 - config.mono_slack
        for _ in range(config.tail_probe_max_doublings):
            try:
                still_inelastic = reliability.gmrd(dist, hi) >= threshold
            except DemandModelError:
                break
            if not still_inelastic:
                break
            if dist.survival(2.0 * hi) < HORIZON_SURVIVAL:
                open_horizon = True
                break
            hi *= 2.0
            extra.append(hi)
        else:
            open_horizon = True
    lo = SCAN_FLOOR * dist.mean
    log_part = price_points(lo, hi, config.grid_points, log=True)
    grid = merge_grid(
        log_part, base, extra, dist.breakpoints, [dist.support_lower],
        lower=0.0, upper=dist.support_upper,
    )
    return grid, open_horizon


def _near_zero(value: float, p: float, tol: float) -> bool:
    return abs(value) <= tol * max(1.0, p)


def _ray_bound(fn: Callable[[float], float], inside: float, outside: float, tol: float) -> float:
    return bisect_predicate(lambda x: _near_zero(fn(x), x, tol), inside, outside)


@log_function_call(pricing_logger)
@config_tolerances
def find_fixed_points(dist: DemandDistribution, config: Optional[NumericConfig] = None) -> FixedPoints:
    """Roots of φ(p) = m(p) − p and the rays on which φ vanishes identically."""
    config = config or NumericConfig()
    grid, open_horizon = _scan_grid(dist, config)
    prices, values = [], []
    for p in grid:
        try:
            values.append(_phi(dist, float(p)))
        except DemandModelError as e:
            pricing_logger.debug(f"skipping p={p:.6g} in fixed-point scan: {e}")
            continue
        prices.append(float(p))
    grid = np.asarray(prices)
    phi = np.asarray(values)
    fn = lambda x: _phi(dist, x)  # noqa: E731
    tol = config.mono_slack

    flat = np.array([_near_zero(v, p, tol) for v, p in zip(phi, grid)])
    on_ray = np.zeros(len(grid), dtype=bool)
    rays = []
    i = 0
    while i < len(grid):
        if not flat[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and flat[j + 1]:
            j += 1
        if j - i + 1 >= RAY_MIN_POINTS:
            on_ray[i : j + 1] = True
            start = grid[i] if i == 0 else _ray_bound(fn, grid[i], grid[i - 1], tol)
            if j == len(grid) - 1:
                end = math.inf if open_horizon else float(grid[j])
            else:
                end = _ray_bound(fn, grid[j], grid[j + 1], tol)
            rays.append((float(start), float(end)))
        i = j + 1

    points = []
    for k in range(len(grid) - 1):
        if on_ray[k] or on_ray[k + 1]:
            continue
        a, b = grid[k], grid[k + 1]
        if phi[k] == 0.0:
            points.append(float(a))
        elif phi[k] * phi[k + 1] < 0:
            points.append(find_root(fn, a, b, xtol=config.root_tol * 1e-3 * max(1.0, a)))
    if len(grid) and phi[-1] == 0.0 and not on_ray[-1]:
        points.append(float(grid[-1]))
    points = sorted(set(points))
    pricing_logger.info(f"{dist.label}: fixed points {points}, rays {rays}")
    return FixedPoints(points=points, rays=rays, grid=grid, phi=phi, open_horizon=open_horizon)


@config_tolerances
def compute_p1(
    dist: DemandDistribution,
    config: Optional[NumericConfig] = None,
    scan: Optional[FixedPoints] = None,
    limit_c: Optional[float] = None,
) -> float:
    """p₁ = sup{p : ℓ(p) ≥ 1}, or +inf when ℓ stays at or above 1 to the horizon."""
    config = config or NumericConfig()
    if isinstance(limit_c, (int, float)) and limit_c >= 1:
        return math.inf
    scan = scan or find_fixed_points(dist, config)
    grid, phi = scan.grid, scan.phi
    tol = config.mono_slack
    if scan.open_horizon and phi[-1] >= -tol * max(1.0, grid[-1]):
        return math.inf
    inelastic = np.nonzero(phi >= 0)[0]
    if inelastic.size == 0:
        return 0.0
    k = int(inelastic[-1])
    if k == len(grid) - 1:
        return float(grid[k])
    fn = lambda x: _phi(dist, x)  # noqa: E731
    if phi[k] == 0.0:
        return float(grid[k])
    return find_root(fn, grid[k], grid[k + 1], xtol=config.root_tol * 1e-3 * max(1.0, grid[k]))


def _refine_argmax(fn: Callable[[float], float], grid: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    k = int(np.nanargmax(values))
    best_p, best_v = float(grid[k]), float(values[k])
    if 0 < k < len(grid) - 1:
        res = minimize_scalar(
            lambda x: -fn(x), bounds=(grid[k - 1], grid[k + 1]), method="bounded",
            options={"xatol": 1e-12 * max(1.0, grid[k])},
        )
        if res.success and -res.fun > best_v:
            best_p, best_v = float(res.x), float(-res.fun)
    return best_p, best_v


def _revenue_grid(fn: Callable[[float], float], grid: np.ndarray) -> np.ndarray:
    out = []
    for p in grid:
        try:
            out.append(fn(float(p)))
        except DemandModelError:
            out.append(np.nan)
    return np.asarray(out, dtype=float)


def _rising_at_horizon(values: np.ndarray) -> bool:
    tail = values[~np.isnan(values)][-2:]
    return len(tail) == 2 and tail[1] > tail[0] * (1.0 + RISING_TOL)


def optimality_violation(dist: DemandDistribution, price: float, config: NumericConfig) -> Optional[float]:
    """Largest revenue gain over ``price`` found on the verification grid, or None if there is none.

    Gains within quadrature noise of R(price) are ignored.
    """
    grid = reliability.price_grid(dist, config.verify_grid_points)
    values = _revenue_grid(lambda p: reliability.expected_revenue(dist, p), grid)
    target = reliability.expected_revenue(dist, price)
    slack = 10.0 * config.quad_rel_tol * max(abs(target), config.quad_abs_tol)
    gain = float(np.nanmax(values)) - target
    return gain if gain > slack else None


@log_function_call(pricing_logger)
@config_tolerances
def solve(
    dist: DemandDistribution,
    config: Optional[NumericConfig] = None,
    report: Optional[ClassificationReport] = None,
) -> PricingSolution:
    """Optimal price for linear demand, with a unimodality certificate when one applies."""
    config = config or NumericConfig()
    report = report or classify_module.classify(dist, config)
    scan = find_fixed_points(dist, config)
    c = report.gmrd_limit_c if isinstance(report.gmrd_limit_c, float) else None
    p1 = compute_p1(dist, config, scan=scan, limit_c=c)

    problems = []
    if not report.dgmrd.holds:
        problems.append(f"GMRD not decreasing ({report.dgmrd.verdict.value})")
    if not p1 < math.inf:
        problems.append("p1 is infinite")
    if scan.rays:
        problems.append(f"fixed-point ray on {scan.rays}")
    if len(scan.points) != 1:
        problems.append(f"{len(scan.points)} isolated fixed points")

    revenue = lambda p: reliability.expected_revenue(dist, p)  # noqa: E731
    if not problems:
        p_star = scan.points[0]
        if report.dgmrd_strict:
            certificate, reason = Certificate.DGMRD_STRICT, "GMRD strictly decreasing and p1 finite"
        else:
            certificate, reason = Certificate.DGMRD_WEAK_SAFE, "GMRD weakly decreasing, p1 finite, no fixed-point ray"
        optimal_price, optimal_revenue = p_star, revenue(p_star)
        gain = optimality_violation(dist, p_star, config)
        if gain is not None:
            pricing_logger.warning(f"{dist.label}: fixed point {p_star:.6g} beaten by {gain:.3g} on the verification grid")
            certificate = Certificate.NOT_CERTIFIED
            reason = f"{reason}, but revenue grid beats the fixed point by {gain:.3g}"
            optimal_price, optimal_revenue = _best_candidate(dist, scan, revenue)
    else:
        certificate, reason = Certificate.NOT_CERTIFIED, "; ".join(problems)
        optimal_price, optimal_revenue = _best_candidate(dist, scan, revenue)
        if optimal_price is None:
            reason += "; no-finite-maximizer: revenue still rising at the numerical horizon"

    if dist.cdf(0.0) > 0:
        reason += "; F(0)=0 not confirmed"
    elasticity = None
    if optimal_price is not None and 0 < optimal_price < dist.support_upper:
        elasticity = reliability.elasticity(dist, optimal_price)
    pricing_logger.info(f"{dist.label}: {certificate.value} optimum {optimal_price} ({reason})")
    return PricingSolution(
        fixed_points=scan.points,
        rays=scan.rays,
        p1=p1,
        unimodality_certificate=certificate,
        certificate_reason=reason,
        optimal_price=optimal_price,
        optimal_revenue=optimal_revenue,
        elasticity_at_optimum=elasticity,
    )


def _best_candidate(dist: DemandDistribution, scan: FixedPoints, revenue) -> Tuple[Optional[float], Optional[float]]:
    """Revenue-maximizing price among fixed points, ray ends, grid ends and the grid argmax."""
    values = _revenue_grid(revenue, scan.grid)
    if scan.open_horizon and _rising_at_horizon(values):
        best = float(np.nanmax(values))
        if values[~np.isnan(values)][-1] >= best:
            return None, None
    candidates = list(scan.points)
    candidates += [end for ray in scan.rays for end in ray if math.isfinite(end)]
    candidates += [float(scan.grid[0]), float(scan.grid[-1])]
    scored = [(revenue(p), p) for p in candidates]
    scored.append(tuple(reversed(_refine_argmax(revenue, scan.grid, values))))
    best_value = max(v for v, _ in scored)
    # ties go to the lowest price, e.g. the start of a fixed-point ray
    best_price = min(p for v, p in scored if v >= best_value * (1.0 - RISING_TOL))
    return best_price, revenue(best_price)


@log_function_call(pricing_logger)
@config_tolerances
def solve_single_unit(
    dist: DemandDistribution,
    config: Optional[NumericConfig] = None,
    report: Optional[ClassificationReport] = None,
) -> SingleUnitSolution:
    """Reservation-price model: maximize p·F̄(p) through g(p) = 1."""
    if not dist.has_density:
        raise MissingDensityError(f"single-unit pricing needs a density; {dist.label} has none")
    config = config or NumericConfig()
    report = report or classify_module.classify(dist, config)
    base, grid = classify_module.classification_grid(dist, config)
    grid = merge_grid(price_points(SCAN_FLOOR * dist.mean, base[0], 64, log=True), grid,
                      lower=0.0, upper=dist.support_upper)

    def psi(p):
        return reliability.gfr(dist, p) - 1.0

    prices, values = [], []
    for p in grid:
        try:
            values.append(psi(float(p)))
            prices.append(float(p))
        except DemandModelError:
            continue
    prices, values = np.asarray(prices), np.asarray(values)
    roots = []
    for k in range(len(prices) - 1):
        if values[k] == 0.0:
            roots.append(float(prices[k]))
        elif values[k] * values[k + 1] < 0:
            roots.append(find_root(psi, prices[k], prices[k + 1], xtol=config.root_tol * 1e-3 * max(1.0, prices[k])))
    roots = sorted(set(roots))

    revenue = lambda p: reliability.single_unit_revenue(dist, p)  # noqa: E731
    exceeds_one = bool(np.any(values > 0))
    if report.igfr.holds and exceeds_one and len(roots) == 1:
        certificate, reason = Certificate.IGFR, "GFR nondecreasing and crosses 1"
        optimal = roots[0]
    else:
        certificate = Certificate.NOT_CERTIFIED
        reason = f"igfr {report.igfr.verdict.value}, {len(roots)} roots of g(p) = 1"
        rev = _revenue_grid(revenue, prices)
        if not dist.bounded and _rising_at_horizon(rev) and rev[-1] >= np.nanmax(rev):
            return SingleUnitSolution(
                roots=roots, certificate=certificate,
                certificate_reason=reason + "; no-finite-maximizer",
            )
        scored = [(revenue(p), p) for p in roots + [float(prices[0]), float(prices[-1])]]
        scored.append(tuple(reversed(_refine_argmax(revenue, prices, rev))))
        optimal = max(scored)[1]
    return SingleUnitSolution(
        roots=roots,
        certificate=certificate,
        certificate_reason=reason,
        optimal_price=optimal,
        optimal_revenue=revenue(optimal),
        gfr_at_optimum=reliability.gfr(dist, optimal),
    )
