import math

import numpy as np
import pytest

from app.core import classify, pricing, reliability
from app.core.distributions import combinators
from app.core.errors import MissingDensityError, NoFiniteMaximizerError
from app.models.model_pydantic import Certificate


# --- Fixed points and p1 ---

def test_fixed_points(pareto, uniform01, config):
    scan = pricing.find_fixed_points(pareto(3.0), config)
    assert scan.points == [pytest.approx(0.75, abs=1e-9)]
    assert scan.rays == []
    assert pricing.find_fixed_points(uniform01, config).points == [pytest.approx(1.0 / 3.0, abs=1e-8)]


def test_pareto_two_has_a_ray_of_fixed_points(pareto, config):
    """m(p) = p for every p >= 1."""
    scan = pricing.find_fixed_points(pareto(2.0), config)
    assert scan.points == []
    assert len(scan.rays) == 1
    start, end = scan.rays[0]
    assert start == pytest.approx(1.0, abs=1e-6)
    assert end == math.inf
    assert scan.open_horizon


def test_p1(pareto, uniform01, config):
    assert pricing.compute_p1(uniform01, config) == pytest.approx(1.0 / 3.0, abs=1e-8)
    assert pricing.compute_p1(pareto(3.0), config) == pytest.approx(0.75, abs=1e-9)
    assert pricing.compute_p1(pareto(2.0), config) == math.inf
    assert pricing.compute_p1(pareto(1.5), config) == math.inf
    assert pricing.compute_p1(pareto(1.5), config, limit_c=2.0) == math.inf


# --- Linear demand ---

def test_pareto_optimum_is_certified_weakly(pareto, config):
    solution = pricing.solve(pareto(3.0), config)
    assert solution.optimal_price == pytest.approx(0.75, abs=1e-9)
    assert solution.optimal_revenue == pytest.approx(0.5625)
    assert solution.unimodality_certificate is Certificate.DGMRD_WEAK_SAFE
    assert solution.p1 == pytest.approx(0.75, abs=1e-9)


def test_uniform_optimum(uniform01, config):
    solution = pricing.solve(uniform01, config)
    assert solution.optimal_price == pytest.approx(1.0 / 3.0, abs=1e-8)
    assert solution.optimal_revenue == pytest.approx(2.0 / 27.0)
    assert solution.unimodality_certificate is Certificate.DGMRD_STRICT
    assert solution.elasticity_at_optimum == pytest.approx(1.0)
    assert solution.require_optimum() == solution.optimal_price


def test_exponential_optimum(exponential1, config):
    solution = pricing.solve(exponential1, config)
    assert solution.optimal_price == pytest.approx(1.0, abs=1e-9)
    assert solution.optimal_revenue == pytest.approx(math.exp(-1.0))
    assert solution.unimodality_certificate is Certificate.DGMRD_STRICT


def test_quarter_weight_mixture_optimum(two_block_mixture, config):
    solution = pricing.solve(two_block_mixture(0.25), config)
    assert solution.optimal_price == pytest.approx(5.0 / 3.0, abs=1e-8)
    assert solution.optimal_revenue == pytest.approx(2.3148148148, rel=1e-9)
    assert solution.unimodality_certificate is Certificate.DGMRD_STRICT


def test_three_quarter_weight_mixture_is_not_certified(two_block_mixture, config):
    solution = pricing.solve(two_block_mixture(0.75), config)
    assert solution.unimodality_certificate is Certificate.NOT_CERTIFIED
    assert "GMRD not decreasing" in solution.certificate_reason
    assert solution.optimal_price == pytest.approx(1.0, abs=1e-6)


def test_pareto_two_revenue_plateau(pareto, config):
    solution = pricing.solve(pareto(2.0), config)
    assert solution.unimodality_certificate is Certificate.NOT_CERTIFIED
    assert solution.p1 == math.inf
    assert solution.optimal_revenue == pytest.approx(1.0)
    assert solution.optimal_price == pytest.approx(1.0, abs=1e-5)


def test_heavy_tail_has_no_finite_maximizer(pareto, config):
    solution = pricing.solve(pareto(1.5), config)
    assert solution.optimal_price is None
    assert solution.unimodality_certificate is Certificate.NOT_CERTIFIED
    assert "no-finite-maximizer" in solution.certificate_reason
    assert solution.to_json_dict()["optimal_price"] == "none"
    with pytest.raises(NoFiniteMaximizerError):
        solution.require_optimum()


def test_solution_json(uniform01, config):
    payload = pricing.solve(uniform01, config).to_json_dict()
    assert payload["certificate"] == "dgmrd-strict"
    assert payload["rays"] == []
    assert payload["p1"] == pytest.approx(1.0 / 3.0, abs=1e-9)


# --- Single unit ---

def test_single_unit_uniform(uniform01, config):
    solution = pricing.solve_single_unit(uniform01, config)
    assert solution.certificate is Certificate.IGFR
    assert solution.roots == [pytest.approx(0.5, abs=1e-8)]
    assert solution.optimal_price == pytest.approx(0.5, abs=1e-8)
    assert solution.optimal_revenue == pytest.approx(0.25)
    assert solution.gfr_at_optimum == pytest.approx(1.0)


def test_single_unit_exponential(exponential1, config):
    solution = pricing.solve_single_unit(exponential1, config)
    assert solution.optimal_price == pytest.approx(1.0, abs=1e-9)
    assert solution.certificate is Certificate.IGFR


def test_single_unit_needs_density(loglogistic_sum, config):
    with pytest.raises(MissingDensityError):
        pricing.solve_single_unit(loglogistic_sum, config)


# --- Optimality checks ---

@pytest.mark.parametrize("k", [2.5, 3.0, 4.0])
def test_pareto_optimum_follows_tail_index(pareto, config, k):
    solution = pricing.solve(pareto(k), config)
    assert solution.unimodality_certificate is not Certificate.NOT_CERTIFIED
    assert solution.optimal_price == pytest.approx(k / (2.0 * (k - 1.0)), rel=1e-6)


def test_certified_optimum_beats_the_verification_grid(corpus_member, config):
    name, dist = corpus_member
    solution = pricing.solve(dist, config)
    if solution.unimodality_certificate is Certificate.NOT_CERTIFIED:
        pytest.skip(f"{name} has no certificate")
    grid = reliability.price_grid(dist, config.verify_grid_points)
    best = max(reliability.expected_revenue(dist, float(p)) for p in grid)
    assert best <= solution.optimal_revenue * (1.0 + 1e-7), name


def test_optimality_violation(uniform01, config):
    assert pricing.optimality_violation(uniform01, 1.0 / 3.0, config) is None
    gain = pricing.optimality_violation(uniform01, 0.5, config)
    assert gain == pytest.approx(2.0 / 27.0 - 1.0 / 16.0, rel=1e-4)


@pytest.mark.parametrize("factor", [0.5, 2.0])
@pytest.mark.parametrize("name", ["uniform", "exponential", "pareto-3", "mixture-25"])
def test_optimal_price_scales_with_demand(uniform01, exponential1, pareto, two_block_mixture, config, name, factor):
    dist = {
        "uniform": uniform01,
        "exponential": exponential1,
        "pareto-3": pareto(3.0),
        "mixture-25": two_block_mixture(0.25),
    }[name]
    base = pricing.solve(dist, config).optimal_price
    scaled = pricing.solve(combinators.scale(dist, factor), config).optimal_price
    assert scaled == pytest.approx(factor * base, rel=1e-6)


def test_finite_p1_means_finite_second_moment(corpus_member, config):
    name, dist = corpus_member
    solution = pricing.solve(dist, config)
    if math.isfinite(solution.p1):
        assert math.isfinite(classify.moment(dist, 2.0, config=config)), name


def test_fixed_points_have_unit_elasticity(corpus_member, config):
    name, dist = corpus_member
    scan = pricing.find_fixed_points(dist, config)
    for p in scan.points:
        assert reliability.elasticity(dist, p) == pytest.approx(1.0, abs=1e-6), (name, p)


def test_fixed_point_scan_grid_is_sorted(exponential1, config):
    scan = pricing.find_fixed_points(exponential1, config)
    assert np.all(np.diff(scan.grid) > 0)
