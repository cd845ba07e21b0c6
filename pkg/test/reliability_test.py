import io
import math

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import quad

from app.core import numerics, reliability
from app.core.classify import classify_monotone
from app.core.distributions.families import make_family
from app.core.errors import BeyondSupportError, DomainError, MissingDensityError
from app.core.numerics import integrate_tail
from app.models.model_pydantic import NumericConfig, Shape


def test_mrd_examples(pareto, uniform01):
    assert reliability.mrd(pareto(3.0), 2.0) == pytest.approx(1.0)
    assert reliability.mrd(uniform01, 0.5) == pytest.approx(0.25)
    assert reliability.mrd(make_family("exponential", {"rate": 2.0}), 5.0) == pytest.approx(0.5)


def test_mrd_below_support_uses_tail_integral(pareto):
    """Below L the residual mean is (L − p) + m(L)."""
    assert reliability.mrd(pareto(3.0), 0.25) == pytest.approx(0.75 + 0.5)


def test_mrd_conventions(uniform01):
    assert reliability.mrd(uniform01, 1.0) == 0.0
    assert reliability.mrd(uniform01, 7.0) == 0.0
    with pytest.raises(DomainError):
        reliability.mrd(uniform01, -0.1)
    with pytest.raises(BeyondSupportError):
        # F̄ underflows to zero this far out
        reliability.mrd(make_family("gamma", {"shape": 2.0}), 800.0)


@pytest.mark.parametrize("p", [1.0, 2.0, 17.5, 1e4])
def test_pareto_gmrd_is_constant(pareto, p):
    assert reliability.gmrd(pareto(3.0), p) == pytest.approx(0.5)
    assert reliability.elasticity(pareto(3.0), p) == pytest.approx(2.0)


def test_gmrd_examples(uniform01):
    assert reliability.gmrd(uniform01, 0.5) == pytest.approx(0.5)
    lomax = make_family("lomax", {"A": 0.0, "B": 1.0, "k": 3.0})
    assert reliability.gmrd(lomax, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        reliability.gmrd(uniform01, 0.0)
    with pytest.raises(DomainError):
        reliability.gmrd(uniform01, 1.0)


def test_hazard_and_gfr(pareto, uniform01):
    expo2 = make_family("exponential", {"rate": 2.0})
    assert reliability.hazard(expo2, 1.0) == pytest.approx(2.0)
    assert reliability.hazard(pareto(3.0), 2.0) == pytest.approx(1.5)
    assert reliability.hazard(uniform01, 0.5) == pytest.approx(2.0)
    assert reliability.gfr(pareto(3.0), 5.0) == pytest.approx(3.0)
    assert reliability.gfr(make_family("exponential", {"rate": 1.0}), 2.0) == pytest.approx(2.0)
    assert reliability.gfr(uniform01, 0.5) == pytest.approx(1.0)


def test_hazard_errors(uniform01, loglogistic_sum):
    with pytest.raises(DomainError):
        reliability.hazard(uniform01, 1.0)
    with pytest.raises(MissingDensityError):
        reliability.hazard(loglogistic_sum, 1.0)


def test_hazard_by_density_ratio(birnbaum_saunders):
    p = 40.0
    expected = birnbaum_saunders.density(p) / birnbaum_saunders.survival(p)
    assert reliability.hazard(birnbaum_saunders, p) == pytest.approx(expected)


def test_unit_elasticity_at_uniform_optimum(uniform01):
    assert reliability.elasticity(uniform01, 1.0 / 3.0) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [0.2, 1.0, 3.5])
def test_elasticity_is_inverse_gmrd(two_block_mixture, p):
    dist = two_block_mixture(0.25)
    assert reliability.elasticity(dist, p) * reliability.gmrd(dist, p) == pytest.approx(1.0)


@pytest.mark.parametrize("k", [1.5, 2.0, 3.0, 5.0])
@pytest.mark.parametrize("p", [0.0, 0.3, 0.9])
def test_pareto_revenue_below_support(pareto, k, p):
    assert reliability.expected_revenue(pareto(k), p) == pytest.approx(p * (k / (k - 1.0) - p))


@pytest.mark.parametrize("p", [1.0, 2.0, 5.0, 1e3])
def test_pareto_two_revenue_is_flat(pareto, p):
    assert reliability.expected_revenue(pareto(2.0), p) == pytest.approx(1.0)


def test_revenue_examples(uniform01):
    assert reliability.expected_revenue(uniform01, 1.0 / 3.0) == pytest.approx(2.0 / 27.0)
    assert reliability.expected_revenue(uniform01, 1.0) == 0.0
    assert reliability.expected_revenue(uniform01, 2.0) == 0.0
    assert reliability.single_unit_revenue(uniform01, 0.5) == pytest.approx(0.25)


def test_revenue_identity(two_block_mixture):
    """R = p·m·F̄ wherever F̄ > 0."""
    dist = two_block_mixture(0.75)
    for p in (0.5, 1.2, 2.5, 3.7):
        expected = p * reliability.mrd(dist, p) * dist.survival(p)
        assert reliability.expected_revenue(dist, p) == pytest.approx(expected)


@pytest.mark.parametrize("p", [0.5, 2.0, 9.0])
def test_mrd_derivative_of_exponential_vanishes(exponential1, p):
    assert reliability.mrd_derivative(exponential1, p) == pytest.approx(0.0, abs=1e-12)


def test_mrd_derivative_examples(pareto, uniform01):
    assert reliability.mrd_derivative(pareto(3.0), 2.0) == pytest.approx(0.5)
    assert reliability.mrd_derivative(uniform01, 0.5) == pytest.approx(-0.5)


def test_mrd_derivative_matches_finite_difference(birnbaum_saunders):
    p, h = 20.0, 0.1
    slope = (reliability.mrd(birnbaum_saunders, p + h) - reliability.mrd(birnbaum_saunders, p - h)) / (2 * h)
    assert reliability.mrd_derivative(birnbaum_saunders, p) == pytest.approx(slope, rel=1e-3, abs=1e-5)


# --- Curves ---

def test_pareto_curves_have_constant_gmrd(pareto, config):
    result = reliability.curves(pareto(3.0), config)
    assert len(result.grid) == config.grid_points
    assert min(result.grid) >= 1.0
    assert all(v == pytest.approx(0.5) for v in result.l_values)
    assert all(v == pytest.approx(3.0) for v in result.g_values)


def test_uniform_revenue_peaks_near_one_third(uniform01, config):
    result = reliability.curves(uniform01, config)
    grid = np.asarray(result.grid)
    best = grid[int(np.argmax(result.r_values))]
    nearest = grid[int(np.argmin(np.abs(grid - 1.0 / 3.0)))]
    assert best == pytest.approx(nearest)


def test_birnbaum_saunders_curve_shapes(birnbaum_saunders, config):
    """GFR rises and falls while the elasticity only rises."""
    result = reliability.curves(birnbaum_saunders, config)
    slack = config.mono_slack
    assert classify_monotone(result.g_values, slack, result.grid).shape is Shape.NON_MONOTONE
    assert classify_monotone(result.eps_values, slack, result.grid).nondecreasing


def test_curves_without_density(loglogistic_sum, config):
    result = reliability.curves(loglogistic_sum, config.with_overrides(["grid_points=64"]))
    assert result.h_values is None and result.g_values is None
    assert all(v is not None for v in result.m_values)


def test_curves_csv(uniform01, config):
    result = reliability.curves(uniform01, config.with_overrides(["grid_points=32"]))
    text = reliability.write_curves_csv(result)
    assert text.splitlines()[0] == "p,m,l,h,g,eps,R"
    frame = pd.read_csv(io.StringIO(text))
    assert len(frame) == len(result.grid)
    assert frame["m"].to_numpy() == pytest.approx((1.0 - frame["p"].to_numpy()) / 2.0)

    only_l = reliability.write_curves_csv(result, functions=["l"])
    assert only_l.splitlines()[0] == "p,l"
    with pytest.raises(DomainError):
        reliability.write_curves_csv(result, functions=["q"])


def test_curves_csv_leaves_missing_values_empty(loglogistic_sum, config, tmp_path):
    result = reliability.curves(loglogistic_sum, config.with_overrides(["grid_points=16"]))
    target = tmp_path / "curves.csv"
    reliability.write_curves_csv(result, str(target), functions=["m", "h"])
    lines = target.read_text().splitlines()
    assert lines[0] == "p,m,h"
    assert all(line.endswith(",") for line in lines[1:])


def test_price_grid_spacing(uniform01, exponential1):
    linear = reliability.price_grid(uniform01, 64)
    assert np.allclose(np.diff(linear), np.diff(linear)[0])
    logarithmic = reliability.price_grid(exponential1, 64)
    ratios = logarithmic[1:] / logarithmic[:-1]
    assert np.allclose(ratios, ratios[0])
    assert math.isclose(logarithmic[0], exponential1.quantile(0.001), rel_tol=1e-12)


# --- Identities over the reference corpus ---

def test_survival_is_nonincreasing(corpus_member):
    name, dist = corpus_member
    values = [dist.survival(float(p)) for p in reliability.price_grid(dist, 512)]
    assert np.max(np.diff(values)) <= 1e-12, name


def test_quantile_round_trip(corpus_member):
    name, dist = corpus_member
    for q in np.linspace(0.02, 0.98, 20):
        p = dist.quantile(q)
        assert dist.quantile(dist.cdf(p)) == pytest.approx(p, rel=1e-8), (name, q)


def test_density_integrates_to_survival(corpus_member):
    name, dist = corpus_member
    for q in np.linspace(0.05, 0.95, 10):
        p = dist.quantile(q)
        mass = integrate_tail(dist.density, p, dist.support_upper, points=dist.breakpoints)
        assert mass == pytest.approx(dist.survival(p), rel=1e-6, abs=1e-9), (name, q)


def test_tail_integral_is_mrd_times_survival(corpus_member):
    name, dist = corpus_member
    for q in (0.1, 0.5, 0.9):
        p = dist.quantile(q)
        tail = integrate_tail(dist.survival, p, dist.support_upper, points=dist.breakpoints,
                              rel_tol=1e-10, abs_tol=1e-14)
        assert tail == pytest.approx(reliability.mrd(dist, p) * dist.survival(p), rel=1e-7), (name, q)


def test_mrd_derivative_matches_central_difference(corpus_member):
    name, dist = corpus_member
    h = 1e-5
    for q in (0.2, 0.4, 0.6, 0.8):
        p = dist.quantile(q)
        slope = (reliability.mrd(dist, p + h) - reliability.mrd(dist, p - h)) / (2.0 * h)
        assert slope == pytest.approx(reliability.mrd_derivative(dist, p), abs=1e-4), (name, q)


def test_mrd_near_zero_is_the_mean(corpus_member):
    name, dist = corpus_member
    assert reliability.mrd(dist, 1e-9) == pytest.approx(dist.mean, rel=1e-6), name


def test_gmrd_blows_up_near_zero(corpus_member):
    name, dist = corpus_member
    assert reliability.gmrd(dist, dist.mean * 1e-4) > 1e3, name


def test_uniform_mrd_vanishes_at_the_top(uniform01):
    assert reliability.mrd(uniform01, 1.0 - 1e-9) == pytest.approx(5e-10, rel=1e-4)


# --- Quadrature tolerances ---

def test_config_tolerances_reach_tail_quadrature(birnbaum_saunders, monkeypatch):
    seen = []

    def recording_quad(*args, **kwargs):
        seen.append(kwargs["epsrel"])
        return quad(*args, **kwargs)

    monkeypatch.setattr(numerics, "quad", recording_quad)
    reliability.curves(birnbaum_saunders, NumericConfig(quad_rel_tol=1e-6), grid=[50.0, 100.0])
    assert seen
    assert set(seen) == {1e-6}


def test_tolerances_restored_after_use():
    config = NumericConfig(quad_abs_tol=1e-12, quad_rel_tol=1e-9)
    before = numerics.quad_tolerances()
    with config.quadrature():
        assert numerics.quad_tolerances() == (1e-12, 1e-9)
    assert numerics.quad_tolerances() == before
