import json

import pytest

from app.core.distributions import combinators
from app.core.distributions.families import make_family
from app.models.model_pydantic import NumericConfig
from app.schema.schema import build_distribution, parse_spec

# --- Pytest Fixtures ---

@pytest.fixture
def config():
    """Default numeric policy: 512-point grid, 1e-7 monotonicity slack."""
    return NumericConfig()


@pytest.fixture
def uniform01():
    return make_family("uniform", {"L": 0.0, "H": 1.0})


@pytest.fixture
def exponential1():
    return make_family("exponential", {"rate": 1.0})


@pytest.fixture
def pareto():
    """Factory fixture for pareto1(L=1, k)."""
    def _factory(k, L=1.0):
        return make_family("pareto1", {"L": L, "k": k})
    return _factory


@pytest.fixture
def two_block_mixture():
    """Factory fixture for weights (w, 1 - w) on U(1,2) and U(3,4)."""
    def _factory(w):
        low = make_family("uniform", {"L": 1.0, "H": 2.0})
        high = make_family("uniform", {"L": 3.0, "H": 4.0})
        return combinators.mixture([low, high], [w, 1.0 - w])
    return _factory


@pytest.fixture
def birnbaum_saunders():
    return make_family("birnbaum_saunders", {"a": 6.0, "beta": 5.0})


@pytest.fixture
def loglogistic_sum():
    ll = make_family("loglogistic", {"k": 2.0, "scale": 1.0})
    return combinators.convolve(ll, ll)


@pytest.fixture
def spec_file(tmp_path):
    """Factory fixture writing a DistributionSpec document to a temp file."""
    def _factory(document, name="dist.json"):
        path = tmp_path / name
        text = document if isinstance(document, str) else json.dumps(document)
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _factory


UNIFORM_BLOCKS = [{"family": "uniform", "L": 1.0, "H": 2.0}, {"family": "uniform", "L": 3.0, "H": 4.0}]

CORPUS = {
    "uniform": {"family": "uniform", "L": 0.0, "H": 1.0},
    "exponential": {"family": "exponential", "rate": 1.0},
    "pareto-3": {"family": "pareto1", "L": 1.0, "k": 3.0},
    "pareto-2.5": {"family": "pareto1", "L": 1.0, "k": 2.5},
    "lomax": {"family": "lomax", "A": 0.0, "B": 1.0, "k": 3.0},
    "birnbaum-saunders": {"family": "birnbaum_saunders", "a": 6.0, "beta": 5.0},
    "loglogistic": {"family": "loglogistic", "k": 2.0, "scale": 1.0},
    "weibull": {"family": "weibull", "shape": 2.0, "scale": 1.0},
    "gamma": {"family": "gamma", "shape": 2.0, "scale": 1.0},
    "beta": {"family": "beta", "a": 2.0, "b": 2.0, "scale": 1.0},
    "mixture-25": {"op": "mixture", "weights": [0.25, 0.75], "components": UNIFORM_BLOCKS},
    "mixture-75": {"op": "mixture", "weights": [0.75, 0.25], "components": UNIFORM_BLOCKS},
}


@pytest.fixture(params=sorted(CORPUS))
def corpus_member(request):
    """Each of the twelve reference distributions, as (name, distribution)."""
    return request.param, build_distribution(parse_spec(CORPUS[request.param]))


@pytest.fixture
def corpus():
    """All twelve reference distributions keyed by name."""
    return {name: build_distribution(parse_spec(CORPUS[name])) for name in sorted(CORPUS)}
