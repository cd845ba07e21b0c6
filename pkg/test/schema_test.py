import json

import pytest

from app.core.errors import InvalidParameterError, SpecError
from app.schema.schema import (
    ConvolveSpec,
    FamilySpec,
    MixtureSpec,
    build_distribution,
    dump_spec,
    load_spec,
    parse_spec,
)

MIXTURE = {
    "op": "mixture",
    "weights": [0.25, 0.75],
    "components": [
        {"family": "uniform", "L": 1.0, "H": 2.0},
        {"family": "uniform", "L": 3.0, "H": 4.0},
    ],
}


def test_family_leaf():
    spec = parse_spec('{"family": "pareto1", "L": 1, "k": 3}')
    assert isinstance(spec, FamilySpec)
    assert spec.params == {"L": 1, "k": 3}
    assert build_distribution(spec).survival(2.0) == pytest.approx(0.125)


def test_nested_spec_round_trip():
    spec = parse_spec(MIXTURE)
    assert isinstance(spec, MixtureSpec)
    assert isinstance(spec.components[0], FamilySpec)
    assert dump_spec(spec) == MIXTURE
    assert build_distribution(spec).spec == MIXTURE


@pytest.mark.parametrize("document, expected", [
    ({"op": "scale", "factor": 2.0, "of": {"family": "pareto1", "L": 1.0, "k": 3.0}}, 0.125),
    ({"op": "shift", "offset": 1.0, "of": {"family": "exponential", "rate": 1.0}}, 0.36787944117144233),
    ({"op": "truncate_left", "at": 2.0, "of": {"family": "pareto1", "L": 1.0, "k": 3.0}}, 0.125),
    ({"op": "power", "exponent": 0.5, "of": {"family": "exponential", "rate": 1.0}}, 1.1253517471925912e-07),
])
def test_combinator_specs(document, expected):
    """Survival at 4 (2 for the shift) of each combinator."""
    dist = build_distribution(parse_spec(document))
    p = 2.0 if document["op"] == "shift" else 4.0
    assert dist.survival(p) == pytest.approx(expected, rel=1e-10)
    assert dist.spec == document


def test_convolve_spec():
    leaf = {"family": "exponential", "rate": 1.0}
    spec = parse_spec({"op": "convolve", "of": [leaf, leaf]})
    assert isinstance(spec, ConvolveSpec)
    assert build_distribution(spec).survival(1.0) == pytest.approx(0.7357588823428847, rel=1e-8)


@pytest.mark.parametrize("document", [
    "{not json",
    {"op": "rotate", "of": {"family": "uniform", "L": 0, "H": 1}},
    {"op": "convolve", "of": [{"family": "exponential", "rate": 1.0}]},
    {"op": "scale", "of": {"family": "uniform", "L": 0, "H": 1}},
    {"op": "mixture", "weights": [1.0], "components": [{"family": "uniform", "L": 0, "H": 1}], "extra": 1},
    {"L": 0.0, "H": 1.0},
])
def test_malformed_specs(document):
    with pytest.raises(SpecError):
        parse_spec(document)


def test_unknown_family_and_bad_parameters():
    with pytest.raises(SpecError):
        build_distribution(parse_spec({"family": "cauchy"}))
    with pytest.raises(InvalidParameterError):
        build_distribution(parse_spec({"family": "pareto1", "L": 1.0, "k": 0.9}))
    with pytest.raises(InvalidParameterError):
        build_distribution(parse_spec({"family": "uniform", "L": 0.0, "H": "wide"}))


def test_load_spec(spec_file, tmp_path):
    dist = load_spec(spec_file(MIXTURE))
    assert dist.mean == pytest.approx(3.0)
    with pytest.raises(SpecError):
        load_spec(tmp_path / "missing.json")
    with pytest.raises(SpecError):
        load_spec(spec_file(json.dumps({"op": "scale"}), name="bad.json"))
