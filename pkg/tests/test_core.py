import math

import pytest
from hypothesis import given, strategies as st

from literoute import ClassTaxonomy, RoutingConfig, ham10000_taxonomy, validate_distribution, validate_taxonomy
from literoute.core import EncoderProfile, RouteDecision, Sample
from literoute.errors import (
    ConfigError,
    CoverageError,
    EmptyMalignant,
    LengthMismatch,
    NegativeProbability,
    NormalizationError,
    OverlapError,
)


def test_minimal_binary_taxonomy_is_valid():
    t = ClassTaxonomy(("b", "m"), {0}, {1}, {1})
    assert validate_taxonomy(t) is t


def test_overlap_rejected():
    with pytest.raises(OverlapError):
        validate_taxonomy(ClassTaxonomy(("b", "m"), {0, 1}, {1}, {1}))


def test_coverage_and_empty_malignant():
    with pytest.raises(CoverageError):
        validate_taxonomy(ClassTaxonomy(("a", "b", "c"), {0}, {1}, {1}))
    with pytest.raises(EmptyMalignant):
        validate_taxonomy(ClassTaxonomy(("a", "b"), {0}, {1}, set()))
    with pytest.raises(CoverageError):
        validate_taxonomy(ClassTaxonomy(("a",), {0}, set(), {0}))


def test_ham10000_partition():
    t = ham10000_taxonomy()
    names = lambda s: {t.class_names[i] for i in s}
    assert names(t.safe_set) == {"nv", "bkl", "df", "vasc"}
    assert names(t.danger_set) == {"mel", "bcc", "akiec"}
    assert t.malignant_set == t.danger_set


def test_taxonomy_dict_round_trip():
    t = ham10000_taxonomy()
    assert ClassTaxonomy.from_dict(t.to_dict()) == t


@pytest.mark.parametrize("raw, err", [
    ([0.7, 0.2], NormalizationError),
    ([1.0000004, -1e-7], NegativeProbability),
])
def test_bad_distributions(raw, err):
    with pytest.raises(err):
        validate_distribution(raw)


def test_good_distribution_and_length():
    assert validate_distribution([0.5, 0.5]).probs == (0.5, 0.5)
    with pytest.raises(LengthMismatch):
        validate_distribution([0.5, 0.5], n_classes=3)


def test_renormalises_within_tolerance():
    p = validate_distribution([0.5 + 4e-7, 0.5])
    assert math.fsum(p.probs) == pytest.approx(1.0, abs=1e-15)


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8).filter(lambda v: sum(v) > 0.1))
def test_validate_distribution_idempotent(raw):
    total = sum(raw)
    p = validate_distribution([v / total for v in raw])
    assert validate_distribution(p.probs) == p


def test_sample_rejects_bad_age():
    with pytest.raises(ValueError):
        Sample("x", 0, age=-1.0)
    with pytest.raises(ValueError):
        Sample("x", 0, age=float("nan"))
    assert Sample("x", 0).age is None


def test_routing_config_validation():
    with pytest.raises(ConfigError):
        RoutingConfig(tau_H=float("inf"))
    with pytest.raises(ConfigError):
        RoutingConfig(gate_mode="score", lambda_H=0.0, lambda_Delta=0.0)
    with pytest.raises(ConfigError):
        RoutingConfig(gate_mode="vote")
    cfg = RoutingConfig(tau_H=0.3)
    assert RoutingConfig.from_dict(cfg.to_dict()) == cfg


def test_profile_round_trip():
    p = EncoderProfile("ResNet50", "heavy", 0.392, 2048, 203.47)
    assert EncoderProfile.from_dict(p.to_dict()) == p
    with pytest.raises(ConfigError):
        EncoderProfile("x", "heavy", -1.0, 4)


def test_route_decision_gate_matches_reasons():
    with pytest.raises(ValueError):
        RouteDecision("s", 1, 0.0, 0.0, 1.0, 0.0, 0.0, frozenset())
    with pytest.raises(ValueError):
        RouteDecision("s", 0, 0.0, 0.0, 1.0, 0.0, 0.0, frozenset({"entropy"}))
