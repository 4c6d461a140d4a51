import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from literoute import (
    ClassTaxonomy,
    RoutingConfig,
    Sample,
    ambiguity,
    entropy,
    gate,
    norm_entropy,
    route_sample,
    routing_score,
    safe_danger_gap,
    validate_taxonomy,
)
from literoute.risk import RiskModel
from literoute.routing import Signals

from oracles import entropy as entropy_oracle


def test_entropy_values():
    assert entropy([0.0, 1.0, 0.0]) == 0.0
    assert entropy([1 / 7] * 7) == pytest.approx(math.log(7), abs=1e-12)
    assert entropy([0.5, 0.3, 0.2]) == pytest.approx(1.029653014, abs=1e-9)


def test_norm_entropy_values():
    assert norm_entropy([0.25] * 4) == pytest.approx(1.0)
    assert norm_entropy([1.0, 0.0]) == 0.0
    assert norm_entropy([0.5, 0.5]) == 1.0


def test_gap_examples(three_class_taxonomy):
    assert safe_danger_gap([1.0, 0.0, 0.0], three_class_taxonomy) == (1.0, 0.0, 1.0)
    ps, pd, d = safe_danger_gap([0.25, 0.25, 0.5], three_class_taxonomy)
    assert (ps, pd, d) == (0.5, 0.5, 0.0)
    ps, pd, d = safe_danger_gap([0.6, 0.1, 0.3], three_class_taxonomy)
    assert (ps, pd, d) == pytest.approx((0.7, 0.3, 0.4))


@pytest.mark.parametrize("delta, expected", [(1.0, 0.0), (0.0, 1.0), (0.4, 0.6), (-0.4, 0.6)])
def test_ambiguity(delta, expected):
    assert ambiguity(delta) == pytest.approx(expected)


def test_routing_score():
    assert routing_score(0.8, 0.6, RoutingConfig(lambda_H=0.5, lambda_Delta=0.5)) == pytest.approx(0.7)
    assert routing_score(0.37, 0.9, RoutingConfig(lambda_H=1.0, lambda_Delta=0.0)) == 0.37
    assert routing_score(0.0, 0.0, RoutingConfig()) == 0.0


def _sig(h=0.0, a=0.0, r=0.0):
    return Signals("s", 0.0, h, 1 - a, a, r)


def test_trigger_single_clause():
    d = gate(_sig(h=0.9, a=0.1, r=0.1), RoutingConfig(tau_H=0.7, tau_Delta=0.5, tau_risk=0.5))
    assert d.gate == 1 and d.trigger_reason == {"entropy"}


def test_trigger_boundaries_are_strict_except_risk():
    cfg = RoutingConfig(tau_H=0.6, tau_Delta=0.4, tau_risk=0.5)
    assert gate(_sig(0.6, 0.4, 0.4999), cfg).gate == 0
    d = gate(_sig(0.6, 0.4, 0.5), cfg)
    assert d.gate == 1 and d.trigger_reason == {"risk_override"}


def test_score_mode():
    cfg = RoutingConfig(gate_mode="score", lambda_H=0.5, lambda_Delta=0.5, tau_r=0.65, tau_risk=2.0)
    d = gate(_sig(h=0.8, a=0.6), cfg)
    assert d.score == pytest.approx(0.7)
    assert d.gate == 1 and d.trigger_reason == {"score"}
    assert gate(_sig(h=0.6, a=0.6), cfg).gate == 0


RISK = RiskModel(a_min=20, a_max=80, mal_rate={"face": 0.5, "back": 0.2}, max_rate=0.5, fallback_rate=0.3)


def test_route_sample_cases(three_class_taxonomy):
    cfg = RoutingConfig(tau_H=0.5, tau_Delta=0.5, tau_risk=0.7)
    low = Sample("a", 0, age=30, localisation="back")
    high = Sample("b", 0, age=80, localisation="face")
    assert route_sample(low, [1.0, 0.0, 0.0], RISK, cfg, three_class_taxonomy).gate == 0
    d = route_sample(high, [1.0, 0.0, 0.0], RISK, cfg, three_class_taxonomy)
    assert d.gate == 1 and d.trigger_reason == {"risk_override"}
    d = route_sample(low, [1 / 3] * 3, RISK, RoutingConfig(tau_H=0.99, tau_Delta=1.0, tau_risk=2.0),
                     three_class_taxonomy)
    assert d.gate == 1 and "entropy" in d.trigger_reason


def test_route_sample_records_fallbacks(three_class_taxonomy):
    d = route_sample(Sample("a", 0), [1.0, 0.0, 0.0], RISK, RoutingConfig(), three_class_taxonomy)
    assert d.age_fallback and d.loc_fallback
    assert d.tab_risk == pytest.approx(0.5 * 0.6)


def test_pure_entropy_reduction(three_class_taxonomy):
    rng = np.random.default_rng(0)
    cfg = RoutingConfig(gate_mode="score", lambda_H=0.8, lambda_Delta=0.0, tau_r=0.4, tau_risk=1.5)
    for p in rng.dirichlet(np.ones(3), size=300):
        d = route_sample(Sample("a", 0, age=80, localisation="face"), p, RISK, cfg, three_class_taxonomy)
        assert d.gate == int(0.8 * d.norm_entropy > 0.4)


# -- properties ---------------------------------------------------------------

probs = st.integers(2, 7).flatmap(
    lambda C: st.lists(st.floats(0, 1), min_size=C, max_size=C).filter(lambda v: sum(v) > 1e-3)
).map(lambda v: [x / sum(v) for x in v])


@given(probs)
def test_entropy_bounds_and_oracle(p):
    h = entropy(p)
    assert 0.0 <= h <= math.log(len(p))
    assert h == pytest.approx(entropy_oracle(p), abs=1e-12)
    assert 0.0 <= norm_entropy(p) <= 1.0


@given(probs, st.randoms(use_true_random=False))
def test_permutation_consistency(p, rnd):
    C = len(p)
    n_safe = rnd.randint(1, C - 1)
    t = validate_taxonomy(ClassTaxonomy(tuple(map(str, range(C))), set(range(n_safe)), set(range(n_safe, C)),
                                        {C - 1}))
    perm = list(range(C))
    rnd.shuffle(perm)  # new index j holds old class perm[j]
    inv = {old: new for new, old in enumerate(perm)}
    t2 = validate_taxonomy(ClassTaxonomy(tuple(map(str, range(C))), {inv[i] for i in t.safe_set},
                                         {inv[i] for i in t.danger_set}, {inv[C - 1]}))
    p2 = [p[perm[j]] for j in range(C)]
    s = Sample("x", 0, age=50, localisation="face")
    cfg = RoutingConfig(gate_mode=rnd.choice(["score", "trigger"]), tau_H=rnd.random(), tau_Delta=rnd.random(),
                        tau_r=rnd.random(), tau_risk=rnd.random())
    a = route_sample(s, p, RISK, cfg, t)
    b = route_sample(s, p2, RISK, cfg, t2)
    assert (a.entropy, a.delta, a.ambiguity, a.score, a.gate) == (b.entropy, b.delta, b.ambiguity, b.score, b.gate)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
       st.sampled_from(["h", "a", "r"]), st.floats(0, 1))
def test_gate_monotone_in_signals(h, a, r, th, td, tr, which, bump):
    cfg = RoutingConfig(tau_H=th, tau_Delta=td, tau_risk=tr)
    before = gate(_sig(h, a, r), cfg).gate
    h2, a2, r2 = (min(1, h + bump) if which == "h" else h, min(1, a + bump) if which == "a" else a,
                  min(1, r + bump) if which == "r" else r)
    assert gate(_sig(h2, a2, r2), cfg).gate >= before


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(["tau_H", "tau_Delta", "tau_risk", "tau_r"]),
       st.sampled_from(["score", "trigger"]))
def test_lower_threshold_never_routes_fewer(t_hi, drop, name, mode):
    rng = np.random.default_rng(1)
    sigs = [_sig(*rng.random(3)) for _ in range(200)]
    hi = RoutingConfig(gate_mode=mode, **{name: t_hi})
    lo = RoutingConfig(gate_mode=mode, **{name: t_hi - drop})
    assert sum(gate(s, lo).gate for s in sigs) >= sum(gate(s, hi).gate for s in sigs)
