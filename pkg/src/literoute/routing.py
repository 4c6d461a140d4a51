"""Escalation signals computed from the lite pathway's class distribution.

Sums use ``math.fsum`` (correctly rounded), which makes every signal exactly
invariant to the order of the classes.

Note on the thresholded safe-danger test: some formulations gate on the raw
gap, ``delta <= t``.  Here the gate fires on ambiguity, ``1 - |delta| > t``,
which is the same event as ``|delta| < 1 - t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import ClassTaxonomy, PredictiveDistribution, RouteDecision, RoutingConfig, Sample, validate_distribution
from .risk import RiskModel, risk_override, tab_risk, uses_fallback


def _probs(p) -> tuple[float, ...]:
    if isinstance(p, PredictiveDistribution):
        return p.probs
    return validate_distribution(p).probs


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    probs = _probs(p)
    h = -math.fsum(q * math.log(q) for q in probs if q > 0.0)
    # round-off guard: true value lies in [0, ln C]
    return min(max(h, 0.0), math.log(len(probs)))


def norm_entropy(p) -> float:
    probs = _probs(p)
    C = len(probs)
    if C < 2:
        raise ValueError("normalised entropy needs at least 2 classes")
    return min(1.0, entropy(probs) / math.log(C))


def safe_danger_gap(p, t: ClassTaxonomy) -> tuple[float, float, float]:
    """Return (safe mass, danger mass, safe minus danger)."""
    probs = _probs(p)
    p_safe = math.fsum(probs[i] for i in t.safe_set)
    p_danger = math.fsum(probs[i] for i in t.danger_set)
    # exact (correctly rounded) difference of the two masses
    delta = math.fsum([probs[i] for i in t.safe_set] + [-probs[i] for i in t.danger_set])
    return p_safe, p_danger, max(-1.0, min(1.0, delta))


def ambiguity(delta: float) -> float:
    return 1.0 - abs(delta)


def routing_score(h_norm: float, a_delta: float, cfg: RoutingConfig) -> float:
    return cfg.lambda_H * h_norm + cfg.lambda_Delta * a_delta


@dataclass(frozen=True)
class Signals:
    """Everything the gate looks at, for one sample."""

    sample_id: str
    entropy: float
    norm_entropy: float
    delta: float
    ambiguity: float
    tab_risk: float
    age_fallback: bool = False
    loc_fallback: bool = False


def compute_signals(s: Sample, p_lite, risk_model: RiskModel, taxonomy: ClassTaxonomy) -> Signals:
    probs = _probs(p_lite)
    if len(probs) != taxonomy.n_classes:
        raise ValueError(f"sample {s.id}: distribution has {len(probs)} entries, taxonomy {taxonomy.n_classes}")
    _, _, delta = safe_danger_gap(probs, taxonomy)
    age_fb, loc_fb = uses_fallback(s, risk_model)
    return Signals(
        sample_id=s.id,
        entropy=entropy(probs),
        norm_entropy=norm_entropy(probs),
        delta=delta,
        ambiguity=ambiguity(delta),
        tab_risk=tab_risk(s, risk_model),
        age_fallback=age_fb,
        loc_fallback=loc_fb,
    )


def gate(signals: Signals, cfg: RoutingConfig) -> RouteDecision:
    reasons = set()
    score: Optional[float] = None
    if cfg.gate_mode == "score":
        score = routing_score(signals.norm_entropy, signals.ambiguity, cfg)
        if score > cfg.tau_r:
            reasons.add("score")
    else:
        if signals.norm_entropy > cfg.tau_H:
            reasons.add("entropy")
        if signals.ambiguity > cfg.tau_Delta:
            reasons.add("ambiguity")
    if risk_override(signals.tab_risk, cfg.tau_risk):
        reasons.add("risk_override")
    return RouteDecision(
        sample_id=signals.sample_id,
        gate=int(bool(reasons)),
        entropy=signals.entropy,
        norm_entropy=signals.norm_entropy,
        delta=signals.delta,
        ambiguity=signals.ambiguity,
        tab_risk=signals.tab_risk,
        trigger_reason=frozenset(reasons),
        score=score,
        age_fallback=signals.age_fallback,
        loc_fallback=signals.loc_fallback,
    )


def route_sample(s: Sample, p_lite, risk_model: RiskModel, cfg: RoutingConfig, taxonomy: ClassTaxonomy) -> RouteDecision:
    """Compute all signals for one sample and apply the gate."""
    return gate(compute_signals(s, p_lite, risk_model, taxonomy), cfg)


def route_all(samples: Sequence[Sample], lite_probs, risk_model: RiskModel, cfg: RoutingConfig,
              taxonomy: ClassTaxonomy) -> list[RouteDecision]:
    return [route_sample(s, p, risk_model, cfg, taxonomy) for s, p in zip(samples, lite_probs)]
