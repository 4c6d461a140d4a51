"""Metadata risk prior: normalised age times relative site malignancy.

The model is calibrated from training rows only and is deliberately tiny so
that each routing override can be traced back to two numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .core import ClassTaxonomy, Sample
from .errors import LiteRouteError, NoAgeData, NoMalignantCases

MISSING_AGE_SCORE = 0.5


@dataclass(frozen=True)
class RiskModel:
    a_min: float
    a_max: float
    mal_rate: Mapping[str, float]
    max_rate: float
    fallback_rate: float
    fallback_age_score: float = MISSING_AGE_SCORE

    def __post_init__(self):
        # sorted key order keeps JSON output stable
        object.__setattr__(self, "mal_rate", dict(sorted((str(k), float(v)) for k, v in self.mal_rate.items())))
        if self.a_min > self.a_max:
            raise LiteRouteError("a_min > a_max")
        if any(not 0.0 <= v <= 1.0 for v in self.mal_rate.values()):
            raise LiteRouteError("malignancy rates must lie in [0, 1]")
        if not self.max_rate > 0:
            raise NoMalignantCases("max_rate must be positive")
        if self.mal_rate and self.max_rate != max(self.mal_rate.values()):
            raise LiteRouteError("max_rate must equal the largest malignancy rate")

    def to_dict(self) -> dict:
        return {
            "a_min": self.a_min,
            "a_max": self.a_max,
            "mal_rate": dict(self.mal_rate),
            "max_rate": self.max_rate,
            "fallback_rate": self.fallback_rate,
            "fallback_age_score": self.fallback_age_score,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RiskModel":
        return cls(
            a_min=float(d["a_min"]),
            a_max=float(d["a_max"]),
            mal_rate=d["mal_rate"],
            max_rate=float(d["max_rate"]),
            fallback_rate=float(d["fallback_rate"]),
            fallback_age_score=float(d.get("fallback_age_score", MISSING_AGE_SCORE)),
        )


def calibrate(train_samples: Iterable[Sample], taxonomy: ClassTaxonomy) -> RiskModel:
    """Fit age bounds and per-site malignancy rates on training rows."""
    samples = list(train_samples)
    if not samples:
        raise LiteRouteError("cannot calibrate on an empty training set")
    ages = [s.age for s in samples if s.age is not None]
    if not ages:
        raise NoAgeData("no training sample has an age")

    malignant = taxonomy.malignant_set
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for s in samples:
        if s.localisation is None:
            continue
        totals[s.localisation] = totals.get(s.localisation, 0) + 1
        hits[s.localisation] = hits.get(s.localisation, 0) + (s.label in malignant)
    mal_rate = {loc: hits[loc] / totals[loc] for loc in totals}
    max_rate = max(mal_rate.values(), default=0.0)
    if max_rate <= 0:
        raise NoMalignantCases("no localisation has a malignant training case")

    fallback = sum(s.label in malignant for s in samples) / len(samples)
    return RiskModel(
        a_min=float(min(ages)),
        a_max=float(max(ages)),
        mal_rate=mal_rate,
        max_rate=max_rate,
        fallback_rate=fallback,
    )


def age_score(age: Optional[float], m: RiskModel) -> float:
    """Min-max normalised age, clamped to [0, 1]."""
    if age is None:
        return m.fallback_age_score
    if m.a_max == m.a_min:
        return 0.5
    a = (age - m.a_min) / (m.a_max - m.a_min)
    return min(1.0, max(0.0, a))


def loc_score(localisation: Optional[str], m: RiskModel) -> float:
    rate = m.mal_rate.get(localisation, m.fallback_rate) if localisation is not None else m.fallback_rate
    return min(1.0, max(0.0, rate / m.max_rate))


def tab_risk(s: Sample, m: RiskModel) -> float:
    return age_score(s.age, m) * loc_score(s.localisation, m)


def uses_fallback(s: Sample, m: RiskModel) -> tuple[bool, bool]:
    """(age imputed, localisation imputed) for audit trails."""
    return s.age is None, s.localisation is None or s.localisation not in m.mal_rate


def risk_override(r_tab: float, tau_risk: float) -> bool:
    return r_tab >= tau_risk
