"""Shared domain types and their validation.

All types are frozen dataclasses holding plain tuples/scalars, so they are
hashable-ish, compare field-by-field and are safe to share between workers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    CoverageError,
    EmptyMalignant,
    LengthMismatch,
    LiteRouteError,
    NegativeProbability,
    NormalizationError,
    OverlapError,
)

PROB_TOL = 1e-6

TIERS = ("lite", "heavy", "tabular")
GATE_MODES = ("score", "trigger")
TRANSMISSION_MODES = ("replace", "alongside")
# fixed order in which trigger reasons are reported
REASONS = ("entropy", "ambiguity", "score", "risk_override")


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered class names plus the safe/danger/malignant index sets."""

    class_names: tuple[str, ...]
    safe_set: frozenset[int]
    danger_set: frozenset[int]
    malignant_set: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        for name in ("safe_set", "danger_set", "malignant_set"):
            object.__setattr__(self, name, frozenset(int(i) for i in getattr(self, name)))

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def index(self, name: str) -> int:
        return self.class_names.index(name)

    @classmethod
    def from_names(cls, class_names, safe, danger, malignant=None) -> "ClassTaxonomy":
        """Build from class names (or integer indices) for each set.

        ``malignant`` defaults to the danger set.
        """
        names = [str(c) for c in class_names]

        def resolve(items):
            out = set()
            for it in items:
                if isinstance(it, (int, np.integer)) and not isinstance(it, bool):
                    out.add(int(it))
                elif str(it) in names:
                    out.add(names.index(str(it)))
                else:
                    raise ConfigError(f"class {it!r} not in taxonomy {names}")
            return out

        danger_idx = resolve(danger)
        mal_idx = resolve(malignant) if malignant is not None else set(danger_idx)
        return cls(tuple(names), frozenset(resolve(safe)), frozenset(danger_idx), frozenset(mal_idx))

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "safe": [self.class_names[i] for i in sorted(self.safe_set)],
            "danger": [self.class_names[i] for i in sorted(self.danger_set)],
            "malignant": [self.class_names[i] for i in sorted(self.malignant_set)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassTaxonomy":
        return validate_taxonomy(cls.from_names(d["class_names"], d["safe"], d["danger"], d.get("malignant")))


def ham10000_taxonomy() -> ClassTaxonomy:
    """Seven-class HAM10000 layout with the usual benign/malignant split.

    This partition is a convention of this package: nv, bkl, df and vasc are
    treated as safe; mel, bcc and akiec as danger (and malignant).
    """
    names = ("akiec", "bcc", "bkl", "df", "mel", "nv", "vasc")
    return validate_taxonomy(
        ClassTaxonomy.from_names(names, safe=["nv", "bkl", "df", "vasc"], danger=["mel", "bcc", "akiec"])
    )


def validate_taxonomy(t: ClassTaxonomy) -> ClassTaxonomy:
    C = t.n_classes
    if C < 2:
        raise CoverageError(f"need at least 2 classes, got {C}")
    everything = t.safe_set | t.danger_set | t.malignant_set
    if any(i < 0 or i >= C for i in everything):
        raise CoverageError(f"class index out of range [0, {C})")
    overlap = t.safe_set & t.danger_set
    if overlap:
        raise OverlapError(f"classes {sorted(overlap)} are both safe and danger")
    if (t.safe_set | t.danger_set) != frozenset(range(C)):
        missing = sorted(frozenset(range(C)) - (t.safe_set | t.danger_set))
        raise CoverageError(f"classes {missing} are neither safe nor danger")
    if not t.malignant_set:
        raise EmptyMalignant("malignant_set is empty")
    if not t.malignant_set <= t.danger_set:
        raise CoverageError("malignant_set must be a subset of danger_set")
    return t


@dataclass(frozen=True)
class Sample:
    id: str
    label: int
    age: Optional[float] = None
    localisation: Optional[str] = None
    subgroup: Optional[str] = None
    fold: Optional[int] = None

    def __post_init__(self):
        if self.label < 0:
            raise LiteRouteError(f"sample {self.id}: negative label")
        if self.age is not None and (not math.isfinite(self.age) or self.age < 0):
            raise LiteRouteError(f"sample {self.id}: invalid age {self.age}")


@dataclass(frozen=True)
class PredictiveDistribution:
    probs: tuple[float, ...]

    def __len__(self):
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def validate_distribution(p: Sequence[float], n_classes: Optional[int] = None) -> PredictiveDistribution:
    """Check a raw probability vector and renormalise it exactly.

    Negative entries are rejected before the sum tolerance is looked at.
    """
    if isinstance(p, PredictiveDistribution):
        p = p.probs
    vals = [float(v) for v in p]
    if n_classes is not None and len(vals) != n_classes:
        raise LengthMismatch(f"expected {n_classes} probabilities, got {len(vals)}")
    if not vals:
        raise LengthMismatch("empty probability vector")
    if any(not math.isfinite(v) for v in vals):
        raise NormalizationError("non-finite probability")
    if any(v < 0 for v in vals):
        raise NegativeProbability(f"negative entry in {vals}")
    total = math.fsum(vals)
    if abs(total - 1.0) > PROB_TOL:
        raise NormalizationError(f"probabilities sum to {total!r}")
    if total != 1.0:
        vals = _renormalise(vals, total)
    return PredictiveDistribution(tuple(vals))


def _renormalise(vals: list[float], total: float) -> list[float]:
    # result has fsum exactly 1.0, so re-validating it is a no-op
    vals = [v / total for v in vals]
    for _ in range(4):
        residual = 1.0 - math.fsum(vals)
        if residual == 0.0:
            return vals
        k = max(range(len(vals)), key=vals.__getitem__)
        vals[k] += residual
    return vals


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]
    encoder_id: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise LiteRouteError("embedding must have dim >= 1")
        if not all(math.isfinite(v) for v in vals):
            raise LiteRouteError("embedding has non-finite entries")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class EncoderProfile:
    encoder_id: str
    tier: str
    energy_per_sample: float
    embedding_dim: int
    latency_per_sample: float = 0.0

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ConfigError(f"unknown tier {self.tier!r}")
        if not self.energy_per_sample >= 0:
            raise ConfigError(f"{self.encoder_id}: energy_per_sample must be >= 0")
        if self.latency_per_sample < 0:
            raise ConfigError(f"{self.encoder_id}: latency must be >= 0")
        if int(self.embedding_dim) < 1:
            raise ConfigError(f"{self.encoder_id}: embedding_dim must be >= 1")

    def to_dict(self) -> dict:
        return {
            "encoder_id": self.encoder_id,
            "tier": self.tier,
            "energy_per_sample_j": self.energy_per_sample,
            "latency_ms": self.latency_per_sample,
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderProfile":
        return cls(
            encoder_id=str(d["encoder_id"]),
            tier=str(d["tier"]),
            energy_per_sample=float(d["energy_per_sample_j"]),
            embedding_dim=int(d["embedding_dim"]),
            latency_per_sample=float(d.get("latency_ms", 0.0)),
        )


@dataclass(frozen=True)
class RoutingConfig:
    """Weights and thresholds of the escalation gate.

    Comparisons: normalised entropy, ambiguity and combined score fire on
    strict ``>``; the metadata risk override fires on ``>=``.
    """

    lambda_H: float = 0.5
    lambda_Delta: float = 0.5
    tau_r: float = 0.5
    tau_H: float = 0.5
    tau_Delta: float = 0.5
    tau_risk: float = 0.5
    gate_mode: str = "trigger"
    heavy_transmission: str = "replace"

    def __post_init__(self):
        for name in ("lambda_H", "lambda_Delta", "tau_r", "tau_H", "tau_Delta", "tau_risk"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.lambda_H < 0 or self.lambda_Delta < 0:
            raise ConfigError("routing weights must be >= 0")
        if self.gate_mode not in GATE_MODES:
            raise ConfigError(f"gate_mode must be one of {GATE_MODES}")
        if self.heavy_transmission not in TRANSMISSION_MODES:
            raise ConfigError(f"heavy_transmission must be one of {TRANSMISSION_MODES}")
        if self.gate_mode == "score" and self.lambda_H + self.lambda_Delta <= 0:
            raise ConfigError("score mode needs lambda_H + lambda_Delta > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown routing keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class RouteDecision:
    sample_id: str
    gate: int
    entropy: float
    norm_entropy: float
    delta: float
    ambiguity: float
    tab_risk: float
    trigger_reason: frozenset[str] = field(default_factory=frozenset)
    score: Optional[float] = None
    age_fallback: bool = False
    loc_fallback: bool = False

    def __post_init__(self):
        if bool(self.gate) != bool(self.trigger_reason):
            raise LiteRouteError("gate must be 1 exactly when some trigger fired")

    @property
    def reasons(self) -> tuple[str, ...]:
        return tuple(r for r in REASONS if r in self.trigger_reason)
