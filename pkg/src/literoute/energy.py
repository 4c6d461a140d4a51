"""Per-sample image-pathway energy under lite-first routing.

The lite encoder runs on every sample; an escalated sample additionally pays
for the heavy encoder, so the expected cost is ``e_lite + r * e_heavy``.
Tabular and server-side costs are not counted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import EncoderProfile, RouteDecision
from .errors import EmptyDecisions, ZeroHeavyEnergy


@dataclass(frozen=True)
class EnergyReport:
    e_lite: float
    e_heavy: float
    e_routed: float
    routing_pct: float
    savings_vs_heavy: float
    savings_vs_lite: float
    n_samples: int = 0
    per_fold: tuple = ()
    std: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "e_lite": self.e_lite,
            "e_heavy": self.e_heavy,
            "e_routed": self.e_routed,
            "routing_pct": self.routing_pct,
            "savings_vs_heavy": self.savings_vs_heavy,
            "savings_vs_lite": self.savings_vs_lite,
            "n_samples": self.n_samples,
        }
        if self.std:
            d["std"] = dict(self.std)
        if self.per_fold:
            d["per_fold"] = [r.to_dict() for r in self.per_fold]
        return d


def _energy(profile) -> float:
    return float(profile.energy_per_sample if isinstance(profile, EncoderProfile) else profile)


def account_rate(routing_pct: float, e_lite: float, e_heavy: float, n_samples: int = 0) -> EnergyReport:
    """Energy report for a known routing fraction."""
    if e_heavy <= 0:
        raise ZeroHeavyEnergy("heavy energy must be positive for savings to be defined")
    e_routed = e_lite + routing_pct * e_heavy
    return EnergyReport(
        e_lite=e_lite,
        e_heavy=e_heavy,
        e_routed=e_routed,
        routing_pct=routing_pct,
        savings_vs_heavy=(e_heavy - e_routed) / e_heavy,
        savings_vs_lite=(e_lite - e_routed) / e_lite if e_lite > 0 else float("nan"),
        n_samples=n_samples,
    )


def account(decisions: Sequence[RouteDecision], lite_profile, heavy_profile) -> EnergyReport:
    """Aggregate gate decisions into per-sample energy and savings.

    Profiles may be ``EncoderProfile`` objects or plain joule values.
    """
    if len(decisions) == 0:
        raise EmptyDecisions("no routing decisions to account")
    gates = [d.gate if isinstance(d, RouteDecision) else int(d) for d in decisions]
    r = sum(gates) / len(gates)
    return account_rate(r, _energy(lite_profile), _energy(heavy_profile), len(gates))


def account_folds(per_fold_decisions: Sequence[Sequence[RouteDecision]], lite_profile, heavy_profile) -> EnergyReport:
    """Mean report over folds, with per-fold sample standard deviations.

    Each fold is accounted separately, then fields are averaged.
    """
    reports = [account(d, lite_profile, heavy_profile) for d in per_fold_decisions]
    if not reports:
        raise EmptyDecisions("no folds")
    keys = ("e_routed", "routing_pct", "savings_vs_heavy", "savings_vs_lite")
    mean = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    if len(reports) > 1:
        std = {k: float(np.std([getattr(r, k) for r in reports], ddof=1)) for k in keys}
    else:
        warnings.warn("single fold: energy std reported as 0", stacklevel=2)
        std = {k: 0.0 for k in keys}
    first = reports[0]
    return EnergyReport(
        e_lite=first.e_lite,
        e_heavy=first.e_heavy,
        n_samples=sum(r.n_samples for r in reports),
        per_fold=tuple(reports),
        std=std,
        **mean,
    )


def breakeven_rate(lite_profile, heavy_profile) -> float:
    """Routing fraction above which routed inference costs more than heavy-only."""
    e_lite, e_heavy = _energy(lite_profile), _energy(heavy_profile)
    if e_heavy <= 0:
        raise ZeroHeavyEnergy("heavy energy must be positive")
    return min(1.0, max(0.0, 1.0 - e_lite / e_heavy))
