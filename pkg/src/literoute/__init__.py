"""Lite-first routed inference simulator.

A lightweight image encoder runs on every sample; a heavier encoder is
additionally run only when predictive uncertainty, safe/danger ambiguity or a
metadata risk prior says so.  The package accounts the resulting energy and
evaluates classification quality and subgroup fairness under cross-validation.
"""

from .core import (
    ClassTaxonomy,
    Embedding,
    EncoderProfile,
    PredictiveDistribution,
    RouteDecision,
    RoutingConfig,
    Sample,
    ham10000_taxonomy,
    validate_distribution,
    validate_taxonomy,
)
from .energy import EnergyReport, account, breakeven_rate
from .fusion import FusionHead, FusionSettings, TabularFeaturiser, featurise_tabular, fuse_predict, train_fusion_heads
from .harness import RunConfig, run_cv
from .ingest import Dataset, SynthSpec, load_dataset, stratified_folds, synth_generate, write_dataset
from .metrics import (
    FairnessReport,
    aggregate_folds,
    balanced_accuracy,
    confusion,
    fairness,
    fairness_delta,
    macro_f1,
    malignant_recall,
)
from .risk import RiskModel, age_score, calibrate, loc_score, risk_override, tab_risk
from .routing import ambiguity, entropy, gate, norm_entropy, route_sample, routing_score, safe_danger_gap
from .sweep import OperatingPoint, grid_sweep, pareto_front

__version__ = "0.1.0"
