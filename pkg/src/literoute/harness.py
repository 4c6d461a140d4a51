"""Cross-validation driver tying risk calibration, fusion, routing and metrics.

Work is split in two phases so that threshold sweeps stay cheap:

* ``prepare_folds`` does everything that does not depend on routing
  thresholds (risk calibration and head training on the training split,
  signal computation and head outputs on the test split);
* ``evaluate`` applies one ``RoutingConfig`` to the prepared folds.

Only training rows ever reach ``calibrate`` and ``train_fusion_heads``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import ClassTaxonomy, RouteDecision, RoutingConfig, validate_taxonomy
from .energy import account, account_rate
from .errors import ConfigError, LiteRouteError, NoEvaluableSubgroup
from .fusion import FusionHeads, FusionSettings, train_fusion_heads
from .ingest import Dataset, SynthSpec, fmt, load_dataset, stratified_folds, synth_generate
from .metrics import FairnessReport, aggregate_folds, classification_summary, fairness, fairness_delta, predict_labels
from .risk import RiskModel, calibrate
from .routing import Signals, compute_signals, gate

log = logging.getLogger(__name__)

ARMS = ("lite", "heavy", "routed")

DECISION_COLUMNS = ("sample_id", "fold", "gate", "entropy", "norm_entropy", "delta", "ambiguity", "score",
                    "tab_risk", "trigger_reason", "age_fallback", "loc_fallback")
REPORT_COLUMNS = ("arm", "fold", "n", "macro_f1", "balanced_accuracy", "malignant_recall", "tpr_mean",
                  "tpr_worst", "tpr_gap", "d_wg_tpr_vs_lite", "d_gap_vs_lite", "d_wg_tpr_vs_heavy",
                  "d_gap_vs_heavy", "energy_j", "routing_pct", "savings_vs_heavy")
METRIC_COLUMNS = REPORT_COLUMNS[3:]


@dataclass(frozen=True)
class RunConfig:
    dataset: Mapping
    pair: tuple[str, str] = ("lite", "heavy")
    routing: RoutingConfig = RoutingConfig()
    k: int = 5
    seed: int = 0
    output_dir: Optional[str] = None
    arms: tuple[str, ...] = ARMS
    fusion: FusionSettings = FusionSettings()
    taxonomy: Optional[Mapping] = None
    workers: int = 1
    base_dir: str = "."

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        bad = set(self.arms) - set(ARMS)
        if bad or not self.arms:
            raise ConfigError(f"arms must be a non-empty subset of {ARMS}, got {list(self.arms)}")
        if len(self.pair) != 2:
            raise ConfigError("pair must be [lite_encoder, heavy_encoder]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir=".") -> "RunConfig":
        known = {"dataset", "pair", "routing", "k", "seed", "output_dir", "arms", "fusion", "taxonomy", "workers"}
        unknown = set(d) - known - {"grid"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "dataset" not in d:
            raise ConfigError("config needs a 'dataset' block")
        return cls(
            dataset=d["dataset"],
            pair=tuple(d.get("pair", ("lite", "heavy"))),
            routing=RoutingConfig.from_dict(d.get("routing", {})),
            k=int(d.get("k", 5)),
            seed=int(d.get("seed", 0)),
            output_dir=d.get("output_dir"),
            arms=tuple(d.get("arms", ARMS)),
            fusion=FusionSettings(**d.get("fusion", {})),
            taxonomy=d.get("taxonomy"),
            workers=int(d.get("workers", 1)),
            base_dir=str(base_dir),
        )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "taxonomy": self.taxonomy,
            "pair": list(self.pair),
            "routing": self.routing.to_dict(),
            "k": self.k,
            "seed": self.seed,
            "arms": list(self.arms),
            "fusion": self.fusion.to_dict(),
            "output_dir": self.output_dir,
            "workers": self.workers,
        }


def _path(base, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(base) / p


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def build_dataset(cfg: RunConfig) -> Dataset:
    """Materialise the dataset described by ``cfg.dataset``.

    Either ``{"synth": {...SynthSpec fields}}`` or a file block with keys
    ``metadata``, ``encoders``, ``profiles`` and ``taxonomy`` (a path or an
    inline taxonomy; a top-level ``taxonomy`` key also works).
    """
    block = cfg.dataset
    if "synth" in block:
        return synth_generate(SynthSpec.from_dict(block["synth"]))
    if "config" in block:
        inner = _path(cfg.base_dir, block["config"])
        return build_dataset(RunConfig(dataset=load_config(inner), taxonomy=cfg.taxonomy, base_dir=str(inner.parent)))
    base = cfg.base_dir
    tax = cfg.taxonomy if cfg.taxonomy is not None else block.get("taxonomy")
    if tax is None:
        raise ConfigError("no taxonomy given for file dataset")
    if isinstance(tax, str):
        tax = load_config(_path(base, tax))
    try:
        encoders = {
            enc: {kind: str(_path(base, p)) for kind, p in paths.items()}
            for enc, paths in block["encoders"].items()
        }
        return load_dataset(_path(base, block["metadata"]), encoders, tax, _path(base, block["profiles"]))
    except KeyError as exc:
        raise ConfigError(f"dataset block missing {exc}") from exc


# -- per-fold preparation -----------------------------------------------------

@dataclass(eq=False)
class PreparedFold:
    fold: int
    test_idx: np.ndarray
    risk_model: RiskModel
    heads: FusionHeads
    signals: list[Signals]
    probs: dict  # pathway -> (n_test, C) head outputs


def assign_folds(d: Dataset, k: int, seed: int) -> Dataset:
    folds = d.folds
    if len(d) and (folds >= 0).all():
        if folds.max() >= k:
            raise ConfigError(f"metadata folds go up to {folds.max()} but k={k}")
        return d
    if (folds >= 0).any():
        log.warning("some samples lack a fold; reassigning all folds")
    return stratified_folds(d, k, seed)


def prepare_fold(d: Dataset, fold: int, cfg: RunConfig) -> PreparedFold:
    lite_id, heavy_id = cfg.pair
    folds = d.folds
    train_idx = np.flatnonzero(folds != fold)
    test_idx = np.flatnonzero(folds == fold)
    train = d.subset(train_idx)
    test = d.subset(test_idx)
    try:
        risk_model = calibrate(train.samples, d.taxonomy)
        heads = train_fusion_heads(
            train.samples,
            train.tables[lite_id].embeddings,
            train.tables[heavy_id].embeddings,
            risk_model,
            d.taxonomy.n_classes,
            seed=cfg.seed,
            settings=cfg.fusion,
            fold=fold,
            alongside=cfg.routing.heavy_transmission == "alongside",
        )
    except LiteRouteError as exc:
        raise type(exc)(f"fold {fold}: {exc}") from exc

    lite_probs = test.tables[lite_id].probabilities
    if lite_probs is None:
        raise ConfigError(f"lite encoder {lite_id!r} has no probability table")
    signals = [compute_signals(s, p, risk_model, d.taxonomy) for s, p in zip(test.samples, lite_probs)]

    x_tab = heads.featuriser.transform(test.samples)
    x_lite = test.tables[lite_id].embeddings
    x_heavy = test.tables[heavy_id].embeddings
    probs = {
        "lite": heads.lite.predict_proba(x_lite, x_tab),
        "heavy": heads.heavy.predict_proba(x_heavy, x_tab),
    }
    if heads.alongside is not None:
        probs["alongside"] = heads.alongside.predict_proba(np.hstack([x_lite, x_heavy]), x_tab)
    return PreparedFold(fold, test_idx, risk_model, heads, signals, probs)


def prepare_folds(cfg: RunConfig, dataset: Optional[Dataset] = None) -> tuple[Dataset, list[PreparedFold]]:
    d = build_dataset(cfg) if dataset is None else dataset
    for enc, tier in zip(cfg.pair, ("lite", "heavy")):
        if enc not in d.tables:
            raise ConfigError(f"encoder {enc!r} not in dataset (have {sorted(d.tables)})")
        if d.profiles[enc].tier != tier:
            log.warning("encoder %s has tier %s but is used as %s", enc, d.profiles[enc].tier, tier)
    validate_taxonomy(d.taxonomy)
    d = assign_folds(d, cfg.k, cfg.seed)
    present = sorted(set(d.folds.tolist()))
    if cfg.workers == 1:
        return d, [prepare_fold(d, f, cfg) for f in present]
    # map() yields in submission order, so results never depend on completion order
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return d, list(pool.map(lambda f: prepare_fold(d, f, cfg), present))


# -- evaluation ---------------------------------------------------------------

@dataclass(eq=False)
class FoldResult:
    fold: int
    test_idx: np.ndarray
    decisions: list[RouteDecision]
    predictions: dict  # arm -> int array
    pathway: np.ndarray  # per test sample: "lite" / "heavy" / "alongside" in the routed arm
    risk_model: RiskModel


def evaluate(d: Dataset, prepared: Sequence[PreparedFold], routing: RoutingConfig) -> list[FoldResult]:
    results = []
    escalated = "alongside" if routing.heavy_transmission == "alongside" else "heavy"
    for pf in prepared:
        decisions = [gate(s, routing) for s in pf.signals]
        g = np.array([dec.gate for dec in decisions], dtype=bool)
        if escalated not in pf.probs:
            raise ConfigError("alongside transmission needs folds prepared with the alongside head")
        routed = np.where(g[:, None], pf.probs[escalated], pf.probs["lite"])
        preds = {
            "lite": predict_labels(pf.probs["lite"]),
            "heavy": predict_labels(pf.probs["heavy"]),
            "routed": predict_labels(routed),
        }
        pathway = np.where(g, escalated, "lite")
        results.append(FoldResult(pf.fold, pf.test_idx, decisions, preds, pathway, pf.risk_model))
    return results


def _safe_fairness(labels, preds, groups, taxonomy) -> Optional[FairnessReport]:
    try:
        return fairness(labels, preds, groups, taxonomy)
    except NoEvaluableSubgroup:
        return None


def _delta(eco, base):
    if eco is None or base is None:
        return (float("nan"), float("nan"))
    try:
        return fairness_delta(eco, base)
    except LiteRouteError:
        return (float("nan"), float("nan"))


def arm_rows(d: Dataset, idx, preds: Mapping, gates, pair, label: str) -> list[dict]:
    """One report row per arm for the samples ``idx``."""
    taxonomy = d.taxonomy
    labels = d.labels[idx]
    groups = [d.samples[i].subgroup for i in idx]
    e_lite = d.profiles[pair[0]].energy_per_sample
    e_heavy = d.profiles[pair[1]].energy_per_sample
    fair = {arm: _safe_fairness(labels, preds[arm], groups, taxonomy) for arm in ARMS}
    rows = []
    for arm in ARMS:
        row = {"arm": arm, "fold": label, "n": len(idx)}
        row.update(classification_summary(labels, preds[arm], taxonomy))
        f = fair[arm]
        row["tpr_mean"] = f.tpr_mean if f else float("nan")
        row["tpr_worst"] = f.tpr_worst if f else float("nan")
        row["tpr_gap"] = f.tpr_gap if f else float("nan")
        row["d_wg_tpr_vs_lite"], row["d_gap_vs_lite"] = _delta(f, fair["lite"])
        row["d_wg_tpr_vs_heavy"], row["d_gap_vs_heavy"] = _delta(f, fair["heavy"])
        if arm == "lite":
            row.update(energy_j=e_lite, routing_pct=0.0)
        elif arm == "heavy":
            row.update(energy_j=e_heavy, routing_pct=float("nan"))
        else:
            rep = account(list(gates), e_lite, e_heavy) if e_heavy > 0 else None
            r = float(np.mean(gates)) if len(gates) else float("nan")
            row.update(energy_j=rep.e_routed if rep else e_lite + r * e_heavy, routing_pct=r)
        row["savings_vs_heavy"] = (e_heavy - row["energy_j"]) / e_heavy if e_heavy > 0 else float("nan")
        row["_fairness"] = f
        rows.append(row)
    return rows


@dataclass(eq=False)
class RunReport:
    config: RunConfig
    dataset: Dataset
    folds: list[FoldResult]
    rows: list[dict]  # per (arm, fold) plus aggregate rows
    prepared: list = field(default_factory=list, repr=False)

    def row(self, arm: str, fold) -> dict:
        for r in self.rows:
            if r["arm"] == arm and r["fold"] == str(fold):
                return r
        raise KeyError((arm, fold))

    def pooled_predictions(self) -> dict:
        n = len(self.dataset)
        out = {arm: np.full(n, -1, dtype=int) for arm in ARMS}
        for fr in self.folds:
            for arm in ARMS:
                out[arm][fr.test_idx] = fr.predictions[arm]
        return out

    def pooled_gates(self) -> np.ndarray:
        g = np.zeros(len(self.dataset), dtype=int)
        for fr in self.folds:
            g[fr.test_idx] = [dec.gate for dec in fr.decisions]
        return g


def summarise(cfg: RunConfig, d: Dataset, results: list[FoldResult]) -> RunReport:
    rows = []
    for fr in results:
        rows += arm_rows(d, fr.test_idx, fr.predictions, [x.gate for x in fr.decisions], cfg.pair, str(fr.fold))
    for arm in ARMS:
        per_fold = [r for r in rows if r["arm"] == arm]
        mean_row = {"arm": arm, "fold": "mean", "n": sum(r["n"] for r in per_fold)}
        std_row = {"arm": arm, "fold": "std", "n": len(per_fold)}
        for col in METRIC_COLUMNS:
            vals = [r[col] for r in per_fold if not math.isnan(r[col])]
            if vals:
                m, s = aggregate_folds(vals) if len(vals) > 1 else (vals[0], 0.0)
            else:
                m = s = float("nan")
            mean_row[col], std_row[col] = m, s
        rows += [mean_row, std_row]
    report = RunReport(cfg, d, results, rows)
    idx = np.concatenate([fr.test_idx for fr in results]) if results else np.array([], dtype=int)
    order = np.sort(idx)
    pooled = report.pooled_predictions()
    rows += arm_rows(d, order, {a: pooled[a][order] for a in ARMS}, report.pooled_gates()[order], cfg.pair, "pooled")
    return report


def run_cv(cfg: RunConfig, dataset: Optional[Dataset] = None, write: bool = True) -> RunReport:
    """Full cross-validated evaluation of the lite, heavy and routed arms."""
    d, prepared = prepare_folds(cfg, dataset)
    report = summarise(cfg, d, evaluate(d, prepared, cfg.routing))
    report.prepared = list(prepared)
    if write and cfg.output_dir:
        write_report(report, _path(cfg.base_dir, cfg.output_dir), prepared)
    return report


# -- writing ------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def round6(obj):
    """Recursively round floats to 6 significant digits (NaN -> None)."""
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return None
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {str(k): round6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round6(v) for v in obj]
    if isinstance(obj, np.generic):
        return round6(obj.item())
    return obj


def decision_rows(report: RunReport):
    for fr in sorted(report.folds, key=lambda f: f.fold):
        for dec in fr.decisions:
            yield [dec.sample_id, fr.fold, dec.gate, fmt(dec.entropy), fmt(dec.norm_entropy), fmt(dec.delta),
                   fmt(dec.ambiguity), fmt(dec.score), fmt(dec.tab_risk), "|".join(dec.reasons),
                   int(dec.age_fallback), int(dec.loc_fallback)]


def report_rows(rows):
    for r in rows:
        yield [r["arm"], r["fold"], r["n"]] + [fmt(r[c]) for c in METRIC_COLUMNS]


def write_report(report: RunReport, out_dir, prepared: Sequence[PreparedFold] = ()) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = report.dataset
    (out / "decisions.csv").write_text(_csv_text(DECISION_COLUMNS, decision_rows(report)), encoding="utf-8")

    pred_rows = []
    for fr in sorted(report.folds, key=lambda f: f.fold):
        for j, i in enumerate(fr.test_idx):
            s = d.samples[i]
            for arm in report.config.arms:
                path = fr.pathway[j] if arm == "routed" else arm
                pred_rows.append([s.id, fr.fold, d.taxonomy.class_names[s.label], arm,
                                  d.taxonomy.class_names[fr.predictions[arm][j]], path])
    (out / "predictions.csv").write_text(
        _csv_text(("sample_id", "fold", "label", "arm", "prediction", "pathway"), pred_rows), encoding="utf-8")

    rows = [r for r in report.rows if r["arm"] in report.config.arms]
    (out / "report.csv").write_text(_csv_text(REPORT_COLUMNS, report_rows(rows)), encoding="utf-8")

    summary = {
        "config": report.config.to_dict(),
        "taxonomy": d.taxonomy.to_dict(),
        "n_samples": len(d),
        "rows": [{k: v for k, v in r.items() if not k.startswith("_")} for r in rows],
        "fairness": {
            f"{r['arm']}/{r['fold']}": r["_fairness"].to_dict()
            for r in rows if r.get("_fairness") is not None
        },
        "risk_models": {str(fr.fold): fr.risk_model.to_dict() for fr in report.folds},
    }
    (out / "report.json").write_text(json.dumps(round6(summary), indent=2) + "\n", encoding="utf-8")
    for pf in prepared:
        (out / f"heads_fold{pf.fold}.json").write_text(pf.heads.to_json() + "\n", encoding="utf-8")
        (out / f"risk_model_fold{pf.fold}.json").write_text(pf.risk_model.to_json() + "\n", encoding="utf-8")


def reaggregate(report_csv, out_csv=None) -> list[dict]:
    """Recompute mean/std rows from the per-fold rows of an existing report.csv."""
    with open(report_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(REPORT_COLUMNS):
            raise LiteRouteError(f"{report_csv}: not a report.csv (header {reader.fieldnames})")
        rows = list(reader)
    per_fold = [r for r in rows if r["fold"].isdigit()]
    arms = [a for a in ARMS if any(r["arm"] == a for r in per_fold)]
    out = []
    for arm in arms:
        fr = [r for r in per_fold if r["arm"] == arm]
        mean_row = {"arm": arm, "fold": "mean", "n": sum(int(r["n"]) for r in fr)}
        std_row = {"arm": arm, "fold": "std", "n": len(fr)}
        for col in METRIC_COLUMNS:
            vals = [float(r[col]) for r in fr if r[col] != ""]
            if not vals:
                m = s = float("nan")
            elif len(vals) == 1:
                m, s = vals[0], 0.0
            else:
                m, s = aggregate_folds(vals)
            mean_row[col], std_row[col] = m, s
        out += [mean_row, std_row]
    if out_csv is not None:
        Path(out_csv).write_text(_csv_text(REPORT_COLUMNS, report_rows(out)), encoding="utf-8")
    return out
