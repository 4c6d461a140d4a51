"""Threshold grid sweeps and the (energy, worst-group TPR) Pareto frontier."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import RoutingConfig
from .errors import ConfigError, EmptyInput, NoEvaluableSubgroup
from .harness import RunConfig, _csv_text, _path, evaluate, prepare_folds, summarise
from .ingest import Dataset, fmt

GRID_AXES = ("lambda_H", "lambda_Delta", "tau_r", "tau_H", "tau_Delta", "tau_risk", "gate_mode",
             "heavy_transmission")


@dataclass(frozen=True)
class OperatingPoint:
    config: RoutingConfig
    energy: float  # J per sample, mean over all test predictions
    wg_tpr: float
    routing_pct: float
    n_test: int = 0
    aux: Mapping = field(default_factory=dict)

    @property
    def energy_total(self) -> float:
        return self.energy * self.n_test


def grid_configs(base: RoutingConfig, grid: Mapping[str, Sequence]) -> list[RoutingConfig]:
    """Cartesian product of the grid axes, lexicographic in the given axis order."""
    if not grid:
        raise ConfigError("empty sweep grid")
    unknown = set(grid) - set(GRID_AXES)
    if unknown:
        raise ConfigError(f"unknown grid axes {sorted(unknown)}")
    axes = list(grid)
    values = [list(grid[a]) for a in axes]
    if any(len(v) == 0 for v in values):
        raise ConfigError("every grid axis needs at least one value")
    return [replace(base, **dict(zip(axes, combo))) for combo in itertools.product(*values)]


def _point(cfg: RunConfig, d: Dataset, prepared, routing: RoutingConfig) -> OperatingPoint:
    report = summarise(replace(cfg, routing=routing), d, evaluate(d, prepared, routing))
    pooled = report.row("routed", "pooled")
    if np.isnan(pooled["tpr_worst"]):
        raise NoEvaluableSubgroup("no subgroup has a malignant test case; worst-group TPR undefined")
    return OperatingPoint(
        config=routing,
        energy=pooled["energy_j"],
        wg_tpr=pooled["tpr_worst"],
        routing_pct=pooled["routing_pct"],
        n_test=pooled["n"],
        aux={k: pooled[k] for k in ("tpr_mean", "tpr_gap", "macro_f1", "balanced_accuracy", "malignant_recall")},
    )


def grid_sweep(cfg: RunConfig, grid: Mapping[str, Sequence], dataset: Optional[Dataset] = None) -> list[OperatingPoint]:
    """Evaluate every grid cell under the full cross-validation protocol.

    Folds, risk models and heads are prepared once and shared by all cells;
    the heads do not depend on routing thresholds.
    """
    configs = grid_configs(cfg.routing, grid)
    prep_cfg = cfg
    if any(c.heavy_transmission == "alongside" for c in configs):
        prep_cfg = replace(cfg, routing=replace(cfg.routing, heavy_transmission="alongside"))
    d, prepared = prepare_folds(prep_cfg, dataset)
    return [_point(cfg, d, prepared, c) for c in configs]


def dominates(q: OperatingPoint, p: OperatingPoint) -> bool:
    return (q.energy <= p.energy and q.wg_tpr >= p.wg_tpr) and (q.energy < p.energy or q.wg_tpr > p.wg_tpr)


def pareto_front(points: Sequence[OperatingPoint]) -> list[OperatingPoint]:
    """Non-dominated points (minimise energy, maximise wg_tpr), by ascending energy.

    Points identical on both axes are kept once, the earliest in input order.
    """
    if not points:
        raise EmptyInput("no operating points")
    return [points[i] for i in pareto_indices([p.energy for p in points], [p.wg_tpr for p in points])]


def pareto_indices(energy, wg_tpr) -> list[int]:
    order = sorted(range(len(energy)), key=lambda i: (energy[i], -wg_tpr[i], i))
    keep, best = [], -np.inf
    for i in order:
        if wg_tpr[i] > best:
            keep.append(i)
            best = wg_tpr[i]
    return keep


def write_points(points: Sequence[OperatingPoint], path, axes: Sequence[str] = GRID_AXES) -> None:
    """Write all points with a ``frontier`` flag; plot-ready."""
    front = set(pareto_indices([p.energy for p in points], [p.wg_tpr for p in points])) if points else set()
    aux_keys = ("tpr_mean", "tpr_gap", "macro_f1", "balanced_accuracy", "malignant_recall")
    header = ["index", *axes, "energy_j", "energy_total_j", "n_test", "wg_tpr", "routing_pct", *aux_keys, "frontier"]
    rows = []
    for i, p in enumerate(points):
        cfg = p.config.to_dict()
        rows.append([i, *[cfg[a] if isinstance(cfg[a], str) else fmt(cfg[a]) for a in axes],
                     fmt(p.energy), fmt(p.energy_total), p.n_test, fmt(p.wg_tpr), fmt(p.routing_pct),
                     *[fmt(p.aux.get(k)) for k in aux_keys], int(i in front)])
    Path(path).write_text(_csv_text(header, rows), encoding="utf-8")


def run_sweep(cfg: RunConfig, grid: Mapping[str, Sequence], dataset: Optional[Dataset] = None) -> list[OperatingPoint]:
    points = grid_sweep(cfg, grid, dataset)
    if cfg.output_dir:
        out = _path(cfg.base_dir, cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_points(points, out / "points.csv")
    return points
