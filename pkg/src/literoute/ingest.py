"""Datasets: CSV loading/writing, stratified folds and a synthetic generator.

File layout (all UTF-8, empty cell = missing)::

    metadata.csv            sample_id,label,age,localization,subgroup,fold
    <encoder>_probs.csv     sample_id,p_0,...,p_{C-1}
    <encoder>_emb.csv       sample_id,e_0,...,e_{dim-1}
    profiles.json           [{encoder_id, tier, energy_per_sample_j, latency_ms, embedding_dim}, ...]
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import ClassTaxonomy, EncoderProfile, Sample, validate_taxonomy
from .errors import (
    DuplicateSampleId,
    InvalidSpec,
    RowCountMismatch,
    SchemaError,
    TooFewSamples,
    UnknownLabel,
)

METADATA_COLUMNS = ("sample_id", "label", "age", "localization", "subgroup", "fold")


def fmt(x) -> str:
    """Numbers are written with 6 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{float(x):.6g}"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EncoderTable:
    embeddings: np.ndarray
    probabilities: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "embeddings", _frozen(self.embeddings))
        if self.probabilities is not None:
            object.__setattr__(self, "probabilities", _frozen(self.probabilities))

    def take(self, idx) -> "EncoderTable":
        probs = None if self.probabilities is None else self.probabilities[idx]
        return EncoderTable(self.embeddings[idx], probs)


@dataclass(frozen=True, eq=False)
class Dataset:
    taxonomy: ClassTaxonomy
    samples: tuple[Sample, ...]
    tables: Mapping[str, EncoderTable]
    profiles: Mapping[str, EncoderProfile]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        n = len(self.samples)
        C = self.taxonomy.n_classes
        ids = [s.id for s in self.samples]
        if len(set(ids)) != n:
            raise DuplicateSampleId("duplicate sample ids")
        for s in self.samples:
            if s.label >= C:
                raise UnknownLabel(f"sample {s.id}: label {s.label} outside taxonomy")
        for enc, table in self.tables.items():
            if enc not in self.profiles:
                raise SchemaError(f"encoder {enc!r} has no profile")
            if table.embeddings.ndim != 2 or table.embeddings.shape[0] != n:
                raise RowCountMismatch(f"{enc}: {table.embeddings.shape[0]} embedding rows for {n} samples")
            if n and table.embeddings.shape[1] != self.profiles[enc].embedding_dim:
                raise SchemaError(f"{enc}: embedding dim {table.embeddings.shape[1]} != profile "
                                  f"{self.profiles[enc].embedding_dim}")
            if table.probabilities is not None and table.probabilities.shape != (n, C):
                raise RowCountMismatch(f"{enc}: probability matrix shape {table.probabilities.shape}, want {(n, C)}")

    def __len__(self):
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    @property
    def folds(self) -> np.ndarray:
        return np.array([-1 if s.fold is None else s.fold for s in self.samples], dtype=int)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.taxonomy, tuple(self.samples[i] for i in idx),
                       {k: t.take(idx) for k, t in self.tables.items()}, self.profiles)

    def with_samples(self, samples: Sequence[Sample]) -> "Dataset":
        return Dataset(self.taxonomy, tuple(samples), self.tables, self.profiles)

    def encoders(self, tier: str) -> list[str]:
        return [e for e, p in self.profiles.items() if p.tier == tier and e in self.tables]


# -- CSV I/O ------------------------------------------------------------------

def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if r]


def _opt(cell: str) -> Optional[str]:
    cell = cell.strip()
    return cell or None


def read_metadata(path, taxonomy: ClassTaxonomy) -> list[Sample]:
    header, rows = _read_csv(path)
    required = METADATA_COLUMNS[:5]
    if list(header[:5]) != list(required) or (len(header) > 5 and header[5] != "fold") or len(header) > 6:
        raise SchemaError(f"{path}: header must be {','.join(METADATA_COLUMNS)} (fold optional), got {header}")
    names = {n: i for i, n in enumerate(taxonomy.class_names)}
    samples, seen = [], set()
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        sid = row[0].strip()
        if sid in seen:
            raise DuplicateSampleId(f"{path}:{lineno}: duplicate sample_id {sid!r}")
        seen.add(sid)
        label = row[1].strip()
        if label not in names:
            raise UnknownLabel(f"{path}:{lineno}: label {label!r} not in taxonomy")
        age = _opt(row[2])
        fold = _opt(row[5]) if len(row) > 5 else None
        try:
            samples.append(Sample(
                id=sid,
                label=names[label],
                age=None if age is None else float(age),
                localisation=_opt(row[3]),
                subgroup=_opt(row[4]),
                fold=None if fold is None else int(fold),
            ))
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return samples


def read_matrix(path, ids: Sequence[str], prefix: str, width: Optional[int] = None) -> np.ndarray:
    """Read a ``sample_id,<prefix>0,...`` table and align its rows to ``ids``."""
    header, rows = _read_csv(path)
    if not header or header[0] != "sample_id":
        raise SchemaError(f"{path}: first column must be sample_id")
    cols = header[1:]
    if not cols or cols != [f"{prefix}{i}" for i in range(len(cols))]:
        raise SchemaError(f"{path}: columns must be {prefix}0..{prefix}<n-1>")
    if width is not None and len(cols) != width:
        raise SchemaError(f"{path}: expected {width} value columns, got {len(cols)}")
    if len(rows) != len(ids):
        raise RowCountMismatch(f"{path}: {len(rows)} rows for {len(ids)} samples")
    by_id = {}
    for row in rows:
        if len(row) != len(header):
            raise SchemaError(f"{path}: ragged row for {row[0]!r}")
        if row[0] in by_id:
            raise DuplicateSampleId(f"{path}: duplicate sample_id {row[0]!r}")
        by_id[row[0].strip()] = [float(v) for v in row[1:]]
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise SchemaError(f"{path}: no row for sample ids {missing[:5]}")
    return np.array([by_id[i] for i in ids], dtype=float).reshape(len(ids), len(cols))


def read_profiles(path) -> dict[str, EncoderProfile]:
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    if not isinstance(items, list):
        raise SchemaError(f"{path}: expected a JSON list of encoder profiles")
    try:
        return {p.encoder_id: p for p in map(EncoderProfile.from_dict, items)}
    except KeyError as exc:
        raise SchemaError(f"{path}: profile missing key {exc}") from exc


def load_dataset(metadata_path, encoder_table_paths: Mapping[str, Mapping[str, str]], taxonomy_config,
                 profiles=None) -> Dataset:
    """Load metadata plus per-encoder tables.

    ``encoder_table_paths`` maps encoder id to ``{"embeddings": path,
    "probabilities": path}`` (probabilities optional).  ``profiles`` is a path
    to a profiles JSON or an already-built mapping.
    """
    taxonomy = taxonomy_config if isinstance(taxonomy_config, ClassTaxonomy) else ClassTaxonomy.from_dict(taxonomy_config)
    validate_taxonomy(taxonomy)
    samples = read_metadata(metadata_path, taxonomy)
    ids = [s.id for s in samples]
    if profiles is None:
        raise SchemaError("encoder profiles are required")
    if not isinstance(profiles, Mapping):
        profiles = read_profiles(profiles)
    tables = {}
    for enc, paths in encoder_table_paths.items():
        if enc not in profiles:
            raise SchemaError(f"encoder {enc!r} has no profile")
        emb = read_matrix(paths["embeddings"], ids, "e_", profiles[enc].embedding_dim)
        probs = None
        if paths.get("probabilities"):
            probs = read_matrix(paths["probabilities"], ids, "p_", taxonomy.n_classes)
        tables[enc] = EncoderTable(emb, probs)
    return Dataset(taxonomy, samples, tables, dict(profiles))


def _write_rows(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_dataset(d: Dataset, out_dir) -> dict:
    """Write ``d`` in the CSV/JSON layout; returns a dataset config block."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = d.taxonomy.class_names
    _write_rows(out / "metadata.csv", METADATA_COLUMNS, [
        [s.id, names[s.label], fmt(s.age), s.localisation or "", s.subgroup or "", fmt(s.fold)]
        for s in d.samples
    ])
    encoders = {}
    for enc, t in d.tables.items():
        entry = {"embeddings": f"{enc}_emb.csv"}
        _write_rows(out / entry["embeddings"], ["sample_id"] + [f"e_{i}" for i in range(t.embeddings.shape[1])],
                    [[s.id] + [repr(float(v)) for v in row] for s, row in zip(d.samples, t.embeddings)])
        if t.probabilities is not None:
            entry["probabilities"] = f"{enc}_probs.csv"
            _write_rows(out / entry["probabilities"], ["sample_id"] + [f"p_{i}" for i in range(len(names))],
                        [[s.id] + [repr(float(v)) for v in row] for s, row in zip(d.samples, t.probabilities)])
        encoders[enc] = entry
    (out / "profiles.json").write_text(
        json.dumps([p.to_dict() for p in d.profiles.values()], indent=2) + "\n", encoding="utf-8")
    (out / "taxonomy.json").write_text(json.dumps(d.taxonomy.to_dict(), indent=2) + "\n", encoding="utf-8")
    block = {"metadata": "metadata.csv", "encoders": encoders, "profiles": "profiles.json",
             "taxonomy": "taxonomy.json"}
    (out / "dataset.json").write_text(json.dumps(block, indent=2) + "\n", encoding="utf-8")
    return block


# -- folds --------------------------------------------------------------------

def stratified_folds(d: Dataset, k: int, seed: int = 0, strict: bool = False) -> Dataset:
    """Assign every sample to one of ``k`` folds, stratified by label.

    Within a class the shuffled members are dealt round-robin, so per-class
    fold counts differ by at most one.  The dealing position carries over
    from class to class, which also balances total fold sizes.  A class with
    fewer than ``k`` members raises ``TooFewSamples`` when ``strict``, and
    otherwise only warns (its members land in distinct folds).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    labels = d.labels
    folds = np.full(len(d), -1, dtype=int)
    cursor = 0
    for c in range(d.taxonomy.n_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        if members.size < k:
            msg = f"class {d.taxonomy.class_names[c]!r} has {members.size} samples for {k} folds"
            if strict:
                raise TooFewSamples(msg)
            warnings.warn(msg, stacklevel=2)
        members = rng.permutation(members)
        folds[members] = (cursor + np.arange(members.size)) % k
        cursor = (cursor + members.size) % k
    return d.with_samples([replace(s, fold=int(f)) for s, f in zip(d.samples, folds)])


# -- synthetic data -----------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic dataset.

    Class-conditional embeddings are Gaussian blobs around per-tier random
    centres.  ``subgroup_lite_noise`` multiplies the lite noise for each
    subgroup, which is how a subgroup that the lite encoder handles badly is
    simulated.  Malignant cases are drawn preferentially from higher-index
    localisations, so site malignancy rates are non-uniform.
    """

    seed: int = 0
    n_samples: int = 1000
    n_classes: int = 7
    n_localisations: int = 6
    n_subgroups: int = 3
    class_prior: Optional[tuple] = None
    lite_noise: float = 1.0
    heavy_noise: float = 0.7
    age_range: tuple = (20.0, 85.0)
    lite_dim: int = 16
    heavy_dim: int = 32
    center_scale: float = 0.6
    danger_classes: Optional[tuple] = None
    subgroup_lite_noise: Optional[tuple] = None
    site_skew: float = 2.0
    lite_energy: float = 0.178
    heavy_energy: float = 0.392
    lite_id: str = "lite"
    heavy_id: str = "heavy"

    def __post_init__(self):
        for name in ("class_prior", "danger_classes", "subgroup_lite_noise", "age_range"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))
        problems = []
        if self.n_samples < 0:
            problems.append("n_samples < 0")
        if self.n_classes < 2:
            problems.append("n_classes < 2")
        if self.n_localisations < 1 or self.n_subgroups < 1:
            problems.append("need >= 1 localisation and subgroup")
        if self.lite_dim < 1 or self.heavy_dim < 1:
            problems.append("dims must be >= 1")
        if self.lite_noise < 0 or self.heavy_noise < 0 or self.heavy_noise > self.lite_noise:
            problems.append("need 0 <= heavy_noise <= lite_noise")
        if len(self.age_range) != 2 or not 0 <= self.age_range[0] <= self.age_range[1]:
            problems.append("age_range must be [lo, hi] with 0 <= lo <= hi")
        if self.class_prior is not None:
            p = np.asarray(self.class_prior, dtype=float)
            if p.shape != (self.n_classes,) or (p < 0).any() or abs(p.sum() - 1) > 1e-6:
                problems.append("class_prior must be a distribution over n_classes")
        if self.danger_classes is not None:
            dc = set(self.danger_classes)
            if not dc or not dc < set(range(self.n_classes)):
                problems.append("danger_classes must be a non-empty proper subset of classes")
        if self.subgroup_lite_noise is not None:
            if len(self.subgroup_lite_noise) != self.n_subgroups or min(self.subgroup_lite_noise) < 0:
                problems.append("subgroup_lite_noise needs one non-negative scale per subgroup")
        if problems:
            raise InvalidSpec("; ".join(problems))

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown SynthSpec keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def taxonomy(self) -> ClassTaxonomy:
        C = self.n_classes
        danger = self.danger_classes if self.danger_classes is not None else tuple(range(C - max(1, C // 2), C))
        safe = [c for c in range(C) if c not in danger]
        return validate_taxonomy(ClassTaxonomy(tuple(f"c{i}" for i in range(C)), frozenset(safe),
                                               frozenset(danger), frozenset(danger)))


# probability floor so no synthetic distribution is exactly one-hot
_PROB_EPS = 1e-6
_TEMP_FLOOR = 0.25


def similarity_probs(emb: np.ndarray, centers: np.ndarray, noise: float, log_prior: np.ndarray) -> np.ndarray:
    """Softmax over negative squared distances to the class centres.

    This is the class posterior under isotropic Gaussian noise of scale
    ``max(noise, 0.25)``, mixed with a 1e-6 uniform floor.
    """
    t = max(noise, _TEMP_FLOOR)
    d2 = ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    z = -d2 / (2 * t * t) + log_prior
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return (1 - _PROB_EPS) * p + _PROB_EPS / centers.shape[0]


def synth_generate(spec: SynthSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    C, N, L, G = spec.n_classes, spec.n_samples, spec.n_localisations, spec.n_subgroups
    taxonomy = spec.taxonomy()
    prior = np.full(C, 1.0 / C) if spec.class_prior is None else np.asarray(spec.class_prior, dtype=float)
    log_prior = np.log(np.clip(prior, 1e-300, None))

    centers_lite = rng.normal(size=(C, spec.lite_dim)) * spec.center_scale
    centers_heavy = rng.normal(size=(C, spec.heavy_dim)) * spec.center_scale

    labels = rng.choice(C, size=N, p=prior)
    malignant = np.isin(labels, sorted(taxonomy.malignant_set))
    # site weights: benign uniform, malignant skewed towards later sites
    w_mal = np.arange(1, L + 1, dtype=float) ** spec.site_skew
    w_mal /= w_mal.sum()
    w_ben = np.full(L, 1.0 / L)
    loc_idx = np.where(malignant, rng.choice(L, size=N, p=w_mal), rng.choice(L, size=N, p=w_ben))
    ages = rng.uniform(spec.age_range[0], spec.age_range[1], size=N)
    groups = rng.integers(0, G, size=N)

    scale = np.ones(G) if spec.subgroup_lite_noise is None else np.asarray(spec.subgroup_lite_noise, dtype=float)
    lite_sigma = spec.lite_noise * scale[groups]
    emb_lite = centers_lite[labels] + lite_sigma[:, None] * rng.normal(size=(N, spec.lite_dim))
    emb_heavy = centers_heavy[labels] + spec.heavy_noise * rng.normal(size=(N, spec.heavy_dim))

    width = max(1, len(str(max(N - 1, 0))))
    samples = tuple(
        Sample(
            id=f"s{i:0{width}d}",
            label=int(labels[i]),
            age=round(float(ages[i]), 1),
            localisation=f"site{int(loc_idx[i])}",
            subgroup=f"g{int(groups[i])}",
        )
        for i in range(N)
    )
    C_shape = (N, C)
    tables = {
        spec.lite_id: EncoderTable(emb_lite.reshape(N, spec.lite_dim),
                                   similarity_probs(emb_lite, centers_lite, spec.lite_noise, log_prior).reshape(C_shape)),
        spec.heavy_id: EncoderTable(emb_heavy.reshape(N, spec.heavy_dim),
                                    similarity_probs(emb_heavy, centers_heavy, spec.heavy_noise, log_prior).reshape(C_shape)),
    }
    profiles = {
        spec.lite_id: EncoderProfile(spec.lite_id, "lite", spec.lite_energy, spec.lite_dim),
        spec.heavy_id: EncoderProfile(spec.heavy_id, "heavy", spec.heavy_energy, spec.heavy_dim),
    }
    return Dataset(taxonomy, samples, tables, profiles)
