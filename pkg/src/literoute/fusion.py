"""Server-side fusion: linear softmax heads over [image embedding | tabular features].

Heads are multinomial logistic regressions trained with full-batch gradient
descent. Inputs are z-scored during training and the scaling is folded back
into the weights afterwards, so a trained head is a plain ``softmax(W x + b)``.

The step size is ``learning_rate / L`` where ``L`` bounds the curvature of the
mean cross-entropy (``0.5 * lambda_max(Z'Z / n) + l2``).  With
``learning_rate <= 1`` every step is guaranteed not to increase the loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Embedding, PredictiveDistribution, Sample, validate_distribution
from .errors import DegenerateTrainingSet, DimensionMismatch, LiteRouteError
from .risk import RiskModel


@dataclass(frozen=True)
class TabularFeaturiser:
    vocabulary: tuple[str, ...]
    a_min: float
    a_max: float

    @classmethod
    def fit(cls, train_samples: Sequence[Sample], risk_model: RiskModel) -> "TabularFeaturiser":
        vocab = sorted({s.localisation for s in train_samples if s.localisation is not None})
        return cls(tuple(vocab), risk_model.a_min, risk_model.a_max)

    @property
    def dim(self) -> int:
        return len(self.vocabulary) + 1

    def _age(self, age) -> float:
        if age is None:
            return 0.5
        if self.a_max == self.a_min:
            return 0.5
        return min(1.0, max(0.0, (age - self.a_min) / (self.a_max - self.a_min)))

    def transform(self, samples: Sequence[Sample]) -> np.ndarray:
        index = {loc: i for i, loc in enumerate(self.vocabulary)}
        out = np.zeros((len(samples), self.dim))
        for row, s in enumerate(samples):
            out[row, 0] = self._age(s.age)
            j = index.get(s.localisation)
            if j is not None:
                out[row, 1 + j] = 1.0
        return out

    def to_dict(self) -> dict:
        return {"vocabulary": list(self.vocabulary), "a_min": self.a_min, "a_max": self.a_max}

    @classmethod
    def from_dict(cls, d: dict) -> "TabularFeaturiser":
        return cls(tuple(d["vocabulary"]), float(d["a_min"]), float(d["a_max"]))


def featurise_tabular(s: Sample, f: TabularFeaturiser) -> Embedding:
    return Embedding(tuple(f.transform([s])[0]), encoder_id="tabular")


@dataclass(frozen=True)
class FusionSettings:
    epochs: int = 300
    learning_rate: float = 1.0
    l2: float = 1e-4
    init_scale: float = 0.01

    def __post_init__(self):
        if self.epochs < 0 or not self.learning_rate > 0 or self.l2 < 0:
            raise LiteRouteError("invalid fusion settings")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate, "l2": self.l2,
                "init_scale": self.init_scale}


@dataclass(eq=False)
class FusionHead:
    pathway: str
    weights: np.ndarray  # (C, image_dim + tab_dim)
    bias: np.ndarray  # (C,)
    image_dim: int
    tab_dim: int
    fold: Optional[int] = None
    seed: int = 0
    epochs: int = 0
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        self.weights.setflags(write=False)
        self.bias.setflags(write=False)
        if self.weights.shape != (self.bias.size, self.image_dim + self.tab_dim):
            raise DimensionMismatch("weight shape does not match declared dims")

    @property
    def n_classes(self) -> int:
        return self.bias.size

    def predict_proba(self, x_img, x_tab) -> np.ndarray:
        x_img = np.atleast_2d(np.asarray(x_img, dtype=float))
        x_tab = np.atleast_2d(np.asarray(x_tab, dtype=float))
        if x_img.shape[1] != self.image_dim:
            raise DimensionMismatch(f"{self.pathway} head expects image dim {self.image_dim}, got {x_img.shape[1]}")
        if x_tab.shape[1] != self.tab_dim:
            raise DimensionMismatch(f"{self.pathway} head expects tabular dim {self.tab_dim}, got {x_tab.shape[1]}")
        return softmax(np.hstack([x_img, x_tab]) @ self.weights.T + self.bias)

    def to_dict(self) -> dict:
        return {
            "pathway": self.pathway,
            "fold": self.fold,
            "seed": self.seed,
            "epochs": self.epochs,
            "image_dim": self.image_dim,
            "tab_dim": self.tab_dim,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusionHead":
        return cls(
            pathway=d["pathway"],
            weights=np.array(d["weights"], dtype=float),
            bias=np.array(d["bias"], dtype=float),
            image_dim=int(d["image_dim"]),
            tab_dim=int(d["tab_dim"]),
            fold=d.get("fold"),
            seed=int(d.get("seed", 0)),
            epochs=int(d.get("epochs", 0)),
        )


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def fuse_predict(h_img: Embedding, h_tab: Embedding, head: FusionHead) -> PredictiveDistribution:
    probs = head.predict_proba(h_img.as_array(), h_tab.as_array())[0]
    return validate_distribution(probs)


# -- training -----------------------------------------------------------------

def loss_and_grad(W, b, Z, y, l2: float):
    """Mean cross-entropy plus ``0.5 * l2 * ||W||^2`` and its gradients."""
    n = Z.shape[0]
    P = softmax(Z @ W.T + b)
    logp = np.log(np.clip(P[np.arange(n), y], 1e-300, None))
    loss = -logp.mean() + 0.5 * l2 * np.sum(W * W)
    R = P
    R[np.arange(n), y] -= 1.0
    R /= n
    return loss, R.T @ Z + l2 * W, R.sum(axis=0)


def fit_softmax_regression(X, y, n_classes: int, seed: int = 0, settings: FusionSettings = FusionSettings()):
    """Return (W, b, loss_history) in the original feature space."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.unique(y).size < 2:
        raise DegenerateTrainingSet("training fold contains fewer than 2 classes")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd

    n, d = Z.shape
    Za = np.hstack([Z, np.ones((n, 1))])
    curvature = 0.5 * np.linalg.eigvalsh(Za.T @ Za / n)[-1] + settings.l2
    step = settings.learning_rate / curvature

    rng = np.random.default_rng(seed)
    W = rng.normal(scale=settings.init_scale, size=(n_classes, d))
    b = np.zeros(n_classes)
    history = []
    for _ in range(settings.epochs):
        loss, gW, gb = loss_and_grad(W, b, Z, y, settings.l2)
        history.append(float(loss))
        W = W - step * gW
        b = b - step * gb
    history.append(float(loss_and_grad(W, b, Z, y, settings.l2)[0]))

    W_orig = W / sd
    b_orig = b - W_orig @ mu
    return W_orig, b_orig, history


@dataclass(eq=False)
class FusionHeads:
    lite: FusionHead
    heavy: FusionHead
    featuriser: TabularFeaturiser
    alongside: Optional[FusionHead] = None

    def escalated_head(self, heavy_transmission: str = "replace") -> FusionHead:
        if heavy_transmission == "alongside":
            if self.alongside is None:
                raise LiteRouteError("alongside head was not trained")
            return self.alongside
        return self.heavy

    def to_dict(self) -> dict:
        d = {"featuriser": self.featuriser.to_dict(), "lite": self.lite.to_dict(), "heavy": self.heavy.to_dict()}
        if self.alongside is not None:
            d["alongside"] = self.alongside.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FusionHeads":
        return cls(
            lite=FusionHead.from_dict(d["lite"]),
            heavy=FusionHead.from_dict(d["heavy"]),
            featuriser=TabularFeaturiser.from_dict(d["featuriser"]),
            alongside=FusionHead.from_dict(d["alongside"]) if "alongside" in d else None,
        )


def train_head(pathway, x_img, x_tab, labels, n_classes, seed=0, settings=FusionSettings(), fold=None) -> FusionHead:
    x_img = np.asarray(x_img, dtype=float)
    W, b, hist = fit_softmax_regression(np.hstack([x_img, x_tab]), labels, n_classes, seed, settings)
    return FusionHead(pathway, W, b, x_img.shape[1], x_tab.shape[1], fold=fold, seed=seed,
                      epochs=settings.epochs, loss_history=hist)


def train_fusion_heads(train_samples: Sequence[Sample], lite_emb, heavy_emb, risk_model: RiskModel, n_classes: int,
                       seed: int = 0, settings: FusionSettings = FusionSettings(), fold=None,
                       alongside: bool = False) -> FusionHeads:
    """Fit the tabular featuriser and the lite/heavy (and optional alongside) heads."""
    labels = np.array([s.label for s in train_samples], dtype=int)
    if np.unique(labels).size < 2:
        raise DegenerateTrainingSet("training fold contains fewer than 2 classes")
    feat = TabularFeaturiser.fit(train_samples, risk_model)
    x_tab = feat.transform(train_samples)
    lite = train_head("lite", lite_emb, x_tab, labels, n_classes, seed, settings, fold)
    heavy = train_head("heavy", heavy_emb, x_tab, labels, n_classes, seed, settings, fold)
    both = None
    if alongside:
        both = train_head("alongside", np.hstack([lite_emb, heavy_emb]), x_tab, labels, n_classes, seed, settings, fold)
    return FusionHeads(lite, heavy, feat, both)
