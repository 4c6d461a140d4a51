import numpy as np
import pytest

from literoute import Embedding, Sample, validate_distribution
from literoute.errors import DegenerateTrainingSet, DimensionMismatch
from literoute.fusion import (
    FusionHead,
    FusionHeads,
    FusionSettings,
    TabularFeaturiser,
    featurise_tabular,
    fit_softmax_regression,
    fuse_predict,
    loss_and_grad,
    train_fusion_heads,
)
from literoute.ingest import SynthSpec, synth_generate
from literoute.risk import calibrate


def test_tabular_features():
    f = TabularFeaturiser(("face", "back"), 20.0, 80.0)
    assert featurise_tabular(Sample("a", 0, 80.0, "face"), f).values == (1.0, 1.0, 0.0)
    assert f.transform([Sample("b", 0, 50.0, "ear")]).tolist() == [[0.5, 0.0, 0.0]]
    assert f.transform([Sample("c", 0, None, "back")]).tolist() == [[0.5, 0.0, 1.0]]
    assert f.transform([Sample("d", 0, 95.0, None)])[0, 0] == 1.0


def _fixture():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(5, 4))
    y = np.array([0, 1, 2, 1, 0])
    W = rng.normal(scale=0.5, size=(3, 4))
    b = rng.normal(scale=0.5, size=3)
    return W, b, Z, y


def test_gradient_matches_finite_differences():
    W, b, Z, y = _fixture()
    l2 = 0.01
    _, gW, gb = loss_and_grad(W.copy(), b.copy(), Z, y, l2)
    analytic = np.concatenate([gW.ravel(), gb])
    theta = np.concatenate([W.ravel(), b])
    eps = 1e-6
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        hi, lo = theta.copy(), theta.copy()
        hi[i] += eps
        lo[i] -= eps
        f = lambda t: loss_and_grad(t[:12].reshape(3, 4), t[12:], Z, y, l2)[0]
        numeric[i] = (f(hi) - f(lo)) / (2 * eps)
    rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    assert rel < 1e-4


def test_loss_non_increasing(small_synth):
    d = small_synth
    X = d.tables["lite"].embeddings
    _, _, hist = fit_softmax_regression(X, d.labels, d.taxonomy.n_classes, seed=0, settings=FusionSettings(epochs=150))
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    assert hist[-1] < hist[0]


def _separable():
    spec = SynthSpec(seed=5, n_samples=600, n_classes=4, heavy_noise=0.0, lite_dim=6, heavy_dim=8)
    return synth_generate(spec)


def test_separable_heavy_head_fits():
    d = _separable()
    samples = list(d.samples)
    rm = calibrate(samples, d.taxonomy)
    heads = train_fusion_heads(samples, d.tables["lite"].embeddings, d.tables["heavy"].embeddings, rm,
                               d.taxonomy.n_classes, seed=0)
    P = heads.heavy.predict_proba(d.tables["heavy"].embeddings, heads.featuriser.transform(samples))
    assert (P.argmax(axis=1) == d.labels).mean() >= 0.95


def test_same_seed_identical_weights(small_synth):
    d = small_synth
    X = d.tables["heavy"].embeddings
    a = fit_softmax_regression(X, d.labels, 4, seed=7, settings=FusionSettings(epochs=40))
    b = fit_softmax_regression(X, d.labels, 4, seed=7, settings=FusionSettings(epochs=40))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_single_class_is_degenerate():
    with pytest.raises(DegenerateTrainingSet):
        fit_softmax_regression(np.ones((4, 2)), [1, 1, 1, 1], 3)


def test_zero_head_is_uniform():
    head = FusionHead("lite", np.zeros((4, 5)), np.zeros(4), 3, 2)
    p = fuse_predict(Embedding((1.0, -2.0, 3.0)), Embedding((0.4, 1.0)), head)
    assert p.probs == (0.25,) * 4


def test_outputs_are_distributions():
    rng = np.random.default_rng(1)
    head = FusionHead("heavy", rng.normal(scale=30, size=(3, 6)), rng.normal(size=3), 4, 2)
    for row in head.predict_proba(rng.normal(scale=10, size=(50, 4)), rng.normal(size=(50, 2))):
        validate_distribution(row, 3)


def test_dimension_mismatch():
    head = FusionHead("heavy", np.zeros((3, 10)), np.zeros(3), 8, 2)
    with pytest.raises(DimensionMismatch):
        head.predict_proba(np.zeros((1, 4)), np.zeros((1, 2)))


def test_heads_round_trip(small_synth):
    import json
    d = small_synth
    samples = list(d.samples)
    rm = calibrate(samples, d.taxonomy)
    heads = train_fusion_heads(samples, d.tables["lite"].embeddings, d.tables["heavy"].embeddings, rm, 4,
                               settings=FusionSettings(epochs=20), alongside=True)
    back = FusionHeads.from_dict(json.loads(heads.to_json()))
    x_tab = heads.featuriser.transform(samples)
    for name in ("lite", "heavy"):
        h1, h2 = getattr(heads, name), getattr(back, name)
        X = d.tables[name].embeddings
        assert np.array_equal(h1.predict_proba(X, x_tab), h2.predict_proba(X, x_tab))
    assert back.escalated_head("alongside").image_dim == 6 + 8
