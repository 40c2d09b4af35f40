"""Autoencoder numerics, scoring contracts, ROC sweep, model files."""

import numpy as np
import pytest

from clicksift.detector import (
    DetectorError,
    SiteVerdict,
    TrainConfig,
    _init_params,
    aggregate_app_verdict,
    calibrate,
    classify,
    evaluate_loss,
    load_model,
    loss_and_grads,
    roc_curve,
    save_model,
    score,
    score_many,
    train,
)
from clicksift.features import NormalizationParams


def _random_params(seed, dim=7, hidden=16, latent=3):
    return _init_params(dim, hidden, latent, np.random.default_rng(seed))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = _random_params(seed)
    x = rng.uniform(0, 1, size=(8, 7))
    eps = rng.standard_normal((8, 3))
    beta = 1e-3
    _, _, _, grads = loss_and_grads(params, x, eps, beta)
    h = 1e-5
    checked = 0
    names = sorted(params)
    while checked < 20:
        name = names[rng.integers(len(names))]
        flat = params[name].reshape(-1)
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + h
        up = evaluate_loss(params, x, eps, beta)
        flat[idx] = orig - h
        down = evaluate_loss(params, x, eps, beta)
        flat[idx] = orig
        numeric = (up - down) / (2 * h)
        analytic = grads[name].reshape(-1)[idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        assert abs(numeric - analytic) / denom < 1e-4, (name, idx)
        checked += 1


def test_kl_nonnegative_and_loss_finite():
    rng = np.random.default_rng(3)
    params = _random_params(3)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=(6, 7))
        eps = rng.standard_normal((6, 3))
        loss, recon, kl, _ = loss_and_grads(params, x, eps, 1e-3)
        assert kl >= 0.0
        assert np.isfinite(loss) and recon >= 0.0


def test_train_on_zeros_collapses():
    x = np.zeros((60, 7))
    model = train(x, TrainConfig(seed=0, epochs=300))
    assert score(model, np.zeros(7)) < 1e-3


def test_training_reduces_loss_multiple_seeds():
    rng = np.random.default_rng(9)
    x = rng.uniform(0, 0.5, size=(80, 7))
    for seed in (0, 1, 2):
        model = train(x, TrainConfig(seed=seed, epochs=60))
        assert model.params  # train() itself asserts final < initial


def test_train_rejects_small_sets():
    with pytest.raises(DetectorError):
        train(np.zeros((10, 7)), TrainConfig(seed=0))


def test_two_cluster_margin():
    rng = np.random.default_rng(4)
    benign = 0.2 + 0.01 * rng.standard_normal((120, 7))
    model = train(benign, TrainConfig(seed=0))
    held_out = 0.2 + 0.01 * rng.standard_normal((40, 7))
    far = 0.9 * np.ones((40, 7)) + 0.01 * rng.standard_normal((40, 7))
    near_err = float(np.mean(score_many(model, held_out)))
    far_err = float(np.mean(score_many(model, far)))
    assert far_err >= 5 * near_err


def test_score_deterministic_and_nonnegative():
    rng = np.random.default_rng(5)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=1, epochs=40))
    v = rng.uniform(0, 1, 7)
    assert score(model, v) == score(model, v)
    for _ in range(20):
        assert score(model, rng.uniform(-3, 3, 7)) >= 0.0


def test_score_rejects_wrong_dimension():
    rng = np.random.default_rng(6)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=1, epochs=10))
    with pytest.raises(DetectorError):
        score(model, np.zeros(6))


def test_classify_strict_inequality_at_threshold():
    rng = np.random.default_rng(7)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=1, epochs=10))
    v = rng.uniform(0, 1, 7)
    exact = score(model, v)
    model.threshold = exact
    assert classify(model, v).label == "Benign"
    model.threshold = np.nextafter(exact, -np.inf)
    assert classify(model, v).label == "Fraud"


def test_classify_requires_calibration():
    rng = np.random.default_rng(8)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=1, epochs=10))
    with pytest.raises(DetectorError):
        classify(model, np.zeros(7))


def test_raising_threshold_never_flips_to_fraud():
    rng = np.random.default_rng(10)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=1, epochs=10))
    vs = rng.uniform(0, 1, (30, 7))
    low = {i: classify(model, v, threshold=0.01).label for i, v in enumerate(vs)}
    high = {i: classify(model, v, threshold=0.5).label for i, v in enumerate(vs)}
    for i in low:
        if low[i] == "Benign":
            assert high[i] == "Benign"


# ---------------------------------------------------------------------------
# ROC


def test_roc_perfect_separation():
    scores = np.array([0.1, 0.2, 0.9, 1.5])
    labels = np.array([0, 0, 1, 1])
    result = roc_curve(scores, labels)
    assert result.auc == 1.0
    assert 0.2 < result.best_threshold < 0.9
    assert result.best_j == 1.0


def test_roc_random_scores_auc_half():
    rng = np.random.default_rng(11)
    scores = rng.uniform(size=4000)
    labels = (rng.uniform(size=4000) < 0.5).astype(int)
    assert abs(roc_curve(scores, labels).auc - 0.5) < 0.05


def test_roc_requires_both_classes():
    with pytest.raises(DetectorError):
        roc_curve(np.array([1.0, 2.0]), np.array([1, 1]))


def test_roc_tie_break_keeps_positive_threshold():
    # inseparable scores: every cut has J = 0; the highest cut wins
    scores = np.array([0.5, 0.5, 0.5, 0.5])
    labels = np.array([0, 1, 0, 1])
    result = roc_curve(scores, labels)
    assert result.best_threshold > 0.0
    assert result.best_j == 0.0


def test_roc_cut_reproduces_verdicts():
    rng = np.random.default_rng(12)
    scores = np.concatenate([rng.uniform(0, 1, 50), rng.uniform(0.5, 2, 50)])
    labels = np.array([0] * 50 + [1] * 50)
    result = roc_curve(scores, labels)
    predicted = scores > result.best_threshold
    tpr = predicted[labels == 1].mean()
    fpr = predicted[labels == 0].mean()
    assert abs((tpr - fpr) - result.best_j) < 1e-12


def test_calibrate_returns_copy():
    rng = np.random.default_rng(13)
    model = train(rng.uniform(0, 0.3, (60, 7)), TrainConfig(seed=1, epochs=10))
    vectors = np.vstack([rng.uniform(0, 0.3, (20, 7)), rng.uniform(0.7, 1, (20, 7))])
    labels = np.array([0] * 20 + [1] * 20)
    calibrated = calibrate(model, vectors, labels)
    assert calibrated.threshold is not None
    assert model.threshold is None
    assert calibrated.params is model.params  # shares weights, new threshold


# ---------------------------------------------------------------------------
# Aggregation


def test_aggregate_empty_is_benign():
    assert aggregate_app_verdict([]).label == "Benign"


def test_aggregate_any_fraud_flags_app():
    verdicts = [
        SiteVerdict("a#1", "A::m", 0.1, "Benign", 1.0),
        SiteVerdict("a#2", "A::n", 5.0, "Fraud", 1.0),
        SiteVerdict("a#3", "A::o", 0.2, "Benign", 1.0),
    ]
    app = aggregate_app_verdict(verdicts)
    assert app.label == "Fraud"
    assert app.fraud_locations == ["A::n"]


# ---------------------------------------------------------------------------
# Determinism and model files


def _toy_norm():
    return NormalizationParams(
        mins=np.zeros(7), maxs=np.ones(7), weights=np.full(7, 1 / 7)
    )


def test_identical_seed_bit_identical_model_file(tmp_path):
    rng = np.random.default_rng(14)
    x = rng.uniform(0, 1, (60, 7))
    for run in (1, 2):
        model = train(x.copy(), TrainConfig(seed=42, epochs=30), norm=_toy_norm())
        save_model(model, tmp_path / f"m{run}.json")
    assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_model_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(15)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=3, epochs=20),
                  norm=_toy_norm())
    model.threshold = 0.123456789012345
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    for key in model.params:
        assert np.array_equal(loaded.params[key], model.params[key])
    assert loaded.threshold == model.threshold
    assert loaded.config == model.config
    v = rng.uniform(0, 1, 7)
    assert score(loaded, v) == score(model, v)


def test_model_version_mismatch_fails(tmp_path):
    rng = np.random.default_rng(16)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=3, epochs=5),
                  norm=_toy_norm())
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = path.read_text().replace('"version":1', '"version":99')
    path.write_text(doc)
    with pytest.raises(DetectorError):
        load_model(path)


def test_model_file_records_reference_threshold(tmp_path):
    import json
    rng = np.random.default_rng(17)
    model = train(rng.uniform(0, 1, (60, 7)), TrainConfig(seed=3, epochs=5),
                  norm=_toy_norm())
    save_model(model, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["reference_threshold"] == 2.04
    assert doc["config_digest"] == model.config.digest()
