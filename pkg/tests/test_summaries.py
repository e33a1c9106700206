import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitsbi import ConfigurationError
from splitsbi.summaries import (
    MIN_PAIRS_PER_FEATURE,
    RegressionSummary,
    TrainingStore,
    distance,
    feature_names,
    featurize,
    mad_scale,
    n_features,
)


def _features_by_loops(path):
    """Slow, independent feature computation used as an oracle."""
    path = np.asarray(path, dtype=float)
    n, d = path.shape
    out = []
    for c in range(d):
        y = list(path[:, c])
        m = sum(y) / n
        dev = [v - m for v in y]
        ss = sum(v * v for v in dev)
        acf = []
        for lag in (1, 2):
            num = sum(dev[t] * dev[t - lag] for t in range(lag, n))
            acf.append(num / ss if ss > 0 else 0.0)
        diffs = [y[t + 1] - y[t] for t in range(n - 1)]
        dm = sum(diffs) / len(diffs)
        dsd = (sum((v - dm) ** 2 for v in diffs) / len(diffs)) ** 0.5
        out += [m, (ss / n) ** 0.5, acf[0], acf[1], min(y), max(y), dm, dsd, y[0], y[-1]]
    for a in range(d):
        for b in range(a + 1, d):
            xa, xb = path[:, a] - path[:, a].mean(), path[:, b] - path[:, b].mean()
            den = np.sqrt((xa**2).sum() * (xb**2).sum())
            out.append(float((xa * xb).sum() / den) if den > 0 else 0.0)
    return np.array(out)


def test_feature_count():
    assert n_features(3) == 33
    assert n_features(1) == 10
    assert len(feature_names(3)) == 33


def test_featurize_matches_loop_oracle():
    rng = np.random.default_rng(0)
    path = rng.normal(size=(50, 3)).cumsum(axis=0)
    np.testing.assert_allclose(featurize(path), _features_by_loops(path), rtol=1e-12, atol=1e-12)


def test_featurize_constant_and_identical_channels():
    f = featurize(np.full((20, 1), 7.0))
    assert f[0] == 7.0 and f[1] == 0.0 and f[2] == 0.0 and f[3] == 0.0 and f[6] == 0.0 and f[7] == 0.0
    x = np.random.default_rng(1).normal(size=(30, 1))
    f = featurize(np.hstack([x, x]))
    assert f[-1] == pytest.approx(1.0)


def test_featurize_batches():
    paths = np.random.default_rng(2).normal(size=(4, 3, 25, 2))
    f = featurize(paths)
    assert f.shape == (4, 3, n_features(2))
    np.testing.assert_allclose(f[2, 1], featurize(paths[2, 1]))


def test_ridge_recovers_exact_linear_model():
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(400, n_features(1)))
    coef = rng.normal(size=(2, feats.shape[1]))
    thetas = feats @ coef.T + np.array([1.0, -2.0])
    model = RegressionSummary.fit_features(feats, thetas, 1, penalty=0.0)
    np.testing.assert_allclose(model.summarize_features(feats), thetas, atol=1e-6)


def test_ridge_matches_normal_equations():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, n_features(1)))
    T = rng.normal(size=(200, 1))
    lam = 0.3
    model = RegressionSummary.fit_features(X, T, 1, penalty=lam)
    Z = (X - X.mean(0)) / X.std(0)
    A = np.hstack([np.ones((200, 1)), Z])
    # unpenalised intercept: centre the targets, solve for the slopes
    slopes = np.linalg.solve(Z.T @ Z / 200 + lam * np.eye(Z.shape[1]), Z.T @ (T - T.mean()) / 200)
    np.testing.assert_allclose(model.coef[0, 1:], slopes[:, 0], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(model.coef[0, 0], T.mean(), rtol=1e-9)
    assert A.shape[1] == model.coef.shape[1]


def test_constant_target_gives_constant_summary():
    rng = np.random.default_rng(5)
    store = TrainingStore(1, 1)
    store.extend(rng.normal(size=(200, 20, 1)), np.full((200, 1), 3.5))
    model = RegressionSummary.fit(store)
    np.testing.assert_allclose(model.summarize(rng.normal(size=(5, 20, 1))), 3.5, atol=1e-9)


def test_fit_needs_enough_pairs_and_falls_back():
    rng = np.random.default_rng(6)
    store = TrainingStore(1, 1)
    store.extend(rng.normal(size=(5, 20, 1)), rng.normal(size=(5, 1)))
    with pytest.raises(ConfigurationError):
        RegressionSummary.fit(store)
    big = TrainingStore(1, 1)
    big.extend(rng.normal(size=(MIN_PAIRS_PER_FEATURE * 10, 20, 1)), rng.normal(size=(100, 1)))
    prev = RegressionSummary.fit(big)
    assert prev.refit(store) is prev


def test_fit_is_order_invariant():
    rng = np.random.default_rng(7)
    paths, thetas = rng.normal(size=(150, 20, 1)), rng.normal(size=(150, 2))
    perm = rng.permutation(150)
    a, b = TrainingStore(1, 2), TrainingStore(1, 2)
    a.extend(paths, thetas)
    b.extend(paths[perm], thetas[perm])
    probe = rng.normal(size=(10, 20, 1))
    np.testing.assert_allclose(RegressionSummary.fit(a).summarize(probe), RegressionSummary.fit(b).summarize(probe), atol=1e-10)


def test_store_copy_is_independent():
    rng = np.random.default_rng(8)
    s = TrainingStore(1, 1)
    s.extend(rng.normal(size=(3, 5, 1)), rng.normal(size=(3, 1)))
    c = s.copy()
    c.extend(rng.normal(size=(2, 5, 1)), rng.normal(size=(2, 1)))
    assert len(s) == 3 and len(c) == 5


def test_summary_save_load(tmp_path):
    rng = np.random.default_rng(9)
    model = RegressionSummary.fit_features(rng.normal(size=(100, 10)), rng.normal(size=(100, 2)), 1)
    model.save(tmp_path / "s.json")
    back = RegressionSummary.load(tmp_path / "s.json")
    probe = rng.normal(size=(3, 10))
    np.testing.assert_array_equal(back.summarize_features(probe), model.summarize_features(probe))


def test_distance_examples():
    assert distance([1.0, 2.0], [1.0, 2.0], [1.0, 1.0]) == 0.0
    assert distance([3.0, 4.0], [0.0, 0.0], [1.0, 1.0]) == pytest.approx(5.0)
    with pytest.raises(ConfigurationError):
        distance([1.0], [0.0], [0.0])


def test_mad_scale_fallbacks():
    s = np.array([[1.0, 5.0, 2.0], [2.0, 5.0, 2.0], [3.0, 5.0, 2.0], [10.0, 5.0, 2.0]])
    s[3, 2] = 2.0
    scale = mad_scale(s)
    assert scale[0] == pytest.approx(1.0)
    assert scale[1] == 1.0
    t = np.array([[0.0], [0.0], [0.0], [4.0]])
    assert mad_scale(t)[0] == pytest.approx(np.std(t))


vec = st.lists(st.floats(-100, 100), min_size=3, max_size=3).map(np.array)


@settings(max_examples=100)
@given(vec, vec, vec, st.lists(st.floats(0.1, 10), min_size=3, max_size=3).map(np.array))
def test_distance_is_a_metric(a, b, c, scale):
    assert distance(a, b, scale) == pytest.approx(distance(b, a, scale))
    assert distance(a, c, scale) <= distance(a, b, scale) + distance(b, c, scale) + 1e-9
    assert distance(a, b, 2 * scale) == pytest.approx(distance(a, b, scale) / 2)
