import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import expected_min_of_sample, lasso_kkt_violation, ridge_gradient_descent

from decomprank.features import FEATURE_NAMES, RC_FEATURES
from decomprank.ranking import (
    FeatureScaler,
    RankingModel,
    feature_spread_diagnostic,
    fit_knn,
    fit_lasso,
    fit_ridge,
    fit_voting,
    label_dataset,
    leave_one_instance_out,
    min_max_normalize,
    random_selection,
    random_selection_expectation,
    rank_and_select,
    rc_only_model,
    train_model,
)
from decomprank.sampling import make_rng


def test_min_max_examples():
    np.testing.assert_array_equal(min_max_normalize([2, 4, 10]), [0, 0.25, 1])
    np.testing.assert_array_equal(min_max_normalize([7, 7, 7]), [0, 0, 0])
    v = np.array([0.0, 0.3, 1.0, 0.5])
    np.testing.assert_array_equal(min_max_normalize(v), v)
    with pytest.raises(ValueError):
        min_max_normalize([])


def rows_for(pairs, iid="a"):
    return [(iid, f"{iid}:{k}", [float(k)], g, t) for k, (g, t) in enumerate(pairs)]


def test_label_endpoints():
    ds = label_dataset(rows_for([(0, 0), (10, 100)]), ("f",))
    np.testing.assert_array_equal(ds.score, [0, 1])


def test_label_equal_weighting():
    ds = label_dataset(rows_for([(0, 100), (10, 0)]), ("f",))
    np.testing.assert_array_equal(ds.score, [0.5, 0.5])


def test_label_three_by_hand():
    # gaps 2, 5, 8 -> 0, .5, 1; times 30, 10, 20 -> 1, 0, .5
    ds = label_dataset(rows_for([(2, 30), (5, 10), (8, 20)]), ("f",))
    np.testing.assert_allclose(ds.score, [0.5, 0.25, 0.75], atol=1e-15)
    assert ds.meta["a"] == {"gap_min": 2.0, "gap_max": 8.0, "time_min": 10.0, "time_max": 30.0}


def test_label_per_instance_and_infinite_gap():
    rows = rows_for([(1, 1), (3, 2)], "a") + rows_for([(math.inf, 5), (4, 1), (0, 3)], "b")
    ds = label_dataset(rows, ("f",))
    np.testing.assert_allclose(ds.g, [0, 1, 1, 1, 0])
    assert np.all(ds.score == 0.5 * ds.g + 0.5 * ds.t)


def test_label_single_row_warns():
    with pytest.warns(UserWarning):
        ds = label_dataset(rows_for([(3, 3)]), ("f",))
    assert ds.score[0] == 0


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0, 1e3), st.floats(0, 1e3)), min_size=2, max_size=20))
def test_scores_in_unit_interval(pairs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = label_dataset(rows_for(pairs), ("f",))
    assert np.all((ds.score >= 0) & (ds.score <= 1))
    best_both = [k for k in range(len(pairs))
                 if pairs[k][0] == min(p[0] for p in pairs) and pairs[k][1] == min(p[1] for p in pairs)]
    for k in range(len(pairs)):
        assert (ds.score[k] == 0) == (k in best_both)


def test_ridge_one_dimensional():
    X = np.array([[1.0], [2.0]])
    y = np.array([1.0, 2.0])
    assert math.isclose(fit_ridge(X, y, 0.0).weights[0], 1.0)
    xc, yc = X[:, 0] - 1.5, y - 1.5
    want = (xc @ yc) / (xc @ xc + 0.3)
    assert math.isclose(fit_ridge(X, y, 0.3).weights[0], want)


def test_ridge_rank_deficient_needs_alpha():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(ValueError):
        fit_ridge(X, [1, 2, 3], 0.0)
    fit_ridge(X, [1, 2, 3], 0.01)


@pytest.mark.parametrize("seed", range(20))
def test_ridge_matches_gradient_descent(seed):
    rng = make_rng(seed, "ridge-gd")
    X = rng.random((30, 5))
    y = X @ rng.normal(size=5) + 0.1 * rng.normal(size=30)
    w = fit_ridge(X, y, 0.01).weights
    np.testing.assert_allclose(w, ridge_gradient_descent(X, y, 0.01), atol=1e-6)


def test_lasso_kill_zone():
    rng = make_rng(1, "kill")
    X = rng.random((25, 4))
    y = rng.random(25)
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    lam_max = np.max(np.abs(Xc.T @ yc)) / len(y)
    assert np.all(fit_lasso(X, y, lam_max * 1.0001).weights == 0)
    assert np.any(fit_lasso(X, y, lam_max * 0.5).weights != 0)


@pytest.mark.parametrize("seed", range(20))
def test_lasso_kkt(seed):
    rng = make_rng(seed, "lasso-kkt")
    X = rng.random((40, 6))
    y = X @ (rng.normal(size=6) * (rng.random(6) < 0.6)) + 0.05 * rng.normal(size=40)
    for alpha in (1e-4, 1e-3, 1e-2, 1e-1):
        w = fit_lasso(X, y, alpha).weights
        assert lasso_kkt_violation(X, y, w, alpha) <= 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_lasso_l1_shrinks_with_alpha(seed):
    rng = make_rng(seed, "lasso-path")
    X = rng.random((40, 6))
    y = X @ rng.normal(size=6) + 0.1 * rng.normal(size=40)
    norms = [np.abs(fit_lasso(X, y, a).weights).sum() for a in (1e-4, 1e-3, 1e-2, 1e-1)]
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_knn_examples():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert fit_knn(X, y, 1).predict(X[2]) == [3.0]
    assert fit_knn(X, y, 4).predict([[9.0, 9.0]]) == [2.5]
    with pytest.raises(ValueError):
        fit_knn(np.zeros((0, 2)), [], 1)


def test_knn_matches_linear_scan():
    rng = make_rng(4, "knn")
    X = rng.random((40, 3))
    y = rng.random(40)
    model = fit_knn(X, y, 5)
    for q in rng.random((50, 3)):
        d = [(float(np.sqrt(((X[i] - q) ** 2).sum())), i) for i in range(len(X))]
        want = np.mean([y[i] for _, i in sorted(d)[:5]])
        assert math.isclose(model.predict(q)[0], want, rel_tol=1e-12)


def test_voting_examples():
    X = np.array([[0.0], [1.0], [2.0]])
    base = fit_ridge(X, [0.0, 1.0, 2.0])
    same = fit_voting([base, base])
    np.testing.assert_allclose(same.predict(X), base.predict(X))
    zero = RankingModel("ridge", weights=np.zeros(1), intercept=0.0)
    one = RankingModel("ridge", weights=np.zeros(1), intercept=1.0)
    assert fit_voting([zero, one]).predict([[5.0]]) == [0.5]
    with pytest.raises(ValueError):
        fit_voting([base])


def test_voting_is_average_of_members():
    rng = make_rng(2, "vote")
    X = rng.random((30, 16))
    y = rng.random(30)
    model = train_model("voting", X, y)
    Q = rng.random((20, 16))
    parts = [train_model(k, X, y).predict(Q) for k in ("ridge", "lasso", "knn")]
    np.testing.assert_allclose(model.predict(Q), np.mean(parts, axis=0), atol=1e-14)


def test_model_json_round_trip():
    rng = make_rng(3, "json")
    X = rng.random((12, 16))
    y = rng.random(12)
    for kind in ("ridge", "lasso", "knn", "voting", "rc_ridge", "rc_lasso"):
        m = train_model(kind, X, y, FEATURE_NAMES)
        back = RankingModel.from_json(m.to_json())
        np.testing.assert_array_equal(back.predict(X), m.predict(X))


def test_scaler_affine_invariance():
    rng = make_rng(5, "affine")
    X = rng.random((20, 3))
    Y = X.copy()
    Y[:, 1] = 7.5 * Y[:, 1] - 3.0
    np.testing.assert_allclose(FeatureScaler.fit(X).transform(X), FeatureScaler.fit(Y).transform(Y), atol=1e-14)


class Oracle(RankingModel):
    def __init__(self, values):
        super().__init__("oracle")
        self.values = np.asarray(values, dtype=float)

    def predict(self, X):
        return self.values


def test_perfect_and_reversed_rankers():
    scores = np.array([0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 1.0])
    keys = [f"k{i}" for i in range(10)]
    X = np.zeros((10, 1))
    assert rank_and_select(Oracle(scores), keys, X, scores, 3).best_score == 0.0
    rev = rank_and_select(Oracle(-scores), keys, X, scores, 3)
    # the three worst true scores are 1.0, 0.9, 0.8; best of them renormalised
    assert math.isclose(rev.best_score, (0.8 - 0.1) / 0.9)
    assert rank_and_select(Oracle(-scores), keys, X, scores, 10).best_score == 0.0


def test_fewer_rows_than_top_k_uses_all():
    scores = np.array([0.3, 0.6])
    sel = rank_and_select(Oracle([1.0, 0.0]), ["a", "b"], np.zeros((2, 1)), scores, 8)
    assert sel.selected == ["b", "a"]
    assert sel.best_score == 0.0


def test_ties_broken_by_key():
    sel = rank_and_select(Oracle([0.0, 0.0, 0.0]), ["c", "a", "b"], np.zeros((3, 1)), [0.1, 0.2, 0.3], 2)
    assert sel.selected == ["a", "b"]


def test_random_ranker_expectation():
    rng = make_rng(6, "orderstat")
    scores = rng.random(14)
    exact = random_selection_expectation(scores, 8)
    assert math.isclose(exact, expected_min_of_sample(min_max_normalize(scores), 8), rel_tol=1e-12)
    draws = [random_selection(scores, rng, 8) for _ in range(4000)]
    se = np.std(draws) / math.sqrt(len(draws))
    assert abs(np.mean(draws) - exact) <= 4 * se


def _dataset(n_inst=3, per=12, seed=0, dims=16):
    rng = make_rng(seed, "ds")
    rows = []
    for i in range(n_inst):
        for k in range(per):
            rows.append((f"i{i}", f"i{i}:{k}", rng.random(dims), float(rng.random() * 50), float(rng.random() * 9)))
    return label_dataset(rows, FEATURE_NAMES[:dims])


def test_loio_folds_cover_rows_once_and_never_leak():
    ds = _dataset()
    tested = np.zeros(len(ds), dtype=int)
    seen = []

    def audit(iid, train):
        seen.append(iid)
        assert all(ds.instance_ids[r] != iid for r in train)
        tested[ds.rows_of(iid)] += 1

    out = leave_one_instance_out(ds, "ridge", 4, audit)
    assert seen == ds.instances() == [r["instance"] for r in out]
    assert np.all(tested == 1)


def test_loio_two_instances_train_once_each():
    ds = _dataset(n_inst=2)
    calls = []
    leave_one_instance_out(ds, "lasso", 4, lambda iid, train: calls.append((iid, len(train))))
    assert calls == [("i0", 12), ("i1", 12)]


def test_loio_needs_two_instances():
    with pytest.raises(ValueError):
        leave_one_instance_out(_dataset(n_inst=1), "ridge")


def test_loio_duplicate_instance_matches_twin_fit():
    base = _dataset(n_inst=1, per=15, seed=3)
    rows = []
    for iid in ("a", "b"):
        for r in range(len(base)):
            rows.append((iid, f"{iid}:{r}", base.X[r], base.gap[r], base.time[r]))
    ds = label_dataset(rows, base.feature_names)
    res = leave_one_instance_out(ds, "ridge", 5)
    twin = train_model("ridge", ds.X[ds.rows_of("b")], ds.score[ds.rows_of("b")], ds.feature_names)
    held = ds.rows_of("a")
    want = rank_and_select(twin, [ds.keys[r] for r in held], ds.X[held], ds.score[held], 5)
    assert abs(res[0]["rmse"] - want.rmse) <= 1e-9
    assert res[0]["selected_score"] == want.best_score


def test_rc_only_constant_features_give_zero_weights():
    ds = _dataset()
    cols = [ds.feature_names.index(n) for n in RC_FEATURES]
    ds.X[:, cols] = 0.25
    assert np.all(rc_only_model(ds, "ridge").weights == 0)
    assert np.all(rc_only_model(ds, "lasso").weights == 0)


def test_rc_only_matches_column_masked_full_ridge():
    ds = _dataset()
    cols = [ds.feature_names.index(n) for n in RC_FEATURES]
    masked = np.zeros_like(ds.X)
    masked[:, cols] = ds.X[:, cols]
    full = train_model("ridge", masked, ds.score, ds.feature_names)
    rc = rc_only_model(ds, "ridge")
    np.testing.assert_allclose(full.weights[cols], rc.weights, atol=1e-12)
    others = [j for j in range(len(ds.feature_names)) if j not in cols]
    assert np.all(full.weights[others] == 0)


def test_rc_sign_when_dense_relaxations_are_better():
    rng = make_rng(8, "sign")
    rows = []
    for i in range(4):
        for k in range(30):
            x = rng.random(16)
            dense = x[FEATURE_NAMES.index("avg_rc_nonzero_prop")]
            rows.append((f"s{i}", f"s{i}:{k}", x, 40 * (1 - dense) + rng.random(), 5 * (1 - dense) + rng.random()))
    ds = label_dataset(rows)
    w = dict(zip(RC_FEATURES, rc_only_model(ds, "ridge").weights))
    assert w["avg_rc_nonzero_prop"] < 0


def test_feature_spread_examples():
    assert feature_spread_diagnostic(np.ones((10, 3))) == 1.0
    X = np.tile(np.arange(100.0)[:, None] % 10, (1, 2))
    X[17, 1] = 1e6
    assert feature_spread_diagnostic(X) == 0.99


def test_feature_spread_matches_quartile_scan():
    rng = make_rng(9, "spread")
    X = rng.standard_t(3, size=(200, 5))
    inside = 0
    cols = [np.sort(X[:, j]) for j in range(5)]

    def q(v, p):
        h = (len(v) - 1) * p
        lo = math.floor(h)
        return v[lo] + (h - lo) * (v[min(lo + 1, len(v) - 1)] - v[lo])

    for r in range(200):
        ok = True
        for j in range(5):
            q1, q3 = q(cols[j], 0.25), q(cols[j], 0.75)
            iqr = q3 - q1
            ok &= q1 - 1.5 * iqr <= X[r, j] <= q3 + 1.5 * iqr
        inside += ok
    assert feature_spread_diagnostic(X) == inside / 200
