import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from alsc import cart, kernels


def test_gini_examples():
    assert cart.gini([1.0]) == 0.0
    assert cart.gini([0.5, 0.5]) == 0.5
    assert cart.gini([0.7, 0.2, 0.1]) == pytest.approx(0.46, abs=1e-15)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=12))
def test_gini_matches_oracle(w):
    p = np.array(w) / sum(w)
    assert cart.gini(p) == pytest.approx(oracles.gini(p), abs=1e-12)


def test_separable_split_at_midpoint():
    X = np.array([[-3.0], [-2.0], [-0.5], [0.5], [1.0], [4.0]] * 5)
    y = np.array([0, 0, 0, 1, 1, 1] * 5)
    t = cart.grow(X, y, controls=cart.Controls(min_node_size=2))
    assert t.root.rule.threshold == 0.0 and t.root.rule.feature == 0
    assert all(leaf.impurity == 0 for leaf in t.leaves())
    assert (t.predict(X) == y).all()


def test_pure_labels_give_root_leaf():
    t = cart.grow(np.random.default_rng(0).normal(size=(50, 3)), np.full(50, 4))
    assert t.root.is_leaf and t.predict(np.zeros((2, 3))).tolist() == [4, 4]


def test_single_row():
    t = cart.grow(np.array([[1.0, 2.0]]), np.array([7]))
    assert t.root.is_leaf and t.predict_one([0.0, 0.0]) == 7


@pytest.mark.parametrize("backend", kernels.available())
def test_root_split_matches_exhaustive(rng, backend):
    for trial in range(20):
        X = np.round(rng.normal(size=(20, 2)), 3)
        y = rng.integers(0, 3, 20)
        w = rng.uniform(0.5, 2.0, 20)
        f, thr, gain = oracles.best_split_exhaustive(X, y, w)
        kernels.use(backend)
        try:
            t = cart.grow(X, y, w, controls=cart.Controls(min_node_size=2, min_rel_gain=0))
        finally:
            kernels.use(kernels.available()[0])
        if f is None:
            assert t.root.is_leaf
            continue
        assert t.root.rule.feature == f
        assert t.root.rule.threshold == pytest.approx(thr, abs=1e-12)
        assert t.root.rule.gain == pytest.approx(gain, rel=1e-9)


def test_weight_doubling_keeps_structure(rng):
    X = rng.normal(size=(300, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int) + (X[:, 2] > 1)
    w = rng.uniform(0.5, 1.5, 300)
    a, b = cart.grow(X, y, w), cart.grow(X, y, 2 * w)
    assert [(n.id, n.rule and (n.rule.feature, n.rule.threshold)) for n in a.nodes()] == \
           [(n.id, n.rule and (n.rule.feature, n.rule.threshold)) for n in b.nodes()]


def test_noise_labels_prune_to_root(rng):
    X = rng.normal(size=(500, 5))
    y = rng.integers(0, 2, 500)
    t = cart.fit(X, y, seed=1)
    assert t.root.is_leaf


def test_pruning_keeps_separating_split(rng):
    X = rng.uniform(-1, 1, (400, 3))
    y = (X[:, 1] > 0.2).astype(int)
    t = cart.fit(X, y, seed=0)
    assert not t.root.is_leaf and t.root.rule.feature == 1
    assert (t.predict(X) == y).all()


def test_pruned_not_worse_than_unpruned_on_noisy_signal(rng):
    def data(n):
        X = rng.uniform(-1, 1, (n, 4))
        y = ((X[:, 0] > 0) ^ (X[:, 1] > 0.3)).astype(int)
        flip = rng.random(n) < 0.3
        return X, np.where(flip, 1 - y, y)

    X, y = data(2000)
    Xt, yt = data(5000)
    full = cart.grow(X, y, controls=cart.Controls(min_node_size=5, min_rel_gain=0))
    pruned = cart.prune(full, seed=2)
    e_full = np.mean(full.predict(Xt) != yt)
    e_pruned = np.mean(pruned.predict(Xt) != yt)
    se = math.sqrt(e_full * (1 - e_full) / len(yt))
    assert e_pruned <= e_full + se
    assert pruned.n_leaves < full.n_leaves


def test_cp_table_is_monotone(rng):
    X = rng.normal(size=(800, 3))
    y = (X[:, 0] > 0).astype(int) + 2 * (X[:, 1] > 0.5)
    y = np.where(rng.random(800) < 0.1, rng.integers(0, 4, 800), y)
    t = cart.fit(X, y, seed=0)
    alphas = [row[0] for row in t.cp_table]
    leaves = [row[1] for row in t.cp_table]
    assert alphas == sorted(alphas) and leaves == sorted(leaves, reverse=True)


def _surrogate_fixture(rng):
    x0 = rng.uniform(-1, 1, 400)
    X = np.column_stack([x0, 3 * x0 + 10, rng.normal(size=400)])
    return X, (x0 > 0).astype(int)


def test_surrogate_decides_when_primary_missing(rng):
    X, y = _surrogate_fixture(rng)
    t = cart.grow(X, y)
    assert t.root.rule.feature in (0, 1)
    sur = t.root.rule.surrogates[0]
    assert sur.feature == 1 - t.root.rule.feature and sur.agreement == 1.0
    Xm = X.copy()
    Xm[:, t.root.rule.feature] = np.nan
    assert (t.predict(Xm) == y).all()
    assert (t.predict(X) == y).all()


def test_all_missing_row_still_gets_label(rng):
    X, y = _surrogate_fixture(rng)
    t = cart.grow(X, y)
    out = t.predict(np.full((3, 3), np.nan))
    assert set(out.tolist()) <= {0, 1} and len(out) == 3


def test_schema_checks(rng):
    X, y = _surrogate_fixture(rng)
    t = cart.grow(X, y, feature_names=["a", "b", "c"])
    assert (t.predict(X[:, [2, 0, 1]], ["c", "a", "b"]) == t.predict(X)).all()
    with pytest.raises(cart.SchemaError):
        t.predict(X[:, :2], ["a", "c"])


def test_text_roundtrip(tmp_path, small_features):
    fm = small_features
    rows = np.arange(0, len(fm), 5)
    t = cart.fit(fm.values[rows], fm.labels[rows], None, fm.names, seed=0)
    t.write(tmp_path / "t.tree")
    back = cart.ClassificationTree.read(tmp_path / "t.tree")
    assert back.to_text() == t.to_text()
    assert np.array_equal(back.predict(fm.values, fm.names), t.predict(fm.values, fm.names))


def test_backends_grow_identical_trees(small_features):
    if len(kernels.available()) < 2:
        pytest.skip("compiled kernels not built")
    fm = small_features
    rows = np.arange(0, len(fm), 3)
    texts = []
    for b in ("compiled", "python"):
        kernels.use(b)
        texts.append(cart.fit(fm.values[rows], fm.labels[rows], None, fm.names, seed=0).to_text())
    kernels.use("compiled")
    assert texts[0] == texts[1]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 120), st.integers(1, 4))
def test_tree_invariants(seed, n, nclass):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    X[rng.random((n, 3)) < 0.1] = np.nan
    y = rng.integers(0, nclass, n) * 2
    w = rng.uniform(0.1, 3.0, n)
    t = cart.grow(X, y, w, controls=cart.Controls(min_node_size=2))
    assert t.n_leaves <= n
    assert sum(leaf.weight for leaf in t.leaves()) == pytest.approx(w.sum(), rel=1e-12)
    assert all(nd.rule.gain > 0 for nd in t.nodes() if not nd.is_leaf)
    pred = t.predict(rng.normal(size=(10, 3)))
    assert set(pred.tolist()) <= set(y.tolist())
    assert cart.grow(X, y, w, controls=cart.Controls(min_node_size=2)).to_text() == t.to_text()
