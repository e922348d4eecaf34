import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from alsc.sampling import (SplitPlan, class_weights, make_rng, quota, simple_random_sample,
                           stratified_sample)


def test_quota_examples():
    assert quota(10, 1000, 26) == 5
    assert quota(1000, 260, 26) == 10
    assert quota(1, 1000, 26) == 1
    assert quota(2, 1000, 26) == 1
    assert quota(0, 1000, 26) == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 10**6), st.integers(1, 30))
def test_quota_matches_oracle(S, k, m):
    assert quota(S, k, m) == oracles.quota(S, k, m)


def test_weight_examples():
    assert class_weights({1: 0.5, 2: 0.5}, {1: 0.5, 2: 0.5}) == {1: 1.0, 2: 1.0}
    w = class_weights({1: 0.9, 2: 0.1}, {1: 0.5, 2: 0.5})
    assert w[1] == pytest.approx(1.8, abs=1e-15) and w[2] == pytest.approx(0.2, abs=1e-15)
    w = class_weights({1: 0.99, 2: 0.01}, {1: 0.9, 2: 0.1})
    assert w[2] == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        class_weights({1: 1.0}, {1: 0.5, 2: 0.5})


def test_rare_classes_survive():
    labels = np.array([2] * 5000 + [13] * 3 + [9] * 1 + [5] * 400)
    plan = stratified_sample(labels, 2000, seed=4)
    got = np.unique(labels[plan.train_ids]).tolist()
    assert got == [2, 5, 9, 13]
    assert plan.sampled == {2: 500, 5: 200, 9: 1, 13: 1}
    assert plan.promoted == [9]
    assert np.intersect1d(plan.train_ids, plan.test_ids).size == 0
    assert len(plan.train_ids) + len(plan.test_ids) == len(labels)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 300), min_size=1, max_size=6), st.integers(10, 500),
       st.integers(0, 2**31))
def test_reweighted_sample_matches_population(sizes, k, seed):
    labels = np.repeat(np.arange(len(sizes)) * 3 + 2, sizes)
    if k < len(sizes):
        return
    plan = stratified_sample(labels, k, seed)
    y = labels[plan.train_ids]
    w = plan.case_weights(y)
    for c, S in zip(np.unique(labels), sizes):
        assert abs(w[y == c].sum() / w.sum() - S / len(labels)) <= 1e-12
        assert (y == c).sum() >= 1


def test_plan_is_deterministic_and_serializes(tmp_path):
    labels = np.random.default_rng(0).integers(0, 4, 3000)
    a, b = stratified_sample(labels, 800, 7), stratified_sample(labels, 800, 7)
    assert a.to_text() == b.to_text()
    a.write(tmp_path / "p.plan")
    back = SplitPlan.read(tmp_path / "p.plan")
    assert back.to_text() == a.to_text()
    assert stratified_sample(labels, 800, 8).to_text() != a.to_text()


def test_sample_errors():
    with pytest.raises(ValueError):
        stratified_sample(np.array([1, 2, 3]), 2, 0)
    with pytest.raises(ValueError):
        simple_random_sample(10, 11, 0)


def test_simple_random_identity_and_repeat():
    assert simple_random_sample(25, 25, 3).tolist() == list(range(25))
    assert np.array_equal(simple_random_sample(1000, 50, 9), simple_random_sample(1000, 50, 9))


def test_inclusion_frequency_binomial():
    hits = np.zeros(100)
    for s in range(200):
        hits[simple_random_sample(100, 50, s)] += 1
    sd = math.sqrt(200 * 0.25)
    assert np.all(np.abs(hits - 100) <= 4 * sd)


def test_rng_is_mersenne_twister():
    assert isinstance(make_rng(1).bit_generator, np.random.MT19937)
