from __future__ import annotations

from math import exp, inf, log

import numpy as np
import pytest

import oracle
from bayesct._errors import DataError
from bayesct.core import CountTree, Series
from bayesct.exact import CtwState, ctw
from bayesct.predict import evaluate_log_loss, frozen_map_log_loss, predictive_dist
from bayesct.simulate import simulate_series
from conftest import random_instance


def test_predictive_tiny(backend):
    st = CtwState.from_series(Series.from_symbols([0, 0, 1, 0], 2, 1), 1, 0.5, backend=backend)
    p = predictive_dist(st)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    # P*(x, 0) by enumeration of the two models over [0, 0, 1, 0, 0]
    tab = oracle.joint_table([0, 0, 1, 0, 0], 1, 2, 1, 0.5)
    assert p[0] == pytest.approx(exp(oracle.logsumexp(v for _, v in tab)) * 16, abs=1e-12)


def test_predictive_is_mixture(backend):
    rng = np.random.default_rng(50)
    for _ in range(10):
        m, D = int(rng.integers(2, 4)), 2
        x = random_instance(rng, m, D, 25)
        st = CtwState.from_series(Series.from_symbols(x, m, D), D, 0.6, backend=backend)
        p = predictive_dist(st)
        base = oracle.logsumexp(v for _, v in oracle.joint_table(x.tolist(), D, m, D, 0.6))
        for a in range(m):
            ext = oracle.logsumexp(v for _, v in oracle.joint_table(x.tolist() + [a], D, m, D, 0.6))
            assert p[a] == pytest.approx(exp(ext - base), abs=1e-10)


def test_losses_telescope(backend):
    s = simulate_series("ternary5", 400, 5, rng=1)
    curve = evaluate_log_loss(s, 150, 5, backend=backend)
    full = ctw(CountTree.build(s, 5), 0.75)
    train = ctw(CountTree.build(Series(s.data[:150], s.context, s.alphabet), 5), 0.75)
    assert curve.total == pytest.approx(train - full, abs=1e-8)
    assert curve.losses.size == 250 and np.all(curve.losses > 0)
    assert curve.total_bits == pytest.approx(curve.total / log(2))
    assert curve.mean_bits == pytest.approx(curve.total_bits / 250)
    assert curve.cumulative[-1] == pytest.approx(curve.total)


def test_each_step_is_predictive_probability():
    s = simulate_series("renewal", 60, 8, rng=2)
    curve = evaluate_log_loss(s, 20, 8, beta=0.5)
    st = CtwState(2, 8, 0.5, s.context)
    for x in s.data[:20].tolist():
        st.update(x)
    for i, x in enumerate(s.data[20:].tolist()):
        assert curve.losses[i] == pytest.approx(-log(predictive_dist(st)[x]), abs=1e-10)
        st.update(x)


def test_train_bounds():
    s = Series.from_symbols([0, 1, 0, 1], 2, 1)
    assert evaluate_log_loss(s, 3, 1).losses.size == 0
    assert evaluate_log_loss(s, 0, 1).losses.size == 3
    with pytest.raises(DataError):
        evaluate_log_loss(s, 4, 1)
    with pytest.raises(DataError):
        evaluate_log_loss(s, 1, 2)


def test_frozen_map_baseline():
    s = Series.from_symbols([0, 0, 0, 0, 0, 1], 2, 1)
    curve = frozen_map_log_loss(s, 3, 1)
    # trained on zeros only: MLE gives θ(1) = 0, so the final 1 costs an infinite loss
    assert curve.losses.tolist() == [0.0, inf]


def test_frozen_map_uses_training_frequencies():
    s = Series.from_symbols([0, 1, 1, 0, 1, 1], 2, 0)
    curve = frozen_map_log_loss(s, 4, 0)
    np.testing.assert_allclose(curve.losses, [log(2), log(2)])
    assert curve.mean_bits == pytest.approx(1.0)


def test_table_output():
    s = Series.from_symbols([0, 1, 1, 0, 1], 2, 1)
    text = evaluate_log_loss(s, 1, 1).to_table()
    assert text.splitlines()[0] == "step\tcumulative_bits"
    assert len(text.splitlines()) == 4
