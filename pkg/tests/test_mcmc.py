from __future__ import annotations

from math import log

import numpy as np
import pytest

import oracle
from bayesct.core import CountTree, Series, TreeModel
from bayesct.exact import kbct
from bayesct.mcmc import McmcConfig, _Chain, gibbs_theta, jump_step, run_chain, run_chains, rw_step
from bayesct.prior import default_beta, enumerate_models
from conftest import random_instance


def chain_at(tree, model, beta=None, **kw):
    cfg = McmcConfig(1, beta=beta, initial=model, **kw)
    return _Chain(tree, cfg, np.random.default_rng(0))


def all_moves(model: TreeModel, D: int):
    for s in model.sorted_leaves():
        if len(s) < D:
            yield "grow", s
    for u in model.prunable:
        yield "prune", u


def apply(model: TreeModel, kind, node) -> TreeModel:
    return model.grow(node) if kind == "grow" else model.prune(node)


def small_tree(seed=30, m=2, D=3, n=60):
    rng = np.random.default_rng(seed)
    x = random_instance(rng, m, D, n)
    return x, CountTree.build(Series.from_symbols(x, m, D), D)


class TestRandomWalkRatio:
    def test_tiny_grow_from_root(self, tiny_tree):
        # one-step proposals both ways are certain at D=1, and the posterior odds are 1
        c = chain_at(tiny_tree, TreeModel.root(2), beta=0.5)
        assert c.log_ratio("grow", ()) == pytest.approx(0.0, abs=1e-12)
        c = chain_at(tiny_tree, TreeModel.complete(2, 1), beta=0.5)
        assert c.log_ratio("prune", ()) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("m,D", [(2, 3), (3, 2), (2, 4)])
    def test_proposals_are_distributions(self, m, D):
        _, tree = small_tree(31, m, D)
        for model in list(enumerate_models(m, D))[:60]:
            if model.size == 1:
                continue
            c = chain_at(tree, model)
            total = sum(c.move_qs(k, s)[0] for k, s in all_moves(model, D))
            assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("m,D", [(2, 3), (3, 2)])
    def test_reversibility(self, m, D):
        _, tree = small_tree(32, m, D)
        for model in enumerate_models(m, D):
            for kind, node in all_moves(model, D):
                nxt = apply(model, kind, node)
                back = "prune" if kind == "grow" else "grow"
                r = chain_at(tree, model).log_ratio(kind, node)
                r2 = chain_at(tree, nxt).log_ratio(back, node)
                assert r + r2 == pytest.approx(0.0, abs=1e-10)

    def test_ratio_is_joint_ratio_times_proposals(self):
        x, tree = small_tree(33, 2, 3)
        beta = 0.5
        table = dict(oracle.joint_table(x.tolist(), 3, 2, 3, beta))
        for model in enumerate_models(2, 3):
            for kind, node in all_moves(model, 3):
                c = chain_at(tree, model, beta=beta)
                qf, qr = c.move_qs(kind, node)
                nxt = apply(model, kind, node)
                expect = table[nxt.leaves] - table[model.leaves] + log(qr) - log(qf)
                assert c.log_ratio(kind, node) == pytest.approx(expect, abs=1e-9)


class TestJumpRatio:
    def setup_method(self):
        self.x, self.tree = small_tree(34, 2, 3)
        self.top = [t for t, _ in kbct(self.tree, 0.5, 3)]

    def test_reversible_with_indicators(self):
        for model in enumerate_models(2, 3):
            for kind, node in all_moves(model, 3):
                nxt = apply(model, kind, node)
                back = "prune" if kind == "grow" else "grow"
                kw = dict(sampler="jump", jump_p=0.3, top_models=self.top)
                r = chain_at(self.tree, model, **kw).log_ratio(kind, node)
                r2 = chain_at(self.tree, nxt, **kw).log_ratio(back, node)
                assert r + r2 == pytest.approx(0.0, abs=1e-10)

    def test_mixture_form(self):
        p, k = 0.4, len(self.top)
        keys = {t.leaves for t in self.top}
        for model in list(enumerate_models(2, 3))[:10]:
            for kind, node in all_moves(model, 3):
                c = chain_at(self.tree, model, sampler="jump", jump_p=p, top_models=self.top)
                qf, qr = c.move_qs(kind, node)
                nxt = apply(model, kind, node)
                num = (1 - p) * qr + p / k * (model.leaves in keys)
                den = (1 - p) * qf + p / k * (nxt.leaves in keys)
                rw = chain_at(self.tree, model).log_ratio(kind, node)
                assert c.log_ratio(kind, node) == pytest.approx(rw - log(qr / qf) + log(num / den), abs=1e-10)

    def test_non_neighbour_jump_from_outside_rejected(self):
        far = TreeModel.complete(2, 3)
        top = [TreeModel.root(2)]
        for seed in range(50):
            cfg = McmcConfig(1, sampler="jump", jump_p=0.99, top_models=top)
            assert jump_step(far, self.tree, cfg, seed) != TreeModel.root(2)


def test_rw_step_wrapper_moves_by_one_branch(tiny_tree):
    out = {rw_step(TreeModel.root(2), tiny_tree, McmcConfig(1, beta=0.5), s) for s in range(40)}
    assert out <= {TreeModel.root(2), TreeModel.complete(2, 1)}


def test_depth_zero_chain_stays_at_root(backend):
    tree = CountTree.build(Series.from_symbols([0, 1, 1], 2, 0), 0, backend=backend)
    tr = run_chain(McmcConfig(20, seed=1), tree)
    assert set(tr.samples) == {TreeModel.root(2)}


class TestRunChain:
    def test_zero_iterations(self, tiny_tree):
        tr = run_chain(McmcConfig(0, seed=1, initial=TreeModel.complete(2, 1)), tiny_tree)
        assert tr.samples == [TreeModel.complete(2, 1)]
        assert tr.acceptance_rate is None

    def test_burn_in_count(self, tiny_tree):
        tr = run_chain(McmcConfig(1000, seed=2, burn_in=0.25), tiny_tree)
        assert len(tr) == 750 and tr.burn_in == 250
        assert 0.0 <= tr.acceptance_rate <= 1.0

    def test_determinism(self):
        _, tree = small_tree(35, 2, 4, 100)
        a = run_chain(McmcConfig(2000, seed=7, theta_context=(0, 1, 0, 1)), tree)
        b = run_chain(McmcConfig(2000, seed=7, theta_context=(0, 1, 0, 1)), tree)
        assert a.samples == b.samples
        np.testing.assert_array_equal(a.theta, b.theta)
        c = run_chain(McmcConfig(2000, seed=8), tree)
        assert c.samples != a.samples

    def test_run_chains_spawned_streams(self):
        _, tree = small_tree(36, 2, 4, 100)
        a = run_chains(McmcConfig(500, seed=3), tree, 3)
        b = run_chains(McmcConfig(500, seed=3), tree, 3, workers=1)
        assert [t.samples for t in a] == [t.samples for t in b]
        assert a[0].samples != a[1].samples

    def test_trace_outputs(self):
        _, tree = small_tree(37, 2, 4, 100)
        tr = run_chain(McmcConfig(500, seed=4), tree)
        h = tr.depth_histogram(4)
        assert h.shape == (5,) and h.sum() == pytest.approx(1.0)
        assert sum(tr.frequencies().values()) == pytest.approx(1.0)
        assert tr.to_table().count("\n") == len(tr) + 1
        assert all(s.depth == d for s, d in zip(tr.samples, tr.depths.tolist()))

    def test_bad_config(self):
        for kw in (dict(n_iter=-1), dict(n_iter=1, burn_in=1.0), dict(n_iter=1, sampler="x"),
                   dict(n_iter=1, sampler="jump")):
            with pytest.raises(ValueError):
                McmcConfig(**kw)


def test_gibbs_mean_tiny(tiny_tree):
    # root leaf counts (2, 1) with γ = 1/2: θ(0) ~ Beta(2.5, 1.5), mean 0.625
    tr = run_chain(McmcConfig(20000, seed=11, burn_in=0.0, initial=TreeModel.root(2), theta_context=(0,)), tiny_tree)
    v = tr.theta[tr.depths == 0, 0]
    se = v.std() / np.sqrt(v.size)
    assert abs(v.mean() - 0.625) <= 4 * se


def test_gibbs_theta_draws_every_leaf(tiny_tree):
    draw = gibbs_theta(TreeModel.complete(2, 1), tiny_tree, None, np.random.default_rng(0))
    assert set(draw) == {(0,), (1,)}
    assert all(abs(sum(v) - 1) < 1e-12 for v in draw.values())


@pytest.mark.parametrize("sampler", ["rw", "jump"])
@pytest.mark.parametrize("m,D", [(2, 2), (2, 3), (3, 2)])
def test_chain_matches_exact_posterior(sampler, m, D):
    x, tree = small_tree(40 + m + D, m, D, 40)
    beta = default_beta(m)
    exact = oracle.posterior_table(x.tolist(), D, m, D, beta)
    top = [t for t, _ in kbct(tree, beta, 3)]
    cfg = McmcConfig(40000, seed=5, beta=beta, sampler=sampler, top_models=top)
    tr = run_chain(cfg, tree)
    for leaves, p in sorted(exact.items(), key=lambda kv: -kv[1])[:5]:
        ind = np.array([s.leaves == leaves for s in tr.samples], dtype=float)
        se = oracle.batch_means_se(ind)
        assert abs(ind.mean() - p) <= max(4 * se, 0.01), (leaves, ind.mean(), p)
