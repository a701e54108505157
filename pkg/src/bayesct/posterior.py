"""Posterior quantities over models and parameters."""

from __future__ import annotations

from dataclasses import dataclass
from math import exp
from typing import Sequence

import numpy as np

from .core import CountTree, TreeModel
from .likelihood import DirichletHyper, marginal_likelihood
from .prior import PriorConfig, model_prior


def log_joint(tree: CountTree, model: TreeModel, beta: float) -> float:
    """log π(T) + log P(x|T)."""
    return model_prior(model, PriorConfig(tree.m, tree.depth, beta)) + marginal_likelihood(tree, model)


def log_model_posterior(tree: CountTree, model: TreeModel, beta: float) -> float:
    return log_joint(tree, model, beta) - tree.log_evidence(beta)


def model_posterior(tree: CountTree, model: TreeModel, beta: float) -> float:
    """π(T|x) = π(T) P(x|T) / P*_D(x)."""
    return exp(log_model_posterior(tree, model, beta))


def bayes_factor(tree: CountTree, model_a: TreeModel, model_b: TreeModel) -> float:
    """log P(x|T_a) - log P(x|T_b), summed only over leaves the models do not share."""
    only_a = model_a.leaves - model_b.leaves
    only_b = model_b.leaves - model_a.leaves
    return sum(tree.log_pe(s) for s in only_a) - sum(tree.log_pe(s) for s in only_b)


@dataclass
class PosteriorReport:
    models: list[TreeModel]
    log_prior: list[float]
    log_posterior: list[float]
    log_joint: list[float]
    log_evidence: float

    @property
    def posterior(self) -> list[float]:
        return [exp(v) for v in self.log_posterior]

    @property
    def prior(self) -> list[float]:
        return [exp(v) for v in self.log_prior]

    def log_odds(self) -> np.ndarray:
        """Matrix of log(π(T_i|x) / π(T_j|x))."""
        v = np.asarray(self.log_posterior)
        return v[:, None] - v[None, :]


def posterior_report(tree: CountTree, models: Sequence[TreeModel], beta: float) -> PosteriorReport:
    cfg = PriorConfig(tree.m, tree.depth, beta)
    ev = tree.log_evidence(beta)
    lp = [model_prior(t, cfg) for t in models]
    lj = [p + marginal_likelihood(tree, t) for p, t in zip(lp, models)]
    return PosteriorReport(list(models), lp, [j - ev for j in lj], lj, ev)


def full_conditional(
    tree: CountTree, model: TreeModel, gamma: DirichletHyper | float | Sequence[float] | None = None
) -> dict[tuple, np.ndarray]:
    """Dirichlet parameters a_s + γ_s of θ_s given x and T, for each leaf s."""
    gamma = DirichletHyper.coerce(gamma if gamma is not None else tree.gamma, tree.m)
    return {
        s: tree.counts(s).astype(np.float64) + np.asarray(gamma.for_context(s))
        for s in model.sorted_leaves()
    }


@dataclass(frozen=True)
class PointEstimates:
    mle: float | None
    cond_map: float
    post_mean: float
    cond_map_boundary: bool


def point_estimates(
    a: Sequence[int], j: int, gamma: Sequence[float] | float | None = None
) -> PointEstimates:
    """MLE, Dirichlet mode and Dirichlet mean of θ_s(j) given counts a_s.

    When some a_i + γ_i < 1 the mode sits on the simplex boundary; the mode is
    then computed over the coordinates with a_i + γ_i >= 1 (the others are
    set to 0) and the boundary flag is raised.
    """
    a = np.asarray(a, dtype=np.float64)
    m = a.size
    g = np.asarray(DirichletHyper.coerce(gamma, m).base)
    total = a.sum()
    mle = float(a[j] / total) if total > 0 else None
    post = a + g
    post_mean = float(post[j] / post.sum())
    boundary = bool(np.any(post < 1.0))
    if not boundary:
        cond_map = float((post[j] - 1.0) / (post.sum() - m))
    else:
        keep = post >= 1.0
        if not keep.any():
            # every coordinate has an infinite density spike; the vertex
            # with the largest parameter is reported
            cond_map = float(j == int(np.argmax(post)))
        else:
            excess = np.where(keep, post - 1.0, 0.0)
            if excess.sum() == 0.0:
                cond_map = float(keep[j]) / float(keep.sum())
            else:
                cond_map = float(excess[j] / excess.sum())
    return PointEstimates(mle, cond_map, post_mean, boundary)


def rao_blackwell_estimate(
    trace: Sequence[TreeModel],
    tree: CountTree,
    s: Sequence[int],
    j: int,
    gamma: DirichletHyper | float | Sequence[float] | None = None,
) -> float:
    """Average over sampled models of E[θ_c(j) | x, T], c the leaf of T covering context s."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    gamma = DirichletHyper.coerce(gamma if gamma is not None else tree.gamma, tree.m)
    s = tuple(s)
    cache: dict[tuple, float] = {}
    total = 0.0
    for model in trace:
        leaf = model.leaf_for(s)
        v = cache.get(leaf)
        if v is None:
            post = tree.counts(leaf) + np.asarray(gamma.for_context(leaf))
            v = cache[leaf] = float(post[j] / post.sum())
        total += v
    return total / len(trace)
