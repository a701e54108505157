"""Estimated probabilities, marginal likelihoods and likelihoods given parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import inf, lgamma, log
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .core import CountTree, ParamSet, Series, TreeModel


@dataclass(frozen=True)
class DirichletHyper:
    """Dirichlet hyperparameters: a base vector plus per-context overrides."""

    base: tuple[float, ...]
    overrides: Mapping[tuple[int, ...], tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        base = tuple(float(g) for g in self.base)
        object.__setattr__(self, "base", base)
        ov = {tuple(k): tuple(float(g) for g in v) for k, v in dict(self.overrides).items()}
        object.__setattr__(self, "overrides", ov)
        for vec in (base, *ov.values()):
            if len(vec) != len(base):
                raise ValueError("all Dirichlet vectors must have the alphabet size")
            if not all(g > 0 for g in vec):
                raise ValueError("Dirichlet hyperparameters must be positive")

    @classmethod
    def default(cls, m: int) -> "DirichletHyper":
        return cls((0.5,) * m)

    @classmethod
    def coerce(cls, value, m: int) -> "DirichletHyper":
        """Accept None (default 1/2), a scalar, a length-m vector or an instance."""
        if value is None:
            return cls.default(m)
        if isinstance(value, DirichletHyper):
            if len(value.base) != m:
                raise ValueError("Dirichlet vector length must equal alphabet size")
            return value
        if np.isscalar(value):
            return cls((float(value),) * m)
        vec = tuple(float(g) for g in value)
        if len(vec) != m:
            raise ValueError("Dirichlet vector length must equal alphabet size")
        return cls(vec)

    def for_context(self, ctx: Sequence[int]) -> tuple[float, ...]:
        return self.overrides.get(tuple(ctx), self.base)


def estimated_prob_dirichlet(a: Sequence[int], gamma: Sequence[float]) -> float:
    """log P_e(a, gamma) = log Γ(M')/Γ(M+M') + Σ_j log Γ(a_j+γ_j)/Γ(γ_j)."""
    if len(a) != len(gamma):
        raise ValueError("count and hyperparameter vectors differ in length")
    if any(g <= 0 for g in gamma):
        raise ValueError("Dirichlet hyperparameters must be positive")
    big_m = 0
    gsum = 0.0
    acc = 0.0
    for aj, gj in zip(a, gamma):
        aj = int(aj)
        if aj < 0:
            raise ValueError("counts must be nonnegative")
        big_m += aj
        gsum += gj
        if aj:
            acc += lgamma(aj + gj) - lgamma(gj)
    if big_m == 0:
        return 0.0
    return acc + lgamma(gsum) - lgamma(big_m + gsum)


def estimated_prob(a: Sequence[int]) -> float:
    """log of the Krichevsky–Trofimov estimated probability (all γ_j = 1/2)."""
    return estimated_prob_dirichlet(a, (0.5,) * len(a))


def marginal_likelihood(tree: "CountTree", model: "TreeModel") -> float:
    """log P(x|T): sum of log P_e over the leaves of `model`."""
    if model.depth > tree.depth:
        raise ValueError(f"model depth {model.depth} exceeds tree depth {tree.depth}")
    return float(sum(tree.log_pe(s) for s in model.leaves))


def likelihood_given_params(series: "Series", model: "TreeModel", theta: "ParamSet") -> float:
    """log P(x|θ, T) by a direct scan of the series."""
    theta.check_covers(model)
    d = model.depth
    ctx = list(series.context)
    if len(ctx) < d:
        from ._errors import DataError

        raise DataError("insufficient initial context")
    m = model.m
    counts: dict[tuple, np.ndarray] = {}
    recent = ctx[::-1][:d]
    for x in series.data.tolist():
        leaf = model.leaf_for(recent)
        c = counts.get(leaf)
        if c is None:
            c = counts[leaf] = np.zeros(m, dtype=np.int64)
        c[x] += 1
        if d:
            recent.insert(0, x)
            recent.pop()
    total = 0.0
    for leaf, c in counts.items():
        th = theta[leaf]
        for j in range(m):
            if c[j]:
                if th[j] == 0.0:
                    return -inf
                total += c[j] * log(th[j])
    return total
