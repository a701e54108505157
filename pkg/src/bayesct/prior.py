"""The branching prior over tree models and exhaustive model enumeration."""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from math import log, log1p
from typing import Iterator

from ._errors import ResourceCapError
from .core import TreeModel, count_models


def default_beta(m: int) -> float:
    """1 - 2^-(m-1): 1/2 for binary data, 3/4 for m=3, 7/8 for m=4."""
    if m < 2:
        raise ValueError("m must be at least 2")
    return 1.0 - 2.0 ** (-(m - 1))


@dataclass(frozen=True)
class PriorConfig:
    m: int
    depth: int
    beta: float | None = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.beta is None:
            object.__setattr__(self, "beta", default_beta(self.m))
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")

    @property
    def alpha(self) -> float:
        return (1.0 - self.beta) ** (1.0 / (self.m - 1))

    @property
    def log_alpha(self) -> float:
        return log1p(-self.beta) / (self.m - 1)

    @property
    def log_beta(self) -> float:
        return log(self.beta)


def model_prior(model: TreeModel, cfg: PriorConfig) -> float:
    """log π_D(T) = (|T|-1) log α + (|T| - L_D(T)) log β."""
    if model.m != cfg.m:
        raise ValueError("model and prior disagree on the alphabet size")
    if model.depth > cfg.depth:
        raise ValueError(f"model depth {model.depth} exceeds D={cfg.depth}")
    size = model.size
    shallow = size - model.leaves_at_depth(cfg.depth)
    out = 0.0
    if size > 1:
        out += (size - 1) * cfg.log_alpha
    if shallow:
        out += shallow * cfg.log_beta
    return out


def _enum_cap() -> int:
    return int(os.environ.get("BAYESCT_ENUM_CAP", str(10**6)))


def _leaf_sets(m: int, depth: int) -> list[frozenset]:
    if depth == 0:
        return [frozenset({()})]
    out = [frozenset({()})]
    subs = _leaf_sets(m, depth - 1)
    for combo in itertools.product(subs, repeat=m):
        out.append(frozenset((j,) + s for j, sub in enumerate(combo) for s in sub))
    return out


def enumerate_models(m: int, depth: int, cap: int | None = None) -> Iterator[TreeModel]:
    """Every proper m-ary tree of depth <= `depth`, each exactly once.

    Order is canonical: Λ first, then subtrees in lexicographic product order
    with children visited 0..m-1.
    """
    cap = _enum_cap() if cap is None else cap
    total = count_models(m, depth)
    if total > cap:
        raise ResourceCapError(f"enumeration infeasible: {total} models exceeds cap {cap}")
    for leaves in _leaf_sets(m, depth):
        yield TreeModel._trusted(m, leaves)
