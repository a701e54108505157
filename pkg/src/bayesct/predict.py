"""Sequential prediction with the model-averaged predictive and log-loss curves."""

from __future__ import annotations

import io
from dataclasses import dataclass
from math import exp, inf, log
from typing import Sequence

import numpy as np

from ._errors import DataError
from .core import CountTree, Series
from .exact import CtwState, bct_map
from .likelihood import DirichletHyper
from .prior import default_beta

LN2 = log(2.0)


def predictive_dist(state: CtwState) -> np.ndarray:
    """P*_D(x_{n+1} = a | x_1^n) for every symbol a, via shadow updates."""
    cur = state.log_evidence
    return np.array([exp(state.log_evidence_after(a) - cur) for a in range(state.m)])


@dataclass
class LossCurve:
    """Per-step log-losses in nats for the test segment."""

    train_len: int
    losses: np.ndarray

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.losses)

    @property
    def total(self) -> float:
        return float(self.losses.sum()) if self.losses.size else 0.0

    @property
    def total_bits(self) -> float:
        return self.total / LN2

    @property
    def mean_bits(self) -> float:
        return self.total_bits / self.losses.size if self.losses.size else 0.0

    def to_table(self) -> str:
        """Two tab-separated columns: step and cumulative loss in bits."""
        buf = io.StringIO()
        buf.write("step\tcumulative_bits\n")
        for i, c in enumerate((self.cumulative / LN2).tolist(), start=1):
            buf.write(f"{i}\t{c!r}\n")
        return buf.getvalue()


def _check_train_len(series: Series, train_len: int) -> None:
    if not 0 <= train_len <= series.n:
        raise DataError(f"training length {train_len} outside 0..{series.n}")


def evaluate_log_loss(
    series: Series,
    train_len: int,
    depth: int,
    beta: float | None = None,
    gamma: DirichletHyper | float | Sequence[float] | None = None,
    backend: str | None = None,
) -> LossCurve:
    """Train on x_1..x_t, then predict each later symbol before learning from it."""
    _check_train_len(series, train_len)
    beta = default_beta(series.m) if beta is None else beta
    if len(series.context) < depth:
        raise DataError("insufficient initial context")
    tree = CountTree(series.m, depth, series.context, gamma=gamma, backend=backend)
    tree.extend(series.data[:train_len])
    state = CtwState.from_tree(tree, beta)
    test = series.data[train_len:].tolist()
    losses = np.empty(len(test))
    prev = state.log_evidence
    for i, x in enumerate(test):
        nxt = state.update(x)
        losses[i] = prev - nxt
        prev = nxt
    return LossCurve(train_len, losses)


def frozen_map_log_loss(
    series: Series,
    train_len: int,
    depth: int,
    beta: float | None = None,
) -> LossCurve:
    """Baseline: MAP model and maximum-likelihood parameters fitted once on the training part.

    Leaves never visited in training predict uniformly; a test symbol with
    zero estimated probability costs an infinite loss.
    """
    _check_train_len(series, train_len)
    beta = default_beta(series.m) if beta is None else beta
    tree = CountTree(series.m, depth, series.context)
    tree.extend(series.data[:train_len])
    model, _ = bct_map(tree, beta)
    m = series.m
    probs = {}
    for s in model.leaves:
        a = tree.counts(s).astype(np.float64)
        probs[s] = a / a.sum() if a.sum() > 0 else np.full(m, 1.0 / m)
    d = model.depth
    recent = list(series.symbols()[: len(series.context) + train_len][::-1][:d])
    losses = []
    for x in series.data[train_len:].tolist():
        p = probs[model.leaf_for(recent)][x]
        losses.append(-log(p) if p > 0 else inf)
        if d:
            recent.insert(0, x)
            recent.pop()
    return LossCurve(train_len, np.array(losses))
