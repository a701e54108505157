"""Exact inference over the model space: evidence (CTW), MAP tree (BCT), top-k trees (k-BCT)."""

from __future__ import annotations

import heapq
import os
from math import log, log1p
from typing import Sequence


from ._errors import DataError, ResourceCapError
from .core import CountTree, Series, TreeModel
from .likelihood import DirichletHyper
from .prior import default_beta

TIE_REL = 1e-9


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    return beta


def _check_map_beta(beta: float) -> float:
    beta = _check_beta(beta)
    if beta < 0.5:
        raise ValueError("MAP search requires beta >= 1/2")
    return beta


def ctw(tree: CountTree, beta: float) -> float:
    """log P*_D(x), the prior predictive likelihood averaged over all models."""
    return tree.log_evidence(_check_beta(beta))


class CtwState:
    """A count tree whose mixture probabilities are kept current under appends."""

    def __init__(
        self,
        m: int,
        depth: int,
        beta: float | None = None,
        context: Sequence[int] = (),
        gamma: DirichletHyper | float | Sequence[float] | None = None,
        node_cap: int | None = None,
        backend: str | None = None,
    ):
        self.beta = _check_beta(default_beta(m) if beta is None else beta)
        self.tree = CountTree(m, depth, context, gamma=gamma, node_cap=node_cap, backend=backend)
        self.tree.kernel.ctw_pass(self.beta)

    @classmethod
    def from_tree(cls, tree: CountTree, beta: float) -> "CtwState":
        obj = cls.__new__(cls)
        obj.beta = _check_beta(beta)
        obj.tree = tree
        tree.kernel.ctw_pass(obj.beta)
        return obj

    @classmethod
    def from_series(cls, series: Series, depth: int, beta: float | None = None, **kw) -> "CtwState":
        if len(series.context) < depth:
            raise DataError("insufficient initial context")
        state = cls(series.m, depth, beta, series.context, **kw)
        state.tree.extend(series.data)
        return state

    @property
    def m(self) -> int:
        return self.tree.m

    @property
    def depth(self) -> int:
        return self.tree.depth

    @property
    def n_obs(self) -> int:
        return self.tree.n_obs

    @property
    def log_evidence(self) -> float:
        return self.tree.kernel.log_pw(0)

    def update(self, symbol: int) -> float:
        self.tree.update(symbol)
        return self.tree.kernel.log_pw(0)

    def log_evidence_after(self, symbol: int) -> float:
        """Root value if `symbol` were appended, without changing the state."""
        if not 0 <= int(symbol) < self.m:
            raise DataError(f"symbol {symbol} outside 0..{self.m - 1}")
        return self.tree.kernel.log_root_after(int(symbol))


def ctw_update(state: CtwState, symbol: int) -> float:
    return state.update(symbol)


def bct_map(tree: CountTree, beta: float) -> tuple[TreeModel, float]:
    """MAP tree T*_1 and log P_m,λ = log π(T*_1) + log P(x|T*_1)."""
    beta = _check_map_beta(beta)
    value, leaves = tree.kernel.bct(beta, TIE_REL)
    return TreeModel._trusted(tree.m, frozenset(leaves)), float(value)


# ----------------------------------------------------------------------------
# k-BCT

_ZERO: dict[int, tuple] = {}


def _zero(m: int) -> tuple:
    z = _ZERO.get(m)
    if z is None:
        z = _ZERO[m] = (0,) * m
    return z


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_REL * max(1.0, abs(a), abs(b))


def _better(x: tuple, y: tuple) -> bool:
    """Strict order on (value, position) candidates: higher value first, ties by position."""
    if _tied(x[0], y[0]):
        return x[1] < y[1]
    return x[0] > y[0]


def _insert_sorted(out: list, cand: tuple) -> None:
    i = len(out)
    while i > 0 and _better(cand, out[i - 1]):
        i -= 1
    out.insert(i, cand)


def _merge(prune_val: float, l1b: float, kids: list[list], k: int, m: int) -> list:
    """Top-k of {prune candidate} ∪ {l1b + Σ_j kids[j][i_j]} with position vectors.

    Product candidates are explored best-first over the index lattice; once k
    have been popped, the frontier is drained while values stay tied with the
    k-th so that tie ordering by position vector is exact.
    """
    def value(idx):
        s = 0.0
        for j in range(m):
            s += kids[j][idx[j]][0]
        return l1b + s

    start = (0,) * m
    heap = [(-value(start), start)]
    seen = {start}
    prods: list = []
    while heap:
        negv, idx = heap[0]
        v = -negv
        if len(prods) >= k and not _tied(v, prods[k - 1][0]) and v < prods[k - 1][0]:
            break
        heapq.heappop(heap)
        prods.append((v, tuple(i + 1 for i in idx)))
        for j in range(m):
            if idx[j] + 1 < len(kids[j]):
                nxt = idx[:j] + (idx[j] + 1,) + idx[j + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-value(nxt), nxt))
    out: list = []
    _insert_sorted(out, (prune_val, _zero(m)))
    for cand in prods:
        _insert_sorted(out, cand)
    return out[:k]


def _kbct_work_cap() -> int:
    return int(os.environ.get("BAYESCT_KBCT_WORK_CAP", str(10**7)))


def kbct(tree: CountTree, beta: float, k: int, work_cap: int | None = None) -> list[tuple[TreeModel, float]]:
    """The k a-posteriori most likely trees, best first, with their joint log probabilities.

    Subtrees that never occurred in the data share one precomputed list per
    depth; their models are read off the same lists during extraction.
    """
    beta = _check_map_beta(beta)
    if k < 1:
        raise ValueError("k must be at least 1")
    m, D = tree.m, tree.depth
    cap = _kbct_work_cap() if work_cap is None else work_cap
    if k**m > cap:
        raise ResourceCapError(f"k-BCT work k**m = {k**m} exceeds cap {cap}")
    lb, l1b = log(beta), log1p(-beta)
    zero = _zero(m)

    virt: list[list] = [None] * (D + 1)
    virt[D] = [(0.0, zero)]
    for d in range(D - 1, -1, -1):
        virt[d] = _merge(lb + 0.0, l1b, [virt[d + 1]] * m, k, m)

    arrays = tree.kernel.export()
    children = arrays["children"].tolist()
    depths = arrays["depth"].tolist()
    logpe = arrays["logpe"].tolist()
    n = len(depths)
    lists: list = [None] * n
    for idx in range(n - 1, -1, -1):
        d = depths[idx]
        if d == D:
            lists[idx] = [(logpe[idx], zero)]
            continue
        ch = children[idx]
        kids = [lists[c] if c >= 0 else virt[d + 1] for c in ch]
        lists[idx] = _merge(lb + logpe[idx], l1b, kids, k, m)

    out = []
    for i, (val, _) in enumerate(lists[0]):
        leaves = []
        stack = [(0, 0, i, ())]
        while stack:
            idx, d, t, ctx = stack.pop()
            lst = lists[idx] if idx >= 0 else virt[d]
            pos = lst[t][1]
            if pos == zero:
                leaves.append(ctx)
                continue
            for j in range(m):
                c = children[idx][j] if idx >= 0 else -1
                stack.append((c, d + 1, pos[j] - 1, ctx + (j,)))
        out.append((TreeModel._trusted(m, frozenset(leaves)), float(val)))
    return out
