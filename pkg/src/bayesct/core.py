"""Alphabets, series, tree models and the context count tree.

Contexts are tuples of symbol indices read backwards in time: ``(0, 1)`` is
the context in which the most recent symbol was 0 and the one before it was
1 (written "01" in string form).  The root context is the empty tuple.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _backend
from ._errors import DataError
from .likelihood import DirichletHyper

Context = tuple[int, ...]


def _default_node_cap() -> int:
    return int(os.environ.get("BAYESCT_NODE_CAP", "0") or 0)


@dataclass(frozen=True)
class Alphabet:
    """A finite symbol set with display labels mapped to 0..m-1."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValueError("an alphabet needs at least two symbols")
        if len(set(labels)) != len(labels):
            raise ValueError("alphabet labels must be distinct")

    @classmethod
    def of_size(cls, m: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(m)))

    @property
    def size(self) -> int:
        return len(self.labels)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DataError(f"symbol {label!r} is not in the alphabet {self.labels}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    def encode(self, labels: Iterable[str]) -> np.ndarray:
        return np.array([self.index(x) for x in labels], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Series:
    """Observations x_1..x_n together with the initial context.

    ``context`` is stored in time order, ending with x_0.
    """

    data: np.ndarray
    context: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "context", tuple(int(c) for c in self.context))
        m = self.alphabet.size
        if data.size and (data.min() < 0 or data.max() >= m):
            bad = int(np.flatnonzero((data < 0) | (data >= m))[0])
            raise DataError(f"symbol {int(data[bad])} at position {bad} is outside 0..{m - 1}")
        if any(c < 0 or c >= m for c in self.context):
            raise DataError("context symbol outside the alphabet")

    @classmethod
    def from_symbols(
        cls,
        symbols: Sequence[int],
        alphabet: Alphabet | int,
        depth: int,
        context: Sequence[int] | None = None,
    ) -> "Series":
        """Split a raw symbol stream into context and observations.

        With ``context=None`` the first `depth` symbols become the initial
        context and are excluded from the observations.
        """
        if isinstance(alphabet, int):
            alphabet = Alphabet.of_size(alphabet)
        symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
        if context is None:
            if symbols.size < depth:
                raise DataError("insufficient initial context")
            return cls(symbols[depth:], tuple(symbols[:depth].tolist()), alphabet)
        if len(context) < depth:
            raise DataError("insufficient initial context")
        return cls(symbols, tuple(context), alphabet)

    @property
    def n(self) -> int:
        return int(self.data.size)

    @property
    def m(self) -> int:
        return self.alphabet.size

    def prefix(self, length: int) -> "Series":
        return Series(self.data[:length], self.context, self.alphabet)

    def symbols(self) -> np.ndarray:
        """Context followed by observations, as one array in time order."""
        return np.concatenate([np.asarray(self.context, dtype=np.int64), self.data])


def _check_proper(m: int, leaves: frozenset) -> frozenset:
    internal = {leaf[:i] for leaf in leaves for i in range(len(leaf))}
    if not leaves:
        raise ValueError("a tree model needs at least one leaf")
    if internal & leaves:
        raise ValueError("a leaf cannot also be an internal node")
    for leaf in leaves:
        if any(c < 0 or c >= m for c in leaf):
            raise ValueError(f"leaf {leaf} has a symbol outside 0..{m - 1}")
    for u in internal:
        for j in range(m):
            if u + (j,) not in leaves and u + (j,) not in internal:
                raise ValueError(f"tree is not proper: node {u} is missing child {j}")
    return frozenset(internal)


@dataclass(frozen=True)
class TreeModel:
    """A proper m-ary context tree, identified with its set of leaves."""

    m: int
    leaves: frozenset[Context]

    def __post_init__(self):
        leaves = frozenset(tuple(int(c) for c in s) for s in self.leaves)
        object.__setattr__(self, "leaves", leaves)
        self.__dict__["internal"] = _check_proper(self.m, leaves)

    @classmethod
    def _trusted(cls, m: int, leaves: frozenset, internal: frozenset | None = None) -> "TreeModel":
        obj = object.__new__(cls)
        object.__setattr__(obj, "m", m)
        object.__setattr__(obj, "leaves", leaves)
        if internal is not None:
            obj.__dict__["internal"] = internal
        return obj

    @classmethod
    def root(cls, m: int) -> "TreeModel":
        return cls._trusted(m, frozenset({()}), frozenset())

    @classmethod
    def complete(cls, m: int, depth: int) -> "TreeModel":
        import itertools

        leaves = frozenset(itertools.product(range(m), repeat=depth))
        return cls(m, leaves)

    @classmethod
    def from_strings(cls, m: int, leaves: Iterable[str]) -> "TreeModel":
        """Build from digit strings such as ``["1", "2", "00", "01"]`` (m <= 10)."""
        return cls(m, frozenset(tuple(int(ch) for ch in s) for s in leaves))

    @cached_property
    def internal(self) -> frozenset[Context]:
        return frozenset(leaf[:i] for leaf in self.leaves for i in range(len(leaf)))

    @cached_property
    def depth(self) -> int:
        return max(len(s) for s in self.leaves)

    @property
    def size(self) -> int:
        return len(self.leaves)

    def leaves_at_depth(self, d: int) -> int:
        return sum(1 for s in self.leaves if len(s) == d)

    @cached_property
    def prunable(self) -> tuple[Context, ...]:
        """Internal nodes all of whose children are leaves, in canonical order."""
        out = [
            u for u in self.internal
            if all(u + (j,) in self.leaves for j in range(self.m))
        ]
        return tuple(sorted(out, key=lambda s: (len(s), s)))

    def sorted_leaves(self) -> list[Context]:
        return sorted(self.leaves, key=lambda s: (len(s), s))

    def leaf_for(self, recent: Sequence[int]) -> Context:
        """The leaf matching a context given most-recent-first (the map C)."""
        node: Context = ()
        leaves = self.leaves
        while node not in leaves:
            d = len(node)
            if d >= len(recent):
                raise DataError(f"context of length {len(recent)} is shorter than the tree requires")
            node = node + (int(recent[d]),)
        return node

    def grow(self, s: Context) -> "TreeModel":
        if s not in self.leaves:
            raise ValueError(f"{s} is not a leaf")
        kids = frozenset(s + (j,) for j in range(self.m))
        return TreeModel._trusted(self.m, (self.leaves - {s}) | kids, self.internal | {s})

    def prune(self, s: Context) -> "TreeModel":
        kids = frozenset(s + (j,) for j in range(self.m))
        if not kids <= self.leaves:
            raise ValueError(f"{s} does not have only leaf children")
        return TreeModel._trusted(self.m, (self.leaves - kids) | {s}, self.internal - {s})

    def __repr__(self) -> str:
        if self.m <= 10:
            body = ",".join("".join(map(str, s)) or "λ" for s in self.sorted_leaves())
        else:
            body = ",".join(repr(s) for s in self.sorted_leaves())
        return f"TreeModel(m={self.m}, leaves={{{body}}})"


def context_leaf(model: TreeModel, context: Sequence[int]) -> Context:
    """Unique leaf of `model` that is a prefix of the most-recent-first `context`."""
    return model.leaf_for(context)


class ParamSet(dict):
    """Per-leaf probability vectors, keyed by leaf context."""

    def __init__(self, params: Mapping[Context, Sequence[float]] = (), **kw):
        super().__init__()
        for s, v in dict(params, **kw).items():
            v = np.asarray(v, dtype=np.float64)
            if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
                raise ValueError(f"parameter vector for {s} is not a probability vector: {v}")
            self[tuple(s)] = v

    @classmethod
    def from_strings(cls, params: Mapping[str, Sequence[float]]) -> "ParamSet":
        return cls({tuple(int(c) for c in k): v for k, v in params.items()})

    def check_covers(self, model: TreeModel) -> None:
        missing = [s for s in model.leaves if s not in self]
        if missing:
            raise KeyError(f"no parameters for leaves {sorted(missing)}")
        for s in model.leaves:
            if self[s].size != model.m:
                raise ValueError(f"parameter vector for {s} has length {self[s].size}, expected {model.m}")


def count_models(m: int, depth: int) -> int:
    """Number of proper m-ary trees of depth at most `depth`."""
    if m < 2 or depth < 0:
        raise ValueError("need m >= 2 and depth >= 0")
    n = 1
    for _ in range(depth):
        n = 1 + n**m
    return n


class CountTree:
    """Context tree T_MAX with per-node counts and log estimated probabilities.

    Contexts that never occurred are not stored; they behave as zero-count
    leaves, which keeps the tree proper without materialising siblings.
    """

    def __init__(
        self,
        m: int,
        depth: int,
        context: Sequence[int] = (),
        gamma: DirichletHyper | float | Sequence[float] | None = None,
        node_cap: int | None = None,
        backend: str | None = None,
    ):
        self.gamma = DirichletHyper.coerce(gamma, m)
        kernel_cls = _backend.kernel_class(backend)
        self.kernel = kernel_cls(
            m,
            depth,
            self.gamma.base,
            tuple(context)[len(context) - depth:] if depth else (),
            _default_node_cap() if node_cap is None else node_cap,
            dict(self.gamma.overrides),
        )

    @classmethod
    def build(cls, series: Series, depth: int, **kw) -> "CountTree":
        if len(series.context) < depth:
            raise DataError("insufficient initial context")
        tree = cls(series.m, depth, series.context, **kw)
        tree.kernel.extend(series.data)
        return tree

    @property
    def m(self) -> int:
        return self.kernel.m

    @property
    def depth(self) -> int:
        return self.kernel.depth

    @property
    def n_obs(self) -> int:
        return int(self.kernel.n_obs)

    @property
    def node_count(self) -> int:
        return int(self.kernel.n_nodes)

    @property
    def backend(self) -> str:
        return "python" if isinstance(self.kernel, _backend.PyKernel) else "cython"

    def update(self, symbol: int) -> int:
        """Append one observation; returns the number of nodes touched."""
        if not 0 <= int(symbol) < self.m:
            raise DataError(f"symbol {symbol} outside 0..{self.m - 1}")
        return self.kernel.push(int(symbol))

    def extend(self, symbols: Iterable[int]) -> None:
        self.kernel.extend(np.fromiter(symbols, dtype=np.int64) if not isinstance(symbols, np.ndarray) else symbols)

    def current_context(self) -> Context:
        """The last `depth` symbols, most recent first."""
        return self.kernel.context()

    def node(self, ctx: Sequence[int]) -> int | None:
        idx = self.kernel.find(tuple(ctx))
        return None if idx < 0 else idx

    def counts(self, ctx: Sequence[int]) -> np.ndarray:
        idx = self.kernel.find(tuple(ctx))
        if idx < 0:
            return np.zeros(self.m, dtype=np.int64)
        return np.asarray(self.kernel.counts_of(idx), dtype=np.int64)

    def log_pe(self, ctx: Sequence[int]) -> float:
        """log P_e at context `ctx`; 0 for contexts absent from the tree."""
        idx = self.kernel.find(tuple(ctx))
        return 0.0 if idx < 0 else self.kernel.log_pe(idx)

    def iter_nodes(self, include_virtual: bool = False) -> Iterator[tuple[Context, np.ndarray]]:
        """Depth-first walk yielding ``(context, counts)``.

        With `include_virtual`, absent children of internal nodes are
        yielded as zero-count leaves.
        """
        k = self.kernel
        m = self.m
        zero = np.zeros(m, dtype=np.int64)
        stack: list[tuple[int, Context]] = [(0, ())]
        while stack:
            idx, ctx = stack.pop()
            yield ctx, np.asarray(k.counts_of(idx), dtype=np.int64)
            kids = [k.child(idx, j) for j in range(m)]
            if all(c < 0 for c in kids):
                continue
            for j in range(m - 1, -1, -1):
                if kids[j] >= 0:
                    stack.append((kids[j], ctx + (j,)))
                elif include_virtual:
                    yield ctx + (j,), zero

    def is_proper(self) -> bool:
        """Every internal node has m child slots; stored contexts have length <= D."""
        for ctx, _ in self.iter_nodes():
            if len(ctx) > self.depth:
                return False
        return True

    def log_evidence(self, beta: float) -> float:
        """Root log mixture probability, i.e. log P*_D(x)."""
        k = self.kernel
        if k.tracking and k.beta == beta:
            return k.log_pw(0)
        return k.ctw_pass(beta)


def build_count_tree(series: Series, depth: int, **kw) -> CountTree:
    return CountTree.build(series, depth, **kw)


def update_count_tree(tree: CountTree, next_symbol: int) -> int:
    return tree.update(next_symbol)
