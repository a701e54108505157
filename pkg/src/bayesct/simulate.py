"""Sampling from variable-memory chains, minimal models and named fixture chains."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Alphabet, ParamSet, Series, TreeModel

_TABLE_LIMIT = 1 << 20


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(rng))


def sample_symbols(
    model: TreeModel,
    theta: ParamSet,
    n: int,
    context: Sequence[int] | None = None,
    rng=None,
) -> np.ndarray:
    """Draw x_1..x_n; `context` is in time order and defaults to zeros."""
    theta.check_covers(model)
    rng = _rng(rng)
    m, d = model.m, model.depth
    context = [0] * d if context is None else [int(c) for c in context]
    if len(context) < d:
        raise ValueError(f"context of length {len(context)} is shorter than the model depth {d}")
    leaves = model.sorted_leaves()
    row = {s: i for i, s in enumerate(leaves)}
    cum = np.cumsum(np.array([theta[s] for s in leaves]), axis=1)
    cum[:, -1] = 1.0
    cum_rows = cum.tolist()
    u = rng.random(n).tolist()
    out = np.empty(n, dtype=np.int64)

    if m**d <= _TABLE_LIMIT:
        # code holds the last d symbols with the most recent as lowest digit
        size = m**d
        table = []
        for code in range(size):
            recent, c = [], code
            for _ in range(d):
                recent.append(c % m)
                c //= m
            table.append(row[model.leaf_for(recent)])
        code = 0
        for x in context[len(context) - d:]:
            code = (code * m + x) % size
        for i in range(n):
            r = cum_rows[table[code]]
            x = 0
            ui = u[i]
            while r[x] < ui:
                x += 1
            out[i] = x
            code = (code * m + x) % size
        return out

    recent = context[::-1][:d]
    for i in range(n):
        r = cum_rows[row[model.leaf_for(recent)]]
        x = 0
        ui = u[i]
        while r[x] < ui:
            x += 1
        out[i] = x
        recent.insert(0, x)
        recent.pop()
    return out


def sample_chain(
    model: TreeModel,
    theta: ParamSet,
    n: int,
    context: Sequence[int] | None = None,
    rng=None,
    alphabet: Alphabet | None = None,
) -> Series:
    """A Series of n draws from the chain (T, θ) following `context`."""
    context = [0] * model.depth if context is None else list(context)
    data = sample_symbols(model, theta, n, context, rng)
    return Series(data, tuple(context), alphabet or Alphabet.of_size(model.m))


def reduce_model(model: TreeModel, theta: ParamSet, tol: float = 1e-12) -> tuple[TreeModel, ParamSet]:
    """Merge sibling leaf sets with identical parameters until none remain."""
    theta.check_covers(model)
    m = model.m
    leaves = set(model.leaves)
    params = {s: np.asarray(theta[s], dtype=np.float64) for s in model.leaves}
    changed = True
    while changed:
        changed = False
        parents = {s[:-1] for s in leaves if s}
        for p in sorted(parents, key=lambda s: (-len(s), s)):
            kids = [p + (j,) for j in range(m)]
            if not all(k in leaves for k in kids):
                continue
            first = params[kids[0]]
            if all(np.max(np.abs(params[k] - first)) <= tol for k in kids[1:]):
                for k in kids:
                    leaves.discard(k)
                    del params[k]
                leaves.add(p)
                params[p] = first
                changed = True
    return TreeModel(m, frozenset(leaves)), ParamSet(params)


def minimal_model(model: TreeModel, theta: ParamSet) -> TreeModel:
    return reduce_model(model, theta)[0]


def _ternary5() -> tuple[TreeModel, ParamSet]:
    p = {
        "1": (0.4, 0.4, 0.2),
        "2": (0.2, 0.4, 0.4),
        "00": (0.4, 0.2, 0.4),
        "01": (0.3, 0.6, 0.1),
        "022": (0.5, 0.3, 0.2),
        "0212": (0.1, 0.3, 0.6),
        "0211": (0.05, 0.25, 0.7),
        "0210": (0.35, 0.55, 0.1),
        "0202": (0.1, 0.2, 0.7),
        "0201": (0.8, 0.05, 0.15),
        "02002": (0.7, 0.2, 0.1),
        "02001": (0.1, 0.1, 0.8),
        "02000": (0.3, 0.45, 0.25),
    }
    return TreeModel.from_strings(3, p), ParamSet.from_strings(p)


# probability of a 1 after k consecutive ones (k = 0..7), then after eight or more
_RENEWAL_P1 = (0.3, 0.5, 0.65, 0.75, 0.8, 0.4, 0.2, 0.6, 0.1)


def _renewal() -> tuple[TreeModel, ParamSet]:
    depth = len(_RENEWAL_P1) - 1
    p = {}
    for k in range(depth):
        p["1" * k + "0"] = (1 - _RENEWAL_P1[k], _RENEWAL_P1[k])
    p["1" * depth] = (1 - _RENEWAL_P1[depth], _RENEWAL_P1[depth])
    return TreeModel.from_strings(2, p), ParamSet.from_strings(p)


LAG3_Q = np.array(
    [
        [0.5, 0.2, 0.1, 0.0, 0.05, 0.15],
        [0.4, 0.0, 0.4, 0.2, 0.0, 0.0],
        [0.3, 0.1, 0.23, 0.12, 0.05, 0.2],
        [0.05, 0.1, 0.05, 0.05, 0.03, 0.72],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.1, 0.2, 0.3, 0.2, 0.05, 0.15],
    ]
)


def _lag3() -> tuple[TreeModel, ParamSet]:
    model = TreeModel.complete(6, 3)
    return model, ParamSet({s: LAG3_Q[s[2]] for s in model.leaves})


FIXTURES = {
    "ternary5": _ternary5,
    "renewal": _renewal,
    "lag3": _lag3,
}


def fixture(name: str) -> tuple[TreeModel, ParamSet]:
    """Named fixture chains.

    ternary5: fifth-order chain on three symbols with 13 leaves.
    renewal: binary chain whose next-symbol law depends only on the run of
        ones since the last zero (depth 8; parameters are illustrative).
    lag3: six-symbol chain where x_i depends on x_{i-3} only, through LAG3_Q.
    """
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def simulate_series(
    name_or_model, n: int, depth: int, rng=None, theta: ParamSet | None = None, warmup: int = 100
) -> Series:
    """n observations preceded by a `depth`-symbol context, after a warm-up run."""
    if isinstance(name_or_model, str):
        model, theta = fixture(name_or_model)
    else:
        model = name_or_model
        if theta is None:
            raise ValueError("theta is required with an explicit model")
    rng = _rng(rng)
    lead = max(depth, model.depth)
    x = sample_symbols(model, theta, warmup + lead + n, None, rng)[warmup:]
    return Series.from_symbols(x[lead - depth:], model.m, depth)
