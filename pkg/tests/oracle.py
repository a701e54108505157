"""Brute-force reference computations, independent of the package's algorithms.

Nothing here uses the count tree, the recursive passes or the package's
enumeration: models are generated by closure under single-branch growth,
counts come from a direct scan, estimated probabilities are exact rational
rising products, and the prior is evaluated through its branching-process
form (every internal node pays 1-beta, every leaf above depth D pays beta).
"""

from __future__ import annotations

from fractions import Fraction
from math import exp, log

import numpy as np


def all_models(m: int, D: int) -> list[frozenset]:
    """Every proper tree of depth <= D as a leaf set, by closure from the root."""
    start = frozenset({()})
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for leaves in frontier:
            for s in leaves:
                if len(s) < D:
                    grown = (leaves - {s}) | {s + (j,) for j in range(m)}
                    if grown not in seen:
                        seen.add(grown)
                        nxt.append(grown)
        frontier = nxt
    return sorted(seen, key=lambda t: (len(t), sorted(t)))


def leaf_of(leaves: frozenset, recent) -> tuple:
    for d in range(len(recent) + 1):
        if tuple(recent[:d]) in leaves:
            return tuple(recent[:d])
    raise AssertionError("no leaf matches")


def scan_counts(symbols, n_context: int, leaves: frozenset, m: int) -> dict:
    """Counts a_s for every leaf by walking the series once."""
    out = {s: [0] * m for s in leaves}
    for i in range(n_context, len(symbols)):
        recent = list(symbols[:i][::-1])
        out[leaf_of(leaves, recent)][symbols[i]] += 1
    return out


def kt_fraction(a, gamma=None) -> Fraction:
    """Sequential Dirichlet-multinomial probability as an exact fraction."""
    m = len(a)
    gamma = [Fraction(1, 2)] * m if gamma is None else [Fraction(g) for g in gamma]
    total = sum(gamma)
    seen = [0] * m
    p = Fraction(1)
    n = 0
    for j in range(m):
        for _ in range(a[j]):
            p *= (seen[j] + gamma[j]) / (n + total)
            seen[j] += 1
            n += 1
    return p


def log_kt(a, gamma=None) -> float:
    f = kt_fraction(a, gamma)
    return log(f.numerator) - log(f.denominator)


def log_prior_branching(leaves: frozenset, m: int, D: int, beta: float) -> float:
    internal = {s[:i] for s in leaves for i in range(len(s))}
    out = len(internal) * log(1 - beta)
    out += sum(1 for s in leaves if len(s) < D) * log(beta)
    return out


def log_marginal(symbols, n_context, leaves, m) -> float:
    return sum(log_kt(c) for c in scan_counts(symbols, n_context, leaves, m).values())


def joint_table(symbols, n_context, m, D, beta) -> list[tuple[frozenset, float]]:
    """(leaf set, log prior + log marginal) for every model, best first."""
    rows = [
        (t, log_prior_branching(t, m, D, beta) + log_marginal(symbols, n_context, t, m))
        for t in all_models(m, D)
    ]
    rows.sort(key=lambda r: -r[1])
    return rows


def logsumexp(values) -> float:
    v = np.asarray(list(values), dtype=np.float64)
    top = v.max()
    return float(top + np.log(np.exp(v - top).sum()))


def posterior_table(symbols, n_context, m, D, beta) -> dict[frozenset, float]:
    rows = joint_table(symbols, n_context, m, D, beta)
    z = logsumexp(v for _, v in rows)
    return {t: exp(v - z) for t, v in rows}


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    x = np.asarray(x, dtype=np.float64)
    usable = len(x) - len(x) % n_batches
    means = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def posterior_mean_theta(tree, beta: float, s, j: int) -> float:
    """E[θ_s(j) | x] summed over every model, by walking the path of context s.

    Given that node u is in the tree, it is a leaf with probability
    β·P_e(u)/P_w(u) (1 at depth D); otherwise all its children are present.
    The leaf covering s is therefore a product of such terms down the path.
    """
    m, D = tree.m, tree.depth
    nodes = {ctx for ctx, _ in tree.iter_nodes()}
    lb, l1b = log(beta), np.log1p(-beta)
    memo: dict = {}

    def lpw(ctx):
        if ctx not in nodes:
            return 0.0
        if ctx not in memo:
            pe = tree.log_pe(ctx)
            if len(ctx) == D:
                memo[ctx] = pe
            else:
                memo[ctx] = logsumexp([lb + pe, l1b + sum(lpw(ctx + (c,)) for c in range(m))])
        return memo[ctx]

    out, reach = 0.0, 0.0
    for d in range(D + 1):
        u = tuple(s[:d])
        stop = 0.0 if d == D else lb + tree.log_pe(u) - lpw(u)
        a = tree.counts(u) + 0.5
        out += exp(reach + stop) * a[j] / a.sum()
        if d < D:
            reach += l1b + sum(lpw(u + (c,)) for c in range(m)) - lpw(u)
    return out
