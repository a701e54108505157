"""Metropolis samplers over tree models, with optional Gibbs draws of θ.

A chain of N iterations produces T^(1)..T^(N) from the initial model T^(0);
the first ``floor(burn_in * N)`` of these are discarded.  Chains started
from the same seed are bit-identical; parallel chains draw from independent
streams spawned from one ``SeedSequence``.
"""

from __future__ import annotations

import io
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import exp, log
from typing import Sequence

import numpy as np

from .core import CountTree, ParamSet, TreeModel
from .likelihood import DirichletHyper, marginal_likelihood
from .prior import PriorConfig, default_beta, model_prior


@dataclass
class McmcConfig:
    n_iter: int
    seed: int | None = None
    beta: float | None = None
    burn_in: float = 0.1
    sampler: str = "rw"
    jump_p: float = 0.5
    top_models: Sequence[TreeModel] = ()
    initial: TreeModel | None = None
    theta_context: tuple[int, ...] | None = None
    keep_params: bool = False
    gamma: DirichletHyper | float | Sequence[float] | None = None

    def __post_init__(self):
        if self.n_iter < 0:
            raise ValueError("n_iter must be nonnegative")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn_in must be a fraction in [0, 1)")
        if self.sampler not in ("rw", "jump"):
            raise ValueError("sampler must be 'rw' or 'jump'")
        if self.sampler == "jump":
            if not 0.0 < self.jump_p < 1.0:
                raise ValueError("jump probability must lie in (0, 1)")
            if not self.top_models:
                raise ValueError("the jump sampler needs a nonempty set of top models")


class _IndexedSet:
    """Set with O(1) add, remove and uniform random choice."""

    __slots__ = ("items", "pos")

    def __init__(self, items=()):
        self.items: list = []
        self.pos: dict = {}
        for x in items:
            self.add(x)

    def add(self, x) -> None:
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def discard(self, x) -> None:
        i = self.pos.pop(x, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def __contains__(self, x) -> bool:
        return x in self.pos

    def __len__(self) -> int:
        return len(self.items)

    def choice(self, u: float):
        return self.items[min(int(u * len(self.items)), len(self.items) - 1)]


class _ChainState:
    """Mutable tree with the bookkeeping the proposals need.

    growable: leaves at depth < D (their number is |T| - L_D(T));
    prunable: internal nodes whose children are all leaves (N_D(T)).
    """

    def __init__(self, model: TreeModel, D: int):
        self.m = model.m
        self.D = D
        self.leaves = set(model.leaves)
        self.growable = _IndexedSet(sorted((s for s in model.leaves if len(s) < D), key=lambda s: (len(s), s)))
        self.prunable = _IndexedSet(model.prunable)
        self.by_depth = [0] * (D + 1)
        for s in model.leaves:
            self.by_depth[len(s)] += 1
        self._frozen: TreeModel | None = model

    def freeze(self) -> TreeModel:
        if self._frozen is None:
            self._frozen = TreeModel._trusted(self.m, frozenset(self.leaves))
        return self._frozen

    @property
    def depth(self) -> int:
        d = self.D
        while self.by_depth[d] == 0:
            d -= 1
        return d

    def is_root(self) -> bool:
        return len(self.leaves) == 1 and () in self.leaves

    def _kids(self, s):
        return [s + (j,) for j in range(self.m)]

    def grow(self, s) -> None:
        m = self.m
        self.leaves.discard(s)
        self.growable.discard(s)
        self.by_depth[len(s)] -= 1
        for c in self._kids(s):
            self.leaves.add(c)
            if len(c) < self.D:
                self.growable.add(c)
        self.by_depth[len(s) + 1] += m
        self.prunable.add(s)
        if s:
            self.prunable.discard(s[:-1])
        self._frozen = None

    def prune(self, u) -> None:
        m = self.m
        for c in self._kids(u):
            self.leaves.discard(c)
            self.growable.discard(c)
        self.by_depth[len(u) + 1] -= m
        self.leaves.add(u)
        self.growable.add(u)
        self.by_depth[len(u)] += 1
        self.prunable.discard(u)
        if u:
            p = u[:-1]
            if all(c in self.leaves for c in self._kids(p)):
                self.prunable.add(p)
        self._frozen = None

    # proposal bookkeeping for the model obtained by a move, without applying it
    def after_grow(self, s) -> tuple[int, int]:
        g = len(self.growable) - 1 + (self.m if len(s) + 1 < self.D else 0)
        nd = len(self.prunable) + 1 - (1 if s and s[:-1] in self.prunable else 0)
        return g, nd

    def after_prune(self, u) -> tuple[int, int]:
        g = len(self.growable) + 1 - (self.m if len(u) + 1 < self.D else 0)
        nd = len(self.prunable) - 1
        if u:
            p = u[:-1]
            if all(c in self.leaves for c in self._kids(p) if c != u):
                nd += 1
        return g, nd


def _q_grow(is_root: bool, g: int) -> float:
    return 1.0 if is_root else 1.0 / (2 * g)


def _q_prune(g: int, nd: int) -> float:
    # a complete tree (no growable leaves) always shrinks
    return 1.0 / nd if g == 0 else 1.0 / (2 * nd)


class _Target:
    """Log joint π(T)P(x|T) differences for single-branch moves."""

    def __init__(self, tree: CountTree, beta: float):
        self.tree = tree
        self.cfg = PriorConfig(tree.m, tree.depth, beta)
        m = tree.m
        la, lb = self.cfg.log_alpha, self.cfg.log_beta
        self.d_prior_inner = (m - 1) * la + (m - 1) * lb
        self.d_prior_last = (m - 1) * la - lb
        self._pe: dict = {}

    def pe(self, s) -> float:
        v = self._pe.get(s)
        if v is None:
            v = self._pe[s] = self.tree.log_pe(s)
        return v

    def grow_delta(self, s) -> float:
        m = self.tree.m
        dp = self.d_prior_inner if len(s) + 1 < self.tree.depth else self.d_prior_last
        lik = 0.0
        for j in range(m):
            lik += self.pe(s + (j,))
        return dp + lik - self.pe(s)

    def joint(self, model: TreeModel) -> float:
        return model_prior(model, self.cfg) + marginal_likelihood(self.tree, model)


def _neighbor_move(current: frozenset, target: frozenset, m: int):
    """("grow", s) or ("prune", u) if `target` is one branch away from `current`."""
    gone = current - target
    new = target - current
    if len(gone) == 1 and len(new) == m:
        (s,) = gone
        if new == {s + (j,) for j in range(m)}:
            return ("grow", s)
    if len(new) == 1 and len(gone) == m:
        (u,) = new
        if gone == {u + (j,) for j in range(m)}:
            return ("prune", u)
    return None


class _Chain:
    def __init__(self, tree: CountTree, cfg: McmcConfig, rng: np.random.Generator):
        self.tree = tree
        self.cfg = cfg
        self.rng = rng
        self.beta = default_beta(tree.m) if cfg.beta is None else float(cfg.beta)
        self.target = _Target(tree, self.beta)
        self.D = tree.depth
        init = cfg.initial if cfg.initial is not None else TreeModel.root(tree.m)
        if init.m != tree.m or init.depth > self.D:
            raise ValueError("initial model does not fit the alphabet or depth")
        self.state = _ChainState(init, self.D)
        self.top = list(cfg.top_models) if cfg.sampler == "jump" else []
        self.top_keys = {t.leaves for t in self.top}
        self.top_joint = [self.target.joint(t) for t in self.top]
        self.p = cfg.jump_p if cfg.sampler == "jump" else 0.0
        self.k = len(self.top)
        # the Python RNG is seeded from the numpy stream so both are reproducible
        self.u = random.Random(int(rng.integers(2**63))).random

    def _rw_proposal(self):
        """Pick a single-branch move as (kind, node)."""
        st = self.state
        u = self.u
        if st.is_root():
            return "grow", ()
        if len(st.growable) == 0 or u() >= 0.5:
            return "prune", st.prunable.choice(u())
        return "grow", st.growable.choice(u())

    def move_qs(self, kind, node) -> tuple[float, float]:
        """Random-walk proposal probabilities (forward, reverse) of a move."""
        st = self.state
        g = len(st.growable)
        if kind == "grow":
            g2, nd2 = st.after_grow(node)
            return _q_grow(st.is_root(), g), _q_prune(g2, nd2)
        g2, nd2 = st.after_prune(node)
        return _q_prune(g, len(st.prunable)), _q_grow(node == (), g2)

    def log_ratio(self, kind, node) -> float:
        """log of the acceptance ratio r(T, T') for a single-branch move."""
        st = self.state
        qf, qr = self.move_qs(kind, node)
        if self.p > 0.0:
            cur_in = st.freeze().leaves in self.top_keys
            nxt_in = self._peek(kind, node) in self.top_keys
            num = (1 - self.p) * qr + (self.p / self.k) * cur_in
            den = (1 - self.p) * qf + (self.p / self.k) * nxt_in
        else:
            num, den = qr, qf
        d = self.target.grow_delta(node)
        return (d if kind == "grow" else -d) + log(num) - log(den)

    def _apply(self, kind, node) -> None:
        if kind == "grow":
            self.state.grow(node)
        else:
            self.state.prune(node)

    def step(self) -> bool:
        """One Metropolis step; returns whether the proposal was accepted."""
        if self.D == 0:
            return False
        u = self.u
        st = self.state
        if self.p > 0.0 and u() < self.p:
            i = min(int(u() * self.k), self.k - 1)
            cand = self.top[i]
            cur = st.freeze()
            if cand.leaves == cur.leaves:
                return False
            mv = _neighbor_move(cur.leaves, cand.leaves, st.m)
            if mv is None:
                if cur.leaves not in self.top_keys:
                    return False
                log_r = self.top_joint[i] - self.target.joint(cur)
                if log_r >= 0 or u() < exp(log_r):
                    self.state = _ChainState(cand, self.D)
                    return True
                return False
            kind, node = mv
        else:
            kind, node = self._rw_proposal()
        log_r = self.log_ratio(kind, node)
        if log_r >= 0 or u() < exp(log_r):
            self._apply(kind, node)
            return True
        return False

    def _peek(self, kind, node) -> frozenset:
        leaves = set(self.state.leaves)
        kids = {node + (j,) for j in range(self.state.m)}
        if kind == "grow":
            leaves.discard(node)
            leaves |= kids
        else:
            leaves -= kids
            leaves.add(node)
        return frozenset(leaves)


@dataclass
class Trace:
    """Post-burn-in samples of a chain, stored as ids into `models`."""

    models: list[TreeModel]
    ids: np.ndarray
    depths: np.ndarray
    accepted: np.ndarray
    burn_in: int
    n_iter: int
    n_accepted: int
    theta: np.ndarray | None = None
    params: list[ParamSet] | None = None

    def __len__(self) -> int:
        return int(self.ids.size)

    @property
    def samples(self) -> list[TreeModel]:
        return [self.models[i] for i in self.ids.tolist()]

    @property
    def acceptance_rate(self) -> float | None:
        return None if self.n_iter == 0 else self.n_accepted / self.n_iter

    def visit_counts(self) -> Counter:
        c = Counter(self.ids.tolist())
        return Counter({self.models[i]: n for i, n in c.items()})

    def frequencies(self) -> dict[TreeModel, float]:
        n = len(self)
        return {t: c / n for t, c in self.visit_counts().most_common()}

    def depth_histogram(self, depth: int | None = None) -> np.ndarray:
        """Empirical posterior over model depth, supported on 0..D."""
        top = int(self.depths.max()) if depth is None else depth
        h = np.bincount(self.depths, minlength=top + 1).astype(np.float64)
        return h / h.sum()

    def to_table(self) -> str:
        """Tab-separated rows: iteration, model id, depth, accepted flag."""
        buf = io.StringIO()
        buf.write("iteration\tmodel_id\tdepth\taccepted\n")
        start = self.n_iter - len(self) + 1 if self.n_iter else 0
        for t, (i, d, a) in enumerate(zip(self.ids.tolist(), self.depths.tolist(), self.accepted.tolist())):
            buf.write(f"{start + t}\t{i}\t{d}\t{int(a)}\n")
        return buf.getvalue()


def gibbs_theta(
    model: TreeModel,
    tree: CountTree,
    gamma: DirichletHyper | float | Sequence[float] | None,
    rng: np.random.Generator,
) -> ParamSet:
    """One draw of θ from its full conditional, leaves visited in canonical order."""
    gamma = DirichletHyper.coerce(gamma if gamma is not None else tree.gamma, tree.m)
    out = ParamSet()
    for s in model.sorted_leaves():
        alpha = tree.counts(s) + np.asarray(gamma.for_context(s))
        out[s] = rng.dirichlet(alpha)
    return out


def _make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def rw_step(current: TreeModel, tree: CountTree, cfg: McmcConfig, rng) -> TreeModel:
    """Single random-walk step from `current` (convenience wrapper; chains reuse state)."""
    c = _Chain(tree, McmcConfig(1, beta=cfg.beta, initial=current), _make_rng(rng))
    c.step()
    return c.state.freeze()


def jump_step(current: TreeModel, tree: CountTree, cfg: McmcConfig, rng) -> TreeModel:
    c = _Chain(
        tree,
        McmcConfig(1, beta=cfg.beta, initial=current, sampler="jump", jump_p=cfg.jump_p, top_models=cfg.top_models),
        _make_rng(rng),
    )
    c.step()
    return c.state.freeze()


def run_chain(cfg: McmcConfig, tree: CountTree, rng: np.random.Generator | None = None) -> Trace:
    rng = _make_rng(cfg.seed) if rng is None else rng
    chain = _Chain(tree, cfg, rng)
    n = cfg.n_iter
    burn = int(cfg.burn_in * n)
    keep = n - burn if n else 1
    ids = np.empty(keep, dtype=np.int64)
    depths = np.empty(keep, dtype=np.int64)
    accepted = np.zeros(keep, dtype=bool)
    models: list[TreeModel] = []
    index: dict[frozenset, int] = {}
    theta = np.empty((keep, tree.m)) if cfg.theta_context is not None else None
    params: list[ParamSet] | None = [] if cfg.keep_params else None
    n_acc = 0
    gamma = DirichletHyper.coerce(cfg.gamma if cfg.gamma is not None else tree.gamma, tree.m)

    last_model = None
    last_id = -1

    def record(slot: int, acc: bool) -> None:
        nonlocal last_model, last_id
        model = chain.state.freeze()
        if model is not last_model:
            i = index.get(model.leaves)
            if i is None:
                i = index[model.leaves] = len(models)
                models.append(model)
            last_model, last_id = model, i
        ids[slot] = last_id
        depths[slot] = chain.state.depth
        accepted[slot] = acc
        if params is not None:
            draw = gibbs_theta(model, tree, cfg.gamma, rng)
            params.append(draw)
            if theta is not None:
                theta[slot] = draw[model.leaf_for(cfg.theta_context)]
        elif theta is not None:
            # leaves are conditionally independent, so only the tracked one is drawn
            leaf = model.leaf_for(cfg.theta_context)
            theta[slot] = rng.dirichlet(tree.counts(leaf) + np.asarray(gamma.for_context(leaf)))

    if n == 0:
        record(0, False)
    for t in range(1, n + 1):
        acc = chain.step()
        n_acc += acc
        if t > burn:
            record(t - burn - 1, acc)
    return Trace(models, ids, depths, accepted, burn, n, n_acc, theta, params)


def run_chains(cfg: McmcConfig, tree: CountTree, n_chains: int, workers: int | None = None) -> list[Trace]:
    """Independent chains on streams spawned from ``SeedSequence(cfg.seed)``."""
    children = np.random.SeedSequence(cfg.seed).spawn(n_chains)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in children]
    # the count tree is only read while sampling, so threads can share it
    with ThreadPoolExecutor(max_workers=workers or n_chains) as pool:
        return list(pool.map(lambda r: run_chain(cfg, tree, r), rngs))
