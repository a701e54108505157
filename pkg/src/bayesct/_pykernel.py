"""Pure-Python context-tree kernel.

Same node layout, arithmetic order and public surface as the compiled
``_ckernel.Kernel``; used when the extension is unavailable or when
``BAYESCT_PURE_PYTHON`` is set.  Results agree with the compiled kernel to
the last bit on the same platform libm.
"""

from __future__ import annotations

from math import exp, inf, log, log1p

import numpy as np

from ._errors import NodeBudgetExceeded

BACKEND = "python"

MAX_DEPTH = 65535


def _lse2(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -inf:
        return a
    return a + log1p(exp(b - a))


class Kernel:
    def __init__(self, m, depth, gamma, context=(), node_cap=0, overrides=None):
        if m < 2:
            raise ValueError("alphabet size must be at least 2")
        if depth < 0 or depth > MAX_DEPTH:
            raise ValueError(f"depth must be in 0..{MAX_DEPTH}")
        context = tuple(context)
        if len(context) < depth:
            raise ValueError("insufficient initial context")
        self.m = int(m)
        self.depth = int(depth)
        self.node_cap = int(node_cap)
        self.tracking = False
        self.beta = float("nan")
        self._lb = self._l1b = 0.0

        rows = [tuple(float(g) for g in gamma)]
        self._overrides: dict[tuple, int] = {}
        for ctx, vec in (overrides or {}).items():
            self._overrides[tuple(ctx)] = len(rows)
            rows.append(tuple(float(g) for g in vec))
        for row in rows:
            if len(row) != m:
                raise ValueError("Dirichlet vector length must equal alphabet size")
            if not all(g > 0 for g in row):
                raise ValueError("Dirichlet hyperparameters must be positive")
        self._gtab = rows
        self._gsum = [0.0] * len(rows)
        for i, row in enumerate(rows):
            acc = 0.0
            for g in row:
                acc += g
            self._gsum[i] = acc

        window = []
        for i in range(depth):
            j = int(context[len(context) - 1 - i])
            if j < 0 or j >= m:
                raise ValueError(f"context symbol {j} outside alphabet")
            window.append(j)
        self._window = window  # most recent first

        self._counts: list[int] = []
        self._children: list[int] = []
        self._depths: list[int] = []
        self._logpe: list[float] = []
        self._logpw: list[float] = []
        self._gid: list[int] = []
        self.n_obs = 0
        self._new_node(0, self._overrides.get((), 0))

    @property
    def n_nodes(self) -> int:
        return len(self._depths)

    def _gamma_for_prefix(self, d: int) -> int:
        if not self._overrides:
            return 0
        return self._overrides.get(tuple(self._window[:d]), 0)

    def _new_node(self, d: int, g: int) -> int:
        idx = len(self._depths)
        if self.node_cap > 0 and idx >= self.node_cap:
            raise NodeBudgetExceeded(f"context tree exceeded node budget of {self.node_cap}")
        self._counts.extend([0] * self.m)
        self._children.extend([-1] * self.m)
        self._depths.append(d)
        self._logpe.append(0.0)
        if self.tracking:
            self._logpw.append(0.0)
        self._gid.append(g)
        return idx

    def _mix(self, node: int, d: int) -> float:
        if d == self.depth:
            return self._logpe[node]
        m = self.m
        s = 0.0
        internal = False
        children = self._children
        logpw = self._logpw
        for j in range(m):
            ch = children[node * m + j]
            if ch >= 0:
                s += logpw[ch]
                internal = True
        if not internal:
            return self._logpe[node]
        return _lse2(self._lb + self._logpe[node], self._l1b + s)

    def push(self, sym: int) -> int:
        m = self.m
        D = self.depth
        sym = int(sym)
        if sym < 0 or sym >= m:
            raise ValueError(f"symbol {sym} outside alphabet of size {m}")
        children = self._children
        counts = self._counts
        window = self._window
        node = 0
        path = [0]
        for d in range(1, D + 1):
            c = window[d - 1]
            child = children[node * m + c]
            if child < 0:
                child = self._new_node(d, self._gamma_for_prefix(d))
                children[node * m + c] = child
            node = child
            path.append(node)
        logpe = self._logpe
        for d in range(D, -1, -1):
            node = path[d]
            base = node * m
            msum = 0
            for j in range(m):
                msum += counts[base + j]
            g = self._gid[node]
            logpe[node] += log((counts[base + sym] + self._gtab[g][sym]) / (msum + self._gsum[g]))
            counts[base + sym] += 1
            if self.tracking:
                self._logpw[node] = self._mix(node, d)
        if D > 0:
            window.insert(0, sym)
            window.pop()
        self.n_obs += 1
        return D + 1

    def extend(self, symbols) -> None:
        for s in np.asarray(symbols, dtype=np.int64).tolist():
            self.push(s)

    def context(self) -> tuple:
        return tuple(self._window)

    def ctw_pass(self, beta: float) -> float:
        if not (0.0 < beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if not self.tracking:
            self._logpw = [0.0] * self.n_nodes
        self.tracking = True
        self.beta = float(beta)
        self._lb = log(beta)
        self._l1b = log1p(-beta)
        depths = self._depths
        for idx in range(self.n_nodes - 1, -1, -1):
            self._logpw[idx] = self._mix(idx, depths[idx])
        return self._logpw[0]

    def log_root_after(self, sym: int) -> float:
        if not self.tracking:
            raise RuntimeError("mixture probabilities are not being tracked; call ctw_pass first")
        m = self.m
        D = self.depth
        sym = int(sym)
        if sym < 0 or sym >= m:
            raise ValueError(f"symbol {sym} outside alphabet of size {m}")
        children = self._children
        counts = self._counts
        window = self._window
        node = 0
        path = [0]
        for d in range(1, D + 1):
            if node >= 0:
                node = children[node * m + window[d - 1]]
            path.append(node)
        val = 0.0
        for d in range(D, -1, -1):
            node = path[d]
            if node >= 0:
                base = node * m
                msum = 0
                for j in range(m):
                    msum += counts[base + j]
                a = counts[base + sym]
                g = self._gid[node]
                pe = self._logpe[node]
            else:
                msum = 0
                a = 0
                g = self._gamma_for_prefix(d)
                pe = 0.0
            pe = pe + log((a + self._gtab[g][sym]) / (msum + self._gsum[g]))
            if d == D:
                val = pe
            else:
                c = window[d]
                s = 0.0
                for j in range(m):
                    if j == c:
                        s += val
                    elif node >= 0:
                        ch = children[node * m + j]
                        if ch >= 0:
                            s += self._logpw[ch]
                val = _lse2(self._lb + pe, self._l1b + s)
        return val

    def bct(self, beta: float, tie_rel: float = 1e-9):
        if not (0.0 < beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        lb = log(beta)
        l1b = log1p(-beta)
        m = self.m
        D = self.depth
        n = self.n_nodes
        children = self._children
        logpe = self._logpe
        depths = self._depths
        logpm = [0.0] * n
        prune = [True] * n
        for idx in range(n - 1, -1, -1):
            d = depths[idx]
            if d == D:
                logpm[idx] = logpe[idx]
                continue
            virt = 0.0 if d + 1 == D else lb
            s = 0.0
            internal = False
            for j in range(m):
                ch = children[idx * m + j]
                if ch >= 0:
                    s += logpm[ch]
                    internal = True
                else:
                    s += virt
            a = lb + logpe[idx]
            if not internal:
                logpm[idx] = a
                continue
            b = l1b + s
            if a >= b or (b - a) <= tie_rel * max(1.0, abs(a), abs(b)):
                logpm[idx] = a
            else:
                logpm[idx] = b
                prune[idx] = False
        leaves = []
        stack = [(0, ())]
        while stack:
            idx, ctx = stack.pop()
            if prune[idx]:
                leaves.append(ctx)
                continue
            for j in range(m - 1, -1, -1):
                ch = children[idx * m + j]
                if ch >= 0:
                    stack.append((ch, ctx + (j,)))
                else:
                    leaves.append(ctx + (j,))
        return logpm[0], leaves

    def find(self, ctx) -> int:
        if len(ctx) > self.depth:
            return -1
        node = 0
        for c in ctx:
            if c < 0 or c >= self.m:
                return -1
            node = self._children[node * self.m + c]
            if node < 0:
                return -1
        return node

    def _check(self, idx: int) -> None:
        if idx < 0 or idx >= self.n_nodes:
            raise IndexError(f"node index {idx} out of range")

    def child(self, idx: int, j: int) -> int:
        self._check(idx)
        return self._children[idx * self.m + j]

    def counts_of(self, idx: int) -> list[int]:
        self._check(idx)
        return self._counts[idx * self.m:(idx + 1) * self.m]

    def log_pe(self, idx: int) -> float:
        self._check(idx)
        return self._logpe[idx]

    def log_pw(self, idx: int) -> float:
        self._check(idx)
        if not self.tracking:
            raise RuntimeError("mixture probabilities are not being tracked; call ctw_pass first")
        return self._logpw[idx]

    def depth_of(self, idx: int) -> int:
        self._check(idx)
        return self._depths[idx]

    def export(self) -> dict:
        n, m = self.n_nodes, self.m
        out = {
            "counts": np.array(self._counts, dtype=np.int64).reshape(n, m),
            "children": np.array(self._children, dtype=np.int32).reshape(n, m),
            "depth": np.array(self._depths, dtype=np.uint16),
            "logpe": np.array(self._logpe, dtype=np.float64),
        }
        if self.tracking:
            out["logpw"] = np.array(self._logpw, dtype=np.float64)
        return out

    def nbytes(self) -> int:
        # rough CPython list footprint: one 8-byte pointer per slot plus boxed values
        per = self.m * 16 + 8 + 32
        if self.tracking:
            per += 32
        return self.n_nodes * per
