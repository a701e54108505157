# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled context-tree kernel.

Nodes live in flat C arrays indexed by creation order, so a parent always has
a smaller index than any of its descendants and a reverse sweep over indices
is a valid bottom-up traversal.  Child slots hold -1 for contexts that never
occurred; such a slot stands for a zero-count leaf (P_e = P_w = 1).

The public surface mirrors :class:`bayesct._pykernel.Kernel` exactly.
"""

from libc.math cimport log, log1p, exp, fabs, fmax, INFINITY
from libc.stdint cimport int64_t, int32_t, uint16_t, uint8_t
from cpython.mem cimport PyMem_Malloc, PyMem_Realloc, PyMem_Free

import numpy as np

from bayesct._errors import NodeBudgetExceeded

BACKEND = "cython"

cdef enum:
    MAX_DEPTH = 65535


cdef inline double _lse2(double a, double b) noexcept nogil:
    cdef double t
    if a < b:
        t = a
        a = b
        b = t
    if b == -INFINITY:
        return a
    return a + log1p(exp(b - a))


cdef class Kernel:
    cdef readonly int m
    cdef readonly int depth
    cdef readonly Py_ssize_t n_nodes
    cdef readonly int64_t n_obs
    cdef readonly bint tracking
    cdef readonly double beta
    cdef Py_ssize_t cap
    cdef Py_ssize_t node_cap
    cdef int64_t* counts
    cdef int32_t* children
    cdef uint16_t* depths
    cdef double* logpe
    cdef double* logpw
    cdef uint16_t* gid
    cdef double* gtab
    cdef double* gsum
    cdef int n_gamma
    cdef dict overrides
    cdef int32_t* window
    cdef int head
    cdef Py_ssize_t* path
    cdef double log_beta
    cdef double log_1mbeta

    def __cinit__(self, int m, int depth, gamma, context=(), Py_ssize_t node_cap=0,
                  overrides=None):
        cdef Py_ssize_t i
        cdef int j
        if m < 2:
            raise ValueError("alphabet size must be at least 2")
        if depth < 0 or depth > MAX_DEPTH:
            raise ValueError(f"depth must be in 0..{MAX_DEPTH}")
        context = tuple(context)
        if len(context) < depth:
            raise ValueError("insufficient initial context")
        self.m = m
        self.depth = depth
        self.node_cap = node_cap
        self.tracking = False
        self.beta = float("nan")

        rows = [tuple(float(g) for g in gamma)]
        self.overrides = {}
        if overrides:
            for ctx, vec in overrides.items():
                self.overrides[tuple(ctx)] = len(rows)
                rows.append(tuple(float(g) for g in vec))
        if len(rows) > 65535:
            raise ValueError("too many Dirichlet overrides")
        self.n_gamma = len(rows)
        self.gtab = <double*>PyMem_Malloc(self.n_gamma * m * sizeof(double))
        self.gsum = <double*>PyMem_Malloc(self.n_gamma * sizeof(double))
        if self.gtab == NULL or self.gsum == NULL:
            raise MemoryError()
        for i, row in enumerate(rows):
            if len(row) != m:
                raise ValueError("Dirichlet vector length must equal alphabet size")
            self.gsum[i] = 0.0
            for j in range(m):
                if not row[j] > 0:
                    raise ValueError("Dirichlet hyperparameters must be positive")
                self.gtab[i * m + j] = row[j]
                self.gsum[i] += row[j]

        self.window = <int32_t*>PyMem_Malloc(max(depth, 1) * sizeof(int32_t))
        self.path = <Py_ssize_t*>PyMem_Malloc((depth + 1) * sizeof(Py_ssize_t))
        if self.window == NULL or self.path == NULL:
            raise MemoryError()
        self.head = 0
        # window[0] is the most recent symbol
        for i in range(depth):
            j = int(context[len(context) - 1 - i])
            if j < 0 or j >= m:
                raise ValueError(f"context symbol {j} outside alphabet")
            self.window[i] = j

        self.cap = 0
        self.n_nodes = 0
        self.n_obs = 0
        self._reserve(1024)
        self._new_node(0, self.overrides.get((), 0))

    def __dealloc__(self):
        PyMem_Free(self.counts)
        PyMem_Free(self.children)
        PyMem_Free(self.depths)
        PyMem_Free(self.logpe)
        PyMem_Free(self.logpw)
        PyMem_Free(self.gid)
        PyMem_Free(self.gtab)
        PyMem_Free(self.gsum)
        PyMem_Free(self.window)
        PyMem_Free(self.path)

    cdef int _reserve(self, Py_ssize_t newcap) except -1:
        cdef int m = self.m
        cdef void* p
        p = PyMem_Realloc(self.counts, newcap * m * sizeof(int64_t))
        if p == NULL:
            raise MemoryError()
        self.counts = <int64_t*>p
        p = PyMem_Realloc(self.children, newcap * m * sizeof(int32_t))
        if p == NULL:
            raise MemoryError()
        self.children = <int32_t*>p
        p = PyMem_Realloc(self.depths, newcap * sizeof(uint16_t))
        if p == NULL:
            raise MemoryError()
        self.depths = <uint16_t*>p
        p = PyMem_Realloc(self.logpe, newcap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        self.logpe = <double*>p
        if self.tracking:
            p = PyMem_Realloc(self.logpw, newcap * sizeof(double))
            if p == NULL:
                raise MemoryError()
            self.logpw = <double*>p
        if self.n_gamma > 1:
            p = PyMem_Realloc(self.gid, newcap * sizeof(uint16_t))
            if p == NULL:
                raise MemoryError()
            self.gid = <uint16_t*>p
        self.cap = newcap
        return 0

    cdef int _gamma_for_prefix(self, int d) except -1:
        # context of the path node at depth d is window[0..d-1]
        cdef int i
        if self.n_gamma == 1:
            return 0
        ctx = []
        for i in range(d):
            ctx.append(self.window[(self.head + i) % self.depth])
        return self.overrides.get(tuple(ctx), 0)

    cdef Py_ssize_t _new_node(self, int d, int g) except -1:
        cdef Py_ssize_t idx = self.n_nodes
        cdef int j
        cdef int m = self.m
        if self.node_cap > 0 and idx >= self.node_cap:
            raise NodeBudgetExceeded(f"context tree exceeded node budget of {self.node_cap}")
        if idx >= 2147483647:
            raise NodeBudgetExceeded("context tree exceeded 2**31 nodes")
        if idx == self.cap:
            self._reserve(self.cap + self.cap // 2 + 16)
        for j in range(m):
            self.counts[idx * m + j] = 0
            self.children[idx * m + j] = -1
        self.depths[idx] = <uint16_t>d
        self.logpe[idx] = 0.0
        if self.tracking:
            self.logpw[idx] = 0.0
        if self.n_gamma > 1:
            self.gid[idx] = <uint16_t>g
        self.n_nodes = idx + 1
        return idx

    cdef inline double _mix(self, Py_ssize_t node, int d) noexcept:
        cdef int m = self.m
        cdef int j
        cdef int32_t ch
        cdef double s = 0.0
        cdef bint internal = False
        if d == self.depth:
            return self.logpe[node]
        for j in range(m):
            ch = self.children[node * m + j]
            if ch >= 0:
                s += self.logpw[ch]
                internal = True
        if not internal:
            return self.logpe[node]
        return _lse2(self.log_beta + self.logpe[node], self.log_1mbeta + s)

    cdef int _push(self, int sym) except -1:
        cdef int m = self.m
        cdef int D = self.depth
        cdef int d, c, j, g
        cdef Py_ssize_t node, base
        cdef int32_t child
        cdef int64_t msum
        cdef double* gv
        if sym < 0 or sym >= m:
            raise ValueError(f"symbol {sym} outside alphabet of size {m}")
        node = 0
        self.path[0] = 0
        for d in range(1, D + 1):
            c = self.window[(self.head + d - 1) % D]
            child = self.children[node * m + c]
            if child < 0:
                g = self._gamma_for_prefix(d)
                child = <int32_t>self._new_node(d, g)
                self.children[node * m + c] = child
            node = child
            self.path[d] = node
        for d in range(D, -1, -1):
            node = self.path[d]
            base = node * m
            msum = 0
            for j in range(m):
                msum += self.counts[base + j]
            g = self.gid[node] if self.n_gamma > 1 else 0
            gv = self.gtab + g * m
            self.logpe[node] += log((self.counts[base + sym] + gv[sym]) / (msum + self.gsum[g]))
            self.counts[base + sym] += 1
            if self.tracking:
                self.logpw[node] = self._mix(node, d)
        if D > 0:
            self.head = (self.head - 1 + D) % D
            self.window[self.head] = sym
        self.n_obs += 1
        return D + 1

    def push(self, int sym):
        """Append one symbol; returns the number of nodes touched (always D+1)."""
        return self._push(sym)

    def extend(self, symbols):
        cdef const int64_t[::1] arr = np.ascontiguousarray(symbols, dtype=np.int64)
        cdef Py_ssize_t i
        for i in range(arr.shape[0]):
            self._push(<int>arr[i])

    def context(self):
        """Current length-D context, most recent symbol first."""
        cdef int i
        out = []
        for i in range(self.depth):
            out.append(self.window[(self.head + i) % self.depth])
        return tuple(out)

    def ctw_pass(self, double beta):
        """Compute mixture probabilities everywhere and keep them updated."""
        cdef Py_ssize_t idx
        cdef void* p
        if not (0.0 < beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if not self.tracking:
            p = PyMem_Realloc(self.logpw, self.cap * sizeof(double))
            if p == NULL:
                raise MemoryError()
            self.logpw = <double*>p
        self.tracking = True
        self.beta = beta
        self.log_beta = log(beta)
        self.log_1mbeta = log1p(-beta)
        for idx in range(self.n_nodes - 1, -1, -1):
            self.logpw[idx] = self._mix(idx, self.depths[idx])
        return self.logpw[0]

    def log_root_after(self, int sym):
        """Root log mixture probability if `sym` were appended (no mutation)."""
        cdef int m = self.m
        cdef int D = self.depth
        cdef int d, c, j, g
        cdef Py_ssize_t node, base
        cdef int32_t ch
        cdef int64_t msum, a
        cdef double pe, s, val = 0.0
        cdef double* gv
        if not self.tracking:
            raise RuntimeError("mixture probabilities are not being tracked; call ctw_pass first")
        if sym < 0 or sym >= m:
            raise ValueError(f"symbol {sym} outside alphabet of size {m}")
        node = 0
        self.path[0] = 0
        for d in range(1, D + 1):
            if node >= 0:
                c = self.window[(self.head + d - 1) % D]
                node = self.children[node * m + c]
            self.path[d] = node
        for d in range(D, -1, -1):
            node = self.path[d]
            if node >= 0:
                base = node * m
                msum = 0
                for j in range(m):
                    msum += self.counts[base + j]
                a = self.counts[base + sym]
                g = self.gid[node] if self.n_gamma > 1 else 0
                pe = self.logpe[node]
            else:
                msum = 0
                a = 0
                g = self._gamma_for_prefix(d)
                pe = 0.0
            gv = self.gtab + g * m
            pe = pe + log((a + gv[sym]) / (msum + self.gsum[g]))
            if d == D:
                val = pe
            else:
                c = self.window[(self.head + d) % D]
                s = 0.0
                for j in range(m):
                    if j == c:
                        s += val
                    elif node >= 0:
                        ch = self.children[node * m + j]
                        if ch >= 0:
                            s += self.logpw[ch]
                val = _lse2(self.log_beta + pe, self.log_1mbeta + s)
        return val

    def bct(self, double beta, double tie_rel=1e-9):
        """Maximal-probability pass and top-down pruning.

        Returns ``(log P_m at the root, list of leaf contexts)``.
        """
        cdef Py_ssize_t n = self.n_nodes
        cdef Py_ssize_t idx
        cdef int m = self.m
        cdef int D = self.depth
        cdef int d, j
        cdef int32_t ch
        cdef double lb, l1b, s, a, b, virt
        cdef bint internal
        cdef double* logpm
        cdef uint8_t* prune
        if not (0.0 < beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        lb = log(beta)
        l1b = log1p(-beta)
        logpm = <double*>PyMem_Malloc(n * sizeof(double))
        prune = <uint8_t*>PyMem_Malloc(n * sizeof(uint8_t))
        if logpm == NULL or prune == NULL:
            PyMem_Free(logpm)
            PyMem_Free(prune)
            raise MemoryError()
        try:
            for idx in range(n - 1, -1, -1):
                d = self.depths[idx]
                if d == D:
                    logpm[idx] = self.logpe[idx]
                    prune[idx] = 1
                    continue
                virt = 0.0 if d + 1 == D else lb
                s = 0.0
                internal = False
                for j in range(m):
                    ch = self.children[idx * m + j]
                    if ch >= 0:
                        s += logpm[ch]
                        internal = True
                    else:
                        s += virt
                a = lb + self.logpe[idx]
                if not internal:
                    logpm[idx] = a
                    prune[idx] = 1
                    continue
                b = l1b + s
                if a >= b or (b - a) <= tie_rel * fmax(1.0, fmax(fabs(a), fabs(b))):
                    logpm[idx] = a
                    prune[idx] = 1
                else:
                    logpm[idx] = b
                    prune[idx] = 0
            leaves = []
            stack = [(0, ())]
            while stack:
                idx, ctx = stack.pop()
                if prune[idx]:
                    leaves.append(ctx)
                    continue
                for j in range(m - 1, -1, -1):
                    ch = self.children[idx * m + j]
                    if ch >= 0:
                        stack.append((ch, ctx + (j,)))
                    else:
                        leaves.append(ctx + (j,))
            return logpm[0], leaves
        finally:
            PyMem_Free(logpm)
            PyMem_Free(prune)

    def find(self, ctx):
        """Index of the node for context `ctx` (most recent first), or -1."""
        cdef Py_ssize_t node = 0
        if len(ctx) > self.depth:
            return -1
        for c in ctx:
            if c < 0 or c >= self.m:
                return -1
            node = self.children[node * self.m + <int>c]
            if node < 0:
                return -1
        return node

    def child(self, Py_ssize_t idx, int j):
        self._check(idx)
        return self.children[idx * self.m + j]

    def counts_of(self, Py_ssize_t idx):
        self._check(idx)
        return [self.counts[idx * self.m + j] for j in range(self.m)]

    def log_pe(self, Py_ssize_t idx):
        self._check(idx)
        return self.logpe[idx]

    def log_pw(self, Py_ssize_t idx):
        self._check(idx)
        if not self.tracking:
            raise RuntimeError("mixture probabilities are not being tracked; call ctw_pass first")
        return self.logpw[idx]

    def depth_of(self, Py_ssize_t idx):
        self._check(idx)
        return self.depths[idx]

    cdef int _check(self, Py_ssize_t idx) except -1:
        if idx < 0 or idx >= self.n_nodes:
            raise IndexError(f"node index {idx} out of range")
        return 0

    def export(self):
        """Copies of the node arrays as numpy arrays."""
        cdef Py_ssize_t n = self.n_nodes
        cdef int m = self.m
        out = {
            "counts": np.asarray(<int64_t[:n * m]>self.counts).copy().reshape(n, m),
            "children": np.asarray(<int32_t[:n * m]>self.children).copy().reshape(n, m),
            "depth": np.asarray(<uint16_t[:n]>self.depths).copy(),
            "logpe": np.asarray(<double[:n]>self.logpe).copy(),
        }
        if self.tracking:
            out["logpw"] = np.asarray(<double[:n]>self.logpw).copy()
        return out

    def nbytes(self):
        """Bytes currently allocated for node storage."""
        cdef Py_ssize_t per = self.m * (sizeof(int64_t) + sizeof(int32_t)) + sizeof(uint16_t) + sizeof(double)
        if self.tracking:
            per += sizeof(double)
        if self.n_gamma > 1:
            per += sizeof(uint16_t)
        return self.cap * per
