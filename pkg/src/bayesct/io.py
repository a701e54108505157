"""Data ingestion and the JSON tree document format."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._errors import DataError
from .core import Alphabet, CountTree, Series, TreeModel
from .likelihood import DirichletHyper

FORMATS = ("symbols-text", "dna-fasta", "integer-csv", "quantized-numeric")
TREE_SCHEMA = "bayesct.tree/1"
DNA = Alphabet(("A", "C", "G", "T"))


@dataclass(frozen=True)
class IngestSpec:
    format: str = "symbols-text"
    alphabet: Alphabet | None = None
    thresholds: tuple[float, ...] = ()
    percent_change: bool = False
    context_mode: str = "consume"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; choose from {FORMATS}")
        th = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", th)
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("quantizer thresholds must be strictly increasing")
        if self.format == "quantized-numeric" and not th:
            raise ValueError("quantized-numeric input needs thresholds")
        if self.context_mode not in ("consume", "explicit"):
            raise ValueError("context mode must be 'consume' or 'explicit'")


def _read_text(source) -> str:
    if isinstance(source, (str, Path)):
        return Path(source).read_text()
    return source.read()


def _symbols_text(text: str, alphabet: Alphabet | None) -> tuple[np.ndarray, Alphabet]:
    tokens = text.split()
    if alphabet is not None and all(len(lab) == 1 for lab in alphabet.labels):
        tokens = [ch for tok in tokens for ch in tok]
    if alphabet is None:
        if all(t.lstrip("-").isdigit() for t in tokens) and tokens:
            ints = [int(t) for t in tokens]
            if min(ints) < 0:
                raise DataError(f"negative symbol {min(ints)} at position {ints.index(min(ints)) + 1}")
            alphabet = Alphabet.of_size(max(2, max(ints) + 1))
            return np.array(ints, dtype=np.int64), alphabet
        labels = sorted(set(tokens))
        if len(labels) < 2:
            labels = labels + [f"_{i}" for i in range(2 - len(labels))]
        alphabet = Alphabet(tuple(labels))
    index = {lab: i for i, lab in enumerate(alphabet.labels)}
    out = np.empty(len(tokens), dtype=np.int64)
    for pos, tok in enumerate(tokens):
        i = index.get(tok)
        if i is None:
            raise DataError(f"unknown symbol {tok!r} at position {pos + 1}")
        out[pos] = i
    return out, alphabet


def _fasta(text: str) -> np.ndarray:
    """First record of a FASTA file mapped A,C,G,T -> 0,1,2,3."""
    lines = text.splitlines()
    start = None
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            if not line.startswith(">"):
                raise DataError(f"malformed FASTA: line {lineno} should be a '>' header")
            start = lineno
            break
    if start is None:
        raise DataError("malformed FASTA: no records")
    seq = []
    for line in lines[start:]:
        if line.startswith(">"):
            break
        seq.append(line.strip())
    s = "".join(seq).upper()
    if not s:
        raise DataError("malformed FASTA: empty sequence")
    lut = np.full(256, -1, dtype=np.int64)
    for i, ch in enumerate("ACGT"):
        lut[ord(ch)] = i
    raw = np.frombuffer(s.encode("ascii", errors="replace"), dtype=np.uint8)
    out = lut[raw]
    bad = np.flatnonzero(out < 0)
    if bad.size:
        p = int(bad[0])
        raise DataError(f"unknown symbol {s[p]!r} at position {p + 1}")
    return out


def _integer_csv(text: str, alphabet: Alphabet | None) -> tuple[np.ndarray, Alphabet]:
    vals = []
    pos = 0
    for row in csv.reader(text.splitlines()):
        for tok in row:
            tok = tok.strip()
            if not tok:
                continue
            pos += 1
            try:
                vals.append(int(tok))
            except ValueError:
                raise DataError(f"unknown symbol {tok!r} at position {pos}") from None
    arr = np.array(vals, dtype=np.int64)
    if alphabet is None:
        alphabet = Alphabet.of_size(max(2, int(arr.max()) + 1 if arr.size else 2))
    m = alphabet.size
    bad = np.flatnonzero((arr < 0) | (arr >= m))
    if bad.size:
        p = int(bad[0])
        raise DataError(f"unknown symbol {str(arr[p])!r} at position {p + 1}")
    return arr, alphabet


def quantize(values: Sequence[float], thresholds: Sequence[float], percent_change: bool = False) -> np.ndarray:
    """Symbol = number of thresholds strictly below the value (or its percent change)."""
    v = np.asarray(values, dtype=np.float64)
    if percent_change:
        if np.any(v[:-1] == 0):
            raise DataError("percent change undefined after a zero value")
        v = 100.0 * np.diff(v) / v[:-1]
    return np.searchsorted(np.asarray(thresholds, dtype=np.float64), v, side="left").astype(np.int64)


def _numeric(text: str, spec: IngestSpec) -> np.ndarray:
    vals = []
    for pos, tok in enumerate(text.replace(",", " ").split(), start=1):
        try:
            vals.append(float(tok))
        except ValueError:
            raise DataError(f"unknown symbol {tok!r} at position {pos}") from None
    return quantize(vals, spec.thresholds, spec.percent_change)


def read_symbols(source, spec: IngestSpec) -> tuple[np.ndarray, Alphabet]:
    text = _read_text(source)
    if spec.format == "symbols-text":
        return _symbols_text(text, spec.alphabet)
    if spec.format == "dna-fasta":
        return _fasta(text), DNA
    if spec.format == "integer-csv":
        return _integer_csv(text, spec.alphabet)
    alphabet = spec.alphabet or Alphabet.of_size(len(spec.thresholds) + 1)
    if alphabet.size != len(spec.thresholds) + 1:
        raise DataError("alphabet size must be one more than the number of thresholds")
    return _numeric(text, spec), alphabet


def ingest(source, spec: IngestSpec, depth: int = 0, context: Sequence[int] | None = None) -> Series:
    """Read a file into a Series.

    In "consume" mode the first `depth` symbols become the initial context;
    in "explicit" mode `context` (time order) must be supplied.
    """
    symbols, alphabet = read_symbols(source, spec)
    if spec.context_mode == "explicit":
        if context is None:
            raise DataError("explicit context mode requires a context")
        return Series.from_symbols(symbols, alphabet, depth, context)
    return Series.from_symbols(symbols, alphabet, depth)


# ----------------------------------------------------------------------------
# tree documents


def _ctx_key(ctx: Sequence[int]) -> str:
    return ".".join(str(c) for c in ctx)


def serialize_tree(
    model: TreeModel,
    annotations: Mapping[tuple, Mapping[str, Any]] | None = None,
    meta: Mapping[str, Any] | None = None,
    alphabet: Alphabet | None = None,
) -> str:
    """Nested JSON document: each node has its symbol label, children and annotations."""
    alphabet = alphabet or Alphabet.of_size(model.m)
    if alphabet.size != model.m:
        raise ValueError("alphabet size does not match the model")
    annotations = annotations or {}

    def node(ctx: tuple) -> dict:
        out: dict[str, Any] = {"symbol": alphabet.label(ctx[-1]) if ctx else None}
        if ctx in model.leaves:
            out["children"] = []
        else:
            out["children"] = [node(ctx + (j,)) for j in range(model.m)]
        if ctx in annotations:
            out["annotations"] = dict(annotations[ctx])
        return out

    doc = {
        "schema": TREE_SCHEMA,
        "m": model.m,
        "labels": list(alphabet.labels),
        "root": node(()),
    }
    if meta:
        doc["meta"] = dict(meta)
    return json.dumps(doc, indent=2, sort_keys=False, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


@dataclass
class TreeDocument:
    model: TreeModel
    alphabet: Alphabet
    annotations: dict[tuple, dict] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def parse_tree_document(text: str) -> TreeDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataError(f"malformed tree document at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise DataError("malformed tree document at $: expected an object")
    if doc.get("schema") != TREE_SCHEMA:
        raise DataError(f"malformed tree document at $.schema: expected {TREE_SCHEMA!r}")
    m = doc.get("m")
    labels = doc.get("labels")
    if not isinstance(m, int) or m < 2:
        raise DataError("malformed tree document at $.m: expected an integer >= 2")
    if not isinstance(labels, list) or len(labels) != m:
        raise DataError("malformed tree document at $.labels: expected m labels")
    alphabet = Alphabet(tuple(str(x) for x in labels))
    index = {lab: i for i, lab in enumerate(alphabet.labels)}
    leaves: set[tuple] = set()
    annotations: dict[tuple, dict] = {}

    stack = [(doc.get("root"), (), "$.root")]
    while stack:
        node, ctx, where = stack.pop()
        if not isinstance(node, dict):
            raise DataError(f"malformed tree document at {where}: expected an object")
        kids = node.get("children")
        if not isinstance(kids, list):
            raise DataError(f"malformed tree document at {where}.children: expected a list")
        if "annotations" in node:
            if not isinstance(node["annotations"], dict):
                raise DataError(f"malformed tree document at {where}.annotations: expected an object")
            annotations[ctx] = node["annotations"]
        if not kids:
            leaves.add(ctx)
            continue
        if len(kids) != m:
            raise DataError(f"malformed tree document at {where}.children: expected 0 or {m} children, got {len(kids)}")
        seen = set()
        for i, kid in enumerate(kids):
            kw = f"{where}.children[{i}]"
            sym = kid.get("symbol") if isinstance(kid, dict) else None
            if sym not in index:
                raise DataError(f"malformed tree document at {kw}.symbol: unknown symbol {sym!r}")
            j = index[sym]
            if j in seen:
                raise DataError(f"malformed tree document at {kw}.symbol: duplicate symbol {sym!r}")
            seen.add(j)
            stack.append((kid, ctx + (j,), kw))
    try:
        model = TreeModel(m, frozenset(leaves))
    except ValueError as e:
        raise DataError(f"malformed tree document: {e}") from None
    return TreeDocument(model, alphabet, annotations, dict(doc.get("meta") or {}))


def parse_tree(text: str) -> TreeModel:
    return parse_tree_document(text).model


def leaf_annotations(
    tree: CountTree, model: TreeModel, gamma: DirichletHyper | None = None
) -> dict[tuple, dict]:
    """Counts and posterior-mean θ at each leaf of `model`."""
    gamma = gamma or tree.gamma
    out = {}
    for s in model.sorted_leaves():
        a = tree.counts(s)
        post = a + np.asarray(gamma.for_context(s))
        out[s] = {"counts": a.tolist(), "theta_mean": (post / post.sum()).tolist()}
    return out
