from __future__ import annotations

import io
import json

import numpy as np
import pytest

from bayesct._errors import DataError
from bayesct.core import Alphabet, CountTree, TreeModel
from bayesct.io import (
    IngestSpec,
    ingest,
    leaf_annotations,
    parse_tree,
    parse_tree_document,
    quantize,
    read_symbols,
    serialize_tree,
)
from bayesct.posterior import log_model_posterior
from bayesct.simulate import fixture


def src(text: str):
    return io.StringIO(text)


class TestIngest:
    def test_fasta_mapping(self):
        x, a = read_symbols(src(">seq\nAC\ngt\n>second\nTTTT\n"), IngestSpec("dna-fasta"))
        assert x.tolist() == [0, 1, 2, 3] and a.labels == ("A", "C", "G", "T")

    def test_fasta_errors(self):
        with pytest.raises(DataError, match="malformed FASTA"):
            read_symbols(src("ACGT\n"), IngestSpec("dna-fasta"))
        with pytest.raises(DataError, match="'N' at position 3"):
            read_symbols(src(">s\nACNT\n"), IngestSpec("dna-fasta"))

    def test_symbols_declared_binary(self):
        x, _ = read_symbols(src("0 1 0"), IngestSpec(alphabet=Alphabet.of_size(2)))
        assert x.tolist() == [0, 1, 0]

    def test_symbols_unknown_token(self):
        with pytest.raises(DataError, match="'2' at position 3"):
            read_symbols(src("0 1 2"), IngestSpec(alphabet=Alphabet.of_size(2)))

    def test_symbols_autodetect_labels(self):
        x, a = read_symbols(src("b a c a"), IngestSpec())
        assert a.labels == ("a", "b", "c") and x.tolist() == [1, 0, 2, 0]
        x, a = read_symbols(src("0 3 1"), IngestSpec())
        assert a.size == 4

    def test_integer_csv(self):
        x, a = read_symbols(src("0,1,2\n2,1\n"), IngestSpec("integer-csv"))
        assert x.tolist() == [0, 1, 2, 2, 1] and a.size == 3
        with pytest.raises(DataError, match="position 2"):
            read_symbols(src("0,x"), IngestSpec("integer-csv"))

    def test_quantizer_percent_change(self):
        th = (-3, -2, -1, 1, 2, 3)
        prices = [100, 95, 97.5, 98, 99, 100.5, 103, 110]
        # changes: -5, 2.63, 0.51, 1.02, 1.52, 2.49, 6.80
        assert quantize(prices, th, percent_change=True).tolist() == [0, 5, 3, 4, 4, 5, 6]
        # the boundary +1 maps to symbol 3 (interval (-1, 1])
        assert quantize([1.0, -1.0, -0.999], th).tolist() == [3, 2, 3]

    def test_quantized_ingest(self):
        spec = IngestSpec("quantized-numeric", thresholds=(-3, -2, -1, 1, 2, 3), percent_change=True)
        x, a = read_symbols(src("100 101 99"), spec)
        # +1% sits on a threshold (symbol 3); -1.98% falls in (-2, -1]
        assert a.size == 7 and x.tolist() == [3, 2]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            IngestSpec("quantized-numeric", thresholds=(1, 1))
        with pytest.raises(ValueError):
            IngestSpec("quantized-numeric")
        with pytest.raises(ValueError):
            IngestSpec("xml")

    def test_context_modes(self):
        s = ingest(src("0 1 1 0"), IngestSpec(), depth=2)
        assert s.context == (0, 1) and s.data.tolist() == [1, 0]
        s = ingest(src("0 1 1 0"), IngestSpec(context_mode="explicit"), depth=2, context=[1, 1])
        assert s.context == (1, 1) and s.n == 4
        with pytest.raises(DataError):
            ingest(src("0 1"), IngestSpec(context_mode="explicit"), depth=1)

    def test_text_roundtrip(self, tmp_path):
        labels = ("x", "y", "z")
        rng = np.random.default_rng(0)
        x = rng.integers(0, 3, size=50)
        p = tmp_path / "s.txt"
        p.write_text(" ".join(labels[i] for i in x))
        s = ingest(p, IngestSpec(alphabet=Alphabet(labels)), depth=3)
        assert list(s.symbols()) == x.tolist()


class TestTreeDocument:
    def test_root_document(self):
        doc = json.loads(serialize_tree(TreeModel.root(2)))
        assert doc["root"] == {"symbol": None, "children": []}

    @pytest.mark.parametrize("name", ["ternary5", "renewal", "lag3"])
    def test_roundtrip(self, name):
        model, _ = fixture(name)
        assert parse_tree(serialize_tree(model)) == model

    def test_annotations_roundtrip(self, tiny_tree):
        model = TreeModel.complete(2, 1)
        ann = leaf_annotations(tiny_tree, model)
        ann[()] = {"log_posterior": log_model_posterior(tiny_tree, model, 0.5)}
        doc = parse_tree_document(serialize_tree(model, ann, {"beta": 0.5}, Alphabet(("a", "b"))))
        assert doc.model == model and doc.alphabet.labels == ("a", "b")
        assert doc.annotations[(1,)]["counts"] == [1, 0]
        assert doc.annotations[(0,)]["theta_mean"] == [0.5, 0.5]
        assert doc.annotations[()]["log_posterior"] == pytest.approx(np.log(0.5), abs=1e-9)
        assert doc.meta == {"beta": 0.5}

    @pytest.mark.parametrize(
        "text,where",
        [
            ("{", "line 1"),
            ('{"schema": "other"}', "$.schema"),
            ('{"schema": "bayesct.tree/1", "m": 2, "labels": ["0", "1"], "root": {"children": [{}]}}',
             "$.root.children"),
            ('{"schema": "bayesct.tree/1", "m": 2, "labels": ["0", "1"], '
             '"root": {"children": [{"symbol": "0", "children": []}, {"symbol": "0", "children": []}]}}',
             "$.root.children[1].symbol"),
            ('{"schema": "bayesct.tree/1", "m": 2, "labels": ["0", "1"], "root": {"children": 3}}',
             "$.root.children"),
        ],
    )
    def test_malformed_location(self, text, where):
        with pytest.raises(DataError) as e:
            parse_tree(text)
        assert where in str(e.value)

    def test_leaf_annotations(self, backend):
        t = CountTree.build(ingest(src("0 0 1 0"), IngestSpec(), depth=1), 1, backend=backend)
        ann = leaf_annotations(t, TreeModel.root(2))
        assert ann[()] == {"counts": [2, 1], "theta_mean": [0.625, 0.375]}
