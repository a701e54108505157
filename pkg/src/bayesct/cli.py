"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 resource cap hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from math import floor
from pathlib import Path
from typing import Sequence

import numpy as np

from ._errors import DataError, ResourceCapError
from .core import Alphabet, CountTree, ParamSet, Series, count_models
from .exact import bct_map, ctw, kbct
from .io import (
    FORMATS,
    IngestSpec,
    ingest,
    leaf_annotations,
    parse_tree_document,
    serialize_tree,
)
from .likelihood import DirichletHyper
from .mcmc import McmcConfig, run_chain, run_chains
from .posterior import bayes_factor, posterior_report
from .predict import evaluate_log_loss
from .prior import default_beta
from .simulate import fixture, sample_chain, FIXTURES

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CAP = 4


class UsageError(Exception):
    pass


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="input file ('-' for stdin)")
    p.add_argument("--input-format", choices=FORMATS, default="symbols-text")
    p.add_argument("--alphabet", help="comma-separated labels, or an integer size")
    p.add_argument("--thresholds", help="comma-separated cut points for quantized-numeric input")
    p.add_argument("--percent-change", action="store_true", help="quantize successive percent changes")
    p.add_argument("--context-mode", choices=("consume", "explicit"), default="consume")
    p.add_argument("--context", help="initial context in time order (explicit mode), same token format as the input")
    p.add_argument("--depth", "-D", type=int, required=True)
    p.add_argument("--beta", type=float, help="prior parameter (default 1 - 2^-(m-1))")
    p.add_argument("--gamma", help="Dirichlet hyperparameter: a scalar, or a JSON file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--backend", choices=("cython", "python"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayesct", description="Exact Bayesian inference for context-tree models")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ctw", help="log prior predictive likelihood")
    _add_data_args(p)

    p = sub.add_parser("map", help="MAP tree model")
    _add_data_args(p)

    p = sub.add_parser("topk", help="k most probable tree models")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("posterior", help="posterior probability of a given model")
    _add_data_args(p)
    p.add_argument("--model", required=True, help="tree document")

    p = sub.add_parser("bf", help="log Bayes factor between two models")
    _add_data_args(p)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)

    p = sub.add_parser("mcmc", help="sample tree models")
    _add_data_args(p)
    p.add_argument("--sampler", choices=("rw", "jump"), default="rw")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=float, default=0.1)
    p.add_argument("--jump-p", type=float, default=0.5)
    p.add_argument("--topk", type=int, help="size of the jump target set (jump sampler)")
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--show", type=int, default=10, help="number of most visited models to report")
    p.add_argument("--trace-out", help="write the trace table here")

    p = sub.add_parser("predict", help="sequential log-loss")
    _add_data_args(p)
    p.add_argument("--train-frac", type=float, required=True)
    p.add_argument("--curve-out", help="write the cumulative loss table here")

    p = sub.add_parser("sample", help="simulate a chain")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=sorted(FIXTURES))
    src.add_argument("--model", help="tree document with a 'theta' annotation on every leaf")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--context", help="initial context, symbol indices in time order")

    p = sub.add_parser("count-models", help="number of tree models of depth <= D")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--depth", "-D", type=int, required=True)
    return ap


def _alphabet(arg: str | None) -> Alphabet | None:
    if arg is None:
        return None
    if arg.isdigit():
        return Alphabet.of_size(int(arg))
    return Alphabet(tuple(x.strip() for x in arg.split(",")))


def _gamma(arg: str | None, m: int) -> DirichletHyper | None:
    if arg is None:
        return None
    try:
        return DirichletHyper.coerce(float(arg), m)
    except ValueError:
        pass
    try:
        doc = json.loads(Path(arg).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"--gamma: not a number or readable JSON file ({e})") from None
    if isinstance(doc, list):
        return DirichletHyper.coerce(doc, m)
    ov = {
        tuple(int(c) for c in k.split(".") if c != ""): v
        for k, v in (doc.get("overrides") or {}).items()
    }
    return DirichletHyper(tuple(doc["base"]), ov)


def _load_series(args) -> Series:
    alphabet = _alphabet(args.alphabet)
    thresholds = tuple(float(t) for t in args.thresholds.split(",")) if args.thresholds else ()
    spec = IngestSpec(args.input_format, alphabet, thresholds, args.percent_change, args.context_mode)
    source = sys.stdin if args.input == "-" else args.input
    context = None
    if args.context_mode == "explicit":
        if args.context is None:
            raise UsageError("--context-mode explicit needs --context")
        from .io import read_symbols

        probe = IngestSpec("symbols-text", alphabet)
        if spec.format == "dna-fasta":
            probe = IngestSpec("symbols-text", Alphabet(("A", "C", "G", "T")))
        ctx, _ = read_symbols(_StringSource(args.context), probe)
        context = ctx.tolist()
    elif args.context is not None:
        raise UsageError("--context requires --context-mode explicit")
    if args.depth < 0:
        raise UsageError("--depth must be nonnegative")
    return ingest(source, spec, args.depth, context)


class _StringSource:
    def __init__(self, text: str):
        self.text = text

    def read(self) -> str:
        return self.text


def _leaf_names(model, alphabet: Alphabet) -> list[str]:
    sep = "" if all(len(x) == 1 for x in alphabet.labels) else "."
    return ["".join(alphabet.label(c) + sep for c in s).rstrip(".") or "λ" for s in model.sorted_leaves()]


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, default=float))
    else:
        print("\n".join(text_lines))


def _beta(args, m: int, need_map: bool) -> float:
    beta = default_beta(m) if args.beta is None else args.beta
    if not 0.0 < beta < 1.0:
        raise UsageError("--beta must lie in (0, 1)")
    if need_map and beta < 0.5:
        raise UsageError("MAP and top-k search require --beta >= 0.5")
    return beta


def _tree(args, series: Series) -> CountTree:
    return CountTree.build(series, args.depth, gamma=_gamma(args.gamma, series.m), backend=args.backend)


def _read_model(path: str, m: int):
    doc = parse_tree_document(Path(path).read_text())
    if doc.model.m != m:
        raise DataError(f"{path}: model alphabet size {doc.model.m} does not match the data ({m})")
    return doc


def cmd_ctw(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, False)
    tree = _tree(args, series)
    v = ctw(tree, beta)
    _emit(
        args,
        {"log_evidence": v, "n": series.n, "depth": args.depth, "beta": beta, "nodes": tree.node_count},
        [f"log_evidence\t{v!r}", f"n\t{series.n}", f"nodes\t{tree.node_count}"],
    )


def cmd_map(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, True)
    tree = _tree(args, series)
    model, value = bct_map(tree, beta)
    rep = posterior_report(tree, [model], beta)
    post = rep.posterior[0]
    if args.format == "json":
        meta = {"log_joint": value, "log_posterior": rep.log_posterior[0], "posterior": post,
                "log_prior": rep.log_prior[0], "log_evidence": rep.log_evidence}
        print(serialize_tree(model, leaf_annotations(tree, model), meta, series.alphabet))
        return
    print(f"leaves\t{' '.join(_leaf_names(model, series.alphabet))}")
    print(f"depth\t{model.depth}")
    print(f"posterior\t{post!r}")
    print(f"log_joint\t{value!r}")


def cmd_topk(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, True)
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    tree = _tree(args, series)
    top = kbct(tree, beta, args.k)
    rep = posterior_report(tree, [t for t, _ in top], beta)
    if args.format == "json":
        docs = []
        for i, (model, value) in enumerate(top):
            meta = {"rank": i + 1, "log_joint": value, "posterior": rep.posterior[i],
                    "log_posterior": rep.log_posterior[i],
                    "log_odds_vs_map": rep.log_posterior[0] - rep.log_posterior[i]}
            docs.append(json.loads(serialize_tree(model, None, meta, series.alphabet)))
        print(json.dumps({"log_evidence": rep.log_evidence, "models": docs}, indent=2))
        return
    for i, (model, value) in enumerate(top):
        print(f"{i + 1}\tposterior={rep.posterior[i]!r}\tlog_joint={value!r}\t"
              f"leaves={' '.join(_leaf_names(model, series.alphabet))}")


def cmd_posterior(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, False)
    tree = _tree(args, series)
    doc = _read_model(args.model, series.m)
    if doc.model.depth > args.depth:
        raise DataError(f"model depth {doc.model.depth} exceeds --depth {args.depth}")
    rep = posterior_report(tree, [doc.model], beta)
    _emit(
        args,
        {"posterior": rep.posterior[0], "log_posterior": rep.log_posterior[0],
         "log_prior": rep.log_prior[0], "log_joint": rep.log_joint[0], "log_evidence": rep.log_evidence},
        [f"posterior\t{rep.posterior[0]!r}", f"log_posterior\t{rep.log_posterior[0]!r}",
         f"log_prior\t{rep.log_prior[0]!r}"],
    )


def cmd_bf(args) -> None:
    series = _load_series(args)
    tree = _tree(args, series)
    a = _read_model(args.model_a, series.m).model
    b = _read_model(args.model_b, series.m).model
    for t in (a, b):
        if t.depth > args.depth:
            raise DataError(f"model depth {t.depth} exceeds --depth {args.depth}")
    v = bayes_factor(tree, a, b)
    _emit(args, {"log_bayes_factor": v}, [f"log_bayes_factor\t{v!r}"])


def cmd_mcmc(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, args.sampler == "jump")
    tree = _tree(args, series)
    if args.iters < 0:
        raise UsageError("--iters must be nonnegative")
    top = []
    if args.sampler == "jump":
        if not 0.0 < args.jump_p < 1.0:
            raise UsageError("--jump-p must lie in (0, 1)")
        top = [t for t, _ in kbct(tree, beta, args.topk or 3)]
    elif args.topk is not None:
        raise UsageError("--topk only applies to the jump sampler")
    cfg = McmcConfig(args.iters, seed=args.seed, beta=beta, burn_in=args.burn_in,
                     sampler=args.sampler, jump_p=args.jump_p, top_models=top)
    traces = run_chains(cfg, tree, args.chains) if args.chains > 1 else [run_chain(cfg, tree)]
    out = []
    lines = []
    for c, tr in enumerate(traces):
        freqs = list(tr.frequencies().items())[: args.show]
        hist = tr.depth_histogram(args.depth)
        out.append({
            "chain": c,
            "samples": len(tr),
            "acceptance_rate": tr.acceptance_rate,
            "distinct_models": len(tr.models),
            "depth_histogram": hist.tolist(),
            "top": [{"leaves": _leaf_names(t, series.alphabet), "frequency": f} for t, f in freqs],
        })
        lines.append(f"chain\t{c}\tsamples={len(tr)}\tacceptance={tr.acceptance_rate}\tdistinct={len(tr.models)}")
        lines.append("depth_histogram\t" + " ".join(f"{h:.6g}" for h in hist))
        for t, f in freqs:
            lines.append(f"\t{f:.6f}\t{' '.join(_leaf_names(t, series.alphabet))}")
        if args.trace_out:
            path = args.trace_out if len(traces) == 1 else f"{args.trace_out}.{c}"
            Path(path).write_text(tr.to_table())
    _emit(args, {"chains": out}, lines)


def cmd_predict(args) -> None:
    series = _load_series(args)
    beta = _beta(args, series.m, False)
    if not 0.0 <= args.train_frac <= 1.0:
        raise UsageError("--train-frac must lie in [0, 1]")
    train_len = floor(args.train_frac * series.n)
    curve = evaluate_log_loss(series, train_len, args.depth, beta, _gamma(args.gamma, series.m), args.backend)
    tree = _tree(args, series)
    final = ctw(tree, beta)
    if args.curve_out:
        Path(args.curve_out).write_text(curve.to_table())
    _emit(
        args,
        {"train_len": train_len, "test_len": int(curve.losses.size), "loss_nats": curve.total,
         "loss_bits": curve.total_bits, "mean_bits": curve.mean_bits, "log_evidence": final},
        [f"train_len\t{train_len}", f"test_len\t{curve.losses.size}", f"loss_nats\t{curve.total!r}",
         f"loss_bits\t{curve.total_bits!r}", f"mean_bits\t{curve.mean_bits!r}", f"log_evidence\t{final!r}"],
    )


def cmd_sample(args) -> None:
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    if args.fixture:
        model, theta = fixture(args.fixture)
        alphabet = Alphabet.of_size(model.m)
    else:
        doc = parse_tree_document(Path(args.model).read_text())
        model, alphabet = doc.model, doc.alphabet
        params = {}
        for s in model.leaves:
            ann = doc.annotations.get(s, {})
            th = ann.get("theta", ann.get("theta_mean"))
            if th is None:
                raise DataError(f"{args.model}: leaf {s} has no 'theta' annotation")
            params[s] = th
        try:
            theta = ParamSet(params)
        except ValueError as e:
            raise DataError(str(e)) from None
    context = None
    if args.context is not None:
        context = [int(c) for c in args.context.replace(",", " ").split()]
    series = sample_chain(model, theta, args.n, context, np.random.Generator(np.random.PCG64(args.seed)), alphabet)
    sep = "" if all(len(x) == 1 for x in alphabet.labels) else " "
    print(sep.join(alphabet.label(i) for i in series.data.tolist()))


def cmd_count_models(args) -> None:
    if args.m < 2 or args.depth < 0:
        raise UsageError("need --m >= 2 and --depth >= 0")
    print(count_models(args.m, args.depth))


COMMANDS = {
    "ctw": cmd_ctw,
    "map": cmd_map,
    "topk": cmd_topk,
    "posterior": cmd_posterior,
    "bf": cmd_bf,
    "mcmc": cmd_mcmc,
    "predict": cmd_predict,
    "sample": cmd_sample,
    "count-models": cmd_count_models,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"bayesct: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as e:
        print(f"bayesct: resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, OSError, KeyError) as e:
        print(f"bayesct: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"bayesct: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
