"""Command line interface.

Subcommands: synth, ingest, topology, train, evaluate, explain.  Every
run writes its artifacts under --out plus a manifest.json recording the
arguments, seeds, input digests, package version and wall-clock time.
Report files themselves contain no timestamps so reruns with identical
inputs are byte-identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .explain import ExplainError, explain_node, rank_edge_importance_by_type, rank_entities, rank_node_features
from .experiments import (
    ExperimentError,
    run_oos_ablation,
    run_oot,
)
from .graph import GraphError, NodeKind
from .ingest import (
    DataError,
    SchemaError,
    attach_features,
    build_graph,
    fit_encoding,
    parse_csv,
    records_to_csv,
    synth_dataset,
)
from .rgcn import (
    ModelError,
    ModelGraph,
    TrainConfig,
    TrainError,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .rgcn.checkpoint import CheckpointError
from .topology import ConvergenceError, FitError, centrality_table, default_katz_beta, topology_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        if isinstance(doc, str):
            fh.write(doc)
        else:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _write_manifest(out: Path, args: argparse.Namespace, t0: float, inputs: dict) -> None:
    doc = {
        "command": args.command,
        "args": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("command", "func")
        },
        "inputs_sha256": inputs,
        "version": __version__,
        "wall_clock_seconds": round(time.time() - t0, 3),
    }
    _write_json(out / "manifest.json", doc)


def _load_records(path: str):
    result = parse_csv(path)
    if result.errors and not result.records:
        raise DataError(
            f"no parseable rows; first error at line {result.errors[0].line}: "
            f"{result.errors[0].message}"
        )
    return result


def _default_workers() -> int:
    raw = os.environ.get("CATNET_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- subcommands ----------------------------------------------------------


def cmd_synth(args) -> int:
    records, manifest = synth_dataset(args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "contracts.csv").write_text(records_to_csv(records))
    _write_json(out / "synth_manifest.json", manifest)
    return EXIT_OK


def cmd_ingest(args) -> int:
    result = _load_records(args.input)
    graph, issue_years, targets = build_graph(result.records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.json").write_text(graph.to_json() + "\n")
    _write_json(
        out / "ingest_report.json",
        {
            "n_records": len(result.records),
            "n_row_errors": len(result.errors),
            "row_errors": [
                {"line": e.line, "message": e.message} for e in result.errors
            ],
            "n_nodes": graph.n_nodes,
            "n_edges": graph.n_edges,
            "n_contracts": len(targets),
            "year_min": min(issue_years.values()) if issue_years else None,
            "year_max": max(issue_years.values()) if issue_years else None,
        },
    )
    return EXIT_OK


def cmd_topology(args) -> int:
    result = _load_records(args.input)
    graph, issue_years, _ = build_graph(result.records)
    report = topology_report(
        graph,
        issue_years=issue_years,
        n_bootstrap=args.bootstrap,
        seed=args.seed,
    )
    out = Path(args.out)
    _write_json(out / "topology_report.json", report.to_dict())
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        hidden=args.hidden,
        n_layers=args.layers,
        num_bases=args.bases,
        lr=args.lr,
        dropout=args.dropout,
        optimizer=args.optimizer,
        activation=args.activation,
        epochs=args.epochs,
        patience=args.patience,
    )


def cmd_train(args) -> int:
    result = _load_records(args.input)
    records = result.records
    graph, _, _ = build_graph(records)
    mg = ModelGraph.from_graph(graph)
    topo = None
    if not args.no_topo:
        topo = centrality_table(graph, katz_beta=default_katz_beta(graph.homo_view()))
    enc = fit_encoding(records)
    feats = attach_features(graph, records, enc, topo=topo)
    node_y = np.zeros(graph.n_nodes)
    nodes = []
    for rec in records:
        n = graph.find_node(NodeKind.CONTRACT, rec.contract_id)
        node_y[n] = rec.spread_premium
        nodes.append(n)
    nodes = np.array(nodes, dtype=np.int64)
    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(len(nodes))
    n_val = int(round(args.val_frac * len(nodes)))
    val_nodes = nodes[perm[:n_val]]
    tr_nodes = nodes[perm[n_val:]]
    fit = train(mg, feats.values, node_y, tr_nodes, val_nodes, _train_config(args), seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(fit, out / "checkpoint.json")
    preds = predict(fit, mg, feats.values)
    train_mse = float(np.mean((preds[tr_nodes] - node_y[tr_nodes]) ** 2))
    _write_json(
        out / "train_report.json",
        {
            "n_contracts": len(nodes),
            "n_parameters": fit.n_parameters,
            "best_epoch": fit.best_epoch,
            "epochs_run": len(fit.history),
            "final_train_mse": train_mse,
            "with_topology": not args.no_topo,
            "config": fit.config.to_dict(),
        },
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    result = _load_records(args.input)
    config = _train_config(args)
    workers = args.workers if args.workers is not None else _default_workers()
    if args.protocol == "oos":
        report = run_oos_ablation(
            result.records,
            config,
            n_folds=args.folds,
            seed=args.seed,
            include_null=args.null,
            workers=workers,
        )
    else:
        report = run_oot(
            result.records,
            config,
            n_folds=args.folds,
            min_train_years=args.min_train_years,
            seed=args.seed,
            workers=workers,
        )
    out = Path(args.out)
    _write_json(out / "evaluation_report.json", report.to_json())
    failed_audits = [a for a in report.audits if not a.get("passed", True)]
    if failed_audits:
        print(f"leakage audit FAILED for {len(failed_audits)} fold/arm pairs", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_explain(args) -> int:
    result = _load_records(args.input)
    records = result.records
    graph, _, _ = build_graph(records)
    mg = ModelGraph.from_graph(graph)
    fit = load_checkpoint(args.checkpoint)
    topo = None
    if not args.no_topo:
        topo = centrality_table(graph, katz_beta=default_katz_beta(graph.homo_view()))
    enc = fit_encoding(records)
    feats = attach_features(graph, records, enc, topo=topo)
    node = graph.find_node(NodeKind.CONTRACT, args.contract)
    if node is None:
        raise DataError(f"contract {args.contract!r} not found")
    expl = explain_node(
        fit, mg, feats.values, node, steps=args.steps, seed=args.seed
    )
    doc = {
        "contract": args.contract,
        "full_prediction": expl.full_prediction,
        "masked_prediction": expl.masked_prediction,
        "fidelity": expl.fidelity,
        "sparsity": expl.sparsity,
        "top_features": rank_node_features(expl, feats.columns)[:15],
        "edge_importance_by_relation": rank_edge_importance_by_type(expl, mg),
        "top_entities": rank_entities(expl, mg, graph)[:15],
    }
    _write_json(Path(args.out) / "explanation.json", doc)
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def _add_train_opts(p: argparse.ArgumentParser):
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--bases", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument(
        "--activation", choices=["relu", "leaky_relu", "elu", "gelu"], default="elu"
    )
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--patience", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catnet", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic contract corpus")
    p.add_argument("--n", type=int, default=803)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse contracts and build the graph")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("topology", help="network-properties report")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("train", help="fit the relational GCN on all contracts")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--no-topo", action="store_true")
    _add_train_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated ablation study")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", choices=["oos", "oot"], default="oos")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--min-train-years", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--null", action="store_true", help="add a shuffled-target control arm")
    p.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallel fold workers (default: CATNET_WORKERS env or 1)",
    )
    _add_train_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="mask-based explanation for one contract")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--contract", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-topo", action="store_true")
    p.set_defaults(func=cmd_explain)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "command", None) == "evaluate" and args.folds is None:
        args.folds = 10 if args.protocol == "oos" else 6
    t0 = time.time()
    try:
        code = args.func(args)
    except (SchemaError, DataError, GraphError, ExperimentError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, ConvergenceError, ModelError, TrainError, ExplainError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if code == EXIT_OK and getattr(args, "out", None):
        inputs = {}
        for attr in ("input", "checkpoint"):
            value = getattr(args, attr, None)
            if value:
                inputs[attr] = _sha256_file(Path(value))
        _write_manifest(Path(args.out), args, t0, inputs)
    return code


if __name__ == "__main__":
    sys.exit(main())
