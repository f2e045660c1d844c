"""Evaluation protocols: random OOS folds, expanding-window OOT folds,
topology-feature ablation, and hyperparameter random search.

Leakage rules enforced everywhere: encoders and target scalers are fit on
training rows only; out-of-time topology is computed on the training-year
subgraph; an OOT test contract touching an entity unseen in training is
flagged and excluded rather than silently scored.  Every OOT fold records
content hashes of its training-only artifacts so an audit pass can refit
them from scratch and compare.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .graph import HeteroGraph, NodeKind, subgraph_by_years
from .ingest import (
    ContractRecord,
    DataError,
    EncodingConfig,
    attach_features,
    build_graph,
    fit_encoding,
    tabular_features,
)
from .rgcn import ModelGraph, TrainConfig, predict, r2_score, train
from .topology import centrality_table, default_katz_beta


class ExperimentError(Exception):
    pass


# -- splits ---------------------------------------------------------------


@dataclass
class Fold:
    index: int
    train: list[int]  # positions into the record list
    val: list[int]
    test: list[int]
    meta: dict = field(default_factory=dict)


def oos_splits(
    n_records: int,
    n_folds: int = 10,
    test_frac: float = 0.2,
    val_frac: float = 0.15,
    seed: int = 0,
) -> list[Fold]:
    """Repeated random splits: test_frac held out, val_frac of the rest."""
    if n_records < 5:
        raise ExperimentError("need at least 5 records to split")
    if not 0 < test_frac < 1 or not 0 <= val_frac < 1:
        raise ExperimentError("fractions must lie in (0, 1)")
    folds = []
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(n_folds)):
        rng = np.random.default_rng(child)
        perm = rng.permutation(n_records)
        n_test = max(1, int(round(test_frac * n_records)))
        test = sorted(perm[:n_test].tolist())
        rest = perm[n_test:]
        n_val = int(round(val_frac * len(rest)))
        val = sorted(rest[:n_val].tolist())
        tr = sorted(rest[n_val:].tolist())
        if not tr:
            raise ExperimentError("split left an empty training set")
        folds.append(Fold(index=k, train=tr, val=val, test=test))
    return folds


def oot_splits(
    records: list[ContractRecord],
    n_folds: int = 6,
    min_train_years: int = 5,
    val_frac: float = 0.15,
    seed: int = 0,
) -> list[Fold]:
    """Expanding-window temporal folds.

    The earliest ``min_train_years`` distinct years are always training;
    the remaining years are cut into ``n_folds`` contiguous test blocks.
    Fold k trains on everything strictly before its block.  Validation is
    a random fraction of the training rows (never from the test block).
    """
    years = sorted({r.issue_year for r in records})
    if len(years) < min_train_years + n_folds:
        raise ExperimentError(
            f"need at least {min_train_years + n_folds} distinct years, got {len(years)}"
        )
    test_years = years[min_train_years:]
    blocks = [list(b) for b in np.array_split(np.array(test_years), n_folds)]
    folds = []
    children = np.random.SeedSequence(seed).spawn(n_folds)
    for k, block in enumerate(blocks):
        block_set = set(int(y) for y in block)
        cutoff = min(block_set) - 1
        train_pos = [i for i, r in enumerate(records) if r.issue_year <= cutoff]
        test_pos = [i for i, r in enumerate(records) if r.issue_year in block_set]
        if not train_pos or not test_pos:
            raise ExperimentError(f"temporal fold {k} is degenerate")
        rng = np.random.default_rng(children[k])
        perm = rng.permutation(len(train_pos))
        n_val = int(round(val_frac * len(train_pos)))
        val = sorted(train_pos[i] for i in perm[:n_val])
        tr = sorted(train_pos[i] for i in perm[n_val:])
        folds.append(
            Fold(
                index=k,
                train=tr,
                val=val,
                test=sorted(test_pos),
                meta={"cutoff_year": cutoff, "test_years": sorted(block_set)},
            )
        )
    return folds


# -- linear baseline ------------------------------------------------------


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float = 1e-4) -> np.ndarray:
    """Closed-form ridge with unpenalized intercept; returns (F+1,) weights."""
    xa = np.hstack([x, np.ones((len(x), 1))])
    gram = xa.T @ xa
    reg = lam * np.eye(xa.shape[1])
    reg[-1, -1] = 0.0
    try:
        return linalg.solve(gram + reg, xa.T @ y, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise ExperimentError(
            f"ridge system singular ({exc}); use a regularization lam > 0"
        ) from exc


def ridge_predict(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((len(x), 1))]) @ weights


# -- hashing helpers for the leakage audit --------------------------------


def _sha(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _hash_encoding(config: EncodingConfig) -> str:
    doc = {
        "epoch_year": config.epoch_year,
        "vocab": config.vocab,
        "mean": config.scaler_mean,
        "std": config.scaler_std,
    }
    return _sha(json.dumps(doc, sort_keys=True).encode())


def _hash_array(a: np.ndarray) -> str:
    return _sha(np.ascontiguousarray(a, dtype="<f8").tobytes())


# -- single-fold evaluation ----------------------------------------------

ARMS = ("with_topo", "without_topo", "baseline_linear")


@dataclass
class FoldResult:
    fold: int
    arm: str
    r2: float
    mse: float
    n_train: int
    n_val: int
    n_test: int
    n_flagged: int = 0
    flagged_contracts: list[str] = field(default_factory=list)
    audit: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "arm": self.arm,
            "r2": self.r2,
            "mse": self.mse,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "n_flagged": self.n_flagged,
            "flagged_contracts": self.flagged_contracts,
            "audit": self.audit,
        }


def _positions_to_nodes(
    graph: HeteroGraph, records: list[ContractRecord], positions: list[int]
) -> np.ndarray:
    nodes = []
    for p in positions:
        node = graph.find_node(NodeKind.CONTRACT, records[p].contract_id)
        if node is None:
            raise ExperimentError(f"contract {records[p].contract_id!r} missing from graph")
        nodes.append(node)
    return np.array(nodes, dtype=np.int64)


def _eval_oos_fold(
    records: list[ContractRecord],
    graph: HeteroGraph,
    mg: ModelGraph,
    topo,
    fold: Fold,
    arm: str,
    config: TrainConfig,
    seed: int,
    permute_targets: bool,
) -> FoldResult:
    train_recs = [records[i] for i in fold.train]
    enc = fit_encoding(train_recs)
    y = np.array([r.spread_premium for r in records])
    if permute_targets:
        y = y[np.random.default_rng(seed + 9973).permutation(len(y))]
    test_pos = fold.test
    y_test = y[np.array(test_pos)]
    if arm == "baseline_linear":
        x_all, _ = tabular_features(records, enc)
        w = ridge_fit(x_all[fold.train], y[np.array(fold.train)])
        pred = ridge_predict(w, x_all[test_pos])
    else:
        feats = attach_features(
            graph, records, enc, topo=topo if arm == "with_topo" else None
        )
        node_y = np.zeros(graph.n_nodes)
        for i, rec in enumerate(records):
            node_y[graph.find_node(NodeKind.CONTRACT, rec.contract_id)] = y[i]
        tr_nodes = _positions_to_nodes(graph, records, fold.train)
        val_nodes = _positions_to_nodes(graph, records, fold.val)
        test_nodes = _positions_to_nodes(graph, records, test_pos)
        result = train(
            mg, feats.values, node_y, tr_nodes, val_nodes, config, seed=seed
        )
        pred = predict(result, mg, feats.values)[test_nodes]
    return FoldResult(
        fold=fold.index,
        arm=arm,
        r2=r2_score(y_test, pred),
        mse=float(np.mean((y_test - pred) ** 2)),
        n_train=len(fold.train),
        n_val=len(fold.val),
        n_test=len(test_pos),
    )


def _remap_embeddings(
    trained_embed: np.ndarray, train_mg: ModelGraph, eval_mg: ModelGraph
) -> tuple[np.ndarray, set[int]]:
    """Carry entity embeddings across graphs by (kind, label).

    Returns the remapped table and the set of eval entity node ids that
    have no trained counterpart (new entities).
    """
    lookup = {key: i for i, key in enumerate(train_mg.entity_keys)}
    out = np.zeros((len(eval_mg.entity_idx), trained_embed.shape[1]))
    unseen: set[int] = set()
    for row, key in enumerate(eval_mg.entity_keys):
        src = lookup.get(key)
        if src is None:
            unseen.add(int(eval_mg.entity_idx[row]))
        else:
            out[row] = trained_embed[src]
    return out, unseen


def _eval_oot_fold(
    records: list[ContractRecord],
    fold: Fold,
    arm: str,
    config: TrainConfig,
    seed: int,
) -> FoldResult:
    cutoff = fold.meta["cutoff_year"]
    train_recs = [records[i] for i in fold.train + fold.val]
    for p in fold.test:
        if records[p].issue_year <= cutoff:
            raise ExperimentError("temporal fold places a pre-cutoff contract in test")
    enc = fit_encoding([records[i] for i in fold.train])
    y = np.array([r.spread_premium for r in records])
    test_pos = list(fold.test)

    if arm == "baseline_linear":
        x_all, _ = tabular_features(records, enc)
        w = ridge_fit(x_all[fold.train], y[np.array(fold.train)])
        pred = ridge_predict(w, x_all[test_pos])
        return FoldResult(
            fold=fold.index,
            arm=arm,
            r2=r2_score(y[np.array(test_pos)], pred),
            mse=float(np.mean((y[np.array(test_pos)] - pred) ** 2)),
            n_train=len(fold.train),
            n_val=len(fold.val),
            n_test=len(test_pos),
            audit={"encoding_sha256": _hash_encoding(enc)},
        )

    # training world: contracts up to the cutoff only
    train_graph, train_years, _ = build_graph(train_recs)
    train_mg = ModelGraph.from_graph(train_graph)
    topo = None
    audit = {"encoding_sha256": _hash_encoding(enc), "cutoff_year": cutoff}
    if arm == "with_topo":
        beta = default_katz_beta(train_graph.homo_view())
        topo = centrality_table(train_graph, katz_beta=beta)
        audit["topo_sha256"] = _hash_array(topo.values)
        audit["train_graph_sha256"] = _sha(train_graph.to_json().encode())
    feats = attach_features(train_graph, train_recs, enc, topo=topo)
    node_y = np.zeros(train_graph.n_nodes)
    for rec in train_recs:
        node_y[train_graph.find_node(NodeKind.CONTRACT, rec.contract_id)] = (
            rec.spread_premium
        )
    tr_nodes = _positions_to_nodes(train_graph, records, fold.train)
    val_nodes = _positions_to_nodes(train_graph, records, fold.val)
    result = train(train_mg, feats.values, node_y, tr_nodes, val_nodes, config, seed=seed)

    # evaluation world: training contracts plus the test block
    eval_recs = train_recs + [records[i] for i in test_pos]
    eval_graph, _, _ = build_graph(eval_recs)
    eval_mg = ModelGraph.from_graph(eval_graph)
    embed, unseen = _remap_embeddings(result.params["embed"], train_mg, eval_mg)
    eval_params = dict(result.params)
    eval_params["embed"] = embed

    eval_topo = None
    if arm == "with_topo":
        # topology stays the trained-world view, mapped by identity
        lookup = {key: i for i, key in enumerate(train_mg.entity_keys)}
        vals = np.zeros((len(eval_mg.entity_idx), topo.values.shape[1]))
        ids = []
        for row, key in enumerate(eval_mg.entity_keys):
            src = lookup.get(key)
            if src is not None:
                vals[row] = topo.values[src]
            ids.append(int(eval_mg.entity_idx[row]))
        eval_topo = type(topo)(
            node_ids=np.array(ids, dtype=np.int64),
            kinds=[eval_graph.kind(i) for i in ids],
            labels=[eval_graph.label(i) for i in ids],
            values=vals,
        )
    eval_feats = attach_features(eval_graph, eval_recs, enc, topo=eval_topo)
    eval_result = type(result)(
        params=eval_params,
        config=result.config,
        target_mean=result.target_mean,
        target_std=result.target_std,
        best_epoch=result.best_epoch,
        history=[],
        n_parameters=result.n_parameters,
    )
    preds_all = predict(eval_result, eval_mg, eval_feats.values)

    flagged: list[str] = []
    kept_pos: list[int] = []
    kept_pred: list[float] = []
    for p in test_pos:
        rec = records[p]
        node = eval_graph.find_node(NodeKind.CONTRACT, rec.contract_id)
        nbrs: set[int] = set()
        for r in range(len(eval_graph.relations)):
            nbrs.update(eval_graph.neighbors(node, r))
        if nbrs & unseen:
            flagged.append(rec.contract_id)
            continue
        kept_pos.append(p)
        kept_pred.append(float(preds_all[node]))
    if len(kept_pos) < 2:
        raise ExperimentError(
            f"temporal fold {fold.index}: fewer than 2 scoreable test contracts "
            f"({len(flagged)} flagged for unseen entities)"
        )
    y_test = y[np.array(kept_pos)]
    pred = np.array(kept_pred)
    return FoldResult(
        fold=fold.index,
        arm=arm,
        r2=r2_score(y_test, pred),
        mse=float(np.mean((y_test - pred) ** 2)),
        n_train=len(fold.train),
        n_val=len(fold.val),
        n_test=len(kept_pos),
        n_flagged=len(flagged),
        flagged_contracts=sorted(flagged),
        audit=audit,
    )


def audit_oot_fold(records: list[ContractRecord], fold: Fold, result: FoldResult) -> dict:
    """Refit every training-only artifact from scratch and compare hashes."""
    enc = fit_encoding([records[i] for i in fold.train])
    checks = {"encoding": _hash_encoding(enc) == result.audit.get("encoding_sha256")}
    cutoff = fold.meta["cutoff_year"]
    checks["no_future_in_train"] = all(
        records[i].issue_year <= cutoff for i in fold.train + fold.val
    )
    checks["test_after_cutoff"] = all(
        records[i].issue_year > cutoff for i in fold.test
    )
    if "topo_sha256" in result.audit:
        train_recs = [records[i] for i in fold.train + fold.val]
        g, _, _ = build_graph(train_recs)
        beta = default_katz_beta(g.homo_view())
        topo = centrality_table(g, katz_beta=beta)
        checks["topology"] = _hash_array(topo.values) == result.audit["topo_sha256"]
        checks["train_graph"] = (
            _sha(g.to_json().encode()) == result.audit["train_graph_sha256"]
        )
    checks["passed"] = all(checks.values())
    return checks


# -- experiment drivers ---------------------------------------------------


@dataclass
class ExperimentReport:
    protocol: str  # "oos" or "oot"
    arms: dict[str, list[FoldResult]]
    config: dict
    audits: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for arm, results in self.arms.items():
            r2s = [r.r2 for r in results]
            out[arm] = {
                "mean_r2": float(np.mean(r2s)),
                "std_r2": float(np.std(r2s)),
                "mean_mse": float(np.mean([r.mse for r in results])),
                "n_folds": len(results),
                "n_flagged_total": int(sum(r.n_flagged for r in results)),
            }
        return out

    def to_json(self) -> str:
        doc = {
            "protocol": self.protocol,
            "config": self.config,
            "summary": self.summary(),
            "folds": {
                arm: [r.to_dict() for r in sorted(results, key=lambda r: r.fold)]
                for arm, results in sorted(self.arms.items())
            },
            "audits": self.audits,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _oos_task(args):
    return _eval_oos_fold(*args)


def _oot_task(args):
    return _eval_oot_fold(*args)


def _run_tasks(task_fn, payloads, workers: int):
    if workers <= 1:
        return [task_fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so the merge is deterministic
        return list(pool.map(task_fn, payloads))


def run_oos_ablation(
    records: list[ContractRecord],
    config: TrainConfig,
    n_folds: int = 10,
    test_frac: float = 0.2,
    val_frac: float = 0.15,
    seed: int = 0,
    arms: tuple = ARMS,
    include_null: bool = False,
    workers: int = 1,
) -> ExperimentReport:
    """Random-split ablation; the graph and topology are shared across
    folds (transductive protocol), encoders refit per fold."""
    graph, _, _ = build_graph(records)
    mg = ModelGraph.from_graph(graph)
    beta = default_katz_beta(graph.homo_view())
    topo = centrality_table(graph, katz_beta=beta)
    folds = oos_splits(len(records), n_folds, test_frac, val_frac, seed)
    payloads = []
    arm_list = list(arms) + (["null_control"] if include_null else [])
    for arm in arm_list:
        real_arm = "with_topo" if arm == "null_control" else arm
        for fold in folds:
            payloads.append(
                (
                    records,
                    graph,
                    mg,
                    topo,
                    fold,
                    real_arm,
                    config,
                    seed + fold.index,
                    arm == "null_control",
                )
            )
    results = _run_tasks(_oos_task, payloads, workers)
    grouped: dict[str, list[FoldResult]] = {a: [] for a in arm_list}
    for arm, res in zip(
        [a for a in arm_list for _ in folds], results
    ):
        grouped[arm].append(res)
    return ExperimentReport(
        protocol="oos",
        arms=grouped,
        config={
            "train": config.to_dict(),
            "n_folds": n_folds,
            "test_frac": test_frac,
            "val_frac": val_frac,
            "seed": seed,
            "include_null": include_null,
        },
    )


def run_oot(
    records: list[ContractRecord],
    config: TrainConfig,
    n_folds: int = 6,
    min_train_years: int = 5,
    val_frac: float = 0.15,
    seed: int = 0,
    arms: tuple = ARMS,
    workers: int = 1,
    audit: bool = True,
) -> ExperimentReport:
    folds = oot_splits(records, n_folds, min_train_years, val_frac, seed)
    payloads = []
    for arm in arms:
        for fold in folds:
            payloads.append((records, fold, arm, config, seed + fold.index))
    results = _run_tasks(_oot_task, payloads, workers)
    grouped: dict[str, list[FoldResult]] = {a: [] for a in arms}
    for arm, res in zip([a for a in arms for _ in folds], results):
        grouped[arm].append(res)
    audits = []
    if audit:
        for arm in arms:
            for fold, res in zip(folds, grouped[arm]):
                checks = audit_oot_fold(records, fold, res)
                checks["fold"] = fold.index
                checks["arm"] = arm
                audits.append(checks)
    return ExperimentReport(
        protocol="oot",
        arms=grouped,
        config={
            "train": config.to_dict(),
            "n_folds": n_folds,
            "min_train_years": min_train_years,
            "val_frac": val_frac,
            "seed": seed,
        },
        audits=audits,
    )


# -- hyperparameter search ------------------------------------------------

HIDDEN_CHOICES = (16, 32, 64, 128, 256)
OPTIMIZER_CHOICES = ("adam", "sgd")
ACTIVATION_CHOICES = ("relu", "leaky_relu", "elu", "gelu")


def sample_config(rng: np.random.Generator, epochs: int = 200, patience: int = 30) -> TrainConfig:
    """Draw from the published search space (log-uniform learning rate)."""
    return TrainConfig(
        hidden=int(rng.choice(HIDDEN_CHOICES)),
        n_layers=int(rng.integers(1, 6)),
        num_bases=int(rng.integers(2, 9)),
        lr=float(10 ** rng.uniform(-6, -2)),
        dropout=float(rng.uniform(0.0, 0.5)),
        optimizer=str(rng.choice(OPTIMIZER_CHOICES)),
        activation=str(rng.choice(ACTIVATION_CHOICES)),
        epochs=epochs,
        patience=patience,
    )


def random_search(
    records: list[ContractRecord],
    n_trials: int,
    seed: int = 0,
    epochs: int = 200,
    with_topo: bool = True,
) -> tuple[TrainConfig, list[dict]]:
    """Random search scored by validation MSE on a single fixed split."""
    if n_trials < 1:
        raise ExperimentError("n_trials must be >= 1")
    graph, _, _ = build_graph(records)
    mg = ModelGraph.from_graph(graph)
    topo = (
        centrality_table(graph, katz_beta=default_katz_beta(graph.homo_view()))
        if with_topo
        else None
    )
    fold = oos_splits(len(records), n_folds=1, seed=seed)[0]
    enc = fit_encoding([records[i] for i in fold.train])
    feats = attach_features(graph, records, enc, topo=topo)
    node_y = np.zeros(graph.n_nodes)
    for rec in records:
        node_y[graph.find_node(NodeKind.CONTRACT, rec.contract_id)] = rec.spread_premium
    tr_nodes = _positions_to_nodes(graph, records, fold.train)
    val_nodes = _positions_to_nodes(graph, records, fold.val)
    rng = np.random.default_rng(seed)
    trials = []
    best = None
    best_val = np.inf
    for t in range(n_trials):
        cfg = sample_config(rng, epochs=epochs)
        result = train(mg, feats.values, node_y, tr_nodes, val_nodes, cfg, seed=seed + t)
        val_mse = min(
            (v for _, _, v in result.history if v is not None), default=np.inf
        )
        trials.append({"trial": t, "config": cfg.to_dict(), "val_mse": float(val_mse)})
        if val_mse < best_val:
            best_val = val_mse
            best = cfg
    return best, trials
