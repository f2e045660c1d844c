"""Relational graph convolution with basis-decomposed weights.

Everything is plain numpy with hand-written backprop: layer update

    h_u' = act( sum_r sum_{v in N_r(u)} (1/|N_r(u)|) W_r h_v + W0 h_u )

with W_r = sum_b a_rb B_b shared through a small basis.  A linear head on
the final representation produces one score per node; the loss only reads
the contract rows.  The forward pass optionally applies a per-feature
mask and per-edge weights so the same code path serves the explainer, and
it can return a cache that ``backward`` consumes to produce exact
gradients (checked against finite differences in the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import erf

from ..graph import HeteroGraph, NodeKind

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _relu(x):
    return np.maximum(x, 0.0)


def _drelu(x):
    return (x > 0.0).astype(float)


def _leaky(x, slope=0.01):
    return np.where(x > 0.0, x, slope * x)


def _dleaky(x, slope=0.01):
    return np.where(x > 0.0, 1.0, slope)


def _elu(x):
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _delu(x):
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _dgelu(x):
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * phi


ACTIVATIONS = {
    "relu": (_relu, _drelu),
    "leaky_relu": (_leaky, _dleaky),
    "elu": (_elu, _delu),
    "gelu": (_gelu, _dgelu),
}


class ModelError(Exception):
    pass


@dataclass
class ModelGraph:
    """Frozen graph repackaged as per-relation normalized CSR operators.

    For relation r, ``M_r[u, v] = 1/|N_r(u)|`` over directed copies of the
    undirected edges, so ``M_r @ H`` is the mean of neighbor features.
    ``eids[r]`` maps each stored directed entry back to its undirected
    edge id, letting the explainer reweight both copies of an edge with a
    single mask entry.
    """

    n_nodes: int
    relations: list[str]
    indptr: list[np.ndarray]
    indices: list[np.ndarray]
    coef: list[np.ndarray]
    eids: list[np.ndarray]
    n_undirected: int
    edge_list: list[tuple[int, int, int]]  # per undirected edge id: (u, r, v)
    contract_idx: np.ndarray
    entity_idx: np.ndarray
    entity_row: dict[int, int]  # node id -> row in the embedding table
    entity_keys: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_graph(cls, g: HeteroGraph) -> "ModelGraph":
        if not g.frozen:
            raise ModelError("ModelGraph requires a frozen graph")
        n = g.n_nodes
        relations = g.relations
        edge_list: list[tuple[int, int, int]] = []
        indptr, indices, coef, eids = [], [], [], []
        for r in range(len(relations)):
            directed: list[tuple[int, int, int]] = []  # (dst, src, undirected id)
            for u in range(n):
                for v in g.neighbors(u, r):
                    if u < v:
                        eid = len(edge_list)
                        edge_list.append((u, r, v))
                        directed.append((u, v, eid))
                        directed.append((v, u, eid))
            directed.sort()
            deg = np.zeros(n, dtype=np.int64)
            for dst, _, _ in directed:
                deg[dst] += 1
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(deg, out=ptr[1:])
            idx = np.array([src for _, src, _ in directed], dtype=np.int64)
            eid_arr = np.array([e for _, _, e in directed], dtype=np.int64)
            c = np.empty(len(directed))
            for pos, (dst, _, _) in enumerate(directed):
                c[pos] = 1.0 / deg[dst]
            indptr.append(ptr)
            indices.append(idx)
            coef.append(c)
            eids.append(eid_arr)
        contract_idx = np.array(g.nodes_of_kind(NodeKind.CONTRACT), dtype=np.int64)
        contract_set = set(contract_idx.tolist())
        entity_idx = np.array(
            [u for u in range(n) if u not in contract_set], dtype=np.int64
        )
        entity_row = {int(u): i for i, u in enumerate(entity_idx)}
        entity_keys = [
            (g.kind(int(u)).value, g.label(int(u)).strip().lower()) for u in entity_idx
        ]
        return cls(
            n_nodes=n,
            relations=list(relations),
            indptr=indptr,
            indices=indices,
            coef=coef,
            eids=eids,
            n_undirected=len(edge_list),
            edge_list=edge_list,
            contract_idx=contract_idx,
            entity_idx=entity_idx,
            entity_row=entity_row,
            entity_keys=entity_keys,
        )

    def operator(self, r: int, edge_weights: np.ndarray | None = None):
        data = self.coef[r]
        if edge_weights is not None:
            data = data * edge_weights[self.eids[r]]
        return sparse.csr_matrix(
            (data, self.indices[r], self.indptr[r]), shape=(self.n_nodes, self.n_nodes)
        )


def init_params(
    mg: ModelGraph,
    n_features: int,
    hidden: int,
    n_layers: int,
    num_bases: int,
    rng: np.random.Generator,
) -> dict:
    """Uniform(+-1/sqrt(fan_in)) weights; zero head bias; small embeddings."""
    if n_layers < 1:
        raise ModelError("need at least one layer")
    if num_bases < 1:
        raise ModelError("need at least one basis matrix")
    dims = [n_features] + [hidden] * n_layers
    layers = []
    n_rel = len(mg.relations)
    for l in range(n_layers):
        d_in, d_out = dims[l], dims[l + 1]
        bound = 1.0 / math.sqrt(d_in)
        layers.append(
            {
                "bases": rng.uniform(-bound, bound, (num_bases, d_in, d_out)),
                "coeffs": rng.uniform(
                    -1.0 / math.sqrt(num_bases), 1.0 / math.sqrt(num_bases), (n_rel, num_bases)
                ),
                "self": rng.uniform(-bound, bound, (d_in, d_out)),
            }
        )
    bound = 1.0 / math.sqrt(hidden)
    return {
        "layers": layers,
        "head_w": rng.uniform(-bound, bound, hidden),
        "head_b": np.zeros(1),
        "embed": rng.uniform(-0.05, 0.05, (len(mg.entity_idx), n_features)),
    }


def n_parameters(params: dict) -> int:
    return sum(a.size for a, _ in _walk(params))


def _walk(params: dict):
    """Deterministic (array, path) iteration over the parameter tree."""
    for l, layer in enumerate(params["layers"]):
        for key in ("bases", "coeffs", "self"):
            yield layer[key], ("layers", l, key)
    yield params["head_w"], ("head_w",)
    yield params["head_b"], ("head_b",)
    yield params["embed"], ("embed",)


def flatten_params(params: dict) -> np.ndarray:
    return np.concatenate([a.ravel() for a, _ in _walk(params)])


def unflatten_params(vec: np.ndarray, template: dict) -> dict:
    if vec.size != n_parameters(template):
        raise ModelError("parameter vector length mismatch")
    out = {"layers": [], "head_w": None, "head_b": None, "embed": None}
    pos = 0
    for a, path in _walk(template):
        chunk = vec[pos : pos + a.size].reshape(a.shape).copy()
        pos += a.size
        if path[0] == "layers":
            _, l, key = path
            while len(out["layers"]) <= l:
                out["layers"].append({})
            out["layers"][l][key] = chunk
        else:
            out[path[0]] = chunk
    if pos != vec.size:
        raise ModelError("parameter vector length mismatch")
    return out


def zeros_like_params(params: dict) -> dict:
    return unflatten_params(np.zeros(n_parameters(params)), params)


def forward(
    params: dict,
    mg: ModelGraph,
    x: np.ndarray,
    activation: str = "elu",
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
    edge_weights: np.ndarray | None = None,
    feature_mask: np.ndarray | None = None,
    want_cache: bool = False,
):
    """Node scores (n,) and, when requested, the backprop cache."""
    if activation not in ACTIVATIONS:
        raise ModelError(f"unknown activation {activation!r}")
    act, _ = ACTIVATIONS[activation]
    if train and dropout > 0.0 and rng is None:
        raise ModelError("training with dropout requires an rng")
    h = x.astype(float).copy()
    if feature_mask is not None:
        h = h * feature_mask[None, :]
    if len(mg.entity_idx):
        h[mg.entity_idx] += params["embed"]
    ops = [mg.operator(r, edge_weights) for r in range(len(mg.relations))]
    layer_caches = []
    n_layers = len(params["layers"])
    for l, layer in enumerate(params["layers"]):
        w_r = np.einsum("rb,bio->rio", layer["coeffs"], layer["bases"])
        aggs = [op @ h for op in ops]
        pre = h @ layer["self"]
        for r, agg in enumerate(aggs):
            pre += agg @ w_r[r]
        out = act(pre)
        mask = None
        if train and dropout > 0.0 and l < n_layers - 1:
            mask = (rng.random(out.shape) >= dropout) / (1.0 - dropout)
            out = out * mask
        layer_caches.append(
            {"h_in": h, "aggs": aggs, "pre": pre, "w_r": w_r, "drop": mask}
        )
        h = out
    scores = h @ params["head_w"] + params["head_b"][0]
    if not want_cache:
        return scores
    cache = {
        "layers": layer_caches,
        "h_out": h,
        "ops": ops,
        "activation": activation,
        "x": x,
        "feature_mask": feature_mask,
        "edge_weights": edge_weights,
    }
    return scores, cache


def backward(
    params: dict,
    mg: ModelGraph,
    cache: dict,
    dscores: np.ndarray,
    want_dx: bool = False,
    want_edge_grads: bool = False,
    want_feature_mask_grads: bool = False,
):
    """Gradients of a scalar loss given d(loss)/d(scores).

    Returns (param grads, extras); extras holds dx / per-undirected-edge
    grads / feature-mask grads when requested.
    """
    _, dact = ACTIVATIONS[cache["activation"]]
    grads = {"layers": [], "head_w": None, "head_b": None, "embed": None}
    h_out = cache["h_out"]
    grads["head_w"] = h_out.T @ dscores
    grads["head_b"] = np.array([dscores.sum()])
    dh = np.outer(dscores, params["head_w"])
    edge_grads = (
        np.zeros(mg.n_undirected) if want_edge_grads else None
    )
    for l in range(len(params["layers"]) - 1, -1, -1):
        layer = params["layers"][l]
        lc = cache["layers"][l]
        if lc["drop"] is not None:
            dh = dh * lc["drop"]
        dpre = dh * dact(lc["pre"])
        n_rel = len(mg.relations)
        dw_all = np.empty_like(lc["w_r"])
        dh_prev = dpre @ layer["self"].T
        dself = lc["h_in"].T @ dpre
        for r in range(n_rel):
            dw_all[r] = lc["aggs"][r].T @ dpre
            dagg = dpre @ lc["w_r"][r].T
            dh_prev += cache["ops"][r].T @ dagg
            if want_edge_grads:
                # d/dw_e of (M_r @ H) contributes coef * <dagg[dst], h_in[src]>
                # for every directed copy of edge e
                contrib = np.einsum(
                    "kf,kf->k",
                    dagg[_row_of(mg.indptr[r])],
                    lc["h_in"][mg.indices[r]] * mg.coef[r][:, None],
                )
                np.add.at(edge_grads, mg.eids[r], contrib)
        grads["layers"].insert(
            0,
            {
                "bases": np.einsum("rb,rio->bio", layer["coeffs"], dw_all),
                "coeffs": np.einsum("rio,bio->rb", dw_all, layer["bases"]),
                "self": dself,
            },
        )
        dh = dh_prev
    # dh is now the gradient w.r.t. the (masked, embedding-augmented) input
    grads["embed"] = dh[mg.entity_idx] if len(mg.entity_idx) else np.zeros((0, cache["x"].shape[1]))
    extras = {}
    if want_dx:
        dx = dh.copy()
        if cache["feature_mask"] is not None:
            dx = dx * cache["feature_mask"][None, :]
        extras["dx"] = dx
    if want_feature_mask_grads:
        extras["dfeature_mask"] = np.einsum("nf,nf->f", dh, cache["x"])
    if want_edge_grads:
        extras["dedge"] = edge_grads
    return grads, extras


def _row_of(indptr: np.ndarray) -> np.ndarray:
    """Expand a CSR indptr into the row index of every stored entry."""
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def mse_loss(scores: np.ndarray, y: np.ndarray, idx: np.ndarray):
    """Mean squared error over the given rows and d(loss)/d(scores)."""
    if len(idx) == 0:
        raise ModelError("loss over an empty index set")
    resid = scores[idx] - y
    loss = float(np.mean(resid**2))
    dscores = np.zeros_like(scores)
    dscores[idx] = 2.0 * resid / len(idx)
    return loss, dscores


def accumulate(grads: dict, into: dict) -> None:
    for (a, path), (b, _) in zip(_walk(grads), _walk(into)):
        b += a
