"""Contract parsing, graph construction, feature encoding, synthetic data.

The CSV schema is the canonical exchange format: one row per contract,
';'-delimited list cells, "UNKNOWN" preserved as an ordinary category.
Graph construction connects every contract to its entities under
role-specific relations and additionally links the entities of the same
transaction pairwise under kind-pair relations.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import marginals
from .graph import KIND_ORDER, HeteroGraph, NodeKind
from .topology.centrality import CENTRALITY_COLUMNS, CentralityTable


class DataError(Exception):
    pass


class SchemaError(DataError):
    pass


@dataclass
class RowError:
    line: int
    message: str


CSV_COLUMNS = [
    "contract_id",
    "issue_year",
    "issue_month",
    "issue_amount_musd",
    "spread_premium",
    "expected_loss",
    "prob_first_loss",
    "prob_exhaust",
    "conditional_expected_loss",
    "sp_rating",
    "trigger_types",
    "risk_modeler",
    "perils",
    "countries",
    "states_provinces",
    "cedent",
    "underwriters",
    "exposure_term_months",
]

NUMERIC_COLUMNS = [
    "issue_amount_musd",
    "expected_loss",
    "prob_first_loss",
    "prob_exhaust",
    "conditional_expected_loss",
    "exposure_term_months",
]

LIST_COLUMNS = ["trigger_types", "perils", "countries", "states_provinces", "underwriters"]


@dataclass
class ContractRecord:
    contract_id: str
    issue_year: int
    issue_month: int
    issue_amount: float  # millions
    spread_premium: float  # prediction target
    expected_loss: float
    prob_first_loss: float
    prob_exhaust: float
    conditional_expected_loss: float
    sp_rating: str
    trigger_types: list[str]
    risk_modeler: str
    perils: list[str]
    countries: list[str]
    states_provinces: list[str]
    cedent: str
    underwriters: list[str]
    exposure_term: int  # months

    def __post_init__(self):
        if not 1 <= self.issue_month <= 12:
            raise DataError(
                f"{self.contract_id}: issue_month {self.issue_month} outside 1..12"
            )
        for name in (
            "spread_premium",
            "expected_loss",
            "prob_first_loss",
            "prob_exhaust",
            "conditional_expected_loss",
        ):
            if getattr(self, name) < 0:
                raise DataError(f"{self.contract_id}: {name} negative")


def _split_list(cell: str) -> list[str]:
    return [part.strip() for part in cell.split(";") if part.strip()]


@dataclass
class ParseResult:
    records: list[ContractRecord]
    errors: list[RowError]


def parse_csv(path) -> ParseResult:
    """Parse the canonical contract CSV.

    A missing column is a schema error; malformed rows are collected as
    RowError entries (with their line number) and parsing continues.
    """
    with open(path, newline="") as fh:
        return parse_csv_text(fh.read())


def parse_csv_text(text: str) -> ParseResult:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    records: list[ContractRecord] = []
    errors: list[RowError] = []
    for lineno, row in enumerate(reader, start=2):
        try:
            records.append(
                ContractRecord(
                    contract_id=row["contract_id"].strip(),
                    issue_year=int(row["issue_year"]),
                    issue_month=int(row["issue_month"]),
                    issue_amount=float(row["issue_amount_musd"]),
                    spread_premium=float(row["spread_premium"]),
                    expected_loss=float(row["expected_loss"]),
                    prob_first_loss=float(row["prob_first_loss"]),
                    prob_exhaust=float(row["prob_exhaust"]),
                    conditional_expected_loss=float(row["conditional_expected_loss"]),
                    sp_rating=row["sp_rating"].strip(),
                    trigger_types=_split_list(row["trigger_types"]),
                    risk_modeler=row["risk_modeler"].strip(),
                    perils=_split_list(row["perils"]),
                    countries=_split_list(row["countries"]),
                    states_provinces=_split_list(row["states_provinces"]),
                    cedent=row["cedent"].strip(),
                    underwriters=_split_list(row["underwriters"]),
                    exposure_term=int(row["exposure_term_months"]),
                )
            )
        except (ValueError, DataError) as exc:
            errors.append(RowError(line=lineno, message=str(exc)))
    return ParseResult(records=records, errors=errors)


def records_to_csv(records: list[ContractRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.contract_id,
                r.issue_year,
                r.issue_month,
                repr(r.issue_amount),
                repr(r.spread_premium),
                repr(r.expected_loss),
                repr(r.prob_first_loss),
                repr(r.prob_exhaust),
                repr(r.conditional_expected_loss),
                r.sp_rating,
                ";".join(r.trigger_types),
                r.risk_modeler,
                ";".join(r.perils),
                ";".join(r.countries),
                ";".join(r.states_provinces),
                r.cedent,
                ";".join(r.underwriters),
                r.exposure_term,
            ]
        )
    return out.getvalue()


# -- graph construction ---------------------------------------------------

ROLE_RELATIONS = [
    ("perils", NodeKind.PERIL, "contract-covers-peril"),
    ("countries", NodeKind.COUNTRY, "contract-in-country"),
    ("states_provinces", NodeKind.STATE_PROVINCE, "contract-in-state"),
    ("cedent", NodeKind.CEDENT, "contract-sponsored-by-cedent"),
    ("underwriters", NodeKind.UNDERWRITER, "contract-underwritten-by-underwriter"),
    ("risk_modeler", NodeKind.RISK_MODELER, "contract-modeled-by-riskmodeler"),
]

_KIND_TOKEN = {
    NodeKind.CEDENT: "cedent",
    NodeKind.UNDERWRITER: "underwriter",
    NodeKind.COUNTRY: "country",
    NodeKind.STATE_PROVINCE: "state",
    NodeKind.PERIL: "peril",
    NodeKind.RISK_MODELER: "modeler",
}


def pair_relation_label(kind_a: NodeKind, kind_b: NodeKind) -> str:
    a, b = sorted((kind_a, kind_b), key=lambda k: KIND_ORDER[k])
    return f"{_KIND_TOKEN[a]}-with-{_KIND_TOKEN[b]}"


def _all_relation_labels() -> list[str]:
    labels = [rel for _, _, rel in ROLE_RELATIONS]
    entity_kinds = list(_KIND_TOKEN)
    for i, a in enumerate(entity_kinds):
        for b in entity_kinds[i:]:
            labels.append(pair_relation_label(a, b))
    return labels


def build_graph(
    records: list[ContractRecord],
) -> tuple[HeteroGraph, dict[int, int], dict[int, float]]:
    """Construct the frozen multi-relational contract graph.

    Returns (graph, contract node -> issue year, contract node -> spread).
    The relation registry is pre-populated in a fixed order so relation ids
    do not depend on the record ordering.
    """
    g = HeteroGraph()
    for label in _all_relation_labels():
        g.add_relation(label)
    issue_years: dict[int, int] = {}
    targets: dict[int, float] = {}
    seen_ids: set[str] = set()
    for rec in records:
        key = rec.contract_id.strip().lower()
        if key in seen_ids:
            raise DataError(f"duplicate contract_id {rec.contract_id!r}")
        seen_ids.add(key)
        cnode = g.add_node(NodeKind.CONTRACT, rec.contract_id)
        issue_years[cnode] = rec.issue_year
        targets[cnode] = rec.spread_premium
        entities: list[tuple[NodeKind, int]] = []
        for fld, kind, rel in ROLE_RELATIONS:
            values = getattr(rec, fld)
            if isinstance(values, str):
                values = [values] if values else []
            rid = g.relation_id(rel)
            for label in values:
                enode = g.add_node(kind, label)
                g.add_edge(cnode, rid, enode)
                entities.append((kind, enode))
        for i, (ka, na) in enumerate(entities):
            for kb, nb in entities[i + 1 :]:
                if na == nb:
                    continue
                g.add_edge(na, g.relation_id(pair_relation_label(ka, kb)), nb)
    return g.freeze(), issue_years, targets


# -- feature encoding -----------------------------------------------------

CONTRACT_NUMERIC = [
    "issue_amount_musd",
    "expected_loss",
    "prob_first_loss",
    "prob_exhaust",
    "conditional_expected_loss",
    "exposure_term_months",
    "years_since_epoch",
]

_RECORD_NUMERIC_ATTR = {
    "issue_amount_musd": "issue_amount",
    "expected_loss": "expected_loss",
    "prob_first_loss": "prob_first_loss",
    "prob_exhaust": "prob_exhaust",
    "conditional_expected_loss": "conditional_expected_loss",
    "exposure_term_months": "exposure_term",
}

ONE_HOT_FIELDS = ["sp_rating", "trigger_types"]
ENTITY_FIELDS = [
    "perils",
    "countries",
    "states_provinces",
    "cedent",
    "underwriters",
    "risk_modeler",
]


@dataclass
class EncodingConfig:
    """Everything fitted on training rows: epoch, vocabularies, scaler.

    The scaler is never refit on test rows; categories unseen at fit time
    encode to all-zero one-hot blocks.
    """

    epoch_year: int
    vocab: dict[str, list[str]]
    scaler_mean: dict[str, float]
    scaler_std: dict[str, float]
    degenerate: list[str] = field(default_factory=list)


def _field_values(rec: ContractRecord, fld: str) -> list[str]:
    v = getattr(rec, fld)
    return v if isinstance(v, list) else ([v] if v else [])


def fit_encoding(train_records: list[ContractRecord]) -> EncodingConfig:
    if not train_records:
        raise DataError("cannot fit encoding on an empty training set")
    epoch = min(r.issue_year for r in train_records)
    vocab: dict[str, list[str]] = {}
    for fld in ONE_HOT_FIELDS + ENTITY_FIELDS:
        cats = set()
        for rec in train_records:
            cats.update(_field_values(rec, fld))
        vocab[fld] = sorted(cats)
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    degenerate: list[str] = []
    for col in CONTRACT_NUMERIC:
        vals = np.array(
            [_numeric_value(rec, col, epoch) for rec in train_records], dtype=float
        )
        mean[col] = float(vals.mean())
        s = float(vals.std())  # population std
        if s <= 0:
            degenerate.append(col)
            s = 1.0
        std[col] = s
    return EncodingConfig(
        epoch_year=epoch,
        vocab=vocab,
        scaler_mean=mean,
        scaler_std=std,
        degenerate=degenerate,
    )


def _numeric_value(rec: ContractRecord, col: str, epoch: int) -> float:
    if col == "years_since_epoch":
        return float(rec.issue_year - epoch)
    return float(getattr(rec, _RECORD_NUMERIC_ATTR[col]))


def encode_temporal(rec: ContractRecord, config: EncodingConfig):
    """(years since epoch, month sine, month cosine)."""
    if not 1 <= rec.issue_month <= 12:
        raise DataError(f"issue_month {rec.issue_month} outside 1..12")
    angle = 2.0 * math.pi * rec.issue_month / 12.0
    return (
        float(rec.issue_year - config.epoch_year),
        math.sin(angle),
        math.cos(angle),
    )


def one_hot_multi(records: list[ContractRecord], column: str):
    """One 0/1 column per distinct category; list rows set every member.

    Returns (column names, matrix).  Vocabulary is taken over the given
    records; for leakage-safe encoding fit on training rows, use
    ``EncodingConfig.vocab`` with ``_one_hot_block``.
    """
    cats = sorted({c for rec in records for c in _field_values(rec, column)})
    return (
        [f"{column}={c}" for c in cats],
        _one_hot_block(records, column, cats),
    )


def _one_hot_block(records, column: str, cats: list[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(cats)}
    out = np.zeros((len(records), len(cats)))
    for i, rec in enumerate(records):
        for c in _field_values(rec, column):
            j = index.get(c)
            if j is not None:
                out[i, j] = 1.0
    return out


def standardize(matrix: np.ndarray, columns: list[int], fit_rows: list[int]):
    """z = (x - mean)/std with statistics from fit_rows only.

    Degenerate (zero-variance) columns are centered, not scaled, and
    reported in the returned flag list.
    """
    if len(fit_rows) == 0:
        raise DataError("standardize requires nonempty fit_rows")
    out = matrix.astype(float).copy()
    flags: list[int] = []
    for col in columns:
        ref = out[fit_rows, col]
        mu = ref.mean()
        sd = ref.std()
        if sd <= 0:
            flags.append(col)
            out[:, col] = out[:, col] - mu
        else:
            out[:, col] = (out[:, col] - mu) / sd
    return out, flags


@dataclass
class FeatureMatrix:
    values: np.ndarray  # one row per node id
    columns: list[str]

    def column_index(self, name: str) -> int:
        return self.columns.index(name)


def feature_columns(config: EncodingConfig) -> list[str]:
    cols = list(CONTRACT_NUMERIC) + ["month_sin", "month_cos"]
    for fld in ONE_HOT_FIELDS:
        cols += [f"{fld}={c}" for c in config.vocab[fld]]
    cols += CENTRALITY_COLUMNS
    return cols


def attach_features(
    graph: HeteroGraph,
    records: list[ContractRecord],
    config: EncodingConfig,
    topo: CentralityTable | None = None,
) -> FeatureMatrix:
    """Node feature matrix: contract rows carry standardized metrics,
    temporal encodings and one-hot blocks; entity rows carry the six
    topological features (zeros when ``topo`` is None).  The two blocks
    never overlap.
    """
    cols = feature_columns(config)
    col_idx = {c: i for i, c in enumerate(cols)}
    x = np.zeros((graph.n_nodes, len(cols)))
    for rec in records:
        node = graph.find_node(NodeKind.CONTRACT, rec.contract_id)
        if node is None:
            raise DataError(f"contract {rec.contract_id!r} not in graph")
        for col in CONTRACT_NUMERIC:
            raw = _numeric_value(rec, col, config.epoch_year)
            x[node, col_idx[col]] = (raw - config.scaler_mean[col]) / config.scaler_std[
                col
            ]
        _, msin, mcos = encode_temporal(rec, config)
        x[node, col_idx["month_sin"]] = msin
        x[node, col_idx["month_cos"]] = mcos
        for fld in ONE_HOT_FIELDS:
            for c in _field_values(rec, fld):
                j = col_idx.get(f"{fld}={c}")
                if j is not None:
                    x[node, j] = 1.0
    if topo is not None and len(topo.node_ids):
        vals = topo.values.copy()
        mu = vals.mean(axis=0)
        sd = vals.std(axis=0)
        sd[sd <= 0] = 1.0
        vals = (vals - mu) / sd
        base = col_idx[CENTRALITY_COLUMNS[0]]
        for row, node in enumerate(topo.node_ids):
            if graph.kind(int(node)) == NodeKind.CONTRACT:
                continue  # topo features are never assigned to contracts
            x[int(node), base : base + len(CENTRALITY_COLUMNS)] = vals[row]
    return FeatureMatrix(values=x, columns=cols)


def tabular_features(
    records: list[ContractRecord], config: EncodingConfig
) -> tuple[np.ndarray, list[str]]:
    """Flat per-contract design matrix for the non-graph baseline.

    Standardized metrics + temporal encoding + one-hot blocks for every
    categorical field, entity-valued ones included.
    """
    cols: list[str] = list(CONTRACT_NUMERIC) + ["month_sin", "month_cos"]
    blocks = [
        np.column_stack(
            [
                [
                    (_numeric_value(r, col, config.epoch_year) - config.scaler_mean[col])
                    / config.scaler_std[col]
                    for r in records
                ]
                for col in CONTRACT_NUMERIC
            ]
        ),
        np.column_stack(
            [
                [encode_temporal(r, config)[1] for r in records],
                [encode_temporal(r, config)[2] for r in records],
            ]
        ),
    ]
    for fld in ONE_HOT_FIELDS + ENTITY_FIELDS:
        cats = config.vocab[fld]
        cols += [f"{fld}={c}" for c in cats]
        blocks.append(_one_hot_block(records, fld, cats))
    return np.hstack(blocks), cols


# -- synthetic corpus -----------------------------------------------------


def _lognormal_params(mean: float, std: float) -> tuple[float, float]:
    sigma2 = math.log(1.0 + (std / mean) ** 2)
    return math.log(mean) - sigma2 / 2.0, math.sqrt(sigma2)


def _weighted(table: dict[str, int]):
    labels = list(table)
    weights = np.array([table[k] for k in labels], dtype=float)
    return labels, weights / weights.sum()


def synth_dataset(
    n_contracts: int, seed: int, year_range: tuple[int, int] = (1999, 2021)
) -> tuple[list[ContractRecord], dict]:
    """Marginal-calibrated synthetic corpus with a planted pricing rule.

    Categorical fields follow the published marginal frequencies; numeric
    metrics are lognormal with matched mean/std.  The spread is a linear
    function of the loss metrics plus per-peril, per-cedent and seasonal
    effects plus noise, with every coefficient recorded in the manifest so
    the learnable signal is known by construction.
    """
    if n_contracts < 1:
        raise ValueError("n_contracts must be >= 1")
    rng = np.random.default_rng(seed)
    coeffs = {"expected_loss": 25.0, "prob_first_loss": 3.0, "conditional_expected_loss": 0.6}
    base = 0.045
    season_amp = 0.006
    noise_std = 0.003
    peril_labels, peril_p = _weighted(marginals.PERILS)
    eq_share = marginals.PERILS["earthquake"] / sum(marginals.PERILS.values())
    other_perils = {k: v for k, v in marginals.PERILS.items() if k != "earthquake"}
    other_labels, other_p = _weighted(other_perils)
    cedent_labels, cedent_p = _weighted(marginals.CEDENTS)
    peril_effects = {
        lab: float(e) for lab, e in zip(peril_labels, rng.normal(0.0, 0.010, len(peril_labels)))
    }
    cedent_effects = {
        lab: float(e) for lab, e in zip(cedent_labels, rng.normal(0.0, 0.008, len(cedent_labels)))
    }

    country_labels, country_p = _weighted(marginals.COUNTRIES)
    state_labels, state_p = _weighted(marginals.STATES_PROVINCES)
    uw_labels, uw_p = _weighted(marginals.UNDERWRITERS)
    modeler_labels, modeler_p = _weighted(marginals.RISK_MODELERS)
    rating_labels, rating_p = _weighted(marginals.SP_RATINGS)
    trigger_labels, trigger_p = _weighted(marginals.TRIGGER_TYPES)

    def pick_multi(labels, probs, count):
        count = min(count, len(labels))
        return list(rng.choice(labels, size=count, replace=False, p=probs))

    y0, y1 = year_range
    year_weights = np.linspace(1.0, 3.0, y1 - y0 + 1)
    year_weights /= year_weights.sum()

    records: list[ContractRecord] = []
    for i in range(n_contracts):
        n_perils = 1 if rng.random() >= 0.64 else 2 + int(min(rng.poisson(0.8), 3))
        # earthquake can occur at most once per contract, which would depress
        # its slot share below the marginal; include it explicitly instead
        perils = []
        if rng.random() < min(1.0, eq_share * n_perils):
            perils.append("earthquake")
        perils += pick_multi(other_labels, other_p, n_perils - len(perils))
        n_countries = 1 if rng.random() >= 0.34 else 2 + int(min(rng.poisson(0.5), 2))
        countries = pick_multi(country_labels, country_p, n_countries)
        states = pick_multi(state_labels, state_p, int(rng.integers(0, 3)))
        underwriters = pick_multi(uw_labels, uw_p, 1 + int(rng.random() < 0.4))
        cedent = str(rng.choice(cedent_labels, p=cedent_p))
        modeler = str(rng.choice(modeler_labels, p=modeler_p))
        rating = str(rng.choice(rating_labels, p=rating_p))
        triggers = pick_multi(trigger_labels, trigger_p, 1 + int(rng.random() < 0.1))
        year = int(rng.choice(np.arange(y0, y1 + 1), p=year_weights))
        month = int(rng.integers(1, 13))

        metrics = {}
        for colname in (
            "issue_amount_musd",
            "expected_loss",
            "prob_first_loss",
            "prob_exhaust",
            "conditional_expected_loss",
        ):
            mu, sig = _lognormal_params(*marginals.NUMERIC_SUMMARY[colname])
            metrics[colname] = float(rng.lognormal(mu, sig))

        spread = (
            base
            + coeffs["expected_loss"] * metrics["expected_loss"]
            + coeffs["prob_first_loss"] * metrics["prob_first_loss"]
            + coeffs["conditional_expected_loss"] * metrics["conditional_expected_loss"]
            + float(np.mean([peril_effects[p] for p in perils]))
            + cedent_effects[cedent]
            + season_amp * math.sin(2.0 * math.pi * month / 12.0)
            + float(rng.normal(0.0, noise_std))
        )
        spread = max(spread, 1e-4)

        records.append(
            ContractRecord(
                contract_id=f"CAT_CON{i + 1:04d}",
                issue_year=year,
                issue_month=month,
                issue_amount=metrics["issue_amount_musd"],
                spread_premium=spread,
                expected_loss=metrics["expected_loss"],
                prob_first_loss=metrics["prob_first_loss"],
                prob_exhaust=metrics["prob_exhaust"],
                conditional_expected_loss=metrics["conditional_expected_loss"],
                sp_rating=rating,
                trigger_types=triggers,
                risk_modeler=modeler,
                perils=perils,
                countries=countries,
                states_provinces=states,
                cedent=cedent,
                underwriters=underwriters,
                exposure_term=int(rng.integers(12, 61)),
            )
        )
    manifest = {
        "seed": seed,
        "n_contracts": n_contracts,
        "year_range": list(year_range),
        "planted": {
            "base": base,
            "coefficients": coeffs,
            "season_amplitude": season_amp,
            "noise_std": noise_std,
            "peril_effects": peril_effects,
            "cedent_effects": cedent_effects,
        },
        "marginals_source": "embedded descriptive-statistics tables",
    }
    return records, manifest
