"""Assembled network-properties report (the per-graph summary table)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import HeteroGraph
from .assortativity import AssortativityResult, assortativity
from .centrality import (
    CentralityTable,
    centrality_table,
    clustering_local,
    default_katz_beta,
    global_clustering,
)
from .degrees import DegreeStats, ThresholdResult, critical_threshold, degree_stats
from .fitness import FitnessSeries, fitness_series
from .paths import PathStats, path_stats
from .powerlaw import FitError, PowerLawFit, bootstrap_pvalue, fit_adjusted_powerlaw


@dataclass
class TopologyReport:
    degree_stats: DegreeStats
    power_law: PowerLawFit | None
    power_law_error: str | None
    centralities: CentralityTable
    assortativity: AssortativityResult
    threshold: ThresholdResult
    paths: PathStats
    avg_clustering: float
    global_clustering: float
    katz_beta: float
    fitness: FitnessSeries | None

    def to_dict(self) -> dict:
        knn = [[k, v] for k, v in self.assortativity.knn_curve]
        doc = {
            "degree_stats": self.degree_stats.to_dict(),
            "power_law": self.power_law.to_dict() if self.power_law else None,
            "power_law_error": self.power_law_error,
            "assortativity": {
                "pearson_r": self.assortativity.pearson_r,
                "degenerate": self.assortativity.degenerate,
                "knn_curve": knn,
            },
            "critical_threshold": {
                "f_c": self.threshold.f_c,
                "moment_ratio": self.threshold.moment_ratio,
                "giant_component_regime": self.threshold.giant_component_regime,
            },
            "paths": {
                "diameter": self.paths.diameter,
                "avg_path": self.paths.avg_path,
                "connected": self.paths.connected,
            },
            "avg_clustering": self.avg_clustering,
            "global_clustering": self.global_clustering,
            "katz_beta": self.katz_beta,
        }
        if self.fitness is not None:
            doc["fitness_top"] = [
                [label, score] for label, score in self.fitness.ranked()[:10]
            ]
        return doc


def topology_report(
    g: HeteroGraph,
    issue_years: dict[int, int] | None = None,
    n_bootstrap: int = 0,
    seed: int = 0,
    katz_beta: float | None = None,
) -> TopologyReport:
    view = g.homo_view()
    stats = degree_stats(view)
    fit: PowerLawFit | None = None
    fit_err: str | None = None
    try:
        fit = fit_adjusted_powerlaw(view.degrees)
        if n_bootstrap > 0:
            fit.bootstrap_p = bootstrap_pvalue(fit, view.degrees, n_bootstrap, seed)
            fit.n_bootstrap = n_bootstrap
    except FitError as exc:
        fit_err = str(exc)
    beta = katz_beta if katz_beta is not None else default_katz_beta(view)
    table = centrality_table(g, katz_beta=beta)
    fitness = None
    if issue_years and len(set(issue_years.values())) >= 2:
        fitness = fitness_series(g, issue_years)
    return TopologyReport(
        degree_stats=stats,
        power_law=fit,
        power_law_error=fit_err,
        centralities=table,
        assortativity=assortativity(view),
        threshold=critical_threshold(stats),
        paths=path_stats(view),
        avg_clustering=float(np.mean(clustering_local(view))),
        global_clustering=global_clustering(view),
        katz_beta=beta,
        fitness=fitness,
    )
