"""Network-science computations on the frozen contract graph."""

from .assortativity import AssortativityResult, assortativity
from .centrality import (
    CENTRALITY_COLUMNS,
    CentralityTable,
    ConvergenceError,
    betweenness_centrality,
    centrality_table,
    closeness_centrality,
    clustering_local,
    default_katz_beta,
    degree_centrality,
    eigenvector_centrality,
    global_clustering,
    katz_index,
    katz_matrix,
    spectral_radius,
)
from .degrees import (
    DegreeStats,
    ThresholdResult,
    critical_threshold,
    degree_stats,
    molloy_reed_threshold,
)
from .fitness import FitnessSeries, fitness_series
from .paths import PathStats, path_stats
from .powerlaw import (
    FitError,
    PowerLawFit,
    bootstrap_pvalue,
    fit_adjusted_powerlaw,
    log_likelihood,
    model_pmf,
    sample_from_fit,
)
from .report import TopologyReport, topology_report
