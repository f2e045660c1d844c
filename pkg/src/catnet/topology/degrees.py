"""Degree statistics and the Molloy-Reed random-removal threshold."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graph import HomoView


@dataclass
class DegreeStats:
    histogram: dict[int, int]
    pmf: dict[int, float]
    avg_degree: float  # 2L/N
    second_moment: float  # (1/N) sum k_i^2
    k_min: int
    k_max: int
    n_nodes: int
    n_edges: int
    degrees: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "avg_degree": self.avg_degree,
            "second_moment": self.second_moment,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
        }


def degree_stats(view: HomoView) -> DegreeStats:
    if view.n_nodes < 1:
        raise ValueError("degree_stats requires at least one node")
    deg = view.degrees
    values, counts = np.unique(deg, return_counts=True)
    n = view.n_nodes
    histogram = {int(k): int(c) for k, c in zip(values, counts)}
    pmf = {int(k): int(c) / n for k, c in zip(values, counts)}
    return DegreeStats(
        histogram=histogram,
        pmf=pmf,
        avg_degree=2.0 * view.n_edges / n,
        second_moment=float((deg.astype(float) ** 2).mean()),
        k_min=int(deg.min()),
        k_max=int(deg.max()),
        n_nodes=n,
        n_edges=view.n_edges,
        degrees=deg.copy(),
    )


@dataclass
class ThresholdResult:
    """Random-removal critical fraction under the Molloy-Reed criterion.

    ``f_c`` is None when the moment ratio <k^2>/<k> does not exceed 2, i.e.
    there is no giant-component transition in the Molloy-Reed regime.
    """

    f_c: float | None
    moment_ratio: float
    giant_component_regime: bool


def molloy_reed_threshold(avg_degree: float, second_moment: float) -> ThresholdResult:
    """f_c = 1 - 1/(<k^2>/<k> - 1), defined only for moment ratio > 2."""
    if avg_degree <= 0:
        return ThresholdResult(None, 0.0, False)
    ratio = second_moment / avg_degree
    if ratio <= 2.0:
        return ThresholdResult(None, ratio, False)
    return ThresholdResult(1.0 - 1.0 / (ratio - 1.0), ratio, True)


def critical_threshold(stats: DegreeStats) -> ThresholdResult:
    return molloy_reed_threshold(stats.avg_degree, stats.second_moment)
