"""Degree-growth fitness over cumulative yearly subgraphs.

The fitness score of a node is the slope of log degree against
log(years since first appearance + 1), a deterministic, rank-stable proxy
for its propensity to attract new links as the network grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import HeteroGraph, NodeKind, subgraph_by_years


@dataclass
class FitnessSeries:
    years: list[int]
    # per (kind, label): degree in each cumulative subgraph (0 if absent)
    degrees: dict[tuple[NodeKind, str], list[int]]
    first_year: dict[tuple[NodeKind, str], int]
    # None when the node is present in fewer than 3 years
    fitness: dict[tuple[NodeKind, str], float | None]

    def ranked(self, kind: NodeKind | None = None) -> list[tuple[str, float]]:
        items = [
            (key[1], score)
            for key, score in self.fitness.items()
            if score is not None and (kind is None or key[0] == kind)
        ]
        return sorted(items, key=lambda t: (-t[1], t[0]))


def fitness_series(g: HeteroGraph, issue_years: dict[int, int]) -> FitnessSeries:
    years = sorted(set(issue_years.values()))
    if len(years) < 2:
        raise ValueError("fitness needs at least 2 distinct issue years")
    degrees: dict[tuple[NodeKind, str], list[int]] = {}
    first_year: dict[tuple[NodeKind, str], int] = {}
    for yi, year in enumerate(years):
        sub = subgraph_by_years(g, year, issue_years)
        for u in range(sub.n_nodes):
            key = (sub.kind(u), sub.label(u))
            if key not in degrees:
                degrees[key] = [0] * len(years)
                first_year[key] = year
            degrees[key][yi] = sub.degree(u)
    fitness: dict[tuple[NodeKind, str], float | None] = {}
    for key, series in degrees.items():
        xs, ys = [], []
        for yi, year in enumerate(years):
            if series[yi] >= 1:
                xs.append(np.log(year - first_year[key] + 1))
                ys.append(np.log(series[yi]))
        if len(xs) < 3:
            fitness[key] = None
            continue
        xs_a = np.array(xs)
        ys_a = np.array(ys)
        if np.allclose(xs_a, xs_a[0]):
            fitness[key] = None
            continue
        slope = np.polyfit(xs_a, ys_a, 1)[0]
        fitness[key] = float(slope)
    return FitnessSeries(
        years=years, degrees=degrees, first_year=first_year, fitness=fitness
    )
