"""Shortest-path summary statistics."""

from __future__ import annotations

from dataclasses import dataclass

from .. import kernels
from ..graph import HomoView


@dataclass
class PathStats:
    diameter: int
    avg_path: float  # mean over ordered reachable pairs
    connected: bool


def path_stats(view: HomoView) -> PathStats:
    _, diameter, avg, connected = kernels.closeness_paths(view.indptr, view.indices)
    return PathStats(diameter=diameter, avg_path=avg, connected=connected)
