"""Graph-learning laboratory for catastrophe-bond spread prediction.

Builds a heterogeneous multi-relational graph from primary-market
contract records, characterizes its topology (degree distribution fits,
centralities, percolation threshold), trains a relational GCN regressor
on the spreads, and explains individual predictions with learned masks.
"""

__version__ = "0.1.0"

from .graph import HeteroGraph, NodeKind

__all__ = ["HeteroGraph", "NodeKind", "__version__"]
