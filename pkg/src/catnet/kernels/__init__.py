"""Hot BFS kernels with a compiled core and a pure-Python fallback.

The compiled extension is preferred; set CATNET_PURE_PYTHON=1 to force the
fallback (the benchmark in benchmarks/bench_kernels.py compares the two).
"""

import os

if os.environ.get("CATNET_PURE_PYTHON"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _ckern as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        from . import _pure as _impl

        BACKEND = "pure"

closeness_paths = _impl.closeness_paths
betweenness = _impl.betweenness

__all__ = ["closeness_paths", "betweenness", "BACKEND"]
