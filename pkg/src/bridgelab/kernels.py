"""Selects the compiled kernels when available, else the numpy fallback.

Set ``BRIDGELAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("BRIDGELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

pairwise_distance_sum = backend.pairwise_distance_sum
pairwise_distance_sum_self = backend.pairwise_distance_sum_self
straightness = backend.straightness
