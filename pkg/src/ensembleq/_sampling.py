"""Kernel selection: compiled ``_walk`` when importable, numpy ``_walk_py`` otherwise.

``ENSEMBLEQ_PURE_PYTHON=1`` forces the fallback.
"""

import os

from ensembleq import _walk_py

walk_trees_py = _walk_py.walk_trees

try:
    if os.environ.get("ENSEMBLEQ_PURE_PYTHON"):
        raise ImportError("fallback forced by ENSEMBLEQ_PURE_PYTHON")
    from ensembleq._walk import walk_trees as walk_trees_compiled
except ImportError:
    walk_trees_compiled = None

walk_trees = walk_trees_compiled or walk_trees_py
BACKEND = "cython" if walk_trees_compiled is not None else "numpy"
