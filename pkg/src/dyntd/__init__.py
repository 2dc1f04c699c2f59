"""Dynamic tree-depth decompositions with constant-time MSO queries."""

from __future__ import annotations

from .dynamic import Counters, DynamicDecomposition, ExtractionRecord, build_catalog
from .errors import DyntdError
from .graph import DynamicGraph
from .minimal import (
    LabelCatalog,
    MinimalTreeCatalog,
    compute_limb_threshold,
    enumerate_minimal_trees,
    verify_limb_threshold,
)
from .mso import ConstantAssignment, build_gamma, build_tau, build_tau_prime, evaluate, parse, to_text
from .static import (
    LabelledTree,
    RootedForest,
    canonical_key,
    is_valid_decomposition,
    optimal_decomposition,
    tree_depth,
)

__all__ = [
    "ConstantAssignment", "Counters", "DynamicDecomposition", "DynamicGraph", "DyntdError",
    "ExtractionRecord", "LabelCatalog", "LabelledTree", "MinimalTreeCatalog", "RootedForest",
    "build_catalog", "build_gamma", "build_tau", "build_tau_prime", "canonical_key",
    "compute_limb_threshold", "enumerate_minimal_trees", "evaluate", "is_valid_decomposition",
    "optimal_decomposition", "parse", "to_text", "tree_depth", "verify_limb_threshold",
]
