"""Static detection of synthetic ad-click construction in a mini bytecode IR.

Pipeline: gate (permissions / ad libraries / ad views) -> dataflow (CFGs,
def-use chains) -> slicer (click sites, dependency graphs) -> features
(seven structural counts, entropy-weighted) -> detector (one-class VAE,
reconstruction-error threshold).
"""

__version__ = "0.1.0"

from .ir import ApiCatalog, ApiKind, Package, ParseError, default_catalog, parse_package
from .dataflow import build_icfg, compute_chains, solver_backend

__all__ = [
    "ApiCatalog",
    "ApiKind",
    "Package",
    "ParseError",
    "default_catalog",
    "parse_package",
    "build_icfg",
    "compute_chains",
    "solver_backend",
    "__version__",
]
