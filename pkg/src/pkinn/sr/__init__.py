from .discover import DiscoveryResult, DiscoverySettings, discover
from .expression import X0, X1, X2, Expression, simplify, to_text
from .gp import GPConfig, GPResult, gp_regress, gp_search
from .sindy import CandidateLibrary, SparseModel, build_library, stlsq

__all__ = [
    "CandidateLibrary",
    "DiscoveryResult",
    "DiscoverySettings",
    "Expression",
    "GPConfig",
    "GPResult",
    "SparseModel",
    "X0",
    "X1",
    "X2",
    "build_library",
    "discover",
    "gp_regress",
    "gp_search",
    "simplify",
    "stlsq",
    "to_text",
]
