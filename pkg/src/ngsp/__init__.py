"""Grammar-constrained MAP labelling of region-decomposed 3D shapes.

Proposals come from a per-region guide distribution (exact top-k
enumeration) and are re-ranked by a likelihood built from geometry, layout
and region-group scorers.
"""

from .errors import DataError, NGSPError, ScorerError
from .grammar import Grammar, load_grammar, parse_grammar
from .guide import GuideDistribution, ScoredProposal, brute_force_assignments, top_k_assignments
from .likelihood import LikelihoodConfig, Query, infer
from .shapes import LabelAssignment, Region, Shape, load_labels, load_shape

__version__ = "0.1.0"

__all__ = [
    "DataError", "NGSPError", "ScorerError",
    "Grammar", "load_grammar", "parse_grammar",
    "GuideDistribution", "ScoredProposal", "brute_force_assignments", "top_k_assignments",
    "LikelihoodConfig", "Query", "infer",
    "LabelAssignment", "Region", "Shape", "load_labels", "load_shape",
]
