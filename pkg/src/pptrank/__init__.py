"""Numerical search and classification of PPT states of prescribed ranks."""
from .hilbert import BipartiteDims, build_basis, from_coords, partial_transpose, to_coords
from .search import RankTarget, SearchConfig
from .state import PptState, load_state, save_state

__all__ = [
    "BipartiteDims", "PptState", "RankTarget", "SearchConfig", "build_basis",
    "from_coords", "load_state", "partial_transpose", "save_state", "to_coords",
]
