"""Agent client library and reference teams."""

from .behaviors import BEHAVIORS, make_team
from .localmap import Cell, LocalMap, MergeConflict, merge_maps

__all__ = ["BEHAVIORS", "make_team", "Cell", "LocalMap", "MergeConflict", "merge_maps"]
