"""Semantic label codes and the standard remapping tables.

The simulation emits three classes (ground / wood / leaf).  Externally
annotated clouds may use the five-class scheme; both collapse onto the
binary tree / non-tree scheme used for training.
"""

from __future__ import annotations

# Simulation classes.  Materials on mesh triangles reuse WOOD / LEAF.
GROUND = 0
WOOD = 1
LEAF = 2

# Five-class scheme of externally annotated clouds.
LOW_VEGETATION = 3
STEM = 4
WOODY_BRANCH = 5
LIVE_BRANCH = 6

# Binary training scheme.
NON_TREE = 0
TREE = 1

SEMANTIC_NAMES = {
    GROUND: "ground",
    WOOD: "wood",
    LEAF: "leaf",
    LOW_VEGETATION: "low_vegetation",
    STEM: "stem",
    WOODY_BRANCH: "woody_branch",
    LIVE_BRANCH: "live_branch",
}

SEMANTIC_CODES = {name: code for code, name in SEMANTIC_NAMES.items()}

MATERIAL_CODES = {"wood": WOOD, "leaf": LEAF}

# Default binary collapse for simulated clouds.
SIM_TO_BINARY = {GROUND: NON_TREE, WOOD: TREE, LEAF: TREE}

# Default binary collapse for five-class clouds (low vegetation counts as
# non-tree: instance labels attach to trees only).
FIVE_CLASS_TO_BINARY = {
    STEM: TREE,
    WOODY_BRANCH: TREE,
    LIVE_BRANCH: TREE,
    LOW_VEGETATION: NON_TREE,
    GROUND: NON_TREE,
}


def semantic_name(code: int) -> str:
    return SEMANTIC_NAMES.get(code, str(code))
