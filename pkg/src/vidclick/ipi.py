"""Level-3 scoring: the information processing index (IPI).

Each behavioral category carries a signed integer weight applied when its
level is High; a Low level contributes the negated weight.  The sum over
the seven categories is the IPI: positive means high information
processing, negative low, zero neutral.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .actions import CATEGORY_ORDER, LEVEL_HIGH, LEVEL_LOW, BehavioralActionVector

_POSITIVE = ("Rewatch", "ClearConcept", "SlowWatching")
_NEGATIVE = ("Skipping", "FastWatching", "CheckbackReference")


@dataclass(frozen=True)
class IpiWeightTable:
    """Signed per-category weights (applied at level High).

    Invariants: PlayrateTransition is neutral (0), Skipping is -3, the
    approach-style categories (Rewatch, ClearConcept, SlowWatching) are
    positive and the avoidance-style ones (Skipping, FastWatching,
    CheckbackReference) negative.
    """

    weights: Mapping[str, int]

    def __post_init__(self) -> None:
        missing = set(CATEGORY_ORDER) - set(self.weights)
        if missing:
            raise ValueError(f"weight table missing categories: {sorted(missing)}")
        w = self.weights
        if w["PlayrateTransition"] != 0:
            raise ValueError("PlayrateTransition must be weighted 0 (neutral)")
        if w["Skipping"] != -3:
            raise ValueError("Skipping must be weighted -3 at level High")
        for cat in _POSITIVE:
            if w[cat] <= 0:
                raise ValueError(f"{cat} must carry a positive weight")
        for cat in _NEGATIVE:
            if w[cat] >= 0:
                raise ValueError(f"{cat} must carry a negative weight")

    @property
    def max_abs_ipi(self) -> int:
        return sum(abs(v) for v in self.weights.values())


#: Reconstructed default: magnitudes grade the processing hierarchy from
#: ClearConcept (strongest approach) down to Skipping (strongest avoidance).
DEFAULT_IPI_WEIGHTS = IpiWeightTable(
    {
        "ClearConcept": 3,
        "Rewatch": 2,
        "SlowWatching": 1,
        "PlayrateTransition": 0,
        "FastWatching": -1,
        "CheckbackReference": -2,
        "Skipping": -3,
    }
)


def weight_assign(category: str, level: str, table: IpiWeightTable | None = None) -> int:
    """Signed contribution of one category at a High or Low level."""
    table = table or DEFAULT_IPI_WEIGHTS
    if category not in table.weights:
        raise ValueError(f"unknown behavioral category {category!r}")
    if level == LEVEL_HIGH:
        return table.weights[category]
    if level == LEVEL_LOW:
        return -table.weights[category]
    raise ValueError(f"level must be {LEVEL_HIGH!r} or {LEVEL_LOW!r}, got {level!r}")


def compute_ipi(
    v: BehavioralActionVector | Mapping[str, str], table: IpiWeightTable | None = None
) -> int:
    """Sum the per-category signed contributions for one action vector."""
    table = table or DEFAULT_IPI_WEIGHTS
    levels = v.levels if isinstance(v, BehavioralActionVector) else v
    missing = set(CATEGORY_ORDER) - set(levels)
    if missing:
        raise ValueError(f"action vector missing categories: {sorted(missing)}")
    return sum(weight_assign(cat, levels[cat], table) for cat in CATEGORY_ORDER)
