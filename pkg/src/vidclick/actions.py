"""Level-2 summarization: behavioral categories, weights, dichotomization.

Seven behavioral categories, each a list of 4-token click groups mined from
frequent n-grams, are scored against full sequences with fuzzy pattern
weights and then dichotomized High/Low at the corpus median per category.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .strdist import fuzzy_pattern_weights
from .tokens import OP_INDEX, tokenize_compact

LEVEL_HIGH = "High"
LEVEL_LOW = "Low"

CATEGORY_ORDER = (
    "Rewatch",
    "Skipping",
    "FastWatching",
    "SlowWatching",
    "ClearConcept",
    "CheckbackReference",
    "PlayrateTransition",
)

_DEFAULT_GROUPS = {
    "Rewatch": ("PlPaSbPl", "PlSbPaPl", "PaSbPlSb", "SbSbPaPl", "SbPaPlPa", "PaPlSbPa"),
    "Skipping": (
        "SfSfSfSf",
        "PaPlSfSf",
        "PlSfSfSf",
        "SfSfSfPa",
        "SfSfPaPl",
        "SfSfSfSSf",
        "SfSfSSfSf",
        "SfPaPlPa",
        "PlPaPlSf",
    ),
    "FastWatching": ("PaPlRfRf", "RfPaPlPa", "RfRfPaPl", "RsPaPlRf", "PlPaPlRf"),
    "SlowWatching": ("RsRsPaPl", "RsPaPlPa", "PaPlRsRs", "PlPaPlRs", "PaPlRsPa", "PlRsPaPl"),
    "ClearConcept": ("PaSbPlSSb", "SSbSbPaPl", "PaPlSSbSb", "PlSSbSbPa"),
    "CheckbackReference": (
        "SbSbSbSb",
        "PlSbSbSb",
        "SbSbSbPa",
        "SbSbSbSf",
        "SfSbSbSb",
        "SbPlSbSb",
        "SSbSbSbSb",
    ),
    "PlayrateTransition": ("RfRfRsRs", "RfRfRfRs", "RfRsRsRs", "RsRsRsRf", "RsRsRfRf", "RfRfRfRf"),
}


@dataclass(frozen=True)
class BehavioralCatalog:
    """Category name -> list of 4-token click groups."""

    categories: Mapping[str, tuple[tuple[str, ...], ...]]

    def __post_init__(self) -> None:
        for name, groups in self.categories.items():
            for g in groups:
                if len(g) != 4:
                    raise ValueError(f"click group {g} in {name!r} is not 4 tokens long")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.categories)

    @classmethod
    def from_config(cls, text: str) -> "BehavioralCatalog":
        """Parse the stanza config format::

            [Rewatch]
            Pl,Pa,Sb,Pl
            Pl,Sb,Pa,Pl
        """
        categories: dict[str, list[tuple[str, ...]]] = {}
        current: str | None = None
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if not current:
                    raise ValueError(f"line {no}: empty category name")
                categories.setdefault(current, [])
                continue
            if current is None:
                raise ValueError(f"line {no}: click group before any [category] header")
            toks = tuple(t.strip() for t in line.split(","))
            for t in toks:
                if t not in OP_INDEX:
                    raise ValueError(f"line {no}: unknown click operation {t!r}")
            categories[current].append(toks)
        return cls({name: tuple(groups) for name, groups in categories.items()})

    def to_config(self) -> str:
        lines: list[str] = []
        for name, groups in self.categories.items():
            lines.append(f"[{name}]")
            lines.extend(",".join(g) for g in groups)
            lines.append("")
        return "\n".join(lines)


def default_catalog() -> BehavioralCatalog:
    return BehavioralCatalog(
        {name: tuple(tokenize_compact(g) for g in groups) for name, groups in _DEFAULT_GROUPS.items()}
    )


@dataclass
class BehavioralActionVector:
    """Per-category raw weights and their corpus-dichotomized levels."""

    raw_weights: dict[str, float]
    levels: dict[str, str]


def _tokens_of(item) -> Sequence[str]:
    return item.tokens if hasattr(item, "tokens") else item


def mine_top_ngrams(
    corpus: Iterable, n: int = 4, k: int = 100
) -> list[tuple[tuple[str, ...], int]]:
    """Most frequent contiguous n-token windows across the corpus.

    Windows whose tokens are all plays/pauses are excluded.  Ties are broken
    lexicographically by token names.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    counts: Counter = Counter()
    for item in corpus:
        toks = tuple(_tokens_of(item))
        for i in range(len(toks) - n + 1):
            gram = toks[i : i + n]
            if all(t in ("Pl", "Pa") for t in gram):
                continue
            counts[gram] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def category_raw_weight(v, category: str, catalog: BehavioralCatalog | None = None) -> float:
    """Summed fuzzy pattern weight of one category's click groups against a sequence."""
    catalog = catalog or default_catalog()
    if category not in catalog.categories:
        raise ValueError(f"unknown behavioral category {category!r}")
    tokens = tuple(_tokens_of(v))
    weights = fuzzy_pattern_weights(catalog.categories[category], tokens)
    return float(weights.sum())


def all_category_weights(v, catalog: BehavioralCatalog | None = None) -> dict[str, float]:
    """Raw weights for every category in one batched scoring pass."""
    catalog = catalog or default_catalog()
    tokens = tuple(_tokens_of(v))
    patterns = [g for groups in catalog.categories.values() for g in groups]
    scores = fuzzy_pattern_weights(patterns, tokens)
    out: dict[str, float] = {}
    i = 0
    for name, groups in catalog.categories.items():
        out[name] = float(scores[i : i + len(groups)].sum())
        i += len(groups)
    return out


def summarize_actions(
    corpus_weights: Mapping[str, Mapping[str, float]],
) -> dict[str, BehavioralActionVector]:
    """Dichotomize per-category weights at the corpus median (ties go High).

    ``corpus_weights`` maps a row id (student, or student-video) to its
    per-category raw weights; needs at least two rows for a median split.
    """
    ids = list(corpus_weights)
    if len(ids) < 2:
        raise ValueError("dichotomization needs at least 2 rows")
    categories = list(corpus_weights[ids[0]])
    medians = {
        cat: float(np.median([corpus_weights[i][cat] for i in ids])) for cat in categories
    }
    out: dict[str, BehavioralActionVector] = {}
    for i in ids:
        raw = dict(corpus_weights[i])
        levels = {
            cat: LEVEL_HIGH if raw[cat] >= medians[cat] else LEVEL_LOW for cat in categories
        }
        out[i] = BehavioralActionVector(raw_weights=raw, levels=levels)
    return out
