"""Click-operation alphabet and token-string helpers.

Encoded clickstreams are sequences over eight operations: play, pause,
seek forward/backward, scroll forward/backward (a burst of rapid seeks),
and ratechange up/down.  The canonical ordering below is used for every
matrix-valued structure in the package (transition matrices, proportion
vectors), so row/column `i` always means ``CLICK_OPS[i]``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

CLICK_OPS = ("Pl", "Pa", "Sf", "SSf", "Sb", "SSb", "Rf", "Rs")
N_OPS = len(CLICK_OPS)
OP_INDEX = {op: i for i, op in enumerate(CLICK_OPS)}

SEEK_OPS = frozenset({"Sf", "SSf", "Sb", "SSb"})
RATE_OPS = frozenset({"Rf", "Rs"})

# Longest symbol first so "SSf" is never read as "S" + "Sf".
_GREEDY_ORDER = ("SSf", "SSb", "Pl", "Pa", "Sf", "Sb", "Rf", "Rs")


def tokenize_compact(text: str) -> tuple[str, ...]:
    """Split a compact token string such as ``"PlPaSSfSf"`` into tokens.

    Greedy longest-match over the operation alphabet; raises ValueError on
    any character run that is not a click operation.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        for op in _GREEDY_ORDER:
            if text.startswith(op, i):
                out.append(op)
                i += len(op)
                break
        else:
            raise ValueError(f"cannot tokenize {text!r} at offset {i}")
    return tuple(out)


def split_tokens(text: str) -> tuple[str, ...]:
    """Split a comma-joined token string (the on-disk form)."""
    text = text.strip()
    if not text:
        return ()
    toks = tuple(t.strip() for t in text.split(","))
    for t in toks:
        if t not in OP_INDEX:
            raise ValueError(f"unknown click operation {t!r}")
    return toks


def join_tokens(tokens: Iterable[str]) -> str:
    """Comma-join tokens; the inverse of :func:`split_tokens`."""
    return ",".join(tokens)


def encode_ops(tokens: Sequence[str]) -> np.ndarray:
    """Map tokens to their integer codes (int64 array)."""
    try:
        return np.array([OP_INDEX[t] for t in tokens], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"unknown click operation {exc.args[0]!r}") from None


def decode_ops(codes: Iterable[int]) -> tuple[str, ...]:
    """Inverse of :func:`encode_ops`."""
    return tuple(CLICK_OPS[int(c)] for c in codes)
