"""Raw event-log parsing and Level-1 encoding of watching-state sequences.

Input is line-delimited JSON, one player event per line::

    {"student_id": "s1", "video_id": "v1", "t": 12.5, "event": "play"}
    {"student_id": "s1", "video_id": "v1", "t": 30.0, "event": "seek",
     "pos_from": 30.0, "pos_to": 95.0}
    {"student_id": "s1", "video_id": "v1", "t": 41.2, "event": "ratechange",
     "rate": 1.5}

Unknown fields are ignored.  Malformed lines are collected as diagnostics
with their line number, never silently dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .tokens import OP_INDEX, SEEK_OPS

EVENT_KINDS = ("play", "pause", "seek", "ratechange")

DEFAULT_SCROLL_WINDOW = 1.0


@dataclass(frozen=True)
class ClickEvent:
    """One raw player event."""

    student_id: str
    video_id: str
    wall_time: float
    kind: str
    pos_from: float | None = None
    pos_to: float | None = None
    rate: float | None = None


@dataclass(frozen=True)
class ParseError:
    line_no: int
    message: str
    line: str


@dataclass
class ParseResult:
    events: list[ClickEvent]
    errors: list[ParseError]


@dataclass
class Vwss:
    """A student's encoded watching-state sequence for one video.

    ``token_rates[i]`` is the playback multiplier in effect after token i.
    ``seek_forward_seconds``/``seek_backward_seconds`` are the summed jump
    lengths of the raw seeks (scroll members included).
    """

    student_id: str
    video_id: str
    tokens: tuple[str, ...]
    token_times: np.ndarray
    token_rates: np.ndarray
    video_length: float = 0.0
    played_seconds: float = 0.0
    seek_forward_seconds: float = 0.0
    seek_backward_seconds: float = 0.0
    dropped_ratechanges: int = 0


def _num(value) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _ident(value) -> str | None:
    if isinstance(value, str):
        return value if value else None
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return None


def parse_event_log(lines: Iterable[str]) -> ParseResult:
    """Parse raw log lines into events sorted by (student, video, time).

    Empty input yields an empty result.  Every schema violation produces a
    per-line diagnostic and excludes only that line.
    """
    events: list[ClickEvent] = []
    errors: list[ParseError] = []

    def bad(no: int, msg: str, line: str) -> None:
        errors.append(ParseError(no, msg, line.rstrip("\n")[:200]))

    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            bad(no, f"invalid JSON: {exc.msg}", line)
            continue
        if not isinstance(rec, dict):
            bad(no, "record is not an object", line)
            continue
        sid = _ident(rec.get("student_id"))
        vid = _ident(rec.get("video_id"))
        t = _num(rec.get("t"))
        kind = rec.get("event")
        if sid is None:
            bad(no, "missing or invalid student_id", line)
            continue
        if vid is None:
            bad(no, "missing or invalid video_id", line)
            continue
        if t is None:
            bad(no, "missing or invalid t", line)
            continue
        if kind not in EVENT_KINDS:
            bad(no, f"unknown event kind {kind!r}", line)
            continue
        pos_from = _num(rec.get("pos_from"))
        pos_to = _num(rec.get("pos_to"))
        rate = _num(rec.get("rate"))
        if kind == "seek" and (pos_from is None or pos_to is None):
            bad(no, "seek requires pos_from and pos_to", line)
            continue
        if kind == "ratechange":
            if rate is None:
                bad(no, "ratechange requires rate", line)
                continue
            if rate <= 0:
                bad(no, f"rate must be positive, got {rate}", line)
                continue
        if rate is not None and rate <= 0:
            bad(no, f"rate must be positive, got {rate}", line)
            continue
        events.append(ClickEvent(sid, vid, t, kind, pos_from, pos_to, rate))

    events.sort(key=lambda e: (e.student_id, e.video_id, e.wall_time))
    return ParseResult(events=events, errors=errors)


def iter_groups(events: Sequence[ClickEvent]) -> Iterator[tuple[tuple[str, str], list[ClickEvent]]]:
    """Yield ((student_id, video_id), events) groups from a sorted event list."""
    group: list[ClickEvent] = []
    key: tuple[str, str] | None = None
    for ev in events:
        k = (ev.student_id, ev.video_id)
        if k != key and group:
            yield key, group
            group = []
        key = k
        group.append(ev)
    if group:
        yield key, group


def collapse_scrolls(
    ops: Sequence[str], times: Sequence[float], window: float = DEFAULT_SCROLL_WINDOW
) -> tuple[tuple[str, ...], tuple[float, ...]]:
    """Collapse runs of rapid same-direction seeks into scroll tokens.

    Two or more consecutive Sf (or Sb) tokens whose successive gaps are all
    below ``window`` become one SSf (SSb) stamped at the first seek's time.
    Already-collapsed streams pass through unchanged (idempotent).
    """
    out_ops, out_times, _ = _collapse(ops, times, [1.0] * len(ops), window)
    return tuple(out_ops), tuple(out_times)


def _collapse(ops, times, rates, window):
    out_o: list[str] = []
    out_t: list[float] = []
    out_r: list[float] = []
    i = 0
    n = len(ops)
    while i < n:
        op = ops[i]
        if op in ("Sf", "Sb"):
            j = i
            while j + 1 < n and ops[j + 1] == op and times[j + 1] - times[j] < window:
                j += 1
            if j > i:
                out_o.append("SSf" if op == "Sf" else "SSb")
                out_t.append(times[i])
                out_r.append(rates[j])
                i = j + 1
                continue
        out_o.append(op)
        out_t.append(times[i])
        out_r.append(rates[i])
        i += 1
    return out_o, out_t, out_r


def encode_vwss(
    events: Sequence[ClickEvent],
    scroll_window: float = DEFAULT_SCROLL_WINDOW,
    video_length: float = 0.0,
    initial_rate: float = 1.0,
) -> Vwss:
    """Encode one (student, video) group of events into a Vwss.

    Seeks map to Sf/Sb by direction (a zero-length seek counts as Sb), with
    rapid same-direction runs collapsed to SSf/SSb.  A ratechange maps to
    Rf/Rs by comparison with the rate currently in effect; an equal-rate
    ratechange produces no token and is tallied in ``dropped_ratechanges``.
    Play time accumulates on intervals from a play event to the next pause,
    seek, or end of the logged stream (a ratechange does not end one); the
    playback rate is applied later, in the engagement and play-proportion
    formulas, not here.

    The effective rate starts at ``initial_rate`` unless the first event
    carries a ``rate`` field.
    """
    if not events:
        raise ValueError("encode_vwss needs at least one event")
    keys = {(e.student_id, e.video_id) for e in events}
    if len(keys) != 1:
        raise ValueError(f"events span multiple student-video groups: {sorted(keys)}")
    events = sorted(events, key=lambda e: e.wall_time)

    rate = initial_rate
    if events[0].rate is not None:
        rate = events[0].rate
        if events[0].kind == "ratechange":
            rate = initial_rate

    ops: list[str] = []
    times: list[float] = []
    rates: list[float] = []
    played = 0.0
    playing = False
    play_start = 0.0
    jump_fw = 0.0
    jump_bw = 0.0
    dropped = 0

    for ev in events:
        t = ev.wall_time
        if ev.kind == "play":
            if not playing:
                playing = True
                play_start = t
            ops.append("Pl")
        elif ev.kind == "pause":
            if playing:
                played += t - play_start
                playing = False
            ops.append("Pa")
        elif ev.kind == "seek":
            if playing:
                played += t - play_start
                playing = False
            delta = ev.pos_to - ev.pos_from
            if delta > 0:
                jump_fw += delta
                ops.append("Sf")
            else:
                jump_bw += -delta
                ops.append("Sb")
        else:  # ratechange
            if ev.rate > rate:
                ops.append("Rf")
            elif ev.rate < rate:
                ops.append("Rs")
            else:
                dropped += 1
                continue
            rate = ev.rate
        times.append(t)
        rates.append(rate)
    if playing:
        played += events[-1].wall_time - play_start

    ops, times, rates = _collapse(ops, times, rates, scroll_window)
    sid, vid = next(iter(keys))
    return Vwss(
        student_id=sid,
        video_id=vid,
        tokens=tuple(ops),
        token_times=np.asarray(times, dtype=np.float64),
        token_rates=np.asarray(rates, dtype=np.float64),
        video_length=video_length,
        played_seconds=played,
        seek_forward_seconds=jump_fw,
        seek_backward_seconds=jump_bw,
        dropped_ratechanges=dropped,
    )


def token_dwells(v: Vwss) -> np.ndarray:
    """Wall-clock time from each token to the next (0 for the last)."""
    n = len(v.tokens)
    if n == 0:
        return np.zeros(0)
    gaps = np.zeros(n)
    gaps[:-1] = np.diff(v.token_times)
    return gaps


def pause_seconds(v: Vwss) -> float:
    gaps = token_dwells(v)
    return float(sum(g for tok, g in zip(v.tokens, gaps) if tok == "Pa"))


def seek_dwell_seconds(v: Vwss, direction: str | None = None) -> float:
    """Summed dwell after seek/scroll tokens; ``direction`` is "fw"/"bw"/None."""
    if direction == "fw":
        ops = ("Sf", "SSf")
    elif direction == "bw":
        ops = ("Sb", "SSb")
    elif direction is None:
        ops = tuple(SEEK_OPS)
    else:
        raise ValueError(f"direction must be 'fw', 'bw', or None, got {direction!r}")
    gaps = token_dwells(v)
    return float(sum(g for tok, g in zip(v.tokens, gaps) if tok in ops))


def mean_rate(v: Vwss) -> float:
    if len(v.token_rates) == 0:
        return 1.0
    return float(np.mean(v.token_rates))


def compute_engagement(v: Vwss, variant: str = "full") -> float:
    """Effective interaction time, scaled by the average playback rate.

    ``full``: (play + pause + seek dwell) x mean rate.
    ``pause_seek_only``: the same without play time.
    """
    if variant not in ("full", "pause_seek_only"):
        raise ValueError(f"unknown engagement variant {variant!r}")
    if len(v.tokens) == 0:
        return 0.0
    dwell = pause_seconds(v) + seek_dwell_seconds(v)
    base = dwell if variant == "pause_seek_only" else dwell + v.played_seconds
    return base * mean_rate(v)


def compute_play_proportion(v: Vwss) -> float:
    """Played share of the video in percent, scaled by the mean rate.

    Can exceed 100 when content is rewatched.
    """
    if v.video_length <= 0:
        raise ValueError(f"video_length must be positive, got {v.video_length}")
    if len(v.tokens) == 0 or v.played_seconds == 0:
        return 0.0
    return v.played_seconds / v.video_length * mean_rate(v) * 100.0


def click_proportions(v: Vwss) -> np.ndarray:
    """Proportion of tokens in each of the 8 operation classes."""
    out = np.zeros(len(OP_INDEX))
    if not v.tokens:
        return out
    for tok in v.tokens:
        out[OP_INDEX[tok]] += 1
    return out / len(v.tokens)
