"""Synthetic cohort generator with planted structure.

Produces parseable event logs plus ground truth: the archetype (and true
kernel) behind every student's clickstreams, and dropout weeks sampled from
a planted hazard (exponential event times, log-hazard linear in the emitted
covariates).  Generation is deterministic per seed; per-student streams use
a splittable counter-based generator keyed (cohort seed, student index).

Rendering guarantees the encoder's round trip: scroll tokens become bursts
of seeks under one second apart, every other gap stays above the collapse
window, and ratechange events always move the rate strictly up or down.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tokens import CLICK_OPS, N_OPS

_MIN_GAP = 1.1  # above the default 1.0 s scroll window
_RATE_STEP = 1.25


def _norm_rows(w) -> np.ndarray:
    a = np.asarray(w, dtype=float)
    return a / a.sum(axis=1, keepdims=True)


_BASE_KERNEL = _norm_rows(
    [
        # Pl    Pa    Sf   SSf    Sb   SSb    Rf    Rs
        [1.0, 10.0, 2.0, 1.0, 2.0, 1.0, 0.5, 0.5],
        [10.0, 1.0, 2.0, 1.0, 2.0, 1.0, 0.5, 0.5],
        [4.0, 2.0, 3.0, 1.0, 1.0, 0.5, 0.25, 0.25],
        [4.0, 2.0, 2.0, 2.0, 1.0, 0.5, 0.25, 0.25],
        [4.0, 2.0, 1.0, 0.5, 3.0, 1.0, 0.25, 0.25],
        [4.0, 2.0, 1.0, 0.5, 2.0, 2.0, 0.25, 0.25],
        [4.0, 2.0, 1.0, 0.5, 1.0, 0.5, 2.0, 1.0],
        [4.0, 2.0, 1.0, 0.5, 1.0, 0.5, 1.0, 2.0],
    ]
)


def _scaled_kernel(columns: Sequence[str], factor: float) -> np.ndarray:
    k = _BASE_KERNEL.copy()
    for op in columns:
        k[:, CLICK_OPS.index(op)] *= factor
    return _norm_rows(k)


PRESET_KERNELS: dict[str, np.ndarray] = {
    "normal": _BASE_KERNEL,
    "skipper": _scaled_kernel(("Sf", "SSf"), 8.0),
    "rewatcher": _scaled_kernel(("Sb", "SSb"), 8.0),
    "speeder": _scaled_kernel(("Rf", "Rs"), 8.0),
}

#: Covariates emitted per student when a hazard is planted.  The continuous
#: score is drawn standard-normal; the two levels are 0/1; vpp_level is 0-3.
HAZARD_COVARIATES = ("ipi_score", "rewatch_level", "playrate_transition_level", "vpp_level")


@dataclass(frozen=True)
class ArchetypeSpec:
    name: str
    fraction: float
    kernel: np.ndarray
    mean_tokens: int = 40
    dwell_log_mu: float = 1.0
    dwell_log_sigma: float = 0.7

    def validate(self) -> None:
        k = np.asarray(self.kernel, dtype=float)
        if k.shape != (N_OPS, N_OPS):
            raise ValueError(f"archetype {self.name!r}: kernel must be {N_OPS}x{N_OPS}")
        if np.any(k < 0) or not np.allclose(k.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError(f"archetype {self.name!r}: kernel rows must be stochastic")
        if self.fraction < 0:
            raise ValueError(f"archetype {self.name!r}: fraction must be nonnegative")


@dataclass(frozen=True)
class HazardSpec:
    baseline_rate: float = 0.15
    coefficients: Mapping[str, float] = field(
        default_factory=lambda: {
            "ipi_score": -0.45,
            "rewatch_level": -0.40,
            "playrate_transition_level": 0.31,
            "vpp_level": -0.46,
        }
    )


@dataclass(frozen=True)
class CohortSpec:
    n_students: int
    n_videos: int
    archetypes: tuple[ArchetypeSpec, ...]
    video_length: float = 900.0
    hazard: HazardSpec | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.n_students < 0:
            raise ValueError("n_students must be >= 0")
        if self.n_videos < 1:
            raise ValueError("n_videos must be >= 1")
        if not self.archetypes:
            raise ValueError("need at least one archetype")
        for a in self.archetypes:
            a.validate()
        total = sum(a.fraction for a in self.archetypes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"archetype fractions must sum to 1, got {total}")


@dataclass
class StudentTruth:
    student_id: str
    archetype: str
    duration_weeks: int
    event: int
    covariates: dict[str, float]


@dataclass
class Cohort:
    event_lines: list[str]
    students: list[StudentTruth]
    kernels: dict[str, np.ndarray]
    videos: list[tuple[str, float]]
    token_truth: dict[tuple[str, str], tuple[str, ...]]


def two_archetype_spec(
    n_students: int,
    n_videos: int = 5,
    seed: int = 0,
    hazard: HazardSpec | None = None,
    mean_tokens: int = 40,
) -> CohortSpec:
    """Skippers vs rewatchers, half and half: the standard planted cohort."""
    return CohortSpec(
        n_students=n_students,
        n_videos=n_videos,
        seed=seed,
        hazard=hazard,
        archetypes=(
            ArchetypeSpec("skipper", 0.5, PRESET_KERNELS["skipper"], mean_tokens, 0.8, 0.6),
            ArchetypeSpec("rewatcher", 0.5, PRESET_KERNELS["rewatcher"], mean_tokens, 1.3, 0.7),
        ),
    )


def spec_from_json(text: str) -> CohortSpec:
    """Build a cohort spec from its JSON form (kernels by preset name or
    explicit 8x8 rows)."""
    raw = json.loads(text)
    archetypes = []
    for a in raw["archetypes"]:
        if "preset" in a:
            kernel = PRESET_KERNELS[a["preset"]]
        else:
            kernel = np.asarray(a["kernel"], dtype=float)
        archetypes.append(
            ArchetypeSpec(
                name=a["name"],
                fraction=float(a["fraction"]),
                kernel=kernel,
                mean_tokens=int(a.get("mean_tokens", 40)),
                dwell_log_mu=float(a.get("dwell_log_mu", 1.0)),
                dwell_log_sigma=float(a.get("dwell_log_sigma", 0.7)),
            )
        )
    hazard = None
    if raw.get("hazard"):
        hazard = HazardSpec(
            baseline_rate=float(raw["hazard"].get("baseline_rate", 0.15)),
            coefficients=dict(raw["hazard"].get("coefficients", HazardSpec().coefficients)),
        )
    return CohortSpec(
        n_students=int(raw["n_students"]),
        n_videos=int(raw["n_videos"]),
        archetypes=tuple(archetypes),
        video_length=float(raw.get("video_length", 900.0)),
        hazard=hazard,
        seed=int(raw.get("seed", 0)),
    )


def _student_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def sample_tokens(kernel: np.ndarray, length: int, rng: np.random.Generator) -> tuple[str, ...]:
    """Markov sample of ``length`` tokens, always opening with a play."""
    if length < 1:
        return ()
    cum = np.cumsum(kernel, axis=1)
    out = [0]  # Pl
    for _ in range(length - 1):
        u = rng.random()
        out.append(int(np.searchsorted(cum[out[-1]], u, side="right").clip(0, N_OPS - 1)))
    return tuple(CLICK_OPS[i] for i in out)


def render_events(
    tokens: Sequence[str],
    student_id: str,
    video_id: str,
    rng: np.random.Generator,
    dwell_log_mu: float,
    dwell_log_sigma: float,
) -> list[str]:
    """Realize a token sequence as raw event-log lines that encode back to
    exactly the same tokens."""

    def gap() -> float:
        return float(min(max(rng.lognormal(dwell_log_mu, dwell_log_sigma), _MIN_GAP), 600.0))

    def line(kind: str, t: float, **extra) -> str:
        rec = {"student_id": student_id, "video_id": video_id, "t": round(t, 3), "event": kind}
        rec.update(extra)
        return json.dumps(rec, sort_keys=True)

    lines: list[str] = []
    t = 0.0
    pos = 0.0
    rate = 1.0
    for tok in tokens:
        if tok == "Pl":
            lines.append(line("play", t))
        elif tok == "Pa":
            lines.append(line("pause", t))
        elif tok in ("Sf", "Sb"):
            jump = float(rng.uniform(2.0, 30.0))
            sign = 1.0 if tok == "Sf" else -1.0
            lines.append(
                line("seek", t, pos_from=round(pos, 3), pos_to=round(pos + sign * jump, 3))
            )
            pos += sign * jump
        elif tok in ("SSf", "SSb"):
            sign = 1.0 if tok == "SSf" else -1.0
            members = int(rng.integers(2, 4))
            tm = t
            for m in range(members):
                jump = float(rng.uniform(2.0, 15.0))
                lines.append(
                    line("seek", tm, pos_from=round(pos, 3), pos_to=round(pos + sign * jump, 3))
                )
                pos += sign * jump
                if m + 1 < members:
                    tm += float(rng.uniform(0.2, 0.8))
            t = tm
        else:  # Rf / Rs
            rate = rate * _RATE_STEP if tok == "Rf" else rate / _RATE_STEP
            lines.append(line("ratechange", t, rate=rate))
        t += gap()
    return lines


def generate_cohort(spec: CohortSpec) -> Cohort:
    """Emit event-log lines plus the ground truth behind them."""
    spec.validate()
    rng = _student_rng(spec.seed, 2**32)  # cohort-level draws

    # archetype assignment: exact block fractions, then a seeded shuffle
    blocks: list[int] = []
    for i, a in enumerate(spec.archetypes):
        blocks.extend([i] * int(round(a.fraction * spec.n_students)))
    while len(blocks) < spec.n_students:
        blocks.append(len(spec.archetypes) - 1)
    blocks = blocks[: spec.n_students]
    assignment = np.array(blocks, dtype=np.int64)
    rng.shuffle(assignment)

    width = max(4, len(str(max(spec.n_students - 1, 0))))
    videos = [(f"v{w:03d}", spec.video_length) for w in range(1, spec.n_videos + 1)]

    students: list[StudentTruth] = []
    event_lines: list[str] = []
    token_truth: dict[tuple[str, str], tuple[str, ...]] = {}

    for idx in range(spec.n_students):
        arch = spec.archetypes[int(assignment[idx])]
        sid = f"s{idx:0{width}d}"
        srng = _student_rng(spec.seed, idx)

        covariates: dict[str, float] = {}
        duration = spec.n_videos
        event = 0
        if spec.hazard is not None:
            covariates = {
                "ipi_score": float(srng.normal()),
                "rewatch_level": float(srng.integers(0, 2)),
                "playrate_transition_level": float(srng.integers(0, 2)),
                "vpp_level": float(srng.integers(0, 4)),
            }
            lp = sum(spec.hazard.coefficients.get(n, 0.0) * covariates[n] for n in covariates)
            t_event = srng.exponential(1.0 / (spec.hazard.baseline_rate * math.exp(lp)))
            if t_event <= spec.n_videos:
                duration = max(1, int(math.ceil(t_event)))
                event = 1

        for week in range(1, duration + 1):
            vid = videos[week - 1][0]
            length = max(4, int(srng.poisson(arch.mean_tokens)))
            toks = sample_tokens(arch.kernel, length, srng)
            token_truth[(sid, vid)] = toks
            event_lines.extend(
                render_events(toks, sid, vid, srng, arch.dwell_log_mu, arch.dwell_log_sigma)
            )

        students.append(
            StudentTruth(
                student_id=sid,
                archetype=arch.name,
                duration_weeks=duration,
                event=event,
                covariates=covariates,
            )
        )

    kernels = {a.name: np.asarray(a.kernel, dtype=float) for a in spec.archetypes}
    return Cohort(
        event_lines=event_lines,
        students=students,
        kernels=kernels,
        videos=videos,
        token_truth=token_truth,
    )
