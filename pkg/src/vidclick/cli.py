"""Pipeline orchestration CLI.

Subcommands wire the stages together over delimiter-separated artifacts:

    synth -> encode -> actions -> ipi -> {cluster, predict, survival, sna,
                                          stats, report}

Every randomized stage takes an explicit seed; reruns with the same inputs,
config, and seed produce byte-identical reports.  Each report starts with a
``# config_hash=...`` line covering the parameters that produced it.

Exit codes: 0 success, 1 usage/runtime error, 2 missing input file,
3 input schema errors (with per-line diagnostics on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import actions as actions_mod
from . import ingest, ipi as ipi_mod, learn, markov, sna, stats as stats_mod, survival, synth
from .strdist import EditWeights, wlev_table
from .tokens import CLICK_OPS, join_tokens, split_tokens

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_INPUT = 2
EXIT_SCHEMA = 3


class MissingInput(Exception):
    pass


class SchemaErrors(Exception):
    def __init__(self, errors):
        self.errors = errors
        super().__init__(f"{len(errors)} schema error(s)")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    return str(value)


def _config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_table(path: Path, header: list[str], rows: list[list], params: dict) -> None:
    lines = [f"# config_hash={_config_hash(params)}", "\t".join(header)]
    lines.extend("\t".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise MissingInput(str(path))
    header: list[str] | None = None
    rows: list[list[str]] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = line.split("\t")
        else:
            rows.append(line.split("\t"))
    return header or [], rows


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise MissingInput(path)
    return json.loads(p.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# vwss table round trip
# ---------------------------------------------------------------------------

VWSS_COLUMNS = [
    "student_id",
    "video_id",
    "n_tokens",
    "tokens",
    "token_times",
    "token_rates",
    "video_length",
    "played_seconds",
    "mean_rate",
    "pause_seconds",
    "seek_fw_dwell_seconds",
    "seek_bw_dwell_seconds",
    "jumped_fw_seconds",
    "jumped_bw_seconds",
    "engagement_full",
    "engagement_pause_seek",
    "play_proportion",
    "dropped_ratechanges",
]


def vwss_row(v: ingest.Vwss) -> list:
    try:
        vpp = ingest.compute_play_proportion(v)
    except ValueError:
        vpp = None
    return [
        v.student_id,
        v.video_id,
        len(v.tokens),
        join_tokens(v.tokens),
        ",".join(f"{t:.3f}" for t in v.token_times),
        ",".join(f"{r:.6g}" for r in v.token_rates),
        v.video_length,
        v.played_seconds,
        ingest.mean_rate(v),
        ingest.pause_seconds(v),
        ingest.seek_dwell_seconds(v, "fw"),
        ingest.seek_dwell_seconds(v, "bw"),
        v.seek_forward_seconds,
        v.seek_backward_seconds,
        ingest.compute_engagement(v, "full"),
        ingest.compute_engagement(v, "pause_seek_only"),
        vpp,
        v.dropped_ratechanges,
    ]


def read_vwss_table(path: Path) -> list[ingest.Vwss]:
    header, rows = read_table(path)
    col = {name: i for i, name in enumerate(header)}
    out = []
    for r in rows:
        times = r[col["token_times"]]
        rates = r[col["token_rates"]]
        out.append(
            ingest.Vwss(
                student_id=r[col["student_id"]],
                video_id=r[col["video_id"]],
                tokens=split_tokens(r[col["tokens"]]),
                token_times=np.array([float(x) for x in times.split(",")] if times else []),
                token_rates=np.array([float(x) for x in rates.split(",")] if rates else []),
                video_length=float(r[col["video_length"]]),
                played_seconds=float(r[col["played_seconds"]]),
                seek_forward_seconds=float(r[col["jumped_fw_seconds"]]),
                seek_backward_seconds=float(r[col["jumped_bw_seconds"]]),
                dropped_ratechanges=int(r[col["dropped_ratechanges"]]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if cfg:
        spec = synth.spec_from_json(json.dumps(cfg))
    else:
        hazard = synth.HazardSpec()
        spec = synth.two_archetype_spec(
            n_students=60, n_videos=6, seed=args.seed if args.seed is not None else 0, hazard=hazard
        )
    if args.seed is not None:
        spec = synth.CohortSpec(
            n_students=spec.n_students,
            n_videos=spec.n_videos,
            archetypes=spec.archetypes,
            video_length=spec.video_length,
            hazard=spec.hazard,
            seed=args.seed,
        )
    cohort = synth.generate_cohort(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {"cmd": "synth", "seed": spec.seed, "n_students": spec.n_students, "n_videos": spec.n_videos}

    (out / "events.jsonl").write_text(
        "\n".join(cohort.event_lines) + ("\n" if cohort.event_lines else ""), encoding="utf-8"
    )
    cov_names = list(synth.HAZARD_COVARIATES) if spec.hazard else []
    write_table(
        out / "truth_students.tsv",
        ["student_id", "archetype", "duration_weeks", "event"] + cov_names,
        [
            [s.student_id, s.archetype, s.duration_weeks, s.event]
            + [s.covariates.get(n) for n in cov_names]
            for s in cohort.students
        ],
        params,
    )
    write_table(
        out / "truth_kernels.tsv",
        ["archetype", "from_op"] + [f"to_{op}" for op in CLICK_OPS],
        [
            [name, CLICK_OPS[i]] + [kernel[i, j] for j in range(len(CLICK_OPS))]
            for name, kernel in cohort.kernels.items()
            for i in range(len(CLICK_OPS))
        ],
        params,
    )
    write_table(
        out / "videos.tsv",
        ["video_id", "length_seconds"],
        [[vid, length] for vid, length in cohort.videos],
        params,
    )
    print(f"synth: {spec.n_students} students, {len(cohort.event_lines)} events -> {out}")
    return EXIT_OK


def cmd_encode(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise MissingInput(args.input)
    lengths: dict[str, float] = {}
    if args.video_lengths:
        header, rows = read_table(Path(args.video_lengths))
        col = {n: i for i, n in enumerate(header)}
        lengths = {r[col["video_id"]]: float(r[col["length_seconds"]]) for r in rows}

    with path.open(encoding="utf-8") as fh:
        result = ingest.parse_event_log(fh)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {"cmd": "encode", "scroll_window": args.scroll_window, "input": str(path.name)}
    if result.errors:
        write_table(
            out / "encode_errors.tsv",
            ["line_no", "message", "line"],
            [[e.line_no, e.message, e.line] for e in result.errors],
            params,
        )
        raise SchemaErrors(result.errors)

    rows = []
    for (sid, vid), events in ingest.iter_groups(result.events):
        v = ingest.encode_vwss(
            events, scroll_window=args.scroll_window, video_length=lengths.get(vid, 0.0)
        )
        rows.append(vwss_row(v))
    write_table(out / "vwss.tsv", VWSS_COLUMNS, rows, params)
    print(f"encode: {len(rows)} watching-state sequences -> {out / 'vwss.tsv'}")
    return EXIT_OK


def _load_catalog(args, cfg) -> actions_mod.BehavioralCatalog:
    path = getattr(args, "catalog", None) or cfg.get("catalog_file")
    if path:
        p = Path(path)
        if not p.exists():
            raise MissingInput(str(path))
        return actions_mod.BehavioralCatalog.from_config(p.read_text(encoding="utf-8"))
    return actions_mod.default_catalog()


def cmd_actions(args) -> int:
    cfg = load_config(args.config)
    catalog = _load_catalog(args, cfg)
    vwss_list = read_vwss_table(Path(args.input))
    by_video: dict[str, dict[str, dict[str, float]]] = {}
    for v in vwss_list:
        weights = actions_mod.all_category_weights(v, catalog)
        by_video.setdefault(v.video_id, {})[v.student_id] = weights

    cats = list(catalog.names)
    rows = []
    for vid in sorted(by_video):
        group = by_video[vid]
        if len(group) >= 2:
            summaries = actions_mod.summarize_actions(group)
        else:
            # degenerate one-student video: median split ties to High
            summaries = {
                sid: actions_mod.BehavioralActionVector(
                    raw_weights=w, levels={c: actions_mod.LEVEL_HIGH for c in cats}
                )
                for sid, w in group.items()
            }
        for sid in sorted(group):
            bav = summaries[sid]
            rows.append(
                [sid, vid]
                + [bav.raw_weights[c] for c in cats]
                + [bav.levels[c] for c in cats]
            )
    params = {"cmd": "actions", "categories": cats, "input": Path(args.input).name}
    header = (
        ["student_id", "video_id"]
        + [f"{c}_weight" for c in cats]
        + [f"{c}_level" for c in cats]
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "actions.tsv", header, rows, params)
    print(f"actions: {len(rows)} action vectors -> {out / 'actions.tsv'}")
    return EXIT_OK


def _weight_table(cfg) -> ipi_mod.IpiWeightTable:
    if cfg.get("ipi_weights"):
        return ipi_mod.IpiWeightTable({k: int(v) for k, v in cfg["ipi_weights"].items()})
    return ipi_mod.DEFAULT_IPI_WEIGHTS


def cmd_ipi(args) -> int:
    cfg = load_config(args.config)
    table = _weight_table(cfg)
    header, rows = read_table(Path(args.input))
    col = {n: i for i, n in enumerate(header)}
    cats = [n[: -len("_level")] for n in header if n.endswith("_level")]
    out_rows = []
    for r in rows:
        levels = {c: r[col[f"{c}_level"]] for c in cats}
        out_rows.append([r[col["student_id"]], r[col["video_id"]], ipi_mod.compute_ipi(levels, table)])
    params = {"cmd": "ipi", "weights": dict(table.weights)}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "ipi.tsv", ["student_id", "video_id", "ipi"], out_rows, params)
    print(f"ipi: {len(out_rows)} scores -> {out / 'ipi.tsv'}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    vwss_list = read_vwss_table(Path(args.input))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {
        "cmd": "cluster",
        "k": args.k,
        "vwss_k": args.vwss_k,
        "order": args.order,
        "seed": args.seed or 0,
        "restarts": args.restarts,
    }
    seed = args.seed or 0

    by_student: dict[str, list[ingest.Vwss]] = {}
    for v in vwss_list:
        by_student.setdefault(v.student_id, []).append(v)

    fit_rows = []
    matrices = []
    students = []
    for sid in sorted(by_student):
        seqs = [v.tokens for v in by_student[sid] if len(v.tokens) > args.order]
        if not seqs:
            fit_rows.append([sid, None, None, None, None, "too_short"])
            continue
        tm, report = markov.fit_markov(seqs, order=args.order)
        fit_rows.append(
            [sid, report.log_likelihood, report.n_transitions, report.aic, report.bic, ""]
        )
        matrices.append(tm)
        students.append(sid)
    pooled_tm, pooled = markov.fit_markov(
        [v.tokens for v in vwss_list if len(v.tokens) > args.order], order=args.order
    )
    fit_rows.append(["(pooled)", pooled.log_likelihood, pooled.n_transitions, pooled.aic, pooled.bic, ""])
    write_table(
        out / "markov_fit.tsv",
        ["student_id", "log_likelihood", "n_transitions", "aic", "bic", "note"],
        fit_rows,
        params,
    )

    km = markov.cluster_transition_matrices(matrices, k=args.k, seed=seed, restarts=args.restarts)
    write_table(
        out / "markov_clusters.tsv",
        ["student_id", "cluster"],
        [[sid, int(c)] for sid, c in zip(students, km.labels)],
        params,
    )

    vk = markov.cluster_vwss_metrics(vwss_list, k=args.vwss_k, seed=seed, restarts=args.restarts)
    write_table(
        out / "vwss_metric_clusters.tsv",
        ["student_id", "video_id", "cluster"],
        [[v.student_id, v.video_id, int(c)] for v, c in zip(vwss_list, vk.labels)],
        params,
    )

    # per-cluster profile: mean click proportions and dwell/engagement summaries
    profile_rows = []
    for c in range(args.k):
        members = [v for sid, lab in zip(students, km.labels) if lab == c for v in by_student[sid]]
        if not members:
            profile_rows.append([c, 0] + [None] * (len(CLICK_OPS) + 4))
            continue
        props = np.mean([ingest.click_proportions(v) for v in members], axis=0)
        profile_rows.append(
            [c, len({v.student_id for v in members})]
            + [float(p) for p in props]
            + [
                float(np.mean([ingest.pause_seconds(v) for v in members])),
                float(np.mean([ingest.seek_dwell_seconds(v, "fw") for v in members])),
                float(np.mean([ingest.seek_dwell_seconds(v, "bw") for v in members])),
                float(np.mean([ingest.compute_engagement(v) for v in members])),
                float(np.mean([len(v.tokens) for v in members])),
            ]
        )
    write_table(
        out / "cluster_profiles.tsv",
        ["cluster", "n_students"]
        + [f"prop_{op}" for op in CLICK_OPS]
        + ["mean_pause_s", "mean_seek_fw_s", "mean_seek_bw_s", "mean_engagement", "mean_len"],
        profile_rows,
        params,
    )
    print(f"cluster: {len(students)} students, wcss={km.wcss:.6g} -> {out}")
    return EXIT_OK


def _engagement_levels_per_video(vwss_list, variant: str) -> dict[tuple[str, str], str]:
    by_video: dict[str, list[ingest.Vwss]] = {}
    for v in vwss_list:
        by_video.setdefault(v.video_id, []).append(v)
    out = {}
    for vid, group in by_video.items():
        values = np.array([ingest.compute_engagement(v, variant) for v in group])
        med = float(np.median(values))
        for v, val in zip(group, values):
            out[(v.student_id, v.video_id)] = (
                actions_mod.LEVEL_HIGH if val >= med else actions_mod.LEVEL_LOW
            )
    return out


def _read_ipi(path: Path) -> dict[tuple[str, str], int]:
    header, rows = read_table(path)
    col = {n: i for i, n in enumerate(header)}
    return {
        (r[col["student_id"]], r[col["video_id"]]): int(r[col["ipi"]]) for r in rows
    }


def _read_action_levels(path: Path) -> dict[tuple[str, str], actions_mod.BehavioralActionVector]:
    header, rows = read_table(path)
    col = {n: i for i, n in enumerate(header)}
    cats = [n[: -len("_level")] for n in header if n.endswith("_level")]
    out = {}
    for r in rows:
        key = (r[col["student_id"]], r[col["video_id"]])
        out[key] = actions_mod.BehavioralActionVector(
            raw_weights={c: float(r[col[f"{c}_weight"]]) for c in cats},
            levels={c: r[col[f"{c}_level"]] for c in cats},
        )
    return out


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    in_dir = Path(args.input)
    vwss_list = read_vwss_table(in_dir / "vwss.tsv")
    seed = args.seed or 0
    lam = float(cfg.get("lambda", 1.0))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {
        "cmd": "predict",
        "task": args.task,
        "folds": args.folds,
        "seed": seed,
        "lambda": lam,
        "variant": args.variant,
        "features": args.features,
    }

    use_actions = args.features == "actions"
    bavs = _read_action_levels(in_dir / "actions.tsv") if use_actions else {}
    fcfg = learn.FeatureConfig(action_levels=use_actions)
    rows: list[learn.FeatureVector] = []
    positive = None
    rare = int(cfg.get("rare_threshold", 2))
    max_iter = int(cfg.get("max_iter", 20000))
    costs = None

    if args.task == "engagement":
        levels = _engagement_levels_per_video(vwss_list, args.variant)
        for v in vwss_list:
            fv = learn.extract_features(v, bavs.get((v.student_id, v.video_id)), fcfg)
            fv.label = levels[(v.student_id, v.video_id)]
            rows.append(fv)
        positive = actions_mod.LEVEL_HIGH
    elif args.task == "next-click":
        rare = int(cfg.get("rare_threshold", 5))
        levels = _engagement_levels_per_video(vwss_list, args.variant)
        for v in vwss_list:
            for fv in learn.prefix_feature_rows(
                v, bavs.get((v.student_id, v.video_id)), fcfg, min_prefix=1
            ):
                fv.features["eng:High"] = (
                    1.0 if levels[(v.student_id, v.video_id)] == actions_mod.LEVEL_HIGH else 0.0
                )
                rows.append(fv)
    elif args.task == "video-dropout":
        costs = "balanced"
        levels = _engagement_levels_per_video(vwss_list, args.variant)
        gaps = []
        vpps = []
        for v in vwss_list:
            last_t = float(v.token_times[-1]) if len(v.tokens) else 0.0
            gaps.append(max(v.video_length - last_t, 0.0))
            try:
                vpps.append(ingest.compute_play_proportion(v))
            except ValueError:
                vpps.append(0.0)
        med_gap = float(np.median(gaps)) if gaps else 0.0
        # absolute cutoff when configured, corpus median otherwise
        threshold = float(cfg.get("in_video_dropout_threshold", np.median(vpps)))
        for v, gap, vpp in zip(vwss_list, gaps, vpps):
            fv = learn.extract_features(
                v,
                bavs.get((v.student_id, v.video_id)),
                fcfg,
                engagement_level=levels[(v.student_id, v.video_id)],
            )
            if len(v.tokens):
                fv.features[f"last:{v.tokens[-1]}"] = 1.0
            fv.features["lastgap:High"] = 1.0 if gap >= med_gap else 0.0
            fv.label = 1 if vpp < threshold else 0
            rows.append(fv)
        positive = 1
    elif args.task == "course-dropout":
        costs = "balanced"
        rare = int(cfg.get("rare_threshold", 5))
        ipi_by_key = _read_ipi(in_dir / "ipi.tsv")
        observations = []
        for v in vwss_list:
            try:
                vpp = ingest.compute_play_proportion(v)
            except ValueError:
                vpp = 0.0
            observations.append(
                learn.VideoObservation(
                    student_id=v.student_id,
                    video_id=v.video_id,
                    engagement=ingest.compute_engagement(v, args.variant),
                    play_proportion=vpp,
                    ipi=float(ipi_by_key.get((v.student_id, v.video_id), 0)),
                )
            )
        trajectories, diags = learn.build_trajectories(observations)
        for msg in diags:
            print(f"predict: note: {msg}", file=sys.stderr)
        all_videos = sorted({v.video_id for v in vwss_list})
        last_video = all_videos[-1]
        for sid in sorted(trajectories):
            traj = trajectories[sid]
            fv = learn.trajectory_features(traj)
            fv.label = 0 if last_video in traj.videos else 1
            rows.append(fv)
        positive = 1
    else:
        raise ValueError(f"unknown predict task {args.task!r}")

    labels = {r.label for r in rows}
    if len(labels) < 2:
        print(f"predict: only one label value present ({labels}); nothing to train", file=sys.stderr)
        return EXIT_ERROR
    per_fold, pooled = learn.grouped_cross_val(
        rows,
        k=args.folds,
        seed=seed,
        positive_class=positive,
        lam=lam,
        class_costs=costs,
        rare_threshold=rare,
        max_iter=max_iter,
    )
    table_rows = [
        [i, int(f.counts.sum()), f.accuracy, f.kappa, f.fnr, f.fnr_conventional]
        for i, f in enumerate(per_fold)
    ]
    table_rows.append(["(pooled)", int(pooled.counts.sum()), pooled.accuracy, pooled.kappa, pooled.fnr, pooled.fnr_conventional])
    task_slug = args.task.replace("-", "_")
    write_table(
        out / f"predict_{task_slug}.tsv",
        ["fold", "n", "accuracy", "kappa", "fnr", "fnr_conventional"],
        table_rows,
        params,
    )
    model = learn.train_logistic(
        rows, lam=lam, class_costs=costs, rare_threshold=rare, max_iter=max_iter
    )
    (out / f"model_{task_slug}.tsv").write_text(
        f"# config_hash={_config_hash(params)}\n" + model.dump() + "\n", encoding="utf-8"
    )
    print(
        f"predict[{args.task}]: pooled accuracy={pooled.accuracy:.4f} kappa={pooled.kappa:.4f}"
        f" -> {out / f'predict_{task_slug}.tsv'}"
    )
    return EXIT_OK


def cmd_survival(args) -> int:
    header, rows = read_table(Path(args.input))
    col = {n: i for i, n in enumerate(header)}
    reserved = {"student_id", "archetype", "duration_weeks", "event"}
    cov_names = [n for n in header if n not in reserved]
    records = []
    for r in rows:
        covs = {}
        skip = False
        for n in cov_names:
            val = r[col[n]]
            if val == "":
                skip = True
                break
            covs[n] = float(val)
        if skip or not covs:
            continue
        records.append(
            survival.SurvivalRecord(
                student_id=r[col["student_id"]],
                duration=float(r[col["duration_weeks"]]),
                event=int(r[col["event"]]),
                covariates=covs,
            )
        )
    if not records:
        print("survival: no usable records (missing covariates?)", file=sys.stderr)
        return EXIT_ERROR
    cfg = load_config(args.config)
    threshold = float(cfg.get("correlation_threshold", 0.5))
    prepared = survival.prepare_covariates(records, corr_threshold=threshold)
    for msg in prepared.dropped:
        print(f"survival: dropped {msg}", file=sys.stderr)
    model = survival.fit_hazard(prepared, model=args.model)
    params = {
        "cmd": "survival",
        "model": args.model,
        "correlation_threshold": threshold,
        "n_records": len(records),
    }
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(
        out / "survival.tsv",
        ["covariate", "beta", "hazard_ratio", "se", "p", "significance"],
        [list(row) for row in model.report_rows()],
        params,
    )
    flag = "" if model.converged else " (NOT CONVERGED)"
    print(f"survival[{args.model}]: {len(model.names)} covariates{flag} -> {out / 'survival.tsv'}")
    return EXIT_OK


def cmd_sna(args) -> int:
    vwss_list = read_vwss_table(Path(args.input))
    videos = sorted({v.video_id for v in vwss_list})
    video = args.video or videos[0]
    group = sorted((v for v in vwss_list if v.video_id == video), key=lambda v: v.student_id)
    if len(group) < 3:
        print(f"sna: need at least 3 students on video {video}", file=sys.stderr)
        return EXIT_ERROR
    seed = args.seed or 0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {
        "cmd": "sna",
        "video": video,
        "k": args.k,
        "permutations": args.permutations,
        "seed": seed,
    }

    km = markov.cluster_vwss_metrics(group, k=args.k, seed=seed)
    students = [v.student_id for v in group]
    vwss_assign = {sid: int(c) for sid, c in zip(students, km.labels)}

    def ef2(values):
        med = float(np.median(values))
        return ["H" if val >= med else "L" for val in values]

    vpps = []
    for v in group:
        try:
            vpps.append(ingest.compute_play_proportion(v))
        except ValueError:
            vpps.append(0.0)
    vpp_bins = stats_mod.discretize(vpps, "equal_width", 4) if len(set(vpps)) > 1 else [0] * len(group)
    eng_bins = ef2([ingest.compute_engagement(v, args.variant) for v in group])
    apr_bins = ef2([ingest.mean_rate(v) for v in group])

    nets = {
        "vwss": sna.comembership_network(dict(zip(students, (vwss_assign[s] for s in students)))),
        "vpp": sna.comembership_network(dict(zip(students, vpp_bins))),
        "engagement": sna.comembership_network(dict(zip(students, eng_bins))),
        "playrate": sna.comembership_network(dict(zip(students, apr_bins))),
    }
    for name, net in nets.items():
        (out / f"network_{name}.edges").write_text(
            "\n".join(sna.edge_list(net)) + "\n", encoding="utf-8"
        )

    report: list[list] = []
    for name, net in nets.items():
        report.append(["density", name, sna.density(net), None, None])
    partitions = {"vpp": dict(zip(students, vpp_bins)), "engagement": dict(zip(students, eng_bins)),
                  "playrate": dict(zip(students, apr_bins))}
    for name in ("vpp", "engagement", "playrate"):
        combo = sna.multiplex_and(nets["vwss"], nets[name])
        report.append(["multiplex_density", f"vwss&{name}", sna.density(combo), None, None])
        per_group, external = sna.density_by_group(combo, partitions[name])
        for g in sorted(per_group, key=repr):
            gd = per_group[g]
            report.append([f"group_density", f"vwss&{name}:{g}", gd.density, gd.ties, None])
        try:
            report.append(["ei_index", f"vwss|{name}", sna.ei_index(nets["vwss"], partitions[name]), None, None])
        except ValueError:
            report.append(["ei_index", f"vwss|{name}", None, None, "no ties"])
        try:
            qc = sna.qap_correlation(nets["vwss"], nets[name], n_perm=args.permutations, seed=seed)
            report.append(["qap_correlation", f"vwss~{name}", qc.r, None, qc.p])
        except ValueError as exc:
            report.append(["qap_correlation", f"vwss~{name}", None, None, str(exc)])
    predictors = [
        name for name in ("vpp", "engagement", "playrate")
        if 0 < nets[name].n_ties < nets[name].n * (nets[name].n - 1) // 2
    ]
    try:
        reg = sna.qap_regression(
            nets["vwss"],
            [nets[n] for n in predictors],
            n_perm=args.permutations,
            seed=seed,
        )
        report.append(["qap_regression_intercept", "vwss", reg.intercept, None, None])
        for name, coef, p in zip(predictors, reg.coefficients, reg.p_values):
            report.append(["qap_regression_coef", name, float(coef), None, float(p)])
        report.append(["qap_regression_r2", "vwss", reg.r_squared, None, None])
    except ValueError as exc:
        report.append(["qap_regression_r2", "vwss", None, None, str(exc)])
    write_table(
        out / "sna_report.tsv", ["metric", "subject", "value", "ties", "p"], report, params
    )
    print(f"sna: video {video}, {len(group)} students -> {out / 'sna_report.tsv'}")
    return EXIT_OK


def cmd_stats(args) -> int:
    in_dir = Path(args.input)
    vwss_list = read_vwss_table(in_dir / "vwss.tsv")
    ipi_by_key = _read_ipi(in_dir / "ipi.tsv")
    levels = _engagement_levels_per_video(vwss_list, args.variant)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {"cmd": "stats", "variant": args.variant}

    ipi_high = [float(ipi_by_key[k]) for k in ipi_by_key if levels.get(k) == actions_mod.LEVEL_HIGH]
    ipi_low = [float(ipi_by_key[k]) for k in ipi_by_key if levels.get(k) == actions_mod.LEVEL_LOW]
    rows: list[list] = []
    pooled = np.array(ipi_high + ipi_low)
    sigma = float(pooled.std()) if pooled.size else 0.0
    if ipi_high and ipi_low and sigma > 0:
        z = stats_mod.two_sample_z(
            float(np.mean(ipi_high)), float(np.mean(ipi_low)), sigma, len(ipi_high), len(ipi_low)
        )
        rows.append(
            ["z_test", "ipi: engagement High vs Low", z.z_abs, None, z.p_two_sided,
             "sig@0.05" if z.p_two_sided < 0.05 else "ns", "sig@0.01" if z.p_two_sided < 0.01 else "ns"]
        )

    vpp_groups: dict[int, list[float]] = {}
    vpps = {}
    for v in vwss_list:
        try:
            vpps[(v.student_id, v.video_id)] = ingest.compute_play_proportion(v)
        except ValueError:
            continue
    if len(set(vpps.values())) > 1:
        bins = stats_mod.discretize(list(vpps.values()), "equal_width", 4)
        for (key, _), b in zip(vpps.items(), bins):
            if key in ipi_by_key:
                vpp_groups.setdefault(b, []).append(float(ipi_by_key[key]))
        groups = [g for _, g in sorted(vpp_groups.items()) if len(g) >= 2]
        if len(groups) >= 2:
            anova = stats_mod.one_way_anova(groups)
            rows.append(
                ["anova", "ipi by vpp quartile", anova.f, f"({anova.df_between},{anova.df_within})",
                 None, None, None]
            )
            if not anova.undefined and len(groups) <= 10:
                tk = stats_mod.tukey_hsd(groups, alpha=0.05)
                for i, j, diff, sig in tk.pairs:
                    rows.append(
                        ["tukey_hsd", f"vpp bins {i} vs {j}", diff, None, None,
                         "sig@0.05" if sig else "ns", None]
                    )

    # course dropout (no activity on the last video) vs engagement level
    all_videos = sorted({v.video_id for v in vwss_list})
    last_video = all_videos[-1]
    active_last = {v.student_id for v in vwss_list if v.video_id == last_video}
    table = np.zeros((2, 2))
    for v in vwss_list:
        drop = 0 if v.student_id in active_last else 1
        high = levels[(v.student_id, v.video_id)] == actions_mod.LEVEL_HIGH
        table[drop, 0 if high else 1] += 1
    if np.all(table.sum(axis=0) > 0) and np.all(table.sum(axis=1) > 0):
        chi = stats_mod.chi_square(table)
        rows.append(["chi_square", "dropout x engagement level", chi.chi2, chi.df, None, None, None])
        for i in range(2):
            for j in range(2):
                rows.append(
                    ["chi_square_residual", f"cell[{i},{j}]", float(chi.residuals[i, j]),
                     None, None, None, None]
                )
    write_table(
        out / "stats_report.tsv",
        ["test", "subject", "statistic", "df", "p", "decision_005", "decision_001"],
        rows,
        params,
    )
    print(f"stats: {len(rows)} records -> {out / 'stats_report.tsv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    in_dir = Path(args.input)
    vwss_list = read_vwss_table(in_dir / "vwss.tsv")
    ipi_by_key = _read_ipi(in_dir / "ipi.tsv")
    levels = _engagement_levels_per_video(vwss_list, args.variant)
    all_videos = sorted({v.video_id for v in vwss_list})
    last_video = all_videos[-1]
    active_last = {v.student_id for v in vwss_list if v.video_id == last_video}

    partitions: dict[str, list[float]] = {}
    for v in vwss_list:
        key = (v.student_id, v.video_id)
        if key not in ipi_by_key:
            continue
        score = float(ipi_by_key[key])
        eng = "engagement=" + levels[key]
        drop = "dropout=" + ("no" if v.student_id in active_last else "yes")
        for part in (eng, drop):
            partitions.setdefault(part, []).append(score)

    params = {"cmd": "report", "variant": args.variant}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(
        out / "ipi_by_partition.tsv",
        ["partition", "n", "mean_ipi", "sd_ipi"],
        [
            [name, len(vals), float(np.mean(vals)), float(np.std(vals))]
            for name, vals in sorted(partitions.items())
        ],
        params,
    )
    hist_rows = []
    for name, vals in sorted(partitions.items()):
        counts = {}
        for score in vals:
            counts[int(score)] = counts.get(int(score), 0) + 1
        hist_rows.extend([name, score, counts[score]] for score in sorted(counts))
    write_table(out / "ipi_histogram.tsv", ["partition", "ipi", "count"], hist_rows, params)
    print(f"report: {len(partitions)} partitions -> {out}")
    return EXIT_OK


def cmd_debug_dp(args) -> int:
    p = split_tokens(args.pattern)
    s = split_tokens(args.target)
    wd, wi, ws = (float(x) for x in args.weights.split(","))
    table = wlev_table(p, s, EditWeights(wd, wi, ws))
    header = ["", "eps"] + list(s)
    print("\t".join(header))
    labels = ["eps"] + list(p)
    for i, row in enumerate(table):
        print("\t".join([labels[i]] + [f"{x:.4g}" for x in row]))
    print(f"distance={table[-1, -1]:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidclick", description="video clickstream analytics pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, seed=True, out=True, config=True, variant=False):
        if out:
            p.add_argument("--out-dir", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="random seed")
        if config:
            p.add_argument("--config", default=None, help="pipeline config (JSON)")
        if variant:
            p.add_argument(
                "--variant",
                choices=("full", "pause_seek_only"),
                default="full",
                help="engagement definition",
            )

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="parse an event log into watching-state sequences")
    p.add_argument("--input", required=True, help="events.jsonl")
    p.add_argument("--video-lengths", default=None, help="videos.tsv with lengths")
    p.add_argument("--scroll-window", type=float, default=ingest.DEFAULT_SCROLL_WINDOW)
    common(p, seed=False)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("actions", help="score behavioral actions per sequence")
    p.add_argument("--input", required=True, help="vwss.tsv")
    p.add_argument("--catalog", default=None, help="behavioral catalog config")
    common(p, seed=False)
    p.set_defaults(func=cmd_actions)

    p = sub.add_parser("ipi", help="compute information processing indices")
    p.add_argument("--input", required=True, help="actions.tsv")
    common(p, seed=False)
    p.set_defaults(func=cmd_ipi)

    p = sub.add_parser("cluster", help="Markov and metric clustering")
    p.add_argument("--input", required=True, help="vwss.tsv")
    p.add_argument("--k", type=int, default=8, help="clusters over transition matrices")
    p.add_argument("--vwss-k", type=int, default=4, help="clusters over VWSS metrics")
    p.add_argument("--order", type=int, default=1, help="Markov order")
    p.add_argument("--restarts", type=int, default=8)
    common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predict", help="train/evaluate the classifiers")
    p.add_argument("--task", required=True,
                   choices=("engagement", "next-click", "video-dropout", "course-dropout"))
    p.add_argument("--input", required=True, help="directory with vwss.tsv (+ actions.tsv, ipi.tsv)")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--features", choices=("raw", "actions"), default="raw")
    common(p, variant=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("survival", help="proportional-hazards attrition model")
    p.add_argument("--input", required=True, help="covariate table (e.g. truth_students.tsv)")
    p.add_argument("--model", choices=("cox", "discrete"), default="cox")
    common(p, seed=False)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("sna", help="similarity networks, E-I, QAP")
    p.add_argument("--input", required=True, help="vwss.tsv")
    p.add_argument("--video", default=None, help="video id (default: first)")
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--k", type=int, default=4, help="VWSS metric clusters")
    common(p, variant=True)
    p.set_defaults(func=cmd_sna)

    p = sub.add_parser("stats", help="z/ANOVA/Tukey/chi-square reports")
    p.add_argument("--input", required=True, help="directory with vwss.tsv and ipi.tsv")
    common(p, seed=False, variant=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="per-partition IPI summaries")
    p.add_argument("--input", required=True, help="directory with vwss.tsv and ipi.tsv")
    common(p, seed=False, variant=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("debug-dp", help="print a weighted-edit-distance DP table")
    p.add_argument("--pattern", required=True, help="comma-joined tokens")
    p.add_argument("--target", required=True, help="comma-joined tokens")
    p.add_argument("--weights", default="0.1,1,1", help="w_del,w_ins,w_sub")
    p.set_defaults(func=cmd_debug_dp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"error: missing input file: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except SchemaErrors as exc:
        for e in exc.errors[:50]:
            print(f"line {e.line_no}: {e.message}", file=sys.stderr)
        if len(exc.errors) > 50:
            print(f"... and {len(exc.errors) - 50} more", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
