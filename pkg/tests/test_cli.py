"""CLI round trips, exit codes, and byte-level determinism."""

import json
from pathlib import Path

import pytest

from vidclick.cli import EXIT_MISSING_INPUT, EXIT_OK, EXIT_SCHEMA, main, read_table


SPEC = {
    "n_students": 16,
    "n_videos": 4,
    "video_length": 600,
    "seed": 11,
    "archetypes": [
        {"name": "skipper", "fraction": 0.5, "preset": "skipper", "mean_tokens": 35},
        {"name": "rewatcher", "fraction": 0.5, "preset": "rewatcher", "mean_tokens": 35},
    ],
    "hazard": {"baseline_rate": 0.5},
}


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """synth -> encode -> actions -> ipi, shared by the read-only tests."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "cohort.json"
    cfg.write_text(json.dumps(SPEC))
    out = root / "out"
    assert main(["synth", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    assert (
        main(
            [
                "encode",
                "--input",
                str(out / "events.jsonl"),
                "--video-lengths",
                str(out / "videos.tsv"),
                "--out-dir",
                str(out),
            ]
        )
        == EXIT_OK
    )
    assert main(["actions", "--input", str(out / "vwss.tsv"), "--out-dir", str(out)]) == EXIT_OK
    assert main(["ipi", "--input", str(out / "actions.tsv"), "--out-dir", str(out)]) == EXIT_OK
    return out


class TestPipeline:
    def test_encode_row_count_matches_watched_videos(self, pipeline_dir):
        _, truth = read_table(pipeline_dir / "truth_students.tsv")
        expected = sum(int(r[2]) for r in truth)
        _, rows = read_table(pipeline_dir / "vwss.tsv")
        assert len(rows) == expected

    def test_ipi_range_under_default_table(self, pipeline_dir):
        header, rows = read_table(pipeline_dir / "ipi.tsv")
        idx = header.index("ipi")
        values = [int(r[idx]) for r in rows]
        assert all(-12 <= v <= 12 for v in values)
        assert len(set(values)) > 1

    def test_actions_levels_are_dichotomized(self, pipeline_dir):
        header, rows = read_table(pipeline_dir / "actions.tsv")
        level_cols = [i for i, h in enumerate(header) if h.endswith("_level")]
        for i in level_cols:
            seen = {r[i] for r in rows}
            assert seen <= {"High", "Low"}

    def test_cluster_and_report_run(self, pipeline_dir):
        out = pipeline_dir
        assert (
            main(
                [
                    "cluster",
                    "--input",
                    str(out / "vwss.tsv"),
                    "--out-dir",
                    str(out),
                    "--k",
                    "2",
                    "--seed",
                    "3",
                ]
            )
            == EXIT_OK
        )
        _, rows = read_table(out / "markov_clusters.tsv")
        assert {r[1] for r in rows} == {"0", "1"}
        assert main(["report", "--input", str(out), "--out-dir", str(out)]) == EXIT_OK
        header, rows = read_table(out / "ipi_by_partition.tsv")
        assert header[0] == "partition"
        assert len(rows) >= 2

    def test_stats_and_sna_run(self, pipeline_dir):
        out = pipeline_dir
        assert main(["stats", "--input", str(out), "--out-dir", str(out)]) == EXIT_OK
        header, rows = read_table(out / "stats_report.tsv")
        tests = {r[0] for r in rows}
        assert "z_test" in tests or "anova" in tests
        assert (
            main(
                [
                    "sna",
                    "--input",
                    str(out / "vwss.tsv"),
                    "--out-dir",
                    str(out),
                    "--permutations",
                    "49",
                    "--seed",
                    "5",
                ]
            )
            == EXIT_OK
        )
        _, rows = read_table(out / "sna_report.tsv")
        metrics = {r[0] for r in rows}
        assert "density" in metrics and "qap_correlation" in metrics

    def test_survival_runs_on_truth(self, pipeline_dir):
        out = pipeline_dir
        assert (
            main(
                [
                    "survival",
                    "--input",
                    str(out / "truth_students.tsv"),
                    "--out-dir",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        header, rows = read_table(out / "survival.tsv")
        assert header[0] == "covariate"
        assert len(rows) >= 3

    def test_predict_engagement_runs(self, pipeline_dir):
        out = pipeline_dir
        assert (
            main(
                [
                    "predict",
                    "--task",
                    "engagement",
                    "--input",
                    str(out),
                    "--out-dir",
                    str(out),
                    "--folds",
                    "4",
                    "--seed",
                    "2",
                ]
            )
            == EXIT_OK
        )
        header, rows = read_table(out / "predict_engagement.tsv")
        assert rows[-1][0] == "(pooled)"

    @pytest.mark.parametrize("task", ["next-click", "video-dropout", "course-dropout"])
    def test_other_predict_tasks_run(self, pipeline_dir, tmp_path, task):
        cfg = tmp_path / "predict.json"
        cfg.write_text(json.dumps({"max_iter": 800, "lambda": 1.0}))
        code = main(
            [
                "predict",
                "--task",
                task,
                "--input",
                str(pipeline_dir),
                "--out-dir",
                str(tmp_path),
                "--folds",
                "3",
                "--seed",
                "2",
                "--config",
                str(cfg),
            ]
        )
        assert code == EXIT_OK
        slug = task.replace("-", "_")
        header, rows = read_table(tmp_path / f"predict_{slug}.tsv")
        assert rows[-1][0] == "(pooled)"
        assert (tmp_path / f"model_{slug}.tsv").exists()


class TestExitCodes:
    def test_missing_input_gives_2(self, tmp_path):
        code = main(["encode", "--input", str(tmp_path / "nope.jsonl"), "--out-dir", str(tmp_path)])
        assert code == EXIT_MISSING_INPUT

    def test_schema_errors_give_3(self, tmp_path, capsys):
        bad = tmp_path / "events.jsonl"
        bad.write_text(
            '{"student_id": "s", "video_id": "v", "t": 1.0, "event": "play"}\n'
            '{"student_id": "s", "video_id": "v", "t": 2.0, "event": "ratechange"}\n'
        )
        code = main(["encode", "--input", str(bad), "--out-dir", str(tmp_path)])
        assert code == EXIT_SCHEMA
        err = capsys.readouterr().err
        assert "line 2" in err
        assert (tmp_path / "encode_errors.tsv").exists()

    def test_debug_dp_prints_table(self, capsys):
        assert main(["debug-dp", "--pattern", "Pl,Sf", "--target", "Pl,Sf,Rf"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "distance=" in out


class TestDeterminism:
    def run_all(self, root: Path, seed: int) -> dict[str, bytes]:
        root.mkdir(parents=True, exist_ok=True)
        cfg = root / "cohort.json"
        cfg.write_text(json.dumps(dict(SPEC, seed=seed)))
        out = root / "out"
        main(["synth", "--config", str(cfg), "--out-dir", str(out)])
        main(
            [
                "encode",
                "--input",
                str(out / "events.jsonl"),
                "--video-lengths",
                str(out / "videos.tsv"),
                "--out-dir",
                str(out),
            ]
        )
        main(["actions", "--input", str(out / "vwss.tsv"), "--out-dir", str(out)])
        main(["ipi", "--input", str(out / "actions.tsv"), "--out-dir", str(out)])
        main(["cluster", "--input", str(out / "vwss.tsv"), "--out-dir", str(out), "--k", "2", "--seed", "1"])
        main(["report", "--input", str(out), "--out-dir", str(out)])
        return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}

    def test_rerun_is_byte_identical(self, tmp_path):
        a = self.run_all(tmp_path / "a", seed=21)
        b = self.run_all(tmp_path / "b", seed=21)
        assert a.keys() == b.keys()
        for name in a:
            assert a[name] == b[name], f"{name} differs between runs"
