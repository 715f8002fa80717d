from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import CORPUS, GOLDEN
from policymatch.cli import RunConfig, main
from synth import STEP_BREAKPOINTS, make_step_pairs


def run_pipeline(workdir: Path, extra_args: list[str] | None = None) -> None:
    """Drive ingest -> rewrite -> embed -> build-index -> match -> rank ->
    coverage -> report over the shipped corpus."""
    runner = CliRunner()
    base = extra_args or []

    def invoke(*args):
        result = runner.invoke(main, [*base, *args], catch_exceptions=False)
        assert result.exit_code == 0, result.output
        return result

    invoke(
        "ingest-opps",
        "--input", str(CORPUS / "opportunities.ndjson"),
        "--out", str(workdir / "opportunities.ndjson"),
    )
    invoke(
        "rewrite",
        "--opportunities", str(workdir / "opportunities.ndjson"),
        "--out", str(workdir / "rewritten.ndjson"),
    )
    # publications arrive from the fetch stage in live runs; the corpus file
    # stands in for a recorded fetch here.
    invoke(
        "embed",
        "--rewritten", str(workdir / "rewritten.ndjson"),
        "--publications", str(CORPUS / "publications.ndjson"),
        "--out-dir", str(workdir),
    )
    invoke(
        "build-index",
        "--store", str(workdir / "publications.ovec"),
        "--out", str(workdir / "index.json"),
    )
    invoke(
        "match",
        "--opportunities-store", str(workdir / "opportunities.ovec"),
        "--publications-store", str(workdir / "publications.ovec"),
        "--out", str(workdir / "matches.csv"),
    )
    invoke(
        "rank",
        "--matches", str(workdir / "matches.csv"),
        "--publications", str(CORPUS / "publications.ndjson"),
        "--out", str(workdir / "rankings.csv"),
    )
    invoke(
        "coverage",
        "--matches", str(workdir / "matches.csv"),
        "--publications", str(CORPUS / "publications.ndjson"),
        "--opportunities", str(workdir / "opportunities.ndjson"),
        "--out", str(workdir / "coverage_all.csv"),
    )
    invoke(
        "coverage",
        "--matches", str(workdir / "matches.csv"),
        "--publications", str(CORPUS / "publications.ndjson"),
        "--opportunities", str(workdir / "opportunities.ndjson"),
        "--cofog", "07",
        "--out", str(workdir / "coverage_07.csv"),
    )
    invoke(
        "report",
        "--opportunities", str(workdir / "opportunities.ndjson"),
        "--out-dir", str(workdir / "reports"),
    )


GOLDEN_PAIRS = [
    ("matches.csv", "matches.csv"),
    ("coverage_all.csv", "coverage_all.csv"),
    ("coverage_07.csv", "coverage_07.csv"),
    ("reports/distribution_cofog.csv", "distribution_cofog.csv"),
    ("reports/distribution_country.csv", "distribution_country.csv"),
    ("reports/distribution_opportunity_type.csv", "distribution_opportunity_type.csv"),
]


class TestPipeline:
    def test_reproduces_frozen_goldens(self, tmp_path):
        # Goldens were generated once via the brute-force oracle path; the
        # normal pipeline (optimized search) must reproduce them exactly.
        work = tmp_path / "run"
        work.mkdir()
        run_pipeline(work)
        for produced, golden in GOLDEN_PAIRS:
            assert (work / produced).read_bytes() == (GOLDEN / golden).read_bytes(), produced

    def test_two_runs_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        run_pipeline(a)
        run_pipeline(b)
        for produced, _ in GOLDEN_PAIRS:
            assert (a / produced).read_bytes() == (b / produced).read_bytes(), produced
        assert (a / "rankings.csv").read_bytes() == (b / "rankings.csv").read_bytes()
        assert (a / "publications.ovec").read_bytes() == (b / "publications.ovec").read_bytes()

    def test_health_scope_denominator_counts_only_health(self, tmp_path):
        work = tmp_path / "run"
        work.mkdir()
        run_pipeline(work)
        with open(work / "coverage_07.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(row["scope"] == "07" for row in rows)
        # 8 Health opportunities in the shipped corpus
        assert all(row["n_opportunities"] == "8" for row in rows)

    def test_stage_summaries_written(self, tmp_path):
        work = tmp_path / "run"
        work.mkdir()
        run_pipeline(work)
        summary = json.loads((work / "matches.csv.summary.json").read_text())
        assert summary["stage"] == "match"
        assert summary["config_hash"] == RunConfig().config_hash()
        assert summary["counts"]["records"] > 0
        cov = json.loads((work / "coverage_all.csv.summary.json").read_text())
        assert cov["counts"]["covered_definition"] == "green-only"


class TestConfigChaining:
    def test_mismatched_config_refused(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "opportunities.ndjson"
        result = runner.invoke(
            main,
            ["ingest-opps", "--input", str(CORPUS / "opportunities.ndjson"), "--out", str(out)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        # downstream stage under a different k sees a different config hash
        result = runner.invoke(
            main,
            ["--k", "7", "rewrite", "--opportunities", str(out), "--out", str(tmp_path / "r.ndjson")],
        )
        assert result.exit_code != 0
        assert "config" in result.output

    def test_force_overrides(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "opportunities.ndjson"
        runner.invoke(
            main,
            ["ingest-opps", "--input", str(CORPUS / "opportunities.ndjson"), "--out", str(out)],
            catch_exceptions=False,
        )
        result = runner.invoke(
            main,
            ["--k", "7", "--force", "rewrite", "--opportunities", str(out),
             "--out", str(tmp_path / "r.ndjson")],
            catch_exceptions=False,
        )
        assert result.exit_code == 0


class TestIngestErrors:
    def test_bad_rows_reported(self, tmp_path):
        bad = tmp_path / "bad.ndjson"
        rows = [
            {"id": "a", "title": "T", "description": "Long enough text.", "organisation": "O",
             "country": "GB", "opportunity_type": "Consultation", "cofog": "07",
             "source_url": "https://x"},
            {"id": "b", "title": "T", "description": "Text here too.", "organisation": "O",
             "country": "NOT A COUNTRY", "opportunity_type": "Consultation", "cofog": "07",
             "source_url": "https://x"},
        ]
        bad.write_text("".join(json.dumps(r) + "\n" for r in rows))
        runner = CliRunner()
        out = tmp_path / "out.ndjson"
        result = runner.invoke(
            main, ["ingest-opps", "--input", str(bad), "--out", str(out)], catch_exceptions=False
        )
        assert result.exit_code == 0
        assert "1 rejected" in result.output
        errors = json.loads((tmp_path / "out.ndjson.errors.json").read_text())
        assert errors[0]["line"] == 2

    def test_missing_input_is_usage_error(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main, ["ingest-opps", "--input", str(tmp_path / "nope.ndjson"), "--out", "x"]
        )
        assert result.exit_code != 0


class TestCalibrate:
    def test_recovers_breakpoints(self, tmp_path):
        pairs_path = tmp_path / "pairs.csv"
        with open(pairs_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["opportunity_id", "publication_id", "distance", "relevance", "expertise", "scope"]
            )
            for p in make_step_pairs():
                writer.writerow(
                    [p.opportunity_id, p.publication_id, repr(p.distance),
                     p.scores.relevance, p.scores.expertise, p.scores.scope]
                )
        runner = CliRunner()
        out = tmp_path / "thresholds.json"
        result = runner.invoke(
            main,
            ["calibrate", "--pairs", str(pairs_path), "--grid-step", "0.005",
             "--min-tier-fraction", "0.1", "--out", str(out)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        proposed = json.loads(out.read_text())
        for key, want in zip(("green", "yellow", "orange", "red"), STEP_BREAKPOINTS):
            assert abs(proposed[key] - want) <= 0.005
        assert (tmp_path / "tier_quality.csv").exists()


class TestConfigFile:
    def test_config_file_and_flags_compose(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"k": 25, "from_year": 2021}))
        runner = CliRunner()
        out = tmp_path / "o.ndjson"
        result = runner.invoke(
            main,
            ["--config", str(config), "--k", "10",
             "ingest-opps", "--input", str(CORPUS / "opportunities.ndjson"), "--out", str(out)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        summary = json.loads((tmp_path / "o.ndjson.summary.json").read_text())
        assert summary["config_hash"] == RunConfig(k=10, from_year=2021).config_hash()

    def test_invalid_thresholds_rejected(self):
        runner = CliRunner()
        result = runner.invoke(main, ["--thresholds", "0.3,0.2,0.4,0.5", "ingest-opps",
                                      "--input", "x", "--out", "y"])
        assert result.exit_code != 0
        assert "invalid config" in result.output
