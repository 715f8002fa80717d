"""Operator CLI driving every pipeline stage end to end.

Stages communicate only via files so any stage can be re-run in isolation.
Each stage writes a machine-readable summary (counts, timing, config hash)
next to its primary artifact; downstream stages refuse inputs produced
under a different config unless --force. Defaults mirror the reference
configuration: k=100, thresholds 0.288/0.309/0.334/0.39, window 2020-2025,
mock embedder.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from . import analytics, calibration, matching, openalex, pipeline
from .cofog import default_cofog_classifier
from .embedding import MockTextEmbedder, RemoteEmbedder, embed
from .knn import SearchConfig, build_index
from .model import DEFAULT_THRESHOLDS, CofogDivision, TierThresholds, validate_thresholds
from .store import VectorStore, read_store, write_store

__all__ = ["main", "RunConfig"]


@dataclass(frozen=True)
class RunConfig:
    """Reproducible run parameters; the hash chains stages together."""

    k: int = 100
    green: float = DEFAULT_THRESHOLDS.green
    yellow: float = DEFAULT_THRESHOLDS.yellow
    orange: float = DEFAULT_THRESHOLDS.orange
    red: float = DEFAULT_THRESHOLDS.red
    from_year: int = 2020
    to_year: int = 2025
    embedder: str = "mock"
    embedder_endpoint: Optional[str] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.embedder not in ("mock", "remote"):
            raise ValueError(f"unknown embedder: {self.embedder!r}")
        validate_thresholds(self.thresholds)

    @property
    def thresholds(self) -> TierThresholds:
        return TierThresholds(self.green, self.yellow, self.orange, self.red)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "green": self.green,
            "yellow": self.yellow,
            "orange": self.orange,
            "red": self.red,
            "from_year": self.from_year,
            "to_year": self.to_year,
            "embedder": self.embedder,
            "embedder_endpoint": self.embedder_endpoint,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _summary_path(artifact: Path) -> Path:
    return artifact.with_name(artifact.name + ".summary.json")


def _write_summary(artifact: Path, stage: str, config: RunConfig, counts: dict, started: float):
    payload = {
        "stage": stage,
        "config_hash": config.config_hash(),
        "counts": counts,
        "elapsed_s": round(time.perf_counter() - started, 6),
    }
    _summary_path(artifact).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _check_upstream(artifact: Path, config: RunConfig, force: bool) -> None:
    """Refuse an input whose producing stage ran under a different config."""
    summary = _summary_path(artifact)
    if not summary.exists():
        return  # raw user input, nothing to chain against
    recorded = json.loads(summary.read_text()).get("config_hash")
    if recorded != config.config_hash() and not force:
        raise click.ClickException(
            f"{artifact}: produced under config {recorded[:12]}..., current is "
            f"{config.config_hash()[:12]}...; rerun upstream or pass --force"
        )


def _make_embedder(config: RunConfig):
    if config.embedder == "mock":
        return MockTextEmbedder()
    if not config.embedder_endpoint:
        raise click.ClickException("--embedder remote requires an endpoint in the config file")
    return RemoteEmbedder(config.embedder_endpoint)


def _load_config(ctx) -> RunConfig:
    return ctx.obj["config"]


def _parse_thresholds(value: str) -> tuple[float, float, float, float]:
    parts = value.split(",")
    if len(parts) != 4:
        raise click.BadParameter("expected g,y,o,r")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None, help="JSON config file.")
@click.option("--k", type=int, default=None, help="Top-k retrieval depth (default 100).")
@click.option("--thresholds", default=None, help="Tier cut-points g,y,o,r.")
@click.option("--from-year", type=int, default=None)
@click.option("--to-year", type=int, default=None)
@click.option("--embedder", type=click.Choice(["mock", "remote"]), default=None)
@click.option("--force", is_flag=True, help="Ignore config-hash mismatches on inputs.")
@click.pass_context
def main(ctx, config_path, k, thresholds, from_year, to_year, embedder, force):
    """Pipeline for matching policy opportunities to publications."""
    base = json.loads(config_path.read_text()) if config_path else {}
    if k is not None:
        base["k"] = k
    if thresholds is not None:
        g, y, o, r = _parse_thresholds(thresholds)
        base.update({"green": g, "yellow": y, "orange": o, "red": r})
    if from_year is not None:
        base["from_year"] = from_year
    if to_year is not None:
        base["to_year"] = to_year
    if embedder is not None:
        base["embedder"] = embedder
    try:
        config = RunConfig(**base)
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"invalid config: {exc}")
    ctx.obj = {"config": config, "force": force}


@main.command("ingest-opps")
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["ndjson", "csv"]), default="ndjson")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def ingest_opps(ctx, input_path: Path, fmt: str, out: Path):
    """Validate raw opportunities into a canonical NDJSON artifact."""
    config = _load_config(ctx)
    started = time.perf_counter()
    result = pipeline.load_opportunities(input_path, format=fmt, classifier=None)
    out.parent.mkdir(parents=True, exist_ok=True)
    pipeline.write_opportunities_ndjson(result.opportunities, out)
    counts = {"accepted": len(result.opportunities), "rejected": len(result.errors)}
    if result.errors:
        errors_path = out.with_name(out.name + ".errors.json")
        errors_path.write_text(
            json.dumps(
                [{"line": e.line, "message": e.message} for e in result.errors],
                indent=2,
            )
            + "\n"
        )
        click.echo(f"row errors written to {errors_path}", err=True)
    _write_summary(out, "ingest-opps", config, counts, started)
    click.echo(f"ingested {counts['accepted']} opportunities ({counts['rejected']} rejected)")
    if not result.opportunities:
        raise click.ClickException("no valid opportunities ingested")


@main.command("fetch-openalex")
@click.option("--institutions", type=click.Path(exists=True, path_type=Path), default=None,
              help="CSV of openalex_id,display_name,country (default: shipped UK list).")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None)
@click.option("--mailto", default=None, help="Polite-pool email (or set OPENALEX_MAILTO).")
@click.pass_context
def fetch_openalex(ctx, institutions: Optional[Path], out: Path, cache_dir: Optional[Path], mailto: Optional[str]):
    """Fetch works for each institution over the configured year window."""
    config = _load_config(ctx)
    started = time.perf_counter()
    rows = openalex.read_institutions_csv(institutions)
    client = openalex.OpenAlexClient(mailto=mailto, cache_dir=cache_dir)
    window = openalex.FetchWindow(config.from_year, config.to_year)
    pubs: list[openalex.Publication] = []
    for row in rows:
        inst_id = row["openalex_id"]
        if inst_id.startswith("local:"):
            raise click.ClickException(
                f"institution {row['display_name']!r} has placeholder id {inst_id}; "
                "substitute a real OpenAlex institution id before fetching"
            )
        pubs.extend(client.fetch_institution_works(inst_id, window))
    out.parent.mkdir(parents=True, exist_ok=True)
    openalex.write_publications_ndjson(pubs, out)
    _write_summary(out, "fetch-openalex", config, {"works": len(pubs), "institutions": len(rows)}, started)
    click.echo(f"fetched {len(pubs)} works for {len(rows)} institutions")


@main.command("rewrite")
@click.option("--opportunities", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def rewrite(ctx, opportunities: Path, out: Path):
    """Rewrite opportunities into the research-oriented schema (template provider)."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(opportunities, config, force)
    result = pipeline.load_opportunities(opportunities)
    if result.errors:
        raise click.ClickException(f"{opportunities} has invalid rows; re-run ingest-opps")
    provider = pipeline.TemplateRewriter()
    rewrites = [provider.rewrite(o) for o in result.opportunities]
    out.parent.mkdir(parents=True, exist_ok=True)
    pipeline.write_rewritten_ndjson(rewrites, out)
    _write_summary(out, "rewrite", config, {"rewritten": len(rewrites)}, started)
    click.echo(f"rewrote {len(rewrites)} opportunities")


@main.command("embed")
@click.option("--rewritten", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--publications", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.pass_context
def embed_cmd(ctx, rewritten: Path, publications: Path, out_dir: Path):
    """Embed opportunity and publication texts into *.ovec stores."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(rewritten, config, force)
    _check_upstream(publications, config, force)
    provider = _make_embedder(config)

    rewrites = pipeline.read_rewritten_ndjson(rewritten)
    opp_texts = [pipeline.compose_opportunity_text(r) for r in rewrites]
    opp_ids = [r.opportunity_id for r in rewrites]

    pubs = openalex.filter_publications(openalex.read_publications_ndjson(publications))
    embeddable = [p for p in pubs if openalex.usable_abstract(p)]
    pub_texts = [openalex.compose_publication_text(p) for p in embeddable]
    pub_ids = [p.id for p in embeddable]

    out_dir.mkdir(parents=True, exist_ok=True)
    opp_store_path = out_dir / "opportunities.ovec"
    pub_store_path = out_dir / "publications.ovec"
    write_store(VectorStore(embed(opp_texts, provider), tuple(opp_ids)), opp_store_path)
    write_store(VectorStore(embed(pub_texts, provider), tuple(pub_ids)), pub_store_path)

    counts = {
        "opportunities": len(opp_ids),
        "publications_total": len(pubs),
        "publications_embedded": len(pub_ids),
    }
    _write_summary(opp_store_path, "embed", config, counts, started)
    _write_summary(pub_store_path, "embed", config, counts, started)
    click.echo(
        f"embedded {len(opp_ids)} opportunities and {len(pub_ids)} publications "
        f"({len(pubs) - len(pub_ids)} without usable abstracts kept for stats only)"
    )


@main.command("build-index")
@click.option("--store", "store_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def build_index_cmd(ctx, store_path: Path, out: Path):
    """Validate a vector store and emit an index manifest for it."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(store_path, config, force)
    store = read_store(store_path)
    index = build_index(store)  # fails on empty store
    digest = hashlib.sha256(store_path.read_bytes()).hexdigest()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(
            {"store": store_path.name, "sha256": digest, "count": index.size, "dim": store.dim},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    _write_summary(out, "build-index", config, {"vectors": index.size}, started)
    click.echo(f"index over {index.size} vectors validated")


@main.command("match")
@click.option("--opportunities-store", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--publications-store", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def match_cmd(ctx, opportunities_store: Path, publications_store: Path, out: Path):
    """Top-k search each opportunity against publications and tier the hits."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(opportunities_store, config, force)
    _check_upstream(publications_store, config, force)

    opp_store = read_store(opportunities_store)
    pub_store = read_store(publications_store)
    index = build_index(pub_store)
    cfg = SearchConfig(k=config.k)
    records: list[matching.MatchRecord] = []
    for row, opp_id in enumerate(opp_store.ids):
        records.extend(
            matching.match_opportunity(opp_id, opp_store.vectors[row], index, config.thresholds, cfg)
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    matching.write_matches_csv(records, out)
    tier_counts = {t.label: 0 for t in matching.Tier}
    for r in records:
        tier_counts[r.tier.label] += 1
    _write_summary(out, "match", config, {"records": len(records), **tier_counts}, started)
    click.echo(f"matched: {len(records)} records within thresholds")


@main.command("rank")
@click.option("--matches", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--publications", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def rank_cmd(ctx, matches: Path, publications: Path, out: Path):
    """Rank researchers per opportunity from the matched set."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(matches, config, force)
    _check_upstream(publications, config, force)
    records = matching.read_matches_csv(matches)
    pubs = openalex.read_publications_ndjson(publications)
    authorship = {p.id: list(p.author_ids) for p in pubs}
    by_opp: dict[str, list[matching.MatchRecord]] = {}
    for r in records:
        by_opp.setdefault(r.opportunity_id, []).append(r)
    out.parent.mkdir(parents=True, exist_ok=True)
    n_rows = 0
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["opportunity_id", "author_id", "matched_work_count", "best_distance", "rank"])
        for opp_id in sorted(by_opp):
            for rr in matching.rank_researchers(by_opp[opp_id], authorship):
                writer.writerow(
                    [opp_id, rr.author_id, rr.matched_work_count, f"{rr.best_distance:.6f}", rr.rank]
                )
                n_rows += 1
    _write_summary(out, "rank", config, {"rows": n_rows, "opportunities": len(by_opp)}, started)
    click.echo(f"ranked researchers for {len(by_opp)} opportunities")


@main.command("coverage")
@click.option("--matches", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--publications", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--opportunities", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--cofog", "cofog_code", default=None, help="Restrict to one COFOG division.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def coverage_cmd(ctx, matches: Path, publications: Path, opportunities: Path, cofog_code, out: Path):
    """Per-institution Green coverage of (in-scope) opportunities."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    for artifact in (matches, publications, opportunities):
        _check_upstream(artifact, config, force)
    records = matching.read_matches_csv(matches)
    pubs = openalex.read_publications_ndjson(publications)
    opps = pipeline.load_opportunities(opportunities).opportunities
    pub_inst = {p.id: list(p.institution_ids) for p in pubs}
    scope = CofogDivision.parse(cofog_code) if cofog_code else None
    agg = matching.aggregate_institution(records, pub_inst)
    institutions = sorted({i for insts in pub_inst.values() for i in insts})
    rows = matching.coverage(agg, opps, scope=scope, institutions=institutions)
    out.parent.mkdir(parents=True, exist_ok=True)
    matching.write_coverage_csv(rows, out)
    overall = matching.opportunity_coverage(records, opps)
    _write_summary(
        out,
        "coverage",
        config,
        {
            "institutions": len(rows),
            "scope": "all" if scope is None else scope.code,
            "opportunity_coverage_pct": overall,
            "covered_definition": "green-only",
        },
        started,
    )
    click.echo(f"coverage for {len(rows)} institutions (overall green coverage {overall:.1f}%)")


@main.command("report")
@click.option("--opportunities", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--country", default=None)
@click.option("--type", "opp_type", default=None)
@click.pass_context
def report_cmd(ctx, opportunities: Path, out_dir: Path, country, opp_type):
    """Distribution reports over the opportunity corpus (CSV + JSON)."""
    config = _load_config(ctx)
    force = ctx.obj["force"]
    started = time.perf_counter()
    _check_upstream(opportunities, config, force)
    opps = pipeline.load_opportunities(opportunities).opportunities
    from .model import OpportunityType

    parsed_type = OpportunityType.parse(opp_type) if opp_type else None
    out_dir.mkdir(parents=True, exist_ok=True)
    first = None
    for dimension in analytics.DIMENSIONS:
        report = analytics.distribution(
            opps, by=dimension, country=country, opportunity_type=parsed_type
        )
        analytics.export_report(report, out_dir / f"distribution_{dimension}.csv", "csv")
        analytics.export_report(report, out_dir / f"distribution_{dimension}.json", "json")
        if first is None:
            first = out_dir / f"distribution_{dimension}.csv"
    _write_summary(first, "report", config, {"records": len(opps)}, started)
    click.echo(f"reports written to {out_dir}")


@main.command("calibrate")
@click.option("--pairs", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--grid-step", type=float, default=0.005, show_default=True)
@click.option("--min-tier-fraction", type=float, default=0.05, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_context
def calibrate_cmd(ctx, pairs: Path, grid_step: float, min_tier_fraction: float, out: Path):
    """Propose tier thresholds from labeled pairs; write thresholds + quality table."""
    config = _load_config(ctx)
    started = time.perf_counter()
    scored = calibration.read_scored_pairs(pairs)
    try:
        proposed = calibration.propose_thresholds(scored, grid_step, min_tier_fraction)
    except calibration.InfeasibleThresholds as exc:
        raise click.ClickException(f"infeasible ({exc.constraint}): {exc}")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(
            {"green": proposed.green, "yellow": proposed.yellow,
             "orange": proposed.orange, "red": proposed.red},
            indent=2, sort_keys=True,
        )
        + "\n"
    )
    table = calibration.evaluate_tiers(scored, proposed)
    calibration.write_tier_table_csv(table, out.with_name("tier_quality.csv"))
    _write_summary(out, "calibrate", config, {"pairs": len(scored)}, started)
    click.echo(
        f"proposed thresholds {proposed.green:.4f}/{proposed.yellow:.4f}"
        f"/{proposed.orange:.4f}/{proposed.red:.4f}"
    )


@main.command("serve")
@click.option("--data-dir", type=click.Path(path_type=Path), required=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
def serve_cmd(ctx, data_dir: Path, port: int, host: str):
    """Serve the read-only HTTP API over the published snapshots."""
    import uvicorn

    from .service import SnapshotRegistry, create_app

    registry = SnapshotRegistry(data_dir)
    registry.load_active()
    app = create_app(registry)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main(prog_name="policymatch")
