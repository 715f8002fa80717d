"""Read-only HTTP API over atomically published corpus snapshots.

A snapshot is built completely (matching, aggregation, coverage, stats)
before a single reference swap makes it active, so readers never observe
mixed state; the previous snapshot keeps serving until the swap. On disk a
snapshot directory holds the input artifacts plus a manifest, and loading
replays the deterministic build. The service never re-derives analytics
with its own math: every number comes from the owning module's functions.
"""

from __future__ import annotations

import json
import shutil
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse

from . import analytics, matching, openalex, pipeline
from .knn import SearchConfig, build_index
from .model import (
    DEFAULT_THRESHOLDS,
    CofogDivision,
    Opportunity,
    OpportunityType,
    TierThresholds,
    validate_thresholds,
)
from .store import read_store

__all__ = ["SnapshotInputs", "Snapshot", "SnapshotRegistry", "PublishError", "create_app"]

DEFAULT_PAGE_SIZE = 50
MAX_PAGE_SIZE = 200


class PublishError(RuntimeError):
    """A publish stage failed; the previous snapshot remains active."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"publish failed at stage {stage!r}: {cause}")


@dataclass(frozen=True)
class SnapshotInputs:
    opportunities: Path
    publications: Path
    opportunity_vectors: Path
    publication_vectors: Path
    thresholds: TierThresholds = DEFAULT_THRESHOLDS
    k: int = 100
    rewritten: Optional[Path] = None
    policy_documents: Optional[Path] = None
    institutions: Optional[Path] = None


@dataclass
class Snapshot:
    snapshot_id: int
    created_at: float
    thresholds: TierThresholds
    k: int
    opportunities: list[Opportunity]
    opportunities_by_id: dict[str, Opportunity]
    rewrites_by_id: dict[str, pipeline.RewrittenOpportunity]
    publications_by_id: dict[str, openalex.Publication]
    records: list[matching.MatchRecord]
    matches_by_opportunity: dict[str, list[matching.MatchRecord]]
    pub_institutions: dict[str, list[str]]
    pub_authors: dict[str, list[str]]
    coverage_by_scope: dict[str, list[matching.CoverageRow]]
    stats: dict[str, openalex.InstitutionStats]
    institution_names: dict[str, str]
    opportunity_coverage_pct: float
    policy_documents: Optional[analytics.DistributionReport] = None

    def coverage_row(self, institution_id: str, scope: str) -> Optional[matching.CoverageRow]:
        for row in self.coverage_by_scope.get(scope, []):
            if row.institution_id == institution_id:
                return row
        return None


def _stage(name: str):
    class _StageContext:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PublishError):
                raise PublishError(name, exc) from exc
            return False

    return _StageContext()


def build_snapshot(snapshot_id: int, inputs: SnapshotInputs) -> Snapshot:
    """Run the full match pipeline over the input artifacts."""
    validate_thresholds(inputs.thresholds)

    with _stage("load-opportunities"):
        result = pipeline.load_opportunities(inputs.opportunities)
        if result.errors:
            raise ValueError(
                f"{len(result.errors)} invalid opportunity rows, first: {result.errors[0].message}"
            )
        opportunities = result.opportunities
        if not opportunities:
            raise ValueError("no opportunities in input")

    with _stage("load-publications"):
        publications = openalex.read_publications_ndjson(inputs.publications)
        publications_by_id = {p.id: p for p in publications}

    with _stage("rewrite"):
        if inputs.rewritten is not None:
            rewrites = pipeline.read_rewritten_ndjson(inputs.rewritten)
        else:
            provider = pipeline.TemplateRewriter()
            rewrites = [provider.rewrite(o) for o in opportunities]
        rewrites_by_id = {r.opportunity_id: r for r in rewrites}

    with _stage("read-vector-stores"):
        opp_store = read_store(inputs.opportunity_vectors)
        pub_store = read_store(inputs.publication_vectors)

    with _stage("match"):
        index = build_index(pub_store)
        cfg = SearchConfig(k=inputs.k)
        records: list[matching.MatchRecord] = []
        matches_by_opportunity: dict[str, list[matching.MatchRecord]] = {}
        for row, opp_id in enumerate(opp_store.ids):
            recs = matching.match_opportunity(
                opp_id, opp_store.vectors[row], index, inputs.thresholds, cfg
            )
            records.extend(recs)
            matches_by_opportunity[opp_id] = recs

    with _stage("aggregate"):
        pub_institutions = {p.id: list(p.institution_ids) for p in publications}
        pub_authors = {p.id: list(p.author_ids) for p in publications}
        agg = matching.aggregate_institution(records, pub_institutions)
        institutions = sorted({i for insts in pub_institutions.values() for i in insts})

    with _stage("coverage"):
        coverage_by_scope = {
            "all": matching.coverage(agg, opportunities, scope=None, institutions=institutions)
        }
        present = {o.cofog for o in opportunities}
        for division in sorted(present):
            coverage_by_scope[division.code] = matching.coverage(
                agg, opportunities, scope=division, institutions=institutions
            )
        overall = matching.opportunity_coverage(records, opportunities)

    with _stage("stats"):
        matched_counts = matching.count_matched_publications(records, pub_institutions)
        stats = openalex.compute_institution_stats(publications, matched_counts)

    with _stage("extras"):
        names = {}
        if inputs.institutions is not None:
            for row in openalex.read_institutions_csv(inputs.institutions):
                names[row["openalex_id"]] = row["display_name"]
        policy_documents = (
            analytics.load_count_table(inputs.policy_documents)
            if inputs.policy_documents is not None
            else None
        )

    return Snapshot(
        snapshot_id=snapshot_id,
        created_at=time.time(),
        thresholds=inputs.thresholds,
        k=inputs.k,
        opportunities=opportunities,
        opportunities_by_id={o.id: o for o in opportunities},
        rewrites_by_id=rewrites_by_id,
        publications_by_id=publications_by_id,
        records=records,
        matches_by_opportunity=matches_by_opportunity,
        pub_institutions=pub_institutions,
        pub_authors=pub_authors,
        coverage_by_scope=coverage_by_scope,
        stats=stats,
        institution_names=names,
        opportunity_coverage_pct=overall,
        policy_documents=policy_documents,
    )


class SnapshotRegistry:
    """Copy-then-swap snapshot store: many readers, one writer."""

    def __init__(self, data_dir: Path | str):
        self.data_dir = Path(data_dir)
        self._active: Optional[Snapshot] = None
        self._publish_lock = threading.Lock()

    @property
    def active(self) -> Optional[Snapshot]:
        return self._active

    def _snapshots_dir(self) -> Path:
        return self.data_dir / "snapshots"

    def _next_id(self) -> int:
        root = self._snapshots_dir()
        if not root.exists():
            return 1
        existing = [int(p.name) for p in root.iterdir() if p.name.isdigit()]
        return max(existing, default=0) + 1

    def _persist(self, snapshot_id: int, inputs: SnapshotInputs) -> SnapshotInputs:
        """Copy input artifacts into the snapshot directory with a manifest."""
        target = self._snapshots_dir() / str(snapshot_id)
        target.mkdir(parents=True, exist_ok=True)
        mapping = {}
        for name in (
            "opportunities",
            "publications",
            "opportunity_vectors",
            "publication_vectors",
            "rewritten",
            "policy_documents",
            "institutions",
        ):
            source: Optional[Path] = getattr(inputs, name)
            if source is None:
                mapping[name] = None
                continue
            dest = target / (name + Path(source).suffix)
            shutil.copyfile(source, dest)
            mapping[name] = dest.name
        manifest = {
            "snapshot_id": snapshot_id,
            "k": inputs.k,
            "thresholds": {
                "green": inputs.thresholds.green,
                "yellow": inputs.thresholds.yellow,
                "orange": inputs.thresholds.orange,
                "red": inputs.thresholds.red,
            },
            "files": mapping,
        }
        (target / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return self._inputs_from_manifest(target, manifest)

    @staticmethod
    def _inputs_from_manifest(target: Path, manifest: dict) -> SnapshotInputs:
        files = manifest["files"]

        def path_of(name: str) -> Optional[Path]:
            return target / files[name] if files.get(name) else None

        t = manifest["thresholds"]
        return SnapshotInputs(
            opportunities=path_of("opportunities"),
            publications=path_of("publications"),
            opportunity_vectors=path_of("opportunity_vectors"),
            publication_vectors=path_of("publication_vectors"),
            thresholds=TierThresholds(t["green"], t["yellow"], t["orange"], t["red"]),
            k=manifest["k"],
            rewritten=path_of("rewritten"),
            policy_documents=path_of("policy_documents"),
            institutions=path_of("institutions"),
        )

    def publish(self, inputs: SnapshotInputs) -> int:
        """Build, persist and atomically activate a new snapshot.

        Any failure leaves the previous snapshot active and removes the
        partially written directory.
        """
        with self._publish_lock:
            snapshot_id = self._next_id()
            target = self._snapshots_dir() / str(snapshot_id)
            try:
                with _stage("persist"):
                    persisted = self._persist(snapshot_id, inputs)
                snapshot = build_snapshot(snapshot_id, persisted)
                with _stage("activate"):
                    pointer = self.data_dir / "current"
                    tmp = self.data_dir / "current.tmp"
                    tmp.write_text(str(snapshot_id))
                    tmp.replace(pointer)
            except PublishError:
                shutil.rmtree(target, ignore_errors=True)
                raise
            except Exception as exc:  # pragma: no cover - defensive
                shutil.rmtree(target, ignore_errors=True)
                raise PublishError("unknown", exc) from exc
            self._active = snapshot  # single atomic reference swap
            return snapshot_id

    def load_active(self) -> Optional[Snapshot]:
        """Load the pointed-at snapshot from disk (replays the build)."""
        pointer = self.data_dir / "current"
        if not pointer.exists():
            return None
        snapshot_id = int(pointer.read_text().strip())
        target = self._snapshots_dir() / str(snapshot_id)
        manifest = json.loads((target / "manifest.json").read_text())
        inputs = self._inputs_from_manifest(target, manifest)
        snapshot = build_snapshot(snapshot_id, inputs)
        self._active = snapshot
        return snapshot


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, fieldname: Optional[str] = None):
        self.status = status
        self.code = code
        self.message = message
        self.fieldname = fieldname
        super().__init__(message)


def _opportunity_json(o: Opportunity) -> dict:
    payload = pipeline.opportunity_to_dict(o)
    payload["cofog_label"] = o.cofog.label
    return payload


def _rewrite_json(r: pipeline.RewrittenOpportunity) -> dict:
    return {
        "opportunity_id": r.opportunity_id,
        "rewritten_title": r.rewritten_title,
        "background": r.background,
        "research_questions": list(r.research_questions),
        "keywords": list(r.keywords),
        "cofog": r.cofog.code,
    }


def _coverage_json(row: matching.CoverageRow) -> dict:
    return {
        "institution_id": row.institution_id,
        "scope": row.scope,
        "n_opportunities": row.n_opportunities,
        "n_covered": row.n_covered,
        "coverage_pct": row.coverage_pct,
    }


def _report_json(report: analytics.DistributionReport) -> dict:
    return {
        "dimension": report.dimension,
        "total": report.total,
        "buckets": [
            {"label": b.label, "count": b.count, "pct": b.pct} for b in report.buckets
        ],
    }


def create_app(registry: SnapshotRegistry) -> FastAPI:
    app = FastAPI(title="policymatch", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        body = {"error": {"code": exc.code, "message": exc.message}}
        if exc.fieldname:
            body["error"]["field"] = exc.fieldname
        return JSONResponse(status_code=exc.status, content=body)

    def snap() -> Snapshot:
        snapshot = registry.active
        if snapshot is None:
            raise ApiError(404, "no_snapshot", "no snapshot has been published")
        return snapshot

    def parse_cofog(value: Optional[str], fieldname: str) -> Optional[CofogDivision]:
        if value in (None, ""):
            return None
        try:
            return CofogDivision.parse(value)
        except ValueError as exc:
            raise ApiError(400, "invalid_filter", str(exc), fieldname=fieldname)

    def parse_type(value: Optional[str], fieldname: str = "type") -> Optional[OpportunityType]:
        if value in (None, ""):
            return None
        try:
            return OpportunityType.parse(value)
        except ValueError as exc:
            raise ApiError(400, "invalid_filter", str(exc), fieldname=fieldname)

    @app.get("/opportunities")
    def list_opportunities(
        country: Optional[str] = None,
        cofog: Optional[str] = None,
        type: Optional[str] = None,
        q: Optional[str] = None,
        cursor: Optional[str] = None,
        limit: int = DEFAULT_PAGE_SIZE,
    ):
        s = snap()
        division = parse_cofog(cofog, "cofog")
        opp_type = parse_type(type)
        if not 1 <= limit <= MAX_PAGE_SIZE:
            raise ApiError(400, "invalid_filter", f"limit must be 1..{MAX_PAGE_SIZE}", "limit")
        needle = q.lower() if q else None
        selected = [
            o
            for o in s.opportunities
            if (country is None or o.country == country)
            and (division is None or o.cofog == division)
            and (opp_type is None or o.opportunity_type == opp_type)
            and (needle is None or needle in o.title.lower() or needle in o.description.lower())
        ]
        selected.sort(key=lambda o: o.id)
        if cursor:
            selected = [o for o in selected if o.id > cursor]
        page = selected[:limit]
        next_cursor = page[-1].id if len(selected) > limit else None
        return {
            "items": [_opportunity_json(o) for o in page],
            "next_cursor": next_cursor,
            "total": len(selected) if cursor is None else None,
        }

    @app.get("/opportunities/{opportunity_id}")
    def get_opportunity(opportunity_id: str):
        s = snap()
        opp = s.opportunities_by_id.get(opportunity_id)
        if opp is None:
            raise ApiError(404, "not_found", f"unknown opportunity {opportunity_id!r}")
        rewrite = s.rewrites_by_id.get(opportunity_id)
        return {
            "opportunity": _opportunity_json(opp),
            "rewrite": _rewrite_json(rewrite) if rewrite else None,
        }

    @app.get("/opportunities/{opportunity_id}/matches")
    def get_matches(opportunity_id: str):
        s = snap()
        if opportunity_id not in s.opportunities_by_id:
            raise ApiError(404, "not_found", f"unknown opportunity {opportunity_id!r}")
        items = []
        for rec in s.matches_by_opportunity.get(opportunity_id, []):
            pub = s.publications_by_id.get(rec.publication_id)
            items.append(
                {
                    "publication_id": rec.publication_id,
                    "title": pub.title if pub else None,
                    "distance": rec.distance,
                    "tier": rec.tier.label,
                }
            )
        return {"opportunity_id": opportunity_id, "items": items}

    @app.get("/opportunities/{opportunity_id}/researchers")
    def get_researchers(opportunity_id: str):
        s = snap()
        if opportunity_id not in s.opportunities_by_id:
            raise ApiError(404, "not_found", f"unknown opportunity {opportunity_id!r}")
        records = s.matches_by_opportunity.get(opportunity_id, [])
        ranked = matching.rank_researchers(records, s.pub_authors)
        return {
            "opportunity_id": opportunity_id,
            "items": [
                {
                    "author_id": r.author_id,
                    "matched_work_count": r.matched_work_count,
                    "best_distance": r.best_distance,
                    "rank": r.rank,
                }
                for r in ranked
            ],
        }

    @app.get("/institutions")
    def list_institutions():
        s = snap()
        all_cov = {row.institution_id: row for row in s.coverage_by_scope.get("all", [])}
        items = []
        for inst_id in sorted(s.stats):
            stat = s.stats[inst_id]
            cov = all_cov.get(inst_id)
            items.append(
                {
                    "institution_id": inst_id,
                    "display_name": s.institution_names.get(inst_id, inst_id),
                    "n_publications": stat.n_publications,
                    "n_with_abstracts": stat.n_with_abstracts,
                    "n_matched": stat.n_matched,
                    "coverage_pct": cov.coverage_pct if cov else None,
                }
            )
        return {"items": items, "opportunity_coverage_pct": s.opportunity_coverage_pct}

    @app.get("/institutions/{institution_id}/coverage")
    def get_coverage(institution_id: str, cofog: Optional[str] = None):
        s = snap()
        division = parse_cofog(cofog, "cofog")
        scope = "all" if division is None else division.code
        if scope not in s.coverage_by_scope:
            raise ApiError(
                400, "invalid_filter", f"no opportunities in scope {scope}", "cofog"
            )
        row = s.coverage_row(institution_id, scope)
        if row is None:
            raise ApiError(404, "not_found", f"unknown institution {institution_id!r}")
        return _coverage_json(row)

    @app.get("/analytics/distribution")
    def get_distribution(
        by: str = "cofog",
        country: Optional[str] = None,
        type: Optional[str] = None,
        cofog: Optional[str] = None,
    ):
        s = snap()
        opp_type = parse_type(type)
        division = parse_cofog(cofog, "cofog")
        if by not in analytics.DIMENSIONS:
            raise ApiError(400, "invalid_filter", f"unknown dimension {by!r}", "by")
        try:
            report = analytics.distribution(
                s.opportunities,
                by=by,
                country=country,
                opportunity_type=opp_type,
                cofog=division,
            )
        except ValueError as exc:
            raise ApiError(400, "invalid_filter", str(exc), "by")
        return _report_json(report)

    def _dataset_report(s: Snapshot, name: str, country: Optional[str], opp_type: Optional[str], side: str):
        if name == "opportunities":
            try:
                return analytics.distribution(
                    s.opportunities,
                    by="cofog",
                    country=country,
                    opportunity_type=parse_type(opp_type, f"{side}_type"),
                )
            except ValueError as exc:
                raise ApiError(400, "invalid_filter", str(exc), side)
        if name == "policy-documents":
            if s.policy_documents is None:
                raise ApiError(400, "invalid_filter", "no policy-document table published", side)
            return s.policy_documents
        raise ApiError(400, "invalid_filter", f"unknown dataset {name!r}", side)

    @app.get("/analytics/compare")
    def get_compare(
        dimension: str = "cofog",
        a: str = "opportunities",
        b: str = "policy-documents",
        a_country: Optional[str] = None,
        b_country: Optional[str] = None,
        a_type: Optional[str] = None,
        b_type: Optional[str] = None,
    ):
        s = snap()
        if dimension != "cofog":
            raise ApiError(400, "invalid_filter", "only cofog comparisons are supported", "dimension")
        report_a = _dataset_report(s, a, a_country, a_type, "a")
        report_b = _dataset_report(s, b, b_country, b_type, "b")
        rows = analytics.compare_distributions(report_a, report_b)
        return {
            "dimension": dimension,
            "rows": [
                {"label": r.label, "pct_a": r.pct_a, "pct_b": r.pct_b, "delta": r.delta}
                for r in rows
            ],
        }

    @app.get("/analytics/scatter")
    def get_scatter(mode: str = "coverage", cofog: Optional[str] = None):
        s = snap()
        division = parse_cofog(cofog, "cofog")
        scope = "all" if division is None else division.code
        if mode not in ("absolute", "coverage"):
            raise ApiError(400, "invalid_filter", f"unknown mode {mode!r}", "mode")
        if mode == "coverage" and scope not in s.coverage_by_scope:
            raise ApiError(400, "invalid_filter", f"no coverage for scope {scope}", "cofog")
        points = analytics.scatter(
            s.stats,
            coverage_rows=s.coverage_by_scope.get(scope),
            mode=mode,
            scope=scope,
        )
        return {
            "mode": mode,
            "scope": scope,
            "points": [
                {"institution_id": p.institution_id, "x": p.x, "y": p.y, "scope": p.scope}
                for p in points
            ],
        }

    @app.post("/admin/publish")
    async def admin_publish(
        opportunities: UploadFile,
        publications: UploadFile,
        opportunity_vectors: UploadFile,
        publication_vectors: UploadFile,
        rewritten: Optional[UploadFile] = None,
        policy_documents: Optional[UploadFile] = None,
        institutions: Optional[UploadFile] = None,
        thresholds: Optional[UploadFile] = None,
    ):
        inbox = registry.data_dir / "inbox" / str(int(time.time() * 1000))
        inbox.mkdir(parents=True, exist_ok=True)

        async def save(upload: Optional[UploadFile], name: str) -> Optional[Path]:
            if upload is None:
                return None
            dest = inbox / name
            dest.write_bytes(await upload.read())
            return dest

        tiers = DEFAULT_THRESHOLDS
        thresholds_path = await save(thresholds, "thresholds.json")
        if thresholds_path is not None:
            raw = json.loads(thresholds_path.read_text())
            tiers = TierThresholds(raw["green"], raw["yellow"], raw["orange"], raw["red"])
        inputs = SnapshotInputs(
            opportunities=await save(opportunities, "opportunities.ndjson"),
            publications=await save(publications, "publications.ndjson"),
            opportunity_vectors=await save(opportunity_vectors, "opportunities.ovec"),
            publication_vectors=await save(publication_vectors, "publications.ovec"),
            thresholds=tiers,
            rewritten=await save(rewritten, "rewritten.ndjson"),
            policy_documents=await save(policy_documents, "policy_documents.csv"),
            institutions=await save(institutions, "institutions.csv"),
        )
        try:
            snapshot_id = registry.publish(inputs)
        except PublishError as exc:
            raise ApiError(400, "publish_failed", f"stage {exc.stage}: {exc.cause}")
        finally:
            shutil.rmtree(inbox, ignore_errors=True)
        return {"snapshot_id": snapshot_id}

    return app
