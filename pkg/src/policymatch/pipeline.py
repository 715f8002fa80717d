"""Opportunity ingestion, research-oriented rewriting, and text composition.

Loading is single-pass and order-preserving; malformed rows are collected
per line in an error report while the stream continues. Rewriting runs
behind a provider interface: production uses a remote generative model,
while all tests and the acceptance path use the deterministic template
provider (same structured output schema, pure function of the input).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable, Optional, Protocol, Sequence, Union

from .embedding import tokenize
from .model import (
    CofogDivision,
    Opportunity,
    OpportunityType,
    Violation,
    parse_country,
    validate_opportunity,
)

__all__ = [
    "RewrittenOpportunity",
    "RowError",
    "LoadResult",
    "TemplateRewriter",
    "RemoteRewriter",
    "RetryableRewriteError",
    "RewriteSchemaError",
    "load_opportunities",
    "rewrite_opportunity",
    "compose_opportunity_text",
    "write_opportunities_ndjson",
    "opportunity_to_dict",
    "load_stopwords",
    "write_rewritten_ndjson",
    "read_rewritten_ndjson",
]

OPPORTUNITY_PREFIX = "[OPPORTUNITY] "

_QUESTION_RE = re.compile(r"[^.?!]*\?")


@dataclass(frozen=True)
class RewrittenOpportunity:
    """Structured research-oriented rewrite of an opportunity.

    Keywords are canonicalised (lowercase, deduplicated, order-preserving)
    at construction; at least one research question is required.
    """

    opportunity_id: str
    rewritten_title: str
    background: str
    research_questions: tuple[str, ...]
    keywords: tuple[str, ...]
    cofog: CofogDivision

    def __post_init__(self):
        questions = tuple(self.research_questions)
        if not questions:
            raise ValueError("research_questions must have at least one entry")
        object.__setattr__(self, "research_questions", questions)
        seen = []
        for kw in self.keywords:
            low = kw.lower()
            if low not in seen:
                seen.append(low)
        object.__setattr__(self, "keywords", tuple(seen))


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class LoadResult:
    opportunities: list[Opportunity]
    errors: list[RowError]

    @property
    def ok(self) -> bool:
        return not self.errors


def _parse_date(value: object, field: str) -> Optional[dt.date]:
    if value in (None, ""):
        return None
    if not isinstance(value, str):
        raise ValueError(f"{field}: expected ISO-8601 date string, got {value!r}")
    return dt.date.fromisoformat(value)


def _row_to_opportunity(
    row: dict, classifier: Optional[Callable[[str], CofogDivision]]
) -> Opportunity:
    country_raw = str(row.get("country", "") or "")
    country = parse_country(country_raw) if country_raw.strip() else ""
    opp_type = OpportunityType.parse(row.get("opportunity_type"), country=country)
    title = str(row.get("title", "") or "")
    description = str(row.get("description", "") or "")

    cofog_raw = row.get("cofog")
    if cofog_raw not in (None, ""):
        cofog = CofogDivision.parse(cofog_raw)
    else:
        if classifier is None:
            from .cofog import default_classify

            classifier = default_classify
        cofog = classifier(f"{title}\n{description}")

    return Opportunity(
        id=str(row.get("id", "") or ""),
        title=title,
        description=description,
        organisation=str(row.get("organisation", "") or ""),
        country=country,
        opportunity_type=opp_type,
        cofog=cofog,
        source_url=str(row.get("source_url", "") or ""),
        contact=row.get("contact") or None,
        deadline=_parse_date(row.get("deadline"), "deadline"),
        published_at=_parse_date(row.get("published_at"), "published_at"),
    )


def load_opportunities(
    source: Union[str, Path, IO[bytes], IO[str]],
    format: str = "ndjson",
    classifier: Optional[Callable[[str], CofogDivision]] = None,
) -> LoadResult:
    """Parse, validate and collect opportunities from NDJSON or CSV.

    Every returned record passed validate_opportunity. Rejected rows are
    reported with their 1-based line number; the first occurrence of a
    duplicated id is kept and later ones are rejected with an error naming
    both lines.
    """
    if format not in ("ndjson", "csv"):
        raise ValueError(f"unknown format: {format!r}")

    if isinstance(source, (str, Path)):
        text = Path(source).read_bytes().decode("utf-8")
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    opportunities: list[Opportunity] = []
    errors: list[RowError] = []
    seen_ids: dict[str, int] = {}

    def handle(line_no: int, row: dict) -> None:
        try:
            record = _row_to_opportunity(row, classifier)
        except (ValueError, KeyError) as exc:
            errors.append(RowError(line_no, str(exc)))
            return
        violations = validate_opportunity(record)
        if violations:
            errors.append(RowError(line_no, "; ".join(str(v) for v in violations)))
            return
        if record.id in seen_ids:
            errors.append(
                RowError(
                    line_no,
                    f"duplicate id {record.id!r}: first seen at line {seen_ids[record.id]}",
                )
            )
            return
        seen_ids[record.id] = line_no
        opportunities.append(record)

    if format == "ndjson":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(RowError(line_no, f"invalid JSON: {exc}"))
                continue
            if not isinstance(row, dict):
                errors.append(RowError(line_no, "row is not a JSON object"))
                continue
            handle(line_no, row)
    else:
        reader = csv.DictReader(io.StringIO(text))
        # DictReader consumes the header as line 1.
        for line_no, row in enumerate(reader, start=2):
            handle(line_no, {k: v for k, v in row.items() if k is not None})

    return LoadResult(opportunities=opportunities, errors=errors)


def opportunity_to_dict(opp: Opportunity) -> dict:
    return {
        "id": opp.id,
        "title": opp.title,
        "description": opp.description,
        "organisation": opp.organisation,
        "country": opp.country,
        "opportunity_type": opp.opportunity_type.label,
        "cofog": opp.cofog.code,
        "source_url": opp.source_url,
        "contact": opp.contact,
        "deadline": opp.deadline.isoformat() if opp.deadline else None,
        "published_at": opp.published_at.isoformat() if opp.published_at else None,
    }


def write_opportunities_ndjson(
    opportunities: Iterable[Opportunity], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for opp in opportunities:
            fh.write(json.dumps(opportunity_to_dict(opp), sort_keys=True))
            fh.write("\n")


_STOPWORDS: Optional[frozenset[str]] = None


def load_stopwords() -> frozenset[str]:
    """Fixed 50-word English stopword list shipped as data."""
    global _STOPWORDS
    if _STOPWORDS is None:
        path = Path(__file__).parent / "data" / "stopwords.txt"
        _STOPWORDS = frozenset(
            w.strip() for w in path.read_text().splitlines() if w.strip()
        )
    return _STOPWORDS


class RewriterProvider(Protocol):
    def rewrite(self, opp: Opportunity) -> RewrittenOpportunity: ...


class RetryableRewriteError(RuntimeError):
    """Remote provider failure; safe to retry. Carries the opportunity id."""

    def __init__(self, opportunity_id: str, message: str):
        self.opportunity_id = opportunity_id
        super().__init__(f"{opportunity_id}: {message}")


class RewriteSchemaError(ValueError):
    """Provider output does not match the structured schema."""


class TemplateRewriter:
    """Deterministic rewrite: identical input yields byte-identical output.

    Title and background pass through; research questions are the
    description's question-mark sentences (with a single fallback question
    built from the title); keywords are the up-to-10 most frequent
    non-stopword tokens, frequency then alphabetical order.
    """

    def rewrite(self, opp: Opportunity) -> RewrittenOpportunity:
        questions = [m.strip() for m in _QUESTION_RE.findall(opp.description)]
        questions = [q for q in questions if len(q) > 1]
        if not questions:
            questions = [f"What evidence addresses: {opp.title}?"]

        stop = load_stopwords()
        counts = Counter(t for t in tokenize(opp.description) if t not in stop)
        keywords = [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:10]]

        return RewrittenOpportunity(
            opportunity_id=opp.id,
            rewritten_title=opp.title,
            background=opp.description,
            research_questions=tuple(questions),
            keywords=tuple(keywords),
            cofog=opp.cofog,
        )


class RemoteRewriter:
    """HTTP provider: POST {id, title, description} -> rewritten schema.

    Transient failures raise RetryableRewriteError after the configured
    retries; schema problems raise RewriteSchemaError and are never
    silently truncated or repaired.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retries: int = 2,
        post: Callable | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.post = post

    def rewrite(self, opp: Opportunity) -> RewrittenOpportunity:
        post = self.post
        if post is None:
            import requests

            post = requests.post
        payload = {"id": opp.id, "title": opp.title, "description": opp.description}
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = post(self.endpoint, json=payload, timeout=self.timeout)
                response.raise_for_status()
                body = response.json()
                break
            except Exception as exc:  # noqa: BLE001 - provider boundary
                last_exc = exc
        else:
            raise RetryableRewriteError(opp.id, f"remote rewriter failed: {last_exc}")
        return _parse_rewritten(body, expected_id=opp.id)


def _parse_rewritten(body: object, expected_id: str) -> RewrittenOpportunity:
    if not isinstance(body, dict):
        raise RewriteSchemaError(f"expected JSON object, got {type(body).__name__}")
    required = ["rewritten_title", "background", "research_questions", "keywords", "cofog"]
    missing = [k for k in required if k not in body]
    if missing:
        raise RewriteSchemaError(f"missing keys: {missing}")
    questions = body["research_questions"]
    keywords = body["keywords"]
    if not isinstance(questions, list) or not all(isinstance(q, str) for q in questions):
        raise RewriteSchemaError("research_questions must be a list of strings")
    if not questions:
        raise RewriteSchemaError("research_questions must be non-empty")
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise RewriteSchemaError("keywords must be a list of strings")
    try:
        cofog = CofogDivision.parse(body["cofog"])
    except ValueError as exc:
        raise RewriteSchemaError(str(exc)) from exc
    return RewrittenOpportunity(
        opportunity_id=str(body.get("opportunity_id", expected_id)),
        rewritten_title=str(body["rewritten_title"]),
        background=str(body["background"]),
        research_questions=tuple(questions),
        keywords=tuple(keywords),
        cofog=cofog,
    )


def rewrite_opportunity(
    opp: Opportunity, provider: Optional[RewriterProvider] = None
) -> RewrittenOpportunity:
    provider = provider or TemplateRewriter()
    return provider.rewrite(opp)


def compose_opportunity_text(r: RewrittenOpportunity) -> str:
    """Embedder-ready text; byte-deterministic, always prefixed [OPPORTUNITY]."""
    return (
        OPPORTUNITY_PREFIX
        + r.rewritten_title
        + "\n"
        + r.background
        + "\n"
        + "\n".join(r.research_questions)
        + "\nKeywords: "
        + ", ".join(r.keywords)
    )


def _rewritten_to_dict(r: RewrittenOpportunity) -> dict:
    return {
        "opportunity_id": r.opportunity_id,
        "rewritten_title": r.rewritten_title,
        "background": r.background,
        "research_questions": list(r.research_questions),
        "keywords": list(r.keywords),
        "cofog": r.cofog.code,
    }


def write_rewritten_ndjson(
    rewrites: Iterable[RewrittenOpportunity], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rewrites:
            fh.write(json.dumps(_rewritten_to_dict(r), sort_keys=True))
            fh.write("\n")


def read_rewritten_ndjson(path: Union[str, Path]) -> list[RewrittenOpportunity]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            out.append(
                RewrittenOpportunity(
                    opportunity_id=row["opportunity_id"],
                    rewritten_title=row["rewritten_title"],
                    background=row["background"],
                    research_questions=tuple(row["research_questions"]),
                    keywords=tuple(row["keywords"]),
                    cofog=CofogDivision.parse(row["cofog"]),
                )
            )
    return out
