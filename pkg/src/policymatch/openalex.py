"""Publication retrieval and filtering for institutions (OpenAlex API).

Works are fetched per institution over a year window with cursor
pagination, mapped to Publication records, and filtered to the six
eligible document types with paratext and retracted works dropped.
Abstracts arrive as positional inverted indexes and are reconstructed to
plain text; trimmed abstracts shorter than 20 characters count as missing.
Works without usable abstracts are excluded from embedding but retained
for publication-volume statistics.

All responses can be cached to disk keyed by the full request URL, so a
recorded run replays offline and deterministically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union
from urllib.parse import urlencode

__all__ = [
    "DOC_TYPES",
    "ALLOWED_DOC_TYPES",
    "Publication",
    "FetchWindow",
    "InstitutionStats",
    "PermanentFetchError",
    "TransientFetchError",
    "CursorLoopError",
    "OpenAlexClient",
    "map_work",
    "reconstruct_abstract",
    "invert_abstract",
    "filter_publications",
    "usable_abstract",
    "compose_publication_text",
    "compute_institution_stats",
    "read_institutions_csv",
    "load_reference_institution_stats",
    "write_publications_ndjson",
    "read_publications_ndjson",
]

SCHOLAR_PREFIX = "[SCHOLAR] "

DOC_TYPES = (
    "journal-article",
    "book-chapter",
    "book",
    "report",
    "editorial",
    "letter",
    "other",
)
ALLOWED_DOC_TYPES = frozenset(DOC_TYPES[:-1])

# OpenAlex "type" -> local doc_type. OpenAlex granularity is accepted as-is
# (an "article" is not cross-checked against its source venue); keeping the
# table visible keeps the mapping auditable.
_OPENALEX_TYPE_MAP = {
    "article": "journal-article",
    "journal-article": "journal-article",
    "book-chapter": "book-chapter",
    "book": "book",
    "report": "report",
    "editorial": "editorial",
    "letter": "letter",
}

MIN_ABSTRACT_CHARS = 20


@dataclass(frozen=True)
class Publication:
    """A scholarly work. Abstracts are stored trimmed; trimmed text shorter
    than 20 characters is normalised to absent."""

    id: str
    title: str
    abstract: Optional[str]
    year: int
    doc_type: str
    author_ids: tuple[str, ...] = ()
    institution_ids: tuple[str, ...] = ()
    is_paratext: bool = False
    is_retracted: bool = False

    def __post_init__(self):
        if self.doc_type not in DOC_TYPES:
            raise ValueError(f"unknown doc_type: {self.doc_type!r}")
        abstract = self.abstract
        if abstract is not None:
            abstract = abstract.strip()
            if len(abstract) < MIN_ABSTRACT_CHARS:
                abstract = None
        object.__setattr__(self, "abstract", abstract)
        object.__setattr__(self, "author_ids", tuple(self.author_ids))
        object.__setattr__(self, "institution_ids", tuple(self.institution_ids))


@dataclass(frozen=True)
class FetchWindow:
    from_year: int = 2020
    to_year: int = 2025

    def __post_init__(self):
        if self.from_year > self.to_year:
            raise ValueError(f"from_year {self.from_year} > to_year {self.to_year}")


@dataclass(frozen=True)
class InstitutionStats:
    institution_id: str
    n_publications: int
    n_with_abstracts: int
    n_matched: int = 0

    def __post_init__(self):
        if not 0 <= self.n_with_abstracts <= self.n_publications:
            raise ValueError(
                f"{self.institution_id}: n_with_abstracts {self.n_with_abstracts} "
                f"exceeds n_publications {self.n_publications}"
            )
        if not 0 <= self.n_matched <= self.n_with_abstracts:
            raise ValueError(
                f"{self.institution_id}: n_matched {self.n_matched} "
                f"exceeds n_with_abstracts {self.n_with_abstracts}"
            )


def reconstruct_abstract(
    inverted_index: Optional[Mapping[str, Sequence[int]]],
) -> Optional[str]:
    """Rebuild plain text from a token -> positions map.

    Tokens are placed at their positions and joined by single spaces; gaps
    are skipped. When two tokens claim the same position, the first token
    in sorted-token order wins (real-world indexes are dirty; the result
    must be deterministic). An empty map means the abstract is absent.
    """
    if not inverted_index:
        return None
    placed: dict[int, str] = {}
    for token in sorted(inverted_index):
        for pos in inverted_index[token]:
            if not isinstance(pos, int) or pos < 0:
                raise ValueError(f"invalid position {pos!r} for token {token!r}")
            if pos not in placed:
                placed[pos] = token
    return " ".join(placed[pos] for pos in sorted(placed))


def invert_abstract(text: str) -> dict[str, list[int]]:
    """Whitespace-token inverse of reconstruct_abstract (test oracle helper)."""
    index: dict[str, list[int]] = {}
    for pos, token in enumerate(text.split()):
        index.setdefault(token, []).append(pos)
    return index


def map_work(raw: Mapping) -> Publication:
    """Map one raw OpenAlex work object to a Publication."""

    def short_id(value: Optional[str]) -> str:
        if not value:
            return ""
        return value.rsplit("/", 1)[-1]

    author_ids = []
    institution_ids = []
    for authorship in raw.get("authorships") or []:
        author = (authorship.get("author") or {}).get("id")
        if author:
            aid = short_id(author)
            if aid not in author_ids:
                author_ids.append(aid)
        for inst in authorship.get("institutions") or []:
            iid = short_id(inst.get("id"))
            if iid and iid not in institution_ids:
                institution_ids.append(iid)

    return Publication(
        id=short_id(raw.get("id")),
        title=raw.get("title") or raw.get("display_name") or "",
        abstract=reconstruct_abstract(raw.get("abstract_inverted_index")),
        year=int(raw.get("publication_year") or 0),
        doc_type=_OPENALEX_TYPE_MAP.get(raw.get("type") or "", "other"),
        author_ids=tuple(author_ids),
        institution_ids=tuple(institution_ids),
        is_paratext=bool(raw.get("is_paratext", False)),
        is_retracted=bool(raw.get("is_retracted", False)),
    )


def filter_publications(pubs: Iterable[Publication]) -> list[Publication]:
    """Keep eligible document types; drop paratext and retracted. Order kept."""
    return [
        p
        for p in pubs
        if p.doc_type in ALLOWED_DOC_TYPES and not p.is_paratext and not p.is_retracted
    ]


def usable_abstract(p: Publication) -> bool:
    return p.abstract is not None and len(p.abstract.strip()) >= MIN_ABSTRACT_CHARS


def compose_publication_text(p: Publication) -> str:
    """Embedder-ready text; requires a usable abstract (never embed without)."""
    if not usable_abstract(p):
        raise ValueError(f"publication {p.id!r} has no usable abstract")
    return SCHOLAR_PREFIX + p.title + "\n" + p.abstract


class PermanentFetchError(RuntimeError):
    """HTTP 4xx; carries the response body."""

    def __init__(self, url: str, status: int, body: str):
        self.url = url
        self.status = status
        self.body = body
        super().__init__(f"GET {url} -> {status}: {body[:200]}")


class TransientFetchError(RuntimeError):
    """5xx or timeout that persisted through all retries."""


class CursorLoopError(RuntimeError):
    """The API returned a cursor that was already visited."""


class OpenAlexClient:
    """Minimal works client with caching, retries, and cursor pagination.

    ``session`` needs only a requests-compatible ``get(url, timeout=...)``;
    tests inject a stub. The polite-pool mailto defaults to the
    OPENALEX_MAILTO environment variable.
    """

    def __init__(
        self,
        base_url: str = "https://api.openalex.org",
        mailto: Optional[str] = None,
        session=None,
        cache_dir: Optional[Union[str, Path]] = None,
        retries: int = 3,
        backoff: float = 1.0,
        per_page: int = 200,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.mailto = mailto if mailto is not None else os.environ.get("OPENALEX_MAILTO")
        self._session = session
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.retries = retries
        self.backoff = backoff
        self.per_page = per_page
        self._sleep = sleep

    def _cache_path(self, url: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        digest = hashlib.sha256(url.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _get_json(self, url: str) -> dict:
        cache_path = self._cache_path(url)
        if cache_path is not None and cache_path.exists():
            return json.loads(cache_path.read_text(encoding="utf-8"))

        session = self._session
        if session is None:
            import requests

            session = requests.Session()
            self._session = session

        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = session.get(url, timeout=60)
            except Exception as exc:  # noqa: BLE001 - network boundary
                last_exc = exc
                self._sleep(self.backoff * (2**attempt))
                continue
            status = getattr(response, "status_code", 200)
            if 400 <= status < 500:
                raise PermanentFetchError(url, status, getattr(response, "text", ""))
            if status >= 500:
                last_exc = TransientFetchError(f"GET {url} -> {status}")
                self._sleep(self.backoff * (2**attempt))
                continue
            payload = response.json()
            if cache_path is not None:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                cache_path.write_text(
                    json.dumps(payload, sort_keys=True), encoding="utf-8"
                )
            return payload
        raise TransientFetchError(f"GET {url} failed after {self.retries + 1} attempts: {last_exc}")

    def _works_url(self, institution_id: str, window: FetchWindow, cursor: str) -> str:
        filters = ",".join(
            [
                f"institutions.id:{institution_id}",
                f"from_publication_date:{window.from_year}-01-01",
                f"to_publication_date:{window.to_year}-12-31",
            ]
        )
        params = [("filter", filters), ("per-page", str(self.per_page)), ("cursor", cursor)]
        if self.mailto:
            params.append(("mailto", self.mailto))
        return f"{self.base_url}/works?{urlencode(params)}"

    def iter_pages(
        self,
        institution_id: str,
        window: FetchWindow = FetchWindow(),
        start_cursor: str = "*",
    ) -> Iterator[tuple[Optional[str], list[dict]]]:
        """Yield (next_cursor, raw_works) per page, starting at start_cursor.

        Persisting next_cursor and re-running with it as start_cursor
        resumes with the suffix only. A repeated cursor is an error.
        """
        cursor: Optional[str] = start_cursor
        seen = {cursor}
        while cursor:
            payload = self._get_json(self._works_url(institution_id, window, cursor))
            results = payload.get("results") or []
            next_cursor = (payload.get("meta") or {}).get("next_cursor")
            if next_cursor in seen and next_cursor is not None:
                raise CursorLoopError(
                    f"cursor {next_cursor!r} repeated for institution {institution_id}"
                )
            seen.add(next_cursor)
            yield next_cursor, results
            if not results:
                break
            cursor = next_cursor

    def fetch_institution_works(
        self,
        institution_id: str,
        window: FetchWindow = FetchWindow(),
        start_cursor: str = "*",
    ) -> list[Publication]:
        works: list[Publication] = []
        for _, page in self.iter_pages(institution_id, window, start_cursor):
            works.extend(map_work(raw) for raw in page)
        return works


def compute_institution_stats(
    pubs: Sequence[Publication],
    matched_counts: Optional[Mapping[str, int]] = None,
) -> dict[str, InstitutionStats]:
    """Volume statistics per institution over type-filtered publications.

    n_publications counts post-type-filter works, n_with_abstracts those
    with usable abstracts, n_matched comes from the matching stage (the
    Green-only distinct-publication count) when provided.
    """
    filtered = filter_publications(pubs)
    n_pub: dict[str, int] = {}
    n_abs: dict[str, int] = {}
    for p in filtered:
        for inst in p.institution_ids:
            n_pub[inst] = n_pub.get(inst, 0) + 1
            if usable_abstract(p):
                n_abs[inst] = n_abs.get(inst, 0) + 1
    matched_counts = matched_counts or {}
    return {
        inst: InstitutionStats(
            institution_id=inst,
            n_publications=n_pub[inst],
            n_with_abstracts=n_abs.get(inst, 0),
            n_matched=matched_counts.get(inst, 0),
        )
        for inst in sorted(n_pub)
    }


def read_institutions_csv(
    path: Union[str, Path, None] = None,
) -> list[dict[str, str]]:
    """Institution list rows: openalex_id, display_name, country.

    The shipped UK list carries local: placeholder ids; substitute real
    OpenAlex institution ids before live fetching.
    """
    if path is None:
        path = Path(__file__).parent / "data" / "uk_institutions.csv"
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_reference_institution_stats(
    path: Union[str, Path, None] = None,
) -> list[InstitutionStats]:
    """Shipped per-institution reference statistics (volume and match counts)."""
    if path is None:
        path = Path(__file__).parent / "data" / "institution_stats_reference.csv"
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                InstitutionStats(
                    institution_id=row["institution"],
                    n_publications=int(row["n_publications"]),
                    n_with_abstracts=int(row["n_with_abstracts"]),
                    n_matched=int(row["n_matched"]),
                )
            )
    return rows


def _publication_to_dict(p: Publication) -> dict:
    return {
        "id": p.id,
        "title": p.title,
        "abstract": p.abstract,
        "year": p.year,
        "doc_type": p.doc_type,
        "author_ids": list(p.author_ids),
        "institution_ids": list(p.institution_ids),
        "is_paratext": p.is_paratext,
        "is_retracted": p.is_retracted,
    }


def write_publications_ndjson(
    pubs: Iterable[Publication], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pubs:
            fh.write(json.dumps(_publication_to_dict(p), sort_keys=True))
            fh.write("\n")


def read_publications_ndjson(path: Union[str, Path]) -> list[Publication]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            out.append(
                Publication(
                    id=row["id"],
                    title=row["title"],
                    abstract=row.get("abstract"),
                    year=int(row.get("year") or 0),
                    doc_type=row["doc_type"],
                    author_ids=tuple(row.get("author_ids") or ()),
                    institution_ids=tuple(row.get("institution_ids") or ()),
                    is_paratext=bool(row.get("is_paratext", False)),
                    is_retracted=bool(row.get("is_retracted", False)),
                )
            )
    return out
