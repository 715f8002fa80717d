from __future__ import annotations

import datetime as dt
import shutil
from pathlib import Path

import pytest

from policymatch.model import CofogDivision, Opportunity, OpportunityType

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def pipeline_artifacts(tmp_path_factory) -> dict[str, Path]:
    """Embed the shipped corpus once; shared by service and acceptance tests."""
    from policymatch import openalex, pipeline
    from policymatch.embedding import MockTextEmbedder, embed
    from policymatch.store import VectorStore, write_store

    work = tmp_path_factory.mktemp("artifacts")
    opps_path = work / "opportunities.ndjson"
    pubs_path = work / "publications.ndjson"
    shutil.copyfile(CORPUS / "opportunities.ndjson", opps_path)
    shutil.copyfile(CORPUS / "publications.ndjson", pubs_path)

    opportunities = pipeline.load_opportunities(opps_path).opportunities
    provider = pipeline.TemplateRewriter()
    rewrites = [provider.rewrite(o) for o in opportunities]
    rewritten_path = work / "rewritten.ndjson"
    pipeline.write_rewritten_ndjson(rewrites, rewritten_path)

    publications = openalex.read_publications_ndjson(pubs_path)
    embeddable = [
        p for p in openalex.filter_publications(publications) if openalex.usable_abstract(p)
    ]
    embedder = MockTextEmbedder()
    opp_store = work / "opportunities.ovec"
    pub_store = work / "publications.ovec"
    write_store(
        VectorStore(
            embed([pipeline.compose_opportunity_text(r) for r in rewrites], embedder),
            tuple(r.opportunity_id for r in rewrites),
        ),
        opp_store,
    )
    write_store(
        VectorStore(
            embed([openalex.compose_publication_text(p) for p in embeddable], embedder),
            tuple(p.id for p in embeddable),
        ),
        pub_store,
    )
    return {
        "opportunities": opps_path,
        "publications": pubs_path,
        "rewritten": rewritten_path,
        "opportunity_vectors": opp_store,
        "publication_vectors": pub_store,
    }


def make_opportunity(**overrides) -> Opportunity:
    base = dict(
        id="op-1",
        title="Flood resilience evidence call",
        description="How should levies be set? We seek research on flood resilience.",
        organisation="Environment Agency",
        country="GB",
        opportunity_type=OpportunityType.CONSULTATION,
        cofog=CofogDivision.ENVIRONMENTAL_PROTECTION,
        source_url="https://example.gov.uk/consultations/flood",
        contact="evidence@example.gov.uk",
        deadline=dt.date(2026, 1, 31),
        published_at=dt.date(2025, 11, 1),
    )
    base.update(overrides)
    return Opportunity(**base)


@pytest.fixture
def opportunity() -> Opportunity:
    return make_opportunity()
