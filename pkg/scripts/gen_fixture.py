#!/usr/bin/env python3
"""Generate the shipped demo corpus (50 opportunities / 500 publications)
and its golden pipeline outputs.

Run from the repository root:

    python scripts/gen_fixture.py

Publications are token-level perturbations of opportunity texts so the
mock-embedder distances populate every tier plus exclusions. Goldens are
produced through the brute-force search oracle and frozen in git; the test
suite replays the optimized path against them.
"""

from __future__ import annotations

import json
import random
import sys
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

import numpy as np

from policymatch import analytics, matching, openalex, pipeline
from policymatch.embedding import MockTextEmbedder, embed, tokenize
from policymatch.knn import SearchConfig, brute_force_search
from policymatch.model import DEFAULT_THRESHOLDS, CofogDivision, OpportunityType
from policymatch.store import VectorStore

SEED = 20260810
N_OPPS = 50
N_PUBS = 500

CORPUS = ROOT / "tests" / "fixtures" / "corpus"
GOLDEN = ROOT / "tests" / "fixtures" / "golden"

DIVISION_WORDS = {
    CofogDivision.GENERAL_PUBLIC_SERVICES: "administration fiscal treasury parliament budget audit procurement governance statistics census diplomacy embassy",
    CofogDivision.DEFENCE: "military armed navy brigade radar munitions deterrence procurement veterans logistics fortification readiness",
    CofogDivision.PUBLIC_ORDER_AND_SAFETY: "police courts prisons sentencing probation firefighting forensics patrol custody tribunal magistrates borders",
    CofogDivision.ECONOMIC_AFFAIRS: "industry manufacturing exports tariffs employment productivity freight railways broadband tourism agriculture energy",
    CofogDivision.ENVIRONMENTAL_PROTECTION: "emissions biodiversity wetlands recycling pollution habitats watershed conservation flooding drainage carbon rewilding",
    CofogDivision.HOUSING_AND_COMMUNITY_AMENITIES: "housing tenancy planning zoning settlements sanitation plumbing neighbourhoods landlords amenities regeneration dwellings",
    CofogDivision.HEALTH: "hospitals clinics vaccination screening surgery nursing pharmacy diagnostics epidemiology wards maternity therapies",
    CofogDivision.RECREATION_CULTURE_AND_RELIGION: "museums libraries theatres heritage sports stadiums broadcasting festivals archives galleries choirs monuments",
    CofogDivision.EDUCATION: "schools curriculum teachers pupils universities apprenticeships literacy numeracy classrooms tuition examinations pedagogy",
    CofogDivision.SOCIAL_PROTECTION: "pensions welfare benefits caregivers disability unemployment allowances safeguarding poverty entitlement claimants households",
}

GENERIC_WORDS = (
    "evidence review framework consultation stakeholders outcomes analysis proposal "
    "delivery targets metrics appraisal implementation scrutiny oversight reform "
    "baseline survey modelling projection uptake compliance incentives regional "
    "national guidance standards thresholds monitoring datasets transparency "
    "capability workforce infrastructure funding allocation priorities interventions "
    "resilience adaptation equity participation engagement liaison commissioning "
    "benchmarks indicators longitudinal cohort sampling inference causality trials "
    "qualitative quantitative synthesis dissemination translation brokerage advisory "
    "secretariat mandate statute legislation amendment repeal devolution localism "
    "subsidiarity accountability audit inspection accreditation licensing registries "
    "interoperability digitisation automation analytics dashboards forecasting "
    "scenarios horizon foresight risks mitigation contingency assurance validation "
    "verification piloting scaling diffusion adoption barriers enablers incentive "
    "levers subsidies grants rebates taxation levies duties exemptions compliance "
    "enforcement sanctions penalties redress appeals ombudsman mediation arbitration"
).split()

COUNTRIES = ["GB"] * 30 + ["AU"] * 12 + ["US"] * 8
TYPES = (
    [OpportunityType.CONSULTATION] * 18
    + [OpportunityType.ARI] * 12
    + [OpportunityType.LEARNING_AGENDA] * 6
    + [OpportunityType.FELLOWSHIP] * 5
    + [OpportunityType.INTERNSHIP] * 3
    + [OpportunityType.EVENT] * 2
    + [OpportunityType.FUNDING] * 2
    + [OpportunityType.ADVISORY_COMMITTEE] * 2
)
# division plan: Health and Defence get enough mass for scoped analyses
DIVISIONS = (
    [CofogDivision.HEALTH] * 8
    + [CofogDivision.DEFENCE] * 5
    + [CofogDivision.ECONOMIC_AFFAIRS] * 9
    + [CofogDivision.ENVIRONMENTAL_PROTECTION] * 7
    + [CofogDivision.GENERAL_PUBLIC_SERVICES] * 6
    + [CofogDivision.SOCIAL_PROTECTION] * 5
    + [CofogDivision.EDUCATION] * 4
    + [CofogDivision.PUBLIC_ORDER_AND_SAFETY] * 3
    + [CofogDivision.HOUSING_AND_COMMUNITY_AMENITIES] * 2
    + [CofogDivision.RECREATION_CULTURE_AND_RELIGION] * 1
)

ORGS = {
    "GB": ["Cabinet Office", "Environment Agency", "Department of Health", "Home Office"],
    "AU": ["Department of Industry", "Productivity Commission", "Health Australia"],
    "US": ["General Services Administration", "Department of Energy", "HHS"],
}


def make_opportunities(rng: random.Random) -> list[dict]:
    rows = []
    for i in range(N_OPPS):
        division = DIVISIONS[i]
        words = DIVISION_WORDS[division].split()
        country = COUNTRIES[i]
        # stride 7 is coprime with 50: decorrelates type from country blocks
        opp_type = TYPES[(i * 7) % len(TYPES)]
        n_topic = rng.randint(10, 16)
        n_generic = rng.randint(65, 95)
        topic = rng.sample(words, k=min(n_topic, len(words)))
        generic = rng.sample(GENERIC_WORDS, k=min(n_generic, len(GENERIC_WORDS)))
        title = " ".join(topic[:3]).capitalize() + " " + opp_type.label.lower()
        body = " ".join(topic[3:] + generic[: n_generic - 6])
        question = "How should " + " ".join(generic[n_generic - 6 : n_generic - 3]) + " be addressed?"
        tail = " ".join(generic[n_generic - 3 :])
        description = f"{body}. {question} {tail}."
        rows.append(
            {
                "id": f"op-{i + 1:03d}",
                "title": title,
                "description": description,
                "organisation": rng.choice(ORGS[country]),
                "country": country,
                "opportunity_type": opp_type.label,
                "cofog": division.code,
                "source_url": f"https://example.org/opportunities/{i + 1:03d}",
                "contact": f"contact{i + 1:03d}@example.org" if i % 3 == 0 else None,
                "deadline": f"202{6 + i % 2}-0{1 + i % 9}-15" if i % 4 != 0 else None,
                "published_at": f"2025-0{1 + i % 9}-01",
            }
        )
    return rows


class FreshTokens:
    def __init__(self):
        self.counter = 0

    def __call__(self) -> str:
        self.counter += 1
        return f"novel{self.counter:04d}"


def make_publications(
    rng: random.Random, opp_texts: dict[str, str], fresh: FreshTokens
) -> list[dict]:
    opp_ids = sorted(opp_texts)
    pubs = []
    for i in range(N_PUBS):
        pid = f"pub-{i + 1:04d}"
        targeted = i < 400
        if targeted:
            target = opp_ids[i % N_OPPS]
            body = [t for t in tokenize(opp_texts[target]) if t not in ("opportunity", "keywords")]
            # Swap k single occurrences of singleton tokens for fresh ones;
            # on ~100-token texts each swap nudges the distance by a narrow,
            # predictable step, spreading pubs across tiers and exclusions.
            counts = Counter(body)
            singles = sorted(t for t, n in counts.items() if n == 1)
            k = rng.choice([0, 1, 2, 2, 3, 3, 4, 4, 4, 5, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 11, 12, 14])
            k = min(k, len(singles))
            swapped = set(rng.sample(singles, k=k))
            words = [fresh() if t in swapped else t for t in body]
            rng.shuffle(words)
        else:
            words = [fresh() for _ in range(rng.randint(25, 45))]
        unusable = i % 16 == 7  # no usable abstract; retained for volume stats
        doc_type = "journal-article"
        if i % 40 == 11:
            doc_type = "book-chapter"
        elif i % 40 == 23:
            doc_type = "report"
        elif i % 100 == 57:
            doc_type = "other"  # excluded by the type filter
        n_authors = rng.randint(1, 3)
        authors = sorted(rng.sample([f"auth-{a:03d}" for a in range(1, 121)], k=n_authors))
        n_inst = 2 if rng.random() < 0.12 else 1
        institutions = sorted(rng.sample([f"inst-{j:02d}" for j in range(1, 11)], k=n_inst))
        pubs.append(
            {
                "id": pid,
                "words": words,
                "unusable": unusable,
                "year": rng.randint(2020, 2025),
                "doc_type": doc_type,
                "author_ids": authors,
                "institution_ids": institutions,
                "is_paratext": i % 250 == 101,
                "is_retracted": i % 125 == 77,
            }
        )
    return pubs


def pub_row(meta: dict) -> dict:
    words = meta["words"]
    row = {
        "id": meta["id"],
        "title": " ".join(words[:5]).capitalize(),
        "abstract": "Too short." if meta["unusable"] else " ".join(words[5:]),
        "year": meta["year"],
        "doc_type": meta["doc_type"],
        "author_ids": meta["author_ids"],
        "institution_ids": meta["institution_ids"],
        "is_paratext": meta["is_paratext"],
        "is_retracted": meta["is_retracted"],
    }
    return row


def separate_near_ties(
    metas: list[dict], opp_texts: dict[str, str], fresh: FreshTokens
) -> None:
    """Append fresh tokens until no two distinct publications are an
    ambiguous near-tie (<1e-6 apart, both near or inside the tiers) for any
    opportunity.

    Mathematically equidistant pairs are realized as different float64
    values by the optimized and oracle distance formulas, which would make
    their relative order method-dependent; the goldens must not hinge on
    that.
    """
    active = [
        m
        for m in metas
        if not m["unusable"]
        and m["doc_type"] != "other"
        and not m["is_paratext"]
        and not m["is_retracted"]
    ]
    embedder = MockTextEmbedder()
    opp_matrix = embed([opp_texts[k] for k in sorted(opp_texts)], embedder).astype(np.float64)

    for iteration in range(200):
        texts = ["[SCHOLAR] " + " ".join(m["words"][:5]).capitalize() + "\n" + " ".join(m["words"][5:]) for m in active]
        pub_matrix = embed(texts, embedder).astype(np.float64)
        # distances: n_opps x n_pubs
        d2 = (
            np.einsum("ij,ij->i", opp_matrix, opp_matrix)[:, None]
            - 2.0 * opp_matrix @ pub_matrix.T
            + np.einsum("ij,ij->i", pub_matrix, pub_matrix)[None, :]
        )
        dists = np.sqrt(np.maximum(d2, 0.0))
        to_nudge: set[int] = set()
        for qi in range(dists.shape[0]):
            row = dists[qi]
            near = np.flatnonzero(row <= 0.5)
            order = near[np.argsort(row[near])]
            for a, b in zip(order, order[1:]):
                if abs(row[a] - row[b]) < 1e-6:
                    # nudge the lexicographically larger publication id
                    loser = a if active[a]["id"] > active[b]["id"] else b
                    to_nudge.add(int(loser))
        if not to_nudge:
            print(f"near-tie separation converged after {iteration} rounds")
            return
        for idx in sorted(to_nudge):
            active[idx]["words"] = active[idx]["words"] + [fresh()]
    raise RuntimeError("near-tie separation did not converge")


def main() -> None:
    rng = random.Random(SEED)
    CORPUS.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)

    opp_rows = make_opportunities(rng)
    opps_path = CORPUS / "opportunities.ndjson"
    with open(opps_path, "w") as fh:
        for row in opp_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    loaded = pipeline.load_opportunities(opps_path)
    assert not loaded.errors, loaded.errors
    opportunities = loaded.opportunities
    provider = pipeline.TemplateRewriter()
    rewrites = [provider.rewrite(o) for o in opportunities]
    opp_texts = {r.opportunity_id: pipeline.compose_opportunity_text(r) for r in rewrites}

    fresh = FreshTokens()
    pub_metas = make_publications(rng, opp_texts, fresh)
    separate_near_ties(pub_metas, opp_texts, fresh)
    pubs_path = CORPUS / "publications.ndjson"
    with open(pubs_path, "w") as fh:
        for meta in pub_metas:
            fh.write(json.dumps(pub_row(meta), sort_keys=True) + "\n")

    publications = openalex.read_publications_ndjson(pubs_path)
    filtered = openalex.filter_publications(publications)
    embeddable = [p for p in filtered if openalex.usable_abstract(p)]
    print(f"publications: {len(publications)} total, {len(filtered)} filtered, {len(embeddable)} embeddable")

    embedder = MockTextEmbedder()
    opp_store = VectorStore(
        embed([opp_texts[o.id] for o in opportunities], embedder),
        tuple(o.id for o in opportunities),
    )
    pub_store = VectorStore(
        embed([openalex.compose_publication_text(p) for p in embeddable], embedder),
        tuple(p.id for p in embeddable),
    )

    # Golden matches via the brute-force oracle path.
    cfg = SearchConfig(k=100)
    records = []
    for row, opp_id in enumerate(opp_store.ids):
        for hit in brute_force_search(pub_store, opp_store.vectors[row], cfg):
            tier = matching.classify_tier(hit.distance, DEFAULT_THRESHOLDS)
            if tier is None:
                continue
            records.append(
                matching.MatchRecord(opp_id, hit.record_id, hit.distance, tier)
            )
    tier_hist = Counter(r.tier.label for r in records)
    print("tier histogram:", dict(tier_hist))
    per_opp = Counter(r.opportunity_id for r in records)
    print(f"opportunities with matches: {len(per_opp)}/{N_OPPS}")

    matching.write_matches_csv(records, GOLDEN / "matches.csv")

    pub_inst = {p.id: list(p.institution_ids) for p in publications}
    agg = matching.aggregate_institution(records, pub_inst)
    institutions = sorted({i for insts in pub_inst.values() for i in insts})
    rows_all = matching.coverage(agg, opportunities, scope=None, institutions=institutions)
    matching.write_coverage_csv(rows_all, GOLDEN / "coverage_all.csv")
    rows_health = matching.coverage(
        agg, opportunities, scope=CofogDivision.HEALTH, institutions=institutions
    )
    matching.write_coverage_csv(rows_health, GOLDEN / "coverage_07.csv")
    print("coverage(all) pcts:", sorted({round(r.coverage_pct, 1) for r in rows_all}))
    print(
        "overall green coverage:",
        matching.opportunity_coverage(records, opportunities),
    )

    for dimension in analytics.DIMENSIONS:
        report = analytics.distribution(opportunities, by=dimension)
        analytics.export_report(report, GOLDEN / f"distribution_{dimension}.csv", "csv")
        analytics.export_report(report, GOLDEN / f"distribution_{dimension}.json", "json")

    print("fixture and goldens written")


if __name__ == "__main__":
    main()
