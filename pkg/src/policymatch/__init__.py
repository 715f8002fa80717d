"""Matching engine and analytics for policy engagement opportunities.

Links policy engagement opportunities to researchers and institutions via
prefix-tagged text embeddings, exact L2 top-k retrieval, calibrated
confidence tiers, researcher ranking, and institution coverage analytics.
"""

from .model import (
    DEFAULT_THRESHOLDS,
    CofogDivision,
    Opportunity,
    OpportunityType,
    Tier,
    TierThresholds,
    ValidationError,
    Violation,
    validate_opportunity,
    validate_thresholds,
)
from .embedding import EMBEDDING_DIM, MockTextEmbedder, embed, mock_embed, normalize
from .store import VectorStore, read_store, write_store
from .knn import (
    ExactNearestNeighbors,
    SearchConfig,
    SearchHit,
    batch_search,
    brute_force_search,
    build_index,
    search,
)
from .matching import (
    CoverageRow,
    MatchRecord,
    RankedResearcher,
    TierClassifier,
    aggregate_institution,
    classify_tier,
    coverage,
    match_opportunity,
    opportunity_coverage,
    rank_researchers,
)
from .calibration import (
    EvalScores,
    ScoredPair,
    TierQualityTable,
    composite_score,
    evaluate_tiers,
    is_monotonic,
    propose_thresholds,
)
from .pipeline import (
    RewrittenOpportunity,
    TemplateRewriter,
    compose_opportunity_text,
    load_opportunities,
    rewrite_opportunity,
)
from .cofog import CofogCentroidClassifier, classify_cofog, default_cofog_classifier
from .openalex import (
    FetchWindow,
    InstitutionStats,
    OpenAlexClient,
    Publication,
    compose_publication_text,
    filter_publications,
    reconstruct_abstract,
    usable_abstract,
)
from .analytics import (
    Bucket,
    DistributionReport,
    ScatterPoint,
    compare_distributions,
    distribution,
    export_report,
    scatter,
)

__version__ = "0.1.0"
