"""Core domain types: policy taxonomies, opportunity records, match tiers.

Everything here is an immutable value, safe to share across threads. The
validation functions are pure and report *all* violations, not just the
first, so batch ingestion can surface complete diagnostics per row.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Optional

__all__ = [
    "CofogDivision",
    "OpportunityType",
    "Opportunity",
    "Tier",
    "TierThresholds",
    "DEFAULT_THRESHOLDS",
    "Violation",
    "ValidationError",
    "ThresholdError",
    "validate_opportunity",
    "validate_thresholds",
    "parse_country",
]


class CofogDivision(IntEnum):
    """Top-level government-function divisions (10 classes, division level only)."""

    GENERAL_PUBLIC_SERVICES = 1
    DEFENCE = 2
    PUBLIC_ORDER_AND_SAFETY = 3
    ECONOMIC_AFFAIRS = 4
    ENVIRONMENTAL_PROTECTION = 5
    HOUSING_AND_COMMUNITY_AMENITIES = 6
    HEALTH = 7
    RECREATION_CULTURE_AND_RELIGION = 8
    EDUCATION = 9
    SOCIAL_PROTECTION = 10

    @property
    def label(self) -> str:
        return _COFOG_LABELS[self]

    @property
    def code(self) -> str:
        """Zero-padded two-digit division code, e.g. ``"07"``."""
        return f"{self.value:02d}"

    @classmethod
    def parse(cls, value: object) -> "CofogDivision":
        """Parse a division from an int, a code string, or a label.

        Label matching ignores case and punctuation, so e.g. both
        "Recreation, Culture and Religion" and "recreation culture and
        religion" resolve to division 08. Unknown values raise ValueError.
        """
        if isinstance(value, CofogDivision):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            if 1 <= value <= 10:
                return cls(value)
            raise ValueError(f"COFOG division code out of range: {value}")
        if isinstance(value, str):
            text = value.strip()
            if re.fullmatch(r"\d{1,2}", text):
                return cls.parse(int(text))
            key = _normalise_label(text)
            try:
                return _COFOG_BY_KEY[key]
            except KeyError:
                raise ValueError(f"unknown COFOG division name: {value!r}") from None
        raise ValueError(f"cannot parse COFOG division from {value!r}")


_COFOG_LABELS = {
    CofogDivision.GENERAL_PUBLIC_SERVICES: "General Public Services",
    CofogDivision.DEFENCE: "Defence",
    CofogDivision.PUBLIC_ORDER_AND_SAFETY: "Public Order and Safety",
    CofogDivision.ECONOMIC_AFFAIRS: "Economic Affairs",
    CofogDivision.ENVIRONMENTAL_PROTECTION: "Environmental Protection",
    CofogDivision.HOUSING_AND_COMMUNITY_AMENITIES: "Housing and Community Amenities",
    CofogDivision.HEALTH: "Health",
    CofogDivision.RECREATION_CULTURE_AND_RELIGION: "Recreation, Culture and Religion",
    CofogDivision.EDUCATION: "Education",
    CofogDivision.SOCIAL_PROTECTION: "Social Protection",
}


def _normalise_label(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", text.lower()).strip()


_COFOG_BY_KEY = {_normalise_label(label): div for div, label in _COFOG_LABELS.items()}


class OpportunityType(Enum):
    """Closed enumeration of engagement mechanisms."""

    ARI = "ARI"
    CONSULTATION = "Consultation"
    LEARNING_AGENDA = "LearningAgenda"
    FELLOWSHIP = "Fellowship"
    INTERNSHIP = "Internship"
    EVENT = "Event"
    FUNDING = "Funding"
    ADVISORY_COMMITTEE = "AdvisoryCommittee"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value: object, country: Optional[str] = None) -> "OpportunityType":
        """Resolve a source string through the alias table.

        "government research priorities" is region-dependent: it maps to
        LearningAgenda for US records and ARI otherwise. Unknown strings are
        rejected rather than guessed.
        """
        if isinstance(value, OpportunityType):
            return value
        if not isinstance(value, str):
            raise ValueError(f"cannot parse opportunity type from {value!r}")
        key = _normalise_label(value)
        if key in _TYPE_BY_KEY:
            return _TYPE_BY_KEY[key]
        if key in _REGIONAL_TYPE_ALIASES:
            return cls.LEARNING_AGENDA if country == "US" else cls.ARI
        raise ValueError(f"unknown opportunity type: {value!r}")


_TYPE_ALIASES: dict[str, OpportunityType] = {
    "ari": OpportunityType.ARI,
    "aris": OpportunityType.ARI,
    "areas of research interest": OpportunityType.ARI,
    "consultation": OpportunityType.CONSULTATION,
    "consultations": OpportunityType.CONSULTATION,
    "call for evidence": OpportunityType.CONSULTATION,
    "calls for evidence": OpportunityType.CONSULTATION,
    "calls for evidence and consultations": OpportunityType.CONSULTATION,
    "learning agenda": OpportunityType.LEARNING_AGENDA,
    "learning agendas": OpportunityType.LEARNING_AGENDA,
    "learningagenda": OpportunityType.LEARNING_AGENDA,
    "fellowship": OpportunityType.FELLOWSHIP,
    "fellowships": OpportunityType.FELLOWSHIP,
    "internship": OpportunityType.INTERNSHIP,
    "internships": OpportunityType.INTERNSHIP,
    "event": OpportunityType.EVENT,
    "events": OpportunityType.EVENT,
    "funding": OpportunityType.FUNDING,
    "funding opportunity": OpportunityType.FUNDING,
    "advisory committee": OpportunityType.ADVISORY_COMMITTEE,
    "advisory committees": OpportunityType.ADVISORY_COMMITTEE,
    "advisorycommittee": OpportunityType.ADVISORY_COMMITTEE,
    "expert advisory committee": OpportunityType.ADVISORY_COMMITTEE,
    "expert advisory committees": OpportunityType.ADVISORY_COMMITTEE,
}

_TYPE_BY_KEY = dict(_TYPE_ALIASES)
_TYPE_BY_KEY.update({_normalise_label(t.value): t for t in OpportunityType})

_REGIONAL_TYPE_ALIASES = {
    "government research priorities",
    "government research priority",
}

# Common country names -> ISO 3166-1 alpha-2. Extend as sources demand;
# unknown names are rejected, never guessed.
_COUNTRY_ALIASES: dict[str, str] = {
    "united kingdom": "GB",
    "great britain": "GB",
    "uk": "GB",
    "gb": "GB",
    "australia": "AU",
    "au": "AU",
    "united states": "US",
    "united states of america": "US",
    "usa": "US",
    "us": "US",
    "canada": "CA",
    "ca": "CA",
    "ireland": "IE",
    "ie": "IE",
    "new zealand": "NZ",
    "nz": "NZ",
    "germany": "DE",
    "de": "DE",
    "france": "FR",
    "fr": "FR",
    "netherlands": "NL",
    "nl": "NL",
    "european union": "EU",
    "eu": "EU",
}

_ALPHA2_RE = re.compile(r"^[A-Z]{2}$")


def parse_country(value: str) -> str:
    """Normalise a country name or code to ISO 3166-1 alpha-2 (uppercase)."""
    text = value.strip()
    if _ALPHA2_RE.fullmatch(text):
        return text
    key = _normalise_label(text)
    if key in _COUNTRY_ALIASES:
        return _COUNTRY_ALIASES[key]
    raise ValueError(f"unknown country: {value!r}")


@dataclass(frozen=True)
class Opportunity:
    """A policy engagement opportunity record."""

    id: str
    title: str
    description: str
    organisation: str
    country: str
    opportunity_type: OpportunityType
    cofog: CofogDivision
    source_url: str
    contact: Optional[str] = None
    deadline: Optional[dt.date] = None
    published_at: Optional[dt.date] = None


@dataclass(frozen=True)
class Violation:
    """One failed invariant: which field, which rule, what value offended."""

    field: str
    rule: str
    value: object

    def __str__(self) -> str:
        return f"{self.field}: {self.rule} (got {self.value!r})"


class ValidationError(ValueError):
    """Raised when a record fails validation; carries the full violation list."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def validate_opportunity(record: Opportunity) -> list[Violation]:
    """Check every Opportunity invariant; return all violations (empty if valid).

    Uniqueness of ids is a corpus-level property and is enforced by the
    loader, not here.
    """
    violations: list[Violation] = []
    if not record.id or not record.id.strip():
        violations.append(Violation("id", "must be non-empty", record.id))
    if not _ALPHA2_RE.fullmatch(record.country or ""):
        violations.append(Violation("country", "not alpha-2", record.country))
    if not record.source_url or not record.source_url.strip():
        violations.append(Violation("source_url", "must be non-empty", record.source_url))
    if not record.description or not record.description.strip():
        violations.append(
            Violation("description", "must be non-empty after trim", record.description)
        )
    if not isinstance(record.opportunity_type, OpportunityType):
        violations.append(
            Violation("opportunity_type", "not a known opportunity type", record.opportunity_type)
        )
    if not isinstance(record.cofog, CofogDivision):
        violations.append(Violation("cofog", "not a COFOG division", record.cofog))
    return violations


def require_valid(record: Opportunity) -> Opportunity:
    """Return the record unchanged if valid, else raise ValidationError."""
    violations = validate_opportunity(record)
    if violations:
        raise ValidationError(violations)
    return record


class Tier(IntEnum):
    """Match confidence bands, ordered by increasing distance (decreasing confidence).

    The out-of-band Excluded outcome (distance beyond the Red threshold) is
    represented as ``None`` wherever a classification is returned; it is
    never stored as a tier.
    """

    GREEN = 1
    YELLOW = 2
    ORANGE = 3
    RED = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: object) -> "Tier":
        if isinstance(value, Tier):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown tier: {value!r}") from None
        raise ValueError(f"cannot parse tier from {value!r}")


class ThresholdError(ValueError):
    """Raised for non-positive or non-monotone tier thresholds."""


@dataclass(frozen=True)
class TierThresholds:
    """L2 distance cut-points for the four tiers (dimensionless)."""

    green: float = 0.288
    yellow: float = 0.309
    orange: float = 0.334
    red: float = 0.39

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.green, self.yellow, self.orange, self.red)


DEFAULT_THRESHOLDS = TierThresholds()


def validate_thresholds(t: TierThresholds) -> TierThresholds:
    """Accept iff 0 < green < yellow < orange < red; name the violated comparison."""
    if not t.green > 0:
        raise ThresholdError(f"0 < green violated: green={t.green}")
    if not t.green < t.yellow:
        raise ThresholdError(f"green < yellow violated: green={t.green}, yellow={t.yellow}")
    if not t.yellow < t.orange:
        raise ThresholdError(f"yellow < orange violated: yellow={t.yellow}, orange={t.orange}")
    if not t.orange < t.red:
        raise ThresholdError(f"orange < red violated: orange={t.orange}, red={t.red}")
    return t
