// Typed client for the policymatch service API. The UI performs no domain
// computation: every number rendered anywhere comes verbatim from one of
// these response payloads.

export interface OpportunitySummary {
  id: string;
  title: string;
  description: string;
  organisation: string;
  country: string;
  opportunity_type: string;
  cofog: string;
  cofog_label: string;
  source_url: string;
  contact: string | null;
  deadline: string | null;
  published_at: string | null;
}

export interface OpportunityPage {
  items: OpportunitySummary[];
  next_cursor: string | null;
  total: number | null;
}

export interface Rewrite {
  opportunity_id: string;
  rewritten_title: string;
  background: string;
  research_questions: string[];
  keywords: string[];
  cofog: string;
}

export interface OpportunityDetail {
  opportunity: OpportunitySummary;
  rewrite: Rewrite | null;
}

export interface MatchItem {
  publication_id: string;
  title: string | null;
  distance: number;
  tier: string;
}

export interface RankedResearcher {
  author_id: string;
  matched_work_count: number;
  best_distance: number;
  rank: number;
}

export interface DistributionBucket {
  label: string;
  count: number;
  pct: number;
}

export interface Distribution {
  dimension: string;
  total: number;
  buckets: DistributionBucket[];
}

export interface CoverageRow {
  institution_id: string;
  scope: string;
  n_opportunities: number;
  n_covered: number;
  coverage_pct: number;
}

export interface ScatterPoint {
  institution_id: string;
  x: number;
  y: number;
  scope: string;
}

export interface ScatterResponse {
  mode: string;
  scope: string;
  points: ScatterPoint[];
}

export interface InstitutionItem {
  institution_id: string;
  display_name: string;
  n_publications: number;
  n_with_abstracts: number;
  n_matched: number;
  coverage_pct: number | null;
}

export interface ApiErrorBody {
  code: string;
  field?: string;
  message: string;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody | null,
    message: string,
  ) {
    super(message);
  }
}

export class ServiceUnreachable extends Error {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function query(params: Record<string, string | number | null | undefined>): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== null && value !== undefined && value !== "") {
      search.set(key, String(value));
    }
  }
  const text = search.toString();
  return text ? `?${text}` : "";
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`);
    } catch (err) {
      throw new ServiceUnreachable(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = ((await response.json()) as { error?: ApiErrorBody }).error ?? null;
      } catch {
        body = null;
      }
      throw new ServiceError(response.status, body, body?.message ?? `HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listOpportunities(filters: {
    country?: string;
    cofog?: string;
    type?: string;
    q?: string;
    cursor?: string;
    limit?: number;
  }): Promise<OpportunityPage> {
    return this.get(`/opportunities${query(filters)}`);
  }

  getOpportunity(id: string): Promise<OpportunityDetail> {
    return this.get(`/opportunities/${encodeURIComponent(id)}`);
  }

  getMatches(id: string): Promise<{ opportunity_id: string; items: MatchItem[] }> {
    return this.get(`/opportunities/${encodeURIComponent(id)}/matches`);
  }

  getResearchers(id: string): Promise<{ opportunity_id: string; items: RankedResearcher[] }> {
    return this.get(`/opportunities/${encodeURIComponent(id)}/researchers`);
  }

  getDistribution(by: string, filters: { country?: string; type?: string } = {}): Promise<Distribution> {
    return this.get(`/analytics/distribution${query({ by, ...filters })}`);
  }

  getInstitutions(): Promise<{ items: InstitutionItem[]; opportunity_coverage_pct: number }> {
    return this.get(`/institutions`);
  }

  getCoverage(institutionId: string, cofog?: string): Promise<CoverageRow> {
    return this.get(`/institutions/${encodeURIComponent(institutionId)}/coverage${query({ cofog })}`);
  }

  getScatter(mode: string, cofog?: string): Promise<ScatterResponse> {
    return this.get(`/analytics/scatter${query({ mode, cofog })}`);
  }
}
