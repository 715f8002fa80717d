// In-memory stand-in for the matching service, faithful to its JSON
// shapes. The mock may compute aggregates (it plays the server); the UI
// under test must only ever display what the mock returns.

import type {
  CoverageRow,
  FetchLike,
  MatchItem,
  OpportunitySummary,
  RankedResearcher,
} from "../src/api.js";

export interface MockData {
  opportunities: OpportunitySummary[];
  rewrites: Record<string, unknown>;
  matches: Record<string, MatchItem[]>;
  researchers: Record<string, RankedResearcher[]>;
  coverage: Record<string, CoverageRow[]>; // scope -> rows
  stats: Record<string, { n_with_abstracts: number }>;
}

export function opportunity(partial: Partial<OpportunitySummary> & { id: string }): OpportunitySummary {
  return {
    title: `Title ${partial.id}`,
    description: `Description for ${partial.id}`,
    organisation: "Org",
    country: "GB",
    opportunity_type: "Consultation",
    cofog: "07",
    cofog_label: "Health",
    source_url: "https://example.org",
    contact: null,
    deadline: null,
    published_at: null,
    ...partial,
  };
}

export function coverageRow(
  institution_id: string,
  scope: string,
  n_opportunities: number,
  n_covered: number,
): CoverageRow {
  return {
    institution_id,
    scope,
    n_opportunities,
    n_covered,
    coverage_pct: (100.0 * n_covered) / n_opportunities,
  };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function error(status: number, code: string, message: string, field?: string): Response {
  return json({ error: { code, message, ...(field ? { field } : {}) } }, status);
}

function matchesCofog(opp: OpportunitySummary, filter: string): boolean {
  return opp.cofog === filter || opp.cofog_label === filter;
}

export interface MockService {
  fetch: FetchLike;
  calls: string[];
}

export function createMockService(data: MockData): MockService {
  const calls: string[] = [];

  const fetchImpl: FetchLike = async (input: string) => {
    const url = new URL(input);
    calls.push(url.pathname + url.search);
    const path = url.pathname;
    const params = url.searchParams;

    if (path === "/opportunities") {
      let items = data.opportunities.slice();
      const country = params.get("country");
      const cofog = params.get("cofog");
      const type = params.get("type");
      const q = params.get("q");
      if (country) items = items.filter((o) => o.country === country);
      if (cofog) items = items.filter((o) => matchesCofog(o, cofog));
      if (type) items = items.filter((o) => o.opportunity_type === type);
      if (q) {
        const needle = q.toLowerCase();
        items = items.filter(
          (o) =>
            o.title.toLowerCase().includes(needle) ||
            o.description.toLowerCase().includes(needle),
        );
      }
      items.sort((a, b) => (a.id < b.id ? -1 : 1));
      const cursor = params.get("cursor");
      const limit = Number(params.get("limit") ?? "50");
      const after = cursor ? items.filter((o) => o.id > cursor) : items;
      const page = after.slice(0, limit);
      return json({
        items: page,
        next_cursor: after.length > limit ? page[page.length - 1]!.id : null,
        total: cursor ? null : after.length,
      });
    }

    const detailMatch = path.match(/^\/opportunities\/([^/]+)$/);
    if (detailMatch) {
      const id = decodeURIComponent(detailMatch[1]!);
      const opp = data.opportunities.find((o) => o.id === id);
      if (!opp) return error(404, "not_found", `unknown opportunity '${id}'`);
      return json({ opportunity: opp, rewrite: data.rewrites[id] ?? null });
    }

    const matchesMatch = path.match(/^\/opportunities\/([^/]+)\/matches$/);
    if (matchesMatch) {
      const id = decodeURIComponent(matchesMatch[1]!);
      if (!data.opportunities.some((o) => o.id === id)) {
        return error(404, "not_found", `unknown opportunity '${id}'`);
      }
      return json({ opportunity_id: id, items: data.matches[id] ?? [] });
    }

    const researchersMatch = path.match(/^\/opportunities\/([^/]+)\/researchers$/);
    if (researchersMatch) {
      const id = decodeURIComponent(researchersMatch[1]!);
      if (!data.opportunities.some((o) => o.id === id)) {
        return error(404, "not_found", `unknown opportunity '${id}'`);
      }
      return json({ opportunity_id: id, items: data.researchers[id] ?? [] });
    }

    if (path === "/analytics/distribution") {
      const by = params.get("by") ?? "cofog";
      const country = params.get("country");
      const type = params.get("type");
      let items = data.opportunities.slice();
      if (country) items = items.filter((o) => o.country === country);
      if (type) items = items.filter((o) => o.opportunity_type === type);
      if (items.length === 0) return error(400, "invalid_filter", "empty after filter", "by");
      const key = (o: OpportunitySummary) =>
        by === "cofog" ? o.cofog_label : by === "country" ? o.country : o.opportunity_type;
      const counts = new Map<string, number>();
      for (const o of items) counts.set(key(o), (counts.get(key(o)) ?? 0) + 1);
      const buckets = [...counts.entries()]
        .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
        .map(([label, count]) => ({ label, count, pct: (100.0 * count) / items.length }));
      return json({ dimension: by, total: items.length, buckets });
    }

    const coverageMatch = path.match(/^\/institutions\/([^/]+)\/coverage$/);
    if (coverageMatch) {
      const inst = decodeURIComponent(coverageMatch[1]!);
      const scope = params.get("cofog") ?? "all";
      const rows = data.coverage[scope === "all" ? "all" : scope];
      if (!rows) return error(400, "invalid_filter", `no opportunities in scope ${scope}`, "cofog");
      const row = rows.find((r) => r.institution_id === inst);
      if (!row) return error(404, "not_found", `unknown institution '${inst}'`);
      return json(row);
    }

    if (path === "/analytics/scatter") {
      const mode = params.get("mode") ?? "coverage";
      const scope = params.get("cofog") ?? "all";
      const rows = data.coverage[scope === "all" ? "all" : scope];
      if (!rows) return error(400, "invalid_filter", `no coverage for scope ${scope}`, "cofog");
      // scatter re-emits the coverage table values, exactly as the service does
      const points = rows.map((r) => ({
        institution_id: r.institution_id,
        x: data.stats[r.institution_id]?.n_with_abstracts ?? 0,
        y: r.coverage_pct,
        scope: r.scope,
      }));
      return json({ mode, scope: scope === "all" ? "all" : scope, points });
    }

    return error(404, "not_found", `no route for ${path}`);
  };

  return { fetch: fetchImpl, calls };
}
