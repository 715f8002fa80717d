// Opportunity detail: rewrite fields, tiered publication matches in the
// exact order the service returns them, and the ranked researcher panel
// in endpoint order.

import { ApiClient, MatchItem, OpportunityDetail, RankedResearcher, ServiceError, ServiceUnreachable } from "../api.js";
import { RequestGate } from "../requests.js";
import { errorBanner, escapeHtml, tierBadge } from "../render.js";

export class DetailView {
  readonly gate = new RequestGate();
  detail: OpportunityDetail | null = null;
  matches: MatchItem[] = [];
  researchers: RankedResearcher[] = [];
  error: string | null = null;
  notFound = false;
  private lastId: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset["action"] === "retry" && this.lastId) {
        void this.refresh(this.lastId);
      }
    });
  }

  async refresh(opportunityId: string): Promise<void> {
    this.lastId = opportunityId;
    const seq = this.gate.next();
    this.error = null;
    this.notFound = false;
    try {
      const [detail, matches, researchers] = await Promise.all([
        this.api.getOpportunity(opportunityId),
        this.api.getMatches(opportunityId),
        this.api.getResearchers(opportunityId),
      ]);
      if (!this.gate.isCurrent(seq)) return;
      this.detail = detail;
      this.matches = matches.items;
      this.researchers = researchers.items;
    } catch (err) {
      if (!this.gate.isCurrent(seq)) return;
      this.detail = null;
      if (err instanceof ServiceError && err.status === 404) {
        this.notFound = true;
      } else {
        this.error =
          err instanceof ServiceUnreachable
            ? "The matching service is unreachable."
            : `The service reported an error: ${err instanceof Error ? err.message : String(err)}`;
      }
    }
    this.render();
  }

  private render(): void {
    if (this.notFound) {
      this.root.innerHTML = `<p class="empty-state not-found">This opportunity does not exist.</p>`;
      return;
    }
    if (this.error !== null) {
      this.root.innerHTML = errorBanner(this.error);
      return;
    }
    const detail = this.detail;
    if (!detail) return;
    const o = detail.opportunity;
    const r = detail.rewrite;
    const rewriteHtml = r
      ? `<section class="rewrite"><h3>${escapeHtml(r.rewritten_title)}</h3>` +
        `<p>${escapeHtml(r.background)}</p>` +
        `<h4>Research questions</h4><ul>` +
        r.research_questions.map((q) => `<li>${escapeHtml(q)}</li>`).join("") +
        `</ul><p class="keywords">Keywords: ${r.keywords.map(escapeHtml).join(", ")}</p></section>`
      : "";
    const matchRows = this.matches
      .map(
        (m) =>
          `<tr><td>${escapeHtml(m.title ?? m.publication_id)}</td>` +
          `<td class="distance">${m.distance.toFixed(3)}</td>` +
          `<td>${tierBadge(m.tier)}</td></tr>`,
      )
      .join("");
    const matchesHtml = this.matches.length
      ? `<table class="matches"><thead><tr><th>Publication</th><th>Distance</th><th>Tier</th></tr></thead>` +
        `<tbody>${matchRows}</tbody></table>`
      : `<p class="empty-state">No publications matched within the confidence thresholds.</p>`;
    const researcherRows = this.researchers
      .map(
        (p) =>
          `<li class="researcher"><span class="rank">#${p.rank}</span> ` +
          `<span class="author">${escapeHtml(p.author_id)}</span> ` +
          `<span class="count">${p.matched_work_count} matched works</span> ` +
          `<span class="best">best distance ${p.best_distance.toFixed(3)}</span></li>`,
      )
      .join("");
    const researchersHtml = this.researchers.length
      ? `<ol class="researchers">${researcherRows}</ol>`
      : `<p class="empty-state">No ranked researchers for this opportunity.</p>`;
    this.root.innerHTML =
      `<article class="detail">` +
      `<header><h2>${escapeHtml(o.title)}</h2>` +
      `<p class="meta">${escapeHtml(o.organisation)} | ${escapeHtml(o.country)} | ` +
      `${escapeHtml(o.cofog_label)} | ${escapeHtml(o.opportunity_type)}</p>` +
      `<p><a href="${escapeHtml(o.source_url)}">Source</a></p></header>` +
      rewriteHtml +
      `<section class="match-list"><h3>Matched publications</h3>${matchesHtml}</section>` +
      `<section class="researcher-list"><h3>Ranked researchers</h3>${researchersHtml}</section>` +
      `</article>`;
  }
}
