// Faceted opportunity browser. Facet counts come from the service's
// distribution endpoint and list rows from the opportunities endpoint;
// this view only arranges those responses, it never counts anything
// itself.

import { ApiClient, Distribution, OpportunityPage, ServiceUnreachable } from "../api.js";
import { RequestGate } from "../requests.js";
import { errorBanner, escapeHtml } from "../render.js";
import { ViewState } from "../viewState.js";

export interface BrowserCallbacks {
  onStateChange(patch: Partial<ViewState>): void;
  onOpenOpportunity(id: string): void;
}

const FACETS: { dimension: "cofog" | "country" | "opportunity_type"; stateKey: "cofog" | "country" | "type"; label: string }[] = [
  { dimension: "cofog", stateKey: "cofog", label: "Policy area" },
  { dimension: "country", stateKey: "country", label: "Country" },
  { dimension: "opportunity_type", stateKey: "type", label: "Type" },
];

export class BrowserView {
  readonly gate = new RequestGate();
  page: OpportunityPage | null = null;
  facets: Partial<Record<string, Distribution>> = {};
  error: string | null = null;
  private lastState: ViewState | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly callbacks: BrowserCallbacks,
  ) {
    this.root.addEventListener("click", (event) => this.onClick(event));
  }

  async refresh(state: ViewState): Promise<void> {
    this.lastState = state;
    const seq = this.gate.next();
    this.error = null;
    try {
      const [page, ...distributions] = await Promise.all([
        this.api.listOpportunities({
          country: state.country || undefined,
          cofog: state.cofog || undefined,
          type: state.type || undefined,
          q: state.q || undefined,
          cursor: state.cursor || undefined,
          limit: 50,
        }),
        ...FACETS.map((facet) =>
          this.api.getDistribution(facet.dimension, {
            country: facet.stateKey === "country" ? undefined : state.country || undefined,
            type: facet.stateKey === "type" ? undefined : state.type || undefined,
          }),
        ),
      ]);
      if (!this.gate.isCurrent(seq)) return; // stale; a newer request owns the view
      this.page = page;
      this.facets = {};
      FACETS.forEach((facet, i) => {
        this.facets[facet.dimension] = distributions[i];
      });
    } catch (err) {
      if (!this.gate.isCurrent(seq)) return;
      this.page = null;
      this.error =
        err instanceof ServiceUnreachable
          ? "The matching service is unreachable."
          : `The service reported an error: ${err instanceof Error ? err.message : String(err)}`;
    }
    this.render(state);
  }

  private onClick(event: Event): void {
    const target = event.target as HTMLElement;
    const action = target.dataset["action"];
    if (action === "retry" && this.lastState) {
      void this.refresh(this.lastState);
    } else if (action === "facet") {
      const key = target.dataset["key"] as "cofog" | "country" | "type";
      const value = target.dataset["value"] ?? "";
      this.callbacks.onStateChange({ [key]: value, cursor: "" });
    } else if (action === "clear-filters") {
      this.callbacks.onStateChange({ country: "", cofog: "", type: "", q: "", cursor: "" });
    } else if (action === "open") {
      this.callbacks.onOpenOpportunity(target.dataset["id"] ?? "");
    } else if (action === "next-page" && this.page?.next_cursor) {
      this.callbacks.onStateChange({ cursor: this.page.next_cursor });
    } else if (action === "search" && this.lastState) {
      const input = this.root.querySelector<HTMLInputElement>("input[name=q]");
      this.callbacks.onStateChange({ q: input?.value ?? "", cursor: "" });
    }
  }

  private facetHtml(state: ViewState): string {
    const sections = FACETS.map((facet) => {
      const distribution = this.facets[facet.dimension];
      if (!distribution) return "";
      const active = state[facet.stateKey];
      const rows = distribution.buckets
        .map((bucket) => {
          const isActive = active === bucket.label || active === bucketValue(facet.stateKey, bucket.label);
          return (
            `<li><button type="button" data-action="facet" data-key="${facet.stateKey}"` +
            ` data-value="${isActive ? "" : escapeHtml(bucket.label)}"` +
            ` class="facet${isActive ? " active" : ""}">` +
            `${escapeHtml(bucket.label)} <span class="facet-count">${bucket.count}</span>` +
            `</button></li>`
          );
        })
        .join("");
      return `<section class="facet-group"><h3>${facet.label}</h3><ul>${rows}</ul></section>`;
    });
    return sections.join("");
  }

  private render(state: ViewState): void {
    if (this.error !== null) {
      this.root.innerHTML = errorBanner(this.error);
      return;
    }
    const page = this.page;
    if (!page) return;
    const rows = page.items
      .map(
        (o) =>
          `<tr>` +
          `<td><button type="button" data-action="open" data-id="${escapeHtml(o.id)}" class="link">` +
          `${escapeHtml(o.title)}</button></td>` +
          `<td>${escapeHtml(o.organisation)}</td>` +
          `<td>${escapeHtml(o.country)}</td>` +
          `<td>${escapeHtml(o.cofog_label)}</td>` +
          `<td>${escapeHtml(o.opportunity_type)}</td>` +
          `</tr>`,
      )
      .join("");
    const empty =
      page.items.length === 0
        ? `<p class="empty-state">No opportunities match the current filters.</p>`
        : "";
    const total = page.total !== null ? `<span class="total">${page.total} opportunities</span>` : "";
    const next = page.next_cursor
      ? `<button type="button" data-action="next-page">Next page</button>`
      : "";
    this.root.innerHTML =
      `<div class="browser">` +
      `<aside class="facets">${this.facetHtml(state)}` +
      `<button type="button" data-action="clear-filters">Clear filters</button></aside>` +
      `<main class="results">` +
      `<form onsubmit="return false"><input name="q" value="${escapeHtml(state.q)}" placeholder="Search text" />` +
      `<button type="button" data-action="search">Search</button> ${total}</form>` +
      `<table><thead><tr><th>Title</th><th>Organisation</th><th>Country</th>` +
      `<th>Policy area</th><th>Type</th></tr></thead><tbody>${rows}</tbody></table>` +
      `${empty}${next}</main></div>`;
  }
}

function bucketValue(key: "cofog" | "country" | "type", label: string): string {
  return label;
}
