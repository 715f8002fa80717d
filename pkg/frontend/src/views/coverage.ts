// Coverage dashboard: publication volume vs coverage percentage per
// institution, with a COFOG scope selector. Every plotted value is taken
// verbatim from the scatter endpoint (which itself re-emits the coverage
// tables); the axis in coverage mode is capped at 100%.

import { ApiClient, ScatterResponse, ServiceError, ServiceUnreachable } from "../api.js";
import { RequestGate } from "../requests.js";
import { errorBanner, escapeHtml } from "../render.js";

export interface CoverageCallbacks {
  onScopeChange(scope: string): void;
}

export const SCOPES: { value: string; label: string }[] = [
  { value: "", label: "All opportunities" },
  { value: "07", label: "Health" },
  { value: "02", label: "Defence" },
];

const WIDTH = 640;
const HEIGHT = 400;
const MARGIN = 40;

export class CoverageView {
  readonly gate = new RequestGate();
  scatter: ScatterResponse | null = null;
  error: string | null = null;
  emptyScope = false;
  private lastScope = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly callbacks: CoverageCallbacks,
  ) {
    this.root.addEventListener("change", (event) => {
      const target = event.target as HTMLSelectElement;
      if (target.dataset["role"] === "scope") {
        this.callbacks.onScopeChange(target.value);
      }
    });
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset["action"] === "retry") {
        void this.refresh(this.lastScope);
      }
    });
  }

  async refresh(scope: string): Promise<void> {
    this.lastScope = scope;
    const seq = this.gate.next();
    this.error = null;
    this.emptyScope = false;
    try {
      const scatter = await this.api.getScatter("coverage", scope || undefined);
      if (!this.gate.isCurrent(seq)) return;
      this.scatter = scatter;
      this.emptyScope = scatter.points.length === 0;
    } catch (err) {
      if (!this.gate.isCurrent(seq)) return;
      this.scatter = null;
      if (err instanceof ServiceError && err.status === 400) {
        this.emptyScope = true;
      } else {
        this.error =
          err instanceof ServiceUnreachable
            ? "The matching service is unreachable."
            : `The service reported an error: ${err instanceof Error ? err.message : String(err)}`;
      }
    }
    this.render(scope);
  }

  private svg(): string {
    const scatter = this.scatter;
    if (!scatter) return "";
    const xMax = Math.max(1, ...scatter.points.map((p) => p.x));
    const yMax = 100; // coverage axis is a percentage, capped at 100
    const plotW = WIDTH - 2 * MARGIN;
    const plotH = HEIGHT - 2 * MARGIN;
    const circles = scatter.points
      .map((p) => {
        const cx = MARGIN + (p.x / xMax) * plotW;
        const cy = HEIGHT - MARGIN - (Math.min(p.y, yMax) / yMax) * plotH;
        // title carries the institution name and the exact service values
        return (
          `<circle class="point" r="5" cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}"` +
          ` data-institution="${escapeHtml(p.institution_id)}" data-x="${p.x}" data-y="${p.y}">` +
          `<title>${escapeHtml(p.institution_id)}: ${p.x} publications with abstracts, ` +
          `${p.y}% coverage</title></circle>`
        );
      })
      .join("");
    return (
      `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="scatter" role="img">` +
      `<line x1="${MARGIN}" y1="${HEIGHT - MARGIN}" x2="${WIDTH - MARGIN}" y2="${HEIGHT - MARGIN}" class="axis"/>` +
      `<line x1="${MARGIN}" y1="${MARGIN}" x2="${MARGIN}" y2="${HEIGHT - MARGIN}" class="axis"/>` +
      `<text x="${WIDTH / 2}" y="${HEIGHT - 8}" class="axis-label">Publications with abstracts</text>` +
      `<text x="12" y="${HEIGHT / 2}" class="axis-label" transform="rotate(-90 12 ${HEIGHT / 2})">Coverage % (0-100)</text>` +
      circles +
      `</svg>`
    );
  }

  private render(scope: string): void {
    if (this.error !== null) {
      this.root.innerHTML = errorBanner(this.error);
      return;
    }
    const options = SCOPES.map(
      (s) =>
        `<option value="${s.value}"${s.value === scope ? " selected" : ""}>${s.label}</option>`,
    ).join("");
    const body = this.emptyScope
      ? `<p class="empty-state">No opportunities exist in this policy area, so coverage is undefined here.</p>`
      : this.svg();
    this.root.innerHTML =
      `<div class="coverage-dashboard">` +
      `<label>Scope <select data-role="scope">${options}</select></label>` +
      body +
      `</div>`;
  }
}
