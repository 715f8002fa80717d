// Single-page bootstrap: the URL is the source of truth for view state;
// every state change goes through pushState so views are shareable and
// the back button works.

import { ApiClient } from "./api.js";
import { DEFAULT_STATE, parseState, serializeState, ViewState } from "./viewState.js";
import { BrowserView } from "./views/browser.js";
import { DetailView } from "./views/detail.js";
import { CoverageView } from "./views/coverage.js";

export class App {
  state: ViewState = { ...DEFAULT_STATE };
  readonly browser: BrowserView;
  readonly detail: DetailView;
  readonly coverage: CoverageView;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly history: { pushState(state: unknown, unused: string, url: string): void },
  ) {
    this.root.innerHTML =
      `<nav class="top-nav">` +
      `<button type="button" data-nav="browse">Opportunities</button>` +
      `<button type="button" data-nav="coverage">Coverage dashboard</button>` +
      `</nav>` +
      `<div id="view-browser" hidden></div>` +
      `<div id="view-detail" hidden></div>` +
      `<div id="view-coverage" hidden></div>`;
    this.root.querySelector(".top-nav")!.addEventListener("click", (event) => {
      const nav = (event.target as HTMLElement).dataset["nav"];
      if (nav === "browse") this.update({ view: "browse", opportunity: "" });
      if (nav === "coverage") this.update({ view: "coverage" });
    });
    this.browser = new BrowserView(this.root.querySelector("#view-browser")!, api, {
      onStateChange: (patch) => this.update(patch),
      onOpenOpportunity: (id) => this.update({ view: "detail", opportunity: id }),
    });
    this.detail = new DetailView(this.root.querySelector("#view-detail")!, api);
    this.coverage = new CoverageView(this.root.querySelector("#view-coverage")!, api, {
      onScopeChange: (scope) => this.update({ scope }),
    });
  }

  async start(search: string): Promise<void> {
    this.state = parseState(search);
    await this.renderActive();
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.history.pushState(null, "", serializeState(this.state) || "?");
    void this.renderActive();
  }

  async renderActive(): Promise<void> {
    const show = (id: string) => {
      for (const viewId of ["view-browser", "view-detail", "view-coverage"]) {
        (this.root.querySelector(`#${viewId}`) as HTMLElement).hidden = viewId !== id;
      }
    };
    if (this.state.view === "detail" && this.state.opportunity) {
      show("view-detail");
      await this.detail.refresh(this.state.opportunity);
    } else if (this.state.view === "coverage") {
      show("view-coverage");
      await this.coverage.refresh(this.state.scope);
    } else {
      show("view-browser");
      await this.browser.refresh(this.state);
    }
  }
}

declare const window: (Window & typeof globalThis) | undefined;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const rootElement = document.getElementById("app");
  if (rootElement) {
    const base =
      rootElement.dataset["serviceUrl"] ?? `${window.location.protocol}//${window.location.host}`;
    const app = new App(rootElement, new ApiClient(base), window.history);
    window.addEventListener("popstate", () => {
      void app.start(window.location.search);
    });
    void app.start(window.location.search);
  }
}
