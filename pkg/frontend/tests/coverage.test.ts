// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, CoverageRow } from "../src/api.js";
import { CoverageView } from "../src/views/coverage.js";
import { coverageRow, createMockService, MockData } from "./mockService.js";

function dataset(): MockData {
  return {
    opportunities: [],
    rewrites: {},
    matches: {},
    researchers: {},
    coverage: {
      all: [
        coverageRow("inst-01", "all", 50, 19),
        coverageRow("inst-02", "all", 50, 7),
        coverageRow("inst-03", "all", 50, 0),
      ],
      "07": [
        coverageRow("inst-01", "07", 8, 3),
        coverageRow("inst-02", "07", 8, 1),
        coverageRow("inst-03", "07", 8, 0),
      ],
      "02": [
        coverageRow("inst-01", "02", 5, 1),
        coverageRow("inst-02", "02", 5, 0),
        coverageRow("inst-03", "02", 5, 0),
      ],
    },
    stats: {
      "inst-01": { n_with_abstracts: 120 },
      "inst-02": { n_with_abstracts: 45 },
      "inst-03": { n_with_abstracts: 9 },
    },
  };
}

function setup(data: MockData = dataset()) {
  const service = createMockService(data);
  const root = document.createElement("div");
  document.body.appendChild(root);
  const scopes: string[] = [];
  const view = new CoverageView(root, new ApiClient("http://svc.test", service.fetch), {
    onScopeChange: (scope) => scopes.push(scope),
  });
  return { service, root, view, scopes };
}

describe("coverage dashboard", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("plots y values bit-equal to the coverage endpoint", async () => {
    const { root, view } = setup();
    const api = new ApiClient("http://svc.test", createMockService(dataset()).fetch);
    await view.refresh("");
    const circles = [...root.querySelectorAll("circle.point")];
    expect(circles).toHaveLength(3);
    for (const circle of circles) {
      const inst = circle.getAttribute("data-institution")!;
      const row: CoverageRow = await api.getCoverage(inst);
      // no client-side math: the rendered value IS the service value
      expect(Number(circle.getAttribute("data-y"))).toBe(row.coverage_pct);
      expect(view.scatter!.points.find((p) => p.institution_id === inst)!.y).toBe(
        row.coverage_pct,
      );
    }
  });

  it("hover title reveals institution and exact values", async () => {
    const { root, view } = setup();
    await view.refresh("");
    const title = root.querySelector("circle.point title")!.textContent!;
    expect(title).toContain("inst-01");
    expect(title).toContain("120");
    expect(title).toContain(`${(100 * 19) / 50}%`);
  });

  it("switching scope to Defence re-fetches scope=02 data", async () => {
    const { root, view, scopes, service } = setup();
    await view.refresh("");
    const select = root.querySelector<HTMLSelectElement>("select[data-role=scope]")!;
    select.value = "02";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    expect(scopes).toEqual(["02"]);

    await view.refresh("02");
    expect(service.calls.at(-1)).toContain("cofog=02");
    const ys = [...root.querySelectorAll("circle.point")].map((c) =>
      Number(c.getAttribute("data-y")),
    );
    expect(ys).toEqual([20, 0, 0]); // 100*1/5, 0, 0 straight from the mock rows
  });

  it("caps the y axis at 100 percent", async () => {
    const data = dataset();
    data.coverage["all"] = [coverageRow("inst-01", "all", 10, 10)]; // exactly 100%
    const { root, view } = setup(data);
    await view.refresh("");
    const circle = root.querySelector("circle.point")!;
    // 100% sits exactly on the top of the plot area (MARGIN = 40)
    expect(Number(circle.getAttribute("cy"))).toBeCloseTo(40, 5);
    expect(root.textContent).toContain("Coverage % (0-100)");
  });

  it("explains an empty scope instead of rendering nothing", async () => {
    const data = dataset();
    delete data.coverage["02"];
    const { root, view } = setup(data);
    await view.refresh("02");
    expect(view.emptyScope).toBe(true);
    expect(root.querySelector(".empty-state")!.textContent).toContain("coverage is undefined");
  });

  it("unreachable service shows the error banner", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const view = new CoverageView(
      root,
      new ApiClient("http://svc.test", async () => {
        throw new TypeError("down");
      }),
      { onScopeChange: () => {} },
    );
    await view.refresh("");
    expect(root.querySelector(".error-banner")).not.toBeNull();
  });
});
