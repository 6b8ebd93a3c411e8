import { describe, expect, it } from "vitest";
import { renderDescription, renderHistoryTree, renderPalette } from "../src/render.js";
import { historyTree, pathToCurrent } from "../src/sessionView.js";
import type { DescriptionView, HistoryNode } from "../src/types.js";

const description: DescriptionView = {
  v: 1,
  status: "ready",
  state: "abc",
  epsilon: 0.25,
  degraded: false,
  conditions: [
    { condition: { kind: "named", name: "x_high" }, unique_volume: 0.75, total_volume: 1.0, text: "x_high" },
    { condition: { kind: "box_range", bounds: {} }, unique_volume: 0.25, total_volume: 0.25, text: "box{x: [0, 1]}" },
  ],
};

describe("rendering", () => {
  it("sorts description rows with uv/tv bars and ignore chips for named conditions", () => {
    const html = renderDescription(description);
    expect(html).toContain("x_high");
    expect(html).toContain('style="width:75%"');
    expect(html).toContain('data-ignore="x_high"');
    // box-range rows get no ignore chip
    expect(html.match(/data-ignore/g)).toHaveLength(1);
    expect(html).toContain("box{x: [0, 1]}");
  });

  it("shows the no-situation message", () => {
    const html = renderDescription({ v: 1, status: "no_situation", message: "nothing", conditions: [] });
    expect(html).toContain("nothing");
  });

  it("escapes markup in predicate names", () => {
    const html = renderPalette([{ name: "a<b", role: "input" }], new Set());
    expect(html).toContain("a&lt;b");
    expect(html).not.toContain("a<b");
  });
});

const nodes: HistoryNode[] = [
  { id: "r", parent: null, epsilon: 0.25, merge_enabled: false, ignored: [], question: {}, condition_count: 2 },
  { id: "m", parent: "r", epsilon: 0.5, merge_enabled: true, ignored: [], question: {}, condition_count: 1 },
  { id: "l", parent: "r", epsilon: 0.125, merge_enabled: false, ignored: [], question: {}, condition_count: 4 },
];

describe("history tree", () => {
  it("groups children under parents", () => {
    const roots = historyTree(nodes);
    expect(roots).toHaveLength(1);
    expect(roots[0].children.map((c) => c.node.id).sort()).toEqual(["l", "m"]);
  });

  it("path to current walks parents", () => {
    expect(pathToCurrent(nodes, "m").map((n) => n.id)).toEqual(["r", "m"]);
  });

  it("marks the current node in the rendered tree", () => {
    const html = renderHistoryTree(historyTree(nodes), "m");
    expect(html).toContain('class="node current" data-node="m"');
  });
});
