// HTML-string renderers.  Pure functions so the views are unit-testable
// without a DOM; main.ts assigns the results to innerHTML and wires events
// through data-* attributes.

import type { TreeNode } from "./sessionView.js";
import type { DescriptionView, PredicateView } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function bar(value: number, cls: string): string {
  const pct = Math.max(0, Math.min(100, Math.round(value * 100)));
  return `<span class="bar ${cls}" style="width:${pct}%"></span>`;
}

export function renderDescription(d: DescriptionView | null): string {
  if (d === null) return `<p class="hint">ask a question to get a description</p>`;
  if (d.status === "no_situation") {
    return `<p class="warn">${esc(d.message ?? "no situation corresponds")}</p>`;
  }
  if (d.status === "exited") return `<p class="hint">session closed</p>`;
  const rows = d.conditions
    .map(
      (c) => `
      <li class="condition">
        <span class="weights">${bar(c.unique_volume, "uv")}${bar(c.total_volume, "tv")}</span>
        <code>${esc(c.text)}</code>
        ${renderIgnoreChip(c)}
      </li>`,
    )
    .join("");
  const degraded = d.degraded ? ` <em class="warn">(coarse: analysis caps hit)</em>` : "";
  const selected = d.selected_predicate
    ? `<p class="hint">auto-ignored: <code>${esc(d.selected_predicate)}</code></p>`
    : "";
  return `
    <h3>answer at &epsilon;=${d.epsilon}${degraded}</h3>
    ${selected}
    <ol class="description">${rows || "<li class='hint'>(empty description)</li>"}</ol>`;
}

function renderIgnoreChip(c: { condition: Record<string, unknown> }): string {
  if (c.condition["kind"] === "named") {
    const name = String(c.condition["name"]);
    return `<button class="ignore" data-ignore="${esc(name)}" title="regenerate without this predicate">ignore</button>`;
  }
  return "";
}

export function renderPalette(
  predicates: readonly PredicateView[],
  selected: ReadonlySet<string>,
): string {
  const chips = predicates
    .map((p) => {
      const cls = ["chip", p.role, selected.has(p.name) ? "selected" : ""].join(" ").trim();
      const label = p.label ? `<sup>${esc(p.label)}</sup>` : "";
      return `<button class="${cls}" data-predicate="${esc(p.name)}">${esc(p.name)}${label}</button>`;
    })
    .join("");
  return `<div class="palette">${chips || "<span class='hint'>no predicates for this question type</span>"}</div>`;
}

export function renderHistoryTree(roots: readonly TreeNode[], currentId: string | null): string {
  const renderNode = (t: TreeNode): string => {
    const cls = t.node.id === currentId ? "node current" : "node";
    const children = t.children.length
      ? `<ul>${t.children.map(renderNode).join("")}</ul>`
      : "";
    return `
      <li>
        <button class="${cls}" data-node="${esc(t.node.id)}">
          &epsilon;=${t.node.epsilon}${t.node.merge_enabled ? " &middot; merged" : ""}
          &middot; ${t.node.condition_count} cond
        </button>
        ${children}
      </li>`;
  };
  return `<ul class="history">${roots.map(renderNode).join("")}</ul>`;
}
