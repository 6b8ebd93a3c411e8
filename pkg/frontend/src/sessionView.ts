// View-state for one steering session: the latest description, the history
// tree as the server reports it, and which node is current.

import type { DescriptionView, HistoryNode, HistoryView } from "./types.js";

export interface TreeNode {
  node: HistoryNode;
  children: TreeNode[];
}

export interface UiSessionView {
  sessionId: string;
  description: DescriptionView | null;
  nodes: HistoryNode[];
  currentId: string | null;
}

export function emptyView(sessionId: string): UiSessionView {
  return { sessionId, description: null, nodes: [], currentId: null };
}

export function applyDescription(view: UiSessionView, d: DescriptionView): UiSessionView {
  return { ...view, description: d, currentId: d.state ?? view.currentId };
}

export function applyHistory(view: UiSessionView, h: HistoryView): UiSessionView {
  return { ...view, nodes: h.nodes, currentId: h.current };
}

export function historyTree(nodes: readonly HistoryNode[]): TreeNode[] {
  const byId = new Map<string, TreeNode>();
  for (const node of nodes) byId.set(node.id, { node, children: [] });
  const roots: TreeNode[] = [];
  for (const node of nodes) {
    const wrapped = byId.get(node.id)!;
    const parent = node.parent ? byId.get(node.parent) : undefined;
    if (parent) parent.children.push(wrapped);
    else roots.push(wrapped);
  }
  return roots;
}

export function pathToCurrent(nodes: readonly HistoryNode[], currentId: string | null): HistoryNode[] {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  const path: HistoryNode[] = [];
  let cursor = currentId ? byId.get(currentId) : undefined;
  while (cursor) {
    path.unshift(cursor);
    cursor = cursor.parent ? byId.get(cursor.parent) : undefined;
  }
  return path;
}
