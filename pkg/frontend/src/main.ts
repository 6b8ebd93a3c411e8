// Browser wiring: palette -> question builder -> steering controls ->
// description + history panes.  Controls disable while a mutation is in
// flight, matching the server's one-writer rule.

import { Api, ApiError } from "./api.js";
import {
  BuilderState,
  addClause,
  buildPayload,
  emptyBuilder,
  setQuestionType,
  togglePredicate,
  toggleUsually,
  validateBuilder,
} from "./questionBuilder.js";
import { renderDescription, renderHistoryTree, renderPalette } from "./render.js";
import { UiSessionView, applyDescription, applyHistory, emptyView, historyTree } from "./sessionView.js";
import type { PredicateView, QuestionType } from "./types.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

async function start(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const base = params.get("server") ?? "";
  const pack = params.get("pack") ?? "idp";
  const epsilon0 = Number(params.get("epsilon") ?? "0.25");
  const api = new Api(base);

  let builder: BuilderState = emptyBuilder();
  let palette: PredicateView[] = [];
  let view: UiSessionView = emptyView(await api.createSession(pack, pack, epsilon0));

  async function refreshPalette(): Promise<void> {
    palette = await api.predicates(pack, builder.questionType);
    drawBuilder();
  }

  function drawBuilder(): void {
    const selected = new Set(builder.clauses.flat());
    $("palette").innerHTML = renderPalette(palette, selected);
    $("clauses").textContent = builder.clauses
      .filter((c) => c.length)
      .map((c) => c.join(" AND "))
      .join("  OR  ");
    for (const btn of $("palette").querySelectorAll<HTMLButtonElement>("[data-predicate]")) {
      btn.onclick = () => {
        builder = togglePredicate(builder, builder.clauses.length - 1, btn.dataset.predicate!);
        drawBuilder();
      };
    }
  }

  function drawSession(): void {
    $("description").innerHTML = renderDescription(view.description);
    $("historyPane").innerHTML = renderHistoryTree(historyTree(view.nodes), view.currentId);
    for (const btn of $("historyPane").querySelectorAll<HTMLButtonElement>("[data-node]")) {
      btn.onclick = () => steer("history", btn.dataset.node);
    }
    for (const btn of $("description").querySelectorAll<HTMLButtonElement>("[data-ignore]")) {
      btn.onclick = () => steer("ignore", btn.dataset.ignore);
    }
  }

  function setBusy(busy: boolean): void {
    for (const el of document.querySelectorAll<HTMLButtonElement>("button")) {
      el.disabled = busy;
    }
  }

  async function guard(action: () => Promise<void>): Promise<void> {
    if (api.busy) return; // single in-flight mutation per session
    setBusy(true);
    try {
      await action();
      $("errors").textContent = "";
    } catch (err) {
      $("errors").textContent =
        err instanceof ApiError ? (err.body.violations ?? [err.message]).join("; ") : String(err);
    } finally {
      setBusy(false);
      drawSession();
    }
  }

  async function steer(kind: string, arg?: string): Promise<void> {
    await guard(async () => {
      const d = await api.respond(kind, arg);
      view = applyDescription(view, d);
      view = applyHistory(view, await api.history());
    });
  }

  ($("questionType") as HTMLSelectElement).onchange = (ev) => {
    builder = setQuestionType(builder, (ev.target as HTMLSelectElement).value as QuestionType);
    void refreshPalette();
  };
  ($("usually") as HTMLInputElement).onchange = () => {
    builder = toggleUsually(builder);
  };
  $("addClause").onclick = () => {
    builder = addClause(builder);
    drawBuilder();
  };
  $("ask").onclick = () =>
    guard(async () => {
      const problems = validateBuilder(builder, palette);
      if (problems.length) throw new ApiError(400, { violations: problems });
      const d = await api.ask(buildPayload(builder));
      view = applyDescription(view, d);
      view = applyHistory(view, await api.history());
    });
  $("ma").onclick = () => steer("ma");
  $("la").onclick = () => steer("la");
  $("aps").onclick = () => steer("aps", "ma");
  $("exit").onclick = () => steer("exit");

  await refreshPalette();
  drawSession();
}

void start();
