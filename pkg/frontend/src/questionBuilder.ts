// Assembles a question payload from palette selections.  A clause is a set of
// predicate chips; clauses are OR-ed together.  The builder refuses anything
// the server would bounce (duplicates, off-palette picks, empty content).

import { allowedForQuestion } from "./restrictions.js";
import type { PredicateView, QuestionPayload, QuestionType } from "./types.js";

export interface BuilderState {
  questionType: QuestionType;
  usually: boolean;
  clauses: string[][];
}

export function emptyBuilder(questionType: QuestionType = "when_do_you"): BuilderState {
  return { questionType, usually: false, clauses: [[]] };
}

export function setQuestionType(state: BuilderState, questionType: QuestionType): BuilderState {
  // switching the type invalidates selections made under other restrictions
  return { questionType, usually: state.usually, clauses: [[]] };
}

export function toggleUsually(state: BuilderState): BuilderState {
  return { ...state, usually: !state.usually };
}

export function togglePredicate(state: BuilderState, clause: number, name: string): BuilderState {
  const clauses = state.clauses.map((c) => [...c]);
  while (clauses.length <= clause) clauses.push([]);
  const idx = clauses[clause].indexOf(name);
  if (idx >= 0) clauses[clause].splice(idx, 1);
  else clauses[clause].push(name);
  return { ...state, clauses };
}

export function addClause(state: BuilderState): BuilderState {
  return { ...state, clauses: [...state.clauses.map((c) => [...c]), []] };
}

export function validateBuilder(
  state: BuilderState,
  palette: readonly PredicateView[],
): string[] {
  const problems: string[] = [];
  const allowed = new Set(allowedForQuestion(palette, state.questionType).map((p) => p.name));
  const nonEmpty = state.clauses.filter((c) => c.length > 0);
  if (nonEmpty.length === 0) problems.push("pick at least one predicate");
  const seen = new Set<string>();
  for (const clause of nonEmpty) {
    if (new Set(clause).size !== clause.length) problems.push("a clause repeats a predicate");
    const key = [...clause].sort().join(",");
    if (seen.has(key)) problems.push("duplicate clause");
    seen.add(key);
    for (const name of clause) {
      if (!allowed.has(name)) problems.push(`${name} is not allowed for this question type`);
    }
  }
  return problems;
}

export function buildPayload(state: BuilderState): QuestionPayload {
  return {
    v: 1,
    type: state.questionType,
    strength: state.usually ? "usually" : "strict",
    dnf: state.clauses.filter((c) => c.length > 0),
  };
}
