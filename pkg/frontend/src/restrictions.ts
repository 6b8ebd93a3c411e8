// Client-side mirror of the server's per-question-type predicate filter.
// The palette must never offer a predicate the server would reject, so this
// table is contract-tested against GET /packs/{id}/predicates.

import type { PredicateRole, PredicateView, QuestionType } from "./types.js";

export const CONTENT_ROLES: Record<QuestionType, readonly PredicateRole[]> = {
  when_do_you: ["output"],
  what_do_you_do_when: ["input"],
  circumstances: ["input", "output", "joint"],
};

export function allowedForQuestion(
  predicates: readonly PredicateView[],
  questionType: QuestionType,
): PredicateView[] {
  const roles = CONTENT_ROLES[questionType];
  return predicates.filter((p) => roles.includes(p.role));
}
