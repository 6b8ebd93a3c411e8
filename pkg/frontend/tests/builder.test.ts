import { describe, expect, it } from "vitest";
import {
  addClause,
  buildPayload,
  emptyBuilder,
  setQuestionType,
  togglePredicate,
  toggleUsually,
  validateBuilder,
} from "../src/questionBuilder.js";
import type { PredicateView } from "../src/types.js";

const palette: PredicateView[] = [
  { name: "out_a", role: "output" },
  { name: "out_b", role: "output" },
  { name: "in_a", role: "input" },
];

describe("question builder", () => {
  it("assembles a DNF payload from selections", () => {
    let b = emptyBuilder("when_do_you");
    b = togglePredicate(b, 0, "out_a");
    b = togglePredicate(b, 0, "out_b");
    b = addClause(b);
    b = togglePredicate(b, 1, "out_a");
    const payload = buildPayload(b);
    expect(payload).toEqual({
      v: 1,
      type: "when_do_you",
      strength: "strict",
      dnf: [["out_a", "out_b"], ["out_a"]],
    });
    expect(validateBuilder(b, palette)).toEqual([]);
  });

  it("toggling removes a selected predicate", () => {
    let b = emptyBuilder("when_do_you");
    b = togglePredicate(b, 0, "out_a");
    b = togglePredicate(b, 0, "out_a");
    expect(buildPayload(b).dnf).toEqual([]);
    expect(validateBuilder(b, palette)).toContain("pick at least one predicate");
  });

  it("usually toggle switches the strength variant", () => {
    let b = emptyBuilder("when_do_you");
    b = togglePredicate(b, 0, "out_a");
    expect(buildPayload(b).strength).toBe("strict");
    b = toggleUsually(b);
    expect(buildPayload(b).strength).toBe("usually");
  });

  it("switching question type clears selections made under other rules", () => {
    let b = emptyBuilder("circumstances");
    b = togglePredicate(b, 0, "in_a");
    b = setQuestionType(b, "when_do_you");
    expect(buildPayload(b).dnf).toEqual([]);
  });

  it("rejects off-palette picks for the question type", () => {
    let b = emptyBuilder("when_do_you");
    b = togglePredicate(b, 0, "in_a");
    expect(validateBuilder(b, palette)).toContain(
      "in_a is not allowed for this question type",
    );
  });

  it("rejects duplicate clauses", () => {
    let b = emptyBuilder("when_do_you");
    b = togglePredicate(b, 0, "out_a");
    b = addClause(b);
    b = togglePredicate(b, 1, "out_a");
    expect(validateBuilder(b, palette)).toContain("duplicate clause");
  });
});
