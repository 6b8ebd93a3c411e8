import { describe, expect, it } from "vitest";
import { CONTENT_ROLES, allowedForQuestion } from "../src/restrictions.js";
import type { PredicateView } from "../src/types.js";

const palette: PredicateView[] = [
  { name: "in_a", role: "input" },
  { name: "in_b", role: "input", label: "LA" },
  { name: "out_a", role: "output", label: "MA" },
  { name: "joint_a", role: "joint" },
];

describe("question-type palette filter", () => {
  it("when_do_you offers only output predicates", () => {
    expect(allowedForQuestion(palette, "when_do_you").map((p) => p.name)).toEqual(["out_a"]);
  });

  it("what_do_you_do_when offers only input predicates", () => {
    expect(allowedForQuestion(palette, "what_do_you_do_when").map((p) => p.name)).toEqual([
      "in_a",
      "in_b",
    ]);
  });

  it("circumstances offers everything", () => {
    expect(allowedForQuestion(palette, "circumstances")).toHaveLength(4);
  });

  it("covers all three question types exactly", () => {
    expect(Object.keys(CONTENT_ROLES).sort()).toEqual([
      "circumstances",
      "what_do_you_do_when",
      "when_do_you",
    ]);
  });
});
