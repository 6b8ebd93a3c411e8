export type QuestionType = "when_do_you" | "what_do_you_do_when" | "circumstances";
export type Strength = "strict" | "usually";
export type PredicateRole = "input" | "output" | "joint";

export interface PredicateView {
  name: string;
  role: PredicateRole;
  label?: string | null;
}

export interface ConditionView {
  condition: Record<string, unknown>;
  unique_volume: number;
  total_volume: number;
  text: string;
}

export interface DescriptionView {
  v: number;
  status: "ready" | "pending" | "no_situation" | "exited";
  state?: string | null;
  epsilon?: number | null;
  degraded?: boolean;
  message?: string | null;
  selected_predicate?: string | null;
  conditions: ConditionView[];
}

export interface HistoryNode {
  id: string;
  parent: string | null;
  epsilon: number;
  merge_enabled: boolean;
  ignored: string[];
  question: Record<string, unknown>;
  condition_count: number;
}

export interface HistoryView {
  v: number;
  current: string | null;
  nodes: HistoryNode[];
}

export interface QuestionPayload {
  v: number;
  type: QuestionType;
  strength: Strength;
  dnf: string[][];
}
