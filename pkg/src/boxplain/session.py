"""Interactive sessions: states, steering operators, history, and the
automatic predicate selector.

Each user response produces a fresh immutable state snapshot (hyper-parameters,
reach set, description, parent link), so history travel is just a lookup.
More/less-abstract requests double/halve the refinement parameter and
recompute; ignore requests regenerate the description only.  Every response is
appended to a newline-delimited JSON history log, which also feeds the
UCB-based selector that picks which predicate to drop automatically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decision import SmtBackend
from .description import NoSituationError, WeightedDescription, generate_description
from .predicates import DomainPack, Question
from .reachability import (
    AnalysisCaps,
    AnalysisStats,
    MergeParams,
    ReachSet,
    build_reachset,
    merge_boxes,
    question_to_spec,
)

log = logging.getLogger(__name__)

EPSILON_MIN = 1e-3
EPSILON_MAX = 1.0


@dataclass(frozen=True)
class SessionState:
    """One node of the interaction history tree."""

    id: str
    question: Question
    question_instance: str
    epsilon: float
    alpha: float
    n_sample: int
    merge_enabled: bool
    produce_greater_abstraction: bool
    ignored: tuple[str, ...]
    reach: ReachSet
    description: WeightedDescription
    parent: str | None
    degraded: bool = False

    def omega(self) -> dict[str, int]:
        """Occurrence count per named predicate in this state's description."""
        return dict(Counter(self.description.named_predicate_names()))


@dataclass(frozen=True)
class InteractionRecord:
    """One applied response: the state it answered, and what followed."""

    session: str
    state: str
    parent: str | None
    question_instance: str
    omega: dict[str, int]
    response: str
    successor: str | None

    def to_json(self) -> dict:
        return {
            "v": 1,
            "session": self.session,
            "state": self.state,
            "parent": self.parent,
            "question_instance": self.question_instance,
            "omega": self.omega,
            "response": self.response,
            "successor": self.successor,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "InteractionRecord":
        return cls(
            session=data["session"],
            state=data["state"],
            parent=data.get("parent"),
            question_instance=data["question_instance"],
            omega={k: int(v) for k, v in data["omega"].items()},
            response=data["response"],
            successor=data.get("successor"),
        )


class HistoryStore:
    """Append-only newline-delimited JSON log of interaction records."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: list[InteractionRecord] = []
        if self.path is not None and self.path.exists():
            self._records = list(self._read(self.path))

    @staticmethod
    def _read(path: Path) -> Iterable[InteractionRecord]:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield InteractionRecord.from_json(json.loads(line))
                except (ValueError, KeyError) as exc:
                    log.warning("skipping corrupt history line %d: %s", lineno, exc)

    def append(self, record: InteractionRecord) -> None:
        self._records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")

    def records(self) -> list[InteractionRecord]:
        return list(self._records)


# --- automatic predicate selection ---------------------------------------------


def aps_select(
    candidates: Sequence[str],
    history: Sequence[InteractionRecord],
    direction: str,
    exploration: float = 2.0,
) -> str:
    """UCB1 choice of which named predicate to drop next.

    For each candidate, past states count as a pull (occ) when the user made
    the same-direction request there and the predicate's occurrence count
    dropped in the successor; the pull succeeded (succ) when the successor's
    response reversed direction or broke out.  States without a responded-to
    successor contribute to neither occ nor the total pull count.  Unseen
    candidates are tried first, in declaration order.
    """
    if not candidates:
        raise ValueError("no candidate predicates")
    if direction not in ("ma", "la"):
        raise ValueError(f"direction must be 'ma' or 'la', got {direction!r}")
    reverse = "la" if direction == "ma" else "ma"
    responded: dict[str, InteractionRecord] = {r.state: r for r in history}

    occ: dict[str, int] = {c: 0 for c in candidates}
    succ: dict[str, int] = {c: 0 for c in candidates}
    for rec in history:
        if rec.response != direction or rec.successor is None:
            continue
        succ_rec = responded.get(rec.successor)
        if succ_rec is None:
            continue  # unanswered successor: occurrence count treated as infinite
        for c in candidates:
            if rec.omega.get(c, 0) > succ_rec.omega.get(c, 0):
                occ[c] += 1
                if succ_rec.response in (reverse, "break"):
                    succ[c] += 1

    unseen = [c for c in candidates if occ[c] == 0]
    if unseen:
        return unseen[0]
    total = sum(occ.values())
    best = candidates[0]
    best_score = -math.inf
    for c in candidates:
        score = succ[c] / occ[c] + math.sqrt(exploration * math.log(total) / occ[c])
        if score > best_score:
            best, best_score = c, score
    return best


# --- the engine ------------------------------------------------------------------


@dataclass
class EngineConfig:
    alpha: float = 0.1
    n_sample: int = 32
    shell_samples: int = 20
    caps: AnalysisCaps = field(default_factory=AnalysisCaps)
    merge_params: MergeParams = field(default_factory=MergeParams)
    force_k: int | None = None
    smt: SmtBackend | None = None


class SessionEngine:
    """Drives one interactive session over a (pack, model) pair."""

    def __init__(
        self,
        pack: DomainPack,
        model,
        epsilon0: float,
        seed: int = 0,
        config: EngineConfig | None = None,
        store: HistoryStore | None = None,
        session_id: str | None = None,
    ):
        self.pack = pack
        self.model = model
        self.epsilon0 = float(epsilon0)
        self.seed = int(seed)
        self.config = config or EngineConfig()
        self.store = store or HistoryStore()
        self.session_id = session_id or f"s{seed}"
        self.states: dict[str, SessionState] = {}
        self.order: list[str] = []
        self.current_id: str | None = None
        self._op_counter = 0
        self._ask_counter = 0

    # -- internals --

    def _rng(self) -> np.random.Generator:
        self._op_counter += 1
        return np.random.default_rng([self.seed, self._op_counter])

    def _state_id(self, payload: dict) -> str:
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def _caps_for(self, epsilon: float) -> AnalysisCaps:
        """Analysis budget scaled with the refinement request.

        The box budget is a state hyper-parameter like epsilon itself: asking
        for finer granularity grants a proportionally larger budget, so a
        less-abstract answer is never silently truncated to the coarse one.
        """
        base = self.config.caps
        scale = min(max(self.epsilon0 / epsilon, 0.5), 8.0)
        return AnalysisCaps(max_boxes=int(base.max_boxes * scale), max_depth=base.max_depth)

    def _compute(
        self,
        question: Question,
        question_instance: str,
        epsilon: float,
        merge_enabled: bool,
        produce_greater_abstraction: bool,
        ignored: tuple[str, ...],
        parent: str | None,
        reach: ReachSet | None = None,
    ) -> SessionState:
        cfg = self.config
        stats = AnalysisStats()
        rng = self._rng()
        if reach is None:
            reach = build_reachset(
                question, self.model, self.pack, epsilon, cfg.n_sample, rng,
                force_k=cfg.force_k, caps=self._caps_for(epsilon), smt=cfg.smt, stats=stats,
            )
        _phi, side = question_to_spec(question, self.pack)
        boxes = reach.illuminated_boxes(side)
        if merge_enabled and boxes:
            boxes = merge_boxes(boxes, cfg.merge_params)
        preds = [p for p in self.pack.ordered() if p.name not in ignored]
        description = generate_description(
            boxes, cfg.n_sample, preds, produce_greater_abstraction, self._rng(),
            shell_samples=cfg.shell_samples, alpha=cfg.alpha,
            merge_params=cfg.merge_params, smt=cfg.smt,
        )
        sid = self._state_id(
            {
                "session": self.session_id,
                "question": question.to_json(),
                "instance": question_instance,
                "epsilon": epsilon,
                "merge": merge_enabled,
                "pga": produce_greater_abstraction,
                "ignored": list(ignored),
                "parent": parent,
                "op": self._op_counter,
            }
        )
        state = SessionState(
            id=sid,
            question=question,
            question_instance=question_instance,
            epsilon=epsilon,
            alpha=cfg.alpha,
            n_sample=cfg.n_sample,
            merge_enabled=merge_enabled,
            produce_greater_abstraction=produce_greater_abstraction,
            ignored=ignored,
            reach=reach,
            description=description,
            parent=parent,
            degraded=stats.degraded,
        )
        self.states[sid] = state
        self.order.append(sid)
        self.current_id = sid
        return state

    def _record(self, state: SessionState, response: str, successor: str | None) -> None:
        self.store.append(
            InteractionRecord(
                session=self.session_id,
                state=state.id,
                parent=state.parent,
                question_instance=state.question_instance,
                omega=state.omega(),
                response=response,
                successor=successor,
            )
        )

    # -- public API --

    @property
    def current(self) -> SessionState:
        if self.current_id is None:
            raise RuntimeError("no question asked yet")
        return self.states[self.current_id]

    def ask(self, question: Question) -> SessionState:
        self._ask_counter += 1
        instance = f"{self.session_id}:q{self._ask_counter}"
        return self._compute(
            question, instance, self.epsilon0,
            merge_enabled=False, produce_greater_abstraction=False,
            ignored=(), parent=None,
        )

    def more_abstract(self) -> SessionState:
        cur = self.current
        new_eps = min(cur.epsilon * 2.0, EPSILON_MAX)
        state = self._compute(
            cur.question, cur.question_instance, new_eps,
            merge_enabled=True, produce_greater_abstraction=True,
            ignored=cur.ignored, parent=cur.id,
        )
        self._record(cur, "ma", state.id)
        return state

    def less_abstract(self) -> SessionState:
        cur = self.current
        new_eps = max(cur.epsilon / 2.0, EPSILON_MIN)
        state = self._compute(
            cur.question, cur.question_instance, new_eps,
            merge_enabled=False, produce_greater_abstraction=False,
            ignored=cur.ignored, parent=cur.id,
        )
        self._record(cur, "la", state.id)
        return state

    def travel(self, state_id: str) -> SessionState:
        if state_id not in self.states:
            raise KeyError(f"unknown state id {state_id!r}")
        self.current_id = state_id
        return self.states[state_id]

    def ignore(self, predicate_name: str) -> SessionState:
        cur = self.current
        present = set(cur.description.named_predicate_names())
        if predicate_name not in present:
            raise KeyError(f"predicate {predicate_name!r} not in the current description")
        ignored = (*cur.ignored, predicate_name)
        state = self._compute(
            cur.question, cur.question_instance, cur.epsilon,
            merge_enabled=cur.merge_enabled,
            produce_greater_abstraction=cur.produce_greater_abstraction,
            ignored=ignored, parent=cur.id,
            reach=cur.reach,  # no reachability recompute for an ignore
        )
        self._record(cur, "ignore", state.id)
        return state

    def aps(self, direction: str = "ma") -> tuple[str, SessionState]:
        cur = self.current
        seen: dict[str, None] = {}
        for name in cur.description.named_predicate_names():
            seen.setdefault(name)
        order = [p.name for p in self.pack.ordered() if p.name in seen]
        if not order:
            raise KeyError("current description has no named predicates")
        choice = aps_select(order, self.store.records(), direction)
        return choice, self.ignore(choice)

    def break_question(self) -> None:
        self._record(self.current, "break", None)

    def exit(self) -> None:
        if self.current_id is not None:
            self._record(self.current, "exit", None)

    def history(self) -> list[SessionState]:
        return [self.states[i] for i in self.order]
