"""Synthetic-user evaluation harness.

Each run asks a randomly generated question, then steers abstraction per one
of two fixed scripts (coarse start then less/more abstract, or fine start then
more/less abstract) and records metric deltas between consecutive states,
tagged by the requested direction.  Medians of those deltas across many runs
form the report; at desk scale only the direction of change is meaningful.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .description import NoSituationError
from .metrics import (
    aggregate_medians,
    description_metrics,
    reach_metrics,
    relative_change,
    similarity,
)
from .packs import builtin_packs
from .predicates import DomainPack, Question, QuestionType, Strength
from .reachability import AnalysisCaps
from .session import EngineConfig, HistoryStore, SessionEngine, SessionState

#: abstraction scripts: (name, epsilon choices, steering sequence)
SCRIPTS: tuple[tuple[str, tuple[float, float], tuple[str, ...]], ...] = (
    ("coarse_then_finer", (0.25, 0.20), ("la", "ma")),
    ("fine_then_coarser", (0.125, 0.10), ("ma", "la")),
)

#: desk-scale analysis budget; a session hyper-parameter, not a global
DESK_CAPS = AnalysisCaps(max_boxes=2_500, max_depth=60)

METRIC_ORDER = [
    "boxes_count",
    "sides_max", "sides_median", "sides_min", "sides_sum",
    "volume_max", "volume_median", "volume_min", "volume_sum",
    "jaccard", "overlap",
    "conjuncts", "disjuncts", "named_preds", "box_range_preds",
    "ma_multiplicity", "ma_unique", "ma_prevalence",
    "la_multiplicity", "la_unique", "la_prevalence",
]

_DISJUNct_WEIGHTS = np.array([0.55, 0.25, 0.12, 0.08])
_CONJUNCT_WEIGHTS = np.array([0.25, 0.35, 0.25, 0.15])


def random_question(
    pack: DomainPack,
    rng: np.random.Generator,
    max_disjuncts: int = 4,
    max_conjuncts: int = 4,
) -> Question:
    """Valid random question: type and strength uniform, small DNF content.

    Disjunct/conjunct counts are biased low to keep desk-scale analyses
    narrow; conjuncts are distinct within a clause and clauses are distinct.
    """
    qtype = list(QuestionType)[int(rng.integers(0, len(QuestionType)))]
    strength = list(Strength)[int(rng.integers(0, len(Strength)))]
    allowed = [p.name for p in pack.allowed_for(qtype)]
    if not allowed:
        raise ValueError(f"pack has no predicates usable in {qtype.value} questions")
    n_disjuncts = int(rng.choice(np.arange(1, max_disjuncts + 1), p=_DISJUNct_WEIGHTS))
    clauses: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for _ in range(50):
        if len(clauses) == n_disjuncts:
            break
        size = int(rng.choice(np.arange(1, max_conjuncts + 1), p=_CONJUNCT_WEIGHTS))
        size = min(size, len(allowed))
        picks = rng.choice(len(allowed), size=size, replace=False)
        clause = tuple(allowed[i] for i in sorted(picks))
        key = tuple(sorted(clause))
        if key in seen:
            continue
        seen.add(key)
        clauses.append(clause)
    return Question.of(qtype, strength, clauses)


@dataclass
class SessionRun:
    pack: str
    script: str
    question: Question
    epsilon0: float
    states: list[SessionState]
    rows: list[dict[str, float]]
    deltas: list[tuple[str, dict[str, float]]]  # (direction, delta row)


def _state_metrics(state: SessionState, pack: DomainPack) -> dict[str, float]:
    return {
        **reach_metrics(state.reach.input_boxes, pack.space.input_bounding),
        **description_metrics(state.description),
    }


def synthetic_session(
    pack: DomainPack,
    model,
    script: tuple[str, tuple[float, float], tuple[str, ...]],
    rng: np.random.Generator,
    config: EngineConfig | None = None,
    store: HistoryStore | None = None,
    question_tries: int = 12,
) -> SessionRun | None:
    """One scripted interaction; None when no satisfiable question was found
    or a steering step emptied the reach set."""
    name, eps_choices, ops = script
    epsilon0 = float(eps_choices[int(rng.integers(0, len(eps_choices)))])
    config = config or EngineConfig(caps=DESK_CAPS)
    engine = SessionEngine(
        pack, model, epsilon0, seed=int(rng.integers(0, 2**31)),
        config=config, store=store or HistoryStore(),
    )
    state = None
    question = None
    for _ in range(question_tries):
        question = random_question(pack, rng)
        try:
            state = engine.ask(question)
            break
        except NoSituationError:
            continue
    if state is None:
        return None
    rows = [_state_metrics(state, pack)]
    states = [state]
    deltas: list[tuple[str, dict[str, float]]] = []
    for op in ops:
        prev = states[-1]
        try:
            nxt = engine.more_abstract() if op == "ma" else engine.less_abstract()
        except NoSituationError:
            return None
        row = _state_metrics(nxt, pack)
        delta = relative_change(rows[-1], row)
        jac, ov = similarity(nxt.description, prev.description)
        delta["jaccard"] = jac
        delta["overlap"] = ov
        deltas.append((op, delta))
        states.append(nxt)
        rows.append(row)
    engine.exit()
    return SessionRun(pack.name, name, question, epsilon0, states, rows, deltas)


@dataclass
class ExperimentReport:
    pack: str
    runs_completed: int
    medians: dict[str, dict[str, float]] = field(default_factory=dict)  # direction -> row
    deltas: dict[str, list[dict[str, float]]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", f"{self.pack}_la", f"{self.pack}_ma"])
        for key in METRIC_ORDER:
            row = [key]
            for direction in ("la", "ma"):
                v = self.medians.get(direction, {}).get(key)
                row.append("" if v is None else format(v, ".6g"))
            writer.writerow(row)
        return buf.getvalue()

    def render_table(self) -> str:
        width = max(len(k) for k in METRIC_ORDER) + 2
        lines = [f"{'metric'.ljust(width)}{self.pack + '_la':>14}{self.pack + '_ma':>14}"]
        lines.append("-" * (width + 28))
        for key in METRIC_ORDER:
            cells = []
            for direction in ("la", "ma"):
                v = self.medians.get(direction, {}).get(key)
                cells.append("" if v is None else format(v, ".4g"))
            lines.append(f"{key.ljust(width)}{cells[0]:>14}{cells[1]:>14}")
        return "\n".join(lines)


def run_experiment(
    pack: DomainPack,
    model,
    runs: int,
    seed: int,
    config: EngineConfig | None = None,
    max_attempts_factor: int = 4,
) -> ExperimentReport:
    """N completed scripted sessions over one pack, aggregated by direction."""
    rng = np.random.default_rng(seed)
    deltas: dict[str, list[dict[str, float]]] = {"la": [], "ma": []}
    completed = 0
    attempts = 0
    while completed < runs and attempts < runs * max_attempts_factor:
        attempts += 1
        script = SCRIPTS[int(rng.integers(0, len(SCRIPTS)))]
        run = synthetic_session(pack, model, script, rng, config=config)
        if run is None:
            continue
        completed += 1
        for direction, delta in run.deltas:
            deltas[direction].append(delta)
    report = ExperimentReport(pack=pack.name, runs_completed=completed, deltas=deltas)
    for direction, rows in deltas.items():
        report.medians[direction] = aggregate_medians(rows)
    return report


def run_builtin_experiment(pack_name: str, runs: int, seed: int, **kw) -> ExperimentReport:
    pack, model = builtin_packs()[pack_name]
    return run_experiment(pack, model, runs, seed, **kw)
