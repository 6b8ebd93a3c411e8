"""Domain packs: grounded predicates, question forms, and their validation.

A domain pack is the knowledge base an analysis runs against: the variable
space of the system under study plus a vocabulary of named predicates over
those variables.  Each predicate carries a role tag saying which side of the
system it talks about; question forms restrict which roles their content may
use.  The optional MA/LA labels are expert annotations consumed only by the
evaluation metrics, never by the engine itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .formula import (
    Atom,
    Formula,
    Rel,
    conj,
    disj,
    formula_from_json,
    formula_to_json,
    free_variables,
)
from .geometry import Box, Interval, Role, Space


class PredicateRole(Enum):
    INPUT_SPACE = "input"
    OUTPUT_SPACE = "output"
    JOINT = "joint"


class QuestionType(Enum):
    WHEN_DO_YOU = "when_do_you"
    WHAT_DO_YOU_DO_WHEN = "what_do_you_do_when"
    CIRCUMSTANCES = "circumstances"


class Strength(Enum):
    STRICT = "strict"
    USUALLY = "usually"


@dataclass(frozen=True)
class Predicate:
    """Named, grounded condition with a role tag and optional MA/LA label."""

    name: str
    formula: Formula
    role: PredicateRole
    label: str | None = None  # "MA" | "LA" | None

    def __post_init__(self) -> None:
        # cheap cached hash by name; structural equality resolves collisions
        object.__setattr__(self, "_h", hash(("pred", self.name)))

    def __hash__(self) -> int:
        return self._h

    @cached_property
    def free_vars(self) -> tuple[str, ...]:
        return free_variables(self.formula)


# --- conditions --------------------------------------------------------------
#
# Descriptions are built from three condition shapes: a named predicate, a
# conjunction of atomic conditions introduced by the covering, and a box-range
# fallback listing a box's exact per-variable ranges.


@dataclass(frozen=True)
class NamedCondition:
    predicate: Predicate

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash(("named", self.predicate.name)))

    def __hash__(self) -> int:
        return self._h

    def formula(self) -> Formula:
        return self.predicate.formula

    def free_vars(self) -> tuple[str, ...]:
        return self.predicate.free_vars

    def atoms(self) -> tuple["AtomicCondition", ...]:
        return (self,)

    def display(self) -> str:
        return self.predicate.name

    def sort_key(self) -> str:
        return f"n:{self.predicate.name}"


@dataclass(frozen=True)
class BoxRangeCondition:
    box: Box

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash(("box_range", self.box)))

    def __hash__(self) -> int:
        return self._h

    @cached_property
    def _formula(self) -> Formula:
        parts: list[Formula] = []
        for n, iv in self.box:
            parts.append(Atom.of({n: 1.0}, Rel.GE, iv.lo))
            parts.append(Atom.of({n: 1.0}, Rel.LE, iv.hi))
        return conj(parts)

    def formula(self) -> Formula:
        return self._formula

    def free_vars(self) -> tuple[str, ...]:
        return self.box.names

    def atoms(self) -> tuple["AtomicCondition", ...]:
        return (self,)

    def display(self) -> str:
        inner = ", ".join(f"{n}: [{iv.lo:.6g}, {iv.hi:.6g}]" for n, iv in self.box)
        return "box{" + inner + "}"

    def sort_key(self) -> str:
        return f"b:{self.display()}"


AtomicCondition = NamedCondition | BoxRangeCondition


@dataclass(frozen=True)
class ConjunctionCondition:
    members: tuple[AtomicCondition, ...]

    @classmethod
    def of(cls, members: Iterable[AtomicCondition]) -> "ConjunctionCondition":
        # canonical member order makes equal sets compare equal
        uniq: dict[AtomicCondition, None] = {}
        for m in members:
            uniq.setdefault(m)
        ordered = tuple(sorted(uniq, key=lambda m: m.sort_key()))
        if len(ordered) < 2:
            raise ValueError("conjunction needs at least two distinct members")
        return cls(ordered)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash(("conj", self.members)))

    def __hash__(self) -> int:
        return self._h

    @cached_property
    def _formula(self) -> Formula:
        return conj([m.formula() for m in self.members])

    def formula(self) -> Formula:
        return self._formula

    @cached_property
    def _free_vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for m in self.members:
            for v in m.free_vars():
                seen.setdefault(v)
        return tuple(seen)

    def free_vars(self) -> tuple[str, ...]:
        return self._free_vars

    def atoms(self) -> tuple[AtomicCondition, ...]:
        return self.members

    def display(self) -> str:
        return "and(" + ", ".join(m.display() for m in self.members) + ")"

    def sort_key(self) -> str:
        return f"c:{self.display()}"


Condition = NamedCondition | BoxRangeCondition | ConjunctionCondition


# --- questions ---------------------------------------------------------------


@dataclass(frozen=True)
class Question:
    """(type, strength, DNF over predicate names)."""

    qtype: QuestionType
    strength: Strength
    content: tuple[tuple[str, ...], ...]

    @classmethod
    def of(cls, qtype: QuestionType | str, strength: Strength | str,
           content: Sequence[Sequence[str]]) -> "Question":
        qt = qtype if isinstance(qtype, QuestionType) else QuestionType(qtype)
        st = strength if isinstance(strength, Strength) else Strength(strength)
        return cls(qt, st, tuple(tuple(c) for c in content))

    def to_json(self) -> dict:
        return {
            "type": self.qtype.value,
            "strength": self.strength.value,
            "dnf": [list(c) for c in self.content],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Question":
        return cls.of(data["type"], data["strength"], data["dnf"])


#: predicate roles each question type's content may draw from
CONTENT_ROLES: dict[QuestionType, tuple[PredicateRole, ...]] = {
    QuestionType.WHEN_DO_YOU: (PredicateRole.OUTPUT_SPACE,),
    QuestionType.WHAT_DO_YOU_DO_WHEN: (PredicateRole.INPUT_SPACE,),
    QuestionType.CIRCUMSTANCES: (
        PredicateRole.INPUT_SPACE,
        PredicateRole.OUTPUT_SPACE,
        PredicateRole.JOINT,
    ),
}


class DomainPack:
    """A named variable space plus its predicate vocabulary."""

    def __init__(self, name: str, space: Space, predicates: Sequence[Predicate]):
        self.name = name
        self.space = space
        self.predicates: dict[str, Predicate] = {}
        for p in predicates:
            if p.name in self.predicates:
                raise ValueError(f"duplicate predicate name {p.name!r}")
            self._check_role(p)
            self.predicates[p.name] = p

    def _check_role(self, p: Predicate) -> None:
        names = set(self.space.names)
        unknown = [v for v in p.free_vars if v not in names]
        if unknown:
            raise ValueError(f"predicate {p.name!r} references unknown variables {unknown}")
        inputs = set(self.space.input_names)
        outputs = set(self.space.output_names)
        fv = set(p.free_vars)
        if p.role is PredicateRole.INPUT_SPACE and not fv <= inputs:
            raise ValueError(f"input-space predicate {p.name!r} uses non-input variables")
        if p.role is PredicateRole.OUTPUT_SPACE and not fv <= outputs:
            raise ValueError(f"output-space predicate {p.name!r} uses non-output variables")

    def predicate(self, name: str) -> Predicate:
        return self.predicates[name]

    def ordered(self) -> tuple[Predicate, ...]:
        return tuple(self.predicates.values())

    def allowed_for(self, qtype: QuestionType) -> tuple[Predicate, ...]:
        roles = CONTENT_ROLES[qtype]
        return tuple(p for p in self.predicates.values() if p.role in roles)

    # -- serialization --

    def to_json(self) -> dict:
        return {
            "v": 1,
            "name": self.name,
            "variables": [
                {
                    "name": n,
                    "role": self.space.role(n).value,
                    "lo": self.space.bounding[n].lo,
                    "hi": self.space.bounding[n].hi,
                }
                for n in self.space.names
            ],
            "predicates": [
                {
                    "name": p.name,
                    "role": p.role.value,
                    "formula": formula_to_json(p.formula),
                    **({"label": p.label} if p.label else {}),
                }
                for p in self.predicates.values()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DomainPack":
        variables = [(v["name"], Role(v["role"])) for v in data["variables"]]
        bounding = Box({v["name"]: Interval(float(v["lo"]), float(v["hi"])) for v in data["variables"]})
        space = Space(variables, bounding)
        preds = [
            Predicate(
                name=p["name"],
                formula=formula_from_json(p["formula"]),
                role=PredicateRole(p["role"]),
                label=p.get("label"),
            )
            for p in data["predicates"]
        ]
        return cls(data["name"], space, preds)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DomainPack":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def with_labels(self, labels: Mapping[str, str]) -> "DomainPack":
        """Pack with MA/LA labels overlaid from a sidecar mapping."""
        preds = [
            Predicate(p.name, p.formula, p.role, labels.get(p.name, p.label))
            for p in self.predicates.values()
        ]
        return DomainPack(self.name, self.space, preds)


def validate_question(
    q: Question,
    pack: DomainPack,
    max_disjuncts: int = 8,
    max_conjuncts: int = 8,
) -> list[str]:
    """Check a question against a pack; returns a list of violations (empty = ok)."""
    violations: list[str] = []
    if not q.content:
        violations.append("question content is empty")
    if len(q.content) > max_disjuncts:
        violations.append(f"too many disjuncts: {len(q.content)} > {max_disjuncts}")
    seen_disjuncts = set()
    allowed = CONTENT_ROLES[q.qtype]
    for i, conjunct in enumerate(q.content):
        if not conjunct:
            violations.append(f"disjunct {i} is empty")
            continue
        if len(conjunct) > max_conjuncts:
            violations.append(f"disjunct {i} has too many conjuncts: {len(conjunct)} > {max_conjuncts}")
        if len(set(conjunct)) != len(conjunct):
            violations.append(f"disjunct {i} repeats a predicate")
        key = tuple(sorted(conjunct))
        if key in seen_disjuncts:
            violations.append(f"duplicate disjunct: {conjunct}")
        seen_disjuncts.add(key)
        for name in conjunct:
            p = pack.predicates.get(name)
            if p is None:
                violations.append(f"unknown predicate: {name!r}")
                continue
            if p.role not in allowed:
                violations.append(
                    f"predicate {name!r} has role {p.role.value!r}, "
                    f"not allowed in {q.qtype.value!r} questions"
                )
    return violations
