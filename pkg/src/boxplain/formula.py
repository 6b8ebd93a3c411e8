"""First-order conditions over named real variables.

A formula is a tree of And/Or/Not over affine atoms ``sum(c_i * x_i) REL k``.
Affine atoms are decided *exactly* over a box by evaluating the linear part at
its extreme vertex, so the built-in three-valued prover is sound and, per
atom, complete; And/Or/Not combine by Kleene logic (which is where genuine
Unknowns can appear, e.g. an Or of two half-planes that jointly cover a box
without either one covering it alone).

The point evaluator and the bound computation accumulate terms in the same
stored coefficient order.  Float addition and multiplication-by-a-constant are
monotone, so the computed bounds are sound for the computed point values even
in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np


class Rel(Enum):
    LE = "<="
    LT = "<"
    EQ = "="
    GE = ">="
    GT = ">"


class TriBool(Enum):
    TRUE = 1
    UNKNOWN = 0
    FALSE = -1


@dataclass(frozen=True)
class Atom:
    """Affine condition ``sum(coeff * var) REL const``."""

    coeffs: tuple[tuple[str, float], ...]
    rel: Rel
    const: float

    @classmethod
    def of(cls, coeffs: Mapping[str, float], rel: str | Rel, const: float) -> "Atom":
        r = rel if isinstance(rel, Rel) else Rel(rel)
        return cls(tuple(coeffs.items()), r, float(const))

    def value(self, point: Mapping[str, float]) -> float:
        s = 0.0
        for name, c in self.coeffs:
            s += c * point[name]
        return s

    def bounds(self, box) -> tuple[float, float]:
        """Exact [min, max] of the affine part over the box (same term order
        as :meth:`value`, so the bounds are float-sound for it)."""
        lo = 0.0
        hi = 0.0
        for name, c in self.coeffs:
            iv = box[name]
            if c >= 0.0:
                lo += c * iv.lo
                hi += c * iv.hi
            else:
                lo += c * iv.hi
                hi += c * iv.lo
        return lo, hi


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Not:
    child: "Formula"


Formula = Atom | And | Or | Not


def conj(children: Sequence[Formula]) -> Formula:
    cs = tuple(children)
    if not cs:
        raise ValueError("empty conjunction")
    return cs[0] if len(cs) == 1 else And(cs)


def disj(children: Sequence[Formula]) -> Formula:
    cs = tuple(children)
    if not cs:
        raise ValueError("empty disjunction")
    return cs[0] if len(cs) == 1 else Or(cs)


def negate(f: Formula) -> Formula:
    return f.child if isinstance(f, Not) else Not(f)


def free_variables(f: Formula) -> tuple[str, ...]:
    """Referenced variable names, in first-appearance order."""
    seen: dict[str, None] = {}

    def walk(node: Formula) -> None:
        if isinstance(node, Atom):
            for name, _ in node.coeffs:
                seen.setdefault(name)
        elif isinstance(node, Not):
            walk(node.child)
        else:
            for c in node.children:
                walk(c)

    walk(f)
    return tuple(seen)


def _decide(rel: Rel, lo: float, hi: float, const: float) -> TriBool:
    if rel is Rel.LE:
        if hi <= const:
            return TriBool.TRUE
        if lo > const:
            return TriBool.FALSE
    elif rel is Rel.LT:
        if hi < const:
            return TriBool.TRUE
        if lo >= const:
            return TriBool.FALSE
    elif rel is Rel.GE:
        if lo >= const:
            return TriBool.TRUE
        if hi < const:
            return TriBool.FALSE
    elif rel is Rel.GT:
        if lo > const:
            return TriBool.TRUE
        if hi <= const:
            return TriBool.FALSE
    elif rel is Rel.EQ:
        if lo == const and hi == const:
            return TriBool.TRUE
        if const < lo or const > hi:
            return TriBool.FALSE
    return TriBool.UNKNOWN


_CMP = {
    Rel.LE: lambda v, c: v <= c,
    Rel.LT: lambda v, c: v < c,
    Rel.EQ: lambda v, c: v == c,
    Rel.GE: lambda v, c: v >= c,
    Rel.GT: lambda v, c: v > c,
}


def eval_point(f: Formula, point: Mapping[str, float]) -> bool:
    """Exact boolean semantics at a full variable assignment.

    Raises KeyError when a referenced variable is missing from the assignment.
    """
    if isinstance(f, Atom):
        return bool(_CMP[f.rel](f.value(point), f.const))
    if isinstance(f, Not):
        return not eval_point(f.child, point)
    if isinstance(f, And):
        return all(eval_point(c, point) for c in f.children)
    return any(eval_point(c, point) for c in f.children)


def three_valued_eval(f: Formula, box) -> TriBool:
    """Sound three-valued verdict of `f` over every point of `box`.

    TRUE means f holds at every point, FALSE means it fails at every point.
    Atoms are exact; And/Or/Not combine by Kleene logic.
    """
    if isinstance(f, Atom):
        for name, _ in f.coeffs:
            if name not in box:
                raise KeyError(f"formula variable {name!r} not bounded by box")
        lo, hi = f.bounds(box)
        return _decide(f.rel, lo, hi, f.const)
    if isinstance(f, Not):
        return TriBool(-three_valued_eval(f.child, box).value)
    if isinstance(f, And):
        v = min((three_valued_eval(c, box).value for c in f.children), default=1)
        return TriBool(v)
    v = max((three_valued_eval(c, box).value for c in f.children), default=-1)
    return TriBool(v)


# --- batch kernel -----------------------------------------------------------
#
# The refinement loop and the covering pipeline evaluate one formula against
# many boxes/points; a compiled kernel turns that into a few matmuls.  Kleene
# logic maps onto {-1, 0, +1} with And = min, Or = max, Not = negate.


class FormulaKernel:
    """Vectorized evaluator for a fixed formula and variable order."""

    def __init__(self, f: Formula, order: Sequence[str]):
        self.order = tuple(order)
        self._index = {n: i for i, n in enumerate(self.order)}
        for name in free_variables(f):
            if name not in self._index:
                raise KeyError(f"formula variable {name!r} not in kernel order")
        self.formula = f

    def _atom_vec(self, a: Atom) -> np.ndarray:
        c = np.zeros(len(self.order), dtype=float)
        for name, v in a.coeffs:
            c[self._index[name]] += v
        return c

    def eval_points(self, pts: np.ndarray) -> np.ndarray:
        """Boolean truth at each row of `pts` (shape (n, d))."""

        def walk(node: Formula) -> np.ndarray:
            if isinstance(node, Atom):
                vals = pts @ self._atom_vec(node)
                return _NUMPY_CMP[node.rel](vals, node.const)
            if isinstance(node, Not):
                return ~walk(node.child)
            parts = [walk(c) for c in node.children]
            out = parts[0]
            for p in parts[1:]:
                out = (out & p) if isinstance(node, And) else (out | p)
            return out

        return walk(self.formula)

    def eval_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Three-valued verdicts, one int8 in {-1, 0, +1} per box row."""

        def walk(node: Formula) -> np.ndarray:
            if isinstance(node, Atom):
                c = self._atom_vec(node)
                cpos = np.maximum(c, 0.0)
                cneg = np.minimum(c, 0.0)
                vlo = lo @ cpos + hi @ cneg
                vhi = hi @ cpos + lo @ cneg
                return _decide_arrays(node.rel, vlo, vhi, node.const)
            if isinstance(node, Not):
                return -walk(node.child)
            parts = [walk(c) for c in node.children]
            out = parts[0]
            for p in parts[1:]:
                out = np.minimum(out, p) if isinstance(node, And) else np.maximum(out, p)
            return out

        return walk(self.formula)


_NUMPY_CMP = {
    Rel.LE: lambda v, c: v <= c,
    Rel.LT: lambda v, c: v < c,
    Rel.EQ: lambda v, c: v == c,
    Rel.GE: lambda v, c: v >= c,
    Rel.GT: lambda v, c: v > c,
}


def _decide_arrays(rel: Rel, vlo: np.ndarray, vhi: np.ndarray, const: float) -> np.ndarray:
    out = np.zeros(vlo.shape, dtype=np.int8)
    if rel is Rel.LE:
        out[vhi <= const] = 1
        out[vlo > const] = -1
    elif rel is Rel.LT:
        out[vhi < const] = 1
        out[vlo >= const] = -1
    elif rel is Rel.GE:
        out[vlo >= const] = 1
        out[vhi < const] = -1
    elif rel is Rel.GT:
        out[vlo > const] = 1
        out[vhi <= const] = -1
    else:
        out[(vlo == const) & (vhi == const)] = 1
        out[(const < vlo) | (const > vhi)] = -1
    return out


# --- JSON (de)serialization -------------------------------------------------


def formula_to_json(f: Formula) -> dict:
    if isinstance(f, Atom):
        return {
            "atom": {
                "coeffs": {n: c for n, c in f.coeffs},
                "rel": f.rel.value,
                "const": f.const,
            }
        }
    if isinstance(f, Not):
        return {"not": formula_to_json(f.child)}
    key = "and" if isinstance(f, And) else "or"
    return {key: [formula_to_json(c) for c in f.children]}


def formula_from_json(data: dict) -> Formula:
    if "atom" in data:
        a = data["atom"]
        return Atom.of(a["coeffs"], a["rel"], a["const"])
    if "not" in data:
        return Not(formula_from_json(data["not"]))
    if "and" in data:
        return And(tuple(formula_from_json(c) for c in data["and"]))
    if "or" in data:
        return Or(tuple(formula_from_json(c) for c in data["or"]))
    raise ValueError(f"unrecognized formula node: {sorted(data)}")
