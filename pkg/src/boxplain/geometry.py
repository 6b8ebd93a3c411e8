"""Variable spaces, intervals and axis-aligned boxes.

Boxes (products of closed intervals over named variables) are the abstraction
unit everywhere: models propagate them, the refinement loop splits them, the
covering machinery describes them.  All types here are immutable values and
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np


class Role(Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with finite endpoints and lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def contains_interval(self, other: "Interval", tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol


class Box:
    """Axis-aligned box: one interval per named variable, in a fixed order.

    Hashable and immutable, so boxes can key the bidirectional maps used by
    the covering pipeline.
    """

    __slots__ = ("_names", "_intervals", "_key", "_hash")

    def __init__(self, bounds: Mapping[str, Interval] | Iterable[tuple[str, Interval]]):
        items = list(bounds.items()) if isinstance(bounds, Mapping) else list(bounds)
        if not items:
            raise ValueError("box must cover at least one variable")
        names = tuple(n for n, _ in items)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable in box: {names}")
        self._names = names
        self._intervals = tuple(iv for _, iv in items)
        self._key = tuple((n, iv.lo, iv.hi) for n, iv in items)
        self._hash = hash(self._key)

    @classmethod
    def of(cls, **bounds: tuple[float, float]) -> "Box":
        return cls({n: Interval(lo, hi) for n, (lo, hi) in bounds.items()})

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __getitem__(self, name: str) -> Interval:
        try:
            return self._intervals[self._names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._names

    def __iter__(self):
        return iter(zip(self._names, self._intervals))

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, Box) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: [{iv.lo:g}, {iv.hi:g}]" for n, iv in self)
        return f"Box({inner})"

    def arrays(self, order: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bound vectors in the given (default: own) variable order."""
        if order is None:
            lo = np.array([iv.lo for iv in self._intervals], dtype=float)
            hi = np.array([iv.hi for iv in self._intervals], dtype=float)
            return lo, hi
        lo = np.array([self[n].lo for n in order], dtype=float)
        hi = np.array([self[n].hi for n in order], dtype=float)
        return lo, hi

    def restrict(self, names: Sequence[str]) -> "Box":
        return Box({n: self[n] for n in names})

    def contains_point(self, point: Mapping[str, float], tol: float = 0.0) -> bool:
        return all(iv.contains(point[n], tol) for n, iv in self)

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return all(self[n].contains_interval(other[n], tol) for n in other.names if n in self)

    def scaled_about_center(self, factor: float) -> "Box":
        """Box with every interval scaled by `factor` about its own center."""
        return Box(
            {
                n: Interval(iv.center - factor * 0.5 * iv.width, iv.center + factor * 0.5 * iv.width)
                for n, iv in self
            }
        )


def box_volume(b: Box) -> float:
    """Product of side lengths; zero when any axis is degenerate."""
    v = 1.0
    for _, iv in b:
        v *= iv.width
    return v


def normalize_box(b: Box, bounding: Box) -> Box:
    """Rescale `b` so `bounding` maps axis-wise onto [0, 1].

    Raises ValueError when a bounding axis has zero width.
    """
    out = {}
    for n, iv in b:
        ref = bounding[n]
        if ref.width == 0.0:
            raise ValueError(f"bounding axis {n!r} has zero width")
        out[n] = Interval((iv.lo - ref.lo) / ref.width, (iv.hi - ref.lo) / ref.width)
    return Box(out)


def joint_box(a: Box, b: Box) -> Box:
    """Concatenate two boxes over disjoint variable sets."""
    merged = dict(a)
    for n, iv in b:
        if n in merged:
            raise ValueError(f"variable {n!r} present in both boxes")
        merged[n] = iv
    return Box(merged)


class Space:
    """Ordered, role-tagged variables together with their bounding box.

    The declaration order is the tie-breaking order used everywhere downstream
    (axis selection, predicate iteration), which keeps runs deterministic.
    """

    __slots__ = ("_vars", "_roles", "bounding")

    def __init__(self, variables: Sequence[tuple[str, Role]], bounding: Box):
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in space")
        missing = [n for n in names if n not in bounding]
        if missing:
            raise ValueError(f"bounding box missing variables: {missing}")
        self._vars = tuple(variables)
        self._roles = {n: r for n, r in variables}
        self.bounding = bounding.restrict(names)

    @property
    def variables(self) -> tuple[tuple[str, Role], ...]:
        return self._vars

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self._vars)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, r in self._vars if r is Role.INPUT)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(n for n, r in self._vars if r is Role.OUTPUT)

    def role(self, name: str) -> Role:
        return self._roles[name]

    @property
    def input_bounding(self) -> Box:
        return self.bounding.restrict(self.input_names)

    @property
    def output_bounding(self) -> Box:
        return self.bounding.restrict(self.output_names)
