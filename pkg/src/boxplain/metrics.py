"""Evaluation metrics: reach-set shape, description structure, expert labels.

Rows are plain dicts of named floats so runs aggregate with a per-key median
and serialize straight to CSV.  Reach statistics are computed on boxes
normalized into the unit cube, which makes them comparable across domains.
Jaccard/overlap similarity treats a description as the bag of atomic
conditions it uses (named predicates by name, box-ranges by their rendered
bounds).
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .description import WeightedDescription
from .geometry import Box, box_volume, normalize_box
from .predicates import BoxRangeCondition, ConjunctionCondition, NamedCondition


def _stats(values: Sequence[float], prefix: str) -> dict[str, float]:
    if not values:
        return {f"{prefix}_max": 0.0, f"{prefix}_median": 0.0, f"{prefix}_min": 0.0, f"{prefix}_sum": 0.0}
    arr = np.asarray(values, dtype=float)
    return {
        f"{prefix}_max": float(arr.max()),
        f"{prefix}_median": float(np.median(arr)),
        f"{prefix}_min": float(arr.min()),
        f"{prefix}_sum": float(arr.sum()),
    }


def reach_metrics(boxes: Sequence[Box], bounding: Box) -> dict[str, float]:
    """Count, normalized volume stats, and summed-side-length stats."""
    normd = [normalize_box(b, bounding) for b in boxes]
    volumes = [box_volume(b) for b in normd]
    sides = [sum(iv.width for _, iv in b) for b in normd]
    return {"boxes_count": float(len(boxes)), **_stats(volumes, "volume"), **_stats(sides, "sides")}


def _atomic_tokens(d: WeightedDescription) -> list[str]:
    out = []
    for c in d.conditions:
        for a in c.atoms():
            out.append(a.predicate.name if isinstance(a, NamedCondition) else a.display())
    return out


def description_metrics(
    d: WeightedDescription, labels: Mapping[str, str] | None = None
) -> dict[str, float]:
    """Structural counts plus MA/LA label usage.

    `labels` overrides the labels carried on the predicates themselves.
    Prevalence is the ratio of unique labeled predicates to the number of
    unique atomic conditions (box-ranges included, which carry no label, so
    MA and LA prevalence need not sum to 1).
    """
    disjuncts = len(d.conditions)
    conjuncts = sum(1 for c in d.conditions if isinstance(c, ConjunctionCondition))
    named_occurrences: list[str] = []
    box_range = 0
    for c in d.conditions:
        for a in c.atoms():
            if isinstance(a, NamedCondition):
                named_occurrences.append(a.predicate.name)
            else:
                box_range += 1

    def label_of(cond: NamedCondition) -> str | None:
        if labels is not None:
            return labels.get(cond.predicate.name)
        return cond.predicate.label

    label_by_name: dict[str, str | None] = {}
    for c in d.conditions:
        for a in c.atoms():
            if isinstance(a, NamedCondition):
                label_by_name[a.predicate.name] = label_of(a)

    unique_atoms = len(set(_atomic_tokens(d)))
    row: dict[str, float] = {
        "disjuncts": float(disjuncts),
        "conjuncts": float(conjuncts),
        "named_preds": float(len(named_occurrences)),
        "box_range_preds": float(box_range),
    }
    for tag in ("MA", "LA"):
        mult = sum(1 for n in named_occurrences if label_by_name.get(n) == tag)
        uniq = sum(1 for n in set(named_occurrences) if label_by_name.get(n) == tag)
        prev = uniq / unique_atoms if unique_atoms else 0.0
        key = tag.lower()
        row[f"{key}_multiplicity"] = float(mult)
        row[f"{key}_unique"] = float(uniq)
        row[f"{key}_prevalence"] = float(prev)
    return row


def similarity(d1: WeightedDescription, d2: WeightedDescription) -> tuple[float, float]:
    """(Jaccard, overlap coefficient) over the two bags of atomic conditions.

    Two empty descriptions count as identical: (1, 1).
    """
    s1, s2 = set(_atomic_tokens(d1)), set(_atomic_tokens(d2))
    if not s1 and not s2:
        return 1.0, 1.0
    inter = len(s1 & s2)
    union = len(s1 | s2)
    smaller = min(len(s1), len(s2))
    jaccard = inter / union if union else 0.0
    overlap = inter / smaller if smaller else 0.0
    return jaccard, overlap


def relative_change(before: Mapping[str, float], after: Mapping[str, float]) -> dict[str, float]:
    """after - before on every key the two rows share."""
    return {k: after[k] - before[k] for k in before if k in after}


def aggregate_medians(rows: Sequence[Mapping[str, float]]) -> dict[str, float]:
    """Per-key median across rows (keys taken from the first row's order)."""
    if not rows:
        return {}
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    return {
        k: float(np.median([row[k] for row in rows if k in row]))
        for k in keys
    }
