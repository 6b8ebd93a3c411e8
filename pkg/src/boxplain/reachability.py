"""Refinement-based reachability: which input boxes can satisfy the question.

The analysis bisects the input space into orthants, propagates each box
through the model, prunes boxes whose joint (input x output) box certainly
cannot satisfy the question condition, and splits undecided boxes along their
longest normalized axis until they are small enough.  Retained boxes, paired
with their output images, form the reach set the description stage explains.

Strict questions prune only with a sound proof; "usually" questions prune by
sampling actual model behavior (inputs drawn uniformly, outputs via the
model), trading measure-zero corner cases for tighter answers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .decision import SmtBackend, forall_holds
from .formula import Formula, FormulaKernel, conj, disj, negate
from .geometry import Box, Interval, joint_box
from .predicates import DomainPack, Question, QuestionType, Strength, validate_question

log = logging.getLogger(__name__)


class QuestionValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class Illuminated(Enum):
    INPUT = "input"
    OUTPUT = "output"
    JOINT = "joint"


@dataclass(frozen=True)
class StopParams:
    epsilon: float
    bounding: Box

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")


@dataclass
class AnalysisCaps:
    max_boxes: int = 200_000
    max_depth: int = 60


@dataclass
class AnalysisStats:
    visited: int = 0
    emitted: int = 0
    degraded: bool = False


def _normalized_sides(b: Box, bounding: Box) -> list[float]:
    out = []
    for n, iv in b:
        ref = bounding[n]
        out.append(iv.width / ref.width if ref.width > 0.0 else 0.0)
    return out


def stop(b: Box, p: StopParams) -> bool:
    """True iff every axis, normalized by the bounding box, is within epsilon."""
    return max(_normalized_sides(b, p.bounding)) <= p.epsilon


def refine(b: Box, k: int, bounding: Box) -> list[Box]:
    """Split into k equal parts along the longest normalized axis.

    Ties break toward the lowest variable index; adjacent parts share the
    exact same float boundary so their union is the original box.
    """
    if k not in (2, 3):
        raise ValueError(f"k must be 2 or 3, got {k}")
    sides = _normalized_sides(b, bounding)
    h = max(range(len(sides)), key=lambda i: (sides[i], -i))
    name = b.names[h]
    iv = b[name]
    cuts = [iv.lo + j * (iv.width / k) for j in range(1, k)]
    edges = [iv.lo, *cuts, iv.hi]
    parts = []
    for j in range(k):
        parts.append(Box({n: (Interval(edges[j], edges[j + 1]) if n == name else piece)
                          for n, piece in b}))
    return parts


def initial_abstraction(bounding: Box, dim_cap: int = 12) -> list[Box]:
    """All 2^d orthants of the bounding box (whole box when d exceeds the cap)."""
    d = len(bounding)
    if d > dim_cap:
        log.warning("dimension %d exceeds orthant cap %d; starting from the whole box", d, dim_cap)
        return [bounding]
    halves = []
    for _, iv in bounding:
        mid = iv.lo + 0.5 * iv.width
        halves.append([Interval(iv.lo, mid), Interval(mid, iv.hi)])
    out = []
    for bits in range(2**d):
        sel = {}
        for i, n in enumerate(bounding.names):
            sel[n] = halves[i][(bits >> (d - 1 - i)) & 1]
        out.append(Box(sel))
    return out


def question_to_spec(q: Question, pack: DomainPack) -> tuple[Formula, Illuminated]:
    """Expand the question's DNF into a formula and name the side it illuminates."""
    if not q.content:
        raise ValueError("question content is empty")
    phi = disj(
        [conj([pack.predicate(n).formula for n in clause]) for clause in q.content]
    )
    side = {
        QuestionType.WHEN_DO_YOU: Illuminated.INPUT,
        QuestionType.WHAT_DO_YOU_DO_WHEN: Illuminated.OUTPUT,
        QuestionType.CIRCUMSTANCES: Illuminated.JOINT,
    }[q.qtype]
    return phi, side


def _choose_k(rng: np.random.Generator, force_k: int | None) -> int:
    if force_k is not None:
        return force_k
    return 2 if rng.random() < 0.8 else 3


def _partition_to_stop(
    b: Box,
    params: StopParams,
    rng: np.random.Generator,
    force_k: int | None,
    budget: int,
    max_depth: int,
) -> tuple[list[Box], bool]:
    """Partition a box known to satisfy the condition down to stop size.

    Returns (pieces, truncated): when the box budget or depth allowance runs
    out the remaining pieces are emitted unsplit, which only coarsens the
    answer.
    """
    out: list[Box] = []
    queue = [(b, 0)]
    truncated = False
    while queue:
        cur, depth = queue.pop(0)
        if stop(cur, params) or depth >= max_depth or len(out) + len(queue) >= budget:
            if not stop(cur, params):
                truncated = True
            out.append(cur)
            continue
        queue.extend((c, depth + 1) for c in refine(cur, _choose_k(rng, force_k), params.bounding))
    return out, truncated


def cegar_like_analysis(
    input_box: Box,
    params: StopParams,
    phi: Formula,
    model,
    mode: Strength,
    n_sample: int,
    rng: np.random.Generator,
    force_k: int | None = None,
    caps: AnalysisCaps | None = None,
    smt: SmtBackend | None = None,
    stats: AnalysisStats | None = None,
) -> list[Box]:
    """Retained sub-boxes of `input_box` that may satisfy phi.

    Each visited box gets the prune check before anything else, so every
    returned box passed the retention test; exceeding the box/depth caps
    degrades to "stop here" and is recorded on `stats`.
    """
    return _refinement_loop(
        [input_box], params, phi, model, mode, n_sample, rng,
        force_k=force_k, caps=caps, smt=smt, stats=stats,
    )


def _refinement_loop(
    start_boxes: Sequence[Box],
    params: StopParams,
    phi: Formula,
    model,
    mode: Strength,
    n_sample: int,
    rng: np.random.Generator,
    force_k: int | None = None,
    caps: AnalysisCaps | None = None,
    smt: SmtBackend | None = None,
    stats: AnalysisStats | None = None,
) -> list[Box]:
    """Level-synchronous refinement over a shared worklist.

    Processing a whole generation at a time keeps the box budget fair across
    start boxes: if the budget dies, every pending box is the same generation,
    so the degraded answer stays uniformly grained.
    """
    caps = caps or AnalysisCaps()
    stats = stats if stats is not None else AnalysisStats()
    in_names = list(model.input_names)
    joint_names = [*model.input_names, *model.output_names]
    kernel = FormulaKernel(phi, joint_names)

    kept: list[Box] = []
    round_boxes: list[tuple[Box, int]] = [(b, 0) for b in start_boxes]
    while round_boxes:
        boxes = [b for b, _ in round_boxes]
        depths = [d for _, d in round_boxes]
        stats.visited += len(boxes)
        lo = np.array([[b[n].lo for n in in_names] for b in boxes])
        hi = np.array([[b[n].hi for n in in_names] for b in boxes])
        olo, ohi = model.box_image_arrays(lo, hi)
        jlo = np.hstack([lo, olo])
        jhi = np.hstack([hi, ohi])

        tri = kernel.eval_boxes(jlo, jhi)
        if mode is Strength.STRICT:
            pruned = tri == -1  # condition certainly false on the joint box
            certain = tri == 1  # condition certainly true: partition freely
            if smt is not None:
                for i in np.nonzero(tri == 0)[0]:
                    jb = Box({n: Interval(float(jlo[i, j]), float(jhi[i, j]))
                              for j, n in enumerate(joint_names)})
                    v1 = forall_holds(negate(phi), jb, smt=smt)
                    if v1:
                        pruned[i] = True
                        continue
                    if forall_holds(phi, jb, smt=smt):
                        certain[i] = True
        else:
            # sample actual behavior: inputs uniform in the box, outputs through
            # the model; no satisfying sample prunes the box.  Boxes the
            # interval verdict already decides need no samples: certainly-true
            # holds at every (x, model(x)) and certainly-false at none.
            pruned = tri == -1
            certain = np.zeros(len(boxes), dtype=bool)  # verdict2 fixed to "no"
            open_rows = np.nonzero(tri == 0)[0]
            if len(open_rows):
                pts = rng.uniform(
                    lo[open_rows, None, :], hi[open_rows, None, :],
                    size=(len(open_rows), n_sample, len(in_names)),
                )
                flat = pts.reshape(-1, len(in_names))
                ys = np.atleast_2d(model.evaluate(flat))
                joint_pts = np.hstack([flat, ys])
                sat = kernel.eval_points(joint_pts).reshape(len(open_rows), n_sample)
                pruned[open_rows[~sat.any(axis=1)]] = True

        next_round: list[tuple[Box, int]] = []
        for i, b in enumerate(boxes):
            if pruned[i]:
                continue
            if stop(b, params) or depths[i] >= caps.max_depth:
                if not stop(b, params):
                    stats.degraded = True
                    log.warning("depth cap %d reached; treating box as stopped", caps.max_depth)
                kept.append(b)
                continue
            if certain[i]:
                pieces, truncated = _partition_to_stop(
                    b, params, rng, force_k,
                    budget=max(caps.max_boxes - stats.visited, 1),
                    max_depth=max(caps.max_depth - depths[i], 0),
                )
                stats.visited += len(pieces)
                stats.degraded = stats.degraded or truncated
                kept.extend(pieces)
                continue
            if stats.visited + len(next_round) >= caps.max_boxes:
                # refining further would blow the budget: emit one final halving
                # so no survivor stays a full generation coarser than the rest
                if not stats.degraded:
                    log.warning("box budget %d exhausted; emitting remaining boxes unrefined", caps.max_boxes)
                stats.degraded = True
                halves = refine(b, 2, params.bounding)
                stats.visited += len(halves)
                kept.extend(halves)
                continue
            next_round.extend((c, depths[i] + 1) for c in refine(b, _choose_k(rng, force_k), params.bounding))
        round_boxes = next_round

    stats.emitted += len(kept)
    return kept


# --- reach sets ---------------------------------------------------------------


@dataclass(frozen=True)
class ReachSet:
    pairs: tuple[tuple[Box, Box], ...]
    question: Question
    epsilon: float
    mode: Strength

    @property
    def input_boxes(self) -> tuple[Box, ...]:
        return tuple(p[0] for p in self.pairs)

    @property
    def output_boxes(self) -> tuple[Box, ...]:
        return tuple(p[1] for p in self.pairs)

    def illuminated_boxes(self, side: Illuminated) -> list[Box]:
        """Deduplicated boxes on the side the question illuminates."""
        if side is Illuminated.INPUT:
            raw = self.input_boxes
        elif side is Illuminated.OUTPUT:
            raw = self.output_boxes
        else:
            raw = tuple(joint_box(i, o) for i, o in self.pairs)
        seen: dict[Box, None] = {}
        for b in raw:
            seen.setdefault(b)
        return list(seen)


def _box_sort_key(b: Box):
    return tuple(v for _, iv in b for v in (iv.lo, iv.hi))


def build_reachset(
    question: Question,
    model,
    pack: DomainPack,
    epsilon: float,
    n_sample: int,
    rng: np.random.Generator,
    force_k: int | None = None,
    caps: AnalysisCaps | None = None,
    smt: SmtBackend | None = None,
    stats: AnalysisStats | None = None,
) -> ReachSet:
    """Orthant starts + per-start analysis, paired with output images.

    An empty result is legal; the description stage raises on it.
    """
    violations = validate_question(question, pack)
    if violations:
        raise QuestionValidationError(violations)
    phi, _side = question_to_spec(question, pack)
    bounding = pack.space.input_bounding
    params = StopParams(epsilon, bounding)
    starts = initial_abstraction(bounding)
    kept = _refinement_loop(
        starts, params, phi, model, question.strength, n_sample, rng,
        force_k=force_k, caps=caps, smt=smt, stats=stats,
    )
    kept.sort(key=_box_sort_key)
    in_names = list(model.input_names)
    out_names = list(model.output_names)
    if kept:
        lo = np.array([[b[n].lo for n in in_names] for b in kept])
        hi = np.array([[b[n].hi for n in in_names] for b in kept])
        olo, ohi = model.box_image_arrays(lo, hi)
        pairs = tuple(
            (
                b,
                Box({n: Interval(float(olo[i, j]), float(ohi[i, j])) for j, n in enumerate(out_names)}),
            )
            for i, b in enumerate(kept)
        )
    else:
        pairs = ()
    return ReachSet(pairs, question, epsilon, question.strength)


# --- box merging --------------------------------------------------------------


@dataclass(frozen=True)
class MergeParams:
    threshold: float = 1e-9  # relative tolerance for shared coordinates
    max_passes: int = 16


def _quant(x: float, threshold: float) -> int:
    return int(round(x / threshold))


def _close(a: float, b: float, threshold: float) -> bool:
    return abs(a - b) <= threshold * max(1.0, abs(a), abs(b))


def merge_boxes(boxes: Sequence[Box], params: MergeParams | None = None) -> list[Box]:
    """Greedy pairwise merging of boxes that tile a larger box.

    Two boxes merge when they agree (within the threshold) on every axis but
    one and are adjacent along that one; sweeps repeat to fixpoint, so four
    quadrants collapse via two pair merges.  Merged boxes take the hull, so
    coverage never shrinks.
    """
    params = params or MergeParams()
    work: dict[Box, None] = {}
    for b in boxes:
        work.setdefault(b)
    current = list(work)
    if not current:
        return []
    names = current[0].names
    for b in current:
        if b.names != names:
            raise ValueError("merge requires boxes over the same variables")

    for _ in range(params.max_passes):
        changed = False
        for axis in names:
            groups: dict[tuple, list[Box]] = {}
            for b in current:
                key = tuple(
                    (_quant(b[n].lo, params.threshold), _quant(b[n].hi, params.threshold))
                    for n in names
                    if n != axis
                )
                groups.setdefault(key, []).append(b)
            merged: list[Box] = []
            for key in sorted(groups):
                row = sorted(groups[key], key=lambda b: (b[axis].lo, b[axis].hi))
                acc = row[0]
                for nxt in row[1:]:
                    if _close(acc[axis].hi, nxt[axis].lo, params.threshold):
                        acc = Box(
                            {
                                n: Interval(min(acc[n].lo, nxt[n].lo), max(acc[n].hi, nxt[n].hi))
                                for n in names
                            }
                        )
                        changed = True
                    else:
                        merged.append(acc)
                        acc = nxt
                merged.append(acc)
            current = merged
        if not changed:
            break
    current.sort(key=_box_sort_key)
    return current


# --- debug dump ---------------------------------------------------------------


def box_to_json(b: Box) -> dict:
    return {n: [iv.lo, iv.hi] for n, iv in b}


def box_from_json(data: dict) -> Box:
    return Box({n: Interval(float(lo), float(hi)) for n, (lo, hi) in data.items()})


def reachset_to_json(rs: ReachSet, input_bounding: Box) -> dict:
    return {
        "v": 1,
        "question": rs.question.to_json(),
        "epsilon": rs.epsilon,
        "mode": rs.mode.value,
        "input_bounding": box_to_json(input_bounding),
        "pairs": [
            {"input": box_to_json(i), "output": box_to_json(o)} for i, o in rs.pairs
        ],
    }
