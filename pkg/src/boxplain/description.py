"""From retained boxes to a sorted, volume-weighted DNF description.

Pipeline stages, in order: per-box consistency filtering and most-specific
selection; a first greedy multivariate covering over the most-specific
candidates; bookkeeping for conjunctions the covering introduces; a second
covering over the full consistency relation restricted to the first cover's
winners (so vague predicates that subsume specific ones win only when they
genuinely dominate); volume weights; removal of conditions implied by the
rest of the description; merging of box-range fallbacks; final weights and a
(unique volume, total volume) descending sort.

Boxes with no usable vocabulary are reported with box-range conditions that
simply list their variable ranges, so the final description always covers
every box it was asked to explain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .decision import Outcome, SmtBackend, forall_holds, sample_box
from .formula import Formula, FormulaKernel, disj, eval_point
from .geometry import Box, box_volume
from .predicates import (
    AtomicCondition,
    BoxRangeCondition,
    Condition,
    ConjunctionCondition,
    NamedCondition,
    Predicate,
)
from .reachability import MergeParams, merge_boxes

#: shell scale schedule base; the sampled radii are base * exp(alpha * base)
SHELL_BASE = (1.0, 1.01, 1.05, 1.1, 1.2, 1.4, 1.8, 2.6)


class NoSituationError(RuntimeError):
    """Raised when there are no boxes to describe."""

    def __init__(self) -> None:
        super().__init__("No Situation Corresponds to the Event User Described Occurring")


@lru_cache(maxsize=4096)
def _kernel(f: Formula, order: tuple[str, ...]) -> FormulaKernel:
    return FormulaKernel(f, order)


# --- consistency -------------------------------------------------------------


def get_consistent_conditions(
    b: Box,
    n_sample: int,
    conditions: Sequence[Condition],
    rng: np.random.Generator | None = None,
    smt: SmtBackend | None = None,
) -> list[Condition]:
    """Conditions certainly true at every point of the box.

    The exact interval prover decides affine conditions outright, so the
    random feasibility prefilter only runs ahead of the (expensive) SMT path;
    a certainly-true condition passes any sample check by definition.
    """
    out = []
    for c in conditions:
        tri = int(_kernel(c.formula(), b.names).eval_boxes(*[v[None, :] for v in b.arrays()])[0])
        if tri == 1:
            out.append(c)
        elif tri == 0 and smt is not None:
            if rng is not None and n_sample > 0:
                pts = sample_box(b, n_sample, rng)
                truth = _kernel(c.formula(), b.names).eval_points(pts)
                if not truth.all():
                    continue
            if forall_holds(c.formula(), b, smt=smt):
                out.append(c)
    return out


def _consistency_matrix(
    boxes: Sequence[Box],
    conditions: Sequence[Condition],
    n_sample: int,
    rng: np.random.Generator | None,
    smt: SmtBackend | None,
) -> np.ndarray:
    """(n_boxes, n_conditions) bool matrix of certain truth, batched."""
    if not boxes or not conditions:
        return np.zeros((len(boxes), len(conditions)), dtype=bool)
    order = boxes[0].names
    lo = np.array([[b[n].lo for n in order] for b in boxes])
    hi = np.array([[b[n].hi for n in order] for b in boxes])
    out = np.zeros((len(boxes), len(conditions)), dtype=bool)
    for j, c in enumerate(conditions):
        tri = _kernel(c.formula(), order).eval_boxes(lo, hi)
        out[:, j] = tri == 1
        if smt is not None:
            for i in np.nonzero(tri == 0)[0]:
                out[i, j] = bool(
                    get_consistent_conditions(boxes[i], n_sample, [c], rng, smt)
                )
    return out


# --- most-specific selection ---------------------------------------------------


def shell_schedule(alpha: float) -> list[float]:
    """Scale factors for the sampling shells around a box."""
    return [c * float(np.exp(alpha * c)) for c in SHELL_BASE]


def _sample_shell(inner: Box, outer: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points in outer minus the open interior of inner, batched.

    Rejection sampling in vectorized rounds; thin shells have tiny acceptance
    so each round draws in bulk.  Degenerate shells fall back to clamping one
    spanning axis onto the outer face.
    """
    olo, ohi = outer.arrays()
    ilo, ihi = inner.arrays()
    accept_est = max(1.0 - float(np.prod(np.where(ohi > olo, (ihi - ilo) / np.maximum(ohi - olo, 1e-300), 1.0))), 1e-3)
    out: list[np.ndarray] = []
    need = n
    for _ in range(8):
        draw = int(min(max(64, need / accept_est * 1.5), 500_000))
        pts = rng.uniform(olo, ohi, size=(draw, len(olo)))
        keep = ~np.all((pts > ilo) & (pts < ihi), axis=1)
        good = pts[keep]
        if len(good):
            out.append(good[:need])
            need -= len(out[-1])
        if need <= 0:
            return np.vstack(out)
    # degenerate: force remaining points onto the outer boundary
    pts = rng.uniform(olo, ohi, size=(need, len(olo)))
    spans = np.nonzero(ohi > olo)[0]
    if len(spans):
        axes = spans[rng.integers(0, len(spans), size=need)]
        faces = np.where(rng.random(need) < 0.5, olo[axes], ohi[axes])
        pts[np.arange(need), axes] = faces
    out.append(pts)
    return np.vstack(out)


def most_specific_conditions(
    b: Box,
    n: int,
    candidates: Sequence[Condition],
    alpha: float,
    rng: np.random.Generator,
) -> list[Condition]:
    """Candidates that first fail when sampling shells just outside the box.

    Walks outward through scaled copies of the box; a candidate enters the
    result at the first shell where some sample falsifies it, unless its free
    variables are already covered by earlier picks.  Returns empty when
    nothing fails before the schedule is exhausted.
    """
    ell = shell_schedule(alpha)
    selected: dict[Condition, None] = {}
    dims_covered: set[str] = set()
    b_dim = len(b)
    kernels = {c: _kernel(c.formula(), b.names) for c in candidates}
    for lower, upper in zip(ell, ell[1:]):
        inner = b.scaled_about_center(lower)
        outer = b.scaled_about_center(upper)
        pts = _sample_shell(inner, outer, n, rng)
        for c in candidates:
            if c in selected or set(c.free_vars()) <= dims_covered:
                continue
            if not kernels[c].eval_points(pts).all():
                selected.setdefault(c)
                dims_covered.update(c.free_vars())
        if len(dims_covered) == b_dim:
            return list(selected)
    return list(selected)


def _unit_shell_offsets(
    lower: float, upper: float, count: int, dim: int, rng: np.random.Generator
) -> np.ndarray:
    """`count` offsets uniform over the centered `upper`-cube minus the open
    interior of the `lower`-cube, in unit-box coordinates.

    Shells of scaled copies of a box are affine images of this one set, so a
    single batched rejection pass serves every box at once.
    """
    accept = max(1.0 - (lower / upper) ** dim, 1e-3)
    out: list[np.ndarray] = []
    need = count
    for _ in range(8):
        draw = int(min(max(128, need / accept * 1.5), 2_000_000))
        pts = rng.uniform(-0.5 * upper, 0.5 * upper, size=(draw, dim))
        keep = ~np.all(np.abs(pts) < 0.5 * lower, axis=1)
        good = pts[keep]
        if len(good):
            out.append(good[:need])
            need -= len(out[-1])
        if need <= 0:
            return np.vstack(out)
    pts = rng.uniform(-0.5 * upper, 0.5 * upper, size=(need, dim))
    axes = rng.integers(0, dim, size=need)
    pts[np.arange(need), axes] = np.where(rng.random(need) < 0.5, -0.5, 0.5) * upper
    out.append(pts)
    return np.vstack(out)


def _most_specific_batch(
    boxes: Sequence[Box],
    candidates: Sequence[Condition],
    consistent: np.ndarray,  # (n_boxes, n_candidates) bool
    n: int,
    alpha: float,
    rng: np.random.Generator,
) -> list[list[Condition]]:
    """Per-box most-specific selection, vectorized over boxes.

    Same procedure as :func:`most_specific_conditions` (first shell where a
    sample falsifies the candidate, skipping candidates whose variables are
    already covered), evaluated for all boxes per shell in a few kernel calls.
    """
    if not boxes:
        return []
    names = boxes[0].names
    dim = len(names)
    centers = np.array([[b[nm].center for nm in names] for b in boxes])
    widths = np.array([[b[nm].width for nm in names] for b in boxes])
    ell = shell_schedule(alpha)
    kernels = [_kernel(c.formula(), names) for c in candidates]
    fvars = [set(c.free_vars()) for c in candidates]

    selected: list[dict[Condition, None]] = [dict() for _ in boxes]
    covered: list[set[str]] = [set() for _ in boxes]
    resolved = np.zeros((len(boxes), len(candidates)), dtype=bool)
    active = np.arange(len(boxes))
    for lower, upper in zip(ell, ell[1:]):
        if len(active) == 0:
            break
        offsets = _unit_shell_offsets(lower, upper, len(active) * n, dim, rng)
        offsets = offsets.reshape(len(active), n, dim)
        pts = centers[active, None, :] + offsets * widths[active, None, :]
        for j, c in enumerate(candidates):
            mask = consistent[active, j] & ~resolved[active, j]
            rows = np.nonzero(mask)[0]
            if len(rows) == 0:
                continue
            take = pts[rows].reshape(-1, dim)
            truth = kernels[j].eval_points(take).reshape(len(rows), n)
            fails = ~truth.all(axis=1)
            for r in np.nonzero(fails)[0]:
                i = int(active[rows[r]])
                resolved[i, j] = True
                if fvars[j] <= covered[i]:
                    continue
                selected[i].setdefault(c)
                covered[i].update(fvars[j])
        active = np.array([i for i in active if len(covered[i]) < dim], dtype=int)
    return [list(s) for s in selected]


# --- initial conditions ---------------------------------------------------------


def initial_conditions(
    boxes: Sequence[Box],
    n_sample: int,
    conditions: Sequence[Condition],
    produce_greater_abstraction: bool,
    rng: np.random.Generator,
    shell_samples: int = 20,
    alpha: float = 0.1,
    smt: SmtBackend | None = None,
) -> tuple[list[Condition], list[tuple[Condition, Box]], list[tuple[Box, Condition]]]:
    """Which conditions cover which boxes, and which are most specific per box.

    Boxes matched by nothing (or, outside greater-abstraction mode, by nothing
    specific) get a fresh box-range condition so they stay describable.
    """
    if not boxes:
        raise NoSituationError()
    cs2: list[Condition] = list(conditions)
    cs_and_bs: list[tuple[Condition, Box]] = []
    bs_and_good: list[tuple[Box, Condition]] = []
    box_vars = set(boxes[0].names)
    applicable = [c for c in conditions if set(c.free_vars()) <= box_vars]
    matrix = _consistency_matrix(boxes, applicable, n_sample, rng, smt)
    specific_per_box = _most_specific_batch(boxes, applicable, matrix, shell_samples, alpha, rng)
    for i, b in enumerate(boxes):
        consistent = [c for j, c in enumerate(applicable) if matrix[i, j]]
        cs_and_bs.extend((c, b) for c in consistent)
        specific = specific_per_box[i]
        if not specific or not consistent:
            if not produce_greater_abstraction or not consistent:
                box_pred = BoxRangeCondition(b)
                cs2.append(box_pred)
                cs_and_bs.append((box_pred, b))
                bs_and_good.append((b, box_pred))
            else:
                bs_and_good.extend((b, c) for c in consistent)
        else:
            bs_and_good.extend((b, c) for c in specific)
    return cs2, cs_and_bs, bs_and_good


# --- multivariate set cover -----------------------------------------------------


def multivariate_set_cover(
    bs_and_conditions: Sequence[tuple[Box, Condition]],
    rng: np.random.Generator,
) -> list[Condition]:
    """Greedy cover of (box, variable) slots, conjoining per-box winners.

    The gain of a candidate is the number of boxes it relates to that still
    have uncovered variables it would constrain; ties flip a fair coin.  Each
    box's set of winning conditions becomes a conjunction when it has more
    than one member.
    """
    box_index: dict[Box, int] = {}
    cands: list[Condition] = []
    cand_index: dict[Condition, int] = {}
    edge_list: list[tuple[int, int]] = []
    for b, c in bs_and_conditions:
        i = box_index.setdefault(b, len(box_index))
        if c not in cand_index:
            cand_index[c] = len(cands)
            cands.append(c)
        edge_list.append((cand_index[c], i))
    n_box, n_cand = len(box_index), len(cands)
    if n_box == 0:
        return []
    edges = np.zeros((n_cand, n_box), dtype=bool)
    for j, i in edge_list:
        edges[j, i] = True
    return _cover_core(cands, edges, rng)


def _cover_core(
    cands: Sequence[Condition], edges: np.ndarray, rng: np.random.Generator
) -> list[Condition]:
    """Greedy matrix core of the multivariate covering.

    `edges` is the (candidate, box) relation; it is consumed in place.
    Candidates that are the sole option for their single box (typically
    box-range fallbacks) always end up selected alone, so they are peeled off
    before the greedy loop.
    """
    n_cand, n_box = edges.shape
    if n_cand == 0 or n_box == 0:
        return []
    cand_deg = edges.sum(axis=1)
    box_deg = edges.sum(axis=0)
    solo = np.zeros(n_cand, dtype=bool)
    for j in np.nonzero(cand_deg == 1)[0]:
        i = int(np.nonzero(edges[j])[0][0])
        if box_deg[i] == 1:
            solo[j] = True
            edges[j, i] = False
    if solo.any():
        keep = np.nonzero(~solo)[0]
        rest = _cover_core([cands[j] for j in keep], edges[keep], rng)
        out: dict[Condition, None] = {}
        for c in rest:
            out.setdefault(c)
        for j in np.nonzero(solo)[0]:
            out.setdefault(cands[j])
        return list(out)
    # variable bitmasks make the "adds no new variable" test one AND
    var_index: dict[str, int] = {}
    fv_mask = np.zeros(n_cand, dtype=np.int64)
    for j, c in enumerate(cands):
        m = 0
        for v in c.free_vars():
            m |= 1 << var_index.setdefault(v, len(var_index))
        fv_mask[j] = m

    covered = np.zeros(n_box, dtype=np.int64)
    winners = np.zeros((n_cand, n_box), dtype=bool)
    counts = edges.sum(axis=1)  # maintained incrementally
    while True:
        best_n = int(counts.max(initial=0))
        if best_n == 0:
            break
        ties = np.nonzero(counts == best_n)[0]
        best = int(ties[0])
        if len(ties) > 1:
            # chained fair coin: each later tie may displace the champion
            flips = rng.random(len(ties) - 1) > 0.5
            for k in np.nonzero(flips)[0]:
                best = int(ties[k + 1])
        rows = np.nonzero(edges[best])[0]
        winners[best, rows] = True
        covered[rows] |= fv_mask[best]
        exhausted = (fv_mask[:, None] & ~covered[None, rows]) == 0  # (n_cand, len(rows))
        removed = edges[:, rows] & exhausted
        counts -= removed.sum(axis=1)
        edges[:, rows] &= ~exhausted

    # per-box winning sets, conjoined
    result: dict[Condition, None] = {}
    seen_sets: set[bytes] = set()
    win_cols = winners.T  # (n_box, n_cand)
    for i in range(n_box):
        key = np.packbits(win_cols[i]).tobytes()
        if key in seen_sets:
            continue
        seen_sets.add(key)
        group = [cands[j] for j in np.nonzero(win_cols[i])[0]]
        if not group:
            continue
        if len(group) == 1:
            result.setdefault(group[0])
        else:
            atoms: list[AtomicCondition] = []
            for p in group:
                atoms.extend(p.atoms())
            if len(set(atoms)) == 1:
                result.setdefault(atoms[0])
            else:
                result.setdefault(ConjunctionCondition.of(atoms))
    return list(result)


def handle_new_conjunctions(
    conditions: Sequence[Condition],
    cs_to_bs: Mapping[Condition, Sequence[Box]],
) -> dict[Condition, list[Box]]:
    """Extend the condition-to-boxes map with conjunction entries.

    A conjunction covers the intersection of its members' box sets.  The
    input map is not mutated.
    """
    out: dict[Condition, list[Box]] = {c: list(bs) for c, bs in cs_to_bs.items()}
    member_sets: dict[Condition, set[Box]] = {}
    for c in conditions:
        if c in out:
            continue
        if isinstance(c, ConjunctionCondition):
            members = c.atoms()
            base = out.get(members[0], [])
            rest = []
            for m in members[1:]:
                if m not in member_sets:
                    member_sets[m] = set(out.get(m, ()))
                rest.append(member_sets[m])
            out[c] = [b for b in base if all(b in s for s in rest)]
    return out


# --- volumes ---------------------------------------------------------------------


def volumes_covered(
    boxes: Sequence[Box],
    conditions: Sequence[Condition],
    cs_to_bs: Mapping[Condition, Sequence[Box]],
) -> tuple[dict[Condition, float], dict[Condition, float]]:
    """Total and uniquely-covered volume per condition, normalized.

    Both are normalized by the grand total volume of the boxes (1.0 when that
    is zero, so degenerate boxes still sort deterministically).
    """
    index = {b: i for i, b in enumerate(boxes)}
    vols = np.array([box_volume(b) for b in boxes], dtype=float)
    cov = np.zeros((len(conditions), len(boxes)), dtype=bool)
    for j, c in enumerate(conditions):
        for b in cs_to_bs.get(c, ()):
            i = index.get(b)
            if i is not None:
                cov[j, i] = True
    grand = float(vols.sum()) or 1.0
    tv_vals = cov @ vols
    solo = cov.sum(axis=0) == 1
    uv_vals = cov @ (vols * solo)
    return (
        {c: float(tv_vals[j]) / grand for j, c in enumerate(conditions)},
        {c: float(uv_vals[j]) / grand for j, c in enumerate(conditions)},
    )


# --- implied-condition removal ----------------------------------------------------


def disjunct_covers_box(
    b: Box,
    conditions: Sequence[Condition],
    n_sample: int,
    rng: np.random.Generator,
    smt: SmtBackend | None = None,
) -> bool:
    """Does the disjunction of `conditions` certainly hold on the box?

    Random samples refute cheaply before the formal check; Unknown from the
    formal check counts as not covered (conservative).
    """
    if not conditions:
        return False
    phi = disj([c.formula() for c in conditions])
    if n_sample > 0:
        pts = sample_box(b, n_sample, rng)
        truth = _kernel(phi, b.names).eval_points(pts)
        if not truth.all():
            return False
    return forall_holds(phi, b, smt=smt).value is Outcome.PROVEN


def _certain_rows(
    conditions: Sequence[Condition],
    boxes: Sequence[Box],
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    """(condition, box) matrix of certain truth over every box.

    Box-ranges reduce to containment, conjunctions to the AND of their
    members (exact under Kleene); everything else goes through the kernel.
    """
    n_box = len(boxes)
    out = np.zeros((len(conditions), n_box), dtype=bool)
    if n_box == 0:
        return out
    names = boxes[0].names
    order = {n: k for k, n in enumerate(names)}
    atom_rows: dict[Condition, np.ndarray] = {}

    def atomic_row(c: Condition) -> np.ndarray:
        if c not in atom_rows:
            if isinstance(c, BoxRangeCondition):
                row = np.ones(n_box, dtype=bool)
                for n, iv in c.box:
                    k = order[n]
                    row &= (lo[:, k] >= iv.lo) & (hi[:, k] <= iv.hi)
                atom_rows[c] = row
            else:
                atom_rows[c] = _kernel(c.formula(), names).eval_boxes(lo, hi) == 1
        return atom_rows[c]

    for j, c in enumerate(conditions):
        if isinstance(c, ConjunctionCondition):
            row = np.ones(n_box, dtype=bool)
            for m in c.atoms():
                row &= atomic_row(m)
            out[j] = row
        else:
            out[j] = atomic_row(c)
    return out


def remove_implied(
    conditions: Sequence[Condition],
    cs_to_bs: Mapping[Condition, Sequence[Box]],
    cs_to_uv: Mapping[Condition, float],
    n_sample: int,
    rng: np.random.Generator,
    smt: SmtBackend | None = None,
) -> list[Condition]:
    """Drop conditions whose boxes the rest of the description certainly covers.

    Box-range conditions are considered first, then conjunctions, then the
    rest, each group in ascending unique-volume order; a removed condition's
    boxes stay on the must-still-be-covered list for later checks.

    The interval prover proves a disjunction on a box exactly when it proves
    some single disjunct (Kleene Or), so without an SMT back end the check
    reduces to a per-condition certain-coverage matrix updated as conditions
    drop out; the SMT path still sees the whole disjunction.
    """
    universe: dict[Box, int] = {}
    for c in conditions:
        for b in cs_to_bs.get(c, ()):
            universe.setdefault(b, len(universe))
    boxes = list(universe)
    n_box = len(boxes)
    if boxes:
        names = boxes[0].names
        lo = np.array([[b[n].lo for n in names] for b in boxes])
        hi = np.array([[b[n].hi for n in names] for b in boxes])
    else:
        lo = hi = np.zeros((0, 0))
    responsibility = {
        c: np.array(sorted({universe[b] for b in cs_to_bs.get(c, ())}), dtype=int)
        for c in dict.fromkeys(conditions)
    }
    return _remove_implied_rows(
        list(conditions), responsibility, cs_to_uv, boxes, lo, hi, n_sample, rng, smt
    )


def _remove_implied_rows(
    conditions: list[Condition],
    responsibility: Mapping[Condition, np.ndarray],
    cs_to_uv: Mapping[Condition, float],
    boxes: Sequence[Box],
    lo: np.ndarray,
    hi: np.ndarray,
    n_sample: int,
    rng: np.random.Generator,
    smt: SmtBackend | None,
) -> list[Condition]:
    n_box = len(boxes)
    box_group = [c for c in conditions if isinstance(c, BoxRangeCondition)]
    conj_group = [c for c in conditions if isinstance(c, ConjunctionCondition)]
    other_group = [c for c in conditions if not isinstance(c, (BoxRangeCondition, ConjunctionCondition))]

    distinct: dict[Condition, int] = {}
    for c in conditions:
        distinct.setdefault(c, len(distinct))
    multiplicity = np.zeros(len(distinct), dtype=int)
    for c in conditions:
        multiplicity[distinct[c]] += 1

    # stream the per-condition certain-coverage rows: cover_count is the only
    # persistent aggregate, so memory stays O(boxes) for huge condition sets
    def certain_row(c: Condition) -> np.ndarray:
        return _certain_rows([c], boxes, lo, hi)[0]

    cover_count = np.zeros(n_box, dtype=np.int64)
    for c, j in distinct.items():
        cover_count += multiplicity[j] * certain_row(c)

    kept_ids = [(c, distinct[c]) for c in conditions]
    always_check = np.zeros(n_box, dtype=bool)
    for group in (box_group, conj_group, other_group):
        for c in sorted(group, key=lambda c: cs_to_uv.get(c, 0.0)):
            j = distinct[c]
            if multiplicity[j] == 0:
                continue  # an equal copy was already removed
            row = certain_row(c)
            rest_count = cover_count - multiplicity[j] * row
            to_check = always_check.copy()
            rows = responsibility.get(c)
            if rows is not None and len(rows):
                to_check[rows] = True
            uncovered = to_check & (rest_count == 0)
            rest_nonempty = len(kept_ids) > multiplicity[j]
            ok = rest_nonempty and not uncovered.any()
            if not ok and smt is not None and rest_nonempty and uncovered.any():
                rest = [d for d, dj in kept_ids if dj != j]
                ok = all(
                    disjunct_covers_box(boxes[i], rest, n_sample, rng, smt)
                    for i in np.nonzero(uncovered)[0]
                )
            if ok:
                kept_ids = [(d, dj) for d, dj in kept_ids if dj != j]
                cover_count = rest_count
                multiplicity[j] = 0
                always_check = to_check
    return [d for d, _ in kept_ids]


# --- box-range merging --------------------------------------------------------------


def merge_box_range(
    covering: Sequence[Condition],
    conditions: Sequence[Condition],
    cs_to_bs: Mapping[Condition, Sequence[Box]],
    merge_params: MergeParams | None = None,
) -> tuple[list[Condition], list[Condition], dict[Condition, list[Box]]]:
    """Replace box-range conditions with merged, coarser box-range conditions."""
    candidates = [c for c in covering if isinstance(c, BoxRangeCondition)]
    cs_to_bs2 = {c: list(bs) for c, bs in cs_to_bs.items()}
    if not candidates:
        return list(covering), list(conditions), cs_to_bs2
    covering2 = [c for c in covering if c not in candidates]
    conditions2 = [c for c in conditions if c not in candidates]
    merged = merge_boxes([c.box for c in candidates], merge_params)
    tol = (merge_params or MergeParams()).threshold
    for nb in merged:
        cond = BoxRangeCondition(nb)
        conditions2.append(cond)
        covering2.append(cond)
        covered: dict[Box, None] = {}
        for old in candidates:
            if nb.contains_box(old.box, tol=tol):
                for b in cs_to_bs2.get(old, ()):
                    covered.setdefault(b)
        cs_to_bs2[cond] = list(covered)
    return covering2, conditions2, cs_to_bs2


# --- the full pipeline -----------------------------------------------------------------


@dataclass(frozen=True)
class WeightedDescription:
    """Final DNF: conditions sorted by (unique volume, total volume) descending."""

    conditions: tuple[Condition, ...]
    unique_volume: tuple[float, ...]
    total_volume: tuple[float, ...]

    def named_predicate_names(self) -> list[str]:
        """Named-predicate occurrences anywhere, conjunction members included."""
        out = []
        for c in self.conditions:
            for a in c.atoms():
                if isinstance(a, NamedCondition):
                    out.append(a.predicate.name)
        return out

    def render_text(self) -> str:
        lines = []
        for c, uv, tv in zip(self.conditions, self.unique_volume, self.total_volume):
            lines.append(f"[uv={uv:.4f} tv={tv:.4f}] {c.display()}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "v": 1,
            "conditions": [
                {
                    "condition": _condition_to_json(c),
                    "unique_volume": uv,
                    "total_volume": tv,
                    "text": c.display(),
                }
                for c, uv, tv in zip(self.conditions, self.unique_volume, self.total_volume)
            ],
        }


def _condition_to_json(c: Condition) -> dict:
    if isinstance(c, NamedCondition):
        return {"kind": "named", "name": c.predicate.name}
    if isinstance(c, BoxRangeCondition):
        return {"kind": "box_range", "bounds": {n: [iv.lo, iv.hi] for n, iv in c.box}}
    return {"kind": "conjunction", "members": [_condition_to_json(m) for m in c.members]}


def _volumes_from_rows(
    conditions: Sequence[Condition],
    rows: Mapping[Condition, np.ndarray],
    vols: np.ndarray,
) -> tuple[dict[Condition, float], dict[Condition, float]]:
    if not conditions:
        return {}, {}
    cov = np.stack([rows[c] for c in conditions])
    grand = float(vols.sum()) or 1.0
    tv_vals = cov @ vols
    solo = cov.sum(axis=0) == 1
    uv_vals = cov @ (vols * solo)
    return (
        {c: float(tv_vals[j]) / grand for j, c in enumerate(conditions)},
        {c: float(uv_vals[j]) / grand for j, c in enumerate(conditions)},
    )


def generate_description(
    boxes: Sequence[Box],
    n_sample: int,
    predicates: Sequence[Predicate],
    produce_greater_abstraction: bool,
    rng: np.random.Generator,
    shell_samples: int = 20,
    alpha: float = 0.1,
    merge_params: MergeParams | None = None,
    smt: SmtBackend | None = None,
) -> WeightedDescription:
    """Run the whole description pipeline over the illuminated boxes.

    Condition-to-box associations are carried as boolean rows over a fixed
    box order, which keeps the two coverings, the volume weights, and the
    implied-condition removal linear in the number of association edges.
    """
    if not boxes:
        raise NoSituationError()
    named = [NamedCondition(p) for p in predicates]
    n_box = len(boxes)
    box_vars = set(boxes[0].names)
    applicable = [c for c in named if set(c.free_vars()) <= box_vars]
    consist = _consistency_matrix(boxes, applicable, n_sample, rng, smt)
    specific = _most_specific_batch(boxes, applicable, consist, shell_samples, alpha, rng)

    # responsibility rows (which boxes each condition is consistent with)
    cond_rows: dict[Condition, np.ndarray] = {
        c: consist[:, j].copy() for j, c in enumerate(applicable)
    }
    good_rows: dict[Condition, np.ndarray] = {}

    def mark_good(c: Condition, i: int) -> None:
        row = good_rows.get(c)
        if row is None:
            row = good_rows[c] = np.zeros(n_box, dtype=bool)
        row[i] = True

    for i, b in enumerate(boxes):
        consistent_j = np.nonzero(consist[i])[0]
        spec = specific[i]
        if not spec or len(consistent_j) == 0:
            if not produce_greater_abstraction or len(consistent_j) == 0:
                br = BoxRangeCondition(b)
                row = np.zeros(n_box, dtype=bool)
                row[i] = True
                cond_rows[br] = row
                mark_good(br, i)
            else:
                for j in consistent_j:
                    mark_good(applicable[j], i)
        else:
            for c in spec:
                mark_good(c, i)

    def add_conjunction_rows(conds: Sequence[Condition]) -> None:
        for c in conds:
            if c not in cond_rows and isinstance(c, ConjunctionCondition):
                row = np.ones(n_box, dtype=bool)
                for m in c.atoms():
                    member = cond_rows.get(m)
                    row = row & member if member is not None else np.zeros(n_box, dtype=bool)
                cond_rows[c] = row

    good_list = list(good_rows)
    covering = _cover_core(good_list, np.stack([good_rows[c] for c in good_list]), rng)
    add_conjunction_rows(covering)

    # second covering: full consistency relation, candidates restricted to the
    # first cover's winners
    covering2 = _cover_core(covering, np.stack([cond_rows[c] for c in covering]), rng)
    add_conjunction_rows(covering2)

    vols = np.array([box_volume(b) for b in boxes])
    _tv, uv = _volumes_from_rows(covering2, cond_rows, vols)
    lo = np.array([[b[n].lo for n in boxes[0].names] for b in boxes])
    hi = np.array([[b[n].hi for n in boxes[0].names] for b in boxes])
    responsibility = {c: np.nonzero(cond_rows[c])[0] for c in covering2}
    covering3 = _remove_implied_rows(
        covering2, responsibility, uv, boxes, lo, hi, n_sample, rng, smt
    )

    # merge box-range fallbacks into coarser ranges
    candidates = [c for c in covering3 if isinstance(c, BoxRangeCondition)]
    covering4 = [c for c in covering3 if not isinstance(c, BoxRangeCondition)]
    if candidates:
        tol = (merge_params or MergeParams()).threshold
        merged = merge_boxes([c.box for c in candidates], merge_params)
        for nb in merged:
            cond = BoxRangeCondition(nb)
            row = np.zeros(n_box, dtype=bool)
            for old in candidates:
                if nb.contains_box(old.box, tol=tol):
                    row |= cond_rows[old]
            cond_rows[cond] = row
            covering4.append(cond)

    tv2, uv2 = _volumes_from_rows(covering4, cond_rows, vols)
    ordered = sorted(
        covering4, key=lambda c: (-uv2.get(c, 0.0), -tv2.get(c, 0.0), c.sort_key())
    )
    return WeightedDescription(
        tuple(ordered),
        tuple(uv2.get(c, 0.0) for c in ordered),
        tuple(tv2.get(c, 0.0) for c in ordered),
    )


def certainly_covers(
    conditions: Sequence[Condition],
    b: Box,
    smt: SmtBackend | None = None,
) -> bool:
    """Audit helper: does the disjunction of conditions certainly hold on b?"""
    if not conditions:
        return False
    phi = disj([c.formula() for c in conditions])
    return forall_holds(phi, b, smt=smt).value is Outcome.PROVEN
