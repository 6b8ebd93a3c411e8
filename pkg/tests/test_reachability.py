import itertools

import numpy as np
import pytest

from boxplain.formula import And, Atom, Or
from boxplain.geometry import Box, Interval, box_volume
from boxplain.models import FeedForwardNetwork
from boxplain.predicates import Question, Strength
from boxplain.reachability import (
    AnalysisCaps,
    AnalysisStats,
    Illuminated,
    MergeParams,
    StopParams,
    build_reachset,
    cegar_like_analysis,
    initial_abstraction,
    merge_boxes,
    question_to_spec,
    refine,
    stop,
)


def ge(var, c):
    return Atom.of({var: 1.0}, ">=", c)


def le(var, c):
    return Atom.of({var: 1.0}, "<=", c)


# --- stop ---------------------------------------------------------------------


def test_stop_full_box_false():
    p = StopParams(0.5, Box.of(x=(0, 1), y=(0, 1)))
    assert stop(Box.of(x=(0, 1), y=(0, 1)), p) is False


def test_stop_boundary_inclusive():
    p = StopParams(0.5, Box.of(x=(0, 1)))
    assert stop(Box.of(x=(0, 0.5)), p) is True


def test_stop_small_box():
    p = StopParams(0.25, Box.of(x=(0, 1)))
    assert stop(Box.of(x=(0, 0.1)), p) is True


# --- refine -------------------------------------------------------------------


def test_refine_longest_normalized_axis():
    bounding = Box.of(x=(0, 1), y=(0, 8))
    parts = refine(Box.of(x=(0, 1), y=(0, 4)), 2, bounding)
    assert parts == [Box.of(x=(0, 0.5), y=(0, 4)), Box.of(x=(0.5, 1), y=(0, 4))]


def test_refine_tie_breaks_to_lowest_index():
    bounding = Box.of(x=(0, 1), y=(0, 1), z=(0, 1))
    parts = refine(bounding, 3, bounding)
    assert len(parts) == 3
    assert all(p["y"] == Interval(0, 1) and p["z"] == Interval(0, 1) for p in parts)
    widths = [p["x"].width for p in parts]
    assert max(widths) - min(widths) < 1e-12


def test_refine_union_is_exact_partition():
    rng = np.random.default_rng(3)
    bounding = Box.of(x=(-2, 2), y=(-2, 2))
    for _ in range(200):
        vals = np.sort(rng.uniform(-2, 2, size=(2, 2)), axis=1)
        b = Box({n: Interval(*vals[i]) for i, n in enumerate("xy")})
        k = int(rng.integers(2, 4))
        parts = refine(b, k, bounding)
        axis = next(n for n, iv in parts[0] if iv != b[n])
        assert parts[0][axis].lo == b[axis].lo
        assert parts[-1][axis].hi == b[axis].hi
        for a, bnext in zip(parts, parts[1:]):
            assert a[axis].hi == bnext[axis].lo  # shared float boundary


def test_refine_rejects_bad_k():
    with pytest.raises(ValueError):
        refine(Box.of(x=(0, 1)), 4, Box.of(x=(0, 1)))


# --- initial abstraction ------------------------------------------------------


def test_initial_abstraction_1d():
    assert initial_abstraction(Box.of(x=(0, 1))) == [Box.of(x=(0, 0.5)), Box.of(x=(0.5, 1))]


def test_initial_abstraction_quadrants():
    quads = initial_abstraction(Box.of(x=(0, 1), y=(0, 1)))
    assert len(quads) == 4
    assert sum(box_volume(q) for q in quads) == pytest.approx(1.0)
    for a, b in itertools.combinations(quads, 2):
        overlap = 1.0
        for n in ("x", "y"):
            overlap *= max(0.0, min(a[n].hi, b[n].hi) - max(a[n].lo, b[n].lo))
        assert overlap == 0.0


def test_initial_abstraction_dim_cap_falls_back():
    bounding = Box({f"v{i}": Interval(0, 1) for i in range(14)})
    assert initial_abstraction(bounding) == [bounding]


# --- question to spec ---------------------------------------------------------


def test_question_to_spec_when_do_you(line_pack):
    q = Question.of("when_do_you", "strict", [["out_high"]])
    phi, side = question_to_spec(q, line_pack)
    assert phi == line_pack.predicate("out_high").formula
    assert side is Illuminated.INPUT


def test_question_to_spec_circumstances_dnf(line_pack):
    q = Question.of("circumstances", "strict", [["x_high", "out_high"], ["x_low"]])
    phi, side = question_to_spec(q, line_pack)
    assert isinstance(phi, Or) and isinstance(phi.children[0], And)
    assert side is Illuminated.JOINT


def test_question_to_spec_empty_content(line_pack):
    with pytest.raises(ValueError):
        question_to_spec(Question.of("when_do_you", "strict", []), line_pack)


# --- the analysis itself ------------------------------------------------------


def run_line_analysis(phi, epsilon, mode=Strength.STRICT, n_sample=32, seed=0, **kw):
    model = FeedForwardNetwork.identity(("x",), ("out",))
    params = StopParams(epsilon, Box.of(x=(0, 1)))
    return cegar_like_analysis(
        Box.of(x=(0, 1)), params, phi, model, mode, n_sample,
        np.random.default_rng(seed), force_k=2, **kw,
    )


def test_cegar_tautology_partitions_to_stop_size():
    # condition true everywhere: the short-circuit path tiles the box at eps
    kept = run_line_analysis(ge("out", -1.0), epsilon=0.25)
    assert sorted((b["x"].lo, b["x"].hi) for b in kept) == [
        (0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)
    ]


def test_cegar_unsatisfiable_prunes_root():
    kept = run_line_analysis(ge("out", 2.0), epsilon=0.25)
    assert kept == []


def test_cegar_threshold_covers_up_to_one_boundary_cell():
    kept = run_line_analysis(ge("out", 0.75), epsilon=0.25)
    los = sorted(b["x"].lo for b in kept)
    assert min(los) >= 0.75 - 0.25  # at most one eps-cell below the threshold
    union_hi = max(b["x"].hi for b in kept)
    assert union_hi == 1.0
    # grid oracle: every satisfying point lies inside some kept box
    model = FeedForwardNetwork.identity(("x",), ("out",))
    xs = np.linspace(0, 1, 10_000)
    ys = model.evaluate(xs[:, None])[:, 0]
    sat = ys >= 0.75
    for x in xs[sat]:
        assert any(b["x"].contains(float(x)) for b in kept)


def test_cegar_usually_mode_drops_measure_zero():
    strict_kept = run_line_analysis(Atom.of({"out": 1.0}, "=", 0.75), epsilon=0.25)
    assert strict_kept  # cells touching the line survive a sound analysis
    usual_kept = run_line_analysis(
        Atom.of({"out": 1.0}, "=", 0.75), epsilon=0.25, mode=Strength.USUALLY
    )
    assert usual_kept == []  # sampling never witnesses a measure-zero set


def test_cegar_usually_mode_keeps_real_regions():
    kept = run_line_analysis(ge("out", 0.75), epsilon=0.25, mode=Strength.USUALLY, n_sample=64)
    assert any(b["x"].hi == 1.0 for b in kept)
    covered = sorted((b["x"].lo, b["x"].hi) for b in kept)
    assert covered[-1][1] == 1.0 and covered[0][0] >= 0.5


def test_cegar_box_budget_degrades_to_stop():
    stats = AnalysisStats()
    kept = run_line_analysis(
        ge("out", -1.0), epsilon=1e-4,
        caps=AnalysisCaps(max_boxes=64), stats=stats,
    )
    assert stats.degraded is True
    assert 0 < len(kept) <= 200
    assert max(b["x"].hi for b in kept) == 1.0
    assert min(b["x"].lo for b in kept) == 0.0


def test_cegar_depth_cap_degrades_to_stop():
    stats = AnalysisStats()
    kept = run_line_analysis(
        ge("out", 0.75), epsilon=1e-6,
        caps=AnalysisCaps(max_boxes=10**6, max_depth=5), stats=stats,
    )
    assert stats.degraded is True
    assert kept


# --- build_reachset -----------------------------------------------------------


def test_build_reachset_tautology_tiles_bounding(line_pack, line_model):
    q = Question.of("when_do_you", "strict", [["out_upper_half"], ["out_low"]])
    rs = build_reachset(q, line_model, line_pack, 0.5, 16, np.random.default_rng(0), force_k=2)
    total = sum(box_volume(b) for b in rs.input_boxes)
    assert total == pytest.approx(1.0)


def test_build_reachset_empty_is_legal(line_pack):
    net = FeedForwardNetwork.identity(("x",), ("out",))
    q = Question.of("when_do_you", "strict", [["out_high"], ["out_low"]])
    # clip outputs into [0.4, 0.6]: neither threshold is reachable
    from boxplain.models import Layer, MonotoneMap

    clipped = FeedForwardNetwork(
        net.layers, net.input_names, net.output_names,
        MonotoneMap(clip_lo=np.array([0.4]), clip_hi=np.array([0.6])),
    )
    rs = build_reachset(q, clipped, line_pack, 0.25, 16, np.random.default_rng(0), force_k=2)
    assert rs.pairs == ()


def test_build_reachset_identity_threshold_union(line_pack, line_model):
    q = Question.of("when_do_you", "strict", [["out_high"]])
    rs = build_reachset(q, line_model, line_pack, 0.25, 16, np.random.default_rng(0), force_k=2)
    los = [b["x"].lo for b in rs.input_boxes]
    his = [b["x"].hi for b in rs.input_boxes]
    assert min(los) >= 0.75 - 0.25 and max(his) == 1.0
    for b_in, b_out in rs.pairs:
        assert b_out == Box({"out": b_in["x"]})


def test_build_reachset_deterministic(line_pack, line_model):
    q = Question.of("when_do_you", "strict", [["out_high"]])
    runs = [
        build_reachset(q, line_model, line_pack, 0.1, 16, np.random.default_rng(7))
        for _ in range(2)
    ]
    assert runs[0].pairs == runs[1].pairs


def test_build_reachset_epsilon_monotonicity(line_pack, line_model):
    for clauses in ([["out_high"]], [["out_upper_half"]], [["out_low"], ["out_high"]]):
        q = Question.of("when_do_you", "strict", clauses)
        counts = []
        for eps in (0.5, 0.25, 0.125):
            rs = build_reachset(q, line_model, line_pack, eps, 16, np.random.default_rng(1), force_k=2)
            counts.append(len(rs.pairs))
        assert counts[0] <= counts[1] <= counts[2]


def test_reachset_illuminated_sides(line_pack, line_model):
    q = Question.of("circumstances", "strict", [["x_high", "out_high"]])
    rs = build_reachset(q, line_model, line_pack, 0.25, 16, np.random.default_rng(0), force_k=2)
    joint = rs.illuminated_boxes(Illuminated.JOINT)
    assert joint and all(set(b.names) == {"x", "out"} for b in joint)
    outs = rs.illuminated_boxes(Illuminated.OUTPUT)
    assert len(outs) <= len(rs.pairs)  # duplicates collapse


# --- merging ------------------------------------------------------------------


def test_merge_two_halves():
    merged = merge_boxes([Box.of(x=(0, 0.5)), Box.of(x=(0.5, 1))])
    assert merged == [Box.of(x=(0, 1))]


def test_merge_respects_gaps():
    boxes = [Box.of(x=(0, 0.4)), Box.of(x=(0.6, 1.0))]
    assert merge_boxes(boxes) == boxes


def test_merge_four_quadrants():
    quads = initial_abstraction(Box.of(x=(0, 1), y=(0, 1)))
    assert merge_boxes(quads) == [Box.of(x=(0, 1), y=(0, 1))]


def _random_split_tree(rng, box, leaves):
    out = [box]
    while len(out) < leaves:
        i = int(rng.integers(0, len(out)))
        b = out.pop(i)
        names = b.names
        axis = names[int(rng.integers(0, len(names)))]
        iv = b[axis]
        if iv.width < 1e-6:
            out.append(b)
            continue
        frac = float(rng.uniform(0.3, 0.7))
        cut = iv.lo + frac * iv.width
        out.append(Box({n: (Interval(iv.lo, cut) if n == axis else v) for n, v in b}))
        out.append(Box({n: (Interval(cut, iv.hi) if n == axis else v) for n, v in b}))
    return out


def _exhaustive_min_merge(boxes):
    """Smallest box count reachable by repeated pair merges (oracle)."""
    names = boxes[0].names

    def mergeable(a, b):
        diff = [n for n in names if (a[n].lo, a[n].hi) != (b[n].lo, b[n].hi)]
        if len(diff) != 1:
            return None
        n = diff[0]
        if a[n].hi == b[n].lo or b[n].hi == a[n].lo:
            return Box({m: (Interval(min(a[m].lo, b[m].lo), max(a[m].hi, b[m].hi)) if m == n else a[m]) for m in names})
        return None

    best = len(boxes)
    seen = set()

    def search(state):
        nonlocal best
        key = frozenset(state)
        if key in seen:
            return
        seen.add(key)
        best = min(best, len(state))
        for a, b in itertools.combinations(state, 2):
            m = mergeable(a, b)
            if m is not None:
                nxt = [x for x in state if x not in (a, b)] + [m]
                search(nxt)

    search(list(boxes))
    return best


def test_merge_matches_exhaustive_oracle_on_split_trees():
    rng = np.random.default_rng(12)
    for _ in range(20):
        leaves = int(rng.integers(2, 9))
        boxes = _random_split_tree(rng, Box.of(x=(0, 1), y=(0, 1)), leaves)
        order = rng.permutation(len(boxes))
        shuffled = [boxes[i] for i in order]
        merged = merge_boxes(shuffled)
        assert len(merged) == _exhaustive_min_merge(shuffled)


def test_merge_conservative_coverage():
    rng = np.random.default_rng(5)
    for _ in range(30):
        boxes = _random_split_tree(rng, Box.of(x=(0, 1), y=(0, 1)), 6)
        merged = merge_boxes(boxes)
        assert sum(box_volume(b) for b in merged) >= sum(box_volume(b) for b in boxes) - 1e-12
        for b in boxes:
            assert any(m.contains_box(b, tol=1e-9) for m in merged)


def test_merge_tolerates_jitter():
    eps = 1e-12
    a = Box.of(x=(0, 0.5), y=(0, 1))
    b = Box.of(x=(0.5 + eps, 1), y=(0, 1 - eps))
    merged = merge_boxes([a, b], MergeParams(threshold=1e-9))
    assert len(merged) == 1
    assert merged[0].contains_box(a) and merged[0].contains_box(b)
