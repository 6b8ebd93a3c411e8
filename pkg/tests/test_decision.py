import shutil

import numpy as np
import pytest

from boxplain.decision import (
    Outcome,
    SmtBackend,
    emit_smtlib,
    forall_holds,
    sample_feasibility,
)
from boxplain.formula import And, Atom, Not, Or, Rel, eval_point, negate
from boxplain.geometry import Box, Interval


def atom(coeffs, rel, const):
    return Atom.of(coeffs, rel, const)


SOLVER = shutil.which("z3") and "z3 -in" or (shutil.which("cvc5") and "cvc5 --lang smt2 -")
needs_solver = pytest.mark.skipif(SOLVER is None, reason="no SMT solver binary on PATH")


# --- sampling ----------------------------------------------------------------


def test_sample_feasibility_tautology():
    rng = np.random.default_rng(0)
    hit = sample_feasibility(atom({"x": 0.0}, "<=", 1.0), Box.of(x=(0, 1)), 4, rng)
    assert hit is not None


def test_sample_feasibility_unsatisfiable():
    rng = np.random.default_rng(0)
    assert sample_feasibility(atom({"x": 1.0}, ">", 2.0), Box.of(x=(0, 1)), 64, rng) is None


def test_sample_feasibility_seeded_golden():
    # (x >= 0.5) on [0,1] with 64 draws: found with prob 1 - 2^-64; the seeded
    # draw sequence makes the exact witness reproducible
    rng = np.random.default_rng(1234)
    hit = sample_feasibility(atom({"x": 1.0}, ">=", 0.5), Box.of(x=(0, 1)), 64, rng)
    assert hit is not None and hit["x"] >= 0.5
    rng2 = np.random.default_rng(1234)
    assert hit == sample_feasibility(atom({"x": 1.0}, ">=", 0.5), Box.of(x=(0, 1)), 64, rng2)


# --- forall ------------------------------------------------------------------


def test_forall_proven():
    v = forall_holds(atom({"x": 1.0}, "<=", 1.0), Box.of(x=(0, 0.5)))
    assert v.value is Outcome.PROVEN


def test_forall_refuted_at_vertex():
    v = forall_holds(atom({"x": 1.0}, "<=", 0.2), Box.of(x=(0, 0.5)))
    assert v.value is Outcome.REFUTED
    assert v.witness == {"x": 0.5}


def test_forall_unknown_from_kleene_or():
    f = Or((atom({"x": 1.0}, "<=", 0.6), atom({"x": 1.0}, ">=", 0.4)))
    v = forall_holds(f, Box.of(x=(0, 1)), n_samples=32, rng=np.random.default_rng(0))
    assert v.value is Outcome.UNKNOWN


def test_forall_witness_falsifies():
    rng = np.random.default_rng(5)
    names = ("x", "y")
    for _ in range(300):
        coeffs = {n: float(rng.normal()) for n in names}
        f = atom(coeffs, "<=", float(rng.normal()))
        vals = np.sort(rng.uniform(-1, 1, size=(2, 2)), axis=1)
        b = Box({n: Interval(*vals[i]) for i, n in enumerate(names)})
        v = forall_holds(f, b, n_samples=8, rng=rng)
        if v.value is Outcome.REFUTED:
            assert eval_point(f, v.witness) is False


def test_never_proven_with_sampled_counterexample_fuzz():
    # 1e5 cases: whenever forall says PROVEN, no sampled point may falsify
    rng = np.random.default_rng(99)
    names = ("x", "y")
    for _ in range(10_000):
        disjuncts = []
        for _ in range(rng.integers(1, 3)):
            conj = tuple(
                atom({n: float(rng.normal()) for n in names},
                     [Rel.LE, Rel.GE][rng.integers(0, 2)], float(rng.normal()))
                for _ in range(rng.integers(1, 3))
            )
            disjuncts.append(And(conj) if len(conj) > 1 else conj[0])
        f = Or(tuple(disjuncts)) if len(disjuncts) > 1 else disjuncts[0]
        vals = np.sort(rng.uniform(-2, 2, size=(2, 2)), axis=1)
        b = Box({n: Interval(*vals[i]) for i, n in enumerate(names)})
        v = forall_holds(f, b)
        if v.value is Outcome.PROVEN:
            pts = rng.uniform([b["x"].lo, b["y"].lo], [b["x"].hi, b["y"].hi], size=(10, 2))
            for row in pts:
                assert eval_point(f, {"x": float(row[0]), "y": float(row[1])})


# --- smtlib text -------------------------------------------------------------


def test_emit_smtlib_deterministic():
    f = And((atom({"x": 1.0, "y": -0.25}, "<=", 0.5), atom({"y": 1.0}, ">", 0.0)))
    b = Box.of(x=(0, 1), y=(-1, 1))
    assert emit_smtlib(f, b) == emit_smtlib(f, b)


def test_emit_smtlib_structure():
    script = emit_smtlib(atom({"x": 1.0}, "<=", 1.0), Box.of(x=(0, 0.5)), "forall")
    assert "(set-logic QF_LRA)" in script
    assert "(declare-const x Real)" in script
    assert "(assert (not (<= x 1.0)))" in script
    assert script.rstrip().endswith("(get-model)")


def test_emit_smtlib_vacuous_goal():
    # a goal with no disjuncts is `false`; its asserted negation is satisfiable
    script = emit_smtlib(Or(()), Box.of(x=(0, 1)), "forall")
    assert "(assert (not false))" in script


def test_emit_smtlib_exists_direct_goal():
    script = emit_smtlib(atom({"x": 1.0}, ">=", 0.5), Box.of(x=(0, 1)), "exists")
    assert "(assert (>= x" in script and "not" not in script


def test_emit_smtlib_rational_constants():
    script = emit_smtlib(atom({"x": 1.0}, "<=", 0.1), Box.of(x=(0, 1)))
    # 0.1 is not a dyadic rational: rendered exactly as a fraction
    assert "(/ " in script


# --- solver-backed (skipped when no binary) -----------------------------------


@needs_solver
def test_smt_proves_interval_gap():
    f = Or((atom({"x": 1.0}, "<=", 0.6), atom({"x": 1.0}, ">=", 0.4)))
    backend = SmtBackend(SOLVER)
    v = forall_holds(f, Box.of(x=(0, 1)), smt=backend)
    assert v.value is Outcome.PROVEN


@needs_solver
def test_smt_differential_against_interval_prover():
    rng = np.random.default_rng(7)
    backend = SmtBackend(SOLVER)
    names = ("x", "y")
    for _ in range(1000):
        f = atom({n: float(rng.normal()) for n in names},
                 [Rel.LE, Rel.GE, Rel.LT, Rel.GT][rng.integers(0, 4)], float(rng.normal()))
        vals = np.sort(rng.uniform(-1, 1, size=(2, 2)), axis=1)
        b = Box({n: Interval(*vals[i]) for i, n in enumerate(names)})
        ours = forall_holds(f, b)
        theirs = backend.check_forall(f, b)
        if ours.value is not Outcome.UNKNOWN and theirs.value is not Outcome.UNKNOWN:
            assert ours.value == theirs.value


def test_smt_backend_failure_is_unknown():
    backend = SmtBackend("definitely-not-a-solver-binary -xyz")
    v = backend.check_forall(atom({"x": 1.0}, "<=", 1.0), Box.of(x=(0, 1)))
    assert v.value is Outcome.UNKNOWN
    assert v.note and "smt" in v.note
