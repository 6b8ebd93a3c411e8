import numpy as np
import pytest

from boxplain.experiments import (
    SCRIPTS,
    ExperimentReport,
    random_question,
    run_experiment,
    synthetic_session,
)
from boxplain.predicates import QuestionType, Strength, validate_question
from boxplain.reachability import AnalysisCaps
from boxplain.session import EngineConfig


def small_config():
    return EngineConfig(n_sample=16, shell_samples=8, caps=AnalysisCaps(max_boxes=3000), force_k=2)


def test_random_questions_always_validate(line_pack):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        q = random_question(line_pack, rng)
        assert validate_question(q, line_pack) == []
        assert 1 <= len(q.content) <= 4
        assert all(1 <= len(c) <= 4 for c in q.content)


def test_random_questions_cover_all_type_strength_combos(line_pack):
    rng = np.random.default_rng(12)
    seen = set()
    for _ in range(1000):
        q = random_question(line_pack, rng)
        seen.add((q.qtype, q.strength))
    assert seen == {(t, s) for t in QuestionType for s in Strength}


def test_random_question_no_duplicate_conjuncts(line_pack):
    rng = np.random.default_rng(13)
    for _ in range(500):
        q = random_question(line_pack, rng)
        for clause in q.content:
            assert len(set(clause)) == len(clause)
        keys = [tuple(sorted(c)) for c in q.content]
        assert len(set(keys)) == len(keys)


def test_synthetic_session_shape(line_pack, line_model):
    rng = np.random.default_rng(3)
    run = None
    while run is None:
        run = synthetic_session(line_pack, line_model, SCRIPTS[0], rng, config=small_config())
    assert len(run.states) == 3
    assert len(run.rows) == 3
    assert len(run.deltas) == 2
    assert [d for d, _ in run.deltas] == ["la", "ma"]
    # parent chain is a path
    assert run.states[0].parent is None
    assert run.states[1].parent == run.states[0].id
    assert run.states[2].parent == run.states[1].id
    assert run.epsilon0 in SCRIPTS[0][1]
    for _, delta in run.deltas:
        assert "jaccard" in delta and "overlap" in delta


def test_synthetic_session_script_b_directions(line_pack, line_model):
    rng = np.random.default_rng(4)
    run = None
    while run is None:
        run = synthetic_session(line_pack, line_model, SCRIPTS[1], rng, config=small_config())
    assert [d for d, _ in run.deltas] == ["ma", "la"]
    assert run.epsilon0 in SCRIPTS[1][1]


def test_run_experiment_aggregates(line_pack, line_model):
    report = run_experiment(line_pack, line_model, runs=6, seed=99, config=small_config())
    assert report.runs_completed == 6
    assert set(report.medians) == {"la", "ma"}
    assert len(report.deltas["la"]) == 6
    assert "volume_median" in report.medians["ma"]


def test_report_csv_deterministic(line_pack, line_model):
    a = run_experiment(line_pack, line_model, runs=4, seed=5, config=small_config()).to_csv()
    b = run_experiment(line_pack, line_model, runs=4, seed=5, config=small_config()).to_csv()
    assert a == b
    assert a.splitlines()[0] == "metric,line_la,line_ma"


def test_report_table_render(line_pack, line_model):
    report = run_experiment(line_pack, line_model, runs=2, seed=7, config=small_config())
    table = report.render_table()
    assert "volume_median" in table
    assert "disjuncts" in table
