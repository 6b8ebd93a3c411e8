import numpy as np
import pytest

from boxplain.formula import Atom
from boxplain.geometry import Box, Interval, Role, Space
from boxplain.models import FeedForwardNetwork
from boxplain.predicates import DomainPack, Predicate, PredicateRole


def ge(var, c):
    return Atom.of({var: 1.0}, ">=", c)


def le(var, c):
    return Atom.of({var: 1.0}, "<=", c)


@pytest.fixture
def line_pack():
    """1-d identity system on [0, 1] with threshold predicates on both sides."""
    space = Space(
        [("x", Role.INPUT), ("out", Role.OUTPUT)],
        Box.of(x=(0, 1), out=(0, 1)),
    )
    preds = [
        Predicate("x_high", ge("x", 0.75), PredicateRole.INPUT_SPACE, "LA"),
        Predicate("x_upper_half", ge("x", 0.5), PredicateRole.INPUT_SPACE, "MA"),
        Predicate("x_low", le("x", 0.25), PredicateRole.INPUT_SPACE, "LA"),
        Predicate("out_high", ge("out", 0.75), PredicateRole.OUTPUT_SPACE, "LA"),
        Predicate("out_upper_half", ge("out", 0.5), PredicateRole.OUTPUT_SPACE, "MA"),
        Predicate("out_low", le("out", 0.25), PredicateRole.OUTPUT_SPACE, "LA"),
        Predicate(
            "tracking",
            Atom.of({"x": 1.0, "out": -1.0}, "<=", 0.1),
            PredicateRole.JOINT,
            "MA",
        ),
    ]
    return DomainPack("line", space, preds)


@pytest.fixture
def line_model():
    return FeedForwardNetwork.identity(("x",), ("out",))
