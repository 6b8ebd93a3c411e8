import math

import numpy as np
import pytest

from boxplain.geometry import Box, Interval, Role, Space, box_volume, joint_box, normalize_box


def test_interval_invariants():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    with pytest.raises(ValueError):
        Interval(0.0, math.inf)
    assert Interval(0.3, 0.3).width == 0.0


def test_box_volume_unit_square():
    assert box_volume(Box.of(x=(0, 1), y=(0, 1))) == 1.0


def test_box_volume_product():
    assert box_volume(Box.of(x=(0, 0.5), y=(0, 0.5))) == 0.25


def test_box_volume_degenerate_axis():
    assert box_volume(Box.of(x=(0.3, 0.3), y=(0, 1))) == 0.0


def test_normalize_full_range_axis():
    b = normalize_box(Box.of(x=(-1, 1)), Box.of(x=(-1, 1)))
    assert b["x"] == Interval(0.0, 1.0)


def test_normalize_identity_bounding():
    b = normalize_box(Box.of(x=(0, 0.5)), Box.of(x=(0, 1)))
    assert b["x"] == Interval(0.0, 0.5)


def test_normalize_affine_rescale():
    # direct evaluation of the affine rescale: (0 - -2)/4 = 0.5, (2 - -2)/4 = 1
    b = normalize_box(Box.of(x=(0, 2)), Box.of(x=(-2, 2)))
    assert b["x"] == Interval(0.5, 1.0)


def test_normalize_zero_width_bounding_axis_rejected():
    with pytest.raises(ValueError):
        normalize_box(Box.of(x=(0, 0)), Box.of(x=(0, 0)))


def test_normalize_idempotent_on_unit_bounding():
    rng = np.random.default_rng(7)
    unit = Box.of(x=(0, 1), y=(0, 1), z=(0, 1))
    for _ in range(50):
        vals = np.sort(rng.random((3, 2)), axis=1)
        b = Box({n: Interval(*vals[i]) for i, n in enumerate("xyz")})
        once = normalize_box(b, unit)
        assert normalize_box(once, unit) == once == b


def test_box_hash_order_sensitivity():
    a = Box.of(x=(0, 1), y=(0, 2))
    b = Box.of(x=(0, 1), y=(0, 2))
    assert a == b and hash(a) == hash(b)
    assert a != Box.of(y=(0, 2), x=(0, 1))  # variable order is part of identity


def test_joint_box():
    j = joint_box(Box.of(x=(0, 1)), Box.of(out=(2, 3)))
    assert j.names == ("x", "out")
    with pytest.raises(ValueError):
        joint_box(Box.of(x=(0, 1)), Box.of(x=(0, 1)))


def test_space_roles_and_bounding():
    space = Space(
        [("x", Role.INPUT), ("out", Role.OUTPUT)],
        Box.of(x=(-1, 1), out=(-2, 2)),
    )
    assert space.input_names == ("x",)
    assert space.output_names == ("out",)
    assert space.input_bounding == Box.of(x=(-1, 1))
    with pytest.raises(ValueError):
        Space([("x", Role.INPUT)], Box.of(y=(0, 1)))
    with pytest.raises(ValueError):
        Space([("x", Role.INPUT), ("x", Role.OUTPUT)], Box.of(x=(0, 1)))


def test_scaled_about_center():
    b = Box.of(x=(0, 1)).scaled_about_center(2.0)
    assert b["x"] == Interval(-0.5, 1.5)
