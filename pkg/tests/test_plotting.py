import numpy as np
import pytest

from boxplain.geometry import Box
from boxplain.plotting import reach_density_grid, write_pgm


def test_grid_pixel_sums_match_projected_volumes():
    # oracle: sum(grid) * cell_area == sum over boxes of hidden-axis weight
    # times normalized projected area
    bounding = Box.of(x=(0, 2), y=(0, 4), z=(0, 10))
    boxes = [
        Box.of(x=(0, 1), y=(0, 2), z=(0, 5)),      # weight 0.5, area 0.25
        Box.of(x=(1, 2), y=(2, 4), z=(0, 10)),     # weight 1.0, area 0.25
        Box.of(x=(0.5, 1.5), y=(1, 3), z=(2, 4)),  # weight 0.2, area 0.25
    ]
    res = 64
    grid = reach_density_grid(boxes, bounding, "x", "y", res)
    total = grid.sum() / (res * res)
    expected = 0.5 * 0.25 + 1.0 * 0.25 + 0.2 * 0.25
    assert total == pytest.approx(expected, abs=1e-9)


def test_grid_two_dim_weight_is_one():
    bounding = Box.of(x=(0, 1), y=(0, 1))
    grid = reach_density_grid([Box.of(x=(0, 0.5), y=(0, 0.5))], bounding, "x", "y", 8)
    assert grid.sum() / 64 == pytest.approx(0.25)
    # density concentrated in the lower-left quadrant
    assert grid[:4, :4].min() == pytest.approx(1.0)
    assert grid[4:, 4:].max() == 0.0


def test_grid_rejects_bad_axes():
    bounding = Box.of(x=(0, 1), y=(0, 1))
    with pytest.raises(ValueError):
        reach_density_grid([], bounding, "x", "x")
    with pytest.raises(KeyError):
        reach_density_grid([], bounding, "x", "nope")


def test_write_pgm(tmp_path):
    grid = np.array([[0.0, 1.0], [2.0, 4.0]])
    path = tmp_path / "img.pgm"
    write_pgm(grid, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    pixels = data.split(b"255\n", 1)[1]
    # top row of the file is the top of the image (grid row 1): values 2, 4
    # (np.round half-to-even: 127.5 -> 128)
    assert list(pixels) == [128, 0, 255, 191]


def test_write_pgm_empty_grid_is_white(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(np.zeros((4, 4)), path)
    pixels = path.read_bytes().split(b"255\n", 1)[1]
    assert set(pixels) == {255}
