import itertools
import math

import numpy as np
import pytest

from boxplain.geometry import Box, Interval
from boxplain.models import (
    FeedForwardNetwork,
    FitError,
    Layer,
    MonotoneMap,
    PolynomialModel,
    fit_polynomial,
    load_csv_columns,
    load_model,
    model_from_json,
    model_to_json,
    monomial_exponents,
    monotone_postprocess_box,
    network_box_image,
    poly_box_image,
    r_squared,
    save_model,
    unit_box_image,
)


def random_network(rng, in_dim, out_dim, hidden=(4,), activation="tanh"):
    dims = (in_dim, *hidden, out_dim)
    layers = []
    for i in range(len(dims) - 1):
        act = activation if i < len(dims) - 2 else "identity"
        layers.append(
            Layer(rng.normal(size=(dims[i + 1], dims[i])), rng.normal(size=dims[i + 1]), act)
        )
    names_in = tuple(f"x{i}" for i in range(in_dim))
    names_out = tuple(f"y{i}" for i in range(out_dim))
    return FeedForwardNetwork(layers, names_in, names_out)


def random_box(rng, names, lo=-2.0, hi=2.0):
    vals = np.sort(rng.uniform(lo, hi, size=(len(names), 2)), axis=1)
    return Box({n: Interval(*vals[i]) for i, n in enumerate(names)})


# --- unit image --------------------------------------------------------------


def test_unit_box_image_vertex_oracle():
    # expected bounds derived by enumerating all four vertices of the box
    w, beta = np.array([2.0, -1.0]), 0.0
    b = Box.of(x=(0, 1), y=(0, 2))
    vertex_vals = [
        max(0.0, 2.0 * vx - vy) for vx, vy in itertools.product([0, 1], [0, 2])
    ]
    iv = unit_box_image(w, beta, "relu", b)
    assert iv.lo == min(vertex_vals) == 0.0
    assert iv.hi == max(vertex_vals) == 2.0


def test_unit_box_image_constant_unit():
    iv = unit_box_image(np.zeros(2), 0.7, "tanh", Box.of(x=(-5, 5), y=(0, 1)))
    assert iv.width <= 1e-12
    # the contract covers the model's own evaluation path (np.tanh)
    assert iv.contains(float(np.tanh(0.7)))


def test_unit_box_image_identity_case():
    assert unit_box_image(np.array([1.0]), 0.0, "identity", Box.of(x=(-3, 5))) == Interval(-3, 5)


def test_unit_box_image_dim_mismatch():
    with pytest.raises(ValueError):
        unit_box_image(np.array([1.0, 2.0]), 0.0, "relu", Box.of(x=(0, 1)))


# --- network image -----------------------------------------------------------


def test_identity_layer_image_is_input_box():
    net = FeedForwardNetwork.identity(("x", "y"), ("ox", "oy"))
    b = Box.of(x=(-0.25, 0.5), y=(0.125, 1.0))
    out = network_box_image(net, b)
    assert out == Box.of(ox=(-0.25, 0.5), oy=(0.125, 1.0))


def test_relu_dead_region_collapses_to_zero():
    # pre-activation <= 0 everywhere: vertex enumeration gives [0, 0] exactly
    net = FeedForwardNetwork([Layer(np.array([[1.0]]), np.array([-10.0]), "relu")], ("x",), ("y",))
    assert network_box_image(net, Box.of(x=(0, 1))) == Box.of(y=(0, 0))


def test_network_monte_carlo_containment():
    rng = np.random.default_rng(42)
    net = random_network(rng, 3, 2, hidden=(5, 4))
    b = random_box(rng, net.input_names)
    out = network_box_image(net, b)
    lo, hi = b.arrays(net.input_names)
    xs = rng.uniform(lo, hi, size=(1000, 3))
    ys = net.evaluate(xs)
    olo, ohi = out.arrays(net.output_names)
    assert np.all(ys >= olo) and np.all(ys <= ohi)


def test_network_monotone_shrink():
    rng = np.random.default_rng(3)
    net = random_network(rng, 2, 2, hidden=(4,), activation="sigmoid")
    for _ in range(50):
        outer = random_box(rng, net.input_names)
        inner = Box(
            {
                n: Interval(
                    iv.lo + 0.25 * iv.width,
                    iv.hi - 0.25 * iv.width,
                )
                for n, iv in outer
            }
        )
        big = network_box_image(net, outer)
        small = network_box_image(net, inner)
        assert big.contains_box(small)


def test_degenerate_box_is_exact_evaluation():
    rng = np.random.default_rng(11)
    net = random_network(rng, 3, 2, hidden=(6,), activation="tanh")
    x = rng.uniform(-1, 1, size=3)
    pb = Box({n: Interval(float(v), float(v)) for n, v in zip(net.input_names, x)})
    out = network_box_image(net, pb)
    y = net.evaluate(x)
    for name, val in zip(net.output_names, y):
        iv = out[name]
        assert iv.width <= 1e-12
        assert abs(iv.center - val) <= 1e-12


def test_postprocess_clip():
    clip = MonotoneMap(clip_lo=np.array([-1.0]), clip_hi=np.array([1.0]))
    assert monotone_postprocess_box(clip, Box.of(y=(-2, 0.5))) == Box.of(y=(-1, 0.5))


def test_postprocess_identity():
    b = Box.of(y=(-2, 0.5))
    assert monotone_postprocess_box(lambda v: v, b) == b


def test_postprocess_scale_then_clip():
    f = MonotoneMap(scale=np.array([2.0]), clip_lo=np.array([-1.0]), clip_hi=np.array([1.0]))
    assert monotone_postprocess_box(f, Box.of(y=(0.2, 0.9))) == Box.of(y=(0.4, 1.0))


def test_negative_scale_rejected():
    with pytest.raises(ValueError):
        MonotoneMap(scale=np.array([-1.0]))


# --- polynomial --------------------------------------------------------------


def test_monomial_order_graded_lex():
    exps = monomial_exponents(2, 2)
    assert [tuple(e) for e in exps] == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_affine_polynomial_image_is_tight():
    # m(x) = 2x + 1 on basis [1, x]
    m = PolynomialModel(1, np.array([[1.0, 2.0]]), ("x",), ("y",))
    out = poly_box_image(m, Box.of(x=(0, 1)))
    assert abs(out["y"].lo - 1.0) <= 1e-12 and abs(out["y"].hi - 3.0) <= 1e-12


def test_square_even_power_rule():
    # m(x) = x^2 on [-1, 1]: tight even-power rule gives [0, 1]
    m = PolynomialModel(2, np.array([[0.0, 0.0, 1.0]]), ("x",), ("y",))
    out = poly_box_image(m, Box.of(x=(-1, 1)))
    assert abs(out["y"].lo) <= 1e-12 and abs(out["y"].hi - 1.0) <= 1e-12


def test_polynomial_monte_carlo_containment():
    rng = np.random.default_rng(7)
    m = PolynomialModel(
        3,
        rng.normal(size=(2, len(monomial_exponents(3, 3)))),
        ("a", "b", "c"),
        ("u", "v"),
    )
    box = random_box(rng, m.input_names, -1.5, 1.5)
    out = poly_box_image(m, box)
    lo, hi = box.arrays(m.input_names)
    xs = rng.uniform(lo, hi, size=(1000, 3))
    ys = m.evaluate(xs)
    olo, ohi = out.arrays(m.output_names)
    assert np.all(ys >= olo) and np.all(ys <= ohi)


def test_polynomial_degenerate_box_exact():
    rng = np.random.default_rng(8)
    m = PolynomialModel(
        3, rng.normal(size=(1, len(monomial_exponents(2, 3)))), ("a", "b"), ("u",)
    )
    x = rng.uniform(-1, 1, size=2)
    pb = Box({n: Interval(float(v), float(v)) for n, v in zip(m.input_names, x)})
    out = poly_box_image(m, pb)
    y = float(m.evaluate(x)[0])
    assert out["u"].width <= 1e-12
    assert abs(out["u"].center - y) <= 1e-12


def test_fit_recovers_affine_coefficients():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, size=(50, 1))
    y = 2.0 * x + 1.0
    m = fit_polynomial(x, y, 1, ("x",), ("y",), normalize=False)
    assert abs(m.coefficients[0, 0] - 1.0) < 1e-9  # constant
    assert abs(m.coefficients[0, 1] - 2.0) < 1e-9  # slope


def test_fit_constant_data():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, size=(30, 2))
    y = np.full((30, 1), 5.0)
    m = fit_polynomial(x, y, 1, ("a", "b"), ("y",), normalize=False)
    assert abs(m.coefficients[0, 0] - 5.0) < 1e-9
    assert np.all(np.abs(m.coefficients[0, 1:]) < 1e-9)


def test_fit_rank_deficiency():
    x = np.ones((40, 2)) * 0.5
    y = np.zeros((40, 1))
    with pytest.raises(FitError):
        fit_polynomial(x, y, 2, ("a", "b"), ("y",), normalize=False)


def test_fit_too_few_rows():
    with pytest.raises(FitError):
        fit_polynomial(np.zeros((3, 2)), np.zeros((3, 1)), 2, ("a", "b"), ("y",))


def test_r_squared_perfect_fit():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, size=(100, 2))
    y = (x[:, 0] ** 2 - 0.5 * x[:, 1] + 0.25)[:, None]
    m = fit_polynomial(x, y, 2, ("a", "b"), ("y",))
    assert r_squared(m, x, y) > 1 - 1e-9


# --- files -------------------------------------------------------------------


def test_network_json_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    net = random_network(rng, 2, 2, hidden=(3,))
    net = FeedForwardNetwork(
        net.layers,
        net.input_names,
        net.output_names,
        MonotoneMap(scale=np.array([1.0, 2.0]), clip_lo=np.array([-1.0, -1.0]), clip_hi=np.array([1.0, 1.0])),
    )
    path = tmp_path / "net.json"
    save_model(net, path)
    loaded = load_model(path)
    x = rng.uniform(-1, 1, size=2)
    assert np.allclose(loaded.evaluate(x), net.evaluate(x), atol=0, rtol=0)
    b = random_box(rng, net.input_names)
    assert loaded.box_image(b) == net.box_image(b)


def test_polynomial_json_roundtrip():
    rng = np.random.default_rng(10)
    m = PolynomialModel(
        2,
        rng.normal(size=(1, len(monomial_exponents(2, 2)))),
        ("a", "b"),
        ("u",),
        (np.array([0.0, -1.0]), np.array([1.0, 1.0])),
    )
    loaded = model_from_json(model_to_json(m))
    x = rng.uniform(0, 1, size=(5, 2))
    assert np.allclose(loaded.evaluate(x), m.evaluate(x), atol=0, rtol=0)


def test_csv_ingestion(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b,y\n1.0,2.0,3.5\n4.0,5.0,6.25\n")
    X, Y = load_csv_columns(path, ("a", "b"), ("y",))
    assert X.tolist() == [[1.0, 2.0], [4.0, 5.0]]
    assert Y.tolist() == [[3.5], [6.25]]
    with pytest.raises(ValueError):
        load_csv_columns(path, ("a", "missing"), ("y",))
