"""Learned systems: exact point evaluation and sound box-image over-approximation.

Two model families are supported: feed-forward networks with non-decreasing
activations, and polynomial regressors over a graded-lexicographic monomial
basis.  Both expose the same contract: ``evaluate`` (exact, pointwise) and
``box_image`` (an axis-aligned box guaranteed to contain the image of every
point of the input box).

Soundness in floating point: every unit/monomial interval is widened outward
by one ulp after each rounding-prone step, so sampled evaluations can never
escape the computed box.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import product as _cartesian
from typing import Callable, Protocol, Sequence

import numpy as np

from .geometry import Box, Interval


class FitError(ValueError):
    """Raised when the least-squares system is rank deficient."""


def _out_lo(a: np.ndarray | float) -> np.ndarray | float:
    return np.nextafter(a, -np.inf)


def _out_hi(a: np.ndarray | float) -> np.ndarray | float:
    return np.nextafter(a, np.inf)


ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda z: z,
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "sigmoid": lambda z: 1.0 / (1.0 + np.exp(-z)),
}

#: activations whose float evaluation is not exact and needs outward rounding
_INEXACT = frozenset({"tanh", "sigmoid"})


class LearnedSystem(Protocol):
    input_names: tuple[str, ...]
    output_names: tuple[str, ...]

    def evaluate(self, x: np.ndarray) -> np.ndarray: ...

    def box_image(self, b: Box) -> Box: ...

    def box_image_arrays(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


# --- feed-forward networks ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("bias/weight row mismatch")


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Coordinatewise order-preserving output transform: scale, shift, clip.

    Scales must be non-negative, otherwise the map would reverse orderings.
    """

    scale: np.ndarray | None = None
    offset: np.ndarray | None = None
    clip_lo: np.ndarray | None = None
    clip_hi: np.ndarray | None = None

    def __post_init__(self):
        if self.scale is not None and np.any(np.asarray(self.scale) < 0):
            raise ValueError("monotone map requires non-negative scales")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = np.asarray(y, dtype=float)
        if self.scale is not None:
            out = out * self.scale
        if self.offset is not None:
            out = out + self.offset
        if self.clip_lo is not None:
            out = np.maximum(out, self.clip_lo)
        if self.clip_hi is not None:
            out = np.minimum(out, self.clip_hi)
        return out


def monotone_postprocess_box(f: Callable[[np.ndarray], np.ndarray], b: Box) -> Box:
    """Image box of a coordinatewise order-preserving map: span of the two corners."""
    lo, hi = b.arrays()
    flo = np.asarray(f(lo), dtype=float)
    fhi = np.asarray(f(hi), dtype=float)
    return Box({n: Interval(float(l), float(h)) for n, l, h in zip(b.names, flo, fhi)})


def unit_box_image(w: np.ndarray, beta: float, activation: str, b: Box) -> Interval:
    """Image interval of one unit rho(<w, x> + beta) over a box.

    The linear extremes occur at the vertex picked per coefficient sign; a
    non-decreasing activation attains its extremes at the same vertices.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (len(b),):
        raise ValueError(f"weight dim {w.shape} != box dim {len(b)}")
    lo, hi = b.arrays()
    rho = ACTIVATIONS[activation]
    zmin = float(np.dot(np.maximum(w, 0.0), lo) + np.dot(np.minimum(w, 0.0), hi) + beta)
    zmax = float(np.dot(np.maximum(w, 0.0), hi) + np.dot(np.minimum(w, 0.0), lo) + beta)
    vmin, vmax = float(rho(np.float64(zmin))), float(rho(np.float64(zmax)))
    if activation in _INEXACT:
        vmin, vmax = float(_out_lo(vmin)), float(_out_hi(vmax))
    return Interval(vmin, vmax)


class FeedForwardNetwork:
    """MLP with non-decreasing activations and an optional monotone postprocess."""

    def __init__(
        self,
        layers: Sequence[Layer],
        input_names: Sequence[str],
        output_names: Sequence[str],
        postprocess: MonotoneMap | None = None,
    ):
        if not layers:
            raise ValueError("network needs at least one layer")
        dim = len(input_names)
        for i, layer in enumerate(layers):
            if layer.weights.shape[1] != dim:
                raise ValueError(f"layer {i} expects {layer.weights.shape[1]} inputs, got {dim}")
            dim = layer.weights.shape[0]
        if dim != len(output_names):
            raise ValueError(f"final layer width {dim} != {len(output_names)} outputs")
        self.layers = tuple(layers)
        self.input_names = tuple(input_names)
        self.output_names = tuple(output_names)
        self.postprocess = postprocess

    @classmethod
    def identity(cls, input_names: Sequence[str], output_names: Sequence[str]) -> "FeedForwardNetwork":
        n = len(input_names)
        if len(output_names) != n:
            raise ValueError("identity network needs matching dims")
        return cls([Layer(np.eye(n), np.zeros(n), "identity")], input_names, output_names)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        z = np.asarray(x, dtype=float)
        for layer in self.layers:
            z = ACTIVATIONS[layer.activation](z @ layer.weights.T + layer.bias)
        if self.postprocess is not None:
            z = self.postprocess(z)
        return z

    def box_image_arrays(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized image bounds for a batch of boxes (rows)."""
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        for layer in self.layers:
            wp = np.maximum(layer.weights, 0.0)
            wn = np.minimum(layer.weights, 0.0)
            zlo = lo @ wp.T + hi @ wn.T + layer.bias
            zhi = hi @ wp.T + lo @ wn.T + layer.bias
            rho = ACTIVATIONS[layer.activation]
            lo, hi = rho(zlo), rho(zhi)
            if layer.activation in _INEXACT:
                lo, hi = _out_lo(lo), _out_hi(hi)
        if self.postprocess is not None:
            lo = self.postprocess(lo)
            hi = self.postprocess(hi)
        return lo, hi

    def box_image(self, b: Box) -> Box:
        if set(b.names) != set(self.input_names):
            raise ValueError(f"box variables {b.names} != network inputs {self.input_names}")
        lo, hi = b.arrays(self.input_names)
        olo, ohi = self.box_image_arrays(lo, hi)
        return Box(
            {n: Interval(float(l), float(h)) for n, l, h in zip(self.output_names, olo[0], ohi[0])}
        )


def network_box_image(net: FeedForwardNetwork, b: Box) -> Box:
    return net.box_image(b)


# --- polynomial models -------------------------------------------------------


def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """All exponent tuples with total degree <= `degree`, in graded-lex order.

    Within a total degree, tuples are ordered lexicographically descending, so
    for dim=2, degree=2: 1; x0, x1; x0^2, x0*x1, x1^2.
    """
    rows: list[tuple[int, ...]] = []
    for total in range(degree + 1):
        level = [e for e in _cartesian(range(total + 1), repeat=dim) if sum(e) == total]
        rows.extend(sorted(level, reverse=True))
    return np.array(rows, dtype=int)


def _pow_interval(lo: np.ndarray, hi: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise tight interval power: even powers account for 0-crossings."""
    if n == 1:
        return lo, hi
    plo, phi = lo**n, hi**n
    if n % 2 == 1:
        return _out_lo(plo), _out_hi(phi)
    pmin = np.minimum(plo, phi)
    pmax = np.maximum(plo, phi)
    crosses = (lo <= 0.0) & (hi >= 0.0)
    pmin = np.where(crosses, 0.0, pmin)
    return _out_lo(pmin), _out_hi(pmax)


def _mul_interval(alo, ahi, blo, bhi) -> tuple[np.ndarray, np.ndarray]:
    """Standard 4-product interval multiplication, outward rounded."""
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _out_lo(lo), _out_hi(hi)


class PolynomialModel:
    """Multi-output polynomial over a fixed monomial basis.

    ``normalization`` holds per-variable (min, max) applied before
    featurization; None means inputs are used as-is.
    """

    def __init__(
        self,
        degree: int,
        coefficients: np.ndarray,  # (n_outputs, n_monomials)
        input_names: Sequence[str],
        output_names: Sequence[str],
        normalization: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = degree
        self.input_names = tuple(input_names)
        self.output_names = tuple(output_names)
        self.exponents = monomial_exponents(len(self.input_names), degree)
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (len(self.output_names), len(self.exponents)):
            raise ValueError(
                f"coefficient shape {coefficients.shape} != "
                f"({len(self.output_names)}, {len(self.exponents)})"
            )
        self.coefficients = coefficients
        if normalization is not None:
            nmin = np.asarray(normalization[0], dtype=float)
            nmax = np.asarray(normalization[1], dtype=float)
            if np.any(nmin >= nmax):
                raise ValueError("normalization requires min < max per variable")
            normalization = (nmin, nmax)
        self.normalization = normalization

    def _normalize(self, x: np.ndarray) -> np.ndarray:
        if self.normalization is None:
            return x
        nmin, nmax = self.normalization
        return (x - nmin) / (nmax - nmin)

    def features(self, x: np.ndarray) -> np.ndarray:
        z = self._normalize(np.atleast_2d(np.asarray(x, dtype=float)))
        # per-axis power tables, then one gathered product per axis: avoids
        # materializing an (n, monomials, dims) intermediate
        n = z.shape[0]
        out = np.ones((n, len(self.exponents)))
        powers = np.ones((self.degree + 1, n, z.shape[1]))
        for k in range(1, self.degree + 1):
            powers[k] = powers[k - 1] * z
        for axis in range(z.shape[1]):
            exps = self.exponents[:, axis]
            active = exps > 0
            if active.any():
                out[:, active] *= powers[exps[active], :, axis].T
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        y = self.features(x) @ self.coefficients.T
        return y[0] if single else y

    def box_image_arrays(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        if self.normalization is not None:
            nmin, nmax = self.normalization
            span = nmax - nmin
            lo = (lo - nmin) / span
            hi = (hi - nmin) / span
            lo, hi = _out_lo(lo), _out_hi(hi)
        n = lo.shape[0]
        # power tables per axis: powers[k] = (lo**k, hi**k) tight intervals
        powers: list[tuple[np.ndarray, np.ndarray]] = [
            (np.ones_like(lo), np.ones_like(hi)),
            (lo, hi),
        ]
        for k in range(2, self.degree + 1):
            powers.append(_pow_interval(lo, hi, k))
        mlo = np.empty((n, len(self.exponents)))
        mhi = np.empty((n, len(self.exponents)))
        for j, exps in enumerate(self.exponents):
            cur_lo = np.ones(n)
            cur_hi = np.ones(n)
            for axis, e in enumerate(exps):
                if e == 0:
                    continue
                plo, phi = powers[e][0][:, axis], powers[e][1][:, axis]
                cur_lo, cur_hi = _mul_interval(cur_lo, cur_hi, plo, phi)
            mlo[:, j] = cur_lo
            mhi[:, j] = cur_hi
        c = self.coefficients  # (o, m)
        cpos, cneg = np.maximum(c, 0.0), np.minimum(c, 0.0)
        ylo = mlo @ cpos.T + mhi @ cneg.T
        yhi = mhi @ cpos.T + mlo @ cneg.T
        # summation slack: m float additions per output
        slack = len(self.exponents) * np.finfo(float).eps * np.maximum(
            np.maximum(np.abs(ylo), np.abs(yhi)), 1.0
        )
        return ylo - slack, yhi + slack

    def box_image(self, b: Box) -> Box:
        lo, hi = b.arrays(self.input_names)
        olo, ohi = self.box_image_arrays(lo, hi)
        return Box(
            {n: Interval(float(l), float(h)) for n, l, h in zip(self.output_names, olo[0], ohi[0])}
        )


def poly_box_image(m: PolynomialModel, b: Box) -> Box:
    return m.box_image(b)


def fit_polynomial(
    inputs: np.ndarray,
    outputs: np.ndarray,
    degree: int,
    input_names: Sequence[str],
    output_names: Sequence[str],
    normalize: bool = True,
) -> PolynomialModel:
    """Least-squares polynomial fit via the normal equations.

    Inputs are min-max normalized to [0, 1] (per the training rows) before
    featurization when `normalize` is set.  Raises FitError when the design
    matrix is rank deficient or there are fewer rows than basis monomials.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.atleast_2d(np.asarray(outputs, dtype=float))
    if Y.shape[0] != X.shape[0]:
        Y = Y.T
    exps = monomial_exponents(X.shape[1], degree)
    if X.shape[0] < len(exps):
        raise FitError(f"need at least {len(exps)} rows for degree {degree}, got {X.shape[0]}")
    normalization = None
    if normalize:
        nmin, nmax = X.min(axis=0), X.max(axis=0)
        if np.any(nmin >= nmax):
            raise FitError("constant input column cannot be min-max normalized")
        normalization = (nmin, nmax)
        X = (X - nmin) / (nmax - nmin)
    F = np.prod(X[:, None, :] ** exps[None, :, :], axis=2)
    G = F.T @ F
    if np.linalg.matrix_rank(G) < G.shape[0]:
        raise FitError("rank-deficient design matrix")
    beta = np.linalg.solve(G, F.T @ Y)  # (m, n_outputs)
    return PolynomialModel(degree, beta.T, input_names, output_names, normalization)


def r_squared(model: PolynomialModel, inputs: np.ndarray, outputs: np.ndarray) -> float:
    """Pooled coefficient of determination across all output columns."""
    Y = np.atleast_2d(np.asarray(outputs, dtype=float))
    if Y.shape[0] != np.asarray(inputs).shape[0]:
        Y = Y.T
    pred = np.atleast_2d(model.evaluate(np.asarray(inputs, dtype=float)))
    ss_res = float(np.sum((Y - pred) ** 2))
    ss_tot = float(np.sum((Y - Y.mean(axis=0)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


# --- file formats ------------------------------------------------------------


def load_csv_columns(
    path, input_names: Sequence[str], output_names: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    """Read (inputs, outputs) from a headed CSV of decimal floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in (*input_names, *output_names) if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"CSV missing columns: {missing}")
        xs, ys = [], []
        for row in reader:
            xs.append([float(row[c]) for c in input_names])
            ys.append([float(row[c]) for c in output_names])
    return np.array(xs, dtype=float), np.array(ys, dtype=float)


def model_to_json(model) -> dict:
    if isinstance(model, FeedForwardNetwork):
        data: dict = {
            "v": 1,
            "kind": "ffnn",
            "inputs": list(model.input_names),
            "outputs": list(model.output_names),
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation,
                }
                for layer in model.layers
            ],
        }
        if model.postprocess is not None:
            pp = model.postprocess
            data["postprocess"] = {
                k: (None if v is None else np.asarray(v).tolist())
                for k, v in (
                    ("scale", pp.scale),
                    ("offset", pp.offset),
                    ("clip_lo", pp.clip_lo),
                    ("clip_hi", pp.clip_hi),
                )
            }
        return data
    if isinstance(model, PolynomialModel):
        return {
            "v": 1,
            "kind": "polynomial",
            "inputs": list(model.input_names),
            "outputs": list(model.output_names),
            "degree": model.degree,
            "basis": "grlex",
            "normalization": None
            if model.normalization is None
            else {"min": model.normalization[0].tolist(), "max": model.normalization[1].tolist()},
            "coefficients": model.coefficients.tolist(),
        }
    raise TypeError(f"unsupported model type {type(model)!r}")


def model_from_json(data: dict):
    kind = data.get("kind")
    if kind == "ffnn":
        layers = [
            Layer(
                np.array(l["weights"], dtype=float),
                np.array(l["bias"], dtype=float),
                l["activation"],
            )
            for l in data["layers"]
        ]
        post = None
        if data.get("postprocess"):
            pp = data["postprocess"]
            arr = lambda k: None if pp.get(k) is None else np.array(pp[k], dtype=float)
            post = MonotoneMap(arr("scale"), arr("offset"), arr("clip_lo"), arr("clip_hi"))
        return FeedForwardNetwork(layers, data["inputs"], data["outputs"], post)
    if kind == "polynomial":
        norm = data.get("normalization")
        normalization = None
        if norm is not None:
            normalization = (np.array(norm["min"], dtype=float), np.array(norm["max"], dtype=float))
        return PolynomialModel(
            data["degree"],
            np.array(data["coefficients"], dtype=float),
            data["inputs"],
            data["outputs"],
            normalization,
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
