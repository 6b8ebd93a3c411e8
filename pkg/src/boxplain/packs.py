"""Built-in desk-scale domain packs: a pendulum-style controller and a CPU
usage regressor.

Both packs are self-contained stand-ins sized for fast local analysis: the
controller is a small hand-structured tanh network over the seven standard
cart/pole observation variables, and the CPU model is a degree-3 polynomial
fitted on a bundled synthetic dataset with the usual activity-log columns.
Bounding boxes use the published per-variable ranges for these domains;
predicate thresholds derive from quantiles of the model's own behavior so
every named predicate is actually reachable.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .formula import And, Atom, Or
from .geometry import Box, Interval, Role, Space
from .models import (
    FeedForwardNetwork,
    Layer,
    PolynomialModel,
    fit_polynomial,
    load_csv_columns,
    model_to_json,
    save_model,
)
from .predicates import DomainPack, Predicate, PredicateRole

IDP_VARIABLES: tuple[tuple[str, float, float], ...] = (
    ("x", -1.0, 1.0),
    ("vx", -0.8, 0.8),
    ("pole2_endpoint", -0.5, 0.5),
    ("pole1angle", -0.2, 0.2),
    ("pole1angle_rate", -0.6, 0.6),
    ("pole2angle", -0.04, 0.04),
    ("pole2angle_rate", -0.7, 0.7),
)
IDP_OUTPUTS = ("torque", "value")

CPU_INPUT_BOUNDS: tuple[tuple[str, float, float], ...] = (
    ("lread", 0.0, 0.0369),
    ("scall", 0.0095, 0.4245),
    ("sread", 0.0028, 0.0992),
    ("freemem", 0.0061, 0.6275),
    ("freeswap", 0.4324, 0.8318),
)
CPU_INPUT_COLUMNS = tuple(n for n, _, _ in CPU_INPUT_BOUNDS)
CPU_OUTPUT_COLUMNS = ("lwrite", "swrite", "usr")

CPU_DATASET_SEED = 20562
CPU_DATASET_ROWS = 2500


def _ge(var: str, c: float) -> Atom:
    return Atom.of({var: 1.0}, ">=", c)


def _le(var: str, c: float) -> Atom:
    return Atom.of({var: 1.0}, "<=", c)


def _band(var: str, lo: float, hi: float) -> And:
    return And((_ge(var, lo), _le(var, hi)))


def _r(x: float) -> float:
    return float(round(x, 4))


# --- pendulum-style controller pack -------------------------------------------


def build_idp_model() -> FeedForwardNetwork:
    """Small structured controller: 7 -> 8 tanh -> 2 tanh.

    The first hidden units encode hand-picked stabilization features (tilt
    error, cart drift, tip offset); the rest are seeded low-amplitude mixes.
    Outputs are a bounded corrective torque and a state-value estimate.
    """
    rng = np.random.default_rng(71)
    names = [n for n, _, _ in IDP_VARIABLES]
    idx = {n: i for i, n in enumerate(names)}
    w1 = rng.normal(scale=0.35, size=(8, 7))
    w1[0] = 0.0
    w1[0, idx["pole1angle"]] = 3.5
    w1[0, idx["pole1angle_rate"]] = 1.1
    w1[0, idx["pole2angle"]] = 9.0
    w1[0, idx["pole2angle_rate"]] = 0.7
    w1[1] = 0.0
    w1[1, idx["x"]] = 1.4
    w1[1, idx["vx"]] = 1.7
    w1[2] = 0.0
    w1[2, idx["pole2_endpoint"]] = 2.4
    w1[2, idx["vx"]] = 0.8
    b1 = rng.normal(scale=0.1, size=8)
    w2 = rng.normal(scale=0.25, size=(2, 8))
    w2[0, 0] = -1.7  # torque fights tilt
    w2[0, 1] = -0.9  # and cart drift
    w2[0, 2] = -0.6
    w2[1, 0] = -1.2  # value drops with tilt error
    w2[1, 1] = -0.5
    b2 = np.array([0.0, 0.35])
    return FeedForwardNetwork(
        [Layer(w1, b1, "tanh"), Layer(w2, b2, "tanh")], names, IDP_OUTPUTS
    )


def _output_quantiles(model, input_box: Box, seed: int = 13) -> dict[str, dict[float, float]]:
    rng = np.random.default_rng(seed)
    lo, hi = input_box.arrays()
    xs = rng.uniform(lo, hi, size=(4096, len(lo)))
    ys = np.atleast_2d(model.evaluate(xs))
    out: dict[str, dict[float, float]] = {}
    for j, name in enumerate(model.output_names):
        col = ys[:, j]
        out[name] = {
            q: _r(float(np.quantile(col, q)))
            for q in (0.03, 0.1, 0.25, 0.3, 0.35, 0.5, 0.65, 0.7, 0.75, 0.9, 0.97)
        }
    return out


def _signed_var_predicates(var: str, hi: float) -> list[Predicate]:
    """Layered threshold family for a symmetric variable.

    Two wide one-sided slabs form the vague (MA) layer; four quarter bands
    aligned with the dyadic refinement grid form the specific (LA) layer, so
    finer analyses can name *where* in the range a box sits instead of reusing
    one loose predicate.
    """
    IN = PredicateRole.INPUT_SPACE
    return [
        Predicate(f"{var}_positive", _ge(var, _r(0.4 * hi)), IN, "MA"),
        Predicate(f"{var}_negative", _le(var, _r(-0.4 * hi)), IN, "MA"),
        Predicate(f"{var}_near_zero", _band(var, _r(-0.15 * hi), _r(0.15 * hi)), IN, "LA"),
        Predicate(f"{var}_strongly_neg", _le(var, _r(-0.52 * hi)), IN, "LA"),
        Predicate(f"{var}_mildly_neg", _band(var, _r(-0.52 * hi), _r(-0.02 * hi)), IN, "LA"),
        Predicate(f"{var}_mildly_pos", _band(var, _r(0.02 * hi), _r(0.52 * hi)), IN, "LA"),
        Predicate(f"{var}_strongly_pos", _ge(var, _r(0.52 * hi)), IN, "LA"),
    ]


def build_idp_pack() -> tuple[DomainPack, FeedForwardNetwork]:
    model = build_idp_model()
    input_box = Box({n: Interval(lo, hi) for n, lo, hi in IDP_VARIABLES})
    output_box = model.box_image(input_box)
    variables = [(n, Role.INPUT) for n, _, _ in IDP_VARIABLES] + [
        (n, Role.OUTPUT) for n in IDP_OUTPUTS
    ]
    bounding = Box({**dict(input_box), **dict(output_box)})
    space = Space(variables, bounding)

    preds: list[Predicate] = []
    for var in ("x", "pole1angle", "pole2angle"):
        hi = dict((n, h) for n, _, h in IDP_VARIABLES)[var]
        preds.extend(_signed_var_predicates(var, hi))
    for var in ("vx", "pole2_endpoint", "pole1angle_rate", "pole2angle_rate"):
        hi = dict((n, h) for n, _, h in IDP_VARIABLES)[var]
        IN = PredicateRole.INPUT_SPACE
        preds.append(Predicate(f"{var}_positive", _ge(var, _r(0.4 * hi)), IN, "MA"))
        preds.append(Predicate(f"{var}_negative", _le(var, _r(-0.4 * hi)), IN, "MA"))
        preds.append(
            Predicate(f"{var}_near_zero", _band(var, _r(-0.15 * hi), _r(0.15 * hi)), IN, "LA")
        )

    q = _output_quantiles(model, input_box)
    OUT = PredicateRole.OUTPUT_SPACE
    preds.extend(
        [
            Predicate("pushes_right", _ge("torque", q["torque"][0.7]), OUT, "MA"),
            Predicate("pushes_left", _le("torque", q["torque"][0.3]), OUT, "MA"),
            Predicate("pushes_hard_right", _ge("torque", q["torque"][0.9]), OUT, "LA"),
            Predicate("pushes_hard_left", _le("torque", q["torque"][0.1]), OUT, "LA"),
            Predicate("torque_extreme_right", _ge("torque", q["torque"][0.97]), OUT, "LA"),
            Predicate("torque_extreme_left", _le("torque", q["torque"][0.03]), OUT, "LA"),
            Predicate(
                "coasting",
                _band("torque", q["torque"][0.35], q["torque"][0.65]),
                OUT,
                "MA",
            ),
            Predicate(
                "torque_mild_left",
                _band("torque", q["torque"][0.1], q["torque"][0.5]),
                OUT,
                "LA",
            ),
            Predicate(
                "torque_mild_right",
                _band("torque", q["torque"][0.5], q["torque"][0.9]),
                OUT,
                "LA",
            ),
            Predicate("expects_success", _ge("value", q["value"][0.75]), OUT, "MA"),
            Predicate("expects_trouble", _le("value", q["value"][0.25]), OUT, "MA"),
            Predicate("expects_failure", _le("value", q["value"][0.03]), OUT, "LA"),
            Predicate(
                "value_middling",
                _band("value", q["value"][0.25], q["value"][0.75]),
                OUT,
                "LA",
            ),
        ]
    )
    rng_q = np.random.default_rng(13)
    xs = rng_q.uniform(*input_box.arrays(), size=(4096, len(input_box)))
    ys = np.atleast_2d(model.evaluate(xs))
    for j, name in enumerate(IDP_OUTPUTS):
        col = ys[:, j]
        deciles = [_r(float(np.quantile(col, p))) for p in np.linspace(0.02, 0.98, 7)]
        for k, (blo, bhi) in enumerate(zip(deciles, deciles[1:])):
            if bhi > blo:
                preds.append(Predicate(f"{name}_level_{k}", _band(name, blo, bhi), OUT, "LA"))
    J = PredicateRole.JOINT
    preds.append(
        Predicate("countersteering", Atom.of({"x": 1.0, "torque": 1.0}, "<=", 0.25), J, "MA")
    )
    preds.append(
        Predicate(
            "braking_drift",
            And((Atom.of({"vx": 1.0, "torque": 0.6}, "<=", 0.1), _ge("vx", 0.0))),
            J,
            "LA",
        )
    )
    return DomainPack("idp", space, preds), model


# --- CPU usage pack --------------------------------------------------------------


def synthetic_cpu_rows(n: int = CPU_DATASET_ROWS, seed: int = CPU_DATASET_SEED) -> np.ndarray:
    """Synthetic activity-log rows in the min-max normalized feature space.

    Marginals are shaped so the published per-variable analysis ranges sit at
    roughly the 5%/95% quantiles; targets are smooth low-degree interactions
    with mild non-polynomial seasoning and measurement noise, so a cubic fit
    is good but not perfect.
    """
    rng = np.random.default_rng(seed)
    lread = np.clip(rng.exponential(0.0125, n), 0.0, 1.0)
    scall = np.clip(rng.exponential(0.139, n), 0.0, 1.0)
    sread = np.clip(rng.exponential(0.0325, n), 0.0, 1.0)
    freemem = np.clip(rng.exponential(0.205, n), 0.0, 1.0)
    freeswap = np.clip(rng.beta(14.0, 7.5, n), 0.0, 1.0)

    noise = lambda s: rng.normal(0.0, s, n)
    lwrite = np.clip(
        0.05
        + 0.55 * lread
        + 0.9 * lread * scall
        + 0.25 * sread
        + 0.06 * scall**2
        - 0.05 * freemem * lread
        + 0.01 * np.sin(9.0 * scall)
        + noise(0.008),
        0.0,
        1.0,
    )
    swrite = np.clip(
        0.05
        + 0.6 * sread
        + 0.7 * scall * sread
        + 0.1 * scall
        - 0.04 * freeswap * sread
        + 0.008 * np.sin(7.0 * freemem)
        + noise(0.008),
        0.0,
        1.0,
    )
    usr = np.clip(
        0.88
        - 0.55 * scall
        - 0.35 * lread
        - 0.3 * sread
        - 0.18 * scall * (1.0 - freeswap)
        - 0.06 * freemem**2
        + 0.25 * scall**2
        + 0.01 * np.sin(8.0 * sread)
        + noise(0.01),
        0.0,
        1.0,
    )
    return np.column_stack([lread, scall, sread, freemem, freeswap, lwrite, swrite, usr])


def write_cpu_csv(path, n: int = CPU_DATASET_ROWS, seed: int = CPU_DATASET_SEED) -> None:
    rows = synthetic_cpu_rows(n, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*CPU_INPUT_COLUMNS, *CPU_OUTPUT_COLUMNS])
        for row in rows:
            writer.writerow([f"{v:.6f}" for v in row])


def shipped_cpu_csv_path() -> Path:
    return Path(str(resources.files("boxplain").joinpath("data/cpu_usage.csv")))


def build_cpu_model(rows: np.ndarray | None = None) -> PolynomialModel:
    """Degree-3 polynomial over the normalized feature space."""
    if rows is None:
        rows = synthetic_cpu_rows()
    X, Y = rows[:, :5], rows[:, 5:]
    return fit_polynomial(X, Y, 3, CPU_INPUT_COLUMNS, CPU_OUTPUT_COLUMNS, normalize=False)


def build_cpu_pack() -> tuple[DomainPack, PolynomialModel]:
    rows = synthetic_cpu_rows()
    model = build_cpu_model(rows)
    input_box = Box({n: Interval(lo, hi) for n, lo, hi in CPU_INPUT_BOUNDS})
    output_box = model.box_image(input_box)
    variables = [(n, Role.INPUT) for n in CPU_INPUT_COLUMNS] + [
        (n, Role.OUTPUT) for n in CPU_OUTPUT_COLUMNS
    ]
    bounding = Box({**dict(input_box), **dict(output_box)})
    space = Space(variables, bounding)

    IN = PredicateRole.INPUT_SPACE
    preds: list[Predicate] = []
    for name, lo, hi in CPU_INPUT_BOUNDS:
        w = hi - lo
        quarters = [_r(lo + f * w) for f in (0.0, 0.24, 0.505, 0.755, 1.0)]
        preds.append(Predicate(f"{name}_raised", _ge(name, _r(lo + 0.55 * w)), IN, "MA"))
        preds.append(Predicate(f"{name}_reduced", _le(name, _r(lo + 0.45 * w)), IN, "MA"))
        preds.append(Predicate(f"{name}_very_low", _le(name, quarters[1]), IN, "LA"))
        preds.append(Predicate(f"{name}_low_band", _band(name, quarters[1], quarters[2]), IN, "LA"))
        preds.append(Predicate(f"{name}_high_band", _band(name, quarters[2], quarters[3]), IN, "LA"))
        preds.append(Predicate(f"{name}_very_high", _ge(name, quarters[3]), IN, "LA"))
        # a finer layer of narrow slices on the refinement grid, so only
        # genuinely fine analyses can commit to them
        for k in range(8):
            s_lo = _r(lo + 0.125 * k * w)
            s_hi = _r(lo + 0.125 * (k + 1) * w)
            preds.append(Predicate(f"{name}_slice_{k}", _band(name, s_lo, s_hi), IN, "LA"))

    # output thresholds from predictions over in-range dataset rows
    in_lo = np.array([lo for _, lo, _ in CPU_INPUT_BOUNDS])
    in_hi = np.array([hi for _, _, hi in CPU_INPUT_BOUNDS])
    mask = np.all((rows[:, :5] >= in_lo) & (rows[:, :5] <= in_hi), axis=1)
    preds_y = np.atleast_2d(model.evaluate(rows[mask, :5]))
    OUT = PredicateRole.OUTPUT_SPACE
    for j, name in enumerate(CPU_OUTPUT_COLUMNS):
        col = preds_y[:, j]
        q = {p: _r(float(np.quantile(col, p))) for p in (0.1, 0.4, 0.6, 0.9)}
        preds.append(Predicate(f"{name}_elevated", _ge(name, q[0.6]), OUT, "MA"))
        preds.append(Predicate(f"{name}_depressed", _le(name, q[0.4]), OUT, "MA"))
        preds.append(Predicate(f"{name}_spiking", _ge(name, q[0.9]), OUT, "LA"))
        preds.append(Predicate(f"{name}_idle", _le(name, q[0.1]), OUT, "LA"))
        preds.append(Predicate(f"{name}_typical", _band(name, q[0.4], q[0.6]), OUT, "LA"))
        # decile slices over the behavior range give fine analyses something
        # specific to commit to
        deciles = [_r(float(np.quantile(col, p))) for p in np.linspace(0.02, 0.98, 7)]
        for k, (blo, bhi) in enumerate(zip(deciles, deciles[1:])):
            if bhi > blo:
                preds.append(Predicate(f"{name}_level_{k}", _band(name, blo, bhi), OUT, "LA"))
    J = PredicateRole.JOINT
    preds.append(
        Predicate(
            "write_tracks_read",
            Atom.of({"lwrite": 1.0, "lread": -1.0}, "<=", 0.15),
            J,
            "MA",
        )
    )
    return DomainPack("cpu", space, preds), model


# --- registry / files --------------------------------------------------------------


def builtin_packs() -> dict[str, tuple[DomainPack, object]]:
    return {"idp": build_idp_pack(), "cpu": build_cpu_pack()}


def write_pack_files(outdir) -> list[Path]:
    """Materialize both packs, their models, label sidecars, and the dataset."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (pack, model) in builtin_packs().items():
        labels = {p.name: p.label for p in pack.ordered() if p.label}
        stripped = DomainPack(
            pack.name, pack.space, [Predicate(p.name, p.formula, p.role) for p in pack.ordered()]
        )
        pack_path = outdir / f"{name}_pack.json"
        stripped.save(pack_path)
        labels_path = outdir / f"{name}_labels.json"
        with open(labels_path, "w", encoding="utf-8") as fh:
            json.dump(labels, fh, indent=2, sort_keys=True)
            fh.write("\n")
        model_path = outdir / f"{name}_model.json"
        save_model(model, model_path)
        written += [pack_path, labels_path, model_path]
    csv_path = outdir / "cpu_usage.csv"
    write_cpu_csv(csv_path)
    written.append(csv_path)
    return written
