"""Sound universal checks of formulas over boxes.

``forall_holds`` layers three mechanisms: the exact three-valued interval
prover (cheap, decides affine atoms exactly), deterministic counterexample
candidates at the atoms' extreme vertices, and uniform random sampling.  An
optional external SMT-LIB solver closes the gap the Kleene connectives leave
open.  Unknown is always a legal answer; callers treat it conservatively.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .formula import Atom, Formula, Not, TriBool, eval_point, negate, three_valued_eval
from .geometry import Box


class Outcome(Enum):
    PROVEN = "proven"
    REFUTED = "refuted"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    value: Outcome
    witness: dict[str, float] | None = None
    note: str | None = None

    def __bool__(self) -> bool:
        return self.value is Outcome.PROVEN


def sample_box(b: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points in the box, rows ordered as drawn, columns in box order."""
    lo, hi = b.arrays()
    return rng.uniform(lo, hi, size=(n, len(b)))


def sample_feasibility(
    f: Formula, b: Box, n: int, rng: np.random.Generator
) -> dict[str, float] | None:
    """First of n uniform samples satisfying f, or None."""
    if n < 1:
        raise ValueError("need at least one sample")
    pts = sample_box(b, n, rng)
    names = b.names
    for row in pts:
        point = {nm: float(v) for nm, v in zip(names, row)}
        if eval_point(f, point):
            return point
    return None


def _collect_atoms(f: Formula) -> list[Atom]:
    out: list[Atom] = []

    def walk(node: Formula) -> None:
        if isinstance(node, Atom):
            out.append(node)
        elif isinstance(node, Not):
            walk(node.child)
        else:
            for c in node.children:
                walk(c)

    walk(f)
    return out


def _counterexample_candidates(f: Formula, b: Box) -> list[dict[str, float]]:
    """Deterministic points likely to violate f: per atom, the two vertices
    where its affine part attains its extremes; the box center last."""
    center = {n: float(iv.center) for n, iv in b}
    points = []
    for atom in _collect_atoms(f):
        height = dict(center)
        depth = dict(center)
        for name, c in atom.coeffs:
            if name not in b:
                continue
            iv = b[name]
            height[name] = float(iv.hi if c >= 0 else iv.lo)
            depth[name] = float(iv.lo if c >= 0 else iv.hi)
        points.append(height)
        points.append(depth)
    points.append(center)
    return points


def forall_holds(
    f: Formula,
    b: Box,
    n_samples: int = 0,
    rng: np.random.Generator | None = None,
    smt: "SmtBackend | None" = None,
) -> Verdict:
    """Is f true at every point of b?

    PROVEN and REFUTED are sound; REFUTED always carries a witness point.
    """
    tv = three_valued_eval(f, b)
    if tv is TriBool.TRUE:
        return Verdict(Outcome.PROVEN)
    if tv is TriBool.FALSE:
        center = {n: iv.center for n, iv in b}
        return Verdict(Outcome.REFUTED, witness=center)
    for cand in _counterexample_candidates(f, b):
        if not eval_point(f, cand):
            return Verdict(Outcome.REFUTED, witness=cand)
    if n_samples > 0 and rng is not None:
        hit = sample_feasibility(negate(f), b, n_samples, rng)
        if hit is not None:
            return Verdict(Outcome.REFUTED, witness=hit)
    if smt is not None:
        return smt.check_forall(f, b)
    return Verdict(Outcome.UNKNOWN)


# --- SMT-LIB back end ---------------------------------------------------------


def _smt_name(name: str) -> str:
    return name if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) else f"|{name}|"


def _smt_real(x: float) -> str:
    frac = Fraction(x)  # exact binary expansion; deterministic
    if frac.denominator == 1:
        body = f"{frac.numerator}.0" if frac.numerator >= 0 else f"(- {-frac.numerator}.0)"
        return body
    if frac.numerator < 0:
        return f"(- (/ {-frac.numerator}.0 {frac.denominator}.0))"
    return f"(/ {frac.numerator}.0 {frac.denominator}.0)"


def _smt_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        terms = [
            f"(* {_smt_real(c)} {_smt_name(n)})" if c != 1.0 else _smt_name(n)
            for n, c in f.coeffs
        ]
        lhs = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
        op = {"<=": "<=", "<": "<", "=": "=", ">=": ">=", ">": ">"}[f.rel.value]
        return f"({op} {lhs} {_smt_real(f.const)})"
    if isinstance(f, Not):
        return f"(not {_smt_formula(f.child)})"
    parts = [_smt_formula(c) for c in f.children]
    if not parts:
        return "true" if f.__class__.__name__ == "And" else "false"
    op = "and" if f.__class__.__name__ == "And" else "or"
    return f"({op} " + " ".join(parts) + ")"


def emit_smtlib(f: Formula, b: Box, query: str = "forall") -> str:
    """Deterministic SMT-LIB 2 script deciding a forall/exists query over a box.

    For `forall` the goal is asserted negated: unsat means the formula holds
    at every point of the box.  For `exists` it is asserted directly: sat
    means a satisfying point exists.
    """
    if query not in ("forall", "exists"):
        raise ValueError(f"query must be 'forall' or 'exists', got {query!r}")
    lines = ["(set-logic QF_LRA)"]
    for n, iv in b:
        nm = _smt_name(n)
        lines.append(f"(declare-const {nm} Real)")
        lines.append(f"(assert (<= {_smt_real(iv.lo)} {nm}))")
        lines.append(f"(assert (<= {nm} {_smt_real(iv.hi)}))")
    goal = _smt_formula(f)
    lines.append(f"(assert (not {goal}))" if query == "forall" else f"(assert {goal})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


_MODEL_RE = re.compile(
    r"define-fun\s+\|?([^|\s()]+)\|?\s*\(\)\s+Real\s+(\(- [^)]+\)|\(/ [^)]+\)|\(- \(/ [^)]+\)\)|[-0-9.eE/]+)"
)


def _parse_model_value(text: str) -> float:
    text = text.strip()
    neg = False
    if text.startswith("(-"):
        neg = True
        text = text[2:].rstrip(")").strip()
    if text.startswith("(/"):
        parts = text[2:].rstrip(")").split()
        val = float(parts[0]) / float(parts[1])
    else:
        val = float(text)
    return -val if neg else val


@dataclass
class SmtBackend:
    """Runs a configured SMT-LIB solver binary over stdin/stdout.

    `command` is the full solver invocation reading SMT-LIB 2 from stdin
    (config key ``smt.command``, e.g. "z3 -in").  Failures and timeouts
    surface as UNKNOWN with a diagnostic note.
    """

    command: str
    timeout_ms: int = 5000

    def run(self, script: str) -> tuple[str, str]:
        try:
            proc = subprocess.run(
                self.command.split(),
                input=script,
                capture_output=True,
                text=True,
                timeout=self.timeout_ms / 1000.0,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            return "error", f"{type(exc).__name__}: {exc}"
        out = proc.stdout.strip()
        first = out.splitlines()[0].strip() if out else ""
        if first in ("sat", "unsat", "unknown"):
            return first, out
        return "error", out or proc.stderr.strip()

    def check_forall(self, f: Formula, b: Box) -> Verdict:
        status, out = self.run(emit_smtlib(f, b, "forall"))
        if status == "unsat":
            return Verdict(Outcome.PROVEN)
        if status == "sat":
            witness: dict[str, float] | None = {}
            for m in _MODEL_RE.finditer(out):
                try:
                    witness[m.group(1)] = _parse_model_value(m.group(2))
                except ValueError:
                    witness = None
                    break
            if witness is not None:
                missing = [n for n in b.names if n not in witness]
                for n in missing:  # solver may omit don't-care variables
                    witness[n] = b[n].center
                if not eval_point(f, witness):
                    return Verdict(Outcome.REFUTED, witness=witness)
            return Verdict(Outcome.REFUTED)
        return Verdict(Outcome.UNKNOWN, note=f"smt: {status}: {out[:200]}")
