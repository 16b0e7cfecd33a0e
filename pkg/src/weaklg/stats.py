"""Estimators, error propagation and the finite-strength theory tables.

Label grammar: capital letters are read out, lower-case letters are weakly
measured with the outcome discarded, and the letter order is the time order.
``Ab`` is read out on the ``A`` meter while ``B`` still acts; ``abC`` keeps
only the final projective ``C`` readout.  ``A``, ``AB``, ``ABC`` and the other
rows with every weak letter read out come from the same circuits.

Averages follow ``Tr rho O_1(O_2(... 1))`` where ``O_i`` is the Heisenberg
superoperator of the ``i``-th measurement in time: ``{X, .}/2`` for a readout
and ``1 - g G_X`` for a discarded weak outcome.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainError, InvariantError, StructuralError
from .weakmeas import g_from_theta

# label -> (order, weak letters read out, C read out)
ARM_LABELS: dict[str, tuple[str, str, bool]] = {
    "Ab": ("ABC", "A", False),
    "aB": ("ABC", "B", False),
    "AB": ("ABC", "AB", False),
    "AbC": ("ABC", "A", True),
    "aBC": ("ABC", "B", True),
    "ABC": ("ABC", "AB", True),
    "abC": ("ABC", "", True),
    "Ba": ("BAC", "B", False),
    "bA": ("BAC", "A", False),
    "BA": ("BAC", "AB", False),
    "BaC": ("BAC", "B", True),
    "bAC": ("BAC", "A", True),
    "BAC": ("BAC", "AB", True),
    "baC": ("BAC", "", True),
}

DERIVED_LABELS = ("A", "B", "C", "LG_AB", "LG_BA", "order")
TABLE_LABELS = tuple(ARM_LABELS) + DERIVED_LABELS

SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
OUTCOMES = tuple(f"{i:03b}" for i in range(8))  # meter A, meter B, system
CSV_COLUMNS = ("label", "value", "std_error", "source", "gateset", "order")
_DERIVED_ORDER = {"A": "ABC", "B": "BAC", "C": "both", "LG_AB": "ABC", "LG_BA": "BAC", "order": "both"}


def label_order(label: str) -> str:
    """Arm order a row is measured in, ``both`` for rows combining the two arms."""
    if label in ARM_LABELS:
        return ARM_LABELS[label][0]
    return _DERIVED_ORDER.get(label, "")


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float | None = None
    source: str = "exact"


@dataclass
class EstimateTable:
    """Ordered ``label -> Estimate`` rows with CSV export."""

    rows: dict[str, Estimate] = field(default_factory=dict)

    def __getitem__(self, label: str) -> Estimate:
        return self.rows[label]

    def __contains__(self, label: str) -> bool:
        return label in self.rows

    def value(self, label: str) -> float:
        return self.rows[label].value

    def add(self, label: str, value: float, std_error: float | None = None, source: str = "exact") -> None:
        self.rows[label] = Estimate(float(value), None if std_error is None else float(std_error), source)

    def labels(self) -> list[str]:
        return list(self.rows)

    def to_csv(self, gateset: str = "", header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        for label, e in self.rows.items():
            w.writerow([label, repr(e.value), "" if e.std_error is None else repr(e.std_error), e.source,
                        gateset, label_order(label)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EstimateTable":
        t = cls()
        for row in csv.DictReader(io.StringIO(text)):
            err = row["std_error"]
            t.add(row["label"], float(row["value"]), float(err) if err else None, row["source"])
        return t

    def to_dict(self) -> dict:
        return {k: {"value": e.value, "std_error": e.std_error, "source": e.source} for k, e in self.rows.items()}


def _quad(*errs: float | None) -> float | None:
    if any(e is None for e in errs):
        return None
    return math.sqrt(sum(e * e for e in errs))


def add_derived_rows(table: EstimateTable) -> EstimateTable:
    """Single averages, both LG combinations and the order term from the arm rows."""
    r = table.rows
    src = r["Ab"].source
    table.add("A", r["Ab"].value, r["Ab"].std_error, src)
    table.add("B", r["Ba"].value, r["Ba"].std_error, src)
    c_err = None if r["abC"].std_error is None else _quad(r["abC"].std_error, r["baC"].std_error) / 2
    table.add("C", (r["abC"].value + r["baC"].value) / 2, c_err, src)
    table.add("LG_AB", r["Ab"].value + r["aB"].value - r["AB"].value,
              _quad(r["Ab"].std_error, r["aB"].std_error, r["AB"].std_error), src)
    table.add("LG_BA", r["Ba"].value + r["bA"].value - r["BA"].value,
              _quad(r["Ba"].std_error, r["bA"].std_error, r["BA"].std_error), src)
    table.add("order", r["ABC"].value - r["BAC"].value, _quad(r["ABC"].std_error, r["BAC"].std_error), src)
    return table


# ------------------------------------------------------------------ theory


def _readout(op: np.ndarray):
    return lambda o: (op @ o + o @ op) / 2


def _backaction(op: np.ndarray, g: float):
    # G_X(O) = [X, [X, O]]
    return lambda o: o - g * (op @ (op @ o - o @ op) - (op @ o - o @ op) @ op)


def correlation(frame, rho, label: str, g_a: float, g_b: float) -> float:
    """One arm label evaluated by brute-force Heisenberg superoperators."""
    order, read, with_c = ARM_LABELS[label]
    g = {"A": g_a, "B": g_b}
    ops = []
    for letter in order[:2]:
        x = frame.observable(letter)
        ops.append(_readout(x) if letter in read else _backaction(x, g[letter]))
    o = frame.observable("C").astype(complex) if with_c else np.eye(2, dtype=complex)
    for f in reversed(ops):
        o = f(o)
    return float(np.trace(np.asarray(rho) @ o).real)


def theory_table(frame, rho, g_a: float, g_b: float, source: str = "theory", extended: bool = False) -> EstimateTable:
    """All arm labels plus derived rows at backaction strengths ``g_a``, ``g_b``.

    ``extended`` adds the weak-limit two-point rows ``AC`` and ``BC`` and
    the LG combinations that use the final ``C``.
    """
    t = EstimateTable()
    for label in ARM_LABELS:
        t.add(label, correlation(frame, rho, label, g_a, g_b), None, source)
    add_derived_rows(t)
    if extended:
        a, b, c = frame.A, frame.B, frame.C
        ac = float(np.trace(rho @ (a @ c + c @ a)).real) / 2
        bc = float(np.trace(rho @ (b @ c + c @ b)).real) / 2
        t.add("AC", ac, None, source)
        t.add("BC", bc, None, source)
        t.add("LG_AC", t.value("A") + t.value("C") - ac, None, source)
        t.add("LG_BC", t.value("B") - t.value("C") + bc, None, source)
    return t


def theory_finite_strength(theta_a: float, theta_b: float | None = None, frame=None, rho=None) -> EstimateTable:
    """Exact predictions at finite rotation angles for the given frame."""
    from .protocols import default_frame

    theta_b = theta_a if theta_b is None else theta_b
    frame = default_frame() if frame is None else frame
    rho = frame.initial_state() if rho is None else np.asarray(rho, dtype=complex)
    return theory_table(frame, rho, g_from_theta(theta_a), g_from_theta(theta_b))


def closed_form_default(g_a: float, g_b: float) -> dict[str, float]:
    """Hand-derived values for the default frame, used to cross-check :func:`theory_table`."""
    r = 1 / math.sqrt(2)
    s = 2 * math.sqrt(2)
    return {
        "Ab": r, "aB": r - s * g_a, "AB": 0.0,
        "Ba": r, "bA": r - s * g_b, "BA": 0.0,
        "AbC": -r + s * g_b, "aBC": r, "ABC": 0.5, "abC": 2 * (g_b - g_a),
        "bAC": -r, "BaC": r - s * g_a, "BAC": -0.5, "baC": 2 * (g_b - g_a),
        "LG_AB": 2 * r - s * g_a, "LG_BA": 2 * r - s * g_b, "order": 1.0,
    }


# ------------------------------------------------------------------ estimators


def _values(outcome: str) -> dict[str, int]:
    return {k: 1 - 2 * int(bit) for k, bit in zip("ABC", outcome)}


def _moment(probs: np.ndarray, letters: str) -> float:
    total = 0.0
    for i, out in enumerate(OUTCOMES):
        v = _values(out)
        total += probs[i] * math.prod(v[k] for k in letters)
    return total


def _weights(signs: tuple[int, int], read: str, lam: Mapping[str, float]) -> float:
    sgn = {"A": signs[0], "B": signs[1]}
    w = 1.0 / len(SIGNS)
    for k in read:
        w *= sgn[k] / lam[k]
    return w


def estimate_from_distributions(distributions: Mapping[tuple, np.ndarray], thetas: tuple[float, float],
                                shots: Mapping[tuple, int] | None = None, source: str = "exact") -> EstimateTable:
    """Sign-combined estimators from per-arm outcome distributions.

    ``distributions`` maps ``(order, sign_A, sign_B)`` to an 8-vector over
    ``abc`` outcomes.  Every read-out weak factor contributes its sign and a
    ``1/lambda`` so sign-odd drifts cancel.  When ``shots`` is given the
    binomial standard error of each sign term is propagated.
    """
    lam = {"A": math.sin(thetas[0]), "B": math.sin(thetas[1])}
    if min(abs(v) for v in lam.values()) == 0:
        raise DomainError("weak strengths must be non-zero")
    for order in ("ABC", "BAC"):
        for s in SIGNS:
            if (order, *s) not in distributions:
                raise StructuralError(f"missing arm {order} with signs {s}")
    t = EstimateTable()
    for label, (order, read, with_c) in ARM_LABELS.items():
        letters = read + ("C" if with_c else "")
        value, var = 0.0, 0.0
        for s in SIGNS:
            p = np.asarray(distributions[(order, *s)], dtype=float)
            m = _moment(p, letters)
            w = _weights(s, read, lam)
            value += w * m
            if shots is not None:
                var += w * w * max(1.0 - m * m, 0.0) / shots[(order, *s)]
        t.add(label, value, math.sqrt(var) if shots is not None else None, source)
    return add_derived_rows(t)


def weak_estimators(records: Mapping[tuple, "object"]) -> EstimateTable:
    """Estimates and sampled standard errors from shot records of all eight arms.

    Records must agree on gate set and angles; a record's ``key`` is
    ``(order, sign_A, sign_B)``.
    """
    recs = list(records.values())
    if not recs:
        raise StructuralError("no shot records")
    first = recs[0]
    for r in recs[1:]:
        if r.gateset != first.gateset or r.thetas != first.thetas:
            raise StructuralError("shot records come from mismatched arms")
    dists = {k: r.frequencies() for k, r in records.items()}
    shots = {k: r.shots for k, r in records.items()}
    return estimate_from_distributions(dists, first.thetas, shots, source="sampled")


# ------------------------------------------------------------------ run plan and error model


@dataclass(frozen=True)
class RunPlan:
    jobs: int
    shots: int
    repetitions: int
    theta: float

    def __post_init__(self):
        if min(self.jobs, self.shots, self.repetitions) < 1:
            raise DomainError("jobs, shots and repetitions must be positive")
        if not 0 < self.theta <= math.pi / 2:
            raise DomainError("theta must lie in (0, pi/2]")

    @classmethod
    def eagle(cls) -> "RunPlan":
        return cls(60, 10000, 25, 0.1)

    @classmethod
    def heron(cls) -> "RunPlan":
        return cls(40, 10000, 25, 0.1)

    @property
    def shots_per_circuit(self) -> int:
        return self.jobs * self.shots * self.repetitions


def standard_error(plan: RunPlan, weak_factors: int = 2) -> float:
    """Predicted error ``1 / (2 sqrt(N) lambda^k)`` of a sign-combined estimator.

    ``N = J S R`` shots run on each of the four sign circuits; the per-shot
    variance of a +-1 product is at most 1.
    """
    lam = math.sin(plan.theta)
    return 1.0 / (2.0 * math.sqrt(plan.shots_per_circuit) * lam ** weak_factors)


def predicted_errors(plan: RunPlan) -> dict[str, float]:
    return {label: standard_error(plan, len(read)) for label, (_, read, _) in ARM_LABELS.items()}


def lg_and_order(table: EstimateTable, threshold: float = 5.0) -> dict:
    """LG combinations and the order term with significance of their violations.

    The classical bounds are ``LG <= 1`` and ``order = 0``.  Stored LG rows are
    checked against their components when both are present.
    """
    for name, parts in (("LG_AB", ("Ab", "aB", "AB")), ("LG_BA", ("Ba", "bA", "BA")), ("order", ("ABC", "BAC"))):
        if name not in table and all(p in table for p in parts):
            add_derived_rows(table)
        if name in table and all(p in table for p in parts):
            v = [table.value(p) for p in parts]
            recomputed = v[0] - v[1] if name == "order" else v[0] + v[1] - v[2]
            if abs(recomputed - table.value(name)) > 1e-9:
                raise InvariantError(f"{name} row disagrees with its components")
    out: dict = {}
    for name in ("LG_AB", "LG_BA"):
        if name in table:
            e = table[name]
            sig = None if not e.std_error else (e.value - 1.0) / e.std_error
            out[name] = {"value": e.value, "std_error": e.std_error, "sigma": sig,
                         "violated": sig is not None and sig >= threshold}
    if "order" in table:
        e = table["order"]
        sig = None if not e.std_error else abs(e.value) / e.std_error
        out["order"] = {"value": e.value, "std_error": e.std_error, "sigma": sig,
                        "violated": sig is not None and sig >= threshold}
    out["violated"] = bool(out) and all(v["violated"] for v in out.values())
    out["threshold_sigma"] = threshold
    return out
