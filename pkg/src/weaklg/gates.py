"""Native gate library, circuit representation and text serialisation.

Rotations follow ``V_theta = exp(-i theta V / 2) = cos(theta/2) I - i sin(theta/2) V``.
Two-qubit gates list their qubits in the order of the matrix factors, so
``ECR`` on ``(c, t)`` applies ``((X I) - (Y X)) / sqrt(2)`` with ``c`` as the
left factor, and ``CX`` on ``(c, t)`` is controlled by ``c``.

Text format, one instruction per line after a ``QUBITS n`` header::

    QUBITS 3
    SX q2
    RZZ(0.1) q1,q2
    YM q2
    MEASX q2

Measurement lines (``MEAS`` plus an optional basis tag such as ``X`` or ``-Y``)
may only follow the gate lines.  The tag records which observable the preceding
basis-change gates map onto the computational ``Z`` readout; it does not add
gates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import qcore
from .errors import CircuitParseError, DomainError, ShapeError, UnsupportedGateError
from .qcore import DensityMatrix, I2, X, Y, Z


class GateKind(str, Enum):
    I = "I"
    X = "X"
    SX = "SX"  # X_+ = X_{pi/2}
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    YP = "YP"  # Y_+
    YM = "YM"  # Y_-
    ZP = "ZP"  # Z_+
    ZM = "ZM"  # Z_-
    CX = "CX"
    CZ = "CZ"
    ECR = "ECR"
    RZZ = "RZZ"
    UNITARY = "UNITARY"


PARAMETRIC = {GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ}
TWO_QUBIT = {GateKind.CX, GateKind.CZ, GateKind.ECR, GateKind.RZZ}
MEAS_BASES = ("Z", "X", "Y", "-Z", "-X", "-Y")


def _kind(kind) -> GateKind:
    if isinstance(kind, GateKind):
        return kind
    try:
        return GateKind(str(kind).upper())
    except ValueError:
        raise UnsupportedGateError(f"unsupported gate kind {kind!r}") from None


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    # row-major entries of a custom unitary; tuples keep the gate hashable
    entries: tuple[tuple[complex, ...], ...] | None = None

    def __post_init__(self):
        kind = _kind(self.kind)
        object.__setattr__(self, "kind", kind)
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(set(qubits)) != len(qubits) or any(q < 0 for q in qubits):
            raise ShapeError(f"gate qubits must be distinct non-negative indices, got {qubits}")
        if kind in PARAMETRIC:
            if self.angle is None or not math.isfinite(self.angle):
                raise DomainError(f"{kind.value} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise DomainError(f"{kind.value} takes no angle")
        if kind is GateKind.UNITARY:
            if self.entries is None:
                raise DomainError("UNITARY gate needs a matrix")
            u = np.array(self.entries, dtype=complex)
            if u.shape != (1 << len(qubits), 1 << len(qubits)):
                raise ShapeError(f"unitary of shape {u.shape} on {len(qubits)} qubit(s)")
            if not qcore.is_unitary(u, 1e-10):
                raise DomainError("UNITARY gate matrix is not unitary")
            object.__setattr__(self, "entries", tuple(tuple(complex(z) for z in row) for row in u))
        else:
            expected = 2 if kind in TWO_QUBIT else 1
            if len(qubits) != expected:
                raise ShapeError(f"{kind.value} acts on {expected} qubit(s), got {qubits}")

    @classmethod
    def custom(cls, matrix, qubits: Sequence[int]) -> "Gate":
        m = np.asarray(matrix, dtype=complex)
        return cls(GateKind.UNITARY, tuple(qubits), entries=tuple(tuple(r) for r in m))

    def on(self, *qubits: int) -> "Gate":
        """Same gate on other qubits."""
        return Gate(self.kind, qubits, self.angle, self.entries)


def rotation(v: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-i theta v / 2)`` for an involutory ``v``."""
    return math.cos(theta / 2) * np.eye(v.shape[0], dtype=complex) - 1j * math.sin(theta / 2) * v


ECR_MATRIX = np.array(
    [[0, 0, 1, 1j], [0, 0, 1j, 1], [1, -1j, 0, 0], [-1j, 1, 0, 0]], dtype=complex
) / math.sqrt(2)
CX_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)
ZZ = np.kron(Z, Z)

_FIXED = {
    GateKind.I: I2,
    GateKind.X: X,
    GateKind.SX: rotation(X, math.pi / 2),
    GateKind.YP: rotation(Y, math.pi / 2),
    GateKind.YM: rotation(Y, -math.pi / 2),
    GateKind.ZP: rotation(Z, math.pi / 2),
    GateKind.ZM: rotation(Z, -math.pi / 2),
    GateKind.CX: CX_MATRIX,
    GateKind.CZ: CZ_MATRIX,
    GateKind.ECR: ECR_MATRIX,
}
_GENERATOR = {GateKind.RX: X, GateKind.RY: Y, GateKind.RZ: Z, GateKind.RZZ: ZZ}


def gate_matrix(g: Gate) -> np.ndarray:
    if g.kind in _FIXED:
        return _FIXED[g.kind].copy()
    if g.kind in _GENERATOR:
        return rotation(_GENERATOR[g.kind], g.angle)
    if g.kind is GateKind.UNITARY:
        return np.array(g.entries, dtype=complex)
    raise UnsupportedGateError(f"no matrix for gate kind {g.kind!r}")


def rotated_x(sign: int) -> np.ndarray:
    """``X`` rotated by ``+-pi/4`` about ``Z``: ``(X +- Y) / sqrt(2)``."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign!r}")
    rz = rotation(Z, sign * math.pi / 4)
    return rz @ X @ rz.conj().T


@dataclass(frozen=True)
class Measurement:
    qubit: int
    basis: str = "Z"

    def __post_init__(self):
        if self.basis not in MEAS_BASES:
            raise DomainError(f"unknown measurement basis tag {self.basis!r}")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    instructions: tuple[Gate, ...] = ()
    measurements: tuple[Measurement, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "measurements", tuple(self.measurements))
        if self.num_qubits < 1:
            raise ShapeError("circuit needs at least one qubit")
        for g in self.instructions:
            if max(g.qubits) >= self.num_qubits:
                raise ShapeError(f"{g.kind.value} on {g.qubits} exceeds {self.num_qubits} qubits")
        seen = set()
        for m in self.measurements:
            if m.qubit >= self.num_qubits or m.qubit in seen:
                raise ShapeError(f"bad or repeated measured qubit {m.qubit}")
            seen.add(m.qubit)

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        return tuple(m.qubit for m in self.measurements)

    def then(self, gates: Iterable[Gate]) -> "Circuit":
        if self.measurements:
            raise ShapeError("cannot append gates after measurement")
        return Circuit(self.num_qubits, self.instructions + tuple(gates))

    def measure(self, qubit: int, basis: str = "Z") -> "Circuit":
        return Circuit(self.num_qubits, self.instructions, self.measurements + (Measurement(qubit, basis),))

    def without_measurements(self) -> "Circuit":
        return Circuit(self.num_qubits, self.instructions)


def compose_unitary(c: Circuit) -> np.ndarray:
    """Product of all instruction unitaries, first instruction rightmost."""
    u = np.eye(1 << c.num_qubits, dtype=complex)
    for g in c.instructions:
        u = qcore.embed_operator(gate_matrix(g), g.qubits, c.num_qubits) @ u
    return u


def apply_gate(rho: DensityMatrix, g: Gate) -> DensityMatrix:
    n = rho.num_qubits
    if max(g.qubits) >= n:
        raise ShapeError(f"{g.kind.value} on {g.qubits} exceeds {n} qubits")
    u = qcore.embed_operator(gate_matrix(g), g.qubits, n)
    return DensityMatrix(u @ rho.matrix @ u.conj().T)


def verify_identity(lhs: Circuit, rhs: Circuit) -> dict:
    """Compare composed unitaries modulo a global phase.

    The phase is the argument of ``Tr(U^dagger V)``; ``max_deviation`` is the
    largest entry of ``|V - e^{i phi} U|`` after alignment.
    """
    if lhs.num_qubits != rhs.num_qubits:
        raise ShapeError("circuits act on different numbers of qubits")
    u, v = compose_unitary(lhs), compose_unitary(rhs)
    overlap = np.trace(u.conj().T @ v)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
    dev = float(np.max(np.abs(v - phase * u)))
    return {"equal_up_to_global_phase": dev < 1e-10, "max_deviation": dev}


# decompositions of the convenience rotations into {SX, RZ}
def _native_1q(g: Gate) -> list[Gate]:
    q = g.qubits[0]
    h = math.pi / 2
    if g.kind is GateKind.ZP:
        return [Gate(GateKind.RZ, (q,), h)]
    if g.kind is GateKind.ZM:
        return [Gate(GateKind.RZ, (q,), -h)]
    if g.kind is GateKind.YP:  # Y_+ = Z_+ X_+ Z_-
        return [Gate(GateKind.RZ, (q,), -h), Gate(GateKind.SX, (q,)), Gate(GateKind.RZ, (q,), h)]
    if g.kind is GateKind.YM:  # Y_- = Z_- X_+ Z_+
        return [Gate(GateKind.RZ, (q,), h), Gate(GateKind.SX, (q,)), Gate(GateKind.RZ, (q,), -h)]
    return [g]


def compile_native(gates: Iterable[Gate]) -> list[Gate]:
    """Rewrite the ``Y_pm``/``Z_pm`` shorthands into ``SX`` and ``RZ``; others pass through."""
    out: list[Gate] = []
    for g in gates:
        out.extend(_native_1q(g))
    return out


# ---------------------------------------------------------------- text format

def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_complex(z: complex) -> str:
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


def format_gate(g: Gate) -> str:
    qs = ",".join(f"q{q}" for q in g.qubits)
    if g.kind in PARAMETRIC:
        return f"{g.kind.value}({_fmt_float(g.angle)}) {qs}"
    if g.kind is GateKind.UNITARY:
        body = ";".join(_fmt_complex(z) for row in g.entries for z in row)
        return f"UNITARY({body}) {qs}"
    return f"{g.kind.value} {qs}"


def serialize_circuit(c: Circuit) -> str:
    lines = [f"QUBITS {c.num_qubits}"]
    lines += [format_gate(g) for g in c.instructions]
    for m in c.measurements:
        tag = "" if m.basis == "Z" else m.basis
        lines.append(f"MEAS{tag} q{m.qubit}")
    return "\n".join(lines) + "\n"


_HEADER = re.compile(r"^QUBITS\s+(\d+)$")
_LINE = re.compile(r"^([A-Z]+|MEAS-[XYZ])(?:\(([^()]*)\))?\s+(q\d+(?:,q\d+)*)$")


def _parse_args(kind: GateKind, arg: str | None, lineno: int):
    if kind in PARAMETRIC:
        if arg is None:
            raise CircuitParseError(f"{kind.value} needs an angle", lineno)
        try:
            return float(arg), None
        except ValueError:
            raise CircuitParseError(f"bad angle {arg!r}", lineno) from None
    if kind is GateKind.UNITARY:
        if arg is None:
            raise CircuitParseError("UNITARY needs matrix entries", lineno)
        try:
            vals = [complex(t) for t in arg.split(";")]
        except ValueError:
            raise CircuitParseError("bad UNITARY entries", lineno) from None
        d = math.isqrt(len(vals))
        if d * d != len(vals):
            raise CircuitParseError("UNITARY entries do not form a square matrix", lineno)
        return None, tuple(tuple(vals[r * d:(r + 1) * d]) for r in range(d))
    if arg is not None:
        raise CircuitParseError(f"{kind.value} takes no argument", lineno)
    return None, None


def parse_circuit(text: str) -> Circuit:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise CircuitParseError("missing QUBITS header", 1)
    lineno, head = lines[0]
    m = _HEADER.match(head)
    if not m:
        raise CircuitParseError(f"expected 'QUBITS n', got {head!r}", lineno)
    n = int(m.group(1))
    gates: list[Gate] = []
    meas: list[Measurement] = []
    for lineno, ln in lines[1:]:
        m = _LINE.match(ln)
        if not m:
            raise CircuitParseError(f"malformed instruction {ln!r}", lineno)
        name, arg, qtext = m.groups()
        qubits = tuple(int(q[1:]) for q in qtext.split(","))
        if name.startswith("MEAS"):
            basis = name[4:] or "Z"
            if basis not in MEAS_BASES or arg is not None or len(qubits) != 1:
                raise CircuitParseError(f"malformed measurement {ln!r}", lineno)
            meas.append(Measurement(qubits[0], basis))
            continue
        if meas:
            raise CircuitParseError("gate after measurement", lineno)
        kind = _kind(name)
        angle, entries = _parse_args(kind, arg, lineno)
        try:
            gates.append(Gate(kind, qubits, angle, entries))
        except (ShapeError, DomainError) as exc:
            raise CircuitParseError(str(exc), lineno) from exc
    try:
        return Circuit(n, tuple(gates), tuple(meas))
    except ShapeError as exc:
        raise CircuitParseError(str(exc), lines[-1][0]) from exc
