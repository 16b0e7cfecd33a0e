"""Weak-measurement circuit fragments and the three-qubit experiment arms.

Register layout of every arm: ``q0`` is the meter of ``A``, ``q1`` the system,
``q2`` the meter of ``B``.  Measurements are listed as meter A, meter B, system,
so outcome strings read ``abc``.  A meter bit ``0`` is the outcome ``+1``.

Each fragment measures ``Z`` on the system with Kraus operators
``(cos(theta/2) I + a sin(theta/2) Z) / sqrt(2)``, i.e. strength
``lambda = sin(theta)``.  A negative sign realises ``-theta``: by a negative
``RZ`` angle where the angle is a virtual phase, and by swapping the meter's
basis-change suffix where the angle belongs to a fractional gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import qcore
from .errors import DomainError, StructuralError
from .gates import Circuit, Gate, GateKind, Measurement, compile_native, compose_unitary, rotated_x
from .qcore import X, Y, Z
from .weakmeas import KrausSet

META = 0
SYSTEM = 1
METB = 2


class GateSetId(str, Enum):
    CX_SINGLE = "CX_SINGLE"
    CZ_FRACRX = "CZ_FRACRX"
    ECR_SINGLE = "ECR_SINGLE"
    ECR_DOUBLE = "ECR_DOUBLE"
    CZ_DOUBLE = "CZ_DOUBLE"
    RZZ_FRACTIONAL = "RZZ_FRACTIONAL"

    @property
    def two_qubit_gate(self) -> GateKind:
        return {
            GateSetId.CX_SINGLE: GateKind.CX,
            GateSetId.CZ_FRACRX: GateKind.CZ,
            GateSetId.ECR_SINGLE: GateKind.ECR,
            GateSetId.ECR_DOUBLE: GateKind.ECR,
            GateSetId.CZ_DOUBLE: GateKind.CZ,
            GateSetId.RZZ_FRACTIONAL: GateKind.RZZ,
        }[self]


class Order(str, Enum):
    ABC = "ABC"
    BAC = "BAC"


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign!r}")
    return sign


def _fragment_gates(gateset: GateSetId, theta: float, sign: int, s: int, m: int) -> tuple[list[Gate], str]:
    G = Gate
    if gateset is GateSetId.CX_SINGLE:
        # meter prepared in X_+ Z_{theta + pi/2} X_+ |0>, system controls the CX
        gates = [G("SX", (m,)), G("ZP", (m,)), G("RZ", (m,), sign * theta), G("SX", (m,)), G("CX", (s, m))]
        return gates, "Z"
    if gateset is GateSetId.ECR_SINGLE:
        # CX = (X I)(Z_+ I) ECR (I X_-); the X_- cancels the last meter X_+
        gates = [G("SX", (m,)), G("ZP", (m,)), G("RZ", (m,), sign * theta), G("ECR", (s, m)),
                 G("ZP", (s,)), G("X", (s,))]
        return gates, "Z"
    if gateset is GateSetId.ECR_DOUBLE:
        # ECR (I Z_theta) ECR = (ZY)_theta, meter read along X
        gates = [G("ECR", (s, m)), G("RZ", (m,), sign * theta), G("ECR", (s, m)), G("YM", (m,))]
        return gates, "X"
    if gateset in (GateSetId.CZ_FRACRX, GateSetId.CZ_DOUBLE):
        core = [G("RX", (m,), theta), G("CZ", (s, m))]
        if gateset is GateSetId.CZ_DOUBLE:
            core = [G("CZ", (s, m))] + core  # CZ (I X_theta) CZ = (ZX)_theta
        if sign > 0:
            return core + [G("RZ", (m,), math.pi), G("SX", (m,))], "-Y"
        return core + [G("SX", (m,))], "Y"
    if gateset is GateSetId.RZZ_FRACTIONAL:
        suffix = G("YM", (m,)) if sign > 0 else G("YP", (m,))
        return [G("SX", (m,)), G("RZZ", (s, m), theta), suffix], ("X" if sign > 0 else "-X")
    raise DomainError(f"unknown gate set {gateset!r}")


def build_weak_measurement(gateset, theta: float, system_qubit: int = 0, meter_qubit: int = 1,
                           sign: int = 1, num_qubits: int | None = None) -> Circuit:
    """Circuit fragment weakly measuring ``Z`` on ``system_qubit`` with strength ``sin(theta)``.

    The meter starts in ``|0>`` and ends with a ``Z`` readout preceded by the
    gate set's basis-change suffix; the recorded basis tag names the meter
    observable that the readout corresponds to.
    """
    gateset = GateSetId(gateset)
    _check_sign(sign)
    if not 0 < theta <= math.pi / 2 + 1e-12:
        raise DomainError(f"theta must lie in (0, pi/2], got {theta!r}")
    if system_qubit == meter_qubit:
        raise DomainError("system and meter must be distinct qubits")
    n = num_qubits if num_qubits is not None else max(system_qubit, meter_qubit) + 1
    gates, basis = _fragment_gates(gateset, theta, sign, system_qubit, meter_qubit)
    return Circuit(n, tuple(gates), (Measurement(meter_qubit, basis),))


def extract_kraus(fragment: Circuit, system_qubit: int, meter_qubit: int) -> KrausSet:
    """``K(a) = <a| U |0>`` on the meter, for a fragment touching only the two qubits.

    Label ``+1`` belongs to meter bit ``0``.
    """
    if meter_qubit not in fragment.measured_qubits:
        raise StructuralError("fragment has no measurement on the meter qubit")
    remap = {system_qubit: 0, meter_qubit: 1}
    gates = []
    for g in fragment.instructions:
        if any(q not in remap for q in g.qubits):
            raise StructuralError(f"{g.kind.value} on {g.qubits} touches a qubit outside the fragment")
        gates.append(g.on(*(remap[q] for q in g.qubits)))
    u = compose_unitary(Circuit(2, tuple(gates))).reshape(2, 2, 2, 2)
    ops = np.array([u[:, 0, :, 0], u[:, 1, :, 0]])
    return KrausSet(np.array([1.0, -1.0]), ops)


# ------------------------------------------------------------------ frames


@dataclass(frozen=True, eq=False)
class ObservableFrame:
    """Three dichotomic observables and the system's preparation.

    ``conj`` maps each of ``"A"``, ``"B"``, ``"C"`` to ``(before, after)`` gate
    lists on qubit 0 whose unitary ``U`` (the ``before`` list) satisfies
    ``U^dagger Z U = observable``; ``after`` realises ``U^dagger``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    prep: tuple[Gate, ...]
    conj: dict
    name: str = "custom"

    def __post_init__(self):
        for label in "ABC":
            op = qcore.as_matrix(getattr(self, label))
            if op.shape != (2, 2) or not qcore.is_hermitian(op) or np.max(np.abs(op @ op - np.eye(2))) > 1e-12:
                raise DomainError(f"observable {label} must be a dichotomic qubit operator (O^2 = I)")
            u = compose_unitary(Circuit(1, tuple(self.conj[label][0])))
            if np.max(np.abs(u.conj().T @ Z @ u - op)) > 1e-10:
                raise DomainError(f"conjugation gates for {label} do not map Z onto it")

    def observable(self, label: str) -> np.ndarray:
        return getattr(self, label)

    def initial_state(self) -> np.ndarray:
        u = compose_unitary(Circuit(1, self.prep))
        psi = u[:, 0]
        return np.outer(psi, psi.conj())

    @classmethod
    def from_matrices(cls, A, B, C, psi, name: str = "custom") -> "ObservableFrame":
        """Frame built from explicit matrices, realised with custom unitaries."""
        conj = {}
        for label, op in zip("ABC", (A, B, C)):
            w, v = qcore.hermitian_eigh(op)
            u = np.array([v[:, 1].conj(), v[:, 0].conj()])  # rows: +1 eigvec, then -1
            conj[label] = ([Gate.custom(u, (0,))], [Gate.custom(u.conj().T, (0,))])
        psi = np.asarray(psi, dtype=complex).reshape(2)
        psi = psi / np.linalg.norm(psi)
        perp = np.array([-psi[1].conj(), psi[0].conj()])
        prep = (Gate.custom(np.column_stack([psi, perp]), (0,)),)
        return cls(qcore.as_matrix(A), qcore.as_matrix(B), qcore.as_matrix(C), prep, conj, name)


def _rotated_x_conj(sign: int) -> tuple[list[Gate], list[Gate]]:
    # X^pm = Z_{pm pi/4} Y_+ Z Y_- Z_{mp pi/4}, so U = Y_- Z_{mp pi/4}
    q = 0
    before = [Gate("RZ", (q,), -sign * math.pi / 4), Gate("YM", (q,))]
    after = [Gate("YP", (q,)), Gate("RZ", (q,), sign * math.pi / 4)]
    return compile_native(before), compile_native(after)


def default_frame() -> ObservableFrame:
    """``A = X^-``, ``B = X^+``, ``C = Y`` on ``|psi> = Y_+|0>``.

    With this frame ``<ABC> = -<BAC> = 1/2`` and ``<A> = <B> = 1/sqrt(2)``.
    ``C`` is read out in the computational basis after ``X_+`` (``X_- Z X_+ = Y``).
    """
    conj = {
        "A": _rotated_x_conj(-1),
        "B": _rotated_x_conj(+1),
        # X_- = Z X_+ Z undoes the X_+ basis change
        "C": ([Gate("SX", (0,))], [Gate("RZ", (0,), math.pi), Gate("SX", (0,)), Gate("RZ", (0,), math.pi)]),
    }
    prep = tuple(compile_native([Gate("YP", (0,))]))
    return ObservableFrame(rotated_x(-1), rotated_x(+1), Y.copy(), prep, conj, "default")


def _retarget(gates: Sequence[Gate], q: int) -> list[Gate]:
    return [g.on(q) for g in gates]


# ------------------------------------------------------------------ arms


@dataclass(frozen=True)
class ExperimentArm:
    order: Order
    signs: tuple[int, int]  # (meter A, meter B)
    gateset: GateSetId
    thetas: tuple[float, float]  # (theta_A, theta_B), both positive
    circuit: Circuit

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.order.value, self.signs[0], self.signs[1])

    @property
    def strengths(self) -> tuple[float, float]:
        return (math.sin(self.thetas[0]), math.sin(self.thetas[1]))

    def file_stem(self) -> str:
        sa = "p" if self.signs[0] > 0 else "m"
        sb = "p" if self.signs[1] > 0 else "m"
        return f"{self.gateset.value}_{self.order.value}_{sa}{sb}"


def _as_pair(theta) -> tuple[float, float]:
    if isinstance(theta, (tuple, list)):
        ta, tb = (float(t) for t in theta)
    else:
        ta = tb = float(theta)
    return ta, tb


def _as_signs(sign) -> tuple[int, int]:
    if isinstance(sign, (tuple, list)):
        sa, sb = (int(s) for s in sign)
    else:
        sa = sb = int(sign)
    return _check_sign(sa), _check_sign(sb)


def build_experiment_arm(order, sign, gateset, theta, frame: ObservableFrame | None = None) -> ExperimentArm:
    """Full three-qubit circuit for one order and one pair of strength signs.

    ``sign`` and ``theta`` may be scalars (shared by both meters) or
    ``(A, B)`` pairs.
    """
    order = Order(order)
    gateset = GateSetId(gateset)
    frame = default_frame() if frame is None else frame
    signs = _as_signs(sign)
    thetas = _as_pair(theta)
    weak = {"A": (META, thetas[0], signs[0]), "B": (METB, thetas[1], signs[1])}
    gates: list[Gate] = _retarget(frame.prep, SYSTEM)
    meas: dict[str, Measurement] = {}
    for label in ("A", "B") if order is Order.ABC else ("B", "A"):
        meter, th, sg = weak[label]
        before, after = frame.conj[label]
        frag = build_weak_measurement(gateset, th, SYSTEM, meter, sign=sg, num_qubits=3)
        gates += _retarget(before, SYSTEM) + list(frag.instructions) + _retarget(after, SYSTEM)
        meas[label] = frag.measurements[0]
    gates += _retarget(frame.conj["C"][0], SYSTEM)
    c_tag = "Z" if frame.name != "default" else "Y"
    measurements = (meas["A"], meas["B"], Measurement(SYSTEM, c_tag))
    return ExperimentArm(order, signs, gateset, thetas, Circuit(3, tuple(gates), measurements))


def build_all_arms(gateset, theta, frame: ObservableFrame | None = None) -> list[ExperimentArm]:
    """Both orders times the four ``(sign_A, sign_B)`` combinations."""
    return [build_experiment_arm(order, (sa, sb), gateset, theta, frame)
            for order in Order for sa in (1, -1) for sb in (1, -1)]


def ideal_predictions(frame: ObservableFrame | None = None, rho0=None):
    """Weak-limit averages and correlations by direct superoperator algebra."""
    from .stats import theory_table

    frame = default_frame() if frame is None else frame
    rho0 = frame.initial_state() if rho0 is None else qcore.as_matrix(rho0)
    return theory_table(frame, rho0, 0.0, 0.0, source="theory", extended=True)


def invasiveness(gateset, theta: float, rho0=None) -> float:
    """``1 - <psi| rho' |psi>`` after one fragment with the meter outcome discarded."""
    frag = build_weak_measurement(gateset, theta, 0, 1)
    k = extract_kraus(frag, 0, 1)
    if rho0 is None:
        psi = np.array([1.0, 1.0]) / math.sqrt(2)
        rho0 = np.outer(psi, psi.conj())
    rho0 = qcore.as_matrix(rho0)
    return float(1.0 - qcore.trace_product(k.channel(rho0), rho0).real)
