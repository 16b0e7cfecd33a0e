"""Exact density-matrix evaluation of arms, shot sampling and the device noise model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

import numpy as np

from . import qcore
from .errors import ConfigError, DomainError, InvariantError
from .gates import TWO_QUBIT, Circuit, Gate, GateKind, apply_gate
from .protocols import META, METB, SYSTEM, ExperimentArm, GateSetId
from .qcore import DensityMatrix

DEVICES = ("brisbane", "sherbrooke", "kyiv", "torino", "kingston")


def _pair(qubits) -> tuple[int, int]:
    a, b = (int(q) for q in qubits)
    return (a, b) if a < b else (b, a)


def _rate(value, where: str) -> float:
    r = float(value)
    if not 0.0 <= r <= 0.5 or math.isnan(r):
        raise ConfigError(f"rate {r!r} outside [0, 0.5]", where)
    return r


@dataclass(frozen=True)
class NoiseModel:
    """Two-qubit depolarizing rates per unordered pair and readout flip rates per qubit.

    ``rzz_angle_scale`` multiplies the angle of every ``RZZ`` gate, a crude model
    of a miscalibrated fractional gate; ``1.0`` leaves it untouched.
    """

    two_qubit_depol: Mapping[tuple[int, int], float] = field(default_factory=dict)
    readout_flip: Mapping[int, float] = field(default_factory=dict)
    enabled: bool = True
    rzz_angle_scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        pairs = {_pair(k): _rate(v, f"two_qubit_depol/{k}") for k, v in self.two_qubit_depol.items()}
        flips = {int(k): _rate(v, f"readout_flip/{k}") for k, v in self.readout_flip.items()}
        if not self.rzz_angle_scale > 0 or not math.isfinite(self.rzz_angle_scale):
            raise ConfigError("rzz_angle_scale must be positive", "rzz_angle_scale")
        object.__setattr__(self, "two_qubit_depol", pairs)
        object.__setattr__(self, "readout_flip", flips)

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls(enabled=False)

    def rate(self, qubits) -> float:
        key = _pair(qubits)
        if key not in self.two_qubit_depol:
            raise ConfigError(f"no depolarizing rate for qubit pair {key}", f"two_qubit_depol/{key}")
        return self.two_qubit_depol[key]

    def scaled(self, factor: float) -> "NoiseModel":
        """All rates multiplied by ``factor`` and capped at 0.5."""
        return NoiseModel({k: min(0.5, v * factor) for k, v in self.two_qubit_depol.items()},
                          {k: min(0.5, v * factor) for k, v in self.readout_flip.items()},
                          self.enabled, self.rzz_angle_scale, self.label)

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "pairs": [{"qubits": list(k), "rate": v} for k, v in self.two_qubit_depol.items()],
            "readout": {str(k): v for k, v in self.readout_flip.items()},
            "rzz_angle_scale": self.rzz_angle_scale,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        try:
            pairs = {tuple(p["qubits"]): p["rate"] for p in d.get("pairs", [])}
            readout = {int(k): v for k, v in d.get("readout", {}).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed noise model: {exc}", "noise") from None
        return cls(pairs, readout, bool(d.get("enabled", True)), float(d.get("rzz_angle_scale", 1.0)),
                   str(d.get("label", "")))

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_device(cls, device: str, group: int, gateset, rzz_angle_scale: float = 1.0) -> "NoiseModel":
        """Rates of one qubit group of a shipped device table, mapped onto the arm register."""
        data = load_device(device)
        groups = {g["group"]: g for g in data["groups"]}
        if group not in groups:
            raise ConfigError(f"device {device!r} has no group {group}", "noise/group")
        g = groups[group]
        gate = device_gate_column(data, GateSetId(gateset))
        err = g["two_qubit_error"][gate]
        ro = g["readout_error"]
        return cls({(SYSTEM, META): err["CA"], (SYSTEM, METB): err["CB"]},
                   {META: ro["A"], METB: ro["B"], SYSTEM: ro["C"]},
                   True, rzz_angle_scale, f"{data['device']} group {group} {gate}")


def load_device(device: str) -> dict:
    name = device.removeprefix("ibm_")
    if name not in DEVICES:
        raise ConfigError(f"unknown device {device!r}", "noise/device")
    text = resources.files("weaklg").joinpath("data", "devices", f"{name}.json").read_text()
    return json.loads(text)


def device_gate_column(data: Mapping, gateset: GateSetId) -> str:
    native = data["two_qubit_gates"]
    want = {GateKind.ECR: "ECR", GateKind.CX: "ECR", GateKind.CZ: "CZ", GateKind.RZZ: "RZZ"}[gateset.two_qubit_gate]
    if want not in native:
        raise ConfigError(f"{data['device']} has no {want} error column for {gateset.value}", "noise/device")
    return want


# ------------------------------------------------------------------ evolution


def depolarize_pair(rho: np.ndarray, pair: tuple[int, int], p: float, num_qubits: int) -> np.ndarray:
    """``(1-p) rho + p Tr_pair(rho) (x) I/4`` with the identity placed on ``pair``."""
    if p == 0.0:
        return rho
    rest = [q for q in range(num_qubits) if q not in pair]
    reduced = qcore.partial_trace(rho, rest, num_qubits) if rest else np.ones((1, 1), dtype=complex)
    mixed = np.kron(np.eye(4, dtype=complex) / 4, reduced)
    # mixed has the pair first; permute back into register order
    order = list(pair) + rest
    n = num_qubits
    inv = np.argsort(order)
    t = mixed.reshape([2] * (2 * n)).transpose(list(inv) + [n + i for i in inv])
    return (1 - p) * rho + p * t.reshape(1 << n, 1 << n)


def apply_noise_channel(rho: DensityMatrix, g: Gate, noise: NoiseModel) -> DensityMatrix:
    """Gate noise after ``g``: depolarizing on the pair of a two-qubit gate, nothing otherwise."""
    if not noise.enabled or g.kind not in TWO_QUBIT:
        return rho
    p = noise.rate(g.qubits)
    return DensityMatrix(depolarize_pair(rho.matrix, _pair(g.qubits), p, rho.num_qubits))


def evolve(circuit: Circuit, noise: NoiseModel | None = None) -> DensityMatrix:
    """Final state of ``circuit`` from ``|0...0>``, with gate noise if enabled."""
    noisy = noise is not None and noise.enabled
    rho = DensityMatrix.basis(0, circuit.num_qubits)
    for g in circuit.instructions:
        if noisy and g.kind is GateKind.RZZ and noise.rzz_angle_scale != 1.0:
            g = Gate(g.kind, g.qubits, g.angle * noise.rzz_angle_scale)
        rho = apply_gate(rho, g)
        if noisy:
            rho = apply_noise_channel(rho, g, noise)
    return rho


def readout_confusion(flips: list[float]) -> np.ndarray:
    """Product of symmetric 2x2 flip matrices, first entry most significant."""
    m = np.eye(1)
    for e in flips:
        m = np.kron(m, np.array([[1 - e, e], [e, 1 - e]]))
    return m


def _register_distribution(rho: DensityMatrix, measured: tuple[int, ...]) -> np.ndarray:
    reduced = qcore.partial_trace(rho.matrix, list(measured), rho.num_qubits)
    return np.clip(np.diag(reduced).real, 0.0, None)


def exact_outcome_distribution(arm, noise: NoiseModel | None = None) -> np.ndarray:
    """Probabilities of the outcome strings, indexed by the bits in measurement order.

    For an :class:`ExperimentArm` the order is meter A, meter B, system.
    """
    circuit = arm.circuit if isinstance(arm, ExperimentArm) else arm
    rho = evolve(circuit, noise)
    probs = _register_distribution(rho, circuit.measured_qubits)
    if noise is not None and noise.enabled and noise.readout_flip:
        flips = [noise.readout_flip.get(q, 0.0) for q in circuit.measured_qubits]
        probs = readout_confusion(flips) @ probs
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise InvariantError(f"outcome distribution sums to {total!r}")
    return probs / total


# ------------------------------------------------------------------ sampling


@dataclass(frozen=True)
class ShotRecord:
    gateset: GateSetId
    order: str
    signs: tuple[int, int]
    thetas: tuple[float, float]
    counts: Mapping[str, int]

    def __post_init__(self):
        if any(v < 0 for v in self.counts.values()):
            raise InvariantError("negative count")
        if any(len(k) != 3 or set(k) - {"0", "1"} for k in self.counts):
            raise InvariantError("outcome keys must be 3-bit strings")

    @property
    def shots(self) -> int:
        return int(sum(self.counts.values()))

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.order, self.signs[0], self.signs[1])

    def frequencies(self) -> np.ndarray:
        n = self.shots
        if n == 0:
            raise DomainError("empty shot record")
        return np.array([self.counts.get(f"{i:03b}", 0) for i in range(8)], dtype=float) / n

    def merge(self, other: "ShotRecord") -> "ShotRecord":
        if (self.gateset, self.order, self.signs, self.thetas) != (other.gateset, other.order, other.signs, other.thetas):
            raise DomainError("cannot merge records of different arms")
        keys = set(self.counts) | set(other.counts)
        return ShotRecord(self.gateset, self.order, self.signs, self.thetas,
                          {k: self.counts.get(k, 0) + other.counts.get(k, 0) for k in sorted(keys)})


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> dict[str, int]:
    if shots < 1:
        raise DomainError("shots must be at least 1")
    draw = rng.multinomial(int(shots), probs)
    return {f"{i:03b}": int(c) for i, c in enumerate(draw)}


def sample_shots(arm: ExperimentArm, noise: NoiseModel | None, shots: int, rng_seed: int,
                 probs: np.ndarray | None = None) -> ShotRecord:
    """Multinomial draw over ``abc`` outcomes; ``probs`` skips re-evaluating the arm."""
    p = exact_outcome_distribution(arm, noise) if probs is None else probs
    counts = sample_counts(p, shots, rng_from_seed(rng_seed))
    return ShotRecord(arm.gateset, arm.order.value, arm.signs, arm.thetas, counts)


def sample_arms(arms, dists: dict, shots: int, seed: int, stream: int = 0) -> dict:
    """Independent multinomial draws for each arm from one ``(seed, stream)`` root."""
    children = np.random.SeedSequence([int(seed), int(stream)]).spawn(len(arms))
    return {a.key: ShotRecord(a.gateset, a.order.value, a.signs, a.thetas,
                              sample_counts(dists[a.key], shots, np.random.Generator(np.random.Philox(c))))
            for a, c in zip(arms, children)}
