"""Batch entry point: ``weaklg run`` and ``weaklg bound-check``.

Exit codes: 0 success, 2 configuration error, 3 a runtime invariant failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import protocols, sim, stats, weakmeas
from .errors import ConfigError, WeakLGError
from .gates import serialize_circuit
from .qcore import Z

log = logging.getLogger("weaklg")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

_RATE = {"type": "number", "minimum": 0, "maximum": 0.5}
_MATRIX = {"type": "object", "additionalProperties": False, "required": ["re"],
           "properties": {"re": {"type": "array"}, "im": {"type": "array"}}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["gatesets"],
    "properties": {
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["eagle", "heron"]},
                "jobs": {"type": "integer", "minimum": 1},
                "shots": {"type": "integer", "minimum": 1},
                "repetitions": {"type": "integer", "minimum": 1},
                "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi / 2},
                "theta_b": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi / 2},
            },
        },
        "gatesets": {"type": "array", "minItems": 1, "items": {"enum": [g.value for g in protocols.GateSetId]}},
        "frame": {
            "oneOf": [
                {"const": "default"},
                {"type": "object", "additionalProperties": False, "required": ["A", "B", "C", "psi"],
                 "properties": {"A": _MATRIX, "B": _MATRIX, "C": _MATRIX, "psi": _MATRIX}},
            ]
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "device": {"enum": list(sim.DEVICES) + [f"ibm_{d}" for d in sim.DEVICES]},
                "group": {"type": "integer", "minimum": 0},
                "pairs": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False, "required": ["qubits", "rate"],
                    "properties": {"qubits": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 2},
                                              "minItems": 2, "maxItems": 2},
                                   "rate": _RATE}}},
                "readout": {"type": "object", "additionalProperties": False,
                            "patternProperties": {"^[0-2]$": _RATE}},
                "rzz_angle_scale": {"type": "number", "exclusiveMinimum": 0},
                "label": {"type": "string"},
            },
        },
        "mode": {"enum": ["exact", "sampled", "both"]},
        "seed": {"type": "integer", "minimum": 0},
        "outputs": {"type": "string"},
        "dump_circuits": {"type": "boolean"},
        "bound_check": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["random", "dichotomic", "gaussian", "null"]},
                "dim": {"type": "integer", "minimum": 2, "maximum": 8},
                "samples": {"type": "integer", "minimum": 1},
                "channels": {"type": "integer", "minimum": 1},
                "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi / 2},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}


def validate_config(cfg) -> dict:
    """Check ``cfg`` against the schema; the first error's JSON path is reported."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(e.message, path)
    return cfg


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    return validate_config(cfg)


def _plan(cfg: dict) -> stats.RunPlan:
    p = dict(cfg.get("plan", {}))
    base = stats.RunPlan.heron() if p.get("preset") == "heron" else stats.RunPlan.eagle()
    return stats.RunPlan(p.get("jobs", base.jobs), p.get("shots", base.shots),
                         p.get("repetitions", base.repetitions), p.get("theta", base.theta))


def _complex(m: dict) -> np.ndarray:
    re = np.asarray(m["re"], dtype=float)
    im = np.asarray(m.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise ConfigError("re and im parts differ in shape", "frame")
    return re + 1j * im


def _frame(cfg: dict) -> protocols.ObservableFrame:
    f = cfg.get("frame", "default")
    if f == "default":
        return protocols.default_frame()
    try:
        return protocols.ObservableFrame.from_matrices(_complex(f["A"]), _complex(f["B"]), _complex(f["C"]),
                                                       _complex(f["psi"]))
    except WeakLGError as exc:
        raise ConfigError(str(exc), "frame") from None


def _noise(cfg: dict, gateset) -> sim.NoiseModel:
    n = cfg.get("noise")
    if not n or not n.get("enabled", True):
        return sim.NoiseModel.off()
    if "device" in n:
        return sim.NoiseModel.from_device(n["device"], n.get("group", 0), gateset, n.get("rzz_angle_scale", 1.0))
    return sim.NoiseModel.from_dict(n)


def _verdict(table: stats.EstimateTable) -> dict:
    res = stats.lg_and_order(table)
    return {"lg_ab": res["LG_AB"], "lg_ba": res["LG_BA"], "order": res["order"], "violated": res["violated"]}


def run_experiment(cfg: dict, mode: str | None = None, seed: int | None = None, out: str | None = None,
                   dump_circuits: bool | None = None) -> int:
    """Simulate every configured gate set and write the artifacts; returns the exit status."""
    mode = mode or cfg.get("mode", "exact")
    seed = cfg.get("seed", 0) if seed is None else seed
    outdir = Path(out or cfg.get("outputs", "out"))
    dump = cfg.get("dump_circuits", False) if dump_circuits is None else dump_circuits
    plan = _plan(cfg)
    theta_b = cfg.get("plan", {}).get("theta_b", plan.theta)
    thetas = (plan.theta, theta_b)
    frame = _frame(cfg)
    rho0 = frame.initial_state()

    theory = stats.theory_table(frame, rho0, weakmeas.g_from_theta(thetas[0]), weakmeas.g_from_theta(thetas[1]))
    ideal = stats.theory_table(frame, rho0, 0.0, 0.0)
    correction = {k: theory.value(k) - ideal.value(k) for k in ("LG_AB", "LG_BA", "order")}
    predicted = stats.predicted_errors(plan)

    csv_parts: list[str] = []
    summary: dict = {"plan": {"jobs": plan.jobs, "shots": plan.shots, "repetitions": plan.repetitions,
                              "theta": list(thetas), "shots_per_circuit": plan.shots_per_circuit},
                     "mode": mode, "seed": seed, "frame": frame.name,
                     "theory": {k: theory.value(k) for k in ("LG_AB", "LG_BA", "order")},
                     "ideal": {k: ideal.value(k) for k in ("LG_AB", "LG_BA", "order")},
                     "invasiveness_correction": correction,
                     "standard_error": stats.standard_error(plan), "gatesets": {}}
    failures: list[str] = []
    circuits: dict[str, str] = {}

    for gi, gs_name in enumerate(cfg["gatesets"]):
        gs = protocols.GateSetId(gs_name)
        noise = _noise(cfg, gs)
        arms = protocols.build_all_arms(gs, thetas, frame)
        if dump:
            circuits.update({f"{a.file_stem()}.qc": serialize_circuit(a.circuit) for a in arms})
        dists = {a.key: sim.exact_outcome_distribution(a, noise) for a in arms}
        entry: dict = {"noise": noise.to_dict()}
        tables = []
        if mode in ("exact", "both"):
            exact = stats.estimate_from_distributions(dists, thetas, source="exact")
            for label, err in predicted.items():
                exact.add(label, exact.value(label), err, "exact")
            stats.add_derived_rows(exact)
            if not noise.enabled:
                dev = max(abs(exact.value(k) - theory.value(k)) for k in theory.labels())
                entry["max_deviation_from_theory"] = dev
                if dev > 1e-9:
                    failures.append(f"{gs.value}: exact estimates deviate from theory by {dev:.3e}")
            entry["exact"] = _verdict(exact)
            tables.append(exact)
        if mode in ("sampled", "both"):
            records = sim.sample_arms(arms, dists, plan.shots_per_circuit, seed, gi)
            sampled = stats.weak_estimators(records)
            entry["sampled"] = _verdict(sampled)
            tables.append(sampled)
        for t in tables:
            for name in ("LG_AB", "LG_BA", "order"):
                parts = {"LG_AB": ("Ab", "aB", "AB"), "LG_BA": ("Ba", "bA", "BA"), "order": ("ABC", "BAC")}[name]
                v = [t.value(p) for p in parts]
                recomputed = v[0] - v[1] if name == "order" else v[0] + v[1] - v[2]
                if recomputed != t.value(name):
                    failures.append(f"{gs.value}: {name} does not match its components")
            csv_parts.append(t.to_csv(gs.value, header=not csv_parts))
        summary["gatesets"][gs.value] = entry

    report = None
    if "bound_check" in cfg:
        bc = cfg["bound_check"]
        report = bound_report(bc.get("preset", "dichotomic"), bc.get("dim", 2), bc.get("samples", 256),
                              bc.get("seed", seed), bc.get("channels", 100), bc.get("theta", 0.05))
        if report.get("constant_16_violations", 0) or report.get("constant_16_satisfied") is False:
            failures.append("constant-16 bound violated")

    summary["invariants_ok"] = not failures
    summary["failures"] = failures

    # every write happens after the simulation
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "estimates.csv").write_text("".join(csv_parts))
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if report is not None:
        (outdir / "bound_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if circuits:
        cdir = outdir / "circuits"
        cdir.mkdir(exist_ok=True)
        for name, text in circuits.items():
            (cdir / name).write_text(text)
    for f in failures:
        log.error(f)
    return EXIT_INVARIANT if failures else EXIT_OK


def bound_report(preset: str, dim: int, samples: int, seed: int, channels: int = 100, theta: float = 0.05) -> dict:
    """Bound-checker output for one preset family."""
    if preset == "random":
        return {"preset": preset, **weakmeas.theorem1_sweep(channels, dims=tuple(range(2, dim + 1)),
                                                             samples=samples, seed=seed)}
    if preset == "dichotomic":
        k = weakmeas.dichotomic_kraus_theta(np.kron(Z, np.eye(dim // 2)) if dim % 2 == 0 else np.diag(
            [1.0] * (dim - 1) + [-1.0]), theta)
    elif preset == "gaussian":
        a = np.diag(np.linspace(-1.0, 1.0, dim))
        k = weakmeas.gaussian_kraus(a)
    else:
        k = weakmeas.KrausSet(np.array([0.0]), np.eye(dim, dtype=complex)[None])
    r = weakmeas.check_theorem1_bound(k, samples=samples, rng_seed=seed)
    return {"preset": preset, "theta": theta if preset == "dichotomic" else None, **r.to_dict()}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weaklg", description="Weak-measurement Leggett-Garg simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate the configured experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--mode", choices=["exact", "sampled", "both"])
    r.add_argument("--seed", type=int)
    r.add_argument("--dump-circuits", action="store_true", default=None)
    r.add_argument("--out")
    b = sub.add_parser("bound-check", help="check the variance-disturbance bound")
    b.add_argument("--preset", choices=["random", "dichotomic", "gaussian", "null"], default="dichotomic")
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--samples", type=int, default=256)
    b.add_argument("--channels", type=int, default=100)
    b.add_argument("--theta", type=float, default=0.05)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=".")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return run_experiment(cfg, args.mode, args.seed, args.out, args.dump_circuits)
        if args.dim < 2:
            raise ConfigError("dim must be at least 2", "dim")
        report = bound_report(args.preset, args.dim, args.samples, args.seed, args.channels, args.theta)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bound_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(json.dumps(report, sort_keys=True))
        violated = report.get("constant_16_violations", 0) or report.get("constant_16_satisfied") is False
        return EXIT_INVARIANT if violated else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeakLGError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
