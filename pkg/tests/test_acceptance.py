"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line; run with ``pytest -s`` to see
them inline, they are also repeated in the terminal summary.
"""

import itertools
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from weaklg import sim, stats, weakmeas
from weaklg.gates import Circuit, Gate, compose_unitary, rotated_x, verify_identity
from weaklg.protocols import GateSetId, build_all_arms, build_weak_measurement, extract_kraus, ideal_predictions
from weaklg.qcore import X, Y, Z
from weaklg.sim import NoiseModel
from weaklg.stats import EstimateTable, RunPlan

R2 = 1 / math.sqrt(2)
GATESETS = list(GateSetId)


def report(number, name, ok, detail, elapsed=None):
    timing = "" if elapsed is None else f" [{elapsed:.2f} s]"
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name}: {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def exact_table(gateset, thetas, noise=None):
    arms = build_all_arms(gateset, thetas)
    d = {a.key: sim.exact_outcome_distribution(a, noise) for a in arms}
    return arms, d, stats.estimate_from_distributions(d, thetas)


# label in the time-ordered grammar with the weak-limit value it should reach
IDEAL_TARGETS = {"A": R2, "B": R2, "AB": 0.0, "BA": 0.0, "ABC": 0.5, "BAC": -0.5, "C": 0.0,
                 "BaC": R2, "AbC": -R2}


def richardson(f, h, levels=3):
    """Extrapolate ``f(h)`` to ``h -> 0`` assuming an even series in ``h``."""
    col = [f(h / 2 ** i) for i in range(levels)]
    for k in range(1, levels):
        col = [(4 ** k * col[i + 1] - col[i]) / (4 ** k - 1) for i in range(len(col) - 1)]
    return col[0]


def test_criterion_1_ideal_values():
    t0 = time.perf_counter()
    worst_limit = 0.0
    for label, want in IDEAL_TARGETS.items():
        got = richardson(lambda th: stats.theory_finite_strength(th).value(label), 0.04)
        worst_limit = max(worst_limit, abs(got - want))
    ideal = ideal_predictions()
    worst_limit = max(worst_limit, abs(ideal.value("BC") - R2), abs(ideal.value("AC") + R2))

    g = weakmeas.g_from_theta(0.1)
    closed = stats.closed_form_default(g, g)
    worst_circuit = 0.0
    for gs in GATESETS:
        _, _, t = exact_table(gs, (0.1, 0.1))
        worst_circuit = max(worst_circuit, max(abs(t.value(k) - v) for k, v in closed.items()))
    elapsed = time.perf_counter() - t0
    ok = worst_limit < 1e-9 and worst_circuit < 1e-10 and elapsed < 1.0
    report(1, "ideal values", ok,
           f"theta->0 limit dev {worst_limit:.2e} (tol 1e-9), circuits vs corrections {worst_circuit:.2e} (tol 1e-10)",
           elapsed)


def test_criterion_2_sampled_violation():
    t0 = time.perf_counter()
    shots = 1_000_000
    plan = RunPlan(1, shots, 1, 0.1)
    pe = stats.predicted_errors(plan)
    lg_err = math.sqrt(pe["Ab"] ** 2 + pe["aB"] ** 2 + pe["AB"] ** 2)
    order_err = math.sqrt(2) * pe["ABC"]
    theory = stats.theory_finite_strength(0.1)
    worst_lg, worst_order = math.inf, 0.0
    for gi, gs in enumerate(GATESETS):
        arms, d, _ = exact_table(gs, (0.1, 0.1))
        t = stats.weak_estimators(sim.sample_arms(arms, d, shots, seed=2024, stream=gi))
        worst_lg = min(worst_lg, (t.value("LG_AB") - 1) / lg_err, (t.value("LG_BA") - 1) / lg_err)
        worst_order = max(worst_order, abs(t.value("order") - theory.value("order")) / order_err)
    elapsed = time.perf_counter() - t0
    ok = worst_lg >= 5 and worst_order <= 5 and elapsed < 60
    report(2, "sampled LG/order", ok,
           f"min LG excess {worst_lg:.1f} sigma (need >= 5), max order deviation {worst_order:.2f} sigma (need <= 5)",
           elapsed)


def test_criterion_3_error_formula():
    plan = RunPlan.eagle()
    se = stats.standard_error(plan)
    arms, d, _ = exact_table("ECR_DOUBLE", (plan.theta, plan.theta))
    abc = np.array([stats.weak_estimators(sim.sample_arms(arms, d, plan.shots_per_circuit, seed)).value("ABC")
                    for seed in range(100)])
    ratio = abc.std(ddof=1) / se
    ok = abs(se - 0.0129) <= 5e-4 and abs(ratio - 1) <= 0.15
    report(3, "error formula", ok, f"standard_error {se:.5f} (0.0129 +- 0.0005), empirical/predicted {ratio:.3f}")


def test_criterion_4_povm_equivalence():
    ks = [extract_kraus(build_weak_measurement(gs, 0.1, 0, 1), 0, 1) for gs in GATESETS]
    pair_dev = max(weakmeas.povm_equivalence(a, b)["max_deviation"] for a, b in itertools.combinations(ks, 2))
    proj_dev = 0.0
    for gs in GATESETS:
        k = extract_kraus(build_weak_measurement(gs, math.pi / 2, 0, 1), 0, 1)
        for op, proj in zip(k.operators, (np.diag([1, 0]), np.diag([0, 1]))):
            proj_dev = max(proj_dev, float(np.max(np.abs(op.conj().T @ op - proj))))
    ok = pair_dev < 1e-10 and proj_dev < 1e-10
    report(4, "POVM equivalence", ok, f"pairwise {pair_dev:.2e}, projective limit {proj_dev:.2e} (tol 1e-10)")


def test_criterion_5_gate_identities():
    th = 0.37
    ecr = Gate("ECR", (0, 1))
    checks = {
        "ECR.ECR=I": verify_identity(Circuit(2, (ecr, ecr)), Circuit(2))["max_deviation"],
        "CX=(XI)(Z+I)ECR(IX-)": verify_identity(
            Circuit(2, (Gate("CX", (0, 1)),)),
            Circuit(2, (Gate("RX", (1,), -math.pi / 2), ecr, Gate("ZP", (0,)), Gate("X", (0,)))))["max_deviation"],
        "X=Y+ZY-": verify_identity(
            Circuit(1, (Gate("X", (0,)),)),
            Circuit(1, (Gate("YM", (0,)), Gate("RZ", (0,), math.pi), Gate("YP", (0,)))))["max_deviation"],
    }
    for s in (1, -1):
        rz = compose_unitary(Circuit(1, (Gate("RZ", (0,), s * math.pi / 4),)))
        conj = rz @ X @ rz.conj().T
        checks[f"X^{'+' if s > 0 else '-'}"] = max(float(np.max(np.abs(rotated_x(s) - (X + s * Y) * R2))),
                                                  float(np.max(np.abs(rotated_x(s) - conj))))
    u = compose_unitary(Circuit(2, (ecr, Gate("RZ", (1,), th), ecr)))
    checks["(ZY)_theta"] = float(np.max(np.abs(u - (math.cos(th / 2) * np.eye(4)
                                                      - 1j * math.sin(th / 2) * np.kron(Z, Y)))))
    worst = max(checks.values())
    report(5, "gate identities", worst < 1e-12, ", ".join(f"{k} {v:.1e}" for k, v in checks.items()))


def test_criterion_6_strong_limit():
    _, _, t = exact_table("CX_SINGLE", (math.pi / 2, math.pi / 2))
    strong = max(abs(t.value(k)) for k in ("AbC", "aB", "BaC", "bA"))
    grid = (0.1, 0.4, 0.9, math.pi / 2)
    worst = 0.0
    for gs, (ta, tb) in itertools.product(("ECR_DOUBLE", "RZZ_FRACTIONAL", "CZ_FRACRX"), itertools.product(grid, grid)):
        _, _, t = exact_table(gs, (ta, tb))
        want = 2 * (weakmeas.g_from_theta(tb) - weakmeas.g_from_theta(ta))
        worst = max(worst, abs(t.value("abC") - want), abs(t.value("baC") - want))
    ok = strong < 1e-10 and worst < 1e-10
    report(6, "strong limit", ok, f"g=1/4 zeros {strong:.2e}, 2(g_B-g_A) grid {worst:.2e} (tol 1e-10)")


def test_criterion_7_bound_sweep():
    t0 = time.perf_counter()
    sweep = weakmeas.theorem1_sweep(10_000, dims=(2, 3, 4), samples=64, seed=7)
    r = weakmeas.check_theorem1_bound(weakmeas.dichotomic_kraus_theta(Z, 0.05), samples=256)
    elapsed = time.perf_counter() - t0
    ok = (sweep["constant_16_violations"] == 0 and abs(r.saturation_16 - 1) <= 0.01
          and not r.constant_4_satisfied and elapsed < 120)
    report(7, "bound sweep", ok,
           f"{sweep['channels']} channels, constant-16 violations {sweep['constant_16_violations']}, "
           f"constant-4 violations {sweep['constant_4_violations']}, dichotomic saturation {r.saturation_16:.5f}, "
           f"constant-4 flag {not r.constant_4_satisfied}", elapsed)


def test_criterion_8_noise_plausibility():
    plan = RunPlan.heron()
    pe = stats.predicted_errors(plan)
    lg_err = math.sqrt(pe["Ab"] ** 2 + pe["aB"] ** 2 + pe["AB"] ** 2)
    details, ok = [], True
    for gs in ("CZ_FRACRX", "CZ_DOUBLE", "RZZ_FRACTIONAL"):
        base = NoiseModel.from_device("kingston", 0, gs)
        series = [exact_table(gs, (0.1, 0.1), base.scaled(f))[2].value("LG_AB") for f in range(1, 11)]
        sigma = (series[0] - 1) / lg_err
        monotone = all(b < a for a, b in zip(series, series[1:]))
        ok &= sigma >= 3 and monotone
        details.append(f"{gs} LG {series[0]:.4f} ({sigma:.1f} sigma) -> x10 {series[-1]:.4f} monotone={monotone}")
    report(8, "noise plausibility", ok, "; ".join(details))


def test_criterion_9_published_verdict():
    t = EstimateTable()
    t.add("LG_AB", 1.583, 0.025, "sampled")
    t.add("order", 1.190, 0.032, "sampled")
    res = stats.lg_and_order(t, threshold=5.0)
    ok = res["LG_AB"]["violated"] and res["order"]["violated"]
    report(9, "published verdict", ok,
           f"LG_AB {res['LG_AB']['sigma']:.1f} sigma, order {res['order']['sigma']:.1f} sigma (threshold 5)")
