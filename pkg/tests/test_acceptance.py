"""Acceptance criteria, each run at its stated tolerance and time budget."""
import itertools
import math
import random
import time

import numpy as np
import pytest

from grouptest import (
    BinaryCode,
    binomial_prior,
    disjunctive_errors,
    exponent_A,
    is_disjunctive_code,
    is_threshold_code,
    monte_carlo_errors,
    threshold_errors,
)
from grouptest.bounds import bound_disjunctive, solve_root_y
from grouptest.cli import main
from grouptest.ensemble import table2_experiment
from grouptest.evaluation import _threshold_rates, batch_profiles

from .oracles import naive_disjunctive_errors, naive_threshold_errors, random_code

REFERENCE_BOUNDS = {
    #   E_thr   tau     Q       E_s(0)  R_cr
    2: (0.1380, 0.2065, 0.1033, 0.3651, 0.2271),
    3: (0.0570, 0.1365, 0.0455, 0.2362, 0.1792),
    4: (0.0311, 0.1021, 0.0255, 0.1754, 0.1443),
    5: (0.0196, 0.0816, 0.0163, 0.1397, 0.1201),
    6: (0.0135, 0.0679, 0.0113, 0.1161, 0.1027),
    7: (0.0098, 0.0582, 0.0083, 0.0994, 0.0896),
    8: (0.0075, 0.0509, 0.0064, 0.0869, 0.0794),
}

# (t, N): (threshold max error, disjunctive alpha, winner)
REFERENCE_SIMULATION = {
    (15, 5): (0.1366, 0.4780, "threshold"),
    (15, 8): (0.0824, 0.3610, "threshold"),
    (15, 10): (0.0744, 0.2390, "threshold"),
    (15, 12): (0.0440, 0.1220, "threshold"),
    (15, 14): (0.0349, 0.0537, "threshold"),
    (15, 15): (0.0258, 0.0195, "disjunctive"),
    (20, 5): (0.1398, 0.5356, "threshold"),
    (20, 8): (0.0897, 0.4169, "threshold"),
    (20, 10): (0.0897, 0.3008, "threshold"),
    (20, 12): (0.0580, 0.1979, "threshold"),
    (20, 15): (0.0324, 0.0792, "threshold"),
}


def test_criterion_1_bounds_table(capsys, tmp_path, report):
    start = time.perf_counter()
    out_file = tmp_path / "table1.csv"
    assert main(["bounds", "--s-list", "2..8", "--output", str(out_file)]) == 0
    elapsed = time.perf_counter() - start
    lines = out_file.read_text().splitlines()
    assert lines[0] == "s,E_thr,tau,Q,E_s0,R_cr"
    worst = []
    ok = True
    for line in lines[1:]:
        s, *vals = line.split(",")
        want = REFERENCE_BOUNDS[int(s)]
        tols = (1e-3, 1e-2, 1e-2, 1e-3, 2e-3)
        errs = [abs(float(v) - w) for v, w in zip(vals, want)]
        worst.append(max(e / t for e, t in zip(errs, tols)))
        ok &= all(e <= t for e, t in zip(errs, tols))
    ok &= len(lines) == 8 and elapsed <= 120
    report("1 bounds table reproduction", ok,
           f"worst error/tolerance {max(worst):.2f}, {elapsed:.0f}s")
    assert ok


def test_criterion_2_zero_beyond_one_over_s(report):
    worst = 0.0
    for s in range(2, 9):
        for R in (1 / s, 1 / s + 0.1, 1.0):
            worst = max(worst, bound_disjunctive(s, R).value)
    ok = worst <= 1e-6
    report("2 disjunctive bound vanishes for R >= 1/s", ok, f"max value {worst:.2e}")
    assert ok


def test_criterion_3_A_identities(report):
    start = time.perf_counter()
    r = random.Random(3)
    worst_zero = worst_neg = worst_root = 0.0
    for _ in range(200):
        s, Q = r.randint(1, 10), r.uniform(0.005, 0.995)
        worst_zero = max(worst_zero, abs(exponent_A(s, Q, 1 - (1 - Q) ** s)))
        for q in np.linspace(Q, min(1.0, s * Q), 101):
            worst_neg = min(worst_neg, exponent_A(s, Q, float(q)))
            if s >= 2 and Q < q < s * Q:
                y = solve_root_y(s, Q, float(q))
                worst_root = max(worst_root, abs(Q * (1 - y**s) / (1 - y) - q))
    elapsed = time.perf_counter() - start
    ok = worst_zero <= 1e-9 and worst_neg >= -1e-9 and worst_root <= 1e-12 and elapsed < 60
    report("3 exponent identities", ok,
           f"|A at typical q| {worst_zero:.1e}, min A {worst_neg:.1e}, "
           f"root residual {worst_root:.1e}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_4_simulation_table(report):
    start = time.perf_counter()
    seeds = range(10)
    results = {key: [] for key in REFERENCE_SIMULATION}
    beta_zero = True
    for seed in seeds:
        for t, Ns in ((15, [5, 8, 10, 12, 14, 15]), (20, [5, 8, 10, 12, 15])):
            _, reports = table2_experiment(2, t, Ns, trials=1000, seed=seed)
            for N in Ns:
                thr = reports[(N, "threshold")].max_error
                dis = reports[(N, "disjunctive")]
                beta_zero &= dis.errors.beta == 0.0
                results[(t, N)].append((thr, dis.errors.alpha))
    elapsed = time.perf_counter() - start

    rows_ok = True
    for (t, N), (want_thr, want_dis, _) in REFERENCE_SIMULATION.items():
        got = results[(t, N)]
        thr_pass = sum(abs(a - want_thr) <= 0.02 for a, _ in got)
        dis_pass = sum(abs(b - want_dis) <= 0.01 for _, b in got)
        row_ok = thr_pass >= 8 and dis_pass >= 8
        rows_ok &= row_ok
        report(f"4 simulation row t={t} N={N}", row_ok,
               f"threshold {thr_pass}/10 near {want_thr}, disjunctive {dis_pass}/10 near {want_dis}; "
               f"disjunctive range {min(b for _, b in got):.4f}..{max(b for _, b in got):.4f}")

    winners_ok = True
    for (t, N), (_, _, want) in REFERENCE_SIMULATION.items():
        if t != 15:
            continue
        got = results[(t, N)]
        agree = sum(("threshold" if a < b else "disjunctive" if b < a else "tie") == want
                    for a, b in got)
        winners_ok &= agree == len(got)
        report(f"4 simulation winner t=15 N={N}", agree == len(got), f"{agree}/10 seeds pick {want}")

    ok = rows_ok and winners_ok and beta_zero and elapsed <= 600
    report("4 simulation statistical reproduction", ok,
           f"rows {'ok' if rows_ok else 'off'}, winners {'ok' if winners_ok else 'off'}, "
           f"beta zero {beta_zero}, {elapsed:.0f}s")
    assert ok


def test_criterion_5_zero_error_characterization(report):
    start = time.perf_counter()
    checked = mismatches = implication_failures = 0
    for N in range(1, 5):
        for t in range(2, 5):
            masks = np.array(list(itertools.product(range(1 << N), repeat=t)), dtype=np.int64)
            counts = batch_profiles(masks, N)
            codes = [BinaryCode(m, N) for m in masks.tolist()]
            for s in range(1, t):
                prior = binomial_prior(t, s)
                assert (prior.probs > 0).all()
                if N < 2:
                    continue
                alpha, beta = _threshold_rates(counts, s, prior)
                zero = np.maximum(alpha, beta) == 0.0
                for T in range(1, N):
                    for b, code in enumerate(codes):
                        thr = is_threshold_code(code, s, T)
                        checked += 1
                        mismatches += bool(zero[b, T - 1]) != thr
                        if thr and not is_disjunctive_code(code, s):
                            implication_failures += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and implication_failures == 0 and elapsed <= 60
    report("5 zero error iff threshold code", ok,
           f"{checked} cases, {mismatches} mismatches, "
           f"{implication_failures} implication failures, {elapsed:.0f}s")
    assert ok


def test_criterion_6_oracle_equivalence(report):
    start = time.perf_counter()
    r = random.Random(6)
    worst = 0.0
    worst_z = 0.0
    n = 10**6
    for i in range(100):
        t = r.randint(2, 12)
        N = r.randint(2, 10)
        code = random_code(r, N, t)
        s = r.randint(1, t - 1)
        T = r.randint(1, N - 1)
        prior = binomial_prior(t, s)
        probs = prior.probs.tolist()
        exact = threshold_errors(code, s, T, prior)
        a, b = naive_threshold_errors(code.masks, s, T, probs)
        worst = max(worst, abs(exact.alpha - float(a)), abs(exact.beta - float(b)))
        exact_d = disjunctive_errors(code, s, prior)
        a, b = naive_disjunctive_errors(code.masks, s, probs)
        worst = max(worst, abs(exact_d.alpha - float(a)), abs(exact_d.beta - float(b)))

        mc = monte_carlo_errors(code, s, prior, n, seed=i, T=T)
        mc_d = monte_carlo_errors(code, s, prior, n, seed=i, rule="disjunctive")
        for est, p in ((mc.alpha, exact.alpha), (mc.beta, exact.beta),
                       (mc_d.alpha, exact_d.alpha), (mc_d.beta, exact_d.beta)):
            se = math.sqrt(p * (1 - p) / n)
            z = 0.0 if est == p else (math.inf if se == 0 else abs(est - p) / se)
            worst_z = max(worst_z, z)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and worst_z <= 4 and elapsed <= 300
    report("6 exact vs naive oracle and Monte Carlo", ok,
           f"max exact deviation {worst:.1e}, max |z| {worst_z:.2f}, {elapsed:.0f}s")
    assert ok


def test_criterion_7_thread_determinism(tmp_path, report):
    args = ["simulate", "--s", "2", "--t", "12", "--N-list", "5,8,10", "--trials", "100",
            "--seed", "2024"]
    blobs = []
    for threads in (1, 2, 4):
        out = tmp_path / f"t{threads}.csv"
        assert main(args + ["--threads", str(threads), "--output", str(out)]) == 0
        blobs.append(out.read_bytes())
    again = tmp_path / "again.csv"
    assert main(args + ["--threads", "4", "--output", str(again)]) == 0
    blobs.append(again.read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    report("7 simulate output independent of threads", ok, f"{len(blobs)} runs compared")
    assert ok
