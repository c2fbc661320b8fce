"""End-to-end acceptance criteria 1-14, each printing one PASS/FAIL line.

Fixed seeds throughout; Monte Carlo criteria are judged at the stated sigma
bands.  Criterion 12's cross-tail half is a known failure at the stated
guard constant and is kept as a strict xfail so it keeps printing FAIL.
"""

import math
import time

import numpy as np
import pytest

from quermass import bodies, experiments as ex, functionals as fn


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail, elapsed, budget):
        with capsys.disabled():
            print(f"\n[acceptance] criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f}s, budget {budget}s)")

    return emit


def run(name, params, seed=0, workers=1):
    return ex.run(ex.ExperimentConfig(name, params, seed, workers), write=False)


def test_criterion_01_ball_exactness(report):
    t = time.perf_counter()
    worst = 0.0
    for n in range(3, 9):
        for k in range(1, n + 1):
            exact = bodies.unit_ball_volume(n) ** (-1 / n) * bodies.unit_ball_volume(k) ** (1 / k)
            e = fn.phi_k(bodies.ball(n), k, m=fn.MIN_M, rng=0)
            assert e.stderr == 0.0
            worst = max(worst, abs(e.value - exact))
    example = fn.phi_k(bodies.ball(4), 2, m=fn.MIN_M).value
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-10 and abs(example - 2**0.25) <= 1e-10 and elapsed < 1
    report("1 ball exactness", ok, f"max |err| {worst:.1e}, Phi_[2](B_2^4) = {example:.5f}", elapsed, 1)
    assert ok


def test_criterion_02_partition_subspace(report):
    t = time.perf_counter()
    rep = run("cross-partition", {"n_max": 16, "k_max": 5, "rtol": 1e-9})
    worst = max(r["ratios"]["rel_err"] for r in rep.rows)
    ex_row = next(r for r in rep.rows if r["params"] == {"n": 10, "k": 2})
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-9 and abs(ex_row["estimates"]["hull"] - 0.4) <= 4e-10 and len(rep.rows) == 70 and elapsed < 10
    report("2 partition subspace", ok, f"{len(rep.rows)} (n,k) pairs, max rel err {worst:.1e}, n=10 k=2 -> {ex_row['estimates']['hull']:.12f}", elapsed, 10)
    assert ok


def test_criterion_03_kubota_identity(report):
    t = time.perf_counter()
    zs = []
    for n, k, beta, N in [(4, 2, 0.0, 12), (4, 2, 1.0, 12), (5, 2, 1.0, 8), (3, 1, 0.0, 8)]:
        rep = run("kubota-identity", {"n": n, "k": k, "beta": beta, "N": N, "trials": 10_000}, seed=7)
        zs.append(rep.rows[0]["ratios"]["z"])
    elapsed = time.perf_counter() - t
    ok = all(abs(z) <= 3 for z in zs) and elapsed < 120
    report("3 Kubota identity", ok, "z = " + ", ".join(f"{z:+.2f}" for z in zs), elapsed, 120)
    assert ok


GRID = [(5, 2.0), (3, 0.0), (8, -0.5)]


def test_criterion_04_beta_marginal_and_bounds(report):
    t = time.perf_counter()
    zs = []
    for i, (n, beta) in enumerate(GRID):
        rep = run("beta-marginal", {"n": n, "beta": beta, "d_list": [0.1, 0.3, 0.6], "samples": 100_000}, seed=11 + i)
        zs += [r["ratios"]["z"] for r in rep.rows if r["kind"] == "result"]
    bounds = run("beta-bounds", {"n_list": [5, 3, 8], "beta_list": [2.0, 0.0, -0.5], "grid": 99})
    bounded = all(r["pass"] for r in bounds.rows)
    elapsed = time.perf_counter() - t
    ok = all(abs(z) <= 3 for z in zs) and bounded and elapsed < 60
    report("4 beta marginal + bounds", ok, f"max |z| {max(map(abs, zs)):.2f} over {len(zs)} cells, bounds strict: {bounded}", elapsed, 60)
    assert ok


def test_criterion_05_radial_law(report):
    t = time.perf_counter()
    ps = []
    for i, (n, beta) in enumerate(GRID):
        rep = run("beta-marginal", {"n": n, "beta": beta, "d_list": [0.5], "samples": 10, "ks_samples": 10_000}, seed=21 + i)
        ps.append(next(r for r in rep.rows if r["kind"] == "radial-ks")["estimates"]["p_value"])
    elapsed = time.perf_counter() - t
    ok = min(ps) >= 0.01 and elapsed < 10
    report("5 radial law KS", ok, "p = " + ", ".join(f"{p:.3f}" for p in ps), elapsed, 10)
    assert ok


def test_criterion_06_cone_moment(report):
    t = time.perf_counter()
    row = run("cone-moment", {"body": "cube", "n": 3, "q": 2.0, "samples": 100_000}, seed=31).rows[0]
    elapsed = time.perf_counter() - t
    ok = row["estimates"]["target"] == pytest.approx(1 / 12) and abs(row["ratios"]["z"]) <= 3 and elapsed < 10
    report("6 cone moment", ok, f"{row['estimates']['cone_side']:.6f} vs 1/12, z {row['ratios']['z']:+.2f}", elapsed, 10)
    assert ok


def test_criterion_07_aleksandrov_chain(report):
    t = time.perf_counter()
    details, ok = [], True
    for body in ("cube", "cross"):
        rep = run("aleksandrov-monotonicity", {"body": body, "n": 5, "m": 5000}, seed=41)
        qs = [r["estimates"]["Q"] for r in rep.rows]
        zmax = max(r["ratios"]["z_violation"] for r in rep.rows[:-1])
        ok &= all(r["pass"] for r in rep.rows)
        details.append(f"{body} Q = " + ">".join(f"{q:.3f}" for q in qs) + f" (max z {zmax:+.1f})")
    elapsed = time.perf_counter() - t
    ok &= elapsed < 120
    report("7 Aleksandrov chain", ok, "; ".join(details), elapsed, 120)
    assert ok


def test_criterion_08_santalo(report):
    t = time.perf_counter()
    exact = all(4**n / math.factorial(n) <= bodies.unit_ball_volume(n) ** 2 for n in range(1, 13))
    rep = run("santalo-check", {"n_max": 12})
    elapsed = time.perf_counter() - t
    ok = exact and len(rep.rows) == 12 and all(r["pass"] for r in rep.rows) and elapsed < 1
    report("8 Santalo instance", ok, f"max ratio {max(r['ratios']['ratio'] for r in rep.rows):.6f} (n=1 is equality)", elapsed, 1)
    assert ok


def test_criterion_09_phi_ratio_band(report):
    t = time.perf_counter()
    rhos = []
    for body in ("cube", "cross"):
        for n in (6, 10):
            rep = run("phi-deterministic", {"body": body, "n": n, "k_list": [1, 2, 3, 4, 5], "m": 2000}, seed=51)
            rhos += [r["ratios"]["rho"] for r in rep.rows]
    elapsed = time.perf_counter() - t
    ok = all(0.5 <= r <= 4 for r in rhos) and len(rhos) == 20 and elapsed < 300
    report("9 Phi ratio band", ok, f"rho in [{min(rhos):.3f}, {max(rhos):.3f}]", elapsed, 300)
    assert ok


@pytest.mark.slow
def test_criterion_10_random_models(report):
    t = time.perf_counter()
    params = {"body": "cube", "n": 8, "N": 64, "k_list": [2, 4], "trials": 50, "m": 300, "rho_max": 6.0, "freq_min": 0.95}
    kn = run("phi-kn", params, seed=61)
    mn = run("phi-mn", params, seed=61)
    freqs = {f"{r['params']['model']} k={r['params'].get('k', 'vrad')}": r["estimates"]["frequency"] for r in kn.rows + mn.rows}
    elapsed = time.perf_counter() - t
    ok = len(freqs) == 5 and all(f >= 0.95 for f in freqs.values()) and elapsed < 600
    vrad_row = mn.rows[-1]["estimates"]
    report("10 random models", ok, ", ".join(f"{k}: {v:.2f}" for k, v in freqs.items()) + f"; vrad ratio max {vrad_row['ratio_max']:.2f}", elapsed, 600)
    assert ok


def test_criterion_11_subspace_stability(report):
    t = time.perf_counter()
    row = run("subspace-stability", {"n": 12, "k": 3, "trials": 100}, seed=71).rows[0]
    elapsed = time.perf_counter() - t
    ok = row["pass"] and row["params"]["eps"] == pytest.approx(1 / math.sqrt(12)) and elapsed < 60
    report("11 subspace stability", ok, f"0/100 violations; max vol_E/vol_F0 {row['ratios']['max_vol_E_over_vol_F0']:.3f} vs 27", elapsed, 60)
    assert ok


def test_criterion_12a_jl_frequency(report):
    t = time.perf_counter()
    row = run("jl-check", {"n": 16, "k": 8, "eps": 1.0, "draws": 200}, seed=81).rows[0]
    elapsed = time.perf_counter() - t
    ok = row["estimates"]["frequency"] >= 0.9 and elapsed < 30
    report("12a JL frequency", ok, f"frequency {row['estimates']['frequency']:.3f}", elapsed, 30)
    assert ok


@pytest.mark.xfail(strict=True, reason="ratio concentrates near 4.1 at n=16, k=4, so C_guard=4 is below the median; see README")
def test_criterion_12b_cross_tail(report):
    t = time.perf_counter()
    row = run("cross-tail", {"n": 16, "k": 4, "draws": 500, "c_guard": 4.0}, seed=82).rows[0]
    e = row["estimates"]
    elapsed = time.perf_counter() - t
    ok = e["frequency"] >= 0.95 and elapsed < 30
    report("12b cross-tail frequency", ok, f"frequency {e['frequency']:.3f} (ratio quantiles 5/50/95%: {e['ratio_q05']:.2f}/{e['ratio_median']:.2f}/{e['ratio_q95']:.2f})", elapsed, 30)
    assert ok


def test_criterion_13_w_kp_monotonicity(report):
    t = time.perf_counter()
    g = np.random.default_rng(91)
    ps = [-80.0, -20.0, -5.0, -1.0, 1.0, 5.0, 20.0, 80.0]
    exact = True
    for _ in range(50):
        v = np.exp(g.normal(0, 2, size=200))
        w = [fn.w_kp_from_volumes(v, 3, p, 0.0, n=10).value for p in ps]
        exact &= all(a <= b for a, b in zip(w, w[1:]))
    rep = run("w-kp-cross", {"n": 10, "k": 3, "p_list": [1.0, 5.0, 20.0, 80.0], "m": 2000}, seed=92)
    scaled = [r["ratios"]["scaled"] for r in rep.rows]
    elapsed = time.perf_counter() - t
    ok = exact and all(r["pass"] for r in rep.rows) and elapsed < 300
    report("13 W_[k,p] monotone in p", ok, f"same-sample exact: {exact}; W_[3,-p](B_1^10) sqrt(3/10) = " + " >= ".join(f"{s:.4f}" for s in scaled), elapsed, 300)
    assert ok


def test_criterion_14_determinism(report, tmp_path):
    t = time.perf_counter()
    cases = [
        ("kubota-identity", {"trials": 800}),
        ("phi-kn", {"n": 4, "N": 16, "k_list": [2], "trials": 6, "m": 100}),
        ("cross-tail", {"draws": 300}),
        ("w-kp-cross", {"m": 600}),
        ("beta-marginal", {"samples": 2000, "ks_samples": 500}),
    ]
    same = []
    for name, params in cases:
        blobs = []
        for workers in (1, 8):
            out = tmp_path / f"{name}-{workers}"
            ex.run(ex.ExperimentConfig(name, params, seed=5, workers=workers, output_dir=str(out)))
            blobs.append((out / "report.json").read_bytes())
        same.append(blobs[0] == blobs[1])
    elapsed = time.perf_counter() - t
    ok = all(same)
    report("14 determinism workers 1 vs 8", ok, f"{sum(same)}/{len(same)} experiments byte-identical", elapsed, 60)
    assert ok
