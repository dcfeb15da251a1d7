"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured numbers (run with -s to see them live).

Criteria run against the public API and CLI only; expected values come
from independent brute-force oracles defined in the module tests.
"""

import json
import math
import threading
import time

import numpy as np

from falsify_kit import cli, protocol, sims
from falsify_kit.falsify import InProcessSim, RunConfig, SocketSim, replay, run
from falsify_kit.kernels import halton_block
from falsify_kit.mtl import robustness, satisfies
from falsify_kit.samplers import BayesOptSampler, CrossEntropySampler, Feedback
from falsify_kit.space import Box, Point, Struct, build_space
from falsify_kit.table import ErrorTable

from test_mtl import oracle_rho, oracle_sat, random_formula, random_trace
from test_samplers import radical_inverse_oracle

CARTPOLE_PROPERTY = "G(x <= 2.4 & x >= -2.4 & theta_deg <= 12 & theta_deg >= -12)"


def cartpole_space():
    return build_space(Struct({
        "x0": Box([-0.5], [0.5]),
        "theta0": Box([-0.1], [0.1]),
        "pole_mass": Box([0.05], [0.5]),
        "pole_half_length": Box([0.25], [1.0]),
    }))


def cartpole_config(seed, sampler, budget=1000, stop_on_first=False):
    return RunConfig(space=cartpole_space(), prop=CARTPOLE_PROPERTY,
                     sampler=sampler, mode="falsify", budget=budget, seed=seed,
                     simulator=InProcessSim("cartpole"), stop_on_first=stop_on_first)


def test_c01_cartpole_falsification_rate_and_runtime():
    # warm the jitted kernel once so the timed window measures the runs
    sims.cartpole_trace(0.0, 0.0, 0.1, 0.5, steps=1)
    started = time.perf_counter()
    counts = [len(run(cartpole_config(seed, {"kind": "uniform"})).counterexamples)
              for seed in range(20)]
    elapsed = time.perf_counter() - started
    in_band = sum(1 for c in counts if 10 <= c <= 500)
    print(f"\nACCEPTANCE cartpole-falsification: counts={counts} "
          f"in-band={in_band}/20 elapsed={elapsed:.1f}s")
    assert in_band >= 18
    assert elapsed < 60.0
    print("ACCEPTANCE cartpole-falsification: PASS")


def test_c02_active_beats_passive():
    def first_violation_median(sampler):
        firsts = []
        for seed in range(20):
            r = run(cartpole_config(seed, sampler, stop_on_first=True))
            firsts.append(r.simulations_used if len(r.counterexamples) else
                          r.simulations_used + 1)
        return float(np.median(firsts))

    med_uniform = first_violation_median({"kind": "uniform"})
    med_ce = first_violation_median({"kind": "cross_entropy", "batch": 20})
    print(f"\nACCEPTANCE active-beats-passive: median sims-to-first "
          f"cross_entropy={med_ce} uniform={med_uniform}")
    assert med_ce <= med_uniform
    print("ACCEPTANCE active-beats-passive: PASS")


def test_c03_mtl_oracle_equivalence():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    checked_signs = 0
    for _ in range(1000):
        phi = random_formula(rng, 4)
        tr = random_trace(rng)
        i = int(rng.integers(len(tr)))
        rho = robustness(phi, tr, i)
        assert rho == oracle_rho(phi, tr, i)
        sat = satisfies(phi, tr, i)
        assert sat == oracle_sat(phi, tr, i)
        if rho != 0:
            checked_signs += 1
            assert (rho > 0) == sat
    elapsed = time.perf_counter() - started
    print(f"\nACCEPTANCE mtl-oracle-equivalence: 1000 formulas exact, "
          f"{checked_signs} sign checks, {elapsed:.1f}s")
    assert elapsed < 10.0
    print("ACCEPTANCE mtl-oracle-equivalence: PASS")


def test_c04_halton_correctness():
    bases = (2, 3, 5)
    block = halton_block(1, 1000, np.asarray(bases, dtype=np.int64))
    for k in range(1000):
        for d, base in enumerate(bases):
            assert block[k, d] == radical_inverse_oracle(k + 1, base)
    pts = halton_block(1, 256, np.asarray([2, 3], dtype=np.int64))
    worst = 0.0
    for k in (1, 2, 3):
        edge = 2.0 ** -k
        count = int(np.sum((pts[:, 0] < edge) & (pts[:, 1] < edge)))
        expected = 256 * edge * edge
        worst = max(worst, abs(count - expected))
        assert abs(count - expected) <= 2
    print(f"\nACCEPTANCE halton-correctness: 1000x3 exact, dyadic-box "
          f"max deviation {worst}")
    print("ACCEPTANCE halton-correctness: PASS")


def test_c05_cross_entropy_convergence():
    space = build_space(Box([0.0] * 3, [1.0] * 3))
    wins = 0
    for seed in range(20):
        sampler = CrossEntropySampler(space, np.random.default_rng(seed),
                                      batch_size=20)
        best = math.inf
        for _ in range(30 * 20):
            p = sampler.next_point()
            x = np.array([p.value(str(i)) for i in range(3)])
            f = float(np.sum((x - 0.3) ** 2))
            best = min(best, f)
            sampler.observe(Feedback(p, f))
            if best < 1e-3:
                break
        wins += best < 1e-3
    print(f"\nACCEPTANCE cross-entropy-convergence: {wins}/20 seeds reached "
          f"f<1e-3 within 30 batches")
    assert wins >= 18
    print("ACCEPTANCE cross-entropy-convergence: PASS")


def test_c06_bayesian_optimization():
    space = build_space(Box([0.0], [1.0]))
    grid = np.linspace(0.0, 1.0, 100001)
    grid_optimum = float(np.min((grid - 0.7) ** 2 + 0.3 * np.sin(12 * grid)))
    bests = []
    for seed in range(10):
        sampler = BayesOptSampler(space, np.random.default_rng(seed))
        best = math.inf
        for _ in range(60):
            p = sampler.next_point()
            x = p.value("0")
            y = (x - 0.7) ** 2 + 0.3 * math.sin(12 * x)
            best = min(best, y)
            sampler.observe(Feedback(p, y))
        bests.append(best)
    median_best = float(np.median(bests))
    gap = median_best - grid_optimum
    print(f"\nACCEPTANCE bayesian-optimization: median best {median_best:.6f} "
          f"vs grid optimum {grid_optimum:.6f} (gap {gap:.2e})")
    assert gap <= 1e-2
    print("ACCEPTANCE bayesian-optimization: PASS")


def test_c07_pca_recovery():
    rng = np.random.default_rng(314)
    angle = math.radians(30.0)
    u = np.array([math.cos(angle), math.sin(angle)])
    v = np.array([-math.sin(angle), math.cos(angle)])
    space = build_space(Box([-10.0, -10.0], [10.0, 10.0]))
    table = ErrorTable(space)
    for i in range(200):
        z = rng.standard_normal(2)
        xy = z[0] * 1.0 * u + z[1] * (1.0 / math.sqrt(20.0)) * v
        table.insert(Point({"0": float(xy[0]), "1": float(xy[1])}), -1.0, i)
    report = table.pca_analyze()
    first = report.components[0]
    degrees_off = math.degrees(math.acos(min(1.0, abs(float(np.dot(first, u))))))
    orth = float(np.max(np.abs(report.components @ report.components.T - np.eye(2))))
    print(f"\nACCEPTANCE pca-recovery: first component {degrees_off:.3f} degrees "
          f"off truth, orthonormality residual {orth:.1e}")
    assert degrees_off <= 5.0
    assert orth < 1e-9
    print("ACCEPTANCE pca-recovery: PASS")


def test_c08_protocol_equivalence():
    seed, budget = 11, 100
    in_proc = run(cartpole_config(seed, {"kind": "uniform"}, budget=budget))

    import socket
    with socket.create_server(("127.0.0.1", 0)) as probe:
        port = probe.getsockname()[1]
    signature = protocol.space_signature(cartpole_space())

    def client():
        simulate = sims.make_simulator("cartpole", {})
        for _ in range(200):
            try:
                protocol.serve_simulator("127.0.0.1", port, signature, simulate)
                return
            except ConnectionRefusedError:
                time.sleep(0.05)

    thread = threading.Thread(target=client, daemon=True)
    thread.start()
    config = cartpole_config(seed, {"kind": "uniform"}, budget=budget)
    config.simulator = SocketSim("127.0.0.1", port, timeout=60.0)
    via_socket = run(config)
    thread.join(timeout=10)

    scores_a = [r.score for r in in_proc.all_runs]
    scores_b = [r.score for r in via_socket.all_runs]
    assert scores_a == scores_b
    assert len(in_proc.counterexamples) == len(via_socket.counterexamples)
    print(f"\nACCEPTANCE protocol-equivalence: {budget} runs identical "
          f"({len(in_proc.counterexamples)} counterexamples each)")
    print("ACCEPTANCE protocol-equivalence: PASS")


def test_c09_cli_determinism(tmp_path):
    config = {
        "space": {"domain": {"struct": {
            "x0": {"box": [[-0.5, 0.5]]}, "theta0": {"box": [[-0.1, 0.1]]},
            "pole_mass": {"box": [[0.05, 0.5]]},
            "pole_half_length": {"box": [[0.25, 1.0]]}}}},
        "property": CARTPOLE_PROPERTY,
        "sampler": {"kind": "uniform"},
        "mode": "falsify", "budget": 150, "seed": 9,
        "simulator": {"kind": "in_process", "name": "cartpole", "params": {}},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    rc1 = cli.main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
    rc2 = cli.main(["run", "--config", str(path), "--out", str(tmp_path / "b")])
    assert rc1 == rc2
    table_a = (tmp_path / "a" / "error_table.csv").read_bytes()
    table_b = (tmp_path / "b" / "error_table.csv").read_bytes()
    summary_a = (tmp_path / "a" / "summary.json").read_bytes()
    summary_b = (tmp_path / "b" / "summary.json").read_bytes()
    assert table_a == table_b
    assert summary_a == summary_b
    print(f"\nACCEPTANCE cli-determinism: error_table.csv ({len(table_a)} bytes) "
          f"and summary.json ({len(summary_a)} bytes) byte-identical")
    print("ACCEPTANCE cli-determinism: PASS")


def test_c10_synthesis_mode():
    space = build_space(Struct({
        "kx": Box([-10.0], [0.0]), "kxd": Box([-15.0], [0.0]),
        "kth": Box([-120.0], [-10.0]), "kthd": Box([-40.0], [0.0]),
    }))
    config = RunConfig(space=space, prop="G(margin > 0)",
                       sampler={"kind": "cross_entropy", "batch": 20},
                       mode="synthesize", budget=500, seed=0,
                       simulator=InProcessSim("cartpole_gains"),
                       stop_on_first=True,
                       objective={"kind": "robustness", "property": "G(margin > 0)"})
    result = run(config)
    assert len(result.counterexamples) >= 1
    row = result.counterexamples.rows[0]
    gains_point = result.counterexamples.row_point(row)
    _, score, _ = replay(config, gains_point)
    worst_margin = -score
    assert worst_margin > 0
    assert result.simulations_used <= 500
    print(f"\nACCEPTANCE synthesis-mode: safe gains found in "
          f"{result.simulations_used} simulations, worst-case grid margin "
          f"{worst_margin:.3f}")
    print("ACCEPTANCE synthesis-mode: PASS")
