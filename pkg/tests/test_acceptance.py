"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected in the terminal summary.
"""

from __future__ import annotations

import json
import math
import time
from itertools import combinations

import numpy as np

from mfmkit import (
    Cluster,
    CumulantTensor,
    FidelityMatrix,
    NoiseModel,
    QubitLayout,
    SubsystemSelection,
    build_mfm,
    circuit_cost,
    cli,
    cumulant3,
    delta_f,
    dist_from_identity,
    extract_with_spectators,
    full_mfm_experiment,
    io,
    marginalize,
    reconstruct_order2,
    scf,
    tensor_product,
    true_mfm,
)
from mfmkit.analysis import MFMPool, block_scf
from mfmkit.mitigate import forward, total_variation
from mfmkit.simdevice import subsystem_experiment

from oracles import (
    bits,
    combos,
    confusion,
    correlated_pair,
    kron_loops,
    partition_sum,
    pick,
    stochastic,
)

N_S = 8192


def _sel(layout, qubits):
    return SubsystemSelection.of_qubits(layout, qubits)


def _sign_pattern(i: int, j: int) -> int:
    return (-1) ** bin(i ^ j).count("1")


# -- 1 ---------------------------------------------------------------------------


def test_criterion_01_cost_table(record_criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    table = {
        (5, "full"): 32,
        (5, "singles"): 10,
        (5, "pairs"): 40,
        (5, "split(2)"): 12,
        (5, "split(1)"): 18,
    }
    got = {key: circuit_cost(*key) for key in table}
    csv_path = tmp_path / "curves.csv"
    rc = cli.main(["cost", "--curves", "20", "-o", str(csv_path)])
    rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
    ns = [int(r[0]) for r in rows]
    full = {int(r[0]): int(r[1]) for r in rows}
    pairs = {int(r[0]): int(r[2]) for r in rows}
    triples = {int(r[0]): int(r[3]) for r in rows}
    pair_cross = min(n for n in ns if n >= 2 and all(pairs[m] < full[m] for m in ns if m >= n))
    triple_cross = min(n for n in ns if n >= 3 and all(triples[m] < full[m] for m in ns if m >= n))
    # independent recount of the crossovers
    want_pair = min(n for n in range(2, 21) if all(4 * math.comb(m, 2) < 2**m for m in range(n, 21)))
    want_triple = min(n for n in range(3, 21) if all(8 * math.comb(m, 3) < 2**m for m in range(n, 21)))
    elapsed = time.perf_counter() - t0
    ok = (
        got == table
        and rc == 0
        and ns == list(range(1, 21))
        and pair_cross == want_pair == 6
        and triple_cross == want_triple == 10
        and elapsed < 1.0
    )
    record_criterion(1, "cost table", ok, f"pairs<full from n={pair_cross}, triples<full from n={triple_cross}, {elapsed:.2f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------


def test_criterion_02_white_noise_bound(record_criterion):
    t0 = time.perf_counter()
    errs = []
    for n in range(1, 7):
        U = FidelityMatrix.uniform(QubitLayout(range(n)))
        errs.append(abs(dist_from_identity(U) - math.sqrt(2**n - 1)))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-9 and elapsed < 1.0
    record_criterion(2, "white-noise bound", ok, f"max err {max(errs):.1e}, {elapsed:.2f}s")
    assert ok


# -- 3 ---------------------------------------------------------------------------


def _random_order2_instance(rng):
    """Arbitrary single kernels and pair cumulants whose single-qubit sums vanish row by row."""
    singles = {(p,): stochastic(rng, 2) for p in range(3)}
    pairs = {}
    for pr in combos(3, 2):
        scale = rng.uniform(-0.05, 0.05, 4)
        pairs[pr] = np.array([[scale[i] * _sign_pattern(i, j) for j in range(4)] for i in range(4)])
    return singles, pairs


def test_criterion_03_cumulant_exactness(record_criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst_recon, worst_l3 = 0.0, 0.0
    layout = QubitLayout([0, 1, 2])
    for _ in range(50):
        singles, pairs = _random_order2_instance(rng)
        blocks = {**singles, **pairs}
        oracle = partition_sum(blocks, 3, 2)
        # the brute-force inversion with lambda_3 = 0 is a closed form too; both must agree
        closed = np.zeros((8, 8))
        for i in range(8):
            for j in range(8):
                si, sj = bits(i, 3), bits(j, 3)
                p = [singles[(q,)][int(si[q]), int(sj[q])] for q in range(3)]
                lam = {pr: pairs[pr][int(pick(si, pr), 2), int(pick(sj, pr), 2)] for pr in pairs}
                closed[i, j] = p[0] * p[1] * p[2] + lam[(0, 1)] * p[2] + lam[(1, 2)] * p[0] + lam[(0, 2)] * p[1]
        assert np.abs(oracle - closed).max() < 1e-14
        K = reconstruct_order2(
            [CumulantTensor(QubitLayout([q]), singles[(q,)]) for q in range(3)],
            [CumulantTensor(QubitLayout(list(pr)), pairs[pr]) for pr in pairs],
            layout,
        )
        worst_recon = max(worst_recon, np.abs(K.entries - oracle).max())
        sub = lambda qs: marginalize(K, _sel(layout, qs))
        lam3 = cumulant3(K, [sub(list(pr)) for pr in combos(3, 2)], [sub([q]) for q in range(3)])
        worst_l3 = max(worst_l3, np.abs(lam3.values).max())
    elapsed = time.perf_counter() - t0
    ok = worst_recon <= 1e-12 and worst_l3 <= 1e-10 and elapsed < 5.0
    record_criterion(3, "cumulant exactness", ok, f"recon err {worst_recon:.1e}, max|lambda3| {worst_l3:.1e}, {elapsed:.2f}s")
    assert ok


# -- 4 ---------------------------------------------------------------------------


def test_criterion_04_independence_gives_zero_scf(record_criterion):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        wa, wb = rng.integers(1, 3, 2)
        A = FidelityMatrix(QubitLayout(range(wa)), stochastic(rng, 2**wa))
        B = FidelityMatrix(QubitLayout(range(wa, wa + wb)), stochastic(rng, 2**wb))
        _, norm = scf(tensor_product([A, B]), A, B)
        worst = max(worst, norm)
    quiet = 0
    layout = QubitLayout([0, 1])
    for seed in range(200):
        model = NoiseModel.independent(layout, [confusion(rng), confusion(rng)])
        pool = MFMPool([build_mfm(full_mfm_experiment(model, n_s=N_S, seed=seed), layout)])
        r = block_scf(pool, (0,), (1,))
        quiet += r.report.scf <= r.report.sigma_scf
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and quiet >= 190 and elapsed < 30.0
    record_criterion(4, "independence gives zero SCF", ok, f"exact max {worst:.1e}, sampled {quiet}/200 within sigma, {elapsed:.1f}s")
    assert ok


# -- 5 ---------------------------------------------------------------------------


def _five_qubit_correlated_model(rng, pair=(1, 3), c=0.0125):
    layout = QubitLayout(range(5))
    joint = FidelityMatrix(QubitLayout(pair), correlated_pair(confusion(rng, 0.94, 0.98), confusion(rng, 0.94, 0.98), c))
    # every qubit shares the pair's fidelity range; the rule's false-positive rate grows quickly below 0.94
    clusters = [Cluster(joint)] + [
        Cluster(FidelityMatrix(QubitLayout([q]), confusion(rng, 0.94, 0.98))) for q in layout.qubits if q not in pair
    ]
    return NoiseModel(layout, tuple(clusters))


def test_criterion_05_correlation_detection(record_criterion, tmp_path, capsys):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    model = _five_qubit_correlated_model(rng)
    injected = np.linalg.norm(true_mfm(model, _sel(model.layout, [1, 3])).entries - kron_loops(
        true_mfm(model, _sel(model.layout, [1])).entries, true_mfm(model, _sel(model.layout, [3])).entries))
    model_path = tmp_path / "model.json"
    io.save_model(model_path, model)
    hits = 0
    for seed in range(100):
        out = tmp_path / f"s{seed}"
        cli.main(["simulate", str(model_path), "--experiment", "pairs-with-spectators", "--seed", str(seed), "-o", str(out)])
        capsys.readouterr()
        report, heat = out / "scf.json", out / "heat.csv"
        cli.main(["scf", *map(str, sorted(out.glob("pair_*.json"))), "--layout", "0,1,2,3,4", "--heatmap", str(heat), "-o", str(report)])
        doc = json.loads(report.read_text())
        labels, H = io.read_heatmap(heat)
        i, j = np.unravel_index(np.argmax(H), H.shape)
        top = {labels[i], labels[j]}
        hits += doc["significant"] == [["1", "3"]] and top == {1, 3}
    elapsed = time.perf_counter() - t0
    ok = abs(injected - 0.05) < 1e-12 and hits >= 95 and elapsed < 60.0
    record_criterion(5, "correlation detection", ok, f"injected {injected:.3f}, {hits}/100 seeds exact, {elapsed:.1f}s")
    assert ok


# -- 6 ---------------------------------------------------------------------------


def test_criterion_06_per_state_decomposition(record_criterion, tmp_path, capsys):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    Ka, Kb = confusion(rng, 0.94, 0.98), confusion(rng, 0.94, 0.98)
    base = FidelityMatrix(QubitLayout([0, 1]), kron_loops(Ka, Kb))
    excited = FidelityMatrix(QubitLayout([0, 1]), correlated_pair(Ka, Kb, 0.0125))
    layout = QubitLayout(range(4))
    model = NoiseModel(
        layout,
        (Cluster(base, excited),) + tuple(Cluster(FidelityMatrix(QubitLayout([q]), confusion(rng))) for q in (2, 3)),
    )
    model_path = tmp_path / "model.json"
    io.save_model(model_path, model)
    larger = 0
    for seed in range(100):
        out = tmp_path / f"s{seed}"
        cli.main(["simulate", str(model_path), "--experiment", "pairs-with-spectators", "--seed", str(seed), "-o", str(out)])
        capsys.readouterr()
        cli.main(["scf", str(out / "pair_0-1.json"), "--clusters", "0;1", "--per-state", "-o", str(out / "scf.json")])
        per_state = json.loads((out / "scf.json").read_text())["results"][0]["per_state"]
        larger += per_state["11"]["scf"] > per_state["00"]["scf"]
    elapsed = time.perf_counter() - t0
    ok = larger >= 95 and elapsed < 60.0
    record_criterion(6, "per-state decomposition", ok, f"lambda(11) > lambda(00) in {larger}/100 seeds, {elapsed:.1f}s")
    assert ok


# -- 7 ---------------------------------------------------------------------------


def test_criterion_07_spectator_extraction(record_criterion):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    layout = QubitLayout(range(4))
    inside, total = 0, 0
    for seed in range(100):
        model = NoiseModel.independent(layout, [confusion(rng) for _ in range(4)])
        for pr in combinations(range(4), 2):
            sel = _sel(layout, pr)
            K = extract_with_spectators(subsystem_experiment(model, sel, N_S, seed), sel)
            p = true_mfm(model, sel).entries
            sd = np.sqrt(p * (1 - p) / N_S)
            inside += int(np.sum(np.abs(K.entries - p) <= 3 * sd))
            total += p.size
    elapsed = time.perf_counter() - t0
    frac = inside / total
    ok = frac >= 0.99 and elapsed < 60.0
    record_criterion(7, "spectator extraction", ok, f"{100 * frac:.2f}% of {total} entries within 3 sigma, {elapsed:.1f}s")
    assert ok


# -- 8 ---------------------------------------------------------------------------


def test_criterion_08_mitigation_round_trip(record_criterion, tmp_path):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    layout = QubitLayout(range(4))
    model = NoiseModel.independent(layout, [confusion(rng) for _ in range(4)])
    K = true_mfm(model)
    kp = tmp_path / "K.json"
    io.save_matrix(kp, K)
    sampled = build_mfm(full_mfm_experiment(model, n_s=100_000, seed=8), layout)
    sp = tmp_path / "K_sampled.json"
    io.save_matrix(sp, sampled)
    exact_err, worst_tv = 0.0, 0.0
    for k in range(20):
        ideal = rng.dirichlet(np.ones(16) * 0.5)
        dp = tmp_path / f"obs{k}.json"
        io.save_distribution(dp, layout, forward(K, ideal))
        for kernel, name in ((kp, "exact"), (sp, "sampled")):
            out = tmp_path / f"{name}{k}.json"
            assert cli.main(["mitigate", str(dp), "--kernel", str(kernel), "--method", "solve", "-o", str(out)]) == 0
            got = np.array(json.loads(out.read_text())["probs"])
            if name == "exact":
                exact_err = max(exact_err, np.abs(got - ideal).max())
            else:
                worst_tv = max(worst_tv, total_variation(got, ideal))
    elapsed = time.perf_counter() - t0
    ok = exact_err <= 1e-9 and worst_tv <= 0.02 and elapsed < 30.0
    record_criterion(8, "mitigation round trip", ok, f"exact err {exact_err:.1e}, sampled TV {worst_tv:.4f}, {elapsed:.1f}s")
    assert ok


# -- 9 ---------------------------------------------------------------------------


def test_criterion_09_convergence_ordering(record_criterion):
    t0 = time.perf_counter()
    seeds = range(60)
    lines, ok = [], True
    for f in (0.92, 0.95):
        conf = np.array([[f, 1 - f], [1 - f, f]])
        gaps = {}
        for n in range(4, 9):
            layout = QubitLayout(range(n))
            model = NoiseModel.independent(layout, conf)
            K_I = true_mfm(model).entries
            measured, recon = [], []
            for seed in seeds:
                K = build_mfm(full_mfm_experiment(model, n_s=N_S, seed=seed), layout)
                singles = [
                    build_mfm(full_mfm_experiment(model, QubitLayout([q]), n_s=N_S, seed=seed), QubitLayout([q]))
                    for q in layout.qubits
                ]
                measured.append(np.linalg.norm(K.entries - K_I))
                recon.append(np.linalg.norm(tensor_product(singles).entries - K_I))
            m, r = float(np.median(measured)), float(np.median(recon))
            gaps[n] = m - r
            ok &= r < m
        ok &= gaps[4] < gaps[6] < gaps[8]
        lines.append(f"f={f}: gap " + " ".join(f"{gaps[n]:.4f}" for n in (4, 6, 8)))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300.0
    record_criterion(9, "convergence ordering", ok, "; ".join(lines) + f", {elapsed:.1f}s")
    assert ok


# -- 10 --------------------------------------------------------------------------


def test_criterion_10_metric_relation(record_criterion):
    rng = np.random.default_rng(10)
    t0 = time.perf_counter()
    violations = 0
    for k in range(1000):
        n = int(rng.integers(1, 6))
        K = FidelityMatrix(QubitLayout(range(n)), stochastic(rng, 2**n, diag_weight=float(rng.choice([0, 1, 10, 100]))))
        I = FidelityMatrix.identity(K.layout)
        violations += delta_f(K, I) * math.sqrt(2**n) > dist_from_identity(K) + 1e-12
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10.0
    record_criterion(10, "metric relation", ok, f"{violations} violations in 1000, {elapsed:.2f}s")
    assert ok
