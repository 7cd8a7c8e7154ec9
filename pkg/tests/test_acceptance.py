"""Acceptance suite: ten end-to-end checks, one test per criterion.

Each test prints one `[criterion N] PASS/FAIL` line with the measured
numbers (run with `-s` to see the PASS lines stream). The SBM benchmark
used by criteria 5, 7, and 8 is built once in a module-scoped fixture;
it takes several minutes single-threaded.

Criterion 6 needs a real citation dataset on disk and is skipped unless
the GNDNETS_CORA_DIR environment variable points at a directory holding
edges.txt, features.csv, and labels.txt in the documented format.
"""

import json
import math
import os
import time

import numpy as np
import pytest

import conftest

from gndnets import (
    DatasetFiles,
    DiffusionSchedule,
    EarlyStopping,
    Graph,
    GraphOperators,
    HopSequence,
    Model,
    SbmConfig,
    SparseMatrix,
    SplitSpec,
    Tape,
    TrainConfig,
    default_config,
    fixed_diffuse,
    generate_sbm,
    hop_sequence,
    load_dataset,
    loss_value,
    run_experiment,
    sample_split,
    schedule_coefficients,
    spmm,
    train,
    transition_matrix,
)
from gndnets.cli import run as cli_run
from gndnets.diffusion import (
    DsDiffusion,
    MlpDiffusion,
    SlpDiffusion,
    ds_evolve,
    mlp_aggregate,
    slp_aggregate,
    taped_hops,
)
from gndnets.graph import add_self_loops

import oracles


def report(criterion, ok, detail):
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {criterion}] {status} — {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, f"criterion {criterion}: {detail}"


def graph_from_dense(adj, rng, d=4, n_classes=3):
    n = adj.shape[0]
    return Graph(SparseMatrix.from_dense(adj), rng.standard_normal((n, d)),
                 rng.integers(0, n_classes, size=n), n_classes)


# ---------------------------------------------------------------------------
# Criterion 1 — gradients of every variant vs central finite differences.


def test_criterion_01_gradient_oracle_suite():
    started = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    cases = [
        ("gnd_slp", {"K": 4, "r": 4}),
        ("gnd_slp", {"K": 2, "r": 3}),
        ("gnd_mlp", {"K": 3, "r": 3, "hidden_mlp": 4}),
        ("gnd_mlp", {"K": 4, "r": 2, "hidden_mlp": 5}),
        ("gnd_ds", {"K": 2, "r": 4, "T": 2}),
        ("gnd_ds", {"K": 3, "r": 3, "T": 1}),
        ("gcn", {"gcn_hidden": 4}),
        ("gcn", {"gcn_hidden": 3}),
        ("sgc", {"K": 4}),
        ("sgc", {"K": 1}),
    ]
    for variant, overrides in cases:
        n = int(rng.integers(5, 11))
        d = int(rng.integers(2, 6))
        adj = oracles.random_connected_adjacency(rng, n, 0.4)
        graph = graph_from_dense(adj, rng, d=d)
        config = default_config(variant, dropout=0.0, **overrides)
        model = Model(config, d, 3, rng)
        ops = GraphOperators.prepare(graph, config)
        mask = np.ones(n, dtype=bool)

        def loss():
            fp = model.forward(ops, training=False)
            return fp, fp.loss_node(graph.labels, mask, l2=1e-3)

        fp, node = loss()
        fp.tape.backward(node)
        for name, p in model.parameters():
            analytic = p.gradient.copy()
            numeric = oracles.central_difference(lambda: loss()[1].value[0, 0], p)
            err = oracles.max_relative_error(analytic, numeric)
            assert err < 1e-4, f"{variant}.{name}: rel err {err:.2e}"
            worst = max(worst, err)
    elapsed = time.perf_counter() - started
    report(1, worst < 1e-4 and elapsed < 60.0,
           f"max rel err {worst:.2e} over {len(cases)} variant instances "
           f"({elapsed:.1f}s < 60s)")


# ---------------------------------------------------------------------------
# Criterion 2 — power iteration converges to the stationary blend of the
# start vector, at the rate set by the second eigenvalue.


def test_criterion_02_power_iteration_convergence():
    rng = np.random.default_rng(1002)
    checked = 0
    attempts = 0
    worst_steps = 0
    worst_ratio_err = 0.0
    while checked < 20 and attempts < 500:
        attempts += 1
        n = int(rng.integers(10, 51))
        adj = oracles.random_connected_adjacency(rng, n, float(rng.uniform(0.1, 0.5)))
        w_dense = oracles.dense_transition(oracles.dense_self_loops(adj))
        spectrum = oracles.transition_spectrum(w_dense)
        lam2, lam3 = abs(spectrum[1]), abs(spectrum[2])
        # a single-rate fit only describes the decay when the second mode
        # clearly dominates the third and is neither instant nor stalled
        if not 0.05 <= lam2 <= 0.95 or lam3 > 0.8 * lam2:
            continue
        graph = graph_from_dense(adj, rng)
        w = transition_matrix(add_self_loops(graph))
        pi = oracles.stationary_distribution(oracles.dense_self_loops(adj))
        z = rng.random((n, 1)) + 0.5
        limit = float(pi @ z[:, 0]) * np.ones((n, 1))
        current = z
        errors = []
        steps_to_tol = None
        for step in range(1, 601):
            current = spmm(w, current)
            err = np.max(np.abs(current - limit))
            errors.append(err)
            if steps_to_tol is None and err < 1e-6:
                steps_to_tol = step
        assert steps_to_tol is not None and steps_to_tol <= 500, \
            f"no 1e-6 convergence within 500 steps (lam2={lam2:.3f})"
        errors = np.array(errors)
        window = np.flatnonzero((errors < 1e-6) & (errors > 1e-10))
        a, b = window[0], window[-1]
        assert b > a, "decay window too short to measure the rate"
        ratio = (errors[b] / errors[a]) ** (1.0 / (b - a))
        rel = abs(ratio - lam2) / lam2
        assert rel <= 0.05, f"contraction {ratio:.4f} vs |lambda2| {lam2:.4f}"
        worst_steps = max(worst_steps, steps_to_tol)
        worst_ratio_err = max(worst_ratio_err, rel)
        checked += 1
    report(2, checked >= 20,
           f"{checked} graphs converged (max {worst_steps} steps to 1e-6; "
           f"contraction within {100 * worst_ratio_err:.2f}% of |lambda2|)")


# ---------------------------------------------------------------------------
# Criterion 3 — six sparse/taped operations against dense brute force.


def test_criterion_03_dense_oracle_equivalence():
    rng = np.random.default_rng(1003)
    worst = {op: 0.0 for op in ("spmm", "hop_sequence", "fixed_diffuse",
                                "slp_aggregate", "mlp_aggregate", "ds_evolve")}
    for _ in range(100):
        n = int(rng.integers(3, 13))
        r = int(rng.integers(1, 6))
        K = int(rng.integers(1, 6))
        adj = oracles.random_connected_adjacency(rng, n, float(rng.uniform(0.2, 0.6)))
        graph = graph_from_dense(adj, rng, d=r)
        w = transition_matrix(add_self_loops(graph))
        w_dense = oracles.dense_transition(oracles.dense_self_loops(adj))
        z = rng.standard_normal((n, r))

        got = spmm(w, z)
        worst["spmm"] = max(worst["spmm"],
                            oracles.max_relative_error(got, w_dense @ z))

        hops = hop_sequence(w, z, K)
        dense_hops = oracles.dense_hops(w_dense, z, K)
        for h, dh in zip(hops.hops, dense_hops):
            worst["hop_sequence"] = max(worst["hop_sequence"],
                                        oracles.max_relative_error(h, dh))

        gamma = float(rng.uniform(0.1, 0.9))
        sched = DiffusionSchedule("ppr", K=K, gamma=gamma)
        coeffs = schedule_coefficients(sched)
        worst["fixed_diffuse"] = max(
            worst["fixed_diffuse"],
            oracles.max_relative_error(fixed_diffuse(hops, sched),
                                       oracles.dense_fixed_diffuse(w_dense, z, coeffs)))

        tape = Tape()
        z_node = tape.constant(z)
        taped = taped_hops(tape, w, z_node, K)

        slp = SlpDiffusion(K)
        slp.alpha.value = rng.standard_normal((1, K))
        got = slp_aggregate(tape, taped, slp).value
        want = oracles.dense_slp_aggregate(w_dense, z, slp.alpha.value[0])
        worst["slp_aggregate"] = max(worst["slp_aggregate"],
                                     oracles.max_relative_error(got, want))

        mlp = MlpDiffusion(K, hidden=int(rng.integers(2, 6)), rng=rng)
        got = mlp_aggregate(tape, taped, mlp).value
        want = oracles.per_position_mlp(dense_hops, mlp.layer1.value, mlp.layer2.value)
        worst["mlp_aggregate"] = max(worst["mlp_aggregate"],
                                     oracles.max_relative_error(got, want))

        T = int(rng.integers(0, 3))
        ds = DsDiffusion(width=r, hidden=int(rng.integers(2, 5)), rng=rng)
        got = ds_evolve(tape, z_node, w, ds, K, T).value
        want = oracles.dense_ds_evolve(w_dense, z, ds.layer1.value,
                                       ds.layer2.value, K=K, T=T)
        worst["ds_evolve"] = max(worst["ds_evolve"],
                                 oracles.max_relative_error(got, want))

    overall = max(worst.values())
    detail = ", ".join(f"{op} {err:.1e}" for op, err in worst.items())
    report(3, overall <= 1e-10, f"100 instances; max rel err per op: {detail}")


# ---------------------------------------------------------------------------
# Criterion 4 — schedule coefficient sums match their closed forms.


def test_criterion_04_schedule_closed_forms():
    worst = 0.0
    for K in (1, 5, 20):
        for gamma in (0.1, 0.5, 0.9):
            total = schedule_coefficients(
                DiffusionSchedule("ppr", K=K, gamma=gamma)).sum()
            worst = max(worst, abs(total - (1.0 - gamma ** K)))
        for t in (1.0, 3.0):
            total = schedule_coefficients(
                DiffusionSchedule("heat", K=K, t=t)).sum()
            partial = sum(math.exp(-t) * t ** k / math.factorial(k)
                          for k in range(K))
            worst = max(worst, abs(total - partial))
    report(4, worst <= 1e-12,
           f"max |sum - closed form| = {worst:.2e} over the gamma/t/K grid")


# ---------------------------------------------------------------------------
# Criteria 5, 7, 8 share the desk-scale SBM benchmark.


BENCH_CONFIG = SbmConfig(n_per_class=500, n_classes=3, p_in=0.05, p_out=0.005,
                         feature_dim=50, feature_noise=1.0, seed=0)


@pytest.fixture(scope="module")
def benchmark():
    graph = generate_sbm(BENCH_CONFIG)
    split_spec = SplitSpec(labels_per_class=2, validation_size=500, seed=0)
    train_config = TrainConfig(seed=0)
    results = {"graph": graph}
    started = time.perf_counter()
    results["slp_k20"] = run_experiment(graph, default_config("gnd_slp"),
                                        train_config, split_spec, runs=30)
    results["gcn"] = run_experiment(graph, default_config("gcn"),
                                    train_config, split_spec, runs=30)
    results["head_to_head_time"] = time.perf_counter() - started
    results["slp_k1"] = run_experiment(graph, default_config("gnd_slp", K=1),
                                       train_config, split_spec, runs=30)
    return results


def test_criterion_05_sbm_benchmark_margin(benchmark):
    slp = benchmark["slp_k20"]
    gcn = benchmark["gcn"]
    margin = slp.mean - gcn.mean
    report(5, margin >= 0.05,
           f"gnd_slp mean {slp.mean:.4f} (±{slp.std:.4f}) vs gcn mean "
           f"{gcn.mean:.4f} (±{gcn.std:.4f}); margin {margin:+.4f} needs "
           f">= +0.05; 30 splits each, {benchmark['head_to_head_time']:.0f}s "
           f"single-threaded")


def skip_criterion(criterion, reason):
    conftest.ACCEPTANCE_LINES.append(f"[criterion {criterion}] SKIP — {reason}")
    pytest.skip(reason)


def test_criterion_06_cora_range():
    cora_dir = os.environ.get("GNDNETS_CORA_DIR")
    if not cora_dir:
        skip_criterion(6, "GNDNETS_CORA_DIR not set; supply Cora as edges.txt, "
                          "features.csv, labels.txt to enable this check")
    files = DatasetFiles(edges=os.path.join(cora_dir, "edges.txt"),
                         features=os.path.join(cora_dir, "features.csv"),
                         labels=os.path.join(cora_dir, "labels.txt"))
    for path in (files.edges, files.features, files.labels):
        if not os.path.exists(path):
            skip_criterion(6, f"missing {path}")
    graph = load_dataset(files)
    result = run_experiment(graph, default_config("gnd_slp"), TrainConfig(seed=0),
                            SplitSpec(labels_per_class=5, validation_size=500,
                                      seed=0), runs=30)
    report(6, 0.698 <= result.mean <= 0.798,
           f"gnd_slp m=5 mean {result.mean:.4f} over 30 splits, "
           f"expected within [0.698, 0.798]")


def test_criterion_07_more_hops_help(benchmark):
    k20 = benchmark["slp_k20"]
    k1 = benchmark["slp_k1"]
    margin = k20.mean - k1.mean
    report(7, margin >= 0.03,
           f"gnd_slp K=20 mean {k20.mean:.4f} vs K=1 mean {k1.mean:.4f}; "
           f"margin {margin:+.4f} needs >= +0.03; 30 splits each")


def test_criterion_08_per_epoch_time_linear_in_k(benchmark):
    graph = benchmark["graph"]
    split = sample_split(graph, SplitSpec(labels_per_class=2,
                                          validation_size=500, seed=0))

    def per_epoch_seconds(k, epochs):
        config = default_config("gnd_slp", K=k)
        ops = GraphOperators.prepare(graph, config)
        # warm the caches (csr transpose, allocator) outside the clock
        warm = Model(config, graph.n_features, graph.n_classes,
                     np.random.default_rng(0))
        train(warm, graph, split, TrainConfig(max_epochs=3, patience=3, seed=0),
              rng=np.random.default_rng(0), ops=ops)
        model = Model(config, graph.n_features, graph.n_classes,
                      np.random.default_rng(1))
        started = time.perf_counter()
        history = train(model, graph, split,
                        TrainConfig(max_epochs=epochs, patience=epochs, seed=1),
                        rng=np.random.default_rng(1), ops=ops)
        return (time.perf_counter() - started) / history.epochs_run

    t20 = per_epoch_seconds(20, 40)
    t5 = per_epoch_seconds(5, 40)
    ratio = t20 / t5
    report(8, ratio <= 8.0,
           f"per-epoch {1000 * t20:.1f}ms at K=20 vs {1000 * t5:.1f}ms at K=5; "
           f"ratio {ratio:.2f} needs <= 8")


# ---------------------------------------------------------------------------
# Criterion 9 — experiment output is independent of the thread count.


def test_criterion_09_thread_count_determinism(tmp_path, capsys):
    spec = {
        "sbm": {"n_per_class": 15, "n_classes": 2, "p_in": 0.3, "p_out": 0.05,
                "feature_dim": 5, "feature_noise": 0.5, "seed": 3},
        "model": {"variant": "gnd_slp", "K": 3, "r": 4},
        "train": {"max_epochs": 12, "seed": 0},
        "split": {"labels_per_class": 3, "validation_size": 8, "seed": 0},
        "runs": 4,
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))

    outputs = {}
    for threads in (1, 4):
        out_dir = tmp_path / f"threads_{threads}"
        code = cli_run(["experiment", str(spec_path), "--out", str(out_dir),
                        "--threads", str(threads)])
        stdout = capsys.readouterr().out
        assert code == 0
        with open(out_dir / "results.json", "rb") as fh:
            outputs[threads] = (stdout, fh.read())
    same = outputs[1] == outputs[4]
    report(9, same,
           "stdout and results.json bitwise identical at 1 vs 4 threads"
           if same else "thread count changed the experiment output")


# ---------------------------------------------------------------------------
# Criterion 10 — the early-stopping contract on a synthetic curve, and
# best-snapshot restoration on a real run.


def test_criterion_10_early_stopping_contract():
    stopper = EarlyStopping(patience=50)
    stopped_at = None
    for epoch in range(1, 400):
        loss = 1.0 / epoch if epoch <= 100 else 0.01
        if stopper.update(loss, epoch):
            stopped_at = epoch
            break
    curve_ok = stopped_at == 150 and stopper.best_epoch == 100

    graph = generate_sbm(SbmConfig(n_per_class=20, n_classes=2, p_in=0.3,
                                   p_out=0.05, feature_dim=6, feature_noise=1.5,
                                   seed=4))
    split = sample_split(graph, SplitSpec(labels_per_class=3, validation_size=10,
                                          seed=0))
    config = default_config("gnd_slp", K=3, r=4)
    model = Model(config, graph.n_features, graph.n_classes,
                  np.random.default_rng(0))
    history = train(model, graph, split, TrainConfig(max_epochs=300, seed=0),
                    rng=np.random.default_rng(0))
    ops = GraphOperators.prepare(graph, config)
    restored_loss = loss_value(model.predict_proba(ops), graph.labels, split.val,
                               l2=5e-4, model=model)
    snapshot_ok = (math.isclose(restored_loss, history.best_val_loss,
                                rel_tol=1e-10)
                   and history.best_val_loss == min(history.val_losses))
    report(10, curve_ok and snapshot_ok,
           f"synthetic curve stopped at epoch {stopped_at} with best 100; "
           f"real run restored the epoch-{history.best_epoch} snapshot "
           f"(val loss {restored_loss:.4f} = recorded best)")
