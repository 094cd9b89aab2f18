"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete. The training benchmark (criteria 8 and 9) runs once as a module
fixture and is shared.
"""

import time

import numpy as np
import pytest
from scipy import stats

from activesgd import cli, diagnostics, engine, models
from activesgd.dataset import Dataset, Instance, synth_biased
from activesgd.engine import (
    StageConfig,
    TrainConfig,
    proximal_gradient,
    train_ashr,
    train_assgd,
    train_mbsgd,
)
from activesgd.models import (
    ActivationSpec,
    LinearParams,
    LossSpec,
    MlpParams,
    batch_backward,
    grad_norm_explicit,
    layer_grad_norm_sq,
)
from activesgd.sampler import WeightIndex, naive_draw_batch


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def random_binary_dataset(rng, n, dim):
    insts = [Instance(rng.normal(size=dim), int(rng.integers(0, 2)) * 2 - 1)
             for _ in range(n)]
    return Dataset(insts, dim, 2)


def random_mlp(rng, sizes, activation="sigmoid"):
    layers = [(rng.normal(size=(m, l)) * 0.6, rng.normal(size=m) * 0.1)
              for l, m in zip(sizes[:-1], sizes[1:])]
    return MlpParams(layers, ActivationSpec(activation))


# ---------------------------------------------------------------------------
# criterion 1: unbiasedness of the re-weighted stochastic gradient


def test_criterion_1_unbiasedness():
    rng = np.random.default_rng(101)
    beta = 0.1
    start = time.perf_counter()
    worst = 0.0
    for case in range(100):
        dim = int(rng.integers(2, 6))
        if case % 5 == 4:
            n = int(rng.integers(2, 41))
            params = random_mlp(rng, [dim, int(rng.integers(2, 6)), 1])
            spec = LossSpec("logistic")
        else:
            n = int(rng.integers(2, 101))
            params = LinearParams(rng.normal(size=dim))
            spec = LossSpec(("logistic", "squared", "hinge")[case % 3])
        ds = random_binary_dataset(rng, n, dim)
        raw = rng.random(n)
        probs = beta / n + (1 - beta) * raw / raw.sum()
        expectation = None
        for i in range(n):
            g = models.instance_gradient(params, ds.instances[i], spec)
            term = models.grad_scale(engine.reweight(g, n, probs[i]), probs[i])
            expectation = term if expectation is None else models.grad_add(expectation, term)
        full = models.grad_flatten(diagnostics.full_gradient(params, ds, spec))
        err = np.linalg.norm(models.grad_flatten(expectation) - full)
        worst = max(worst, err / max(1.0, np.linalg.norm(full)))
    elapsed = time.perf_counter() - start
    report(
        "criterion 1 (unbiasedness)",
        worst < 1e-10 and elapsed < 10.0,
        f"max_rel_err={worst:.3e} (tol 1e-10), runtime={elapsed:.1f}s (limit 10s)",
    )


# ---------------------------------------------------------------------------
# criteria 2 and 3: variance optimality, closed form, equal magnitudes


def test_criterion_2_variance_optimality():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst_excess = -np.inf
    worst_closed = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 51))
        dim = int(rng.integers(2, 6))
        ds = random_binary_dataset(rng, n, dim)
        params = LinearParams(rng.normal(size=dim))
        spec = LossSpec("logistic")
        norms = diagnostics.dataset_grad_norms(params, ds, spec)
        fg = models.grad_norm(diagnostics.full_gradient(params, ds, spec))
        p_star = diagnostics.optimal_distribution(norms)
        var_star = diagnostics.variance(params, ds, spec, p_star).variance
        var_uni = diagnostics.variance(params, ds, spec, np.full(n, 1.0 / n)).variance
        scale = max(1.0, abs(var_uni))
        worst_excess = max(worst_excess, (var_star - var_uni) / scale)
        draws = rng.random((1000, n)) + 1e-3
        draws /= draws.sum(axis=1, keepdims=True)
        sq = norms**2
        var_all = (sq / (n * n)) @ (1.0 / draws).T - fg * fg
        worst_excess = max(
            worst_excess, float(np.max((var_star - var_all) / np.maximum(1.0, np.abs(var_all))))
        )
        closed = (norms.sum() / n) ** 2 - fg * fg
        worst_closed = max(worst_closed, abs(var_star - closed) / max(abs(closed), 1e-12))
    elapsed = time.perf_counter() - start
    report(
        "criterion 2 (variance optimality)",
        worst_excess <= 1e-12 and worst_closed < 1e-10 and elapsed < 60.0,
        f"max_excess={worst_excess:.3e} closed_form_err={worst_closed:.3e} "
        f"runtime={elapsed:.1f}s (limit 60s)",
    )


def test_criterion_3_equal_magnitude():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 51))
        dim = int(rng.integers(2, 6))
        ds = random_binary_dataset(rng, n, dim)
        params = LinearParams(rng.normal(size=dim))
        norms = diagnostics.dataset_grad_norms(params, ds, LossSpec("logistic"))
        p_star = diagnostics.optimal_distribution(norms)
        target = norms.sum() / n
        active = norms > 0
        if not np.any(active):
            continue
        reweighted = norms[active] / (n * p_star[active])
        worst = max(worst, float(np.max(np.abs(reweighted - target))) / target)
    report(
        "criterion 3 (equal magnitude)",
        worst < 1e-10,
        f"max_rel_dev={worst:.3e} (tol 1e-10)",
    )


# ---------------------------------------------------------------------------
# criterion 4: factorized per-sample norms match the explicit oracle, and the
# extra cost scales linearly in b(m+l)


def test_criterion_4_fast_per_sample_norms():
    rng = np.random.default_rng(404)
    worst = 0.0
    cases = 0
    while cases < 500:
        dim = int(rng.integers(2, 33))
        kind = cases % 4
        if kind == 0:
            params = LinearParams(rng.normal(size=dim) * 0.6)
            spec = LossSpec(("logistic", "squared", "hinge")[cases % 3])
            out = 1
        elif kind == 1:
            out = int(rng.integers(3, 7))
            params = LinearParams(rng.normal(size=(out, dim)) * 0.6)
            spec = LossSpec("softmax")
        else:
            depth = int(rng.integers(1, 4))
            hidden = [int(rng.integers(2, 33)) for _ in range(depth)]
            out = int(rng.integers(3, 6)) if kind == 3 else 1
            params = random_mlp(rng, [dim, *hidden, out],
                                activation=("sigmoid", "tanh", "relu")[cases % 3])
            spec = LossSpec("softmax") if out > 1 else LossSpec("logistic")
        b = int(rng.integers(1, 17))
        batch = []
        for _ in range(b):
            label = int(rng.integers(0, out)) if out > 1 else int(rng.integers(0, 2)) * 2 - 1
            batch.append((Instance(rng.normal(size=dim), label), float(rng.random()) + 0.5))
        res = batch_backward(params, batch, spec)
        for i, (inst, _) in enumerate(batch):
            expected = grad_norm_explicit(params, inst, spec)
            err = abs(res.per_sample_grad_norms[i] - expected) / max(expected, 1e-12)
            worst = max(worst, err)
        cases += 1

    # timing: doubling m and l at fixed b should double the norm-computation
    # cost; accept within 2x of that linear prediction
    b, m, l = 128, 512, 512

    def time_norms(mm, ll, repeats=200, trials=7):
        dz = rng.normal(size=(b, mm))
        h = rng.normal(size=(b, ll))
        best = np.inf
        for _ in range(trials):
            t0 = time.perf_counter()
            for _ in range(repeats):
                layer_grad_norm_sq(dz, h, include_bias=True)
            best = min(best, time.perf_counter() - t0)
        return best

    time_norms(m, l, repeats=20)  # warm up
    t_base = time_norms(m, l)
    t_double = time_norms(2 * m, 2 * l)
    ratio = t_double / t_base
    ok = worst < 1e-8 and 1.0 <= ratio <= 4.0
    report(
        "criterion 4 (fast per-sample norms)",
        ok,
        f"max_rel_err={worst:.3e} (tol 1e-8, 500 cases), timing ratio for doubled "
        f"m,l = {ratio:.2f} (linear prediction 2.0, accepted [1, 4])",
    )


# ---------------------------------------------------------------------------
# criterion 5: gradient correctness by central finite differences


def test_criterion_5_gradient_correctness():
    results = cli.check_grad(seed=505)
    worst = max(measured for _, _, measured, _, _ in results)
    ok = all(passed for _, passed, _, _, _ in results)
    report(
        "criterion 5 (gradient correctness)",
        ok and worst < 1e-5,
        f"{len(results)} combos, max_rel_err={worst:.3e} (tol 1e-5)",
    )


# ---------------------------------------------------------------------------
# criterion 6: sampler exactness


def test_criterion_6_sampler_exactness():
    rng = np.random.default_rng(606)
    draws = 1_000_000
    worst_chi = 0.0
    floors_ok = True
    oracle_ok = True
    for case in range(20):
        beta = (0.0, 0.1, 0.5)[case % 3]
        n = int(rng.integers(4, 65))
        weights = rng.uniform(0.05, 1.0, size=n)
        index = WeightIndex(weights, beta)
        ids = index.draw_batch(draws, np.random.default_rng(1000 + case))
        counts = np.bincount(ids, minlength=n)
        expected = index.probabilities() * draws
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        threshold = float(stats.chi2.ppf(1 - 1e-3, df=n - 1))
        worst_chi = max(worst_chi, chi2 / threshold)
        floors_ok &= bool(np.all(index.probabilities() >= beta / n))
        mine = index.draw_batch(20_000, np.random.default_rng(2000 + case))
        ref = naive_draw_batch(weights, beta, 20_000, np.random.default_rng(2000 + case))
        oracle_ok &= bool(np.array_equal(mine, ref))
    report(
        "criterion 6 (sampler exactness)",
        worst_chi < 1.0 and floors_ok and oracle_ok,
        f"worst chi2/threshold={worst_chi:.3f} (<1), floors exact={floors_ok}, "
        f"prefix-tree == naive scan={oracle_ok}",
    )


# ---------------------------------------------------------------------------
# criterion 7: full smoothing degenerates to uniform mini-batch SGD bitwise


def test_criterion_7_degeneracy():
    ds = synth_biased(300, 6, 0.8, 0.5, seed=707)
    base = dict(eta=0.5, b=16, T=1000, seed=7, eval_every=100,
                loss_spec=LossSpec("logistic"))
    mb = train_mbsgd(ds, TrainConfig(**base))
    ass = train_assgd(ds, TrainConfig(beta=1.0, **base))
    params_equal = bool(
        np.array_equal(models.params_flatten(mb.params), models.params_flatten(ass.params))
    )
    metrics_equal = all(
        r1.iteration == r2.iteration
        and r1.train_loss == r2.train_loss
        and r1.test_error == r2.test_error
        for r1, r2 in zip(mb.metrics, ass.metrics)
    ) and len(mb.metrics) == len(ass.metrics)
    report(
        "criterion 7 (beta=1 degeneracy)",
        params_equal and metrics_equal,
        f"params bitwise equal={params_equal}, metrics bitwise equal={metrics_equal} "
        "(wall time excluded)",
    )


# ---------------------------------------------------------------------------
# criteria 8 and 9: the shared desk-scale training benchmark
#
# synth_biased(4000, 20, easy=0.9), logistic + l2(1e-3), eta 4/(1+0.005 t),
# b=16, beta=0.1, T=2000, metrics every 100 iterations, 10 paired seeds.

BENCH_T = 2000
BENCH_SEEDS = range(10)


@pytest.fixture(scope="module")
def benchmark_runs():
    ds = synth_biased(4000, 20, 0.9, 0.2, seed=100)
    spec = LossSpec("logistic", regularizer="l2", lam=1e-3)
    runs = {}
    for seed in BENCH_SEEDS:
        cfg = TrainConfig(
            eta=4.0, b=16, T=BENCH_T, beta=0.1, seed=seed, eval_every=100,
            eta_decay=5e-3, loss_spec=spec, track_variance=True,
        )
        runs[("mbsgd", seed)] = train_mbsgd(ds, cfg)
        runs[("assgd", seed)] = train_assgd(ds, cfg)
        runs[("ashr", seed)] = train_ashr(ds, cfg, StageConfig())
    return runs


def _second_half_mean_variance(metrics):
    vals = [r.variance_estimate for r in metrics if r.iteration > BENCH_T / 2]
    return float(np.mean(vals))


def _iterations_to(metrics, target):
    for r in metrics:
        if r.train_loss <= target:
            return r.iteration
    return np.inf


def _target_for(metrics):
    eligible = [r for r in metrics if r.iteration <= 0.8 * BENCH_T]
    return eligible[-1].train_loss


def test_criterion_8_variance_reduction(benchmark_runs):
    ratios = []
    for seed in BENCH_SEEDS:
        mb = _second_half_mean_variance(benchmark_runs[("mbsgd", seed)].metrics)
        ass = _second_half_mean_variance(benchmark_runs[("assgd", seed)].metrics)
        ratios.append(ass / mb)
    med = float(np.median(ratios))
    report(
        "criterion 8 (variance reduction)",
        med < 0.7,
        f"median second-half variance ratio assgd/mbsgd = {med:.3f} (< 0.7), "
        f"per-seed = {[f'{r:.2f}' for r in ratios]}",
    )


def test_criterion_9_iterations_to_accuracy_assgd(benchmark_runs):
    ratios = []
    for seed in BENCH_SEEDS:
        mb = benchmark_runs[("mbsgd", seed)].metrics
        target = _target_for(mb)
        ratios.append(
            _iterations_to(benchmark_runs[("assgd", seed)].metrics, target)
            / _iterations_to(mb, target)
        )
    med = float(np.median(ratios))
    report(
        "criterion 9a (iterations to accuracy, assgd)",
        med <= 0.8,
        f"median iterations ratio assgd/mbsgd = {med:.3f} (<= 0.8), "
        f"per-seed = {[f'{r:.2f}' for r in ratios]}",
    )


def test_criterion_9_iterations_to_accuracy_ashr(benchmark_runs):
    ratios = []
    for seed in BENCH_SEEDS:
        mb = benchmark_runs[("mbsgd", seed)].metrics
        target = _target_for(mb)
        ratios.append(
            _iterations_to(benchmark_runs[("ashr", seed)].metrics, target)
            / _iterations_to(mb, target)
        )
    med = float(np.median(ratios))
    report(
        "criterion 9b (iterations to accuracy, ashr)",
        med <= 0.8,
        f"median iterations ratio ashr/mbsgd = {med:.3f} (<= 0.8), "
        f"per-seed = {[f'{r:.2f}' for r in ratios]}",
    )


# ---------------------------------------------------------------------------
# criterion 10: per-iteration overhead of the weighted sampler on an MLP


def test_criterion_10_per_iteration_overhead():
    rng = np.random.default_rng(909)
    n, dim, classes = 2000, 784, 10
    X = rng.normal(size=(n, dim))
    teacher = rng.normal(size=(classes, dim))
    labels = np.argmax(X @ teacher.T, axis=1)
    ds = Dataset([Instance(X[i], int(labels[i])) for i in range(n)], dim, classes)
    spec = LossSpec("softmax")

    def run(trainer, T):
        cfg = TrainConfig(
            eta=0.05, b=128, T=T, beta=0.1, seed=1, eval_every=T,
            loss_spec=spec, hidden=(128,), activation="sigmoid",
        )
        trained = trainer(ds, cfg)
        return trained.metrics[-1].wall_time_ms / T

    run(train_mbsgd, 5)  # warm up
    mb_ms = run(train_mbsgd, 60)
    as_ms = run(train_assgd, 60)
    ratio = as_ms / mb_ms
    report(
        "criterion 10 (per-iteration overhead)",
        ratio <= 1.5,
        f"assgd {as_ms:.2f} ms/iter vs mbsgd {mb_ms:.2f} ms/iter, "
        f"ratio = {ratio:.2f} (<= 1.5)",
    )


# ---------------------------------------------------------------------------
# criterion 11: staged-training semantics


def test_criterion_11_ashr_semantics():
    ds = synth_biased(120, 5, 0.7, 0.5, seed=111)
    cfg = TrainConfig(eta=0.4, b=8, T=120, beta=0.1, seed=11, eval_every=40,
                      trace_samples=True)
    trained = train_ashr(ds, cfg, StageConfig(m=30, g=40, gamma=1e-3))
    subsets_ok = all(len(np.unique(s)) == 30 for s in trained.stage_subsets)
    within_ok = all(
        np.all(np.isin(ids, trained.stage_subsets[min(t // 40, len(trained.stage_subsets) - 1)]))
        for t, ids in enumerate(trained.sampled_ids)
    )

    prox = proximal_gradient(trained.params, trained.params, 0.5)
    prox_ok = bool(np.all(models.grad_flatten(prox) == 0.0))

    base = TrainConfig(eta=0.4, b=8, T=150, beta=0.1, seed=12, eval_every=50)
    ass = train_assgd(ds, base)
    ashr = train_ashr(ds, base, StageConfig(m=ds.n, g=base.T, gamma=0.0))
    bitwise_ok = bool(
        np.array_equal(models.params_flatten(ass.params), models.params_flatten(ashr.params))
    ) and all(
        r1.train_loss == r2.train_loss and r1.test_error == r2.test_error
        for r1, r2 in zip(ass.metrics, ashr.metrics)
    )
    report(
        "criterion 11 (ashr stage semantics)",
        subsets_ok and within_ok and prox_ok and bitwise_ok,
        f"stage subsets distinct m={subsets_ok}, sampling confined to subsets={within_ok}, "
        f"proximal gradient zero at anchor={prox_ok}, single-stage degeneracy bitwise={bitwise_ok}",
    )
