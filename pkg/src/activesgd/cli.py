"""Command-line interface: train models, run paired benchmarks, generate
synthetic datasets, and run the invariant check suites.

Configuration is a flat key-value text file (`key = value`, `#` comments);
command-line flags override file keys. All outputs are UTF-8 CSV with a
mandatory header row.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np
from scipy import stats

from . import dataset as dataset_mod
from . import diagnostics, engine, models
from .dataset import ParseError, load_csv, load_idx, load_libsvm, save_libsvm, split, synth_biased
from .engine import MetricsRecord, StageConfig, TrainConfig
from .models import ACTIVATIONS, LossSpec, NumericError
from .sampler import WeightIndex, naive_draw_batch

CONFIG_DIR_ENV = "ACTIVESGD_CONFIG_DIR"

CSV_FIELDS = (
    "iteration",
    "wall_time_ms",
    "train_loss",
    "test_error",
    "variance_estimate",
    "algorithm",
    "seed",
)

_INT_KEYS = {"batch_size", "iterations", "seed", "eval_every", "stage_m", "stage_g", "dimension"}
_FLOAT_KEYS = {"eta", "beta", "lambda", "eta_decay", "gamma", "test_fraction", "target_loss"}
_BOOL_KEYS = {"track_variance"}
_STR_KEYS = {"algorithm", "loss", "regularizer", "activation", "data", "test", "out"}
_LIST_KEYS = {"hidden", "algorithms", "seeds"}
VALID_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS | _LIST_KEYS


class UsageError(Exception):
    """Bad invocation or configuration; exits with status 2."""


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _coerce(key, text):
    text = text.strip()
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _BOOL_KEYS:
        return _parse_bool(text)
    if key in _LIST_KEYS:
        items = [tok.strip() for tok in text.split(",") if tok.strip()]
        if key in ("hidden", "seeds"):
            return [int(tok) for tok in items]
        return items
    return text


def _resolve_config_path(path):
    if os.path.exists(path):
        return path
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir and not os.path.isabs(path):
        candidate = os.path.join(config_dir, path)
        if os.path.exists(candidate):
            return candidate
    raise UsageError(f"config file not found: {path}")


def read_config_file(path):
    """Parse a flat key-value config file into a typed dict."""
    values = {}
    with open(_resolve_config_path(path), "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {ln}: expected `key = value`")
            key, text = line.split("=", 1)
            key = key.strip()
            if key not in VALID_KEYS:
                raise UsageError(
                    f"{path}: line {ln}: unknown key {key!r}; valid keys: "
                    + ", ".join(sorted(VALID_KEYS))
                )
            try:
                values[key] = _coerce(key, text)
            except ValueError:
                raise UsageError(f"{path}: line {ln}: bad value for {key}: {text.strip()!r}") from None
    return values


def _merge_overrides(cfg, args, keys):
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            if key == "hidden" and isinstance(value, str):
                value = _coerce("hidden", value)
            if key in ("algorithms",) and isinstance(value, str):
                value = _coerce("algorithms", value)
            if key == "seeds" and isinstance(value, str):
                value = _coerce("seeds", value)
            cfg[key] = value
    return cfg


def build_train_config(cfg, algorithm=None):
    spec = LossSpec(
        kind=cfg.get("loss", "logistic"),
        regularizer=cfg.get("regularizer", "none"),
        lam=cfg.get("lambda", 0.0),
    )
    try:
        config = TrainConfig(
            eta=cfg.get("eta", 0.1),
            b=cfg.get("batch_size", 16),
            T=cfg.get("iterations", 1000),
            beta=cfg.get("beta", 0.1),
            seed=cfg.get("seed", 0),
            eval_every=cfg.get("eval_every", 100),
            loss_spec=spec,
            algorithm=algorithm or cfg.get("algorithm", "assgd"),
            eta_decay=cfg.get("eta_decay", 0.0),
            hidden=tuple(cfg.get("hidden", ())),
            activation=cfg.get("activation", "sigmoid"),
            track_variance=cfg.get("track_variance", False),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stage = StageConfig(m=cfg.get("stage_m"), g=cfg.get("stage_g"), gamma=cfg.get("gamma", 1e-3))
    return config, stage


def load_any(path, dimension=None):
    """Load a dataset file: `images,labels` pair for IDX, .csv, else LIBSVM."""
    if "," in path:
        images, labels = path.split(",", 1)
        return load_idx(images.strip(), labels.strip())
    if path.endswith(".csv"):
        return load_csv(path)
    return load_libsvm(path, dimension=dimension)


def _resolve_datasets(cfg, seed):
    if "data" not in cfg:
        raise UsageError("no dataset configured (key `data`)")
    train_ds = load_any(cfg["data"], cfg.get("dimension"))
    test_ds = None
    if cfg.get("test"):
        test_ds = load_any(cfg["test"], cfg.get("dimension"))
    elif cfg.get("test_fraction", 0.0) > 0:
        train_ds, test_ds = split(train_ds, cfg["test_fraction"], seed)
    return train_ds, test_ds


# ---------------------------------------------------------------------------
# metrics CSV


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_metrics_csv(path, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.iteration,
                    _format_cell(rec.wall_time_ms),
                    _format_cell(rec.train_loss),
                    _format_cell(rec.test_error),
                    _format_cell(rec.variance_estimate),
                    rec.algorithm,
                    rec.seed,
                ]
            )


def read_metrics_csv(path):
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != CSV_FIELDS:
            raise ParseError(f"{path}: unexpected metrics header {reader.fieldnames}")
        for row in reader:
            records.append(
                MetricsRecord(
                    iteration=int(row["iteration"]),
                    wall_time_ms=float(row["wall_time_ms"]),
                    train_loss=float(row["train_loss"]),
                    test_error=float(row["test_error"]),
                    variance_estimate=(
                        float(row["variance_estimate"]) if row["variance_estimate"] else None
                    ),
                    algorithm=row["algorithm"],
                    seed=int(row["seed"]),
                )
            )
    return records


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    cfg = read_config_file(args.config) if args.config else {}
    _merge_overrides(
        cfg,
        args,
        (
            "algorithm", "eta", "batch_size", "iterations", "beta", "seed", "eval_every",
            "loss", "regularizer", "lambda", "eta_decay", "hidden", "activation",
            "stage_m", "stage_g", "gamma", "data", "test", "dimension", "test_fraction",
            "track_variance", "out",
        ),
    )
    config, stage = build_train_config(cfg)
    train_ds, test_ds = _resolve_datasets(cfg, config.seed)
    out_dir = cfg.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    try:
        trained = engine.train(train_ds, config, stage_config=stage, test_dataset=test_ds)
    except NumericError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    metrics_path = os.path.join(out_dir, "metrics.csv")
    model_path = os.path.join(out_dir, "model.npz")
    write_metrics_csv(metrics_path, trained.metrics)
    models.save_params(trained.params, model_path)
    last = trained.metrics[-1]
    print(f"wrote {metrics_path} and {model_path}")
    print(
        f"{config.algorithm}: iterations={last.iteration} "
        f"train_loss={last.train_loss:.6f} test_error={last.test_error:.4f}"
    )
    return 0


def _iterations_to_target(records, target):
    for rec in records:
        if rec.train_loss <= target:
            return rec.iteration
    return None


def _second_half_variance(records):
    final = records[-1].iteration
    values = [
        rec.variance_estimate
        for rec in records
        if rec.variance_estimate is not None and rec.iteration > final / 2
    ]
    return float(np.mean(values)) if values else None


def cmd_bench(args):
    cfg = read_config_file(args.config) if args.config else {}
    _merge_overrides(
        cfg,
        args,
        (
            "algorithms", "seeds", "target_loss", "eta", "batch_size", "iterations", "beta",
            "eval_every", "loss", "regularizer", "lambda", "eta_decay", "hidden",
            "activation", "stage_m", "stage_g", "gamma", "data", "test", "dimension",
            "test_fraction", "track_variance", "out",
        ),
    )
    algorithms = cfg.get("algorithms", [])
    seeds = cfg.get("seeds", [])
    if len(algorithms) < 2:
        raise UsageError("bench needs at least two algorithms (key `algorithms`)")
    if "mbsgd" not in algorithms:
        raise UsageError("bench needs the mbsgd baseline in `algorithms`")
    if not seeds:
        raise UsageError("bench needs at least one seed (key `seeds`)")
    unknown = [a for a in algorithms if a not in engine.ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithms {unknown}; valid: {list(engine.ALGORITHMS)}")
    cfg.setdefault("track_variance", True)
    out_dir = cfg.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)

    # mbsgd runs first per seed: it defines the target loss and the variance baseline
    ordered = ["mbsgd"] + [a for a in algorithms if a != "mbsgd"]
    summary = []
    baselines = {}
    for seed in seeds:
        seed_cfg = dict(cfg)
        seed_cfg["seed"] = seed
        train_ds, test_ds = _resolve_datasets(seed_cfg, seed)
        per_seed = {}
        for algorithm in ordered:
            config, stage = build_train_config(seed_cfg, algorithm=algorithm)
            trained = engine.train(train_ds, config, stage_config=stage, test_dataset=test_ds)
            run_path = os.path.join(out_dir, f"run_{algorithm}_s{seed}.csv")
            write_metrics_csv(run_path, trained.metrics)
            per_seed[algorithm] = trained.metrics
        target = cfg.get("target_loss")
        if target is None:
            # loss the baseline reaches at 80% of its budget
            base = per_seed["mbsgd"]
            cutoff = 0.8 * base[-1].iteration
            eligible = [rec for rec in base if rec.iteration <= cutoff]
            target = (eligible[-1] if eligible else base[-1]).train_loss
        baselines[seed] = {
            "variance": _second_half_variance(per_seed["mbsgd"]),
            "target": target,
        }
        for algorithm in algorithms:
            records = per_seed[algorithm]
            reached = _iterations_to_target(records, target)
            mean_ms = records[-1].wall_time_ms / records[-1].iteration
            if algorithm == "mbsgd":
                ratio = 1.0
            else:
                var = _second_half_variance(records)
                base_var = baselines[seed]["variance"]
                ratio = var / base_var if var is not None and base_var else None
            summary.append(
                {
                    "algorithm": algorithm,
                    "seed": seed,
                    "iterations_to_target": reached if reached is not None else "unreached",
                    "mean_iteration_ms": mean_ms,
                    "variance_ratio": ratio,
                }
            )

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["algorithm", "seed", "iterations_to_target", "mean_iteration_ms", "variance_ratio"]
        )
        for row in summary:
            writer.writerow(
                [
                    row["algorithm"],
                    row["seed"],
                    row["iterations_to_target"],
                    _format_cell(row["mean_iteration_ms"]),
                    _format_cell(row["variance_ratio"]),
                ]
            )
        for algorithm in algorithms:
            rows = [r for r in summary if r["algorithm"] == algorithm]
            iters = [
                float("inf") if r["iterations_to_target"] == "unreached"
                else r["iterations_to_target"]
                for r in rows
            ]
            med_iters = float(np.median(iters))
            med_ms = float(np.median([r["mean_iteration_ms"] for r in rows]))
            ratios = [r["variance_ratio"] for r in rows if r["variance_ratio"] is not None]
            med_ratio = float(np.median(ratios)) if ratios else None
            writer.writerow(
                [
                    algorithm,
                    "median",
                    "unreached" if math.isinf(med_iters) else int(med_iters),
                    _format_cell(med_ms),
                    _format_cell(med_ratio),
                ]
            )
    print(f"wrote {summary_path}")
    return 0


def cmd_gen(args):
    if not 0.0 <= args.easy <= 1.0:
        raise UsageError("--easy must be in [0, 1]")
    if args.margin <= 0:
        raise UsageError("--margin must be positive")
    ds = synth_biased(args.n, args.dim, args.easy, args.margin, args.seed)
    save_libsvm(ds, args.out)
    manifest = {
        "format": "libsvm",
        "n": args.n,
        "dim": args.dim,
        "easy_fraction": args.easy,
        "margin": args.margin,
        "seed": args.seed,
        "num_classes": ds.num_classes,
    }
    manifest_path = args.out + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out} ({ds.n} instances) and {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# check suites


def _report(results):
    failed = 0
    for name, ok, measured, tol, detail in results:
        status = "PASS" if ok else "FAIL"
        line = f"{status} {name}: measured={measured:.3e} tol={tol:.0e}"
        if not ok and detail:
            line += f"  [{detail}]"
        print(line)
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _random_binary_instance(rng, dim):
    return dataset_mod.Instance(rng.normal(size=dim), int(rng.integers(0, 2)) * 2 - 1)


def _kink_safe_linear(rng, kind, dim=5):
    while True:
        params = models.LinearParams(rng.normal(size=dim) * 0.5)
        inst = _random_binary_instance(rng, dim)
        f = models.predict(params, inst)
        if kind == "hinge" and abs(f * inst.label - 1.0) < 1e-3:
            continue
        return params, inst


def _kink_safe_mlp(rng, activation, sizes, label_range):
    act = models.ActivationSpec(activation)
    while True:
        layers = []
        for l, m in zip(sizes[:-1], sizes[1:]):
            layers.append((rng.normal(size=(m, l)) * 0.7, rng.normal(size=m) * 0.1))
        params = models.MlpParams(layers, act)
        x = rng.normal(size=sizes[0])
        label = int(rng.integers(0, label_range)) if label_range > 2 else int(rng.integers(0, 2)) * 2 - 1
        inst = dataset_mod.Instance(x, label)
        if activation == "relu":
            h = x
            safe = True
            for w, b in layers:
                z = w @ h + b
                if np.any(np.abs(z) < 1e-3):
                    safe = False
                    break
                h = act.value(z)
            if not safe:
                continue
        return params, inst


def check_grad(seed=12345):
    """Finite-difference suite over every loss/activation/regularizer combo."""
    rng = np.random.default_rng(seed)
    tol = 1e-5
    results = []
    for kind in ("squared", "hinge", "logistic"):
        spec = LossSpec(kind=kind)
        params, inst = _kink_safe_linear(rng, kind)
        err = diagnostics.finite_diff_check(params, inst, spec)
        results.append((f"grad linear {kind}", err < tol, err, tol, f"seed={seed}"))
    spec = LossSpec(kind="softmax")
    params = models.LinearParams(rng.normal(size=(3, 5)) * 0.5)
    inst = dataset_mod.Instance(rng.normal(size=5), int(rng.integers(0, 3)))
    err = diagnostics.finite_diff_check(params, inst, spec)
    results.append(("grad linear softmax", err < tol, err, tol, f"seed={seed}"))
    for activation in ACTIVATIONS:
        params, inst = _kink_safe_mlp(rng, activation, [4, 5, 1], 2)
        err = diagnostics.finite_diff_check(params, inst, LossSpec(kind="logistic"))
        results.append((f"grad mlp {activation} logistic", err < tol, err, tol, f"seed={seed}"))
        params, inst = _kink_safe_mlp(rng, activation, [4, 6, 3], 3)
        err = diagnostics.finite_diff_check(params, inst, LossSpec(kind="softmax"))
        results.append((f"grad mlp {activation} softmax", err < tol, err, tol, f"seed={seed}"))
    for reg in ("l2", "l1"):
        spec = LossSpec(kind="logistic", regularizer=reg, lam=0.37)
        w = rng.normal(size=6)
        w[np.abs(w) < 1e-2] = 0.1  # keep l1 away from its kink
        err = diagnostics.finite_diff_check_regularizer(models.LinearParams(w), spec)
        results.append((f"grad regularizer {reg} linear", err < tol, err, tol, f"seed={seed}"))
        params, _ = _kink_safe_mlp(rng, "tanh", [3, 4, 1], 2)
        err = diagnostics.finite_diff_check_regularizer(params, spec)
        results.append((f"grad regularizer {reg} mlp", err < tol, err, tol, f"seed={seed}"))
    return results


def _random_small_problem(rng, kind="logistic"):
    n = int(rng.integers(3, 51))
    dim = int(rng.integers(2, 7))
    insts = [_random_binary_instance(rng, dim) for _ in range(n)]
    ds = dataset_mod.Dataset(insts, dim, 2)
    params = models.LinearParams(rng.normal(size=dim) * 0.8)
    return ds, params, LossSpec(kind=kind)


def check_variance(seed=777, configs=30, random_dists=1000):
    """Variance optimality, closed form, and the equal-magnitude corollary."""
    rng = np.random.default_rng(seed)
    results = []
    worst_excess = 0.0
    worst_closed = 0.0
    worst_equal = 0.0
    for _ in range(configs):
        ds, params, spec = _random_small_problem(rng)
        n = ds.n
        norms = diagnostics.dataset_grad_norms(params, ds, spec)
        p_star = diagnostics.optimal_distribution(norms)
        var_opt = diagnostics.variance(params, ds, spec, p_star).variance
        var_uni = diagnostics.variance(params, ds, spec, np.full(n, 1.0 / n)).variance
        scale = max(var_uni, 1.0)
        worst_excess = max(worst_excess, (var_opt - var_uni) / scale)
        for _ in range(random_dists):
            p = rng.random(n) + 1e-3
            p /= p.sum()
            var_p = diagnostics.variance(params, ds, spec, p).variance
            worst_excess = max(worst_excess, (var_opt - var_p) / max(var_p, 1.0))
        fg = models.grad_norm(diagnostics.full_gradient(params, ds, spec))
        closed = (norms.sum() / n) ** 2 - fg * fg
        worst_closed = max(worst_closed, abs(var_opt - closed) / max(abs(closed), 1e-9))
        active = norms > 0
        if np.any(active):
            target = norms.sum() / n
            rw = norms[active] / (n * p_star[active])
            worst_equal = max(worst_equal, float(np.max(np.abs(rw - target))) / max(target, 1e-30))
    results.append(("variance optimal <= all distributions", worst_excess <= 1e-12,
                    worst_excess, 1e-12, f"seed={seed}"))
    results.append(("variance closed form", worst_closed < 1e-10, worst_closed, 1e-10,
                    f"seed={seed}"))
    results.append(("equal magnitude corollary", worst_equal < 1e-10, worst_equal, 1e-10,
                    f"seed={seed}"))
    return results


def check_sampler(seed=2024, draws=1_000_000):
    """Chi-square goodness of fit, exact floors, and the naive-sampler oracle."""
    rng = np.random.default_rng(seed)
    results = []
    alpha = 1e-3
    for beta in (0.0, 0.1, 0.5):
        n = int(rng.integers(8, 65))
        weights = rng.uniform(0.05, 1.0, size=n)
        index = WeightIndex(weights, beta)
        ids = index.draw_batch(draws, np.random.default_rng(seed + 1))
        counts = np.bincount(ids, minlength=n)
        expected = index.probabilities() * draws
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        threshold = float(stats.chi2.ppf(1.0 - alpha, df=n - 1))
        results.append((f"sampler chi-square beta={beta}", chi2 < threshold, chi2, threshold,
                        f"seed={seed} n={n}"))
        floor_ok = bool(np.all(index.probabilities() >= beta / n))
        results.append((f"sampler floor beta={beta}", floor_ok, float(floor_ok), 1.0,
                        f"seed={seed} n={n}"))
        fen = index.draw_batch(2000, np.random.default_rng(seed + 2))
        naive = naive_draw_batch(weights, beta, 2000, np.random.default_rng(seed + 2))
        agree = float(np.mean(fen == naive))
        results.append((f"sampler naive oracle beta={beta}", bool(np.all(fen == naive)),
                        agree, 1.0, f"seed={seed} n={n}"))
    return results


_SUITES = {"grad": check_grad, "variance": check_variance, "sampler": check_sampler}


def cmd_check(args):
    return _report(_SUITES[args.suite]())


# ---------------------------------------------------------------------------
# entry point


def _add_train_flags(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--algorithm", choices=engine.ALGORITHMS)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--eval-every", dest="eval_every", type=int)
    parser.add_argument("--loss")
    parser.add_argument("--regularizer")
    parser.add_argument("--lambda", dest="lambda", type=float)
    parser.add_argument("--eta-decay", dest="eta_decay", type=float)
    parser.add_argument("--hidden", help="comma-separated hidden layer sizes")
    parser.add_argument("--activation", choices=ACTIVATIONS)
    parser.add_argument("--stage-m", dest="stage_m", type=int)
    parser.add_argument("--stage-g", dest="stage_g", type=int)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--data", help="dataset path (LIBSVM/.csv, or `images,labels` IDX pair)")
    parser.add_argument("--test", help="held-out dataset path")
    parser.add_argument("--dimension", type=int, help="feature dimension override")
    parser.add_argument("--test-fraction", dest="test_fraction", type=float)
    parser.add_argument("--track-variance", dest="track_variance", action="store_const", const=True)
    parser.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="activesgd",
        description="Train and benchmark gradient-norm weighted SGD.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train one model and emit metrics + checkpoint")
    _add_train_flags(train_p)
    train_p.set_defaults(func=cmd_train)

    bench_p = sub.add_parser("bench", help="paired benchmark of several algorithms")
    _add_train_flags(bench_p)
    bench_p.add_argument("--algorithms", help="comma-separated algorithm list")
    bench_p.add_argument("--seeds", help="comma-separated seed list")
    bench_p.add_argument("--target-loss", dest="target_loss", type=float)
    bench_p.set_defaults(func=cmd_bench)

    check_p = sub.add_parser("check", help="run a built-in invariant suite")
    check_p.add_argument("suite", choices=sorted(_SUITES))
    check_p.set_defaults(func=cmd_check)

    gen_p = sub.add_parser("gen", help="generate a synthetic biased dataset")
    gen_p.add_argument("--n", type=int, required=True)
    gen_p.add_argument("--dim", type=int, required=True)
    gen_p.add_argument("--easy", type=float, required=True, help="easy fraction in [0, 1]")
    gen_p.add_argument("--margin", type=float, default=0.5)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--out", default="synth.libsvm")
    gen_p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
