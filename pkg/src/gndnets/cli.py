"""Command-line interface.

One executable with subcommands train, experiment, sweep, dump, and gen-sbm.
All configuration lives in a single JSON run-spec file; --seed, --out, and
--threads override it. Results go to stdout as one JSON document; every
diagnostic goes to stderr. Exit codes: 0 success, 2 configuration error,
3 runtime failure.

Run-spec schema (unknown keys are rejected):

  {
    "dataset": {"edges": str, "features": str, "labels": str},   # or:
    "sbm": {"n_per_class": int, "n_classes": int, "p_in": num, "p_out": num,
             "feature_dim": int, "feature_noise": num, "seed": int},
    "model": {"variant": str, "K": int, "T": int, "r": int, "hidden_mlp": int,
              "ds_hidden": int, "gcn_hidden": int, "dropout": num,
              "gamma": num, "t_heat": num, "renormalize_schedule": bool},
    "train": {"lr": num, "l2": num, "max_epochs": int, "patience": int, "seed": int},
    "split": {"labels_per_class": int | [int], "validation_size": int, "seed": int},
    "runs": int,
    "variants": [str]          # experiment only; default [model.variant]
  }

Exactly one of "dataset" / "sbm" must be present; "model.variant" is
required. The experiment command writes results.json plus a results.csv
table with one row per variant, one column per labels_per_class value, and
"mean±std" percentage cells. Timing never enters the JSON results, so
repeated runs of the same spec produce byte-identical output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .data import DatasetFiles, SbmConfig, dump_embeddings, generate_sbm, load_dataset, save_dataset
from .errors import ConfigError, GndError
from .graph import add_self_loops, hop_sequence, transition_matrix
from .models import (
    VARIANTS,
    GraphOperators,
    Model,
    default_config,
    save_checkpoint,
)
from .autodiff import glorot_init
from .training import SplitSpec, TrainConfig, run_experiment, sample_split, train, evaluate

_SCHEMA = {
    "dataset": {"edges": str, "features": str, "labels": str},
    "sbm": {
        "n_per_class": int,
        "n_classes": int,
        "p_in": float,
        "p_out": float,
        "feature_dim": int,
        "feature_noise": float,
        "seed": int,
    },
    "model": {
        "variant": str,
        "K": int,
        "T": int,
        "r": int,
        "hidden_mlp": int,
        "ds_hidden": int,
        "gcn_hidden": int,
        "dropout": float,
        "gamma": float,
        "t_heat": float,
        "renormalize_schedule": bool,
    },
    "train": {"lr": float, "l2": float, "max_epochs": int, "patience": int, "seed": int},
    "split": {"labels_per_class": "int_or_list", "validation_size": int, "seed": int},
    "runs": int,
    "variants": "variant_list",
}

_REQUIRED_SBM = ("n_per_class", "n_classes", "p_in", "p_out", "feature_dim")


def _check_type(path, value, expected):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
        return value
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {type(value).__name__}")
        return value
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {type(value).__name__}")
        return value
    if expected == "int_or_list":
        if isinstance(value, bool):
            raise ConfigError(f"{path}: expected an integer or list of integers")
        if isinstance(value, int):
            return value
        if isinstance(value, list) and value and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            return value
        raise ConfigError(f"{path}: expected an integer or non-empty list of integers")
    if expected == "variant_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of variant names")
        for v in value:
            if v not in VARIANTS:
                raise ConfigError(f"{path}: unknown variant {v!r}")
        return value
    raise AssertionError(expected)


def load_spec(path) -> dict:
    """Parse and schema-check a run-spec file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read spec file: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("run spec must be a JSON object")
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key: {key}")
        expected = _SCHEMA[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object")
            for sub, sub_value in value.items():
                if sub not in expected:
                    raise ConfigError(f"unknown key: {key}.{sub}")
                value[sub] = _check_type(f"{key}.{sub}", sub_value, expected[sub])
        else:
            raw[key] = _check_type(key, value, expected)
    if ("dataset" in raw) == ("sbm" in raw):
        raise ConfigError("spec must contain exactly one of 'dataset' or 'sbm'")
    if "model" not in raw or "variant" not in raw["model"]:
        raise ConfigError("model.variant is required")
    if raw["model"]["variant"] not in VARIANTS:
        raise ConfigError(f"model.variant: unknown variant {raw['model']['variant']!r}")
    if "dataset" in raw:
        for field in ("edges", "features", "labels"):
            if field not in raw["dataset"]:
                raise ConfigError(f"dataset.{field} is required")
    else:
        for field in _REQUIRED_SBM:
            if field not in raw["sbm"]:
                raise ConfigError(f"sbm.{field} is required")
    if raw.get("runs", 1) < 1:
        raise ConfigError("runs must be at least 1")
    return raw


def _build_graph(spec):
    if "sbm" in spec:
        return generate_sbm(SbmConfig(**spec["sbm"]))
    return load_dataset(DatasetFiles(**spec["dataset"]))


def _model_config(spec, variant=None):
    fields = dict(spec.get("model", {}))
    variant = variant or fields.pop("variant")
    fields.pop("variant", None)
    return default_config(variant, **fields)


def _train_config(spec, seed=None):
    cfg = TrainConfig(**spec.get("train", {}))
    if seed is not None:
        cfg.seed = seed
    return cfg


def _split_spec(spec, seed=None, m=None):
    fields = dict(spec.get("split", {}))
    if m is not None:
        fields["labels_per_class"] = m
    if "labels_per_class" not in fields:
        raise ConfigError("split.labels_per_class is required")
    if isinstance(fields["labels_per_class"], list):
        raise ConfigError("split.labels_per_class must be a single integer here")
    out = SplitSpec(**fields)
    if seed is not None:
        out.seed = seed
    return out


def _m_values(spec):
    m = spec.get("split", {}).get("labels_per_class")
    if m is None:
        raise ConfigError("split.labels_per_class is required")
    return m if isinstance(m, list) else [m]


def _emit(payload):
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _log(message):
    print(message, file=sys.stderr)


def cmd_train(spec, args):
    graph = _build_graph(spec)
    model_config = _model_config(spec)
    train_config = _train_config(spec, args.seed)
    split_spec = _split_spec(spec, args.seed)
    split = sample_split(graph, split_spec)
    rng = np.random.default_rng(train_config.seed)
    model = Model(model_config, graph.n_features, graph.n_classes, rng)
    ops = GraphOperators.prepare(graph, model_config)
    history = train(model, graph, split, train_config, rng=rng, ops=ops)
    acc = evaluate(model, graph, split.test, ops=ops)
    os.makedirs(args.out, exist_ok=True)
    checkpoint = os.path.join(args.out, "checkpoint.json")
    save_checkpoint(model, checkpoint)
    _log(f"trained {model_config.variant} for {history.epochs_run} epochs")
    _emit({
        "accuracy": acc,
        "epochs": history.epochs_run,
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
        "checkpoint": checkpoint,
    })
    return 0


def cmd_experiment(spec, args):
    graph = _build_graph(spec)
    variants = spec.get("variants") or [spec["model"]["variant"]]
    m_values = _m_values(spec)
    runs = spec.get("runs", 1)
    cells = {}
    results = []
    for variant in variants:
        model_config = _model_config(spec, variant)
        for m in m_values:
            result = run_experiment(
                graph,
                model_config,
                _train_config(spec, args.seed),
                _split_spec(spec, args.seed, m=m),
                runs,
                n_threads=args.threads,
            )
            _log(f"{variant} m={m}: mean={result.mean:.4f} std={result.std:.4f} "
                 f"({result.wall_time:.1f}s)")
            results.append(result.to_json_dict())
            cells[(variant, m)] = f"{100 * result.mean:.2f}±{100 * result.std:.2f}"
    payload = {"runs": runs, "results": results}
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "results.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out, "results.csv"), "w") as fh:
        fh.write("variant," + ",".join(f"m={m}" for m in m_values) + "\n")
        for variant in variants:
            fh.write(variant + "," + ",".join(cells[(variant, m)] for m in m_values) + "\n")
    _emit(payload)
    return 0


def cmd_sweep(spec, args):
    if args.param == "T" and spec["model"]["variant"] != "gnd_ds":
        raise ConfigError("a T sweep requires model.variant gnd_ds")
    graph = _build_graph(spec)
    values = args.values
    runs = spec.get("runs", 1)
    rows = []
    for value in values:
        model_config = _model_config(spec)
        setattr(model_config, args.param, value)
        model_config.validate()
        result = run_experiment(
            graph,
            model_config,
            _train_config(spec, args.seed),
            _split_spec(spec, args.seed),
            runs,
            n_threads=args.threads,
        )
        _log(f"{args.param}={value}: mean={result.mean:.4f} std={result.std:.4f}")
        rows.append({"value": value, "mean": result.mean, "std": result.std})
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
        fh.write(f"{args.param},mean,std\n")
        for row in rows:
            fh.write(f"{row['value']},{row['mean']:.6f},{row['std']:.6f}\n")
    _emit({"param": args.param, "rows": rows})
    return 0


def cmd_dump(spec, args):
    graph = _build_graph(spec)
    model_config = _model_config(spec)
    k = args.k if args.k is not None else model_config.K
    if k < 1:
        raise ConfigError("--k must be at least 1")
    seed = args.seed if args.seed is not None else spec.get("train", {}).get("seed", 0)
    rng = np.random.default_rng(seed)
    theta = glorot_init(graph.n_features, model_config.r, rng)
    w = transition_matrix(add_self_loops(graph))
    hops = hop_sequence(w, graph.features @ theta, k)
    paths = dump_embeddings(hops, args.out)
    _log(f"wrote {len(paths)} hop files to {args.out}")
    _emit({"files": paths, "k": k, "r": model_config.r})
    return 0


def cmd_gen_sbm(spec, args):
    if "sbm" not in spec:
        raise ConfigError("gen-sbm needs an 'sbm' section in the spec")
    graph = generate_sbm(SbmConfig(**spec["sbm"]))
    os.makedirs(args.out, exist_ok=True)
    files = DatasetFiles(
        edges=os.path.join(args.out, "edges.txt"),
        features=os.path.join(args.out, "features.csv"),
        labels=os.path.join(args.out, "labels.txt"),
    )
    save_dataset(graph, files)
    n_edges = graph.adjacency.nnz // 2
    _log(f"wrote SBM graph with {graph.n_vertices} vertices, {n_edges} edges")
    _emit({
        "paths": dataclasses.asdict(files),
        "n_vertices": graph.n_vertices,
        "n_edges": n_edges,
    })
    return 0


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")


def build_parser():
    parser = argparse.ArgumentParser(prog="gndnets",
                                     description="Graph neural diffusion networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=True):
        p.add_argument("spec", help="path to the JSON run spec")
        p.add_argument("--seed", type=int, default=None,
                       help="override train.seed and split.seed")
        p.add_argument("--out", default="gndnets_out", help="output directory")
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="worker threads for independent runs")

    common(sub.add_parser("train", help="single train/evaluate run"))
    common(sub.add_parser("experiment", help="repeated-runs protocol"))
    sweep = sub.add_parser("sweep", help="repeat an experiment over K or T")
    common(sweep)
    sweep.add_argument("--param", choices=("K", "T"), required=True)
    sweep.add_argument("--values", type=_int_list, required=True,
                       help="comma-separated values, e.g. 1,5,10,20")
    dump = sub.add_parser("dump", help="write hop-wise embedding CSVs")
    common(dump, threads=False)
    dump.add_argument("--k", type=int, default=None, help="number of hops to dump")
    common(sub.add_parser("gen-sbm", help="write a block-model dataset to disk"),
           threads=False)
    return parser


_COMMANDS = {
    "train": cmd_train,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
    "dump": cmd_dump,
    "gen-sbm": cmd_gen_sbm,
}


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        _log("error: --threads must be at least 1")
        return 2
    try:
        spec = load_spec(args.spec)
        return _COMMANDS[args.command](spec, args)
    except ConfigError as err:
        _log(f"configuration error: {err}")
        return 2
    except (GndError, OSError) as err:
        _log(f"error: {err}")
        return 3


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
