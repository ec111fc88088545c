"""Command-line entry point: ``boltzclass {train,augment,evaluate,compare,inspect}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import data as dio
from .dbn import DBN_MAGIC, load_dbn, predict
from .experiment import ConfigError, ExperimentConfig, compare, report, run_experiment
from .metrics import evaluate
from .rbm import RBM_MAGIC, load_rbm

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class DataError(Exception):
    pass


def _load_dataset(path, fmt=None) -> dio.Dataset:
    try:
        return dio.load(path, fmt)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None


def cmd_train(args) -> int:
    cfg = ExperimentConfig.from_file(args.config, args.set)
    if args.output:
        cfg.output_dir = args.output
    ds = _load_dataset(cfg.dataset_path, cfg.dataset_format)
    result = run_experiment(cfg, ds)
    paths = report(result)
    summary = result.summary()
    for m in ("acc", "bac", "kappa"):
        print(f"{m:>6}: {summary[m]['mean']:.4f} +/- {summary[m]['std']:.4f}")
    print(f"runs completed: {len(result.completed)}/{len(result.records)}")
    print(f"reports written to {paths['summary_csv'].parent}")
    return EXIT_OK if result.completed else EXIT_RUNTIME


def cmd_augment(args) -> int:
    ds = _load_dataset(args.data, args.format)
    try:
        plan = aug.resolve_plan(args.plan)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot resolve plan {args.plan!r}: {exc}") from None
    if args.generator:
        plan = aug.AugmentationPlan(plan.per_class_quota, args.generator, plan.gibbs_steps)
    if args.gibbs_steps:
        plan = aug.AugmentationPlan(plan.per_class_quota, plan.generator, args.gibbs_steps)
    cfg = aug.default_gen_config(plan.generator)
    overrides = {k: v for k, v in (("eta", args.eta), ("epochs", args.epochs),
                                   ("batch_size", args.batch_size),
                                   ("hidden_dim", args.hidden_dim)) if v is not None}
    cfg = aug.GenConfig(**{**cfg.__dict__, **overrides, "seed": args.seed})
    report_ = aug.validate_plan(plan, dio.distribution(ds).as_dict())
    print(report_.message)
    if not report_.ok:
        return EXIT_CONFIG
    out = aug.apply_plan(ds, plan, cfg, args.seed)
    dio.save(out, args.out, args.out_format)
    print(dio.distribution(out).format_table())
    if args.dump_samples:
        dio.save_csv(out.subset(np.flatnonzero(out.synthetic)), args.dump_samples)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        dbn = load_dbn(args.model)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load model {args.model}: {exc}") from None
    ds = _load_dataset(args.data, args.format)
    rep = evaluate(ds.y, predict(dbn, ds.X), dbn.num_classes)
    text = rep.to_json() if args.as_format == "json" else \
        "acc,bac,kappa,k,confusion\n" + rep.to_csv_row()
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    print(text.rstrip("\n"))
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        res = compare(args.a, args.b, args.alpha, args.metric or ("acc", "bac", "kappa"))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read summaries: {exc}") from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print(json.dumps(res, indent=2))
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(args.path)
    try:
        head = path.read_bytes()[:4]
    except OSError as exc:
        raise DataError(str(exc)) from None
    if head == DBN_MAGIC:
        dbn = load_dbn(path)
        print(f"DBN classifier: layers {dbn.shapes}, {dbn.num_classes} classes")
    elif head == RBM_MAGIC:
        r = load_rbm(path)
        print(f"RBM: {r.m} visible x {r.n} hidden")
    else:
        ds = _load_dataset(path, args.format)
        print(f"dataset: {len(ds)} samples, dim {ds.dim}, {ds.num_classes} classes")
        print(dio.distribution(ds).format_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boltzclass", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run an experiment config end to end")
    t.add_argument("config")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. pretrain.eta=0.01")
    t.add_argument("--output", help="output directory (default: config, then "
                                    "$BOLTZCLASS_OUTPUT_DIR, then ./results)")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("augment", help="oversample a dataset with a plan or preset")
    a.add_argument("--data", required=True)
    a.add_argument("--format", choices=("csv", "binary"))
    a.add_argument("--plan", required=True, help=f"plan file or preset: {sorted(aug.PRESETS)}")
    a.add_argument("--out", required=True)
    a.add_argument("--out-format", choices=("csv", "binary"))
    a.add_argument("--generator", choices=("rbm-reconstructor", "autoencoder"))
    a.add_argument("--gibbs-steps", type=int)
    a.add_argument("--eta", type=float)
    a.add_argument("--epochs", type=int)
    a.add_argument("--batch-size", type=int)
    a.add_argument("--hidden-dim", type=int)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--dump-samples", metavar="CSV", help="also write the synthetic rows alone")
    a.set_defaults(func=cmd_augment)

    e = sub.add_parser("evaluate", help="score a saved classifier on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--format", choices=("csv", "binary"))
    e.add_argument("--as", dest="as_format", choices=("json", "csv"), default="json")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="Wilcoxon signed-rank test between two experiments")
    c.add_argument("a", help="summary.json or its directory")
    c.add_argument("b")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--metric", action="append", choices=("acc", "bac", "kappa"))
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("inspect", help="describe a dataset or model file")
    i.add_argument("path")
    i.add_argument("--format", choices=("csv", "binary"))
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
