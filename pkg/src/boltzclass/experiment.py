"""Config-driven experiment harness: split, optional augmentation of the
training partition, greedy pretraining, fine-tuning, evaluation and report
files.

Per-run seeds are ``seed XOR run_index``. Inside a run, stage ``s`` draws from
``Prng(run_seed ^ (s << 32))`` so adding runs or stages never perturbs
others.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import augment as aug
from . import data as dio
from .core import Prng
from .dbn import DbnClassifier, FineTuneConfig, fine_tune, greedy_pretrain, predict, save_dbn
from .metrics import EvalReport, evaluate, wilcoxon_signed_rank
from .rbm import TrainConfig

log = logging.getLogger(__name__)

__all__ = ["ConfigError", "ExperimentConfig", "RunRecord", "ExperimentResult",
           "expand_architecture", "run_experiment", "report", "compare", "load_summary",
           "OUTPUT_DIR_ENV", "METRICS"]

OUTPUT_DIR_ENV = "BOLTZCLASS_OUTPUT_DIR"
METRICS = ("acc", "bac", "kappa")
RUNS_ASSUMPTION = ("run count is a configuration choice; the reference tables report "
                   "mean +/- deviation without stating how many runs")

STAGE_SPLIT, STAGE_AUGMENT, STAGE_PRETRAIN, STAGE_FINETUNE = 1, 2, 3, 4

NAMED_ARCHITECTURES = {
    "rbm-500": (500,),
    "dbn-2": (500, 500),
    "dbn-3": (2000, 2000, 500),
}


class ConfigError(ValueError):
    pass


def expand_architecture(architecture, dim: int) -> list[int]:
    """Layer sizes including the input, e.g. ``dbn-2`` -> ``[dim, 500, 500]``.

    Besides the named models, ``rbm-<N>`` gives a single hidden layer of N
    units and a list gives custom hidden sizes.
    """
    if isinstance(architecture, (list, tuple)):
        hidden = [int(h) for h in architecture]
    elif architecture in NAMED_ARCHITECTURES:
        hidden = list(NAMED_ARCHITECTURES[architecture])
    elif isinstance(architecture, str) and re.fullmatch(r"rbm-\d+", architecture):
        hidden = [int(architecture.split("-")[1])]
    else:
        raise ConfigError(f"unknown architecture {architecture!r}")
    if not hidden or any(h < 1 for h in hidden):
        raise ConfigError(f"invalid hidden layer sizes {hidden}")
    return [int(dim)] + hidden


@dataclass
class ExperimentConfig:
    dataset_path: str = ""
    dataset_format: str | None = None
    architecture: object = "rbm-500"
    augmentation: str = "none"
    generator: str | None = None
    gibbs_steps: int = 1
    generator_config: aug.GenConfig | None = None
    pretrain: TrainConfig = field(default_factory=TrainConfig)
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)
    train_fraction: float = 0.7
    runs: int = 10
    seed: int = 0
    output_dir: str | None = None
    save_models: bool = False
    dump_samples: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "results")

    def resolved_plan(self, train: dio.Dataset) -> aug.AugmentationPlan | None:
        if self.augmentation in ("none", "", None):
            return None
        if self.augmentation == "balanced":
            plan = aug.AugmentationPlan(aug.balanced_quotas(dio.distribution(train).as_dict()))
        else:
            plan = aug.resolve_plan(self.augmentation)
        if self.generator:
            plan = replace(plan, generator=self.generator)
        return replace(plan, gibbs_steps=self.gibbs_steps)

    def resolved_gen_config(self) -> aug.GenConfig:
        if self.generator_config is not None:
            return self.generator_config
        return aug.default_gen_config(self.generator or "rbm-reconstructor")

    def as_dict(self) -> dict:
        """Every setting with defaults filled in.

        The output directory is left out so that reports written to different
        places stay byte-identical.
        """
        return {
            "seed": self.seed, "runs": self.runs,
            "save_models": self.save_models, "dump_samples": self.dump_samples,
            "dataset": {"path": self.dataset_path, "format": self.dataset_format or
                        ("csv" if str(self.dataset_path).lower().endswith(".csv") else "binary")},
            "model": {"architecture": self.architecture},
            "split": {"train_fraction": self.train_fraction},
            "augmentation": {"plan": self.augmentation,
                             "generator": self.generator or "rbm-reconstructor",
                             "gibbs_steps": self.gibbs_steps},
            "generator": asdict(self.resolved_gen_config()),
            "pretrain": asdict(self.pretrain),
            "finetune": asdict(self.finetune),
            "seed_derivation": "run_seed = seed ^ run; stage stream = run_seed ^ (stage << 32); "
                               "stages: split=1, augment=2, pretrain=3, finetune=4",
            "assumptions": [RUNS_ASSUMPTION],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"seed", "runs", "output_dir", "save_models", "dump_samples", "dataset", "model",
                 "split", "augmentation", "generator", "pretrain", "finetune",
                 "seed_derivation", "assumptions"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            ds = d.get("dataset", {})
            augd = d.get("augmentation", {})
            gen = d.get("generator")
            return cls(
                dataset_path=ds.get("path", ""),
                dataset_format=ds.get("format"),
                architecture=d.get("model", {}).get("architecture", "rbm-500"),
                augmentation=augd.get("plan", "none"),
                generator=augd.get("generator"),
                gibbs_steps=int(augd.get("gibbs_steps", 1)),
                generator_config=_build(aug.GenConfig, gen, "generator",
                                        aug.default_gen_config(augd.get("generator", "rbm")))
                if gen else None,
                pretrain=_build(TrainConfig, d.get("pretrain", {}), "pretrain"),
                finetune=_build(FineTuneConfig, d.get("finetune", {}), "finetune"),
                train_fraction=float(d.get("split", {}).get("train_fraction", 0.7)),
                runs=int(d.get("runs", 10)),
                seed=int(d.get("seed", 0)),
                output_dir=d.get("output_dir"),
                save_models=bool(d.get("save_models", False)),
                dump_samples=bool(d.get("dump_samples", False)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        from ._toml import load_toml
        try:
            d = load_toml(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for item in overrides:
            apply_override(d, item)
        cfg = cls.from_dict(d)
        base = Path(path).parent
        if cfg.dataset_path and not Path(cfg.dataset_path).is_absolute():
            cfg.dataset_path = str(base / cfg.dataset_path)
        return cfg


def _build(klass, values: dict, section: str, base=None):
    names = {f.name for f in fields(klass)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return replace(base, **values) if base is not None else klass(**values)


def apply_override(d: dict, item: str) -> None:
    """Apply ``section.key=value``; the value is parsed as a TOML literal when possible."""
    from ._toml import loads_toml
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = loads_toml(f"v = {raw.strip()}")["v"]
    except ValueError:
        value = raw.strip()
    node = d
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


@dataclass
class RunRecord:
    run: int
    seed: int
    report: EvalReport | None
    pretrain_traces: list = field(default_factory=list)
    finetune_trace: list = field(default_factory=list)
    n_train: int = 0
    n_synthetic: int = 0
    error: str | None = None
    synthetic_samples: dio.Dataset | None = field(default=None, repr=False)
    model: DbnClassifier | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list

    @property
    def completed(self) -> list:
        return [r for r in self.records if r.ok]

    def metric_values(self, metric: str) -> list[float]:
        return [getattr(r.report, metric) for r in self.completed]

    def summary(self) -> dict:
        """Mean and sample standard deviation per metric over completed runs."""
        out = {}
        for m in METRICS:
            vals = self.metric_values(m)
            mean = float(np.mean(vals)) if vals else float("nan")
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            out[m] = {"mean": mean, "std": std, "values": vals}
        return out


def stage_rng(run_seed: int, stage: int) -> Prng:
    return Prng(run_seed ^ (stage << 32))


def _one_run(cfg: ExperimentConfig, ds: dio.Dataset, run: int) -> RunRecord:
    run_seed = cfg.seed ^ run
    rec = RunRecord(run, run_seed, None)
    train, test = dio.stratified_split(ds, cfg.train_fraction, stage_rng(run_seed, STAGE_SPLIT))
    plan = cfg.resolved_plan(train)
    if plan is not None and plan.total > 0:
        augmented = aug.apply_plan(train, plan, cfg.resolved_gen_config(),
                                   stage_rng(run_seed, STAGE_AUGMENT))
        rec.synthetic_samples = augmented.subset(np.flatnonzero(augmented.synthetic))
        train = augmented
    rec.n_train = len(train)
    rec.n_synthetic = int(train.synthetic.sum())

    dims = expand_architecture(cfg.architecture, ds.dim)
    dbn = greedy_pretrain(dims, train.X, cfg.pretrain, stage_rng(run_seed, STAGE_PRETRAIN),
                          num_classes=ds.num_classes)
    rec.pretrain_traces = [[t.mean_reconstruction_error for t in layer]
                           for layer in dbn.pretrain_traces]
    rec.finetune_trace = fine_tune(dbn, train.X, train.y, cfg.finetune,
                                   stage_rng(run_seed, STAGE_FINETUNE))
    rec.report = evaluate(test.y, predict(dbn, test.X), ds.num_classes)
    rec.model = dbn
    return rec


def run_experiment(cfg: ExperimentConfig, dataset: dio.Dataset | None = None) -> ExperimentResult:
    """Run ``cfg.runs`` independent runs. A failing run is recorded, not raised."""
    ds = dataset if dataset is not None else dio.load(cfg.dataset_path, cfg.dataset_format)
    expand_architecture(cfg.architecture, ds.dim)
    records = []
    for run in range(cfg.runs):
        try:
            rec = _one_run(cfg, ds, run)
        except Exception as exc:  # one bad run must not poison the rest
            log.warning("run %d failed: %s", run, exc)
            rec = RunRecord(run, cfg.seed ^ run, None, error=f"{type(exc).__name__}: {exc}")
        else:
            log.info("run %d: acc=%.4f bac=%.4f kappa=%.4f", run, rec.report.acc,
                     rec.report.bac, rec.report.kappa)
        records.append(rec)
    return ExperimentResult(cfg, records)


# --- report files -------------------------------------------------------------------

def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def report(result: ExperimentResult, out_dir=None) -> dict:
    """Write summary, per-run, trace, confusion and config files; returns their paths.

    Files: ``summary.csv`` (metric, mean, std, runs), ``summary.json`` (same plus
    per-run values, read by ``compare``), ``runs.csv``, ``trace.csv`` (fine-tune
    loss, one row per run and epoch), ``pretrain_trace.csv`` (reconstruction
    error per run, layer and epoch), ``confusion.csv`` and ``config.json``.
    """
    if not result.records:
        raise ValueError("no run records to report")
    out = Path(out_dir) if out_dir is not None else result.config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    summary = result.summary()
    n_ok, n_all = len(result.completed), len(result.records)
    coverage = f"{n_ok}/{n_all}"
    paths = {}

    rows = [["metric", "mean", "std", "runs_completed", "runs_requested"]]
    rows += [[m, _num(summary[m]["mean"]), _num(summary[m]["std"]), n_ok, n_all] for m in METRICS]
    paths["summary_csv"] = out / "summary.csv"
    paths["summary_csv"].write_text(_csv_text(rows))

    doc = {"coverage": coverage, "complete": n_ok == n_all, "runs_requested": n_all,
           "metrics": summary, "assumptions": [RUNS_ASSUMPTION],
           "failures": [{"run": r.run, "error": r.error} for r in result.records if not r.ok]}
    paths["summary_json"] = out / "summary.json"
    paths["summary_json"].write_text(json.dumps(doc, indent=2) + "\n")

    rows = [["run", "seed", "status", "acc", "bac", "kappa", "n_train", "n_synthetic", "error"]]
    for r in result.records:
        if r.ok:
            rows.append([r.run, r.seed, "ok", _num(r.report.acc), _num(r.report.bac),
                         _num(r.report.kappa), r.n_train, r.n_synthetic, ""])
        else:
            rows.append([r.run, r.seed, "failed", "", "", "", "", "", r.error])
    paths["runs_csv"] = out / "runs.csv"
    paths["runs_csv"].write_text(_csv_text(rows))

    rows = [["run", "epoch", "loss"]]
    rows += [[r.run, e, _num(v)] for r in result.completed for e, v in enumerate(r.finetune_trace)]
    paths["trace_csv"] = out / "trace.csv"
    paths["trace_csv"].write_text(_csv_text(rows))

    rows = [["run", "layer", "epoch", "reconstruction_error"]]
    rows += [[r.run, l, e, _num(v)] for r in result.completed
             for l, layer in enumerate(r.pretrain_traces) for e, v in enumerate(layer)]
    paths["pretrain_trace_csv"] = out / "pretrain_trace.csv"
    paths["pretrain_trace_csv"].write_text(_csv_text(rows))

    rows = [["run", "true_class"] + [f"pred_{k}" for k in range(_num_classes(result))]]
    for r in result.completed:
        for t, row in enumerate(r.report.confusion.tolist()):
            rows.append([r.run, t] + row)
    paths["confusion_csv"] = out / "confusion.csv"
    paths["confusion_csv"].write_text(_csv_text(rows))

    paths["config_json"] = out / "config.json"
    paths["config_json"].write_text(json.dumps(result.config.as_dict(), indent=2) + "\n")

    if result.config.save_models:
        for r in result.completed:
            save_dbn(r.model, out / f"model_run{r.run:03d}.dbn")
    if result.config.dump_samples:
        for r in result.completed:
            if r.synthetic_samples is not None:
                p = out / f"synthetic_run{r.run:03d}.csv"
                dio.save_csv(r.synthetic_samples, p)
                paths[f"samples_run{r.run}"] = p
    return paths


def _num_classes(result: ExperimentResult) -> int:
    done = result.completed
    return done[0].report.confusion.k if done else 0


# --- comparison -----------------------------------------------------------------------

def load_summary(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "summary.json"
    doc = json.loads(p.read_text())
    if "metrics" not in doc:
        raise ValueError(f"{p}: not a summary document")
    return doc


def compare(summary_a, summary_b, alpha: float = 0.05, metrics=METRICS) -> dict:
    """Paired Wilcoxon signed-rank test per metric over per-run values."""
    a = summary_a if isinstance(summary_a, dict) else load_summary(summary_a)
    b = summary_b if isinstance(summary_b, dict) else load_summary(summary_b)
    out = {"alpha": alpha, "metrics": {}}
    for m in metrics:
        xa, xb = a["metrics"][m]["values"], b["metrics"][m]["values"]
        if len(xa) != len(xb):
            raise ValueError(f"run-count mismatch for {m}: {len(xa)} vs {len(xb)}")
        out["metrics"][m] = wilcoxon_signed_rank(xa, xb, alpha).as_dict()
    return out
