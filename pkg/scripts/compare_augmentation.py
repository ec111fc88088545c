"""Baseline vs Aug-RBM vs Aug-AE for three scaled-down architectures.

Prints a mean +/- std table of ACC, BAC and kappa per (architecture,
augmentation) cell, followed by Wilcoxon decisions of each augmented setting
against its baseline. Everything runs on the seeded toy dataset.

    python scripts/compare_augmentation.py --runs 10
"""
import argparse
import time

from boltzclass.augment import GenConfig
from boltzclass.dbn import FineTuneConfig
from boltzclass.experiment import ExperimentConfig, compare, run_experiment
from boltzclass.rbm import TrainConfig
from boltzclass.toy import make_imbalanced

# 64-pixel stand-ins for rbm-500, dbn-2 and dbn-3
ARCHS = {"RBM": [32], "DBN-2": [32, 32], "DBN-3": [64, 64, 32]}
AUGS = {"Baseline": ("none", None),
        "Aug-RBM": ("balanced", GenConfig(eta=0.05, epochs=100, batch_size=8, hidden_dim=32)),
        "Aug-AE": ("balanced", GenConfig(eta=0.05, epochs=100, batch_size=8, hidden_dim=32,
                                         p_drop=0.2))}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--data-seed", type=int, default=123)
    args = p.parse_args()

    ds = make_imbalanced((200, 60, 40), seed=args.data_seed)
    summaries = {}
    t0 = time.perf_counter()
    for arch, hidden in ARCHS.items():
        for aug_name, (plan, gen_cfg) in AUGS.items():
            cfg = ExperimentConfig(
                architecture=hidden, augmentation=plan,
                generator="autoencoder" if aug_name == "Aug-AE" else None,
                generator_config=gen_cfg,
                pretrain=TrainConfig(eta=0.05, epochs=50, batch_size=64),
                finetune=FineTuneConfig(eta=1.0, epochs=100, batch_size=128),
                runs=args.runs, seed=args.seed)
            res = run_experiment(cfg, ds)
            summaries[arch, aug_name] = {"metrics": res.summary()}

    print(f"{'':8}" + "".join(f"{a + ' ' + g:>22}" for a in ARCHS for g in AUGS))
    for metric in ("acc", "bac", "kappa"):
        cells = []
        for arch in ARCHS:
            for aug_name in AUGS:
                m = summaries[arch, aug_name]["metrics"][metric]
                cells.append(f"{m['mean']:.3f}+/-{m['std']:.3f}")
        print(f"{metric:8}" + "".join(f"{c:>22}" for c in cells))

    print("\nWilcoxon signed-rank vs baseline (alpha 0.05), BAC:")
    for arch in ARCHS:
        for aug_name in ("Aug-RBM", "Aug-AE"):
            res = compare(summaries[arch, aug_name], summaries[arch, "Baseline"],
                          metrics=("bac",))["metrics"]["bac"]
            verdict = "different" if res["reject"] else "not different"
            print(f"  {arch:6} {aug_name:8} p={res['p_value']:.4f} ({verdict})")
    print(f"\n{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
