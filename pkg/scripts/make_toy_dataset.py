"""Write a seeded imbalanced toy dataset (noisy 8x8 bar images).

    python scripts/make_toy_dataset.py data/toy.csv --supports 200 60 40 --seed 123
"""
import argparse

from boltzclass import data as dio
from boltzclass.toy import make_imbalanced


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--supports", type=int, nargs="+", default=[200, 60, 40])
    p.add_argument("--side", type=int, default=8)
    p.add_argument("--flip", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=123)
    args = p.parse_args()
    ds = make_imbalanced(tuple(args.supports), side=args.side, flip=args.flip, seed=args.seed)
    dio.save(ds, args.out)
    print(dio.distribution(ds).format_table())


if __name__ == "__main__":
    main()
