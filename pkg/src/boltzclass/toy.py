"""Seeded synthetic image-vector datasets for smoke tests and demos."""
from __future__ import annotations

import numpy as np

from .core import Prng, as_rng
from .data import Dataset


def bar_prototypes(side: int = 8) -> np.ndarray:
    """Three side x side patterns: horizontal bars, vertical bars, a cross."""
    img = np.zeros((3, side, side))
    img[0, ::2, :] = 1.0
    img[1, :, ::2] = 1.0
    mid = side // 2
    img[2, mid - 1:mid + 1, :] = 1.0
    img[2, :, mid - 1:mid + 1] = 1.0
    return img.reshape(3, -1)


def make_imbalanced(supports=(200, 60, 40), side: int = 8, flip: float = 0.2,
                    mix: float = 0.3, seed: int | Prng = 0) -> Dataset:
    """Noisy bar images with class supports ``supports``.

    Each sample blends its class prototype with a random other prototype
    (weight up to ``mix``), flips each pixel with probability ``flip`` and
    jitters intensities, so classes overlap but stay separable on average.
    """
    rng = as_rng(seed)
    protos = bar_prototypes(side)[: len(supports)]
    k, dim = protos.shape
    X, y = [], []
    for label, count in enumerate(supports):
        for _ in range(count):
            other = (label + 1 + rng.integers(k - 1)) % k if k > 1 else label
            w = mix * rng.uniform()
            base = (1.0 - w) * protos[label] + w * protos[other]
            flips = rng.uniform(dim) < flip
            base = np.where(flips, 1.0 - base, base)
            x = base + rng.normal(0.1, dim)
            X.append(np.clip(x, 0.0, 1.0))
            y.append(label)
    return Dataset(np.array(X), np.array(y), [str(i) for i in range(k)])
