"""Labelled image-vector datasets: CSV and binary containers, class
distribution summaries and stratified splitting.

CSV layout
----------
An optional comment line ``# classes: name0,name1,...`` followed by an
optional header. With a header, the columns ``label`` and (optionally)
``synthetic`` are recognised by name and every other column is a feature.
Without a header each row is ``label, f_0, ..., f_{dim-1}``. Labels are
integer class indices.

Binary container (all little-endian)
------------------------------------
====================  ======================================================
``4s``                magic ``EBMD``
``u8``                version (1)
``u8``                feature encoding: 0 = float64, 1 = uint8 (divided by 255)
``u32`` ``u32``       dim, count
``u32``               number of class names, each as ``u16`` length + UTF-8
``u32 * count``       labels
``u8 * count``        synthetic flags
payload               ``count * dim`` features, row-major
====================  ======================================================
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Prng, as_rng

__all__ = ["Dataset", "ClassDistribution", "load", "save", "load_csv", "save_csv",
           "load_binary", "save_binary", "distribution", "stratified_split", "concat",
           "DatasetFormatError"]

MAGIC = b"EBMD"
VERSION = 1
ENC_F64, ENC_U8 = 0, 1
_HEAD = struct.Struct("<4sBBII")


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message carries the line or byte offset."""


@dataclass
class Dataset:
    """Feature matrix ``X`` (count x dim, values in [0, 1]), integer labels and
    synthetic-provenance flags."""
    X: np.ndarray
    y: np.ndarray
    class_names: list[str]
    synthetic: np.ndarray = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim == 1 and self.X.size == 0:
            self.X = self.X.reshape(0, 0)
        if self.X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.X.shape}")
        self.y = np.asarray(self.y, dtype=np.int64).ravel()
        if self.synthetic is None:
            self.synthetic = np.zeros(self.y.shape[0], dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool).ravel()
        self.class_names = [str(c) for c in self.class_names]
        if not (self.X.shape[0] == self.y.shape[0] == self.synthetic.shape[0]):
            raise ValueError("features, labels and synthetic flags differ in length")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.class_names)):
            raise ValueError(f"labels must lie in [0, {len(self.class_names)})")
        if self.X.size and (np.any(self.X < 0.0) or np.any(self.X > 1.0)):
            raise ValueError("features must lie in [0, 1]")

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], list(self.class_names), self.synthetic[idx])

    def of_class(self, label: int, real_only: bool = False) -> np.ndarray:
        mask = self.y == label
        if real_only:
            mask &= ~self.synthetic
        return self.X[mask]

    def class_index(self, name) -> int:
        key = str(name)
        if key in self.class_names:
            return self.class_names.index(key)
        raise KeyError(f"unknown class {name!r}; known: {self.class_names}")


def concat(a: Dataset, b: Dataset) -> Dataset:
    if a.class_names != b.class_names:
        raise ValueError("cannot concatenate datasets with different class lists")
    if len(a) and len(b) and a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    X = np.vstack([a.X, b.X]) if len(a) and len(b) else (a.X if len(a) else b.X)
    return Dataset(X, np.concatenate([a.y, b.y]), list(a.class_names),
                   np.concatenate([a.synthetic, b.synthetic]))


# --- CSV ----------------------------------------------------------------------

def load_csv(path) -> Dataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    class_names = None
    rows = []
    header = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("classes:"):
                class_names = [c.strip() for c in next(csv.reader([body[len("classes:"):]]))]
            continue
        fields = next(csv.reader([line]))
        if header is None and not rows and fields and fields[0].strip().lower() == "label":
            header = [f.strip().lower() for f in fields]
            continue
        rows.append((lineno, fields))

    syn_col = header.index("synthetic") if header and "synthetic" in header else None
    feat_cols = ([i for i, h in enumerate(header) if h not in ("label", "synthetic")]
                 if header else None)
    labels, flags, feats = [], [], []
    dim = len(feat_cols) if feat_cols is not None else None
    for lineno, fields in rows:
        try:
            label = int(fields[0])
            syn = bool(int(fields[syn_col])) if syn_col is not None else False
            vals = ([float(fields[i]) for i in feat_cols] if feat_cols is not None
                    else [float(f) for f in fields[1:]])
        except (ValueError, IndexError) as exc:
            raise DatasetFormatError(f"{path}: line {lineno}: malformed row ({exc})") from None
        if header is not None and len(fields) != len(header):
            raise DatasetFormatError(f"{path}: line {lineno}: expected {len(header)} columns, "
                                     f"found {len(fields)}")
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise DatasetFormatError(f"{path}: line {lineno}: expected {dim} features, "
                                     f"found {len(vals)}")
        labels.append(label)
        flags.append(syn)
        feats.append(vals)

    dim = dim or 0
    X = np.array(feats, dtype=np.float64).reshape(len(feats), dim)
    y = np.array(labels, dtype=np.int64)
    if class_names is None:
        k = int(y.max()) + 1 if y.size else 0
        class_names = [str(i) for i in range(k)]
    try:
        return Dataset(X, y, class_names, np.array(flags, dtype=bool))
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


def save_csv(ds: Dataset, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write("# classes: ")
    w.writerow(ds.class_names)
    w.writerow(["label", "synthetic"] + [f"x{i}" for i in range(ds.dim)])
    for x, label, syn in zip(ds.X, ds.y, ds.synthetic):
        w.writerow([int(label), int(syn)] + [repr(float(v)) for v in x])
    Path(path).write_text(buf.getvalue())


# --- binary container ---------------------------------------------------------

def save_binary(ds: Dataset, path, encoding: str = "f64") -> None:
    """Write the ``EBMD`` container. ``encoding="u8"`` quantises features to bytes."""
    enc = {"f64": ENC_F64, "u8": ENC_U8}[encoding]
    parts = [_HEAD.pack(MAGIC, VERSION, enc, ds.dim, len(ds)),
             struct.pack("<I", len(ds.class_names))]
    for name in ds.class_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    parts.append(ds.y.astype("<u4").tobytes())
    parts.append(ds.synthetic.astype(np.uint8).tobytes())
    if enc == ENC_F64:
        parts.append(ds.X.astype("<f8").tobytes())
    else:
        parts.append(np.rint(ds.X * 255.0).astype(np.uint8).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_binary(path) -> Dataset:
    buf = Path(path).read_bytes()

    def need(pos, nbytes, what):
        if len(buf) - pos < nbytes:
            raise DatasetFormatError(f"{path}: truncated {what} at offset {pos}")

    need(0, _HEAD.size, "header")
    magic, version, enc, dim, count = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version} at offset 4")
    if enc not in (ENC_F64, ENC_U8):
        raise DatasetFormatError(f"{path}: unknown feature encoding {enc} at offset 5")
    pos = _HEAD.size
    need(pos, 4, "class count")
    (n_names,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    names = []
    for _ in range(n_names):
        need(pos, 2, "class name length")
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        need(pos, ln, "class name")
        names.append(buf[pos:pos + ln].decode("utf-8"))
        pos += ln
    need(pos, 4 * count, "label array")
    y = np.frombuffer(buf, "<u4", count, pos).astype(np.int64)
    pos += 4 * count
    need(pos, count, "synthetic flags")
    syn = np.frombuffer(buf, np.uint8, count, pos).astype(bool)
    pos += count
    width = 8 if enc == ENC_F64 else 1
    need(pos, width * count * dim, "feature payload")
    if enc == ENC_F64:
        X = np.frombuffer(buf, "<f8", count * dim, pos).astype(np.float64)
    else:
        X = np.frombuffer(buf, np.uint8, count * dim, pos).astype(np.float64) / 255.0
    pos += width * count * dim
    if pos != len(buf):
        raise DatasetFormatError(f"{path}: {len(buf) - pos} trailing bytes at offset {pos}")
    try:
        return Dataset(X.reshape(count, dim), y, names, syn)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


def _resolve_format(path, fmt):
    if fmt:
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "binary"


def load(path, format: str | None = None) -> Dataset:
    fmt = _resolve_format(path, format)
    if fmt == "csv":
        return load_csv(path)
    if fmt == "binary":
        return load_binary(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def save(ds: Dataset, path, format: str | None = None) -> None:
    fmt = _resolve_format(path, format)
    if fmt == "csv":
        save_csv(ds, path)
    elif fmt == "binary":
        save_binary(ds, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


# --- summaries and splits -------------------------------------------------------

@dataclass(frozen=True)
class ClassDistribution:
    class_names: tuple
    counts: tuple
    synthetic: tuple = field(default=())

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def total_synthetic(self) -> int:
        return sum(self.synthetic)

    @property
    def majority(self) -> int:
        """Index of the largest class (lowest index on ties)."""
        return int(np.argmax(self.counts))

    def as_dict(self) -> dict:
        return {name: n for name, n in zip(self.class_names, self.counts)}

    def format_table(self) -> str:
        """Table-2-style listing; synthetic counts in parentheses."""
        lines = [f"{'class':>10}  {'samples':>12}"]
        for name, n, s in zip(self.class_names, self.counts, self.synthetic):
            extra = f" ({s})" if s else ""
            lines.append(f"{name:>10}  {n:>12}{extra}")
        extra = f" ({self.total_synthetic})" if self.total_synthetic else ""
        lines.append(f"{'total':>10}  {self.total:>12}{extra}")
        return "\n".join(lines)


def distribution(ds: Dataset) -> ClassDistribution:
    k = ds.num_classes
    counts = np.bincount(ds.y, minlength=k)
    syn = np.bincount(ds.y[ds.synthetic], minlength=k)
    return ClassDistribution(tuple(ds.class_names), tuple(int(c) for c in counts),
                             tuple(int(s) for s in syn))


def stratified_split(ds: Dataset, train_fraction: float, seed: int | Prng = 0):
    """Per-class shuffled split of the real samples.

    Each class contributes round(f * count) real samples to train, clamped so
    both sides get at least one. Synthetic samples always go to train.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = as_rng(seed)
    train_idx, test_idx = [], []
    for label in range(ds.num_classes):
        real = np.flatnonzero((ds.y == label) & ~ds.synthetic)
        if real.size == 0 and not np.any(ds.y == label):
            continue
        if real.size < 2:
            raise ValueError(f"class {ds.class_names[label]!r} has {real.size} real "
                             "sample(s); at least 2 are needed to split")
        real = real[rng.permutation(real.size)]
        n_train = min(max(int(np.floor(train_fraction * real.size + 0.5)), 1), real.size - 1)
        train_idx.append(real[:n_train])
        test_idx.append(real[n_train:])
    train_idx.append(np.flatnonzero(ds.synthetic))
    train = np.sort(np.concatenate(train_idx)) if train_idx else np.array([], dtype=np.int64)
    test = np.sort(np.concatenate(test_idx)) if test_idx else np.array([], dtype=np.int64)
    return ds.subset(train), ds.subset(test)
