"""160-dimensional diagnostic feature vectors and min-max normalization.

Layout: index = indicator_index * 8 + operator_index, operators ordered
(max, min, median, mean, var, std, skew, sem).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyDataset
from .indicators import INDICATOR_NAMES, IndicatorMatrix

OPERATOR_NAMES: tuple[str, ...] = (
    "max",
    "min",
    "median",
    "mean",
    "var",
    "std",
    "skew",
    "sem",
)

N_FEATURES = len(INDICATOR_NAMES) * len(OPERATOR_NAMES)  # 160

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"ft_{ind}_{op}" for ind in INDICATOR_NAMES for op in OPERATOR_NAMES
)


def aggregate(seq) -> np.ndarray:
    """Eight summary statistics of a sequence, NaN/Inf entries dropped.

    Conventions: median averages the two middle order statistics for even n;
    var/std/sem use the sample (n-1) divisor and are 0 for n=1; skewness is
    Fisher-Pearson g1 with population moments, 0 when the second moment is 0
    or n < 3. An all-non-finite sequence is treated as the singleton [0].
    """
    x = np.asarray(seq, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        x = np.zeros(1)
    return _kernels.octet(np.sort(x))


def extract_features(m: IndicatorMatrix) -> np.ndarray:
    """Concatenate the operator octets of all 20 indicator rows (length 160)."""
    return np.concatenate([aggregate(row) for row in m.sequences])


@dataclass(frozen=True)
class NormParams:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if np.any(self.lo > self.hi):
            raise ValueError("per-dimension min exceeds max")


def fit_normalizer(dataset) -> NormParams:
    """Per-dimension min/max over a list of feature vectors."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot fit normalizer on an empty dataset")
    mat = np.asarray(dataset, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[None, :]
    return NormParams(lo=mat.min(axis=0), hi=mat.max(axis=0))


def normalize(x, p: NormParams) -> np.ndarray:
    """Min-max scale into [0,1]; constant dimensions map to 0, inputs clamped."""
    x = np.asarray(x, dtype=np.float64)
    span = p.hi - p.lo
    out = np.zeros_like(x)
    nz = span > 0
    out[..., nz] = (x[..., nz] - p.lo[nz]) / span[nz]
    return np.clip(out, 0.0, 1.0)


# -- feature dataset CSV ------------------------------------------------------

LABEL_NAMES: tuple[str, ...] = ("loss", "optimizer", "lr", "epoch", "act")


def write_feature_csv(fh, rows, with_labels=False):
    """rows: iterable of (run_id, features[, labels]) tuples.

    labels, when present, is a 5-tuple of 0/1 in LABEL_NAMES order.
    """
    writer = csv.writer(fh)
    header = ["run_id", *FEATURE_NAMES]
    if with_labels:
        header += [f"label_{name}" for name in LABEL_NAMES]
    writer.writerow(header)
    for row in rows:
        run_id, feats = row[0], row[1]
        out = [run_id, *[repr(float(v)) for v in feats]]
        if with_labels:
            out += [str(int(v)) for v in row[2]]
        writer.writerow(out)


def read_feature_csv(fh):
    """Returns (run_ids, features ndarray, labels ndarray-or-None)."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise EmptyDataset("empty feature CSV")
    expected = ["run_id", *FEATURE_NAMES]
    if header[: len(expected)] != expected:
        raise ValueError("feature CSV header does not match the canonical layout")
    label_cols = [f"label_{name}" for name in LABEL_NAMES]
    has_labels = header[len(expected) :] == label_cols
    if header[len(expected) :] and not has_labels:
        raise ValueError(f"unexpected trailing columns: {header[len(expected):]}")
    run_ids, feats, labels = [], [], []
    for row in reader:
        if not row:
            continue
        run_ids.append(row[0])
        feats.append([float(v) for v in row[1 : 1 + N_FEATURES]])
        if has_labels:
            labels.append([int(v) for v in row[1 + N_FEATURES :]])
    return (
        run_ids,
        np.array(feats, dtype=np.float64).reshape(len(run_ids), N_FEATURES),
        np.array(labels, dtype=np.int64) if has_labels else None,
    )


def feature_csv_to_string(rows, with_labels=False) -> str:
    buf = io.StringIO()
    write_feature_csv(buf, rows, with_labels=with_labels)
    return buf.getvalue()
