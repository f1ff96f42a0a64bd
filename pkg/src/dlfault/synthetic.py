"""Parameterized synthetic trace generator with planted fault signatures.

Each fault type perturbs a healthy baseline run in the channels its real-world
counterpart disturbs: an unsuitable learning rate makes the loss oscillate, an
insufficient epoch budget plateaus the accuracy early, a bad activation dies
(zero gradients), a bad optimizer starves the gradients, and a wrong loss
function overfits (train/validation gap plus a rising validation loss).
Used by the end-to-end pipeline tests and the kernel benchmark.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .labels import FaultLabelSet, FaultType
from .trace_model import IntervalRecord, LayerStats, RunTrace

LAYER_NAMES = ("dense_1", "dense_2")


def _layer(rng, w_scale=0.3, g_mean=1e-2, g_zero=0.1):
    w = rng.normal(0, w_scale, size=4)
    lo, hi = float(w.min()), float(w.max())
    return LayerStats(
        layer_name="",
        weight_min=min(lo, -0.01),
        weight_max=max(hi, 0.01),
        weight_mean=float(w.mean()),
        weight_std=float(abs(rng.normal(w_scale, 0.02)) + 1e-3),
        weight_has_nan=False,
        weight_has_inf=False,
        grad_min_abs=g_mean * 0.1,
        grad_max_abs=g_mean * 10.0,
        grad_mean_abs=g_mean * float(rng.uniform(0.8, 1.2)),
        grad_has_nan=False,
        grad_has_inf=False,
        grad_zero_fraction=min(1.0, max(0.0, g_zero + float(rng.normal(0, 0.02)))),
    )


def generate_trace(
    run_id: str,
    faults: FaultLabelSet,
    n_records: int = 40,
    rng: np.random.Generator | None = None,
) -> RunTrace:
    if rng is None:
        rng = np.random.default_rng(0)
    n = n_records
    t = np.arange(n, dtype=np.float64)

    # healthy baseline
    loss = 2.0 * np.exp(-t / 10.0) + 0.1 + rng.normal(0, 0.01, n)
    acc = 0.92 * (1.0 - np.exp(-t / 8.0)) + 0.08 + rng.normal(0, 0.01, n)
    val_gap = 0.03 + rng.normal(0, 0.01, n)
    g_mean = 10 ** rng.normal(-2.0, 0.2, n)
    g_zero = np.full(n, 0.1)
    val_loss_extra = np.zeros(n)

    if FaultType.LR in faults:
        loss = 1.5 + 0.8 * np.where(t % 2 == 0, 1.0, -1.0) + rng.normal(0, 0.05, n)
        acc = np.minimum(acc, 0.35 + rng.normal(0, 0.03, n))
    if FaultType.EPOCH in faults:
        acc = np.minimum(acc, 0.55 * (1.0 - np.exp(-t / 3.0)) + rng.normal(0, 0.005, n))
        loss = np.maximum(loss, 1.0 + rng.normal(0, 0.02, n))
    if FaultType.ACT in faults:
        g_zero = np.full(n, 0.85) + rng.normal(0, 0.02, n)
        acc = np.minimum(acc, 0.45 + rng.normal(0, 0.02, n))
    if FaultType.OPTIMIZER in faults:
        g_mean = 10 ** rng.normal(-9.0, 0.3, n)
        acc = np.minimum(acc, 0.40 + rng.normal(0, 0.02, n))
    if FaultType.LOSS in faults:
        val_gap = 0.25 + rng.normal(0, 0.02, n)
        val_loss_extra = 0.02 * t

    acc = np.clip(acc, 0.0, 1.0)
    val_acc = np.clip(acc - val_gap, 0.0, 1.0)
    val_loss = loss + np.maximum(val_gap, 0) + val_loss_extra

    records = []
    for i in range(n):
        layers = []
        for name in LAYER_NAMES:
            ls = _layer(rng, g_mean=float(g_mean[i]), g_zero=float(g_zero[i]))
            layers.append(replace(ls, layer_name=name))
        records.append(
            IntervalRecord(
                step_index=i,
                epoch=i,
                batch=None,
                loss=float(loss[i]),
                accuracy=float(acc[i]),
                val_loss=float(val_loss[i]),
                val_accuracy=float(val_acc[i]),
                layers=tuple(layers),
            )
        )
    return RunTrace(
        run_id=run_id,
        dataset_name="synthetic",
        interval_policy="per-epoch",
        records=tuple(records),
    )


def generate_corpus(
    n_per_class: int = 36,
    n_records: int = 40,
    seed: int = 0,
) -> list[tuple[str, FaultLabelSet, RunTrace]]:
    """Healthy runs plus one class per single fault type."""
    rng = np.random.default_rng(seed)
    classes = [FaultLabelSet()] + [FaultLabelSet([ft]) for ft in FaultType]
    corpus = []
    for ci, labels in enumerate(classes):
        tag = "+".join(labels.to_names()) or "ok"
        for j in range(n_per_class):
            run_id = f"{tag}-{j:03d}"
            corpus.append(
                (run_id, labels, generate_trace(run_id, labels, n_records, rng))
            )
    return corpus
