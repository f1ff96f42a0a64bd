import math

import numpy as np
import pytest

from dlfault.trace_model import IntervalRecord, LayerStats, RunTrace


def make_layer(
    name="dense_1",
    w_min=-0.5,
    w_max=0.5,
    w_mean=0.0,
    w_std=0.1,
    w_nan=False,
    w_inf=False,
    g_min=1e-3,
    g_max=1e-1,
    g_mean=1e-2,
    g_nan=False,
    g_inf=False,
    g_zero=0.1,
):
    return LayerStats(
        layer_name=name,
        weight_min=w_min,
        weight_max=w_max,
        weight_mean=w_mean,
        weight_std=w_std,
        weight_has_nan=w_nan,
        weight_has_inf=w_inf,
        grad_min_abs=g_min,
        grad_max_abs=g_max,
        grad_mean_abs=g_mean,
        grad_has_nan=g_nan,
        grad_has_inf=g_inf,
        grad_zero_fraction=g_zero,
    )


def make_trace(
    loss,
    acc=None,
    val_loss=None,
    val_acc=None,
    layers=None,
    run_id="test-run",
):
    """Build a RunTrace from parallel value lists; None entries mean absent."""
    n = len(loss)
    if acc is None:
        acc = [0.5] * n
    if layers is None:
        layers = [(make_layer(),)] * n
    records = []
    for i in range(n):
        records.append(
            IntervalRecord(
                step_index=i,
                epoch=i,
                batch=None,
                loss=loss[i],
                accuracy=acc[i],
                val_loss=None if val_loss is None else val_loss[i],
                val_accuracy=None if val_acc is None else val_acc[i],
                layers=tuple(layers[i]),
            )
        )
    return RunTrace(
        run_id=run_id,
        dataset_name="fixture",
        interval_policy="per-epoch",
        records=tuple(records),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_trace(rng, n=None, with_nans=False):
    n = n or int(rng.integers(2, 30))
    loss = rng.normal(1.0, 0.5, n).tolist()
    acc = rng.uniform(0, 1, n).tolist()
    if with_nans:
        for i in range(n):
            if rng.uniform() < 0.1:
                loss[i] = math.nan
            if rng.uniform() < 0.1:
                acc[i] = math.nan
    layers = [
        (
            make_layer(
                "l1",
                w_min=float(rng.normal(-1, 0.3)),
                w_max=float(rng.normal(1, 0.3)),
                w_mean=float(rng.normal(0, 0.1)),
                w_std=float(abs(rng.normal(0.2, 0.05))),
                g_mean=float(10 ** rng.uniform(-9, 1)),
                g_max=float(10 ** rng.uniform(-8, 2)),
                g_zero=float(rng.uniform(0, 1)),
            ),
        )
        for _ in range(n)
    ]
    return make_trace(
        loss,
        acc,
        val_loss=[l + 0.1 for l in loss],
        val_acc=[max(0.0, a - 0.05) for a in acc],
        layers=layers,
    )
