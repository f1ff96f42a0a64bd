"""The 20 per-interval runtime indicator sequences derived from a trace.

The first four indicators carry raw metric values (NaN preserved); the other
sixteen are 0/1 event streams so that the same statistical operators apply
uniformly to all of them (an event count is the event-stream sum, an
"any occurrence" flag is its max).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import TraceTooShort
from .trace_model import RunTrace

INDICATOR_NAMES: tuple[str, ...] = (
    "loss",
    "acc",
    "loss_val",
    "acc_val",
    "nan_loss",
    "nan_accuracy",
    "nan_weight",
    "nan_gradient",
    "large_weight",
    "decrease_acc",
    "increase_loss",
    "cons_mean_weight",
    "cons_std_weight",
    "gap_train_test",
    "test_turn_bad",
    "slow_converge",
    "oscillating_loss",
    "dying_relu",
    "gradient_vanish",
    "gradient_explosion",
)

N_INDICATORS = 20
# Indicators at index >= this are {0,1} event streams.
FIRST_EVENT_INDEX = 4


@dataclass(frozen=True)
class IndicatorConfig:
    """Thresholds for the event-style indicators.

    Defaults are deliberately loose: they should fire only on clearly
    pathological traces.
    """

    large_weight_threshold: float = 1e3
    const_tolerance: float = 1e-12
    gap_threshold: float = 0.1
    slow_converge_window: int = 5
    slow_converge_min_gain: float = 0.01
    slow_converge_acc_ceiling: float = 0.8
    oscillation_window: int = 5
    oscillation_min_flips: int = 3
    dying_relu_zero_fraction: float = 0.7
    dying_relu_acc_ceiling: float = 0.6
    vanish_threshold: float = 1e-7
    explode_threshold: float = 1e3
    problem_acc_ceiling: float = 0.6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v <= 0:
                raise ValueError(f"{f.name} must be > 0, got {v}")
        if self.slow_converge_window < 2 or self.oscillation_window < 2:
            raise ValueError("windows must be >= 2")
        for name in ("dying_relu_zero_fraction",):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name} must be in (0,1], got {v}")


@dataclass(frozen=True)
class IndicatorMatrix:
    indicator_names: tuple[str, ...]
    sequences: np.ndarray  # shape (20, n_records), float64
    run_id: str = ""

    def sequence(self, name: str) -> np.ndarray:
        return self.sequences[self.indicator_names.index(name)]

    def to_csv(self) -> str:
        """One column per indicator, one row per interval (export-dist support)."""
        lines = [",".join(self.indicator_names)]
        for row in self.sequences.T:
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _finite(x: np.ndarray) -> np.ndarray:
    return np.isfinite(x)


def compute_indicators(trace: RunTrace, cfg: IndicatorConfig | None = None) -> IndicatorMatrix:
    """Turn a trace into the 20-row indicator matrix.

    Difference-based events are 0 at index 0; any comparison touching a NaN
    yields 0 (NaN presence is captured by the nan_* rows themselves).
    """
    if cfg is None:
        cfg = IndicatorConfig()
    n = len(trace.records)
    if n < 2:
        raise TraceTooShort(f"need >= 2 records, got {n}")

    def col(get, default=np.nan):
        return np.array(
            [default if get(r) is None else get(r) for r in trace.records],
            dtype=np.float64,
        )

    loss = col(lambda r: r.loss)
    acc = col(lambda r: r.accuracy)
    loss_val = col(lambda r: r.val_loss)
    acc_val = col(lambda r: r.val_accuracy)

    n_layers = len(trace.layer_names)
    # per-record layer summaries, shape (n, n_layers)
    def layer_mat(get):
        return np.array(
            [[get(ls) for ls in r.layers] for r in trace.records], dtype=np.float64
        ).reshape(n, n_layers)

    w_nan = np.array(
        [any(ls.weight_has_nan or ls.weight_has_inf for ls in r.layers) for r in trace.records]
    )
    g_nan = np.array(
        [any(ls.grad_has_nan or ls.grad_has_inf for ls in r.layers) for r in trace.records]
    )
    if n_layers:
        w_min = layer_mat(lambda ls: ls.weight_min)
        w_max = layer_mat(lambda ls: ls.weight_max)
        w_mean = layer_mat(lambda ls: ls.weight_mean)
        w_std = layer_mat(lambda ls: ls.weight_std)
        g_mean_abs = layer_mat(lambda ls: ls.grad_mean_abs)
        g_max_abs = layer_mat(lambda ls: ls.grad_max_abs)
        g_zero = layer_mat(lambda ls: ls.grad_zero_fraction)
        with np.errstate(invalid="ignore"):
            abs_w_extreme = np.maximum(np.abs(w_min), np.abs(w_max)).max(axis=1)
            global_mean_w = w_mean.mean(axis=1)
            global_std_w = w_std.mean(axis=1)
            min_g_mean = g_mean_abs.min(axis=1)
            max_g_max = g_max_abs.max(axis=1)
            mean_g_zero = g_zero.mean(axis=1)
    else:
        abs_w_extreme = np.zeros(n)
        global_mean_w = np.zeros(n)
        global_std_w = np.zeros(n)
        min_g_mean = np.full(n, np.inf)
        max_g_max = np.zeros(n)
        mean_g_zero = np.zeros(n)

    out = np.zeros((N_INDICATORS, n), dtype=np.float64)
    out[0] = loss
    out[1] = acc
    out[2] = loss_val
    out[3] = acc_val
    out[4] = (~_finite(loss)).astype(np.float64)  # nan_loss (NaN or Inf)
    out[5] = np.isnan(acc).astype(np.float64)  # nan_accuracy
    out[6] = w_nan.astype(np.float64)
    out[7] = g_nan.astype(np.float64)
    with np.errstate(invalid="ignore"):
        out[8] = (abs_w_extreme > cfg.large_weight_threshold).astype(np.float64)

    fin_acc = _finite(acc)
    fin_loss = _finite(loss)
    both_acc = fin_acc[1:] & fin_acc[:-1]
    both_loss = fin_loss[1:] & fin_loss[:-1]
    with np.errstate(invalid="ignore"):
        out[9, 1:] = (both_acc & (acc[1:] < acc[:-1])).astype(np.float64)
        out[10, 1:] = (both_loss & (loss[1:] > loss[:-1])).astype(np.float64)

        fin_gm = _finite(global_mean_w)
        fin_gs = _finite(global_std_w)
        out[11, 1:] = (
            fin_gm[1:]
            & fin_gm[:-1]
            & (np.abs(global_mean_w[1:] - global_mean_w[:-1]) <= cfg.const_tolerance)
        ).astype(np.float64)
        out[12, 1:] = (
            fin_gs[1:]
            & fin_gs[:-1]
            & (np.abs(global_std_w[1:] - global_std_w[:-1]) <= cfg.const_tolerance)
        ).astype(np.float64)

        fin_av = _finite(acc_val)
        out[13] = (fin_acc & fin_av & ((acc - acc_val) > cfg.gap_threshold)).astype(
            np.float64
        )

        fin_vl = _finite(loss_val)
        out[14, 1:] = (
            both_loss
            & fin_vl[1:]
            & fin_vl[:-1]
            & (loss[1:] < loss[:-1])
            & (loss_val[1:] > loss_val[:-1])
        ).astype(np.float64)

    w = cfg.slow_converge_window
    for t in range(w - 1, n):
        a_now, a_then = acc[t], acc[t - w + 1]
        if (
            np.isfinite(a_now)
            and np.isfinite(a_then)
            and (a_now - a_then) < cfg.slow_converge_min_gain
            and a_now < cfg.slow_converge_acc_ceiling
        ):
            out[15, t] = 1.0

    ow = cfg.oscillation_window
    finite_loss_vals = []
    for t in range(n):
        if np.isfinite(loss[t]):
            finite_loss_vals.append(loss[t])
        window_vals = finite_loss_vals[-ow:]
        if len(window_vals) >= 3:
            diffs = np.diff(window_vals)
            signs = np.sign(diffs)
            signs = signs[signs != 0]
            flips = int(np.sum(signs[1:] != signs[:-1]))
            if flips >= cfg.oscillation_min_flips:
                out[16, t] = 1.0

    # dying_relu: recent-window mean of the layer-averaged zero-gradient
    # fraction (window shared with slow_converge; the config has no separate
    # knob for it)
    dw = cfg.slow_converge_window
    for t in range(n):
        lo = max(0, t - dw + 1)
        win = mean_g_zero[lo : t + 1]
        win = win[np.isfinite(win)]
        if (
            win.size
            and win.mean() >= cfg.dying_relu_zero_fraction
            and np.isfinite(acc[t])
            and acc[t] < cfg.dying_relu_acc_ceiling
        ):
            out[17, t] = 1.0

    with np.errstate(invalid="ignore"):
        acc_low = fin_acc & (acc < cfg.problem_acc_ceiling)
        out[18] = (
            np.where(np.isfinite(min_g_mean), min_g_mean < cfg.vanish_threshold, False)
            & acc_low
        ).astype(np.float64)
        explode = np.where(
            np.isfinite(max_g_max), max_g_max > cfg.explode_threshold, False
        ) | g_nan
        out[19] = (explode & acc_low).astype(np.float64)

    return IndicatorMatrix(
        indicator_names=INDICATOR_NAMES, sequences=out, run_id=trace.run_id
    )
