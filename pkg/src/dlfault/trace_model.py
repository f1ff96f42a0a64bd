"""Training-trace data model and JSONL (de)serialization.

A trace file is line-delimited JSON: one header object followed by one object
per monitoring interval. Non-finite values are encoded as the strings "NaN",
"Inf" and "-Inf" because plain JSON numbers cannot carry them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Optional, Union

from .errors import EmptyTrace, MalformedRecord, SchemaMismatch

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerStats:
    layer_name: str
    weight_min: float
    weight_max: float
    weight_mean: float
    weight_std: float
    weight_has_nan: bool
    weight_has_inf: bool
    grad_min_abs: float
    grad_max_abs: float
    grad_mean_abs: float
    grad_has_nan: bool
    grad_has_inf: bool
    grad_zero_fraction: float


@dataclass(frozen=True)
class IntervalRecord:
    step_index: int
    epoch: int
    batch: Optional[int]
    loss: float
    accuracy: float
    val_loss: Optional[float]
    val_accuracy: Optional[float]
    layers: tuple[LayerStats, ...]


@dataclass(frozen=True)
class RunTrace:
    run_id: str
    dataset_name: str
    interval_policy: str
    records: tuple[IntervalRecord, ...]

    @property
    def layer_names(self) -> tuple[str, ...]:
        if not self.records:
            return ()
        return tuple(ls.layer_name for ls in self.records[0].layers)


def _decode_num(v, line_no, field):
    """JSON value -> float, honoring the NaN/Inf string encoding."""
    if v is None:
        return None
    if isinstance(v, bool):
        raise MalformedRecord(line_no, f"field {field!r}: boolean is not a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        if v == "NaN":
            return math.nan
        if v == "Inf":
            return math.inf
        if v == "-Inf":
            return -math.inf
    raise MalformedRecord(line_no, f"field {field!r}: expected number, got {v!r}")


def _encode_num(x):
    if x is None:
        return None
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return x


_LAYER_FIELDS = (
    ("w_min", "weight_min"),
    ("w_max", "weight_max"),
    ("w_mean", "weight_mean"),
    ("w_std", "weight_std"),
    ("g_min_abs", "grad_min_abs"),
    ("g_max_abs", "grad_max_abs"),
    ("g_mean_abs", "grad_mean_abs"),
    ("g_zero_frac", "grad_zero_fraction"),
)


def _parse_layer(obj, line_no):
    if not isinstance(obj, dict) or "name" not in obj:
        raise MalformedRecord(line_no, "layer entry missing 'name'")
    kwargs = {"layer_name": str(obj["name"])}
    for json_key, attr in _LAYER_FIELDS:
        if json_key not in obj:
            raise MalformedRecord(line_no, f"layer {obj['name']!r} missing {json_key!r}")
        kwargs[attr] = _decode_num(obj[json_key], line_no, json_key)
    for json_key, attr in (
        ("w_nan", "weight_has_nan"),
        ("w_inf", "weight_has_inf"),
        ("g_nan", "grad_has_nan"),
        ("g_inf", "grad_has_inf"),
    ):
        v = obj.get(json_key, False)
        if not isinstance(v, bool):
            raise MalformedRecord(line_no, f"layer flag {json_key!r} must be boolean")
        kwargs[attr] = v
    return LayerStats(**kwargs)


def parse_trace_file(data: Union[bytes, IO[bytes]]) -> RunTrace:
    """Parse a trace JSONL byte stream into a RunTrace.

    Raises MalformedRecord on unparseable lines or step-index regressions,
    SchemaMismatch when the per-record layer list changes, and EmptyTrace
    when no interval records follow the header.
    """
    if hasattr(data, "read"):
        data = data.read()
    lines = data.split(b"\n")

    header = None
    records: list[IntervalRecord] = []
    schema: Optional[tuple[str, ...]] = None
    last_step = -1
    for idx, raw in enumerate(lines):
        line_no = idx + 1
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "kind" not in obj:
            raise MalformedRecord(line_no, "object lacks a 'kind' field")
        kind = obj["kind"]
        if kind == "header":
            if header is not None:
                raise MalformedRecord(line_no, "duplicate header")
            header = obj
            continue
        if kind != "record":
            raise MalformedRecord(line_no, f"unknown kind {kind!r}")
        if header is None:
            raise MalformedRecord(line_no, "record before header")
        try:
            step = int(obj["step"])
            epoch = int(obj["epoch"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, "record missing integer step/epoch") from exc
        if step <= last_step:
            raise MalformedRecord(
                line_no, f"step_index {step} not strictly greater than {last_step}"
            )
        last_step = step
        batch = obj.get("batch")
        if batch is not None:
            batch = int(batch)
        layers_raw = obj.get("layers", [])
        if not isinstance(layers_raw, list):
            raise MalformedRecord(line_no, "'layers' must be a list")
        layers = tuple(_parse_layer(lo, line_no) for lo in layers_raw)
        names = tuple(ls.layer_name for ls in layers)
        if schema is None:
            schema = names
        elif names != schema:
            raise SchemaMismatch(
                f"line {line_no}: layer schema {names!r} differs from {schema!r}"
            )
        records.append(
            IntervalRecord(
                step_index=step,
                epoch=epoch,
                batch=batch,
                loss=_decode_num(obj.get("loss", "NaN"), line_no, "loss"),
                accuracy=_decode_num(obj.get("acc", "NaN"), line_no, "acc"),
                val_loss=_decode_num(obj.get("val_loss"), line_no, "val_loss"),
                val_accuracy=_decode_num(obj.get("val_acc"), line_no, "val_acc"),
                layers=layers,
            )
        )

    if header is None:
        raise MalformedRecord(1, "missing header line")
    if not records:
        raise EmptyTrace("trace contains a header but no interval records")
    return RunTrace(
        run_id=str(header.get("run_id", "")),
        dataset_name=str(header.get("dataset", "")),
        interval_policy=str(header.get("interval_policy", "")),
        records=tuple(records),
    )


def load_trace(path) -> RunTrace:
    with open(path, "rb") as fh:
        return parse_trace_file(fh)


def serialize_trace(trace: RunTrace) -> bytes:
    """Inverse of parse_trace_file (round-trips field by field, NaN as NaN)."""
    out = [
        json.dumps(
            {
                "kind": "header",
                "run_id": trace.run_id,
                "dataset": trace.dataset_name,
                "interval_policy": trace.interval_policy,
                "layer_names": list(trace.layer_names),
            }
        )
    ]
    for rec in trace.records:
        layers = []
        for ls in rec.layers:
            layers.append(
                {
                    "name": ls.layer_name,
                    "w_min": _encode_num(ls.weight_min),
                    "w_max": _encode_num(ls.weight_max),
                    "w_mean": _encode_num(ls.weight_mean),
                    "w_std": _encode_num(ls.weight_std),
                    "w_nan": ls.weight_has_nan,
                    "w_inf": ls.weight_has_inf,
                    "g_min_abs": _encode_num(ls.grad_min_abs),
                    "g_max_abs": _encode_num(ls.grad_max_abs),
                    "g_mean_abs": _encode_num(ls.grad_mean_abs),
                    "g_nan": ls.grad_has_nan,
                    "g_inf": ls.grad_has_inf,
                    "g_zero_frac": _encode_num(ls.grad_zero_fraction),
                }
            )
        out.append(
            json.dumps(
                {
                    "kind": "record",
                    "step": rec.step_index,
                    "epoch": rec.epoch,
                    "batch": rec.batch,
                    "loss": _encode_num(rec.loss),
                    "acc": _encode_num(rec.accuracy),
                    "val_loss": _encode_num(rec.val_loss),
                    "val_acc": _encode_num(rec.val_accuracy),
                    "layers": layers,
                }
            )
        )
    return ("\n".join(out) + "\n").encode("utf-8")


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    message: str


def validate_trace(trace: RunTrace) -> list[ValidationIssue]:
    """Diagnostic pass over a parsed trace; never raises."""
    issues: list[ValidationIssue] = []
    schema = trace.layer_names
    has_val_loss = False
    has_val_acc = False
    for i, rec in enumerate(trace.records):
        if tuple(ls.layer_name for ls in rec.layers) != schema:
            issues.append(
                ValidationIssue("error", f"record {i}: layer schema differs from header")
            )
        acc = rec.accuracy
        if acc is not None and math.isfinite(acc) and not (0.0 <= acc <= 1.0):
            issues.append(
                ValidationIssue("error", f"record {i}: accuracy {acc} out of [0,1]")
            )
        for ls in rec.layers:
            if math.isfinite(ls.grad_zero_fraction) and not (
                0.0 <= ls.grad_zero_fraction <= 1.0
            ):
                issues.append(
                    ValidationIssue(
                        "error",
                        f"record {i}: layer {ls.layer_name!r} g_zero_frac out of [0,1]",
                    )
                )
        if rec.val_loss is not None:
            has_val_loss = True
        if rec.val_accuracy is not None:
            has_val_acc = True
    if not has_val_loss or not has_val_acc:
        issues.append(
            ValidationIssue(
                "warning",
                "no validation metrics present; validation indicators degenerate",
            )
        )
    return issues
