"""Fault seeding: model-spec mutation operators and iterative multi-fault
seeding with the statistical kill check.

The evaluator is injected (spec -> list of test accuracies); this module never
trains a network itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    EvaluatorFailure,
    ExhaustedOperators,
    NoMutableTarget,
    UnknownLoss,
)
from .labels import FAULT_ORDER, FaultLabelSet, FaultType
from .stats import DEFAULT_ALPHA, DEFAULT_BETA, KillVerdict, is_kill

CLASSIFICATION_LOSSES = (
    "categorical_crossentropy",
    "sparse_categorical_crossentropy",
    "binary_crossentropy",
)
REGRESSION_LOSSES = (
    "mean_absolute_error",
    "mean_absolute_percentage_error",
    "mean_squared_error",
)
ACTIVATIONS = (
    "relu",
    "sigmoid",
    "softmax",
    "softplus",
    "softsign",
    "tanh",
    "selu",
    "elu",
    "linear",
)
OPTIMIZERS = ("SGD", "RMSprop", "Adam", "Adadelta", "Adagrad")

EPOCH_DIVISOR_RANGE = (10, 50)
LR_DECREASE_RANGE = (1e-16, 1e-10)
LR_INCREASE_RANGE = (1.0, 10.0)


def categorize_loss(name: str) -> str:
    if name in CLASSIFICATION_LOSSES:
        return "classification"
    if name in REGRESSION_LOSSES:
        return "regression"
    raise UnknownLoss(f"loss {name!r} is outside the known vocabulary")


# -- declarative model spec ---------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: Optional[int] = None
    activation: Optional[str] = None
    source_line: Optional[int] = None


@dataclass(frozen=True)
class LossSpec:
    name: str
    source_line: Optional[int] = None


@dataclass(frozen=True)
class OptimizerSpec:
    name: str
    learning_rate: Optional[float] = None
    source_line: Optional[int] = None


@dataclass(frozen=True)
class EpochSpec:
    value: int
    source_line: Optional[int] = None


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    loss: LossSpec
    optimizer: OptimizerSpec
    epochs: EpochSpec
    batch_size: Optional[int] = None

    def __post_init__(self):
        if self.epochs.value < 1:
            raise ValueError("epochs must be >= 1")
        lr = self.optimizer.learning_rate
        if lr is not None and lr <= 0:
            raise ValueError("learning_rate must be > 0")
        categorize_loss(self.loss.name)

    def to_dict(self):
        return {
            "layers": [
                {
                    "kind": l.kind,
                    "units": l.units,
                    "activation": l.activation,
                    "source_line": l.source_line,
                }
                for l in self.layers
            ],
            "loss": {"name": self.loss.name, "source_line": self.loss.source_line},
            "optimizer": {
                "name": self.optimizer.name,
                "learning_rate": self.optimizer.learning_rate,
                "source_line": self.optimizer.source_line,
            },
            "epochs": {"value": self.epochs.value, "source_line": self.epochs.source_line},
            "batch_size": self.batch_size,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        return cls(
            layers=tuple(
                LayerSpec(
                    kind=l["kind"],
                    units=l.get("units"),
                    activation=l.get("activation"),
                    source_line=l.get("source_line"),
                )
                for l in d.get("layers", [])
            ),
            loss=LossSpec(d["loss"]["name"], d["loss"].get("source_line")),
            optimizer=OptimizerSpec(
                d["optimizer"]["name"],
                d["optimizer"].get("learning_rate"),
                d["optimizer"].get("source_line"),
            ),
            epochs=EpochSpec(d["epochs"]["value"], d["epochs"].get("source_line")),
            batch_size=d.get("batch_size"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FaultRecord:
    fault_type: FaultType
    operator_name: str
    before: object
    after: object
    target_line: Optional[int] = None

    def to_dict(self):
        return {
            "fault_type": self.fault_type.value,
            "operator_name": self.operator_name,
            "before": self.before,
            "after": self.after,
            "target_line": self.target_line,
        }


@dataclass(frozen=True)
class MutationPlan:
    base_spec_id: str
    records: tuple[FaultRecord, ...]
    rng_seed: int

    def __post_init__(self):
        types = [r.fault_type for r in self.records]
        if len(types) != len(set(types)):
            raise ValueError("a plan must not repeat a fault type")
        if not (1 <= len(types) <= 5):
            raise ValueError("a plan carries 1..5 faults")

    def to_dict(self):
        return {
            "base_spec_id": self.base_spec_id,
            "records": [r.to_dict() for r in self.records],
            "rng_seed": self.rng_seed,
        }


# -- the seven operators ------------------------------------------------------

OP_LOSS = "LossCrossCategory"
OP_ACTIVATION = "Activation"
OP_EPOCH = "EpochDecrease"
OP_OPTIMIZER = "Optimizer"
OP_LR_DECREASE = "LrDecrease"
OP_LR_INCREASE = "LrIncrease"

OPERATOR_FAULT_TYPE = {
    OP_LOSS: FaultType.LOSS,
    OP_ACTIVATION: FaultType.ACT,
    OP_EPOCH: FaultType.EPOCH,
    OP_OPTIMIZER: FaultType.OPTIMIZER,
    OP_LR_DECREASE: FaultType.LR,
    OP_LR_INCREASE: FaultType.LR,
}

OPERATORS_BY_FAULT = {
    FaultType.LOSS: (OP_LOSS,),
    FaultType.ACT: (OP_ACTIVATION,),
    FaultType.EPOCH: (OP_EPOCH,),
    FaultType.OPTIMIZER: (OP_OPTIMIZER,),
    FaultType.LR: (OP_LR_DECREASE, OP_LR_INCREASE),
}


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def apply_operator(
    spec: ModelSpec, op_kind: str, rng: np.random.Generator
) -> tuple[ModelSpec, FaultRecord]:
    """Apply one mutation operator; returns the new spec and a fault record."""
    if op_kind == OP_LOSS:
        cat = categorize_loss(spec.loss.name)
        pool = CLASSIFICATION_LOSSES if cat == "regression" else REGRESSION_LOSSES
        new = pool[rng.integers(0, len(pool))]
        rec = FaultRecord(FaultType.LOSS, op_kind, spec.loss.name, new, spec.loss.source_line)
        return replace(spec, loss=replace(spec.loss, name=new)), rec

    if op_kind == OP_ACTIVATION:
        candidates = [i for i, l in enumerate(spec.layers) if l.activation is not None]
        if not candidates:
            raise NoMutableTarget("no layer with an activation to mutate")
        li = candidates[rng.integers(0, len(candidates))]
        layer = spec.layers[li]
        pool = [a for a in ACTIVATIONS if a != layer.activation]
        new = pool[rng.integers(0, len(pool))]
        rec = FaultRecord(FaultType.ACT, op_kind, layer.activation, new, layer.source_line)
        layers = list(spec.layers)
        layers[li] = replace(layer, activation=new)
        return replace(spec, layers=tuple(layers)), rec

    if op_kind == OP_EPOCH:
        divisor = int(rng.integers(EPOCH_DIVISOR_RANGE[0], EPOCH_DIVISOR_RANGE[1] + 1))
        new = max(1, spec.epochs.value // divisor)
        if new == spec.epochs.value:
            raise NoMutableTarget(f"epoch decrease is a no-op at {spec.epochs.value} epochs")
        rec = FaultRecord(
            FaultType.EPOCH, op_kind, spec.epochs.value, new, spec.epochs.source_line
        )
        return replace(spec, epochs=replace(spec.epochs, value=new)), rec

    if op_kind == OP_OPTIMIZER:
        pool = [o for o in OPTIMIZERS if o != spec.optimizer.name]
        new = pool[rng.integers(0, len(pool))]
        rec = FaultRecord(
            FaultType.OPTIMIZER, op_kind, spec.optimizer.name, new, spec.optimizer.source_line
        )
        return replace(spec, optimizer=replace(spec.optimizer, name=new)), rec

    if op_kind in (OP_LR_DECREASE, OP_LR_INCREASE):
        lo, hi = LR_DECREASE_RANGE if op_kind == OP_LR_DECREASE else LR_INCREASE_RANGE
        new = _log_uniform(rng, lo, hi)
        rec = FaultRecord(
            FaultType.LR,
            op_kind,
            spec.optimizer.learning_rate,
            new,
            spec.optimizer.source_line,
        )
        return replace(spec, optimizer=replace(spec.optimizer, learning_rate=new)), rec

    raise ValueError(f"unknown operator {op_kind!r}")


# -- iterative multi-fault seeding --------------------------------------------

@dataclass(frozen=True)
class LabeledMutant:
    spec: ModelSpec
    labels: FaultLabelSet
    records: tuple[FaultRecord, ...]
    verdicts: tuple[KillVerdict, ...]

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "labels": self.labels.to_names(),
            "records": [r.to_dict() for r in self.records],
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def seed_iteratively(
    spec: ModelSpec,
    evaluator: Callable[[ModelSpec], list],
    rng: np.random.Generator,
    max_types: int = 5,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    retries_per_type: int = 3,
) -> list[LabeledMutant]:
    """Stack faults one at a time, keeping only kill-confirmed mutations.

    Each candidate mutant is compared against the *original* spec's accuracy
    samples. A non-killed mutation is rolled back and the fault type retried
    with fresh random parameters up to `retries_per_type` times; a fault type
    whose retries are exhausted is skipped. Returns every kill-confirmed
    mutant along the chain (labels accumulate).
    """
    max_types = min(max_types, 5)
    try:
        baseline = evaluator(spec)
    except Exception as exc:  # noqa: BLE001 - evaluator is arbitrary injected code
        raise EvaluatorFailure(f"baseline evaluation failed: {exc}", spec) from exc

    current = spec
    confirmed: list[FaultRecord] = []
    verdicts: list[KillVerdict] = []
    results: list[LabeledMutant] = []
    remaining = list(FAULT_ORDER)
    # shuffle with the caller's rng so chains differ across seeds
    order = rng.permutation(len(remaining))
    remaining = [remaining[i] for i in order]

    any_applicable = False
    while remaining and len(confirmed) < max_types:
        ft = remaining.pop(0)
        ops = OPERATORS_BY_FAULT[ft]
        for _ in range(retries_per_type):
            op = ops[rng.integers(0, len(ops))] if len(ops) > 1 else ops[0]
            try:
                candidate, rec = apply_operator(current, op, rng)
            except NoMutableTarget:
                break
            any_applicable = True
            try:
                samples = evaluator(candidate)
            except Exception as exc:  # noqa: BLE001
                raise EvaluatorFailure(
                    f"evaluation failed for mutated spec: {exc}", candidate
                ) from exc
            verdict = is_kill(baseline, samples, alpha=alpha, beta=beta)
            if verdict.killed:
                current = candidate
                confirmed.append(rec)
                verdicts.append(verdict)
                results.append(
                    LabeledMutant(
                        spec=current,
                        labels=FaultLabelSet(r.fault_type for r in confirmed),
                        records=tuple(confirmed),
                        verdicts=tuple(verdicts),
                    )
                )
                break
    if not any_applicable:
        raise ExhaustedOperators("no mutation operator is applicable to this spec")
    return results
