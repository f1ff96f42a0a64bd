import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlfault.errors import EvaluatorFailure, NoMutableTarget, UnknownLoss
from dlfault.labels import FaultLabelSet, FaultType
from dlfault.mutation import (
    ACTIVATIONS,
    CLASSIFICATION_LOSSES,
    OP_ACTIVATION,
    OP_EPOCH,
    OP_LOSS,
    OP_LR_DECREASE,
    OP_LR_INCREASE,
    OP_OPTIMIZER,
    OPTIMIZERS,
    REGRESSION_LOSSES,
    EpochSpec,
    LayerSpec,
    LossSpec,
    ModelSpec,
    MutationPlan,
    OptimizerSpec,
    apply_operator,
    categorize_loss,
    seed_iteratively,
)


def base_spec(epochs=500, lr=0.01, loss="mean_squared_error"):
    return ModelSpec(
        layers=(
            LayerSpec("Dense", units=8, activation="relu", source_line=5),
            LayerSpec("Dense", units=1, activation="sigmoid", source_line=6),
        ),
        loss=LossSpec(loss, source_line=10),
        optimizer=OptimizerSpec("SGD", learning_rate=lr, source_line=9),
        epochs=EpochSpec(epochs, source_line=11),
        batch_size=32,
    )


def test_categorize_loss():
    assert categorize_loss("binary_crossentropy") == "classification"
    assert categorize_loss("mean_squared_error") == "regression"
    with pytest.raises(UnknownLoss):
        categorize_loss("hinge")


def test_loss_mutation_crosses_category(rng):
    spec = base_spec(loss="mean_squared_error")
    for _ in range(200):
        mutated, rec = apply_operator(spec, OP_LOSS, rng)
        assert mutated.loss.name in CLASSIFICATION_LOSSES
        assert rec.fault_type is FaultType.LOSS
        assert rec.before != rec.after
    spec = base_spec(loss="binary_crossentropy")
    for _ in range(200):
        mutated, _ = apply_operator(spec, OP_LOSS, rng)
        assert mutated.loss.name in REGRESSION_LOSSES


def test_epoch_decrease_bounds(rng):
    spec = base_spec(epochs=500)
    for _ in range(1000):
        mutated, rec = apply_operator(spec, OP_EPOCH, rng)
        assert 10 <= mutated.epochs.value <= 50
        assert rec.before == 500


def test_epoch_decrease_clamps_to_one(rng):
    spec = base_spec(epochs=12)
    for _ in range(200):
        mutated, _ = apply_operator(spec, OP_EPOCH, rng)
        assert 1 <= mutated.epochs.value <= 12 // 10


def test_lr_ranges(rng):
    spec = base_spec()
    for _ in range(1000):
        dec, _ = apply_operator(spec, OP_LR_DECREASE, rng)
        assert 1e-16 <= dec.optimizer.learning_rate <= 1e-10
        inc, _ = apply_operator(spec, OP_LR_INCREASE, rng)
        assert 1.0 <= inc.optimizer.learning_rate <= 10.0


def test_optimizer_mutation_differs(rng):
    spec = base_spec()
    for _ in range(100):
        mutated, rec = apply_operator(spec, OP_OPTIMIZER, rng)
        assert mutated.optimizer.name in OPTIMIZERS
        assert mutated.optimizer.name != "SGD"
        assert rec.fault_type is FaultType.OPTIMIZER


def test_activation_mutation(rng):
    spec = base_spec()
    for _ in range(100):
        mutated, rec = apply_operator(spec, OP_ACTIVATION, rng)
        changed = [
            (old, new)
            for old, new in zip(spec.layers, mutated.layers)
            if old.activation != new.activation
        ]
        assert len(changed) == 1
        assert changed[0][1].activation in ACTIVATIONS
        assert rec.before != rec.after


def test_activation_requires_target(rng):
    spec = base_spec()
    bare = ModelSpec(
        layers=(LayerSpec("Dense", units=4),),
        loss=spec.loss,
        optimizer=spec.optimizer,
        epochs=spec.epochs,
    )
    with pytest.raises(NoMutableTarget):
        apply_operator(bare, OP_ACTIVATION, np.random.default_rng(0))


def test_same_seed_same_mutations():
    spec = base_spec()
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(77)
        seq = [apply_operator(spec, op, rng)[0].to_json()
               for op in (OP_LOSS, OP_ACTIVATION, OP_EPOCH, OP_LR_DECREASE)]
        outs.append(seq)
    assert outs[0] == outs[1]


def test_plan_rejects_repeated_fault_type(rng):
    _, rec = apply_operator(base_spec(), OP_LR_DECREASE, rng)
    _, rec2 = apply_operator(base_spec(), OP_LR_INCREASE, rng)
    with pytest.raises(ValueError):
        MutationPlan("b", (rec, rec2), rng_seed=0)


def test_spec_json_round_trip():
    spec = base_spec()
    assert ModelSpec.from_json(spec.to_json()) == spec


# -- seed_iteratively ---------------------------------------------------------

def constant_evaluator(values):
    def run(spec):
        return list(values)

    return run


def test_no_kill_yields_no_mutants(rng):
    samples = [0.8, 0.81, 0.79, 0.8]
    out = seed_iteratively(base_spec(), constant_evaluator(samples), rng)
    assert out == []


def test_always_killed_chain_accumulates_labels(rng):
    baseline = [0.9, 0.91, 0.89, 0.9, 0.92]

    def evaluator(spec):
        if spec == base_spec():
            return baseline
        return [v - 0.5 for v in baseline]

    out = seed_iteratively(base_spec(), evaluator, rng, max_types=5)
    assert len(out) == 5
    sizes = [len(m.labels) for m in out]
    assert sizes == [1, 2, 3, 4, 5]
    assert out[-1].labels == FaultLabelSet(list(FaultType))
    # label set equals kill-confirmed record types at every step
    for m in out:
        assert m.labels == FaultLabelSet(r.fault_type for r in m.records)
        assert all(v.killed for v in m.verdicts)


def test_max_types_one(rng):
    baseline = [0.9] * 5

    def evaluator(spec):
        return baseline if spec == base_spec() else [0.4, 0.41, 0.39, 0.4, 0.4]

    out = seed_iteratively(base_spec(), evaluator, rng, max_types=1)
    assert len(out) == 1
    assert len(out[0].labels) == 1


def test_evaluator_failure_propagates(rng):
    def evaluator(spec):
        raise RuntimeError("boom")

    with pytest.raises(EvaluatorFailure):
        seed_iteratively(base_spec(), evaluator, rng)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_mutated_value_always_differs(seed):
    rng = np.random.default_rng(seed)
    spec = base_spec(epochs=777, lr=0.05)
    for op in (OP_LOSS, OP_ACTIVATION, OP_EPOCH, OP_OPTIMIZER,
               OP_LR_DECREASE, OP_LR_INCREASE):
        mutated, rec = apply_operator(spec, op, rng)
        assert rec.before != rec.after
        assert mutated != spec
