"""The five fault types and sets thereof."""

from __future__ import annotations

from enum import Enum


class FaultType(str, Enum):
    LOSS = "loss"
    OPTIMIZER = "optimizer"
    LR = "lr"
    EPOCH = "epoch"
    ACT = "act"


FAULT_ORDER: tuple[FaultType, ...] = (
    FaultType.LOSS,
    FaultType.OPTIMIZER,
    FaultType.LR,
    FaultType.EPOCH,
    FaultType.ACT,
)


class FaultLabelSet(frozenset):
    """A subset of the five fault types; empty means "no fault diagnosed"."""

    def __new__(cls, items=()):
        items = frozenset(FaultType(i) for i in items)
        return super().__new__(cls, items)

    @classmethod
    def from_bools(cls, bits) -> "FaultLabelSet":
        if len(bits) != len(FAULT_ORDER):
            raise ValueError(f"expected {len(FAULT_ORDER)} flags, got {len(bits)}")
        return cls(ft for ft, b in zip(FAULT_ORDER, bits) if b)

    def to_bools(self) -> tuple[int, ...]:
        return tuple(int(ft in self) for ft in FAULT_ORDER)

    def to_names(self) -> list[str]:
        return [ft.value for ft in FAULT_ORDER if ft in self]

    @classmethod
    def from_names(cls, names) -> "FaultLabelSet":
        return cls(FaultType(n) for n in names)

    def __repr__(self):
        return f"FaultLabelSet({self.to_names()})"
