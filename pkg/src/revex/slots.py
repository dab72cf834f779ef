from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class SlotRef:
    """A storage variable: a plain slot index, or every key of a mapping at a base slot."""

    kind: str  # "slot" | "map"
    index: int

    @classmethod
    def slot(cls, index: int) -> SlotRef:
        return cls("slot", index)

    @classmethod
    def mapping(cls, base: int) -> SlotRef:
        return cls("map", base)

    @classmethod
    def from_json(cls, obj: dict) -> SlotRef:
        if "slot" in obj:
            return cls.slot(int(obj["slot"]))
        if "mapping_base" in obj:
            return cls.mapping(int(obj["mapping_base"]))
        raise ValueError(f"state var needs 'slot' or 'mapping_base': {obj!r}")

    def to_json(self) -> dict:
        return {"slot": self.index} if self.kind == "slot" else {"mapping_base": self.index}

    def __str__(self) -> str:
        return f"slot {self.index}" if self.kind == "slot" else f"mapping {self.index}"
