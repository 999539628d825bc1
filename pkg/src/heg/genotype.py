"""Discrete architecture descriptions and their JSON form."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .ops import AGG_OPS, FUSER_OPS, GATE_OPS


@dataclasses.dataclass
class Genotype:
    """One aggregation op per layer, one gate per non-final layer, one fuser."""
    layers: list[str]
    gates: list[str]
    fuser: str
    criterion: str = ""
    seed: int | None = None

    def __post_init__(self):
        if len(self.gates) != len(self.layers) - 1:
            raise ValueError("need exactly one gate per non-final layer")
        for k in self.layers:
            if k not in AGG_OPS:
                raise ValueError(f"unknown aggregation op '{k}'")
        for k in self.gates:
            if k not in GATE_OPS:
                raise ValueError(f"unknown gate '{k}'")
        if self.fuser not in FUSER_OPS:
            raise ValueError(f"unknown fuser '{self.fuser}'")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        doc = {"layers": list(self.layers), "gates": list(self.gates),
               "fuser": self.fuser, "criterion": self.criterion}
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Genotype":
        return cls(layers=list(doc["layers"]), gates=list(doc["gates"]),
                   fuser=doc["fuser"], criterion=doc.get("criterion", ""),
                   seed=doc.get("seed"))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Genotype":
        return cls.from_dict(json.loads(Path(path).read_text()))
