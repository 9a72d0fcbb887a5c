"""Experiment designs: training and testing sequences with shot counts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gateset import GateSet, Sequence
from ..smc import Datum


@dataclass(frozen=True)
class ExperimentDesign:
    training: tuple  # of (Sequence, shots)
    testing: tuple = ()
    fiducials: tuple = ()
    buttons: tuple = field(default=())

    def __post_init__(self):
        for name in ("training", "testing"):
            rows = tuple((tuple(s), int(k)) for s, k in getattr(self, name))
            if any(k < 1 for _, k in rows):
                raise ValueError("shots must be >= 1")
            object.__setattr__(self, name, rows)
        object.__setattr__(self, "fiducials", tuple(tuple(f) for f in self.fiducials))
        object.__setattr__(self, "buttons", tuple(self.buttons))
        if self.buttons:
            known = set(self.buttons)
            for s, _ in self.training + self.testing:
                bad = set(s) - known
                if bad:
                    raise ValueError(f"sequence {s!r} uses undeclared buttons {sorted(bad)}")

    @property
    def training_sequences(self) -> list[Sequence]:
        return [s for s, _ in self.training]

    @property
    def testing_sequences(self) -> list[Sequence]:
        return [s for s, _ in self.testing]

    def simulate(self, gs: GateSet, rng: np.random.Generator, which: str = "training") -> list[Datum]:
        """Binomial counts for each sequence drawn from ``gs`` (probabilities clipped)."""
        rows = self.training if which == "training" else self.testing
        out = []
        for s, shots in rows:
            p = float(np.clip(gs.probability(s), 0.0, 1.0))
            out.append(Datum(s, shots, int(rng.binomial(shots, p))))
        return out

    def to_dict(self) -> dict:
        return {
            "buttons": list(self.buttons),
            "fiducials": [list(f) for f in self.fiducials],
            "training": [[list(s), k] for s, k in self.training],
            "testing": [[list(s), k] for s, k in self.testing],
        }

    @classmethod
    def from_dict(cls, d) -> "ExperimentDesign":
        unknown = set(d) - {"buttons", "fiducials", "training", "testing"}
        if unknown:
            raise ValueError(f"unknown design keys {sorted(unknown)}")
        return cls(
            training=tuple((tuple(s), k) for s, k in d["training"]),
            testing=tuple((tuple(s), k) for s, k in d.get("testing", ())),
            fiducials=tuple(tuple(f) for f in d.get("fiducials", ())),
            buttons=tuple(d.get("buttons", ())),
        )
