"""Button sequences, gauge-dependent gate sets and Born-rule simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .channels import dim_from_superket

Sequence = tuple  # tuple of gate-button labels; SPAM buttons are implicit
EMPTY: Sequence = ()

GAUGE_COND_LIMIT = 1e12


def seq(*labels: str) -> Sequence:
    return tuple(labels)


def concat(*parts: Iterable[str]) -> Sequence:
    """Concatenate sequences (the monoid operation)."""
    out: list[str] = []
    for p in parts:
        out.extend(p)
    return tuple(out)


def power(s: Iterable[str], n: int) -> Sequence:
    return tuple(s) * n


def format_sequence(s: Sequence) -> str:
    return ",".join(s) if s else "()"


def parse_sequence(text: str) -> Sequence:
    text = text.strip()
    if text in ("()", ""):
        return EMPTY
    labels = tuple(t.strip() for t in text.split(","))
    if any(not t or t in ("()",) for t in labels):
        raise ValueError(f"malformed sequence {text!r}")
    return labels


@dataclass(frozen=True)
class Button:
    label: str
    kind: str  # "prep", "measure" or "gate"

    def __post_init__(self):
        if self.kind not in ("prep", "measure", "gate"):
            raise ValueError(f"unknown button kind {self.kind!r}")


@dataclass(frozen=True)
class GateSet:
    """Gauge-dependent gate set ``{|rho>>, <<E|, G_k}`` in the Pauli basis."""

    rho: np.ndarray
    effect: np.ndarray
    gates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        effect = np.asarray(self.effect, dtype=float)
        n = rho.shape[0]
        dim_from_superket(rho)
        if effect.shape != (n,):
            raise ValueError("effect and state dimensions differ")
        gates = {}
        for label, g in self.gates.items():
            g = np.asarray(g, dtype=float)
            if g.shape != (n, n):
                raise ValueError(f"gate {label!r} has shape {g.shape}, expected {(n, n)}")
            if not label or "," in label or label.strip() != label or label == "()":
                raise ValueError(f"invalid button label {label!r}")
            gates[label] = g
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "effect", effect)
        object.__setattr__(self, "gates", gates)

    @property
    def dim(self) -> int:
        return dim_from_superket(self.rho)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.gates)

    def buttons(self) -> list[Button]:
        return ([Button("rho", "prep"), Button("E", "measure")]
                + [Button(k, "gate") for k in self.gates])

    def superop(self, s: Sequence) -> np.ndarray:
        """``Phi(s) = G_{s_{m-1}} ... G_{s_0}``."""
        out = np.eye(self.rho.shape[0])
        for label in s:
            out = self._gate(label) @ out
        return out

    def _gate(self, label: str) -> np.ndarray:
        try:
            return self.gates[label]
        except KeyError:
            raise KeyError(f"unknown button label {label!r}") from None

    def state_after(self, s: Sequence) -> np.ndarray:
        v = self.rho
        for label in s:
            v = self._gate(label) @ v
        return v

    def probability(self, s: Sequence) -> float:
        return float(self.effect @ self.state_after(s))


def sequence_probability(gs: GateSet, s: Sequence) -> float:
    """Born-rule probability ``<<E| G_{s_{m-1}} ... G_{s_0} |rho>>`` (unclipped)."""
    return gs.probability(s)


def gauge_transform(gs: GateSet, b) -> GateSet:
    """Return ``{B|rho>>, <<E|B^-1, B G_k B^-1}``.

    Raises
    ------
    ValueError
        If ``b`` is singular (condition number above ``1e12``).
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (gs.rho.shape[0],) * 2:
        raise ValueError("gauge matrix has the wrong shape")
    if not np.isfinite(np.linalg.cond(b)) or np.linalg.cond(b) > GAUGE_COND_LIMIT:
        raise ValueError("gauge matrix is singular")
    b_inv = np.linalg.inv(b)
    return GateSet(
        rho=b @ gs.rho,
        effect=gs.effect @ b_inv,
        gates={k: b @ g @ b_inv for k, g in gs.gates.items()},
    )
