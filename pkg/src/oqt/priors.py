"""Gauge-dependent priors over states, effects and channels.

A :class:`ChannelPrior` is a small tree: leaves produce an ideal object
(an exact matrix, a rotation with a random angle, a Ginibre state), inner
nodes apply depolarization or mix in a random state/channel.  A
:class:`PriorSpec` attaches one such tree to every button.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import channels as ch
from .gateset import GateSet

KINDS = ("exact", "rotation", "ginibre", "depolarizing", "ginibre-mix", "bcsz-mix")

_NAMED_STATES = {
    "zero": ch.ZERO_STATE,
    "one": ch.to_superket(np.diag([0.0, 1.0])),
    "mixed": ch.MAXIMALLY_MIXED,
}


def _named_value(value) -> np.ndarray:
    if isinstance(value, str):
        if value == "identity":
            return np.eye(4)
        try:
            return _NAMED_STATES[value].copy()
        except KeyError:
            raise ValueError(f"unknown named value {value!r}") from None
    return np.asarray(value, dtype=float)


@dataclass(frozen=True)
class ChannelPrior:
    """Distribution over one state, effect or channel.

    Kinds and their parameters:

    ``exact``
        ``value``: a matrix/vector, or one of ``"zero"``, ``"one"``,
        ``"mixed"``, ``"identity"``.
    ``rotation``
        ``axis`` in ``x, y, z, h``; ``angle`` plus optional normal
        ``variance``, or ``low``/``high`` for a uniform angle.  For ``h``
        the angle is the evolution time under the Hadamard generator
        (``pi/2`` is the ideal Hadamard).
    ``ginibre``
        Random density matrix; ``real_only`` for rebits.
    ``depolarizing``
        ``p`` fixed, or ``low``/``high`` uniform; applied to ``base``.
    ``ginibre-mix`` / ``bcsz-mix``
        ``eps`` weight of a random state / CPTP channel mixed into ``base``.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    base: "ChannelPrior | None" = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {KINDS}")
        params = dict(self.params)
        object.__setattr__(self, "params", params)
        needs_base = self.kind in ("depolarizing", "ginibre-mix", "bcsz-mix")
        if needs_base and self.base is None:
            raise ValueError(f"{self.kind} prior needs a base prior")
        if not needs_base and self.base is not None:
            raise ValueError(f"{self.kind} prior takes no base prior")
        if params.get("variance", 0.0) < 0:
            raise ValueError("variance must be nonnegative")
        for key in ("eps", "p", "low", "high"):
            if key in params and self.kind in ("depolarizing", "ginibre-mix", "bcsz-mix"):
                if not 0.0 <= params[key] <= 1.0:
                    raise ValueError(f"{key} must lie in [0, 1], got {params[key]}")
        if "low" in params and params["low"] > params.get("high", params["low"]):
            raise ValueError("low must not exceed high")
        if self.kind == "rotation" and params.get("axis", "").lower() not in ("x", "y", "z", "h"):
            raise ValueError(f"rotation axis must be x, y, z or h, got {params.get('axis')!r}")

    # -- convenience constructors
    @classmethod
    def exact(cls, value) -> "ChannelPrior":
        return cls("exact", {"value": value})

    @classmethod
    def rotation(cls, axis: str, angle: float, variance: float = 0.0) -> "ChannelPrior":
        return cls("rotation", {"axis": axis, "angle": angle, "variance": variance})

    @classmethod
    def uniform_rotation(cls, axis: str, low: float, high: float) -> "ChannelPrior":
        return cls("rotation", {"axis": axis, "low": low, "high": high})

    def depolarized(self, low: float, high: float | None = None) -> "ChannelPrior":
        params = {"p": low} if high is None else {"low": low, "high": high}
        return ChannelPrior("depolarizing", params, self)

    def ginibre_mixed(self, eps: float) -> "ChannelPrior":
        return ChannelPrior("ginibre-mix", {"eps": eps}, self)

    def bcsz_mixed(self, eps: float) -> "ChannelPrior":
        return ChannelPrior("bcsz-mix", {"eps": eps}, self)

    # -- sampling
    def sample(self, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.kind == "exact":
            return _named_value(p["value"]).copy()
        if self.kind == "rotation":
            angle = self._draw(rng, p.get("angle", 0.0), p.get("variance", 0.0))
            axis = p["axis"].lower()
            if axis == "h":
                return ch.overrotated_hadamard(angle - np.pi / 2)
            return ch.unitary_superop(ch.rotation(axis, angle))
        if self.kind == "ginibre":
            rho = ch.sample_ginibre_density(p.get("dim", 2), rng, real_only=p.get("real_only", False))
            return ch.to_superket(rho, check_hermitian=False).real
        base = self.base.sample(rng)
        if self.kind == "depolarizing":
            return ch.depolarize(base, self._draw(rng, p.get("p", 0.0), 0.0))
        eps = p["eps"]
        d = ch.dim_from_superket(base) if base.ndim == 1 else int(round(np.sqrt(base.shape[0])))
        if self.kind == "ginibre-mix":
            if base.ndim != 1:
                raise ValueError("ginibre-mix applies to states and effects")
            sigma = ch.to_superket(ch.sample_ginibre_density(d, rng), check_hermitian=False).real
            return ch.convex_mix(base, sigma, eps)
        if base.ndim != 2:
            raise ValueError("bcsz-mix applies to channels")
        return ch.convex_mix(base, ch.sample_bcsz(d, rng), eps)

    def _draw(self, rng, centre: float, variance: float) -> float:
        p = self.params
        if "low" in p:
            return float(rng.uniform(p["low"], p["high"]))
        if variance > 0:
            return float(centre + rng.normal(0.0, np.sqrt(variance)))
        return float(centre)

    # -- serialization
    def to_dict(self) -> dict:
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        out = {"kind": self.kind, "params": params}
        if self.base is not None:
            out["base"] = self.base.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChannelPrior":
        unknown = set(d) - {"kind", "params", "base"}
        if unknown:
            raise ValueError(f"unknown prior keys {sorted(unknown)}")
        base = cls.from_dict(d["base"]) if d.get("base") is not None else None
        return cls(d["kind"], dict(d.get("params", {})), base)


@dataclass(frozen=True)
class PriorSpec:
    """One :class:`ChannelPrior` per button plus the fiducial sequences."""

    rho: ChannelPrior
    effect: ChannelPrior
    gates: Mapping[str, ChannelPrior]
    fiducials: tuple
    meas_fiducials: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", dict(self.gates))
        object.__setattr__(self, "fiducials", tuple(tuple(f) for f in self.fiducials))
        if self.meas_fiducials is not None:
            object.__setattr__(self, "meas_fiducials", tuple(tuple(f) for f in self.meas_fiducials))
        if not self.fiducials:
            raise ValueError("need at least one fiducial")
        for f in self.fiducials + (self.meas_fiducials or ()):
            for label in f:
                if label not in self.gates:
                    raise ValueError(f"fiducial uses unknown button {label!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.gates)

    def sample_gateset(self, rng: np.random.Generator) -> GateSet:
        rho = self.rho.sample(rng)
        effect = self.effect.sample(rng)
        gates = {k: prior.sample(rng) for k, prior in self.gates.items()}
        return GateSet(rho, effect, gates)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho.to_dict(),
            "effect": self.effect.to_dict(),
            "gates": {k: v.to_dict() for k, v in self.gates.items()},
            "fiducials": [list(f) for f in self.fiducials],
            "meas_fiducials": None if self.meas_fiducials is None else [list(f) for f in self.meas_fiducials],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PriorSpec":
        unknown = set(d) - {"rho", "effect", "gates", "fiducials", "meas_fiducials"}
        if unknown:
            raise ValueError(f"unknown prior-spec keys {sorted(unknown)}")
        meas = d.get("meas_fiducials")
        return cls(
            rho=ChannelPrior.from_dict(d["rho"]),
            effect=ChannelPrior.from_dict(d["effect"]),
            gates={k: ChannelPrior.from_dict(v) for k, v in d["gates"].items()},
            fiducials=tuple(tuple(f) for f in d["fiducials"]),
            meas_fiducials=None if meas is None else tuple(tuple(f) for f in meas),
        )


def exact_spec(gs: GateSet, fiducials, meas_fiducials=None) -> PriorSpec:
    """Point-mass prior on a fixed gate set."""
    return PriorSpec(
        rho=ChannelPrior.exact(gs.rho),
        effect=ChannelPrior.exact(gs.effect),
        gates={k: ChannelPrior.exact(g) for k, g in gs.gates.items()},
        fiducials=tuple(fiducials),
        meas_fiducials=None if meas_fiducials is None else tuple(meas_fiducials),
    )

