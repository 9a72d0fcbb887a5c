"""Datasets, JSON artifacts, CSV tables and checkpoints.

Dataset text format, one record per line::

    # buttons: Gx,Gy
    # source: synthetic
    Gx,Gy,Gy 1000 512
    () 1000 998

Fields are the comma-separated button labels (``()`` for the empty
sequence), the number of trials and the number of successes.  Lines starting
with ``#`` are comments; ``# key: value`` comments carry metadata.

All writers are deterministic: JSON keys are sorted and floats are written
with ``repr`` so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .gateset import GateSet, format_sequence, parse_sequence
from .oprep import OperationalRep, ParameterMap
from .smc import Datum, ParticleCloud

BASIS_TAG = "pauli-normalized"
GAUGE_LABEL = "arbitrary"
CHECKPOINT_VERSION = 1


class DatasetError(ValueError):
    """Malformed dataset file; the message cites ``path:line``."""


@dataclass
class DataSet:
    records: list = field(default_factory=list)  # of Datum
    buttons: tuple = ()
    source: str = ""

    def __post_init__(self):
        self.buttons = tuple(self.buttons)
        if self.buttons:
            known = set(self.buttons)
            for d in self.records:
                bad = set(d.sequence) - known
                if bad:
                    raise ValueError(f"record {format_sequence(d.sequence)} uses undeclared buttons {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


# -- datasets ------------------------------------------------------------------

def write_dataset(path, records: Iterable[Datum], buttons=(), source: str = "") -> None:
    lines = []
    if buttons:
        lines.append(f"# buttons: {','.join(buttons)}")
    if source:
        lines.append(f"# source: {source}")
    for d in records:
        lines.append(f"{format_sequence(d.sequence)} {d.trials} {d.successes}")
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_dataset(path) -> DataSet:
    """Parse a dataset file.

    Raises
    ------
    DatasetError
        On a malformed line, with the file name and 1-based line number.
    """
    records: list[Datum] = []
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*(\w+)\s*:\s*(.*)$", line)
                if m and m.group(1) in ("buttons", "source"):
                    meta[m.group(1)] = m.group(2).strip()
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DatasetError(f"{path}:{lineno}: expected '<sequence> <trials> <successes>', got {line!r}")
            try:
                s = parse_sequence(parts[0])
                trials, successes = int(parts[1]), int(parts[2])
                records.append(Datum(s, trials, successes))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    buttons = tuple(b for b in meta.get("buttons", "").split(",") if b)
    try:
        return DataSet(records, buttons, meta.get("source", ""))
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def ingest_dataset(path) -> DataSet:
    return read_dataset(path)


_GATE_NAME = re.compile(r"G[a-z0-9_]*")
_EXPONENT = re.compile(r"\^(\d+)")


def parse_circuit_string(text: str) -> tuple:
    """Parse the compact circuit notation used by other GST tools.

    ``{}`` is the empty circuit, gate names are ``G`` plus lowercase letters,
    digits or underscores (so ``GxGy`` is two gates) and a
    parenthesized group, possibly nested, may be raised to an integer power,
    e.g. ``Gx(GxGy)^4Gi``.  A trailing ``@(...)`` line marker is ignored.
    """
    text = text.strip().split("@")[0].replace("{}", "")
    out, pos = _parse_group(text, 0)
    if pos != len(text):
        raise ValueError(f"cannot parse circuit {text!r} at position {pos}")
    return tuple(out)


def _parse_group(text: str, pos: int) -> tuple[list, int]:
    out: list[str] = []
    while pos < len(text) and text[pos] != ")":
        if text[pos] == "(":
            inner, pos = _parse_group(text, pos + 1)
            if pos >= len(text) or text[pos] != ")":
                raise ValueError(f"unbalanced parenthesis in circuit {text!r}")
            pos += 1
            m = _EXPONENT.match(text, pos)
            reps = 1
            if m:
                reps, pos = int(m.group(1)), m.end()
            out.extend(inner * reps)
            continue
        m = _GATE_NAME.match(text, pos)
        if m is None:
            raise ValueError(f"cannot parse circuit {text!r} at position {pos}")
        out.append(m.group(0))
        pos = m.end()
    return out, pos


def convert_count_table(src, dst, source: str = "converted") -> DataSet:
    """Convert a whitespace table ``<circuit> <count 0> <count 1>`` to the native format.

    This is the layout of count-based GST dataset exports: one circuit per
    line in compact notation (see :func:`parse_circuit_string`), followed by
    the number of ``0`` outcomes and ``1`` outcomes.  Outcome ``0`` is the
    success (the effect ``E``).  Comment lines start with ``#``.
    """
    records = []
    with open(src, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DatasetError(f"{src}:{lineno}: expected '<circuit> <count0> <count1>'")
            try:
                s = parse_circuit_string(parts[0])
                c0, c1 = int(float(parts[1])), int(float(parts[2]))
                records.append(Datum(s, c0 + c1, c0))
            except ValueError as exc:
                raise DatasetError(f"{src}:{lineno}: {exc}") from None
    buttons = tuple(sorted({label for d in records for label in d.sequence}))
    write_dataset(dst, records, buttons, source)
    return DataSet(records, buttons, source)


# -- JSON ----------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, allow_nan=False) + "\n"


def save_json(path, obj) -> None:
    _write_text(path, dumps(obj))


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def gateset_to_dict(gs: GateSet) -> dict:
    return {
        "basis": BASIS_TAG,
        "gauge": GAUGE_LABEL,
        "dim": gs.dim,
        "rho": gs.rho.tolist(),
        "effect": gs.effect.tolist(),
        "gates": {k: g.tolist() for k, g in gs.gates.items()},
    }


def gateset_from_dict(d: Mapping) -> GateSet:
    _check_keys(d, {"basis", "gauge", "dim", "rho", "effect", "gates"}, "gate set")
    _check_basis(d)
    return GateSet(np.array(d["rho"]), np.array(d["effect"]), {k: np.array(g) for k, g in d["gates"].items()})


def rep_to_dict(rep: OperationalRep) -> dict:
    return {
        "basis": BASIS_TAG,
        "dim": rep.dim,
        "template": rep.pmap.to_dict(),
        "minimal": rep.minimal.tolist(),
        "e_tilde": rep.e_tilde.tolist(),
        "f_tilde": rep.f_tilde.tolist(),
        "g_tilde": {k: g.tolist() for k, g in rep.g_tilde.items()},
    }


def rep_from_dict(d: Mapping) -> OperationalRep:
    """Rebuild from the minimal parameters; the expanded tensors are informational."""
    _check_keys(d, {"basis", "dim", "template", "minimal", "e_tilde", "f_tilde", "g_tilde"}, "operational rep")
    _check_basis(d)
    return OperationalRep(ParameterMap.from_dict(d["template"]), np.array(d["minimal"]), d.get("dim", 2))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: Mapping) -> np.random.Generator:
    name = state["bit_generator"]
    bitgen = getattr(np.random, name)()
    bitgen.state = dict(state)
    return np.random.Generator(bitgen)


def save_checkpoint(path, cloud: ParticleCloud, rng: np.random.Generator | None = None,
                    extra: Mapping | None = None) -> None:
    """Write the cloud (and optionally the RNG state) so a run can resume."""
    doc = {"version": CHECKPOINT_VERSION, "basis": BASIS_TAG, "cloud": cloud.to_dict()}
    if rng is not None:
        doc["rng"] = rng_state(rng)
    if extra:
        doc["extra"] = dict(extra)
    save_json(path, doc)


def load_checkpoint(path) -> tuple[ParticleCloud, np.random.Generator | None, dict]:
    doc = load_json(path)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    _check_basis(doc)
    rng = restore_rng(doc["rng"]) if "rng" in doc else None
    return ParticleCloud.from_dict(doc["cloud"]), rng, doc.get("extra", {})


def _check_keys(d: Mapping, allowed: set, what: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys {sorted(unknown)}")


def _check_basis(d: Mapping) -> None:
    if d.get("basis", BASIS_TAG) != BASIS_TAG:
        raise ValueError(f"expected basis {BASIS_TAG!r}, got {d['basis']!r}")


# -- CSV -----------------------------------------------------------------------

def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, tuple):
        return format_sequence(x)
    return str(x)


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    header = list(header)
    lines = [",".join(header)]
    for row in rows:
        row = list(row)
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(_quote(_cell(x)) for x in row))
    _write_text(path, "\n".join(lines) + "\n")


def _quote(text: str) -> str:
    return f'"{text}"' if "," in text else text


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_trajectory(path, times, states) -> None:
    """One row per time: ``t`` followed by the named operational state entries."""
    states = list(states)
    if len(states) != len(times):
        raise ValueError("need one state per time")
    names = states[0].names() if states else []
    write_csv(path, ["t", *names], ([float(t), *map(float, s.psi)] for t, s in zip(times, states)))


def _write_text(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
