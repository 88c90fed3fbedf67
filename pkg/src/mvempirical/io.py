"""CSV/JSON readers and writers for measures, paths and result tables.

Floats are written in shortest round-trip form (``repr``), so reading a file
back reproduces every stored value exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .measures import DiscreteWeights, EmpiricalMeasure, make_empirical


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if r]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


# ---------------------------------------------------------------------------
# measures


def measure_to_json(mu: EmpiricalMeasure) -> dict:
    return {"atoms": mu.atoms.tolist(), "weights": mu.weights.tolist()}


def measure_from_json(obj: dict) -> EmpiricalMeasure:
    return make_empirical(obj["atoms"], obj["weights"])


def write_measure_csv(path, mu: EmpiricalMeasure) -> Path:
    header = [f"x_{j}" for j in range(mu.dim)] + ["weight"]
    rows = ([*a, w] for a, w in zip(mu.atoms.tolist(), mu.weights.tolist()))
    return write_rows(path, header, rows)


def read_measure(path) -> EmpiricalMeasure:
    """Measure from ``.json`` or CSV (columns x_0..x_{d-1}[, weight]).

    A CSV without a ``weight`` column gets uniform weights.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        return measure_from_json(json.loads(path.read_text()))
    header, rows = read_rows(path)
    data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    if data.size == 0:
        raise ValueError(f"{path}: no atoms")
    if "weight" in header:
        k = header.index("weight")
        return make_empirical(np.delete(data, k, axis=1), data[:, k])
    return make_empirical(data)


def weights_to_json(pi: DiscreteWeights) -> dict:
    return {"positions": pi.positions.tolist(), "weights": pi.weights.tolist(),
            "widths": pi.widths.tolist()}


def write_weights_csv(path, pi: DiscreteWeights) -> Path:
    rows = zip(pi.positions.tolist(), pi.weights.tolist(), pi.widths.tolist())
    return write_rows(path, ["position", "weight", "width"], rows)


# ---------------------------------------------------------------------------
# paths


def write_path_csv(path, record) -> Path:
    header = ["t"] + [f"x_{j}" for j in range(record.dim)]
    rows = ([t, *x] for t, x in zip(record.times.tolist(), record.states.tolist()))
    return write_rows(path, header, rows)


def read_path_csv(path):
    from .measures import MomentAccumulator
    from .sde import PathRecord

    header, rows = read_rows(path)
    data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    states = data[:, 1:]
    acc = MomentAccumulator.empty(states.shape[1])
    for x in states:
        acc.update(x)
    return PathRecord(data[:, 0], states, acc, seed_trace=-1)


def path_to_json(record) -> dict:
    return {"times": record.times.tolist(), "states": record.states.tolist(),
            "seed": record.seed_trace}
