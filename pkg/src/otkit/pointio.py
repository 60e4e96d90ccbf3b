"""Reading and writing measures and solver results.

CSV files carry one point per row under the header ``x1,...,xd,mass``;
JSON files carry ``{"points": [[...]], "masses": [...]}``.  Floats are
written with ``repr``, whose shortest-round-trip form reloads to the exact
same double, so save followed by load is lossless.
"""

import csv
import json
import re
from pathlib import Path

import numpy as np

from .measures import DiscreteMeasure, TransportPlan, cost_matrix

_HEADER_RE = re.compile(r"^x(\d+)$")


def save_measure_csv(measure: DiscreteMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k + 1}" for k in range(measure.dim)] + ["mass"])
        for point, mass in zip(measure.points, measure.masses):
            writer.writerow([repr(float(c)) for c in point] + [repr(float(mass))])


def load_measure_csv(path) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        dim = _check_header(header, path)
        points, masses = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            points.append(values[:dim])
            masses.append(values[dim])
    if not points:
        raise ValueError(f"{path}: no data rows")
    return DiscreteMeasure(np.array(points), np.array(masses))


def _check_header(header: list[str], path) -> int:
    if len(header) < 2 or header[-1].strip() != "mass":
        raise ValueError(f"{path}:1: header must be x1,...,xd,mass")
    for k, name in enumerate(header[:-1]):
        m = _HEADER_RE.match(name.strip())
        if not m or int(m.group(1)) != k + 1:
            raise ValueError(f"{path}:1: coordinate column {k + 1} must be named x{k + 1}, got {name!r}")
    return len(header) - 1


def save_measure_json(measure: DiscreteMeasure, path) -> None:
    payload = {"points": measure.points.tolist(), "masses": measure.masses.tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_measure_json(path) -> DiscreteMeasure:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: top level must be an object")
    for key in ("points", "masses"):
        if key not in payload:
            raise ValueError(f"{path}: missing field {key!r}")
    try:
        points = np.array(payload["points"], dtype=np.float64)
        masses = np.array(payload["masses"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None
    return DiscreteMeasure(points, masses)


def load_measure(path) -> DiscreteMeasure:
    """Dispatch on extension: .csv or .json."""
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return load_measure_csv(path)
    if suffix == ".json":
        return load_measure_json(path)
    raise ValueError(f"{path}: unsupported extension {suffix!r} (use .csv or .json)")


def save_measure(measure: DiscreteMeasure, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        save_measure_csv(measure, path)
    elif suffix == ".json":
        save_measure_json(measure, path)
    else:
        raise ValueError(f"{path}: unsupported extension {suffix!r} (use .csv or .json)")


def result_payload(
    method: str,
    plan: TransportPlan,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    converged: bool,
    iterations: int,
    residual: float,
    elapsed_seconds: float,
    config: dict,
    extra: dict | None = None,
) -> dict:
    """Assemble a solver result for serialization.

    The cost is recomputed here from the plan being written, not copied
    from the solver, so the stored cost always matches the stored plan.
    """
    C = cost_matrix(source, target)
    payload = {
        "method": method,
        "cost": float(np.sum(plan.entries * C.entries)),
        "converged": bool(converged),
        "iterations": int(iterations),
        "residual": float(residual),
        "plan": plan.entries.tolist(),
        "elapsed_seconds": float(elapsed_seconds),
        "config": config,
    }
    if extra:
        payload.update(extra)
    return payload


def write_result(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_result(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
