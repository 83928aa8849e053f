"""Instance, solution, warm-start and trace file formats.

Instance, solution and warm-start files are JSON documents tagged with a
``format`` name and ``version``.  Matrices are stored either dense (a list of
rows) or as sparse triplets ``{"shape": [r, c], "triplets": [[i, j, v], ...]}``.
Floats are written with ``repr`` precision, so reading a file back gives
bit-identical arrays.  Traces and benchmark tables are CSV.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .graph import Topology
from .instance import ProblemInstance
from .solver import Solution, TraceRecord, WarmStart
from .utilities import UtilitySpec

__all__ = [
    "FormatError",
    "instance_to_dict", "instance_from_dict", "write_instance", "read_instance",
    "write_solution", "read_solution",
    "write_warmstart", "read_warmstart",
    "write_trace", "read_trace",
    "write_csv_rows", "format_cell",
    "TRACE_COLUMNS",
]

INSTANCE_FORMAT = "pdmcf-instance"
SOLUTION_FORMAT = "pdmcf-solution"
WARMSTART_FORMAT = "pdmcf-warmstart"
VERSION = 1
FLOW_THRESHOLD = 1e-9
TRACE_COLUMNS = ("iter", "residual", "infeasible_fraction", "omega", "utility")


class FormatError(ValueError):
    """A file does not follow the expected schema."""


def _dumps(doc: dict) -> str:
    # one top-level key per line, one matrix row per line
    lines = []
    for key, value in doc.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            rows = ",\n    ".join(json.dumps(r) for r in value)
            text = f"[\n    {rows}\n  ]"
        elif isinstance(value, dict):
            text = _dumps(value).replace("\n", "\n  ")
        else:
            text = json.dumps(value)
        lines.append(f"  {json.dumps(key)}: {text}")
    return "{\n" + ",\n".join(lines) + "\n}"


def _write(path, doc):
    Path(path).write_text(_dumps(doc) + "\n")


def _read(path, fmt):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise FormatError(f"{path}: expected a {fmt!r} document")
    if doc.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def _triplets(M, threshold):
    i, j = np.nonzero(np.abs(M) > threshold)
    return {"shape": list(M.shape), "threshold": threshold,
            "triplets": [[int(a), int(b), float(M[a, b])] for a, b in zip(i, j)]}


def _matrix(obj, shape=None):
    if isinstance(obj, dict):
        M = np.zeros(tuple(obj["shape"]))
        for i, j, v in obj["triplets"]:
            M[int(i), int(j)] = v
    else:
        M = np.array(obj, dtype=np.float64)
    if shape is not None and M.shape != tuple(shape):
        raise FormatError(f"matrix has shape {M.shape}, expected {tuple(shape)}")
    return M


def instance_to_dict(inst: ProblemInstance, meta: dict | None = None) -> dict:
    spec = inst.utility
    utility = {"family": spec.family}
    if spec.power_exponent is not None:
        utility["gamma"] = spec.power_exponent
    utility["weights"] = spec.weights.tolist()
    doc = {"format": INSTANCE_FORMAT, "version": VERSION}
    if meta:
        doc["meta"] = meta
    doc.update({
        "n": inst.n,
        "edges": [[t, h] for t, h in inst.topology.edges],
        "capacities": inst.topology.capacities.tolist(),
        "utility": utility,
    })
    return doc


def instance_from_dict(doc: dict) -> ProblemInstance:
    try:
        n = int(doc["n"])
        topo = Topology.from_edges(n, doc["edges"], doc["capacities"])
        u = doc["utility"]
        W = _matrix(u["weights"], (n, n))
        spec = UtilitySpec(u["family"], W, u.get("gamma"))
        return ProblemInstance(topo, spec)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed instance: {exc!r}") from exc


def write_instance(path, inst: ProblemInstance, meta: dict | None = None) -> None:
    _write(path, instance_to_dict(inst, meta))


def read_instance(path) -> ProblemInstance:
    return instance_from_dict(_read(path, INSTANCE_FORMAT))


def read_instance_meta(path) -> dict:
    return _read(path, INSTANCE_FORMAT).get("meta", {})


def write_solution(path, sol: Solution) -> None:
    doc = {
        "format": SOLUTION_FORMAT, "version": VERSION,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "final_residual": sol.final_residual,
        "epsilon": sol.epsilon,
        "utility": sol.utility,
        "omega": sol.omega,
        "seconds": sol.seconds,
        "F": _triplets(sol.F, FLOW_THRESHOLD),
        "T": sol.T.tolist(),
        "Y": sol.Y.tolist(),
    }
    _write(path, doc)


def read_solution(path) -> Solution:
    doc = _read(path, SOLUTION_FORMAT)
    try:
        return Solution(
            F=_matrix(doc["F"]), T=_matrix(doc["T"]), Y=_matrix(doc["Y"]),
            iterations=int(doc["iterations"]), final_residual=float(doc["final_residual"]),
            utility=float(doc["utility"]), converged=bool(doc["converged"]),
            omega=float(doc["omega"]), epsilon=float(doc["epsilon"]),
            seconds=float(doc["seconds"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed solution: {exc!r}") from exc


def write_warmstart(path, ws: WarmStart, meta: dict | None = None) -> None:
    doc = {"format": WARMSTART_FORMAT, "version": VERSION}
    if meta:
        doc["meta"] = meta
    doc.update({
        "omega": ws.omega,
        "iterations": ws.iterations,
        # exact: every nonzero entry is kept
        "F": _triplets(ws.F, 0.0),
        "Y": ws.Y.tolist(),
    })
    _write(path, doc)


def read_warmstart(path) -> WarmStart:
    doc = _read(path, WARMSTART_FORMAT)
    try:
        return WarmStart(_matrix(doc["F"]), _matrix(doc["Y"]), float(doc["omega"]),
                         int(doc.get("iterations", 0)))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed warm start: {exc!r}") from exc


def format_cell(v):
    """CSV text for one value: floats at full precision, NaN as ``nan``."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.generic):
        return str(v.item())
    return str(v)


def write_csv_rows(path_or_file, columns, rows) -> None:
    """Write dict rows as CSV; floats keep full precision."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row.get(c, "")) for c in columns])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def write_trace(path, trace: list[TraceRecord]) -> None:
    write_csv_rows(path, TRACE_COLUMNS, (vars(r) for r in trace))


def read_trace(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise FormatError(f"{path}: unexpected trace header {reader.fieldnames}")
        return [TraceRecord(int(r["iter"]), float(r["residual"]),
                            float(r["infeasible_fraction"]), float(r["omega"]),
                            float(r["utility"])) for r in reader]
