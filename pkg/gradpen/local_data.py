import csv
import json
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from pydantic import ValidationError

from .exceptions import MeshError, ReportError
from .models import (
    DIAGNOSTICS_HEADER,
    ERROR_TABLE_HEADER,
    DiagnosticRow,
    ErrorRow,
    ReportRecord,
    RunConfig,
)
from .services.mesh import Mesh

DISCRETIZATION_NOTE = (
    "# discretization: continuous P1 triangles; dofs are vertex counts, "
    "not comparable with quadratic-element dof counts"
)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return "%.17g" % float(value)


def save_mesh(mesh: Mesh, path: Path) -> Path:
    """Write a mesh in the plain-text ``V T B`` format (0-based indices)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(f"{mesh.num_vertices} {mesh.num_triangles} {len(mesh.boundary_edges)}\n")
        for (x, y), flag in zip(mesh.vertices, mesh.boundary_vertex_flags):
            f.write(f"{_fmt(x)} {_fmt(y)} {int(flag)}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        for a, b in mesh.boundary_edges:
            f.write(f"{a} {b}\n")
    return path


def load_mesh(path: Path, domain_tag: str = "custom") -> Mesh:
    """Read a mesh written by :func:`save_mesh`."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            lines = [line.split() for line in f if line.strip()]
        nv, nt, nb = (int(v) for v in lines[0])
        body = lines[1:]
        if len(body) != nv + nt + nb:
            raise MeshError(f"{path}: expected {nv + nt + nb} records, found {len(body)}")
        vertices = np.array([[float(x), float(y)] for x, y, _ in body[:nv]])
        flags = np.array([int(flag) != 0 for _, _, flag in body[:nv]], dtype=bool)
        triangles = np.array([[int(i) for i in rec] for rec in body[nv : nv + nt]], dtype=np.int64)
        edges = np.array([[int(i) for i in rec] for rec in body[nv + nt :]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    recipe = {"domain": "custom", "path": str(path)}
    return Mesh(
        vertices=vertices,
        triangles=triangles.reshape(-1, 3),
        boundary_vertex_flags=flags,
        boundary_edges=edges.reshape(-1, 2),
        domain_tag=domain_tag,
        recipe=recipe,
    )


def _validation_message(exc: ValidationError) -> str:
    problems = []
    for error in exc.errors():
        key = ".".join(str(part) for part in error["loc"]) or "<root>"
        problems.append(f"'{key}': {error['msg']}")
    return "; ".join(problems)


def load_run_config(path: Path) -> RunConfig:
    """Load and validate a flat JSON run configuration."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise ReportError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ReportError(f"config file {path} must hold a JSON object")
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ReportError(f"invalid config {path}: {_validation_message(exc)}") from exc


def _dump_json(path: Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def save_report(record: ReportRecord, path: Path) -> Path:
    """Persist a solve report as JSON with field arrays inline."""
    return _dump_json(path, record.model_dump(by_alias=True, mode="json"))


def load_report(path: Path) -> ReportRecord:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
        return ReportRecord.model_validate(data)
    except FileNotFoundError as exc:
        raise ReportError(f"report {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"report {path} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ReportError(f"report {path} is incomplete: {_validation_message(exc)}") from exc


def save_timings(timings: Dict[str, float], path: Path) -> Path:
    """Wall times live apart from the reports so reports stay reproducible."""
    return _dump_json(path, timings)


def _write_table(path: Path, header: Sequence[str], rows: List[Sequence], note: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        if note:
            f.write(note + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def save_error_table(rows: List[ErrorRow], path: Path) -> Path:
    """CSV error table, rows ordered by ascending p."""
    ordered = sorted(rows, key=lambda row: row.p)
    return _write_table(path, ERROR_TABLE_HEADER, [row.values() for row in ordered], DISCRETIZATION_NOTE)


def load_error_table(path: Path) -> List[ErrorRow]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append(
            ErrorRow(
                p=float(rec["p"]),
                cells=int(rec["cells"]),
                dofs=int(rec["dofs"]),
                l2=float(rec["L2"]),
                h1=float(rec["H1"]),
                w1_inf=float(rec["W1inf"]),
                dual_l1=float(rec["dualL1"]),
                dual_linf=float(rec["dualLinf"]),
            )
        )
    return rows


def save_diagnostics(rows: List[DiagnosticRow], path: Path) -> Path:
    return _write_table(path, DIAGNOSTICS_HEADER, [row.values() for row in rows])


def save_flux_pairings(rows: List[Sequence[float]], path: Path) -> Path:
    """One row per p: the pairings against each random test field."""
    count = len(rows[0]) - 1 if rows else 0
    header = ["p"] + [f"v{k + 1}" for k in range(count)]
    return _write_table(path, header, rows)
