"""
Minimal reader for the legacy ASCII VTK files written by gradpen.

Kept independent of the writer so tests re-read the files the way an external
viewer would.
"""
from pathlib import Path
from typing import Dict, List

import numpy as np


class LegacyGrid:
    def __init__(self):
        self.title = ""
        self.points = np.zeros((0, 3))
        self.cells: List[List[int]] = []
        self.cell_types: List[int] = []
        self.point_data: Dict[str, np.ndarray] = {}
        self.cell_data: Dict[str, np.ndarray] = {}


def read_legacy_vtk(path: Path) -> LegacyGrid:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    assert lines[0].startswith("# vtk DataFile Version")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    grid = LegacyGrid()
    grid.title = lines[1]

    i = 4
    section = None
    counts = {}
    while i < len(lines):
        tokens = lines[i].split()
        if not tokens:
            i += 1
            continue
        key = tokens[0]
        if key == "POINTS":
            n = int(tokens[1])
            grid.points = np.array([[float(v) for v in lines[i + 1 + k].split()] for k in range(n)])
            i += n + 1
        elif key == "CELLS":
            n = int(tokens[1])
            grid.cells = [[int(v) for v in lines[i + 1 + k].split()] for k in range(n)]
            i += n + 1
        elif key == "CELL_TYPES":
            n = int(tokens[1])
            grid.cell_types = [int(lines[i + 1 + k]) for k in range(n)]
            i += n + 1
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = key
            counts[key] = int(tokens[1])
            i += 1
        elif key == "SCALARS":
            name = tokens[1]
            assert lines[i + 1].strip() == "LOOKUP_TABLE default"
            n = counts[section]
            values = np.array([float(lines[i + 2 + k]) for k in range(n)])
            target = grid.point_data if section == "POINT_DATA" else grid.cell_data
            target[name] = values
            i += n + 2
        else:
            raise ValueError(f"unexpected line {i}: {lines[i]!r}")
    return grid
