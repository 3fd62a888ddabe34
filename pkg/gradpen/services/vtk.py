from pathlib import Path
from typing import Dict, Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader

from .mesh import Mesh

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"


def _format(values: np.ndarray):
    return ["%.17g" % v for v in np.asarray(values, dtype=float).ravel()]


class VTKService:
    """Service for writing legacy ASCII VTK unstructured grids"""

    def __init__(self, templates_dir: Optional[Path] = None):
        self.templates_dir = Path(templates_dir) if templates_dir else TEMPLATES_DIR
        self.env = Environment(
            loader=FileSystemLoader(self.templates_dir),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    def render(
        self,
        mesh: Mesh,
        point_data: Dict[str, np.ndarray],
        cell_data: Dict[str, np.ndarray],
        title: str = "gradpen field export",
    ) -> str:
        """Render a triangle grid with scalar point and cell arrays

        Args:
            mesh: Triangulation providing points and cells
            point_data: One value per vertex for each named array
            cell_data: One value per triangle for each named array

        Returns:
            The VTK file content
        """
        for name, values in point_data.items():
            if len(values) != mesh.num_vertices:
                raise ValueError(f"point array {name!r} has {len(values)} values for {mesh.num_vertices} points")
        for name, values in cell_data.items():
            if len(values) != mesh.num_triangles:
                raise ValueError(f"cell array {name!r} has {len(values)} values for {mesh.num_triangles} cells")

        points = [tuple(_format(xy)) for xy in mesh.vertices]
        template = self.env.get_template("vtk/unstructured_grid.vtk.j2")
        return template.render(
            title=title.replace("\n", " ")[:255],
            num_points=mesh.num_vertices,
            num_cells=mesh.num_triangles,
            cells_size=4 * mesh.num_triangles,
            points=points,
            cells=mesh.triangles.tolist(),
            point_data=[(name, _format(values)) for name, values in point_data.items()],
            cell_data=[(name, _format(values)) for name, values in cell_data.items()],
        )

    def write(
        self,
        path: Path,
        mesh: Mesh,
        point_data: Dict[str, np.ndarray],
        cell_data: Dict[str, np.ndarray],
        title: str = "gradpen field export",
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="ascii") as f:
            f.write(self.render(mesh, point_data, cell_data, title))
        return path
