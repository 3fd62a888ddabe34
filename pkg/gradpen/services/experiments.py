import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ContinuationError, MeshError
from ..local_data import (
    load_mesh,
    load_report,
    save_diagnostics,
    save_error_table,
    save_flux_pairings,
    save_report,
    save_timings,
)
from ..models import (
    DiagnosticRow,
    ErrorRow,
    MeshRecipe,
    ReportRecord,
    RunConfig,
    SolverConfig,
    ValidationReport,
)
from .analytic import TORSION_SOURCE, error_row
from .diagnostics import flux_pairing, random_test_fields, schedule_summary
from .fem import ElementField, ScalarField, element_gradients
from .mesh import Mesh, generate, validate
from .problem import ProblemSpec
from .solver import SolveReport, p_continuation
from .vtk import VTKService

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    """Everything one continuation run produced"""

    reports: List[SolveReport] = field(default_factory=list)
    error_rows: List[ErrorRow] = field(default_factory=list)
    diagnostics: List[DiagnosticRow] = field(default_factory=list)
    written: List[Path] = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def fully_converged(self) -> bool:
        return self.failure is None and all(report.converged for report in self.reports)


def build_mesh(recipe: MeshRecipe) -> Mesh:
    """Regenerate the mesh a report or config refers to"""
    if recipe.domain == "custom":
        if not recipe.path:
            raise MeshError("a custom mesh recipe needs a path")
        return load_mesh(Path(recipe.path))
    kwargs = {}
    if recipe.domain == "rectangle":
        kwargs = {"width": recipe.width or 2.0, "height": recipe.height or 1.0}
    return generate(recipe.domain, recipe.refinements, **kwargs)


def _recipe_of(mesh: Mesh) -> MeshRecipe:
    return MeshRecipe(**mesh.recipe)


def report_record(spec: ProblemSpec, report: SolveReport, cfg: SolverConfig) -> ReportRecord:
    return ReportRecord(
        mesh=_recipe_of(spec.mesh),
        h=spec.h,
        g=spec.g,
        p=report.p,
        epsilon=spec.epsilon,
        solver=cfg.model_dump(mode="json"),
        iterations=report.iterations,
        converged=report.converged,
        backtracks=report.backtracks,
        u=report.u.values.tolist(),
        multiplier=report.multiplier.values.tolist(),
        energy_history=report.energy_history,
        residual_history=report.residual_history,
        step_history=report.step_history,
        cg_iterations=report.cg_iterations,
    )


def _stem(p: float) -> str:
    return f"p{p:g}"


class ExperimentService:
    """Service running continuation experiments and writing their artifacts"""

    def __init__(self, vtk_service: Optional[VTKService] = None):
        self.vtk_service = vtk_service or VTKService()

    def mesh_info(self, recipe: MeshRecipe) -> Tuple[Mesh, ValidationReport]:
        mesh = build_mesh(recipe)
        return mesh, validate(mesh)

    def run(self, config: RunConfig, out_dir: Path) -> RunOutcome:
        """Continuation over ``config.p_schedule`` plus every requested export"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        mesh = build_mesh(config.mesh_recipe())
        spec = ProblemSpec(mesh=mesh, h=config.h, g=config.g, p=config.p_schedule[0], epsilon=config.epsilon)
        cfg = config.solver_config()
        logger.info("solving on %s (%s), schedule %s", mesh.domain_tag, mesh.describe(), cfg.p_schedule)

        outcome = RunOutcome()
        try:
            outcome.reports = p_continuation(spec, cfg)
        except ContinuationError as exc:
            outcome.reports = exc.reports
            outcome.failure = f"{exc}: {exc.__cause__}"
            logger.error("%s", outcome.failure)

        outcome.diagnostics = schedule_summary(outcome.reports)
        if mesh.domain_tag == "disk" and config.h == TORSION_SOURCE:
            outcome.error_rows = [error_row(spec.with_p(r.p), r) for r in outcome.reports]

        timings: Dict[str, float] = {}
        for report in outcome.reports:
            stem = _stem(report.p)
            timings[stem] = report.wall_time
            if config.export_json:
                path = out_dir / f"report_{stem}.json"
                outcome.written.append(save_report(report_record(spec, report, cfg), path))
            if config.export_vtk:
                path = out_dir / f"fields_{stem}.vtk"
                outcome.written.append(self.write_fields(path, report.u, report.multiplier, f"p={report.p:g}"))
        if config.export_csv:
            if outcome.error_rows:
                outcome.written.append(save_error_table(outcome.error_rows, out_dir / "error_table.csv"))
            outcome.written.append(save_diagnostics(outcome.diagnostics, out_dir / "diagnostics.csv"))
        if config.seed is not None and outcome.reports:
            tests = random_test_fields(mesh, 3, config.seed)
            rows = [[r.p, *flux_pairing(spec.with_p(r.p), r.u, tests)] for r in outcome.reports]
            outcome.written.append(save_flux_pairings(rows, out_dir / "flux_pairings.csv"))
        outcome.written.append(save_timings(timings, out_dir / "timings.json"))
        return outcome

    def table1(
        self, refinements: int, p_values: Sequence[float], out_dir: Path, **solver_options
    ) -> RunOutcome:
        """Disk, h = 4, continuation over ``p_values``, one error row per p"""
        config = RunConfig(
            domain="disk",
            refinements=refinements,
            h=TORSION_SOURCE,
            g=0.0,
            p_schedule=sorted(float(p) for p in p_values),
            export_vtk=False,
            **solver_options,
        )
        return self.run(config, out_dir)

    def write_fields(
        self,
        path: Path,
        u: ScalarField,
        multiplier: ElementField,
        title: str = "gradpen field export",
        truncate: Optional[float] = None,
    ) -> Path:
        cell_data = {
            "grad_norm": element_gradients(u).norms(),
            "lambda": multiplier.values,
        }
        if truncate is not None:
            cell_data["lambda_truncated"] = np.minimum(multiplier.values, truncate)
        return self.vtk_service.write(path, u.mesh, {"u": u.values}, cell_data, title)

    def export_vtk(
        self, report_path: Path, out_path: Optional[Path] = None, truncate: Optional[float] = None
    ) -> Path:
        """Re-create the mesh of a saved report and write its fields as VTK"""
        report_path = Path(report_path)
        record = load_report(report_path)
        mesh = build_mesh(record.mesh)
        u = ScalarField(mesh, np.asarray(record.u))
        multiplier = ElementField(mesh, np.asarray(record.multiplier))
        out_path = Path(out_path) if out_path else report_path.with_suffix(".vtk")
        return self.write_fields(out_path, u, multiplier, f"p={record.p:g} from {report_path.name}", truncate)
