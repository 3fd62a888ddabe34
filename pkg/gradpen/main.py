import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from .config import settings
from .exceptions import GradpenError
from .local_data import load_mesh, load_run_config, save_mesh
from .models import MeshRecipe
from .services.experiments import ExperimentService, RunOutcome
from .services.mesh import validate

logger = logging.getLogger("gradpen")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

# Services
experiment_service = ExperimentService()


def _exit_code(outcome: RunOutcome) -> int:
    if outcome.failure is not None:
        return EXIT_ERROR
    return EXIT_OK if outcome.fully_converged else EXIT_PARTIAL


def _parse_p_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid p list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("the p list is empty")
    return values


def cmd_solve(config_path: Path, out_dir: Optional[Path] = None, seed: Optional[int] = None) -> int:
    """Continuation run described by a JSON config"""
    try:
        config = load_run_config(config_path)
        if seed is not None:
            config = config.model_copy(update={"seed": seed})
        target = Path(out_dir or config.output_dir or settings.output_dir)
        outcome = experiment_service.run(config, target)
    except GradpenError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    except OSError as exc:
        logger.error("cannot write results: %s", exc)
        return EXIT_ERROR
    for path in outcome.written:
        logger.info("wrote %s", path)
    return _exit_code(outcome)


def cmd_table1(
    refinements: int,
    p_values: Sequence[float],
    out_dir: Optional[Path] = None,
    direction: str = "multiplier",
) -> int:
    """Error table on the unit disk with h = 4"""
    target = Path(out_dir or settings.output_dir)
    try:
        outcome = experiment_service.table1(
            refinements,
            p_values,
            target,
            direction=direction,
            eps_tol=settings.default_eps_tol,
            max_outer=settings.default_max_outer,
        )
    except (GradpenError, ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    for row in outcome.error_rows:
        print(
            f"p={row.p:g} cells={row.cells} dofs={row.dofs} L2={row.l2:.3e} H1={row.h1:.3e} "
            f"W1inf={row.w1_inf:.3e} dualL1={row.dual_l1:.3e} dualLinf={row.dual_linf:.3e}"
        )
    return _exit_code(outcome)


def cmd_export_vtk(
    report_path: Path, out_path: Optional[Path] = None, truncate: Optional[float] = None
) -> int:
    """Legacy VTK file from a saved report"""
    try:
        path = experiment_service.export_vtk(report_path, out_path, truncate)
    except (GradpenError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    logger.info("wrote %s", path)
    return EXIT_OK


def cmd_mesh_info(
    domain: str,
    refinements: int = 0,
    width: float = 2.0,
    height: float = 1.0,
    load: Optional[Path] = None,
    save: Optional[Path] = None,
) -> int:
    """Print cell/dof counts and the validation summary of a mesh"""
    try:
        if load is not None:
            mesh = load_mesh(load)
            report = validate(mesh)
        else:
            recipe = MeshRecipe(domain=domain, refinements=refinements, width=width, height=height)
            if recipe.domain == "custom":
                raise GradpenError("the custom domain needs --load PATH")
            mesh, report = experiment_service.mesh_info(recipe)
        if save is not None:
            save_mesh(mesh, save)
    except (GradpenError, ValidationError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    print(f"{mesh.describe()} boundary_edges={len(mesh.boundary_edges)}")
    print(report.summary())
    for violation in report.violations:
        print(f"  - {violation}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradpen", description="p-power penalty finite elements for gradient-constrained problems"
    )
    parser.add_argument("--log-level", default=settings.log_level, help="logging level")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized test fields")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run a p-continuation from a JSON config")
    solve.add_argument("--config", type=Path, required=True)
    solve.add_argument("--out", type=Path, default=None)

    table = sub.add_parser("table1", help="disk error table for h = 4")
    table.add_argument("--refinements", type=int, default=settings.table1_refinements)
    table.add_argument("--p", type=_parse_p_list, default=list(settings.table1_p_values))
    table.add_argument("--out", type=Path, default=None)
    table.add_argument("--direction", default="multiplier", help="multiplier or newton")

    export = sub.add_parser("export-vtk", help="write a legacy VTK file from a report")
    export.add_argument("report", type=Path)
    export.add_argument("--out", type=Path, default=None)
    export.add_argument("--truncate", type=float, default=None, help="also write lambda capped at this value")

    info = sub.add_parser("mesh-info", help="mesh statistics and validation")
    info.add_argument("--domain", default="disk")
    info.add_argument("--refinements", type=int, default=0)
    info.add_argument("--width", type=float, default=2.0)
    info.add_argument("--height", type=float, default=1.0)
    info.add_argument("--load", type=Path, default=None)
    info.add_argument("--save", type=Path, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.log_format)

    if args.command == "solve":
        return cmd_solve(args.config, args.out, args.seed)
    if args.command == "table1":
        return cmd_table1(args.refinements, args.p, args.out, args.direction)
    if args.command == "export-vtk":
        return cmd_export_vtk(args.report, args.out, args.truncate)
    return cmd_mesh_info(args.domain, args.refinements, args.width, args.height, args.load, args.save)


if __name__ == "__main__":
    sys.exit(main())
