"""
Primal-dual preconditioned descent for the penalized energy, and p-continuation.

Each outer iteration computes the multiplier lambda_n from the current iterate,
solves the (1 + lambda_n)-weighted stiffness system for a descent direction,
backtracks until the Armijo condition holds and stops once the scaled residual
norm drops below ``eps_tol``.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import (
    ContinuationError,
    DescentDirectionError,
    GradpenError,
    LinearSolverError,
    LineSearchError,
    PenaltyOverflowError,
)
from ..models import SolverConfig
from .fem import ElementField, ScalarField, apply_dirichlet, assemble_weighted_stiffness
from .linalg import cg_solve
from .problem import (
    ProblemSpec,
    check_boundary,
    energy,
    energy_change,
    hessian,
    multiplier_field,
    residual,
)

logger = logging.getLogger(__name__)


@dataclass
class SolveReport:
    """Final fields and iteration history of one penalized solve

    ``decrease_history`` holds J(u_n+1) - J(u_n) per step, every entry negative.
    ``energy_history`` starts at J(u_0) and accumulates those changes, so it is
    non-increasing and drops strictly whenever a change exceeds the float
    spacing of J.
    """

    p: float
    u: ScalarField
    multiplier: ElementField
    iterations: int = 0
    converged: bool = False
    energy_history: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)
    decrease_history: List[float] = field(default_factory=list)
    cg_iterations: List[int] = field(default_factory=list)
    backtracks: int = 0
    wall_time: float = 0.0


def residual_norm(spec: ProblemSpec, r: np.ndarray) -> float:
    """Euclidean norm over the free unknowns divided by sqrt(#free)"""
    free = spec.mesh.free_vertices
    if free.size == 0:
        return 0.0
    return float(np.linalg.norm(r[free]) / np.sqrt(free.size))


def _direction(
    spec: ProblemSpec,
    u_n: ScalarField,
    cfg: SolverConfig,
    r: np.ndarray,
    x0: Optional[np.ndarray] = None,
) -> Tuple[ScalarField, int]:
    mesh = spec.mesh
    if not np.any(r):
        return ScalarField(mesh, np.zeros(mesh.num_vertices)), 0

    if cfg.direction == "newton":
        M = hessian(spec, u_n)
    else:
        lam = multiplier_field(spec, u_n)
        M = assemble_weighted_stiffness(mesh, 1.0 + lam.values)
    M, rhs = apply_dirichlet(M, -r, mesh, 0.0)
    result = cg_solve(M, rhs, x0=x0, tol=cfg.cg_tol, maxit=cfg.cg_maxit)
    if not result.converged:
        logger.warning(
            "inner CG did not converge: %d iterations, residual %.3e", result.iterations, result.residual_norm
        )
        raise LinearSolverError(
            f"inner CG did not converge in {result.iterations} iterations",
            iterations=result.iterations,
            residual=result.residual_norm,
        )
    w = result.x
    w[mesh.boundary_vertex_flags] = 0.0
    return ScalarField(mesh, w), result.iterations


def descent_direction(
    spec: ProblemSpec,
    u_n: ScalarField,
    cfg: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> ScalarField:
    """Solve M w = -r(u_n) with zero boundary values

    M is the (1 + lambda_n)-weighted stiffness, or the Hessian when
    ``cfg.direction == "newton"``.
    """
    return _direction(spec, u_n, cfg or SolverConfig(), residual(spec, u_n), x0)[0]


def _backtrack(
    spec: ProblemSpec, u_n: ScalarField, w_n: ScalarField, cfg: SolverConfig, r: np.ndarray
) -> Tuple[float, int, float]:
    slope = float(r @ w_n.values)
    if not slope < 0.0:
        raise DescentDirectionError(f"r(u)^T w = {slope:.3e} is not negative")

    alpha = cfg.alpha_init
    for k in range(cfg.max_backtracks + 1):
        try:
            change = energy_change(spec, u_n, w_n, alpha)
        except PenaltyOverflowError:
            change = np.inf
        if change <= cfg.c1 * alpha * slope:
            return alpha, k, change
        logger.debug("backtrack %d: alpha=%.3e change=%.3e", k, alpha, change)
        alpha *= cfg.shrink
    raise LineSearchError(
        f"no sufficient decrease after {cfg.max_backtracks} shrinks (slope {slope:.3e}, p={spec.p:g})"
    )


def armijo_search(
    spec: ProblemSpec,
    u_n: ScalarField,
    w_n: ScalarField,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """Largest alpha in {alpha_init shrink^k} with sufficient decrease of J_p"""
    return _backtrack(spec, u_n, w_n, cfg or SolverConfig(), residual(spec, u_n))[0]


def solve(
    spec: ProblemSpec, cfg: Optional[SolverConfig] = None, u_init: Optional[ScalarField] = None
) -> SolveReport:
    """Run the descent from ``u_init`` (default: the constant boundary value)"""
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    u = spec.boundary_field() if u_init is None else u_init
    check_boundary(spec, u)

    report = SolveReport(p=spec.p, u=u, multiplier=multiplier_field(spec, u))
    r = residual(spec, u)
    report.residual_history.append(residual_norm(spec, r))
    report.energy_history.append(energy(spec, u).total)
    previous_w: Optional[np.ndarray] = None

    while report.residual_history[-1] > cfg.eps_tol:
        if report.iterations >= cfg.max_outer:
            logger.warning(
                "p=%g: stopped at max_outer=%d with residual %.3e",
                spec.p,
                cfg.max_outer,
                report.residual_history[-1],
            )
            break
        w, cg_iterations = _direction(spec, u, cfg, r, x0=previous_w)
        alpha, backtracks, decrease = _backtrack(spec, u, w, cfg, r)
        u = ScalarField(spec.mesh, u.values + alpha * w.values)
        r = residual(spec, u)

        report.iterations += 1
        report.step_history.append(alpha)
        report.decrease_history.append(decrease)
        report.cg_iterations.append(cg_iterations)
        report.backtracks += backtracks
        # J_n plus the cancellation-free change: never above J_n after rounding
        report.energy_history.append(report.energy_history[-1] + decrease)
        report.residual_history.append(residual_norm(spec, r))
        previous_w = w.values.copy()
        logger.debug(
            "p=%g it=%d J=%.15g |r|=%.3e alpha=%.3e cg=%d",
            spec.p,
            report.iterations,
            report.energy_history[-1],
            report.residual_history[-1],
            alpha,
            report.cg_iterations[-1],
        )
    else:
        report.converged = True

    report.u = u
    report.multiplier = multiplier_field(spec, u)
    report.wall_time = time.perf_counter() - started
    logger.info(
        "p=%g: %s after %d iteration(s), residual %.3e, %.2fs",
        spec.p,
        "converged" if report.converged else "NOT converged",
        report.iterations,
        report.residual_history[-1],
        report.wall_time,
    )
    return report


def p_continuation(
    spec: ProblemSpec, cfg: Optional[SolverConfig] = None, u_init: Optional[ScalarField] = None
) -> List[SolveReport]:
    """Solve for every p of ``cfg.p_schedule``, warm-starting from the previous stage

    When the schedule does not start at p=2, the p=2 solution seeds the first stage.
    A failing stage raises :class:`ContinuationError` carrying the finished reports.
    """
    cfg = cfg or SolverConfig()
    reports: List[SolveReport] = []
    u = u_init
    if u is None and cfg.p_schedule[0] != 2:
        try:
            u = solve(spec.with_p(2.0), cfg).u
        except GradpenError as exc:
            raise ContinuationError(2.0, reports) from exc

    for p in cfg.p_schedule:
        stage = spec.with_p(p)
        logger.info("continuation stage p=%g", p)
        try:
            report = solve(stage, cfg, u)
        except GradpenError as exc:
            logger.error("stage p=%g failed: %s", p, exc)
            raise ContinuationError(p, reports) from exc
        reports.append(report)
        u = report.u
    return reports
