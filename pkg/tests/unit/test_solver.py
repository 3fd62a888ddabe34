"""
Tests for the primal-dual descent, the line search and p-continuation
"""
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.sparse.linalg import spsolve

from gradpen.exceptions import (
    ContinuationError,
    DescentDirectionError,
    LinearSolverError,
    LineSearchError,
)
from gradpen.models import SolverConfig
from gradpen.services.fem import ScalarField, apply_dirichlet, assemble_weighted_stiffness
from gradpen.services.problem import ProblemSpec, energy, residual
from gradpen.services.solver import (
    SolveReport,
    armijo_search,
    descent_direction,
    p_continuation,
    residual_norm,
    solve,
)


def _direct_p2(spec: ProblemSpec) -> np.ndarray:
    """Reference solution of -2 Laplace(u) = h by a sparse direct solve"""
    K = assemble_weighted_stiffness(spec.mesh, 2.0)
    K, rhs = apply_dirichlet(K, spec.load, spec.mesh, spec.g)
    return spsolve(K.tocsc(), rhs)


class TestSolverConfig:
    """Validation of solver controls"""

    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.c1 == 1e-4
        assert cfg.shrink == 0.5
        assert cfg.eps_tol == 1e-8
        assert cfg.p_schedule[0] == 2.0

    @pytest.mark.parametrize("field,value", [("c1", 1.5), ("c1", 0.0), ("shrink", 1.0), ("eps_tol", 0.0)])
    def test_out_of_range(self, field, value):
        with pytest.raises(ValidationError) as exc_info:
            SolverConfig(**{field: value})
        assert field in str(exc_info.value)

    @pytest.mark.parametrize("schedule", [[], [1.5, 10.0], [10.0, 2.0], [2.0, 2.0]])
    def test_bad_schedules(self, schedule):
        with pytest.raises(ValidationError):
            SolverConfig(p_schedule=schedule)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            SolverConfig(tolerance=1e-6)

    def test_frozen(self):
        cfg = SolverConfig()
        with pytest.raises(ValidationError):
            cfg.c1 = 0.3


class TestDescentDirection:
    """Solve of the (1 + lambda)-weighted system"""

    def test_zero_residual_gives_zero_direction(self, disk3):
        spec = ProblemSpec(mesh=disk3, h=0.0, p=10.0)
        w = descent_direction(spec, ScalarField.constant(disk3, 0.0))
        assert not w.values.any()

    def test_p2_single_step_is_exact(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        w = descent_direction(torsion_spec, u0)
        u1 = u0 + w
        assert residual_norm(torsion_spec, residual(torsion_spec, u1)) <= 1e-9
        np.testing.assert_allclose(u1.values, _direct_p2(torsion_spec), atol=1e-8)

    def test_vanishes_on_boundary(self, torsion_spec, bubble_field):
        w = descent_direction(torsion_spec.with_p(10), bubble_field)
        assert not w.values[torsion_spec.mesh.boundary_vertex_flags].any()

    def test_is_descent(self, torsion_spec, bubble_field):
        spec = torsion_spec.with_p(50)
        w = descent_direction(spec, bubble_field)
        assert residual(spec, bubble_field) @ w.values < 0

    def test_newton_variant(self, torsion_spec, bubble_field):
        spec = torsion_spec.with_p(10)
        w = descent_direction(spec, bubble_field, SolverConfig(direction="newton"))
        assert residual(spec, bubble_field) @ w.values < 0

    def test_inner_solver_failure(self, torsion_spec, bubble_field):
        with pytest.raises(LinearSolverError):
            descent_direction(torsion_spec.with_p(10), bubble_field, SolverConfig(cg_maxit=1))


class TestArmijoSearch:
    """Backtracking on J_p"""

    def test_full_step_for_quadratic(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        w = descent_direction(torsion_spec, u0)
        assert armijo_search(torsion_spec, u0, w) == 1.0
        assert armijo_search(torsion_spec, u0, w, SolverConfig(c1=0.4)) == 1.0

    def test_huge_direction_is_shrunk(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        w = descent_direction(torsion_spec, u0).scaled(1e6)
        cfg = SolverConfig()
        alpha = armijo_search(torsion_spec, u0, w, cfg)
        assert 1e-7 < alpha <= 2e-6
        moved = ScalarField(u0.mesh, u0.values + alpha * w.values)
        slope = residual(torsion_spec, u0) @ w.values
        assert energy(torsion_spec, moved).total <= energy(torsion_spec, u0).total + cfg.c1 * alpha * slope

    def test_ascent_direction_rejected(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        w = descent_direction(torsion_spec, u0).scaled(-1.0)
        with pytest.raises(DescentDirectionError):
            armijo_search(torsion_spec, u0, w)

    def test_exhausted_backtracking(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        w = descent_direction(torsion_spec, u0).scaled(1e6)
        with pytest.raises(LineSearchError):
            armijo_search(torsion_spec, u0, w, SolverConfig(max_backtracks=0))

    def test_overflowing_trial_steps_are_shrunk(self, torsion_spec):
        u0 = torsion_spec.boundary_field()
        # |grad w| reaches about 1000 at alpha = 1, far past the overflow guard for p = 500
        w = descent_direction(torsion_spec, u0).scaled(1e3)
        alpha = armijo_search(torsion_spec.with_p(500), u0, w)
        assert 2.0**-11 <= alpha <= 2.0**-10


class TestSolve:
    """One penalized solve"""

    def test_trivial_problem(self, disk3):
        spec = ProblemSpec(mesh=disk3, h=0.0, p=10.0)
        report = solve(spec)
        assert report.converged
        assert report.iterations == 0
        assert not report.u.values.any()

    def test_p2_matches_direct_solve(self, disk_meshes):
        spec = ProblemSpec(mesh=disk_meshes[4], h=4.0)
        report = solve(spec)
        assert report.converged
        assert report.iterations <= 2
        np.testing.assert_allclose(report.u.values, _direct_p2(spec), atol=1e-8)

    def test_energy_decreases(self, torsion_spec):
        warm = solve(torsion_spec).u
        report = solve(torsion_spec.with_p(10), u_init=warm)
        assert report.converged
        assert report.residual_history[-1] <= 1e-8
        assert np.all(np.diff(report.energy_history) <= 0)
        assert all(change < 0 for change in report.decrease_history)
        assert report.energy_history[0] == energy(torsion_spec.with_p(10), warm).total

    def test_energy_history_at_rounding_level(self, disk_meshes):
        # late p=100 steps decrease J by less than its float spacing
        spec = ProblemSpec(mesh=disk_meshes[4], h=4.0)
        report = p_continuation(spec, SolverConfig(p_schedule=[2.0, 10.0, 100.0]))[-1]
        assert report.converged
        energies = np.array(report.energy_history)
        decreases = np.array(report.decrease_history)
        steps = np.diff(energies)

        assert np.all(decreases < 0)
        assert np.all(steps <= 0)
        resolved = np.abs(decreases) > np.spacing(np.abs(energies[:-1]))
        assert np.all(steps[resolved] < 0)
        assert energies[-1] == pytest.approx(energy(spec.with_p(100.0), report.u).total, abs=1e-10)

    def test_history_lengths(self, torsion_spec):
        report = solve(torsion_spec.with_p(10))
        assert len(report.energy_history) == report.iterations + 1
        assert len(report.residual_history) == report.iterations + 1
        assert len(report.step_history) == report.iterations
        assert len(report.cg_iterations) == report.iterations
        assert all(0 < alpha <= 1.0 for alpha in report.step_history)

    def test_max_outer_reached(self, torsion_spec):
        report = solve(torsion_spec.with_p(50), SolverConfig(max_outer=1))
        assert isinstance(report, SolveReport)
        assert not report.converged
        assert report.iterations == 1

    def test_inner_failure_propagates(self, torsion_spec):
        with pytest.raises(LinearSolverError):
            solve(torsion_spec.with_p(10), SolverConfig(cg_maxit=1))

    def test_deterministic(self, torsion_spec):
        first = solve(torsion_spec.with_p(10))
        second = solve(torsion_spec.with_p(10))
        np.testing.assert_array_equal(first.u.values, second.u.values)
        assert first.energy_history == second.energy_history
        assert first.residual_history == second.residual_history

    def test_newton_agrees_with_multiplier_direction(self, torsion_spec):
        warm = solve(torsion_spec).u
        spec = torsion_spec.with_p(50)
        reference = solve(spec, u_init=warm)
        newton = solve(spec, SolverConfig(direction="newton"), u_init=warm)
        assert newton.converged
        assert newton.iterations < reference.iterations
        np.testing.assert_allclose(newton.u.values, reference.u.values, atol=1e-5)

    def test_multiplier_matches_final_iterate(self, torsion_spec):
        report = solve(torsion_spec.with_p(10))
        grads = np.einsum(
            "tkd,tk->td", torsion_spec.mesh.basis_gradients, report.u.values[torsion_spec.mesh.triangles]
        )
        np.testing.assert_allclose(report.multiplier.values, np.sum(grads**2, axis=1) ** 4, rtol=1e-12)


class TestContinuation:
    """p-continuation"""

    def test_single_stage_matches_solve(self, torsion_spec):
        reports = p_continuation(torsion_spec, SolverConfig(p_schedule=[2.0]))
        assert len(reports) == 1
        np.testing.assert_array_equal(reports[0].u.values, solve(torsion_spec).u.values)

    def test_stages_in_order(self, torsion_spec):
        reports = p_continuation(torsion_spec, SolverConfig(p_schedule=[2.0, 10.0, 50.0]))
        assert [r.p for r in reports] == [2.0, 10.0, 50.0]
        assert all(r.converged for r in reports)

    def test_warm_start_helps(self, torsion_spec):
        reports = p_continuation(torsion_spec, SolverConfig(p_schedule=[2.0, 10.0, 50.0]))
        cold = solve(torsion_spec.with_p(50))
        assert cold.converged
        assert reports[-1].iterations < cold.iterations

    def test_schedule_not_starting_at_two_is_seeded(self, torsion_spec):
        reports = p_continuation(torsion_spec, SolverConfig(p_schedule=[10.0]))
        p2 = solve(torsion_spec).u
        assert len(reports) == 1
        assert reports[0].residual_history[0] == pytest.approx(
            solve(torsion_spec.with_p(10), SolverConfig(max_outer=1), u_init=p2).residual_history[0]
        )

    def test_failed_stage_keeps_completed_reports(self, torsion_spec, mocker):
        first = solve(torsion_spec)
        mocker.patch(
            "gradpen.services.solver.solve",
            side_effect=[first, LineSearchError("no sufficient decrease")],
        )
        with pytest.raises(ContinuationError) as exc_info:
            p_continuation(torsion_spec, SolverConfig(p_schedule=[2.0, 10.0]))
        assert exc_info.value.p == 10.0
        assert len(exc_info.value.reports) == 1
        assert exc_info.value.reports[0] is first
        assert isinstance(exc_info.value.__cause__, LineSearchError)
