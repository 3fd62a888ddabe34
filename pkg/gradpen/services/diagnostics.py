"""
Empirical checks of the limit behaviour as p grows: feasibility of the gradient,
complementarity, convergence of flux pairings, alignment of the flux and the
auxiliary field Psi. Every function here is pure.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..exceptions import PenaltyOverflowError
from ..models import DiagnosticRow
from .fem import ElementField, ScalarField, gradient_array
from .mesh import Mesh
from .problem import ENERGY_LOG_LIMIT, ProblemSpec, flux_field

logger = logging.getLogger(__name__)


class Feasibility(NamedTuple):
    max_grad: float
    excess_area: float


class Complementarity(NamedTuple):
    l1_residual: float
    sup_residual: float


def _grad_norms(u: ScalarField) -> np.ndarray:
    return np.linalg.norm(gradient_array(u.mesh, u.values), axis=1)


def feasibility(u: ScalarField) -> Feasibility:
    """Largest element gradient and the area where |grad u| > 1"""
    norms = _grad_norms(u)
    excess = float(np.sum(u.mesh.signed_areas[norms > 1.0]))
    return Feasibility(float(norms.max(initial=0.0)), excess)


def complementarity(u: ScalarField, multiplier: ElementField) -> Complementarity:
    """Size of lambda (1 - |grad u|)_+ in L1 and sup"""
    if multiplier.mesh.num_triangles != u.mesh.num_triangles:
        raise ValueError("multiplier and field live on different meshes")
    gap = multiplier.values * np.maximum(1.0 - _grad_norms(u), 0.0)
    return Complementarity(
        float(np.sum(u.mesh.signed_areas * gap)),
        float(gap.max(initial=0.0)),
    )


def flux_pairing(spec: ProblemSpec, u: ScalarField, test_fields: Sequence[ScalarField]) -> np.ndarray:
    """int lambda_p grad u_p . grad v for every test field v"""
    mesh = spec.mesh
    flux = flux_field(spec, u).values
    pairings = []
    for v in test_fields:
        if np.abs(v.values[mesh.boundary_vertex_flags]).max(initial=0.0) > 1e-12:
            raise ValueError("test fields must vanish on the boundary")
        grad_v = gradient_array(mesh, v.values)
        pairings.append(float(np.sum(mesh.signed_areas * np.einsum("td,td->t", flux, grad_v))))
    return np.array(pairings)


def random_test_fields(mesh: Mesh, count: int, seed: Optional[int] = None) -> List[ScalarField]:
    """Smooth fields vanishing on the boundary

    Each is a bubble (zero on every boundary vertex) times a random quadratic.
    The bubble is 1 - |x|^2 on the disk and the distance-like product of the
    boundary coordinates on the polygonal domains, forced to zero at flagged
    vertices in any case.
    """
    rng = np.random.default_rng(seed)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    if mesh.domain_tag == "disk":
        bubble = 1.0 - x**2 - y**2
    else:
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        bubble = (x - lo[0]) * (hi[0] - x) * (y - lo[1]) * (hi[1] - y)
    bubble = np.where(mesh.boundary_vertex_flags, 0.0, bubble)
    fields = []
    for _ in range(count):
        c = rng.normal(size=6)
        poly = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
        fields.append(ScalarField(mesh, bubble * poly))
    return fields


def representation_defect(
    u_ref: ScalarField, flux: ElementField, tolerance: Optional[float] = None
) -> float:
    """sum_T area_T (|A_T| - A_T . grad u_ref)_+

    ``u_ref`` must satisfy |grad u_ref| <= 1 + tolerance on every element. The
    default tolerance is twice the mesh size, since the P1 interpolant of a
    feasible function overshoots the bound by O(h) on curved boundaries.
    """
    if tolerance is None:
        tolerance = 2.0 * u_ref.mesh.max_edge_length
    grads = gradient_array(u_ref.mesh, u_ref.values)
    norms = np.linalg.norm(grads, axis=1)
    if norms.max(initial=0.0) > 1.0 + tolerance:
        raise ValueError(f"reference field is not feasible: max |grad u| = {norms.max():.6g}")
    A = flux.values
    gap = np.linalg.norm(A, axis=1) - np.einsum("td,td->t", A, grads)
    return float(np.sum(u_ref.mesh.signed_areas * np.maximum(gap, 0.0)))


def psi_field(spec: ProblemSpec, u: ScalarField, alpha: float) -> ElementField:
    """Psi = |grad u|^2 / 2 + 2 (p-1)/p |grad u|^p + alpha phi(u), phi(u) = -h u

    The centroid value of u is used for phi. Reported for inspection only.
    """
    mesh = spec.mesh
    norms = _grad_norms(u)
    if spec.p != 2 and norms.size:
        with np.errstate(divide="ignore"):
            exponent = spec.p * np.log(norms)
        worst = int(np.argmax(exponent))
        if exponent[worst] > ENERGY_LOG_LIMIT:
            raise PenaltyOverflowError(worst, float(norms[worst]), spec.p)
    centroid_u = u.values[mesh.triangles].mean(axis=1)
    values = 0.5 * norms**2 + 2.0 * (spec.p - 1.0) / spec.p * norms**spec.p - alpha * spec.h * centroid_u
    return ElementField(mesh, values)


def multiplier_growth(coarse: ElementField, fine: ElementField) -> float:
    """Ratio of the multiplier maxima after refinement; large values flag a corner blow-up"""
    coarse_max = float(coarse.values.max(initial=0.0))
    fine_max = float(fine.values.max(initial=0.0))
    if coarse_max == 0.0:
        return float("inf") if fine_max > 0.0 else 1.0
    return fine_max / coarse_max


def schedule_summary(reports: Sequence) -> List[DiagnosticRow]:
    """One diagnostic row per continuation stage"""
    rows = []
    for report in reports:
        feasible = feasibility(report.u)
        comp = complementarity(report.u, report.multiplier)
        rows.append(
            DiagnosticRow(
                p=report.p,
                max_grad=feasible.max_grad,
                excess_area=feasible.excess_area,
                l1_residual=comp.l1_residual,
                sup_residual=comp.sup_residual,
                max_lambda=float(report.multiplier.values.max(initial=0.0)),
            )
        )
        logger.debug("diagnostics p=%g: %s", report.p, rows[-1])
    return rows
