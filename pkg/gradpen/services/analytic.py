"""
Closed-form solutions on the unit disk and construction of error-table rows.

All point functions accept a single point ``(x, y)`` (returning a float) or an
(N, 2) array of points (returning an array).
"""
from typing import Union

import numpy as np

from ..exceptions import OutsideDomainError
from ..models import ErrorRow
from .fem import error_vs_function
from .problem import ProblemSpec

DISK_TOLERANCE = 1e-12
TORSION_SOURCE = 4.0

Points = Union[np.ndarray, tuple, list]


def _radii(x: Points):
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    r = np.linalg.norm(points, axis=1)
    outside = np.flatnonzero(r > 1.0 + DISK_TOLERANCE)
    if outside.size:
        raise OutsideDomainError(f"point {points[outside[0]].tolist()} lies outside the unit disk")
    return points, r, single


def _result(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def exact_disk_u(x: Points):
    """Constrained torsion solution for h = 4: 1 - r outside r = 1/2, 3/4 - r^2 inside"""
    _, r, single = _radii(x)
    return _result(np.where(r >= 0.5, 1.0 - r, 0.75 - r**2), single)


def exact_disk_grad(x: Points):
    points, r, single = _radii(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        outer = -points / np.where(r > 0, r, 1.0)[:, None]
    grad = np.where((r >= 0.5)[:, None], outer, -2.0 * points)
    return grad[0] if single else grad


def exact_disk_lambda(x: Points):
    """Multiplier of the h = 4 torsion problem: 2r - 1 outside r = 1/2, else 0"""
    _, r, single = _radii(x)
    return _result(np.where(r >= 0.5, 2.0 * r - 1.0, 0.0), single)


def exact_disk_p2(h: float, x: Points):
    """Solution of -2 Laplace(u) = h, u = 0 on the circle: (h/8)(1 - r^2)"""
    _, r, single = _radii(x)
    return _result(h / 8.0 * (1.0 - r**2), single)


def exact_disk_p2_grad(h: float, x: Points):
    points, _, single = _radii(x)
    grad = -h / 4.0 * points
    return grad[0] if single else grad


def _check_inactive(h: float) -> None:
    if not 0 < h <= 2:
        raise ValueError(f"the gradient constraint is inactive only for 0 < h <= 2, got h={h!r}")


def exact_disk_unconstrained(h: float, x: Points):
    """Solution of -Laplace(u) = h, the constrained minimizer while h/2 <= 1"""
    _check_inactive(h)
    _, r, single = _radii(x)
    return _result(h / 4.0 * (1.0 - r**2), single)


def exact_disk_unconstrained_grad(h: float, x: Points):
    _check_inactive(h)
    points, _, single = _radii(x)
    grad = -h / 2.0 * points
    return grad[0] if single else grad


def error_row(spec: ProblemSpec, report) -> ErrorRow:
    """Primal and dual errors of a disk solve against the explicit torsion pair"""
    mesh = spec.mesh
    if mesh.domain_tag != "disk":
        raise ValueError(f"error rows need the unit disk, got domain {mesh.domain_tag!r}")
    if spec.h != TORSION_SOURCE:
        raise ValueError(f"error rows need h = {TORSION_SOURCE:g}, got h={spec.h:g}")
    primal = error_vs_function(report.u, exact_disk_u, exact_disk_grad)
    dual_gap = np.abs(report.multiplier.values - exact_disk_lambda(mesh.centroids))
    return ErrorRow(
        p=report.p,
        cells=mesh.num_triangles,
        dofs=mesh.num_vertices,
        l2=primal.l2,
        h1=primal.h1,
        w1_inf=primal.w1_inf,
        dual_l1=float(np.sum(mesh.signed_areas * dual_gap)),
        dual_linf=float(dual_gap.max(initial=0.0)),
    )
