"""
The gradient-constrained problem and its p-power penalization.

For P1 fields the penalized energy

    J_p(u) = 1/2 int |grad u|^2 + 1/p int (eps^2 + |grad u|^2)^(p/2) - int h u

is evaluated exactly element by element. ``residual`` is its exact gradient with
respect to the free nodal values and ``multiplier_field`` the approximate
multiplier lambda_p = (eps^2 + |grad u|^2)^((p-2)/2).
"""
import logging
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.sparse as sp

from ..exceptions import BoundaryMismatchError, PenaltyOverflowError
from .fem import (
    ElementField,
    ScalarField,
    assemble_element_matrices,
    assemble_element_vectors,
    assemble_load,
    gradient_array,
)
from .mesh import Mesh

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-10
# exponent guards: lambda uses (p-2) ln max(|grad u|, eps), the energy (p/2) ln(eps^2 + |grad u|^2)
MULTIPLIER_LOG_LIMIT = 600.0
ENERGY_LOG_LIMIT = 700.0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Domain and energy data of a penalized problem"""

    mesh: Mesh
    h: float
    g: float = 0.0
    p: float = 2.0
    epsilon: float = 0.0
    w_kind: Literal["quadratic"] = "quadratic"
    phi_kind: Literal["linear_source"] = "linear_source"

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p < 2:
            raise ValueError(f"penalty exponent must satisfy p >= 2, got {self.p!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"regularization must satisfy epsilon >= 0, got {self.epsilon!r}")
        if not (np.isfinite(self.h) and np.isfinite(self.g)):
            raise ValueError("source h and boundary value g must be finite")
        if self.w_kind != "quadratic":
            raise ValueError(f"unsupported W kind {self.w_kind!r}")
        if self.phi_kind != "linear_source":
            raise ValueError(f"unsupported phi kind {self.phi_kind!r}")

    def with_p(self, p: float) -> "ProblemSpec":
        return replace(self, p=float(p))

    @property
    def load(self) -> np.ndarray:
        return assemble_load(self.mesh, self.h)

    def boundary_field(self) -> ScalarField:
        """The constant g, the natural starting point of every solve"""
        return ScalarField.constant(self.mesh, self.g)


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet_part: float
    penalty_part: float
    source_part: float
    total: float


def check_boundary(spec: ProblemSpec, u: ScalarField) -> None:
    boundary = u.values[spec.mesh.boundary_vertex_flags]
    if boundary.size == 0:
        return
    mismatch = float(np.abs(boundary - spec.g).max())
    if mismatch > BOUNDARY_TOLERANCE:
        raise BoundaryMismatchError(
            f"field differs from the boundary value g={spec.g:g} by {mismatch:.3e}"
        )


def _squared_gradients(spec: ProblemSpec, values: np.ndarray) -> np.ndarray:
    grads = gradient_array(spec.mesh, values)
    return np.einsum("td,td->t", grads, grads)


def _guard_energy(spec: ProblemSpec, base: np.ndarray) -> None:
    """Raise if (eps^2 + s)^(p/2) would overflow on some element"""
    if spec.p == 2 or base.size == 0:
        return
    with np.errstate(divide="ignore"):
        exponent = 0.5 * spec.p * np.log(base)
    worst = int(np.argmax(exponent))
    if exponent[worst] > ENERGY_LOG_LIMIT:
        grad_norm = float(np.sqrt(max(base[worst] - spec.epsilon**2, 0.0)))
        raise PenaltyOverflowError(worst, grad_norm, spec.p)


def _power(base: np.ndarray, exponent: float) -> np.ndarray:
    """base**exponent with 0**0 = 1"""
    if exponent == 0:
        return np.ones_like(base)
    return np.power(base, exponent)


def energy(spec: ProblemSpec, u: ScalarField) -> EnergyBreakdown:
    """Exact value of J_p(u) split into its three parts"""
    check_boundary(spec, u)
    mesh = spec.mesh
    s = _squared_gradients(spec, u.values)
    base = spec.epsilon**2 + s
    _guard_energy(spec, base)
    areas = mesh.signed_areas
    dirichlet = 0.5 * float(np.sum(areas * s))
    penalty = float(np.sum(areas * _power(base, 0.5 * spec.p))) / spec.p
    source = -float(spec.load @ u.values)
    return EnergyBreakdown(dirichlet, penalty, source, dirichlet + penalty + source)


def energy_change(spec: ProblemSpec, u: ScalarField, w: ScalarField, alpha: float) -> float:
    """J_p(u + alpha w) - J_p(u) without forming the two totals

    ``w`` must vanish on the boundary. The penalty difference is evaluated as
    a^q - b^q = b^q expm1(q log1p((a - b) / b)) per element.
    """
    mesh = spec.mesh
    if np.abs(w.values[mesh.boundary_vertex_flags]).max(initial=0.0) > BOUNDARY_TOLERANCE:
        raise BoundaryMismatchError("search direction must vanish on the boundary")
    g0 = gradient_array(mesh, u.values)
    gw = gradient_array(mesh, w.values)
    s0 = np.einsum("td,td->t", g0, g0)
    ds = 2.0 * alpha * np.einsum("td,td->t", g0, gw) + alpha**2 * np.einsum("td,td->t", gw, gw)
    base0 = spec.epsilon**2 + s0
    base1 = np.maximum(base0 + ds, 0.0)
    _guard_energy(spec, base1)

    areas = mesh.signed_areas
    q = 0.5 * spec.p
    with np.errstate(divide="ignore", invalid="ignore"):
        positive = base0 > 0
        ratio = np.where(positive, ds / np.where(positive, base0, 1.0), 0.0)
        growth = np.where(
            positive,
            _power(base0, q) * np.expm1(q * np.log1p(np.maximum(ratio, -1.0))),
            _power(base1, q),
        )
    dirichlet = 0.5 * float(np.sum(areas * ds))
    penalty = float(np.sum(areas * growth)) / spec.p
    source = -alpha * float(spec.load @ w.values)
    return dirichlet + penalty + source


def _multiplier_values(spec: ProblemSpec, s: np.ndarray) -> np.ndarray:
    if spec.p == 2:
        return np.ones_like(s)
    magnitude = np.maximum(np.sqrt(s), spec.epsilon)
    with np.errstate(divide="ignore"):
        exponent = (spec.p - 2.0) * np.log(magnitude)
    if exponent.size:
        worst = int(np.argmax(exponent))
        if exponent[worst] > MULTIPLIER_LOG_LIMIT:
            raise PenaltyOverflowError(worst, float(np.sqrt(s[worst])), spec.p)
    return _power(spec.epsilon**2 + s, 0.5 * (spec.p - 2.0))


def multiplier_field(spec: ProblemSpec, u: ScalarField) -> ElementField:
    """lambda_T = (eps^2 + |grad u|_T^2)^((p-2)/2)"""
    s = _squared_gradients(spec, u.values)
    return ElementField(spec.mesh, _multiplier_values(spec, s))


def flux_field(spec: ProblemSpec, u: ScalarField) -> ElementField:
    """A_T = lambda_T grad u_T"""
    grads = gradient_array(spec.mesh, u.values)
    lam = _multiplier_values(spec, np.einsum("td,td->t", grads, grads))
    return ElementField(spec.mesh, lam[:, None] * grads)


def residual(spec: ProblemSpec, u: ScalarField) -> np.ndarray:
    """Gradient of J_p with respect to the nodal values, zero on Dirichlet vertices"""
    check_boundary(spec, u)
    mesh = spec.mesh
    grads = gradient_array(mesh, u.values)
    lam = _multiplier_values(spec, np.einsum("td,td->t", grads, grads))
    coefficient = (1.0 + lam) * mesh.signed_areas
    local = coefficient[:, None] * np.einsum("tkd,td->tk", mesh.basis_gradients, grads)
    r = assemble_element_vectors(mesh, local) - spec.load
    r[mesh.boundary_vertex_flags] = 0.0
    return r


def hessian(spec: ProblemSpec, u: ScalarField) -> sp.csr_matrix:
    """Second variation of J_p on P1 fields (boundary rows not eliminated)"""
    mesh = spec.mesh
    G = mesh.basis_gradients
    grads = gradient_array(mesh, u.values)
    s = np.einsum("td,td->t", grads, grads)
    lam = _multiplier_values(spec, s)
    areas = mesh.signed_areas
    local = np.einsum("t,tid,tjd->tij", (1.0 + lam) * areas, G, G)
    if spec.p != 2:
        base = spec.epsilon**2 + s
        with np.errstate(divide="ignore", invalid="ignore"):
            curvature = np.where(base > 0, (spec.p - 2.0) * _power(base, 0.5 * (spec.p - 4.0)), 0.0)
        projected = np.einsum("tkd,td->tk", G, grads)
        local += np.einsum("t,ti,tj->tij", curvature * areas, projected, projected)
    return assemble_element_matrices(mesh, local)
