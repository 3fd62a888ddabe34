"""
P1 finite element machinery on a :class:`~gradpen.services.mesh.Mesh`.

Gradients of P1 functions are constant per triangle, so stiffness, penalty and
load integrals (constant source) are computed exactly. Errors against smooth
functions use a 6-point rule exact for quartics.
"""
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..exceptions import DegenerateElementError
from .linalg import as_csr
from .mesh import Mesh

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]

# symmetric 6-point rule on the reference triangle, degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
QUAD6_BARYCENTRIC = np.array(
    [
        [_A1, _A1, 1.0 - 2.0 * _A1],
        [_A1, 1.0 - 2.0 * _A1, _A1],
        [1.0 - 2.0 * _A1, _A1, _A1],
        [_A2, _A2, 1.0 - 2.0 * _A2],
        [_A2, 1.0 - 2.0 * _A2, _A2],
        [1.0 - 2.0 * _A2, _A2, _A2],
    ]
)
QUAD6_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a P1 function"""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if values.shape[0] != self.mesh.num_vertices:
            raise ValueError(
                f"scalar field has {values.shape[0]} values for {self.mesh.num_vertices} vertices"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> "ScalarField":
        return cls(mesh, np.full(mesh.num_vertices, float(value)))

    @classmethod
    def interpolate(cls, mesh: Mesh, func: PointFunction) -> "ScalarField":
        return cls(mesh, func(mesh.vertices))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.mesh, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.mesh, self.values - other.values)

    def scaled(self, factor: float) -> "ScalarField":
        return ScalarField(self.mesh, factor * self.values)


@dataclass(frozen=True, eq=False)
class ElementField:
    """One scalar or one 2-vector per triangle"""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape[0] != self.mesh.num_triangles or values.ndim not in (1, 2):
            raise ValueError(
                f"element field of shape {values.shape} for {self.mesh.num_triangles} triangles"
            )
        if values.ndim == 2 and values.shape[1] != 2:
            raise ValueError("vector element fields must have two components")
        if not np.all(np.isfinite(values)):
            raise ValueError("element field has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def norms(self) -> np.ndarray:
        """Pointwise magnitude per triangle"""
        if self.values.ndim == 1:
            return np.abs(self.values)
        return np.linalg.norm(self.values, axis=1)


class FieldNorms(NamedTuple):
    l2: float
    h1_semi: float
    w1_inf: float


class ErrorNorms(NamedTuple):
    l2: float
    h1_semi: float
    h1: float
    w1_inf: float


def _check_orientation(mesh: Mesh) -> None:
    areas = mesh.signed_areas
    bad = np.flatnonzero(areas <= 0)
    if bad.size:
        raise DegenerateElementError(int(bad[0]), float(areas[bad[0]]))


def gradient_array(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Element gradients of raw nodal values, shape (T, 2)"""
    return np.einsum("tkd,tk->td", mesh.basis_gradients, np.asarray(values, dtype=float)[mesh.triangles])


def element_gradients(u: ScalarField) -> ElementField:
    """Constant gradient of the P1 interpolant on each triangle"""
    _check_orientation(u.mesh)
    return ElementField(u.mesh, gradient_array(u.mesh, u.values))


def _element_weights(mesh: Mesh, weight: Union[float, np.ndarray, ElementField]) -> np.ndarray:
    if isinstance(weight, ElementField):
        weight = weight.values
    return np.broadcast_to(np.asarray(weight, dtype=float), (mesh.num_triangles,))


def assemble_element_matrices(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter local 3x3 matrices of shape (T, 3, 3) into a global CSR matrix"""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.num_vertices
    return as_csr(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def assemble_weighted_stiffness(mesh: Mesh, weight: Union[float, np.ndarray, ElementField]) -> sp.csr_matrix:
    """K_ij = sum_T weight_T area_T grad(phi_i) . grad(phi_j)"""
    _check_orientation(mesh)
    w = _element_weights(mesh, weight)
    negative = np.flatnonzero(w < 0)
    if negative.size:
        raise ValueError(f"negative stiffness weight {w[negative[0]]:.3e} on triangle {int(negative[0])}")
    G = mesh.basis_gradients
    local = np.einsum("t,tid,tjd->tij", w * mesh.signed_areas, G, G)
    return assemble_element_matrices(mesh, local)


def assemble_load(mesh: Mesh, h: Union[float, np.ndarray]) -> np.ndarray:
    """b_i = sum over triangles T containing i of h_T area_T / 3"""
    h_t = _element_weights(mesh, h)
    contrib = np.repeat(h_t * mesh.signed_areas / 3.0, 3)
    return np.bincount(mesh.triangles.ravel(), weights=contrib, minlength=mesh.num_vertices)


def assemble_element_vectors(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    """Scatter local vectors of shape (T, 3)"""
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.num_vertices)


def apply_dirichlet(
    K: sp.csr_matrix, b: np.ndarray, mesh: Mesh, value: float
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Symmetric elimination of the flagged boundary vertices

    Boundary rows and columns are cleared, the diagonal set to one and the right-hand
    side shifted, so the solution takes ``value`` on the boundary.
    """
    if not np.isfinite(value):
        raise ValueError("Dirichlet value must be finite")
    boundary = mesh.boundary_vertex_flags
    free = (~boundary).astype(float)
    lifted = np.where(boundary, float(value), 0.0)
    rhs = np.asarray(b, dtype=float) - K @ lifted
    rhs[boundary] = value
    D_free = sp.diags(free)
    K_free = D_free @ K @ D_free + sp.diags(boundary.astype(float))
    K_free = as_csr(K_free)
    K_free.eliminate_zeros()
    return K_free, rhs


def norms(u: ScalarField) -> FieldNorms:
    """L2 (edge midpoint rule, exact for P1 squared), H1 seminorm and W1,inf seminorm"""
    mesh = u.mesh
    vals = u.values[mesh.triangles]
    midpoints = 0.5 * (vals + np.roll(vals, -1, axis=1))
    l2_sq = float(np.sum(mesh.signed_areas / 3.0 * np.sum(midpoints**2, axis=1)))
    grad_norms = element_gradients(u).norms()
    h1_sq = float(np.sum(mesh.signed_areas * grad_norms**2))
    return FieldNorms(
        l2=float(np.sqrt(l2_sq)),
        h1_semi=float(np.sqrt(h1_sq)),
        w1_inf=float(grad_norms.max(initial=0.0)),
    )


def quadrature_points(mesh: Mesh) -> np.ndarray:
    """Physical 6-point quadrature nodes, shape (T, 6, 2)"""
    return np.einsum("qk,tkd->tqd", QUAD6_BARYCENTRIC, mesh.vertices[mesh.triangles])


def error_vs_function(u: ScalarField, f_exact: PointFunction, grad_exact: PointFunction) -> ErrorNorms:
    """Errors of ``u`` against a smooth function and its gradient

    ``f_exact`` maps an (N, 2) array of points to N values, ``grad_exact`` to (N, 2)
    gradients. The W1,inf error is taken at centroids.
    """
    mesh = u.mesh
    nt = mesh.num_triangles
    points = quadrature_points(mesh).reshape(-1, 2)
    u_h = np.einsum("qk,tk->tq", QUAD6_BARYCENTRIC, u.values[mesh.triangles])
    exact = np.asarray(f_exact(points), dtype=float).reshape(nt, 6)
    grad_h = gradient_array(mesh, u.values)
    grad_ex = np.asarray(grad_exact(points), dtype=float).reshape(nt, 6, 2)

    weights = mesh.signed_areas[:, None] * QUAD6_WEIGHTS[None, :]
    l2_sq = float(np.sum(weights * (u_h - exact) ** 2))
    h1_sq = float(np.sum(weights * np.sum((grad_h[:, None, :] - grad_ex) ** 2, axis=2)))
    grad_c = np.asarray(grad_exact(mesh.centroids), dtype=float).reshape(nt, 2)
    w1_inf = float(np.linalg.norm(grad_h - grad_c, axis=1).max(initial=0.0))
    return ErrorNorms(
        l2=float(np.sqrt(l2_sq)),
        h1_semi=float(np.sqrt(h1_sq)),
        h1=float(np.sqrt(l2_sq + h1_sq)),
        w1_inf=w1_inf,
    )
