"""
Conforming triangulations of the test domains.

A :class:`Mesh` is immutable: every array is flagged read-only, so one mesh can
be shared between solves. Geometric quantities the assembly needs over and over
(signed areas, P1 basis gradients, centroids) are cached on first use.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np

from ..exceptions import MeshError
from ..models import ValidationReport

logger = logging.getLogger(__name__)

DOMAIN_TAGS = ("disk", "rectangle", "lshape", "custom")
DISK_TOLERANCE = 1e-12


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangulation with boundary markers"""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_edges: np.ndarray
    domain_tag: str = "custom"
    recipe: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain_tag not in DOMAIN_TAGS:
            raise MeshError(f"unknown domain tag {self.domain_tag!r}")
        object.__setattr__(self, "vertices", _frozen(self.vertices, float).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        object.__setattr__(
            self, "boundary_vertex_flags", _frozen(self.boundary_vertex_flags, bool).reshape(-1)
        )
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "recipe", dict(self.recipe))
        if self.boundary_vertex_flags.shape[0] != self.vertices.shape[0]:
            raise MeshError("one boundary flag per vertex is required")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_vertex_flags)

    @property
    def free_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex_flags)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three local hat functions, shape (T, 3, 2)"""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_area = 2.0 * self.signed_areas
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
            gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
            grads = np.stack([gx, gy], axis=2) / two_area[:, None, None]
        return grads

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted, shape (E, 2)"""
        return _unique_edges(self.triangles)[0]

    @cached_property
    def max_edge_length(self) -> float:
        """Mesh size h: the longest edge"""
        if not len(self.edges):
            return 0.0
        vectors = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.linalg.norm(vectors, axis=1).max())

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    def describe(self) -> str:
        return f"cells={self.num_triangles} dofs={self.num_vertices}"


def _all_edges(triangles: np.ndarray) -> np.ndarray:
    return np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])


def _unique_edges(triangles: np.ndarray):
    """Sorted unique edges, the edge id of each directed local edge and use counts"""
    directed = _all_edges(triangles)
    undirected = np.sort(directed, axis=1)
    unique, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    return unique, inverse.reshape(-1), counts


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Directed edges used by a single triangle, in the triangle's orientation"""
    directed = _all_edges(triangles)
    _, inverse, counts = _unique_edges(triangles)
    return directed[counts[inverse] == 1]


def _flags_from_edges(num_vertices: int, boundary_edges: np.ndarray) -> np.ndarray:
    flags = np.zeros(num_vertices, dtype=bool)
    flags[boundary_edges.ravel()] = True
    return flags


def _build(vertices, triangles, domain_tag: str, recipe: Dict) -> Mesh:
    triangles = np.asarray(triangles, dtype=np.int64)
    boundary = _boundary_edges(triangles)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertex_flags=_flags_from_edges(len(vertices), boundary),
        boundary_edges=boundary,
        domain_tag=domain_tag,
        recipe=recipe,
    )


def _refined(mesh: Mesh, times: int) -> Mesh:
    for _ in range(times):
        mesh = refine(mesh)
    return mesh


def _check_refinements(refinements: int) -> int:
    if int(refinements) != refinements or refinements < 0:
        raise MeshError(f"refinements must be a nonnegative integer, got {refinements!r}")
    return int(refinements)


def generate_rectangle(width: float, height: float, refinements: int = 0) -> Mesh:
    """Structured triangulation of [0, width] x [0, height]"""
    if not (width > 0 and height > 0):
        raise MeshError(f"rectangle dimensions must be positive, got {width!r} x {height!r}")
    refinements = _check_refinements(refinements)
    vertices = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height)]
    coarse = _build(
        vertices,
        [[0, 1, 2], [0, 2, 3]],
        "rectangle",
        {"domain": "rectangle", "width": float(width), "height": float(height), "refinements": 0},
    )
    return _refined(coarse, refinements)


def generate_disk(refinements: int = 0) -> Mesh:
    """Unit disk: hexagonal fan refined with radial snapping of the boundary"""
    refinements = _check_refinements(refinements)
    angles = np.arange(6) * np.pi / 3.0
    vertices = np.vstack([[0.0, 0.0], np.column_stack([np.cos(angles), np.sin(angles)])])
    triangles = [[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)]
    coarse = _build(vertices, triangles, "disk", {"domain": "disk", "refinements": 0})
    return _refined(coarse, refinements)


def generate_lshape(refinements: int = 0) -> Mesh:
    """[-1, 1]^2 without [0, 1] x [-1, 0]; reentrant corner at the origin"""
    refinements = _check_refinements(refinements)
    vertices = [
        (-1.0, -1.0), (0.0, -1.0),
        (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0),
        (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0),
    ]
    triangles = [
        [0, 1, 3], [0, 3, 2],
        [2, 3, 6], [2, 6, 5],
        [3, 4, 7], [3, 7, 6],
    ]
    coarse = _build(vertices, triangles, "lshape", {"domain": "lshape", "refinements": 0})
    return _refined(coarse, refinements)


def generate(domain: str, refinements: int = 0, width: float = 2.0, height: float = 1.0) -> Mesh:
    """Dispatch on the domain tag"""
    if domain == "disk":
        return generate_disk(refinements)
    if domain == "rectangle":
        return generate_rectangle(width, height, refinements)
    if domain == "lshape":
        return generate_lshape(refinements)
    raise MeshError(f"unknown domain {domain!r}; expected disk, rectangle or lshape")


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement: every triangle is split into four through its edge midpoints"""
    unique, inverse, _ = _unique_edges(mesh.triangles)
    num_t = mesh.num_triangles
    n0 = mesh.num_vertices
    midpoint_ids = n0 + inverse.reshape(3, num_t).T  # columns: m01, m12, m20

    midpoints = 0.5 * (mesh.vertices[unique[:, 0]] + mesh.vertices[unique[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    a, b, c = mesh.triangles.T
    mab, mbc, mca = midpoint_ids.T
    triangles = np.concatenate(
        [
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, c]),
            np.column_stack([mab, mbc, mca]),
        ]
    )

    # split the stored boundary edges through their midpoints
    keys = unique[:, 0] * n0 + unique[:, 1]
    be = mesh.boundary_edges
    be_sorted = np.sort(be, axis=1)
    be_mid = n0 + np.searchsorted(keys, be_sorted[:, 0] * n0 + be_sorted[:, 1])
    boundary_edges = np.concatenate(
        [np.column_stack([be[:, 0], be_mid]), np.column_stack([be_mid, be[:, 1]])]
    )

    flags = np.concatenate([mesh.boundary_vertex_flags, np.zeros(len(unique), dtype=bool)])
    flags[be_mid] = True

    if mesh.domain_tag == "disk":
        new_boundary = be_mid
        radii = np.linalg.norm(vertices[new_boundary], axis=1)
        vertices[new_boundary] /= radii[:, None]

    recipe = dict(mesh.recipe)
    if "refinements" in recipe:
        recipe["refinements"] = int(recipe["refinements"]) + 1

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertex_flags=flags,
        boundary_edges=boundary_edges,
        domain_tag=mesh.domain_tag,
        recipe=recipe,
    )


def _min_angles(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    angles = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cosine = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        angles.append(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))))
    return np.min(np.stack(angles, axis=1), axis=1)


def validate(mesh: Mesh) -> ValidationReport:
    """Collect every invariant violation of ``mesh``; never raises"""
    violations: List[str] = []
    nv, nt = mesh.num_vertices, mesh.num_triangles

    if nt and (mesh.triangles.min() < 0 or mesh.triangles.max() >= nv):
        violations.append("triangle vertex index out of range")
        return ValidationReport(violations=violations, vertices=nv, triangles=nt)

    areas = mesh.signed_areas
    for element in np.flatnonzero(areas <= 0):
        violations.append(f"triangle {int(element)} has non-positive signed area {areas[element]:.3e}")

    unique, _, counts = _unique_edges(mesh.triangles)
    for edge in unique[counts > 2]:
        violations.append(f"edge {tuple(int(i) for i in edge)} shared by more than two triangles")

    single = {tuple(e) for e in unique[counts == 1].tolist()}
    stored = {tuple(e) for e in np.sort(mesh.boundary_edges, axis=1).tolist()}
    if single != stored:
        missing = len(single - stored)
        extra = len(stored - single)
        violations.append(
            f"boundary edges mismatch: {missing} single-use edge(s) not stored, "
            f"{extra} stored edge(s) not single-use"
        )

    unflagged = np.setdiff1d(np.unique(mesh.boundary_edges), mesh.boundary_vertices)
    if unflagged.size:
        violations.append(f"{unflagged.size} boundary-edge vertex(es) not flagged as boundary")

    num_edges = len(unique)
    euler = nv - num_edges + nt
    if mesh.domain_tag in ("disk", "rectangle", "lshape") and euler != 1:
        violations.append(f"Euler characteristic V-E+T={euler}, expected 1")

    if mesh.domain_tag == "disk":
        radii = np.linalg.norm(mesh.vertices[mesh.boundary_vertices], axis=1)
        off = np.abs(radii - 1.0) > DISK_TOLERANCE
        if off.any():
            violations.append(f"{int(off.sum())} boundary vertex(es) off the unit circle")

    min_angle: Optional[float] = float(_min_angles(mesh).min()) if nt else None
    return ValidationReport(
        violations=violations,
        vertices=nv,
        triangles=nt,
        edges=num_edges,
        boundary_edges=len(mesh.boundary_edges),
        euler_characteristic=euler,
        min_area=float(areas.min()) if nt else None,
        max_area=float(areas.max()) if nt else None,
        min_angle=min_angle,
        total_area=float(areas.sum()),
    )
