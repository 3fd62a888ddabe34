"""
Tests for mesh generation, refinement and validation
"""
import numpy as np
import pytest

from gradpen.exceptions import MeshError
from gradpen.services.mesh import (
    Mesh,
    generate,
    generate_disk,
    generate_lshape,
    generate_rectangle,
    refine,
    validate,
)


def _with(mesh: Mesh, **changes) -> Mesh:
    data = {
        "vertices": mesh.vertices,
        "triangles": mesh.triangles,
        "boundary_vertex_flags": mesh.boundary_vertex_flags,
        "boundary_edges": mesh.boundary_edges,
        "domain_tag": mesh.domain_tag,
    }
    data.update(changes)
    return Mesh(**data)


class TestRectangle:
    """Structured rectangle meshes"""

    def test_unit_square_counts(self, unit_square):
        assert unit_square.num_triangles == 2
        assert unit_square.num_vertices == 4
        assert unit_square.boundary_vertex_flags.all()

    def test_one_refinement(self, refined_square):
        assert refined_square.num_triangles == 8
        assert refined_square.num_vertices == 9
        # only the centre is interior
        centre = int(np.argmin(np.linalg.norm(refined_square.vertices - 0.5, axis=1)))
        assert refined_square.free_vertices.tolist() == [centre]

    def test_default_rectangle_area(self):
        for k in range(4):
            assert generate_rectangle(2.0, 1.0, k).area == pytest.approx(2.0, abs=1e-12)

    def test_non_positive_dimensions(self):
        with pytest.raises(MeshError):
            generate_rectangle(0.0, 1.0)
        with pytest.raises(MeshError):
            generate_rectangle(1.0, -2.0)

    def test_negative_refinements(self):
        with pytest.raises(MeshError):
            generate_rectangle(1.0, 1.0, -1)

    def test_unit_square_min_angle(self, unit_square):
        assert validate(unit_square).min_angle == pytest.approx(45.0)


class TestDisk:
    """Hexagonal fan of the unit disk"""

    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_triangle_count(self, disk_meshes, level):
        assert disk_meshes[level].num_triangles == 6 * 4**level

    def test_level_zero(self, disk_meshes):
        mesh = disk_meshes[0]
        assert mesh.num_vertices == 7
        assert mesh.free_vertices.tolist() == [0]

    def test_level_one(self, disk_meshes):
        mesh = disk_meshes[1]
        assert mesh.num_triangles == 24
        assert len(mesh.boundary_vertices) == 12

    @pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
    def test_boundary_on_circle(self, disk_meshes, level):
        mesh = disk_meshes[level]
        radii = np.linalg.norm(mesh.vertices[mesh.boundary_vertices], axis=1)
        np.testing.assert_allclose(radii, 1.0, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
    def test_area_is_inscribed_polygon(self, disk_meshes, level):
        n = 6 * 2**level
        assert disk_meshes[level].area == pytest.approx(0.5 * n * np.sin(2 * np.pi / n), abs=1e-12)

    def test_area_approaches_pi(self, disk_meshes):
        gaps = [np.pi - disk_meshes[k].area for k in range(5)]
        assert all(g > 0 for g in gaps)
        ratios = [gaps[k] / gaps[k + 1] for k in range(4)]
        assert all(3.5 < ratio < 4.5 for ratio in ratios)


class TestLShape:
    """L-shaped domain with a reentrant corner"""

    def test_level_zero(self):
        mesh = generate_lshape(0)
        assert mesh.num_triangles == 6
        assert mesh.num_vertices == 8
        assert validate(mesh).euler_characteristic == 1

    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_reentrant_corner_is_boundary(self, level):
        mesh = generate_lshape(level)
        corner = np.flatnonzero(np.all(mesh.vertices == 0.0, axis=1))
        assert corner.size == 1
        assert mesh.boundary_vertex_flags[corner[0]]

    def test_area(self, lshape2):
        assert lshape2.area == pytest.approx(3.0, abs=1e-12)


class TestRefinement:
    """Red refinement"""

    def test_counts(self, disk_meshes):
        coarse = disk_meshes[2]
        fine = refine(coarse)
        assert fine.num_triangles == 4 * coarse.num_triangles
        assert fine.num_vertices == coarse.num_vertices + len(coarse.edges)
        assert len(fine.boundary_edges) == 2 * len(coarse.boundary_edges)

    def test_mesh_size_halves(self, unit_square, refined_square):
        assert unit_square.max_edge_length == pytest.approx(np.sqrt(2.0))
        assert refined_square.max_edge_length == pytest.approx(np.sqrt(2.0) / 2.0)

    def test_refine_twice_matches_generator(self):
        twice = refine(refine(generate_lshape(1)))
        direct = generate_lshape(3)
        np.testing.assert_array_equal(twice.vertices, direct.vertices)
        np.testing.assert_array_equal(twice.triangles, direct.triangles)

    def test_recipe_tracks_level(self):
        assert refine(generate_disk(1)).recipe["refinements"] == 2

    def test_original_vertices_kept(self, disk_meshes):
        coarse = disk_meshes[1]
        fine = refine(coarse)
        np.testing.assert_array_equal(fine.vertices[: coarse.num_vertices], coarse.vertices)

    def test_orientation_preserved(self, lshape2):
        assert np.all(refine(lshape2).signed_areas > 0)

    def test_dispatch(self):
        assert generate("disk", 1).num_triangles == 24
        assert generate("rectangle", 1, width=1.0, height=1.0).num_triangles == 8
        with pytest.raises(MeshError):
            generate("torus")


class TestMeshImmutability:
    """Meshes are shared between solves and must not change"""

    def test_arrays_read_only(self, unit_square):
        with pytest.raises(ValueError):
            unit_square.vertices[0, 0] = 3.0
        with pytest.raises(ValueError):
            unit_square.triangles[0, 0] = 1

    def test_flag_length_checked(self, unit_square):
        with pytest.raises(MeshError):
            _with(unit_square, boundary_vertex_flags=np.ones(3, dtype=bool))

    def test_unknown_domain_tag(self, unit_square):
        with pytest.raises(MeshError):
            _with(unit_square, domain_tag="sphere")


class TestValidation:
    """validate() collects violations without raising"""

    @pytest.mark.parametrize("domain", ["disk", "rectangle", "lshape"])
    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_generated_meshes_are_valid(self, domain, level):
        report = validate(generate(domain, level))
        assert report.ok, report.violations
        assert report.euler_characteristic == 1

    def test_unit_square_edges(self, unit_square):
        report = validate(unit_square)
        assert report.edges == 5
        assert report.boundary_edges == 4
        assert report.total_area == pytest.approx(1.0)

    def test_flipped_triangle(self, disk_meshes):
        mesh = disk_meshes[1]
        triangles = mesh.triangles.copy()
        triangles[0] = triangles[0][[0, 2, 1]]
        report = validate(_with(mesh, triangles=triangles))
        assert len(report.violations) == 1
        assert "non-positive" in report.violations[0]

    def test_index_out_of_range(self, unit_square):
        triangles = unit_square.triangles.copy()
        triangles[1, 2] = 9
        report = validate(_with(unit_square, triangles=triangles))
        assert not report.ok
        assert "out of range" in report.violations[0]

    def test_unflagged_boundary_vertex(self, disk_meshes):
        mesh = disk_meshes[1]
        flags = mesh.boundary_vertex_flags.copy()
        flags[mesh.boundary_vertices[0]] = False
        report = validate(_with(mesh, boundary_vertex_flags=flags))
        assert any("not flagged" in v for v in report.violations)

    def test_vertex_off_circle(self, disk_meshes):
        mesh = disk_meshes[1]
        vertices = mesh.vertices.copy()
        vertices[mesh.boundary_vertices[0]] *= 0.999
        report = validate(_with(mesh, vertices=vertices))
        assert any("off the unit circle" in v for v in report.violations)

    def test_missing_boundary_edge(self, unit_square):
        report = validate(_with(unit_square, boundary_edges=unit_square.boundary_edges[:-1]))
        assert any("boundary edges mismatch" in v for v in report.violations)

    def test_summary_mentions_status(self, unit_square):
        assert validate(unit_square).summary().startswith("valid")
