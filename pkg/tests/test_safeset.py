"""Convex safe-region geometry and the feasibility sweep."""

import json

import numpy as np
import pytest
from scipy.optimize import linprog

from gaitbo.domain import ControlParams, GaitParameter, SeedSpec
from gaitbo.errors import ConfigurationError, DegenerateGeometryError
from gaitbo.plant import sim_config
from gaitbo.safeset import (
    SafePolyhedron,
    constraint_value,
    contains,
    convex_hull,
    load_polyhedron,
    polyhedron_from_json_dict,
    polyhedron_to_json_dict,
    save_polyhedron,
    sweep_commands,
)
from gaitbo.scheduler import GainTable

TETRA = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])

CUBE = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])


def in_hull_oracle(points: np.ndarray, x: np.ndarray) -> bool:
    """Linear-program membership: is x a convex combination of the points?"""
    m = points.shape[0]
    A_eq = np.vstack([points.T, np.ones(m)])
    b_eq = np.append(x, 1.0)
    res = linprog(np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, 1)] * m,
                  method="highs")
    return res.status == 0


class TestConvexHull:
    def test_tetrahedron_has_four_faces(self):
        poly = convex_hull(TETRA)
        assert poly.vertices.shape == (4, 3)
        assert len(poly.faces) == 4

    def test_cube_keeps_corners_discards_interior(self):
        points = np.vstack([CUBE, [[0.5, 0.5, 0.5], [0.25, 0.5, 0.5]]])
        poly = convex_hull(points)
        assert poly.vertices.shape == (8, 3)
        got = {tuple(v) for v in np.round(poly.vertices, 12)}
        assert got == {tuple(v) for v in CUBE}

    def test_accepts_gait_parameters(self):
        pts = [GaitParameter(*v) for v in TETRA + np.array([0.0, 0.0, 1.0])]
        poly = convex_hull(pts)
        assert poly.vertices.shape == (4, 3)

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometryError):
            convex_hull(TETRA[:3])

    def test_coplanar_points(self):
        flat = np.array([[0, 0, 0.5], [1, 0, 0.5], [0, 1, 0.5], [1, 1, 0.5],
                         [0.3, 0.3, 0.5]], dtype=float)
        with pytest.raises(DegenerateGeometryError):
            convex_hull(flat)

    def test_idempotent_on_own_vertices(self):
        rng = np.random.default_rng(0)
        pts = rng.random((40, 3))
        poly = convex_hull(pts)
        again = convex_hull(poly.vertices)
        a = {tuple(v) for v in np.round(poly.vertices, 12)}
        b = {tuple(v) for v in np.round(again.vertices, 12)}
        assert a == b


class TestConstraintValue:
    def test_centroid_is_strictly_inside(self):
        poly = convex_hull(CUBE)
        assert constraint_value(poly, poly.centroid) < 0.0

    def test_vertices_sit_on_the_boundary(self):
        poly = convex_hull(CUBE)
        for v in poly.vertices:
            assert abs(constraint_value(poly, v)) <= 1e-9

    def test_outside_point_is_positive(self):
        poly = convex_hull(CUBE)
        assert constraint_value(poly, [2.0, 0.5, 0.5]) > 0.0
        assert not contains(poly, [2.0, 0.5, 0.5])

    def test_h_is_distance_to_face_for_axis_aligned_cube(self):
        poly = convex_hull(CUBE)
        # 0.3 outside the x=1 face: the largest plane violation is exactly 0.3
        assert constraint_value(poly, [1.3, 0.5, 0.5]) == pytest.approx(0.3, abs=1e-12)
        # inside, 0.1 behind the nearest face
        assert constraint_value(poly, [0.9, 0.5, 0.5]) == pytest.approx(-0.1, abs=1e-12)

    def test_step_along_outward_normal_leaves_the_region(self):
        rng = np.random.default_rng(1)
        poly = convex_hull(rng.random((30, 3)))
        for face in poly.faces:
            anchor = poly.vertices[face.anchor_index]
            outside = anchor - 0.1 * face.inward_normal
            assert constraint_value(poly, outside) >= 0.1 - 1e-9

    def test_all_input_points_inside_unshrunk_hull(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(0.0, 1.0, (100, 3))
        poly = convex_hull(pts)
        for p in pts:
            assert constraint_value(poly, p) <= 1e-9

    def test_agrees_with_linear_program_membership(self):
        rng = np.random.default_rng(3)
        pts = rng.random((8, 3)) * 2.0
        poly = convex_hull(pts)
        hull_pts = poly.vertices
        disagreements = 0
        for _ in range(200):
            x = rng.random(3) * 2.0
            if contains(poly, x) != in_hull_oracle(hull_pts, x):
                disagreements += 1
        assert disagreements == 0

    def test_one_lipschitz(self):
        rng = np.random.default_rng(4)
        poly = convex_hull(rng.random((20, 3)))
        for _ in range(200):
            a = rng.normal(0, 1, 3)
            b = a + rng.normal(0, 0.2, 3)
            gap = abs(constraint_value(poly, a) - constraint_value(poly, b))
            assert gap <= np.linalg.norm(a - b) + 1e-12


class TestShrink:
    def test_gamma_scales_vertices_about_centroid(self):
        poly = convex_hull(CUBE, gamma=0.9)
        assert poly.gamma == 0.9
        centroid = CUBE.mean(axis=0)
        expected = {tuple(np.round(centroid + 0.9 * (v - centroid), 12)) for v in CUBE}
        got = {tuple(v) for v in np.round(poly.vertices, 12)}
        assert got == expected

    def test_shrunk_region_is_a_strict_subset(self):
        full = convex_hull(CUBE, gamma=1.0)
        shrunk = convex_hull(CUBE, gamma=0.8)
        rng = np.random.default_rng(5)
        for _ in range(200):
            x = rng.random(3)
            if contains(shrunk, x):
                assert contains(full, x)
        # old boundary vertices fall outside the shrunk region
        assert not contains(shrunk, [0.0, 0.0, 0.0])

    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            SafePolyhedron(convex_hull(CUBE).vertices, convex_hull(CUBE).faces, 0.0)
        with pytest.raises(ValueError):
            SafePolyhedron(convex_hull(CUBE).vertices, convex_hull(CUBE).faces, 1.2)


class TestPolyhedronValidation:
    def test_rejects_flipped_normal(self):
        poly = convex_hull(TETRA)
        bad_face = poly.faces[0]
        flipped = type(bad_face)(bad_face.vertex_indices, -bad_face.inward_normal,
                                 bad_face.anchor_index)
        with pytest.raises(ValueError, match="centroid"):
            SafePolyhedron(poly.vertices, (flipped,) + poly.faces[1:], poly.gamma)

    def test_rejects_non_unit_normal(self):
        with pytest.raises(ValueError, match="unit length"):
            type(convex_hull(TETRA).faces[0])((0, 1, 2), [0.5, 0.5, 0.5], 0)

    def test_rejects_out_of_range_vertex_index(self):
        poly = convex_hull(TETRA)
        face = poly.faces[0]
        bad = type(face)((0, 1, 9), face.inward_normal, 0)
        with pytest.raises(ValueError, match="outside the vertex list"):
            SafePolyhedron(poly.vertices, (bad,) + poly.faces[1:], poly.gamma)


class TestJsonRoundTrip:
    def test_round_trip_preserves_geometry(self, tmp_path):
        rng = np.random.default_rng(6)
        poly = convex_hull(rng.random((25, 3)), gamma=0.9)
        path = tmp_path / "safeset.json"
        save_polyhedron(poly, path)
        loaded = load_polyhedron(path)
        np.testing.assert_allclose(loaded.vertices, poly.vertices, atol=0)
        assert loaded.gamma == poly.gamma
        assert len(loaded.faces) == len(poly.faces)
        for _ in range(50):
            x = rng.random(3)
            assert constraint_value(loaded, x) == pytest.approx(
                constraint_value(poly, x), abs=1e-15)

    def test_rejects_malformed_document(self):
        with pytest.raises(ConfigurationError):
            polyhedron_from_json_dict({"vertices": [[0, 0, 0]]})

    def test_dict_shape(self):
        poly = convex_hull(TETRA)
        doc = polyhedron_to_json_dict(poly)
        assert set(doc) == {"gamma", "vertices", "faces"}
        assert all(set(f) == {"v", "n", "anchor"} for f in doc["faces"])
        json.dumps(doc)


def firm_table():
    return GainTable.constant(
        ControlParams([2.0, 2.0, 2.0], [0.5, 0.5, 0.5], np.zeros(3)))


class TestSweep:
    GRID = (
        GaitParameter(0.0, 0.0, 1.0),
        GaitParameter(0.2, 0.0, 1.0),
        GaitParameter(0.0, 0.2, 0.9),
    )

    def test_firm_gains_complete_the_sweep(self):
        result = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(0))
        assert result.grid == self.GRID
        assert len(result.feasible_commands) == len(result.safe_points)
        assert GaitParameter(0.0, 0.0, 1.0) in result.feasible_commands

    def test_converged_points_near_commands(self):
        result = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(0))
        for cmd, pt in zip(result.feasible_commands, result.safe_points):
            assert abs(pt.h - cmd.h) < 0.25

    def test_zero_gain_table_falls(self):
        table = GainTable.constant(ControlParams(np.zeros(3), np.zeros(3), np.zeros(3)))
        grid = (GaitParameter(0.5, 0.5, 1.0),)
        result = sweep_commands(table, sim_config(), grid, SeedSpec(0))
        assert result.feasible_commands == ()
        assert result.safe_points == ()

    def test_deterministic_per_seed(self):
        a = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(3))
        b = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(3))
        assert a.feasible_commands == b.feasible_commands
        for pa, pb in zip(a.safe_points, b.safe_points):
            np.testing.assert_array_equal(pa.as_array(), pb.as_array())

    def test_jobs_do_not_change_results(self):
        serial = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(1))
        parallel = sweep_commands(firm_table(), sim_config(), self.GRID, SeedSpec(1),
                                  jobs=2)
        assert serial.feasible_commands == parallel.feasible_commands
        for ps, pp in zip(serial.safe_points, parallel.safe_points):
            np.testing.assert_array_equal(ps.as_array(), pp.as_array())

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            sweep_commands(firm_table(), sim_config(), (), SeedSpec(0))

    def test_non_command_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            sweep_commands(firm_table(), sim_config(), (np.array([0, 0, 1.0]),),
                           SeedSpec(0))
