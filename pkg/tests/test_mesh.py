import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from config import HarnessConfig
from fem.domain import DIRICHLET, FLUX, BoundaryPartitionRule, Domain
from fem.errors import DomainError, MeshResourceError, MeshValidationError
from fem.mesh import Mesh, distance_to_boundary, generate_disk_mesh, generate_square_mesh, refine

pytestmark = pytest.mark.unit


def _check_invariants(mesh):
    assert np.all(mesh.signed_areas > 0)
    mesh.validate()
    assert len(mesh.edge_labels) == len(mesh.boundary_edges)
    assert np.any(mesh.edge_labels == DIRICHLET)


def test_coarsest_disk_mesh_is_valid():
    mesh = generate_disk_mesh(1.0, 0.5)
    assert mesh.num_triangles >= 4
    _check_invariants(mesh)
    assert mesh.h_max <= 2 * 0.5


def test_disk_boundary_vertices_on_circle():
    mesh = generate_disk_mesh(2.0, 0.3)
    r = np.hypot(*mesh.vertices[mesh.boundary_vertex_mask].T)
    assert np.max(np.abs(r - 2.0)) <= 1e-12 * 2.0


def test_disk_area_within_one_percent():
    mesh = generate_disk_mesh(1.0, 0.1)
    assert mesh.total_area == pytest.approx(math.pi, rel=0.01)


def test_refine_quadruples_triangles(disk_mesh):
    fine = refine(disk_mesh)
    assert fine.num_triangles == 4 * disk_mesh.num_triangles
    assert fine.h_max < disk_mesh.h_max
    _check_invariants(fine)


def test_refine_keeps_partition(split_disk_mesh):
    fine = refine(split_disk_mesh)
    assert np.sum(fine.edge_labels == FLUX) == 2 * np.sum(split_disk_mesh.edge_labels == FLUX)
    r = np.hypot(*fine.vertices[fine.boundary_vertex_mask].T)
    assert np.allclose(r, 1.0, atol=1e-12)


def test_area_defect_shrinks_by_four():
    mesh = generate_disk_mesh(1.0, 0.1)
    defects = [math.pi - mesh.total_area]
    for _ in range(2):
        mesh = refine(mesh)
        defects.append(math.pi - mesh.total_area)
    ratios = [defects[i] / defects[i + 1] for i in range(2)]
    assert ratios == pytest.approx([4.0, 4.0], rel=0.05)


def test_square_mesh_partition(square_mesh):
    _check_invariants(square_mesh)
    assert square_mesh.total_area == pytest.approx(1.0, abs=1e-12)
    mids = 0.5 * (square_mesh.vertices[square_mesh.flux_edges[:, 0]] + square_mesh.vertices[square_mesh.flux_edges[:, 1]])
    assert np.all(mids[:, 1] > 0.5)


def test_square_corner_cells_have_no_boundary_only_triangles(square_mesh):
    on_boundary = square_mesh.boundary_vertex_mask[square_mesh.triangles]
    assert not np.any(np.all(on_boundary, axis=1))


def test_distance_to_boundary_examples(disk_mesh):
    assert distance_to_boundary(disk_mesh, (0.0, 0.0)) == pytest.approx(1.0)
    assert distance_to_boundary(disk_mesh, (0.6, 0.0)) == pytest.approx(0.4)
    assert distance_to_boundary(disk_mesh, (1.0, 0.0)) == 0.0
    with pytest.raises(DomainError):
        distance_to_boundary(disk_mesh, (1.5, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))
def test_distance_is_one_lipschitz(x1, y1, x2, y2):
    domain = Domain()
    d = domain.distance(np.array([[x1, y1], [x2, y2]]))
    assert abs(d[0] - d[1]) <= math.hypot(x1 - x2, y1 - y2) + 1e-12


def test_json_round_trip_preserves_labels(split_disk_mesh):
    loaded = Mesh.from_json(split_disk_mesh.to_json())
    assert np.array_equal(loaded.triangles, split_disk_mesh.triangles)
    assert np.array_equal(loaded.edge_labels, split_disk_mesh.edge_labels)
    assert loaded.h_max == split_disk_mesh.h_max


def test_loader_rejects_flipped_triangle(disk_mesh):
    doc = json.loads(disk_mesh.to_json())
    a, b, c = doc["triangles"][0]
    doc["triangles"][0] = [a, c, b]
    with pytest.raises(MeshValidationError):
        Mesh.from_dict(doc)


def test_loader_rejects_missing_labels(disk_mesh):
    doc = json.loads(disk_mesh.to_json())
    doc["boundary_edges"] = doc["boundary_edges"][1:]
    with pytest.raises(MeshValidationError):
        Mesh.from_dict(doc)


def test_loader_rejects_wrong_h_max(disk_mesh):
    doc = json.loads(disk_mesh.to_json())
    doc["h_max"] = 2 * doc["h_max"]
    with pytest.raises(MeshValidationError):
        Mesh.from_dict(doc)


def test_all_flux_partition_is_rejected():
    rule = BoundaryPartitionRule(kind="axis-split", offset=-1.0)
    with pytest.raises(MeshValidationError):
        generate_square_mesh(0.25, rule)


def test_vertex_budget(monkeypatch):
    monkeypatch.setattr(HarnessConfig, "MAX_MESH_VERTICES", 100)
    with pytest.raises(MeshResourceError):
        generate_disk_mesh(1.0, 0.01)


def test_evaluate_reproduces_linear_field(disk_mesh):
    coeffs = disk_mesh.interpolate(lambda p: 2.0 * p[:, 0] - p[:, 1] + 0.5)
    pts = np.array([[0.1, 0.2], [-0.3, 0.4], [0.0, -0.55]])
    assert np.allclose(disk_mesh.evaluate(coeffs, pts), 2.0 * pts[:, 0] - pts[:, 1] + 0.5)


def test_trace_at_params_interpolates_along_edges(split_disk_mesh):
    coeffs = split_disk_mesh.interpolate(lambda p: p[:, 0])
    edge = split_disk_mesh.boundary_edges[0]
    s = split_disk_mesh.boundary_edge_params()[0]
    mid = split_disk_mesh.trace_at_params(coeffs, 0.5 * (s[0] + s[1]))
    assert mid[0] == pytest.approx(0.5 * (coeffs[edge[0]] + coeffs[edge[1]]))


def test_center_graded_disk_mesh():
    uniform = generate_disk_mesh(1.0, 0.2)
    graded = generate_disk_mesh(1.0, 0.2, center_grading=10)
    _check_invariants(graded)
    assert graded.num_vertices == 1 + 18 * 10 + 6 * (3 + 4 + 5)
    assert graded.total_area == pytest.approx(uniform.total_area, rel=1e-12)
    assert graded.h_max <= uniform.h_max
    inner = np.hypot(*graded.vertices[1:].T).min()
    assert inner == pytest.approx(0.6 * 2.0 ** -5)
    fine = refine(graded)
    assert np.hypot(*fine.vertices[1:].T).min() == pytest.approx(0.5 * inner)


def test_center_grading_needs_three_rings():
    with pytest.raises(DomainError, match="center grading"):
        generate_disk_mesh(1.0, 0.5, center_grading=4)
    with pytest.raises(DomainError):
        generate_disk_mesh(1.0, 0.2, center_grading=-1)


def test_locate_searches_every_triangle_when_candidates_miss(square_mesh, monkeypatch):
    monkeypatch.setattr(HarnessConfig, "LOCATE_CANDIDATES", 1)
    pts = np.random.default_rng(3).uniform(0.02, 0.98, size=(200, 2))
    tri, lam = square_mesh.locate(pts)
    assert np.all(lam >= -1e-10)
    corners = square_mesh.vertices[square_mesh.triangles[tri]]
    assert np.allclose(np.einsum("pi,pij->pj", lam, corners), pts)


def test_locate_clips_curved_sliver_and_rejects_outside(disk_mesh):
    # on the circle, between two boundary vertices of the inscribed polygon
    tri, lam = disk_mesh.locate([[math.cos(0.05), math.sin(0.05)]])
    assert np.all(lam >= 0.0) and lam.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError, match="outside the disk"):
        disk_mesh.locate([[0.0, 0.0], [1.2, 0.0]])
