import json
import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from helmcloak import meshgen
from helmcloak.errors import ParameterError


def euler_characteristic(mesh):
    return len(mesh.nodes) - len(mesh.edge_set()) + len(mesh.triangles)


def max_edge_length(mesh):
    p = mesh.nodes[mesh.triangles]
    lengths = [
        np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in ((0, 1), (1, 2), (2, 0))
    ]
    return float(np.max(lengths))


def test_disk_area_and_orientation(unit_disk_coarse):
    mesh = unit_disk_coarse
    assert np.all(mesh.signed_areas() > 0)
    assert mesh.area() == pytest.approx(math.pi, abs=0.05)


def test_disk_containment_and_edge_length():
    mesh = meshgen.make_disk(1.0, 0.1)
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    assert np.all(r <= 1.0 + 1e-12)
    # angular rounding in ring counts allows edges modestly above h
    assert max_edge_length(mesh) <= 1.75 * 0.1


def test_disk_topology_and_quality(unit_disk_coarse):
    assert euler_characteristic(unit_disk_coarse) == 1
    assert unit_disk_coarse.min_angle() >= 20.0


def test_no_duplicate_nodes(unit_disk_coarse):
    tree = cKDTree(unit_disk_coarse.nodes)
    pairs = tree.query_pairs(1e-10)
    assert not pairs


def test_every_node_referenced(unit_disk_coarse):
    used = np.unique(unit_disk_coarse.triangles)
    assert len(used) == len(unit_disk_coarse.nodes)


def test_interface_ring_is_exact():
    mesh = meshgen.make_disk(2.0, 0.1, interface_radius=1.0)
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    on_ring = np.abs(r - 1.0) < 0.04
    assert on_ring.any()
    assert np.max(np.abs(r[on_ring] - 1.0)) <= 1e-12
    # region tags split across the interface
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    rc = np.hypot(centroids[:, 0], centroids[:, 1])
    assert np.all((rc > 1.0) == (mesh.region_tag == 1))


def test_annulus_area_and_topology():
    mesh = meshgen.make_annulus(1.0, 2.0, 0.1)
    assert mesh.area() == pytest.approx(3 * math.pi, abs=0.05)
    assert euler_characteristic(mesh) == 0
    assert mesh.inner_boundary is not None
    assert mesh.min_angle() >= 20.0


def test_ellipse_area_and_quality():
    mesh = meshgen.make_ellipse(1.3, 0.8, 0.1)
    assert mesh.area() == pytest.approx(math.pi * 1.3 * 0.8, abs=0.02)
    assert mesh.min_angle() >= 20.0
    rho = np.sqrt((mesh.nodes[:, 0] / 1.3) ** 2 + (mesh.nodes[:, 1] / 0.8) ** 2)
    assert np.all(rho <= 1.0 + 1e-12)


def test_circular_ellipse_matches_disk():
    disk = meshgen.make_disk(1.0, 0.2)
    ell = meshgen.make_ellipse(1.0, 1.0, 0.2)
    assert np.allclose(disk.nodes, ell.nodes)
    assert np.array_equal(disk.triangles, ell.triangles)


def test_refine_quadruples_triangles_and_converges_area():
    coarse = meshgen.make_disk(1.0, 0.25)
    fine = meshgen.refine(coarse)
    assert len(fine.triangles) == 4 * len(coarse.triangles)
    err_c = math.pi - coarse.area()
    err_f = math.pi - fine.area()
    assert err_c > 0 and err_f > 0
    assert err_c / err_f >= 3.0


def test_refine_preserves_interface():
    mesh = meshgen.refine(meshgen.make_disk(2.0, 0.2, interface_radius=1.0))
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    on_ring = np.abs(r - 1.0) < 0.02
    assert np.max(np.abs(r[on_ring] - 1.0)) <= 1e-12


def test_boundary_ordering(unit_disk_coarse):
    ang = meshgen.boundary_angles(unit_disk_coarse)
    n = len(ang)
    shift = meshgen.boundary_ring_rotation(unit_disk_coarse)
    ordered = np.roll(ang, -shift)
    gaps = np.diff(np.append(ordered, ordered[0] + 2 * math.pi))
    assert np.all(gaps > 0)
    assert np.max(gaps) < 2 * (2 * math.pi / n)


def test_json_round_trip(tmp_path, unit_disk_coarse):
    path = tmp_path / "mesh.json"
    unit_disk_coarse.save(str(path))
    loaded = meshgen.Mesh.load(str(path))
    assert np.array_equal(loaded.nodes, unit_disk_coarse.nodes)
    assert np.array_equal(loaded.triangles, unit_disk_coarse.triangles)
    assert np.array_equal(loaded.outer_boundary, unit_disk_coarse.outer_boundary)
    assert np.array_equal(loaded.region_tag, unit_disk_coarse.region_tag)
    assert loaded.inner_boundary is None


def test_json_version_check(unit_disk_coarse):
    data = json.loads(unit_disk_coarse.to_json())
    assert data["version"] == meshgen.MESH_FORMAT_VERSION
    data["version"] = 99
    with pytest.raises(ParameterError):
        meshgen.Mesh.from_json(json.dumps(data))


def test_save_is_deterministic(tmp_path, unit_disk_coarse):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    unit_disk_coarse.save(str(a))
    unit_disk_coarse.save(str(b))
    assert a.read_bytes() == b.read_bytes()


def test_parameter_errors():
    with pytest.raises(ParameterError):
        meshgen.make_disk(1.0, 0.5)
    with pytest.raises(ParameterError):
        meshgen.make_disk(-1.0, 0.1)
    with pytest.raises(ParameterError):
        meshgen.make_disk(1.0, 0.1, interface_radius=1.5)
    with pytest.raises(ParameterError):
        meshgen.make_annulus(2.0, 1.0, 0.1)
    with pytest.raises(ParameterError):
        meshgen.make_ellipse(1.0, 0.0, 0.1)
