import numpy as np
import pytest

import fricflow as ff
from fricflow.mesh import IN, OUT, dump_text, subdomain_areas, validate


def test_default_counts_n4():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    assert mesh.num_vertices == 25
    assert mesh.num_triangles == 32
    assert len(mesh.interface_edges) == 8


def test_interface_normals_are_outward_axis_vectors():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    cx, cy = 0.5, 0.5
    for (a, b), nvec in zip(mesh.interface_edges, mesh.interface_normals):
        assert sorted(np.abs(nvec)) == pytest.approx([0.0, 1.0], abs=1e-15)
        mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        # outward: points away from the inner-box centre
        assert np.dot(nvec, mid - (cx, cy)) > 0


def test_refinement_scaling():
    m4 = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    m8 = ff.build_two_domain_mesh(ff.MeshConfig(n=8))
    assert len(m8.interface_edges) == 2 * len(m4.interface_edges) == 16
    assert m8.num_triangles == 4 * m4.num_triangles == 128


def test_validate_clean_mesh():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    assert validate(mesh).violations == []


def test_validate_detects_flipped_triangle():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    mesh.triangles[3, [0, 1]] = mesh.triangles[3, [1, 0]]
    report = validate(mesh)
    assert any("negative signed area" in v for v in report.violations)


def test_validate_detects_open_interface():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    mesh.interface_edges = mesh.interface_edges[:-1]
    mesh.interface_normals = mesh.interface_normals[:-1]
    mesh.interface_tris = mesh.interface_tris[:-1]
    report = validate(mesh)
    assert any("interface not closed" in v for v in report.violations)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_area_and_perimeter(n):
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=n))
    assert mesh.signed_areas().sum() == pytest.approx(1.0, rel=1e-12)
    lengths = np.linalg.norm(
        mesh.vertices[mesh.interface_edges[:, 1]] - mesh.vertices[mesh.interface_edges[:, 0]],
        axis=1,
    )
    assert lengths.sum() == pytest.approx(2.0, rel=1e-12)
    a_in, a_out = subdomain_areas(mesh)
    assert a_in == pytest.approx(0.25, rel=1e-12)
    assert a_out == pytest.approx(0.75, rel=1e-12)


def test_interface_vertices_touch_both_sides():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=8))
    touches = {int(v): set() for v in mesh.interface_vertex_ids()}
    for tri, lab in zip(mesh.triangles, mesh.tri_labels):
        for v in tri:
            if int(v) in touches:
                touches[int(v)].add(int(lab))
    for v, labs in touches.items():
        assert labs == {IN, OUT}, f"interface vertex {v} touches only {labs}"


def test_rejects_unaligned_inner_box():
    with pytest.raises(ValueError, match="grid"):
        ff.build_two_domain_mesh(ff.MeshConfig(inner_box=(0.3, 0.25, 0.75, 0.75), n=4))


def test_rejects_too_coarse_inner_box():
    with pytest.raises(ValueError, match="fewer than 2 cells"):
        ff.build_two_domain_mesh(ff.MeshConfig(inner_box=(0.25, 0.25, 0.5, 0.75), n=4))


def test_rejects_inner_box_touching_boundary():
    with pytest.raises(ValueError, match="strictly inside"):
        ff.build_two_domain_mesh(ff.MeshConfig(inner_box=(0.0, 0.25, 0.75, 0.75), n=4))


def test_rejects_bad_n():
    with pytest.raises(ValueError, match="positive integer"):
        ff.MeshConfig(n=0).validate()


def test_dirichlet_and_interface_disjoint():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    assert not set(map(int, mesh.dirichlet_vertices)) & set(map(int, mesh.interface_vertex_ids()))


def test_dump_text_format():
    mesh = ff.build_two_domain_mesh(ff.MeshConfig(n=4))
    lines = dump_text(mesh).splitlines()
    assert sum(1 for l in lines if l.startswith("v ")) == 25
    assert sum(1 for l in lines if l.startswith("t ")) == 32
    assert sum(1 for l in lines if l.startswith("e ")) == 8
    tri_line = next(l for l in lines if l.startswith("t "))
    assert tri_line.split()[-1] in ("IN", "OUT")
    assert mesh.content_hash() == ff.build_two_domain_mesh(ff.MeshConfig(n=4)).content_hash()


def test_non_square_outer_box():
    mesh = ff.build_two_domain_mesh(
        ff.MeshConfig(outer_box=(0.0, 0.0, 2.0, 1.0), inner_box=(0.5, 0.25, 1.5, 0.75), n=4)
    )
    assert validate(mesh).violations == []
    assert mesh.num_triangles == 2 * 8 * 4
    assert mesh.signed_areas().sum() == pytest.approx(2.0, rel=1e-12)
