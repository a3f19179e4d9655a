# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Test file for the structured meshes, subdomain tagging and DOF maps
"""

from nanosim.mesh import (ArrayGeometry, Inclusion, build_box_mesh,
                          build_cell_mesh, build_dof_maps, build_macro_mesh,
                          build_periodic_pairs, extract_particle_submesh,
                          tag_reference_cell, tag_subdomains,
                          voxel_volume_fraction)
from nanosim.model import HOST, METAL, VACUUM

import numpy as np
import pytest

UNIT = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]


@pytest.fixture
def geom():
    return ArrayGeometry(inclusion=Inclusion(radius=0.3), counts=(2, 2, 1),
                         eta=2.0, cell_resolution=4, host_margin=1,
                         vacuum_padding=1)


@pytest.fixture
def tagged(geom):
    return tag_subdomains(build_macro_mesh(geom), geom)


def test_unit_cube():
    """
    One hexahedron is cut into 6 tetrahedra of equal volume.
    """
    mesh = build_box_mesh(UNIT, 1)
    assert mesh.n_vertices == 8
    assert mesh.n_elements == 6
    assert mesh.n_edges == 19
    assert mesh.n_faces == 18
    assert len(mesh.boundary_faces) == 12
    assert mesh.volumes == pytest.approx(np.full(6, 1 / 6))


@pytest.mark.parametrize('n', [1, 2, 3])
def test_box_counts(n):
    """
    Vertex and element counts and the Euler characteristic of a box.
    """
    mesh = build_box_mesh(UNIT, n)
    assert mesh.n_vertices == (n + 1) ** 3
    assert mesh.n_elements == 6 * n ** 3
    assert mesh.n_vertices - mesh.n_edges + mesh.n_faces \
        - mesh.n_elements == 1
    assert mesh.volumes.sum() == pytest.approx(1.0)


def test_box_numbering():
    """
    Vertex ids follow the lexicographic lattice order and elements come in
    groups of six per hexahedron.
    """
    mesh = build_box_mesh(UNIT, (2, 3, 4))
    i, j, k = 1, 2, 3
    vid = (i * 4 + j) * 5 + k
    assert np.array_equal(mesh.grid_index[vid], [i, j, k])
    assert mesh.vertices[vid] == pytest.approx([0.5, 2 / 3, 0.75])
    assert np.array_equal(mesh.kuhn_index[:6], np.arange(6))
    assert np.all(mesh.hex_index[:6] == mesh.hex_index[0])


def test_positive_orientation():
    """
    All elements are positively oriented.
    """
    mesh = build_box_mesh(UNIT, 2)
    x = mesh.vertices[mesh.tets]
    assert np.all(np.linalg.det(x[:, 1:] - x[:, :1]) > 0)


def test_face_orientation_signs():
    """
    Every interior face is seen with opposite signs from its two elements.
    """
    mesh = build_box_mesh(UNIT, 2)
    inner = np.flatnonzero(mesh.face_tets[:, 1] >= 0)
    signs = []
    for f in inner[:20]:
        t0, t1 = mesh.face_tets[f]
        s0 = mesh.tet_face_signs[t0][list(mesh.tet_faces[t0]).index(f)]
        s1 = mesh.tet_face_signs[t1][list(mesh.tet_faces[t1]).index(f)]
        signs.append(s0 * s1)
    assert np.all(np.array(signs) == -1)


@pytest.mark.parametrize('resolution', [0, -1])
def test_box_invalid_resolution(resolution):
    """
    Zero or negative resolution is rejected.
    """
    with pytest.raises(ValueError):
        build_box_mesh(UNIT, resolution)


def test_degenerate_box():
    """
    A box without volume is rejected.
    """
    with pytest.raises(ValueError):
        build_box_mesh([[0, 1], [0, 1], [1, 1]], 2)


@pytest.mark.parametrize('kwargs', [
    {'inclusion': Inclusion(radius=0.5)},
    {'counts': (0, 1, 1)},
    {'eta': 0.0},
    {'vacuum_padding': 0},
    {'host_margin': -1},
])
def test_geometry_invalid(kwargs):
    """
    Inclusions touching the cell boundary and bad counts are rejected.
    """
    with pytest.raises(ValueError):
        ArrayGeometry(**kwargs)


def test_inclusion_invalid():
    """
    Unknown shapes and boxes without half widths are rejected.
    """
    with pytest.raises(ValueError):
        Inclusion(shape='cylinder')
    with pytest.raises(ValueError):
        Inclusion(shape='box')


def test_geometry_extents(geom):
    """
    The array starts at the origin and the domain is padded on both sides.
    """
    assert geom.n_particles == 4
    assert geom.period == pytest.approx([2, 2, 2])
    assert geom.spacing == pytest.approx([0.5, 0.5, 0.5])
    assert geom.array_extents[:, 1] == pytest.approx([4, 4, 2])
    assert geom.domain_extents[:, 0] == pytest.approx([-1, -1, -1])
    assert np.array_equal(geom.grid_shape, [12, 12, 8])
    assert geom.lattice_vector(3) == pytest.approx([2, 2, 0])


def test_tagging(tagged, geom):
    """
    The vacuum layer surrounds the host and every particle is resolved by
    the same number of metal elements.
    """
    tags = tagged.tags
    assert set(np.unique(tags)) == {VACUUM, HOST, METAL}
    assert np.all(tags[tagged.face_tets[tagged.boundary_faces, 0]]
                  == VACUUM)
    counts = np.bincount(tagged.particle[tags == METAL])
    assert len(counts) == geom.n_particles
    assert np.all(counts == counts[0])
    assert np.all(tagged.particle[tags != METAL] == -1)
    assert np.all(tagged.in_array[tags == METAL])


def test_tagging_wrong_mesh(geom):
    """
    A mesh that does not match the geometry cannot be tagged.
    """
    with pytest.raises(ValueError):
        tag_subdomains(build_box_mesh(UNIT, 2), geom)


def test_unresolved_particle():
    """
    An inclusion smaller than the elements is reported.
    """
    geom = ArrayGeometry(inclusion=Inclusion(radius=0.01),
                         cell_resolution=2)
    with pytest.raises(ValueError):
        tag_subdomains(build_macro_mesh(geom), geom)


def test_boundary_markers(tagged, geom):
    """
    Boundary markers exist for the domain, the scatterer and each
    particle.
    """
    markers = tagged.boundary_face_markers()
    assert len(markers['domain']) == len(tagged.boundary_faces)
    assert len(markers['scatterer']) > 0
    for k in range(geom.n_particles):
        assert len(markers['particle_{}'.format(k)]) > 0


def test_interior_entities(tagged):
    """
    Interior faces and edges of the metal never touch the interface.
    """
    metal = tagged.tags == METAL
    interface = tagged.interface_faces(metal)
    inner = tagged.interior_faces(metal)
    assert len(np.intersect1d(interface, inner)) == 0
    edges = tagged.interior_edges(metal)
    assert len(np.intersect1d(edges, tagged.face_edges[interface])) == 0


def test_particle_submeshes_identical(tagged, geom):
    """
    The submeshes of all particles are bitwise identical and differ only
    in their translation.
    """
    subs = [extract_particle_submesh(tagged, k)
            for k in range(geom.n_particles)]
    assert len({sub.fingerprint for sub, _ in subs}) == 1
    for k, (sub, emb) in enumerate(subs):
        assert sub.global_vertices == pytest.approx(
            tagged.vertices[emb.vertices])
        assert np.array_equal(tagged.edges[emb.edges],
                              emb.vertices[sub.edges])
        assert np.array_equal(tagged.faces[emb.faces],
                              emb.vertices[sub.faces])
        assert np.all(tagged.particle[emb.elements] == k)
    shift = subs[1][0].translation - subs[0][0].translation
    assert shift == pytest.approx(geom.lattice_vector(1))


def test_particle_submesh_missing(tagged):
    """
    A particle index beyond the array has no elements.
    """
    with pytest.raises(ValueError):
        extract_particle_submesh(tagged, 99)


def test_reference_cell(geom):
    """
    The cell mesh holds metal and host only, with a voxel volume fraction
    close to the analytic one.
    """
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    assert set(np.unique(cell.tags)) == {HOST, METAL}
    assert voxel_volume_fraction(cell) == pytest.approx(
        geom.analytic_volume_fraction, abs=0.05)


def test_voxel_fraction_fine():
    """
    On a fine cell mesh the voxel volume fraction of the r = 0.4 sphere is
    close to 4 pi 0.4^3 / 3.
    """
    geom = ArrayGeometry(inclusion=Inclusion(radius=0.4),
                         cell_resolution=16)
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    assert geom.analytic_volume_fraction == pytest.approx(0.2681, abs=1e-4)
    assert voxel_volume_fraction(cell) == pytest.approx(
        geom.analytic_volume_fraction, abs=0.01)


def test_periodic_pairs():
    """
    On the periodic cell the DOF counts satisfy the Euler relation of the
    torus and opposite sides share their DOFs.
    """
    n = 3
    cell = build_box_mesh(UNIT, n)
    dofs = build_periodic_pairs(cell)
    assert dofs.periodic
    assert dofs.n_free('node') == n ** 3
    assert dofs.n_free('edge') == 7 * n ** 3
    assert dofs.n_free('face') == 12 * n ** 3
    grid = cell.grid_index
    top = np.flatnonzero(grid[:, 0] == n)
    assert np.array_equal(grid[dofs.node_master[top], 0],
                          np.zeros(len(top)))
    p = dofs.prolongation('edge')
    assert p.shape == (cell.n_edges, 7 * n ** 3)
    assert np.all(np.asarray(p.sum(axis=1)).ravel() == 1)


def test_plain_dof_maps():
    """
    Without periodicity every entity carries its own DOF.
    """
    mesh = build_box_mesh(UNIT, 2)
    dofs = build_dof_maps(mesh)
    assert not dofs.periodic
    assert dofs.n_free('edge') == mesh.n_edges
    assert len(dofs.boundary_faces) == 6 * 2 * 4
