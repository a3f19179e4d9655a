# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Test file for the correctors, the local particle solves and stitching
"""

from nanosim.analysis import error_report
from nanosim.homog import homogenize
from nanosim.linsolve import FactorizationCache, factorize
from nanosim.macro import (IncidentWave, solve_homogenized_maxwell,
                           solve_original)
from nanosim.mesh import (ArrayGeometry, Inclusion, build_cell_mesh,
                          build_macro_mesh, extract_particle_submesh,
                          tag_reference_cell, tag_subdomains)
from nanosim.model import (HOST, METAL, MaterialSet, build_coefficient_field,
                           nondimensionalize)
from nanosim.multiscale import (ParticleSolver, apply_corrector,
                                apply_current_corrector, cell_element_map,
                                corrector_field, modified_multiscale,
                                original_multiscale, stitch_solution)

import numpy as np
import pytest
import time

OMEGA = 0.75


@pytest.fixture
def mats():
    return nondimensionalize(MaterialSet.from_names())


@pytest.fixture
def geom():
    return ArrayGeometry(inclusion=Inclusion(radius=0.3), counts=(2, 1, 1),
                         eta=2.0, cell_resolution=4, vacuum_padding=1)


@pytest.fixture
def mesh(geom):
    return tag_subdomains(build_macro_mesh(geom), geom)


@pytest.fixture
def cell(geom):
    return tag_reference_cell(build_cell_mesh(geom), geom)


@pytest.fixture
def scalar(cell, mats):
    return homogenize(cell, mats)


@pytest.fixture
def wave():
    return IncidentWave(OMEGA)


@pytest.fixture
def result(mesh, scalar, wave, mats):
    tensors, cells = scalar
    return modified_multiscale(mesh, cells, tensors, wave, mats)


def test_cell_element_map(mesh, cell, geom):
    """
    Every array element sits over one cell element, each cell element is
    hit once per particle.
    """
    mapping = cell_element_map(mesh, cell, geom)
    inside = mapping >= 0
    assert np.array_equal(inside, mesh.in_array)
    hits = np.bincount(mapping[inside], minlength=cell.n_elements)
    assert np.all(hits == geom.n_particles)
    assert np.array_equal(cell.tags[mapping[inside]], mesh.tags[inside])


def test_incommensurate_meshes(mesh, geom):
    """
    A cell mesh of another resolution cannot be mapped.
    """
    other = ArrayGeometry(inclusion=Inclusion(radius=0.3), cell_resolution=2)
    with pytest.raises(ValueError):
        cell_element_map(mesh, build_cell_mesh(other), geom)


def test_corrector_outside_array(mesh, scalar, geom):
    """
    The corrector is the identity outside the array.
    """
    _, cells = scalar
    corrector = corrector_field(mesh, cells, geom)
    outside = ~mesh.in_array
    assert np.all(corrector.eps[outside] == np.eye(3))
    assert corrector.gamma is None
    assert np.all(corrector.cell_element[outside] == -1)


def test_corrector_homogeneous_cell(mesh, geom, mats, wave):
    """
    A cell without inclusion leaves the homogenized field unchanged.
    """
    cell = build_cell_mesh(geom)
    cell.tags = np.full(cell.n_elements, HOST)
    tensors, cells = homogenize(cell, mats)
    E0 = solve_homogenized_maxwell(mesh, tensors, wave, mats)
    corrected = apply_corrector(E0, cells, geom)
    assert corrected.dofs == pytest.approx(E0.E, abs=1e-12)
    assert corrected.omega == OMEGA


def test_current_corrector_needs_curl(mesh, scalar, geom, wave, mats):
    """
    The current corrector needs the curl cell functions.
    """
    tensors, cells = scalar
    E0 = solve_homogenized_maxwell(mesh, tensors, wave, mats)
    with pytest.raises(ValueError):
        apply_current_corrector(E0, cells, geom)


def test_single_factorization(result, geom):
    """
    All particles share one local matrix, factorized once.
    """
    stats = result.stats
    assert stats['fingerprints_equal']
    assert stats['factorizations_local'] == 1
    assert stats['cache_misses'] == 1
    assert stats['cache_hits'] == geom.n_particles - 1
    assert stats['local_solves'] == geom.n_particles
    assert stats['local_elements'] < stats['homogenized_elements']


def test_shared_cache_across_runs(mesh, scalar, wave, mats):
    """
    A second run at the same frequency reuses the cached factorization.
    """
    tensors, cells = scalar
    cache = FactorizationCache()
    modified_multiscale(mesh, cells, tensors, wave, mats, cache=cache)
    second = modified_multiscale(mesh, cells, tensors, wave, mats,
                                 cache=cache)
    assert second.stats['factorizations_local'] == 1
    assert cache.hits == 2 * mesh.geometry.n_particles - 1


def test_local_boundary_conditions(result, mesh):
    """
    The local corrections vanish tangentially and the local currents
    normally on the particle boundary.
    """
    for loc in result.locals_:
        sub, _ = extract_particle_submesh(mesh, loc.particle)
        assert np.all(loc.E_tilde[sub.boundary_edges] == 0)
        assert np.all(loc.J[sub.boundary_faces] == 0)
        assert np.abs(loc.J).max() > 0


def test_stitched_fields(result, mesh):
    """
    E^M equals the corrected field away from the particles and J^M lives
    on the metal only.
    """
    solution = result.solution
    inside = np.unique(np.concatenate(
        [loc.embedding.edges for loc in result.locals_]))
    outside = np.setdiff1d(np.arange(mesh.n_edges), inside)
    assert np.array_equal(solution.E[outside],
                          result.corrected.dofs[outside])
    metal = mesh.tags == METAL
    assert np.array_equal(solution.current_mask, metal)
    faces = np.unique(mesh.tet_faces[metal])
    others = np.setdiff1d(np.arange(mesh.n_faces), faces)
    assert np.all(solution.J[others] == 0)
    assert solution.system == 'modified-multiscale'


def test_stitch_rejects_overlap_and_gaps(result):
    """
    Overlapping particles and uncovered metal are rejected.
    """
    locals_ = result.locals_
    with pytest.raises(ValueError):
        stitch_solution(result.corrected, locals_ + locals_[:1])
    with pytest.raises(ValueError):
        stitch_solution(result.corrected, locals_[:1])


def test_local_frequency_check(mesh, result, mats):
    """
    The local solver refuses a corrected field of another frequency.
    """
    solver = ParticleSolver(mesh, mats, 0.5)
    with pytest.raises(ValueError):
        solver.solve_all(result.corrected)


def test_original_multiscale(mesh, cell, geom, wave, mats):
    """
    The original multiscale approach corrects both E and J.
    """
    tensors, cells = homogenize(cell, mats, omega=OMEGA,
                                lam=1000 * mats.gamma, curl=True)
    out = original_multiscale(mesh, cells, tensors, wave, mats)
    assert out.corrected_current is not None
    assert np.array_equal(out.solution.current_mask, mesh.in_array)
    assert np.abs(out.solution.J).max() > 0
    assert out.solution.lam == pytest.approx(1000 * mats.gamma)
    outside = ~mesh.in_array
    assert np.abs(out.corrected_current.vectors[outside]).max() <= 1e-12


def test_errors_phase_invariant(mesh, scalar, wave, mats):
    """
    Rotating the phase of the incident wave leaves every relative error
    unchanged.
    """
    tensors, cells = scalar
    coeffs = build_coefficient_field(mesh, mats)
    reports = []
    for incident in (wave, wave.with_phase(1.1)):
        reference = solve_original(mesh, coeffs, incident, mats)
        out = modified_multiscale(mesh, cells, tensors, incident, mats)
        reports.append(error_report(reference, out.homogenized,
                                    out.corrected, out.solution))
    first, rotated = reports
    for key in ('E0', 'E0_eta', 'EM', 'JM'):
        assert getattr(rotated, key) == pytest.approx(getattr(first, key),
                                                      rel=0, abs=1e-10)


@pytest.mark.slow
def test_factorization_reuse_pays_off(mats):
    """
    One factorization and eight solves beat eight factorizations of a
    particle matrix with at least 5000 unknowns.
    """
    geom = ArrayGeometry(inclusion=Inclusion(radius=0.4), eta=1.0,
                         cell_resolution=12, vacuum_padding=1)
    mesh = tag_subdomains(build_macro_mesh(geom), geom)
    solver = ParticleSolver(mesh, mats, OMEGA)
    sub, _ = solver.particles[0]
    system = solver.local_system(sub)
    assert system.n_free >= 5000
    rhs = np.ones(system.n_free, dtype=complex)

    start = time.perf_counter()
    lu = factorize(system.matrix)
    for _ in range(8):
        lu.solve(rhs)
    shared = time.perf_counter() - start

    start = time.perf_counter()
    for _ in range(8):
        factorize(system.matrix).solve(rhs)
    independent = time.perf_counter() - start
    assert independent > 1.5 * shared


@pytest.mark.slow
def test_modified_improves_corrected_field(mesh, scalar, wave, mats):
    """
    The local solves bring the multiscale field closer to the reference
    than the corrected homogenized field.
    """
    tensors, cells = scalar
    reference = solve_original(mesh, build_coefficient_field(mesh, mats),
                               wave, mats)
    out = modified_multiscale(mesh, cells, tensors, wave, mats)
    report = error_report(reference, out.homogenized, out.corrected,
                          out.solution)
    assert report.EM <= report.E0_eta
    assert 0 < report.JM < 0.5, 'J error {:.3f}'.format(report.JM)
