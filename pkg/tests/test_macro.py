# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Test file for the incident wave and the global solvers
"""

from nanosim.analysis import (energy_identity_defect, locate_points,
                              norm_Hcurl_T)
from nanosim.fem import (edge_interpolant, element_average_edge,
                         element_average_face)
from nanosim.homog import HomogenizedTensors, homogenize
from nanosim.macro import (IncidentWave, effective_coefficients,
                           incident_boundary_data, solve_coupled,
                           solve_extended, solve_homogenized_coupled,
                           solve_homogenized_maxwell, solve_original)
from nanosim.mesh import (ArrayGeometry, Inclusion, build_box_mesh,
                          build_cell_mesh, build_macro_mesh,
                          tag_reference_cell, tag_subdomains)
from nanosim.model import (METAL, MaterialSet, build_coefficient_field,
                           nondimensionalize)

import numpy as np
import pytest

OMEGA = 0.75


@pytest.fixture
def mats():
    return nondimensionalize(MaterialSet.from_names())


@pytest.fixture
def geom():
    return ArrayGeometry(inclusion=Inclusion(radius=0.3), eta=2.0,
                         cell_resolution=4, vacuum_padding=1)


@pytest.fixture
def mesh(geom):
    return tag_subdomains(build_macro_mesh(geom), geom)


@pytest.fixture
def wave():
    return IncidentWave(OMEGA)


def test_wave_normalized():
    """
    Direction and polarization are normalized.
    """
    wave = IncidentWave(0.5, direction=(0, 2, 0), polarization=(3, 0, 0),
                        amplitude=2.0)
    assert wave.direction == pytest.approx([0, 1, 0])
    assert wave.polarization == pytest.approx([1, 0, 0])
    assert wave.to_dict()['amplitude'] == [2.0, 0.0]


@pytest.mark.parametrize('kwargs', [
    {'omega': 0.0},
    {'omega': np.inf},
    {'omega': 1.0, 'polarization': (0, 1, 0)},
    {'omega': 1.0, 'direction': (0, 0, 0)},
    {'omega': 1.0, 'direction': (1, 0)},
])
def test_wave_invalid(kwargs):
    """
    Zero or infinite frequencies, parallel polarizations and bad vectors are
    rejected.
    """
    with pytest.raises(ValueError):
        IncidentWave(**kwargs)


def test_wave_field_and_curl():
    """
    The plane wave has modulus |A| and curl i k d x E.
    """
    wave = IncidentWave(1.0, amplitude=2.0)
    points = np.random.default_rng(0).random((5, 3))
    e = wave.field(points, 1.0)
    assert np.abs(e[:, 0]) == pytest.approx(np.full(5, 2.0))
    assert np.all(e[:, 1:] == 0)
    curl = wave.curl(points, 1.0)
    assert curl[:, 2] == pytest.approx(-1j * e[:, 0])


def test_wave_variants():
    """
    at() changes the frequency, with_phase() rotates the amplitude.
    """
    wave = IncidentWave(1.0)
    assert wave.at(0.5).omega == 0.5
    assert wave.with_phase(np.pi / 2).amplitude == pytest.approx(1j)


def test_zero_amplitude_load(mesh, mats):
    """
    A wave with zero amplitude has no boundary load.
    """
    load = incident_boundary_data(IncidentWave(1.0, amplitude=0.0), mesh,
                                  mats)
    assert np.all(load == 0)


def test_load_conjugate_frequency(mesh, wave, mats):
    """
    Flipping the sign of the frequency conjugates the boundary load.
    """
    load = incident_boundary_data(wave, mesh, mats)
    flipped = incident_boundary_data(wave.at(-OMEGA), mesh, mats)
    assert np.abs(load).max() > 0
    assert np.abs(flipped - np.conj(load)).max() \
        <= 1e-12 * np.abs(load).max()


def test_polarization_swap(mesh, mats):
    """
    Swapping the polarization e_x for e_z permutes the solution on the
    symmetric mesh.
    """
    coeffs = build_coefficient_field(mesh, mats)
    along_x = solve_original(mesh, coeffs, IncidentWave(OMEGA), mats)
    along_z = solve_original(
        mesh, coeffs, IncidentWave(OMEGA, polarization=(0, 0, 1)), mats)
    swap = [2, 1, 0]
    mirror = locate_points(mesh, mesh.barycenters[:, swap])
    assert np.array_equal(mesh.tags[mirror], mesh.tags)

    E_x = element_average_edge(mesh, along_x.E)
    E_z = element_average_edge(mesh, along_z.E)
    assert np.abs(E_z[mirror] - E_x[:, swap]).max() \
        <= 1e-9 * np.abs(E_x).max()
    J_x = element_average_face(mesh, along_x.J)
    J_z = element_average_face(mesh, along_z.J)
    assert np.abs(J_z[mirror] - J_x[:, swap]).max() \
        <= 1e-9 * np.abs(J_x).max()


def plane_wave_error(n, wave, mats):
    box = build_box_mesh([[0.0, 2.0]] * 3, n)
    k = mats.wave_number(wave.omega)
    load = incident_boundary_data(wave, box, mats)
    solution = solve_coupled(box, wave.omega, 1.0, 1.0, mats.impedance,
                             load)
    exact = edge_interpolant(box, lambda x: wave.field(x, k))
    return norm_Hcurl_T(box, solution.E - exact) / norm_Hcurl_T(box, exact)


def test_plane_wave_in_vacuum(mats):
    """
    In vacuum the incident plane wave solves the absorbing boundary
    problem, and the discrete solution converges to it.
    """
    wave = IncidentWave(0.5)
    coarse = plane_wave_error(4, wave, mats)
    fine = plane_wave_error(8, wave, mats)
    assert fine < coarse
    assert fine < 0.1


def test_original_system(mesh, wave, mats):
    """
    The original solve satisfies the energy identity and the hard-wall
    condition on the metal boundary.
    """
    coeffs = build_coefficient_field(mesh, mats)
    solution = solve_original(mesh, coeffs, wave, mats)
    assert solution.system == 'original'
    assert solution.has_current
    metal = mesh.tags == METAL
    assert np.all(solution.J[mesh.interface_faces(metal)] == 0)
    assert np.abs(solution.J).max() > 0
    assert energy_identity_defect(solution) <= 1e-8
    assert solution.stats['dofs'] < mesh.n_edges + mesh.n_faces
    assert solution.mesh_id == mesh.fingerprint


def test_decoupling_limit(mesh, wave, mats):
    """
    Without plasma coupling the current vanishes and E solves pure
    Maxwell.
    """
    off = mats.without_coupling()
    coeffs = build_coefficient_field(mesh, off)
    coupled = solve_original(mesh, coeffs, wave, off)
    load = incident_boundary_data(wave, mesh, off)
    maxwell = solve_coupled(mesh, OMEGA, 1.0 / (off.mu0 * coeffs.mu),
                            off.eps0 * coeffs.eps, off.impedance, load)
    assert np.abs(coupled.J).max() <= 1e-12
    assert norm_Hcurl_T(mesh, coupled.E - maxwell.E) <= \
        1e-10 * norm_Hcurl_T(mesh, maxwell.E)
    assert not maxwell.has_current


def test_extended_system(mesh, wave, mats):
    """
    The extended current lives on the whole scatterer and the energy
    identity still holds.
    """
    coeffs = build_coefficient_field(mesh, mats, lam=100 * mats.gamma)
    solution = solve_extended(mesh, coeffs, wave, mats)
    assert solution.lam == pytest.approx(100 * mats.gamma)
    assert np.array_equal(solution.current_mask, coeffs.current_mask)
    scatterer = coeffs.current_mask
    assert np.all(solution.J[mesh.interface_faces(scatterer)] == 0)
    assert energy_identity_defect(solution) <= 1e-8


def test_system_coefficient_checks(mesh, wave, mats):
    """
    The original solver refuses extended coefficients and vice versa.
    """
    with pytest.raises(ValueError):
        solve_original(mesh, build_coefficient_field(mesh, mats, 1.0),
                       wave, mats)
    with pytest.raises(ValueError):
        solve_extended(mesh, build_coefficient_field(mesh, mats), wave,
                       mats)


def test_effective_coefficients(mesh, mats):
    """
    The homogenized tensors replace the coefficients on the array only.
    """
    eps_hat = np.diag([5.0, 6.0, 7.0])
    tensors = HomogenizedTensors(mu_hat=np.eye(3), eps_hat=eps_hat)
    mu, eps = effective_coefficients(mesh, tensors, mats)
    assert np.all(eps[mesh.in_array] == eps_hat)
    outside = ~mesh.in_array
    assert np.all(eps[outside][:, 0, 0] < 4.0)
    assert mu.shape == (mesh.n_elements, 3, 3)


def test_homogenized_maxwell(mesh, wave, mats, geom):
    """
    The homogenized Maxwell solve has no current.
    """
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    tensors, _ = homogenize(cell, mats)
    solution = solve_homogenized_maxwell(mesh, tensors, wave, mats)
    assert not solution.has_current
    assert np.all(solution.J == 0)
    assert solution.stats['dofs'] == mesh.n_edges


def test_homogenized_coupled(mesh, wave, mats, geom):
    """
    The homogenized coupled solve carries a current on the array and
    checks the frequency of its tensors.
    """
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    tensors, _ = homogenize(cell, mats, omega=OMEGA,
                            lam=100 * mats.gamma, curl=True)
    solution = solve_homogenized_coupled(mesh, tensors, wave, mats)
    assert np.array_equal(solution.current_mask, mesh.in_array)
    assert energy_identity_defect(solution) <= 1e-8
    with pytest.raises(ValueError):
        solve_homogenized_coupled(mesh, tensors, wave.at(0.5), mats)
    scalar, _ = homogenize(cell, mats)
    with pytest.raises(ValueError):
        solve_homogenized_coupled(mesh, scalar, wave, mats)
