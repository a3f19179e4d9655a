# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Test file for the norms, error reports and studies
"""

from nanosim.analysis import (ErrorReport, alpha_study, cost_report,
                              error_report, error_table,
                              evaluate_edge_field,
                              extension_convergence_study, fit_slope,
                              line_profile, locate_points, norm_Hcurl_T,
                              norm_Hdiv, norm_L2_face, prolong_edge_field,
                              self_convergence)
from nanosim.fem import edge_interpolant, face_interpolant
from nanosim.macro import (IncidentWave, incident_boundary_data,
                           solve_coupled, solve_original)
from nanosim.mesh import (ArrayGeometry, Inclusion, build_box_mesh,
                          build_cell_mesh, build_macro_mesh,
                          tag_reference_cell, tag_subdomains)
from nanosim.model import (MaterialSet, build_coefficient_field,
                           nondimensionalize)
from nanosim.multiscale import CorrectedField

import numpy as np
import pytest

UNIT = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]
A = np.array([0.3, -0.2, 0.5])
B = np.array([0.1, 0.4, -0.7])


def whitney_field(points):
    """
    a + b x x, reproduced exactly by the edge elements.
    """
    return A + np.cross(B, points)


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
    return IncidentWave(0.75)


def test_norm_constant_edge_field():
    """
    The constant field e1 on the unit cube has L2 norm 1, no curl and a
    tangential trace of norm 2.
    """
    cube = build_box_mesh(UNIT, 2)
    E = edge_interpolant(cube, lambda x: np.tile([1.0, 0, 0], (len(x), 1)))
    assert norm_Hcurl_T(cube, E) == pytest.approx(3.0)
    assert 'norms' in cube.cache


def test_norm_linear_face_field():
    """
    The field x on the unit cube has L2 norm 1 and divergence 3.
    """
    cube = build_box_mesh(UNIT, 2)
    J = face_interpolant(cube, lambda x: x)
    assert norm_Hdiv(cube, J) == pytest.approx(4.0)
    assert norm_L2_face(cube, J) == pytest.approx(1.0)
    lower = cube.barycenters[:, 2] < 0.5
    assert norm_L2_face(cube, J, lower) < 1.0


def test_fit_slope():
    """
    The slope is fitted over the largest decade only.
    """
    x = np.array([1.0, 10.0, 100.0, 1000.0])
    y = np.array([1.0, 1.0, 1e-2, 1e-3])
    assert fit_slope(x, y) == pytest.approx(-1.0)
    assert fit_slope(x, x ** -2, decades=np.inf) == pytest.approx(-2.0)


@pytest.mark.parametrize('x, y', [
    ([1.0], [1.0]),
    ([1.0, 10.0], [1.0, 0.0]),
    ([-1.0, 10.0], [1.0, 2.0]),
])
def test_fit_slope_invalid(x, y):
    """
    Fewer than two points and non-positive values are rejected.
    """
    with pytest.raises(ValueError):
        fit_slope(x, y)


def test_error_report_zero(mesh, wave, mats):
    """
    The reference compared with itself has no error.
    """
    reference = solve_original(mesh, build_coefficient_field(mesh, mats),
                               wave, mats)
    corrected = CorrectedField(mesh=mesh, vectors=None, dofs=reference.E,
                               omega=wave.omega)
    report = error_report(reference, reference, corrected, reference)
    assert (report.E0, report.E0_eta, report.EM, report.JM) == (0, 0, 0, 0)
    assert report.mesh_id == mesh.fingerprint
    perturbed = corrected.dofs * 1.1
    moved = error_report(reference, reference,
                         CorrectedField(mesh, None, perturbed, wave.omega),
                         reference)
    assert moved.E0_eta == pytest.approx(0.1)


def test_error_table():
    """
    Timings become extra columns of the error table.
    """
    reports = [ErrorReport(omega=w, E0=0.3, E0_eta=0.2, EM=0.05, JM=0.1,
                           timings={'modified_time': 1.0})
               for w in (0.5, 0.6)]
    table = error_table(reports)
    assert len(table) == 2
    assert {'omega', 'EM', 'modified_time'} <= set(table.columns)


def test_cost_report():
    """
    The cost ratio is the multiscale time over the reference time.
    """
    stages = {'original': {'elements': 100, 'dofs': 500, 'time': 4.0},
              'homogenized': {'elements': 100, 'dofs': 300, 'time': 1.0},
              'modified': {'elements': 20, 'dofs': 80, 'time': 1.0}}
    table, ratio = cost_report(stages)
    assert ratio == pytest.approx(0.5)
    assert list(table['stage']) == ['original', 'homogenized', 'modified']
    del stages['original']
    _, ratio = cost_report(stages)
    assert ratio is None


def test_locate_points():
    """
    Barycenters are located in their own element.
    """
    box = build_box_mesh([[0.0, 2.0], [-1.0, 1.0], [0.0, 3.0]], (2, 3, 4))
    elements = locate_points(box, box.barycenters)
    assert np.array_equal(elements, np.arange(box.n_elements))
    with pytest.raises(ValueError):
        locate_points(box, [[5.0, 0.0, 0.0]])


def test_evaluate_edge_field():
    """
    Whitney fields are evaluated exactly at arbitrary points.
    """
    box = build_box_mesh(UNIT, 3)
    E = edge_interpolant(box, whitney_field)
    points = np.random.default_rng(3).random((20, 3))
    values = evaluate_edge_field(box, E, points)
    assert np.abs(values - whitney_field(points)).max() <= 1e-12


def test_prolongation_and_self_convergence():
    """
    A Whitney field prolonged to a finer mesh equals its interpolant there,
    so consecutive levels do not differ.
    """
    coarse = build_box_mesh(UNIT, 2)
    fine = build_box_mesh(UNIT, 4)
    E = edge_interpolant(coarse, whitney_field)
    prolonged = prolong_edge_field(coarse, E, fine)
    assert np.abs(prolonged - edge_interpolant(fine, whitney_field)).max() \
        <= 1e-12

    def run(level):
        box = build_box_mesh(UNIT, level)
        return box, edge_interpolant(box, whitney_field)

    table = self_convergence(run, [1, 2, 4])
    assert np.isnan(table['difference'][0])
    assert table['difference'][1:].max() <= 1e-10
    assert list(table['level']) == [1, 2, 4]
    with pytest.raises(ValueError):
        self_convergence(run, [2])


def test_line_profile(mesh):
    """
    The default line runs along the diagonal of the scatterer and crosses
    the metal.
    """
    fields = {'E': np.ones((mesh.n_elements, 3)) * (1 + 2j)}
    table = line_profile(mesh, fields, samples=11)
    assert len(table) == 11
    assert table['s'].iloc[-1] == pytest.approx(np.sqrt(3) * 2.0)
    assert {'E_x_re', 'E_z_im', 'tag'} <= set(table.columns)
    assert np.all(table['E_y_im'] == 2.0)
    assert 2 in set(table['tag'])


def test_line_profile_needs_end_points():
    """
    Untagged meshes need explicit end points.
    """
    box = build_box_mesh(UNIT, 2)
    with pytest.raises(ValueError):
        line_profile(box, {})
    table = line_profile(box, {}, start=[0, 0, 0], stop=[1, 0, 0],
                         samples=5)
    assert 'tag' not in table.columns


def test_extension_study(mesh, wave, mats):
    """
    The extended solutions approach the original solution as the extension
    parameter grows.
    """
    lams = [ratio * mats.gamma for ratio in (10, 100, 1000, 10000)]
    table, slopes = extension_convergence_study(mesh, mats, wave, lams)
    assert list(table['lam_over_gamma']) == pytest.approx([10, 100, 1e3, 1e4])
    assert np.all(np.diff(table['err']) < 0)
    assert slopes['slope'] <= -0.5
    assert slopes['host_current_slope'] <= -0.5
    with pytest.raises(ValueError):
        extension_convergence_study(mesh, mats, wave, lams[:2])


def test_alpha_study(geom, mesh, wave, mats):
    """
    alpha grows with the extension parameter.
    """
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    table = alpha_study(cell, mesh, mats, wave,
                        [10 * mats.gamma, 1000 * mats.gamma])
    assert {'alpha', 'alpha_raw', 'current', 'current_alpha',
            'field_difference'} <= set(table.columns)
    assert table['alpha'][1] > table['alpha'][0]
    assert np.all(table['current'] > 0)


@pytest.mark.slow
def test_self_convergence_rate(mats):
    """
    The absorbing boundary solve of a plane wave in vacuum converges at
    first order in the H_T(curl) norm.
    """
    wave = IncidentWave(0.5)

    def run(level):
        box = build_box_mesh([[0.0, 2.0]] * 3, level)
        load = incident_boundary_data(wave, box, mats)
        solution = solve_coupled(box, wave.omega, 1.0, 1.0, mats.impedance,
                                 load)
        return box, solution.E

    table = self_convergence(run, [2, 4, 8])
    assert 1.6 <= table['ratio'].iloc[2] <= 2.6


@pytest.mark.slow
def test_alpha_study_bounds(geom, mesh, wave, mats):
    """
    alpha grows, alpha times the homogenized current stays bounded and the
    coupled field approaches the homogenized Maxwell field.
    """
    cell = tag_reference_cell(build_cell_mesh(geom), geom)
    lams = [10 * mats.gamma, 100 * mats.gamma, 1000 * mats.gamma,
            10000 * mats.gamma]
    table = alpha_study(cell, mesh, mats, wave, lams)
    assert np.all(np.diff(table['alpha']) > 0)
    product = table['current_alpha']
    assert product.max() <= 10 * product.min()
    assert np.all(np.diff(table['field_difference']) < 0)
