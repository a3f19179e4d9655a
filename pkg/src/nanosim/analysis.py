# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Error norms, convergence studies and cost reports. Tabular results are
pandas DataFrames, one row per frequency, extension parameter or stage.
"""

from dataclasses import dataclass, field, asdict
import logging
import time

import numpy as np
import pandas as pd

from .fem import assemble_form, edge_interpolant, mesh_kernels
from .homog import homogenize
from .macro import (solve_extended, solve_homogenized_coupled,
                    solve_homogenized_maxwell, solve_original)
from .mesh import KUHN_PATHS
from .model import HOST, METAL, build_coefficient_field

logger = logging.getLogger(__name__)


class NormOperators:
    """
    Matrices of the H_T(curl) norm on a mesh and of the H(div) norm on an
    element set. Built on first use and cached on the mesh.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        cache = mesh.cache.setdefault('norms', {})
        if 'mass_edge' not in cache:
            cache['mass_edge'] = assemble_form(mesh, 'mass_edge')
            cache['curlcurl'] = assemble_form(mesh, 'curlcurl')
            cache['boundary'] = assemble_form(mesh, 'impedance_boundary')
        self._cache = cache

    @property
    def mass(self):
        return self._cache['mass_edge']

    @property
    def curlcurl(self):
        return self._cache['curlcurl']

    @property
    def boundary(self):
        return self._cache['boundary']

    def hdiv(self, mask=None):
        """
        (mass, divdiv) of the face functions over the elements in mask.
        """
        key = 'hdiv' if mask is None else 'hdiv_' + _mask_key(mask)
        if key not in self._cache:
            self._cache[key] = (
                assemble_form(self.mesh, 'mass_face', mask=mask),
                assemble_form(self.mesh, 'divdiv', mask=mask))
        return self._cache[key]


def _mask_key(mask):
    return np.packbits(np.asarray(mask, dtype=bool)).tobytes().hex()


def _quadratic(matrix, x):
    return float(np.sqrt(abs(np.vdot(x, matrix @ x))))


def norm_Hcurl_T(mesh, E):
    """
    H_T(curl) norm of an edge field,

    .. math::
        \\|u\\| = \\|u\\|_{L^2} + \\|\\nabla\\times u\\|_{L^2}
        + \\|u_T\\|_{L^2(\\partial\\Omega)}.

    :param mesh: TetMesh.
    :param E: Edge DOF vector.
    :return: float
    """
    ops = NormOperators(mesh)
    E = np.asarray(E)
    return _quadratic(ops.mass, E) + _quadratic(ops.curlcurl, E) \
        + _quadratic(ops.boundary, E)


def norm_Hdiv(mesh, J, mask=None):
    """
    H(div) norm ||u|| + ||div u|| of a face field over the elements in mask
    (default: all elements).
    """
    mass, divdiv = NormOperators(mesh).hdiv(mask)
    J = np.asarray(J)
    return _quadratic(mass, J) + _quadratic(divdiv, J)


def norm_L2_face(mesh, J, mask=None):
    mass, _ = NormOperators(mesh).hdiv(mask)
    return _quadratic(mass, np.asarray(J))


def _relative(difference, reference):
    if reference == 0:
        return 0.0 if difference == 0 else float('inf')
    return difference / reference


@dataclass
class ErrorReport:
    """
    Relative errors of the multiscale fields against the reference solution
    at one frequency. E errors are in H_T(curl) over the domain, the J
    error is in H(div) over the metal elements.
    """
    omega: float
    E0: float
    E0_eta: float
    EM: float
    JM: float
    mesh_id: str = None
    timings: dict = field(default_factory=dict)

    def to_row(self):
        row = asdict(self)
        row.update(row.pop('timings'))
        return row


def error_report(reference, homogenized, corrected, stitched):
    """
    Compares the fields of the modified multiscale approach with the
    reference solution of the original coupled system on the same mesh.

    :param reference: FieldSolution of solve_original.
    :param homogenized: FieldSolution E0 of the homogenized problem.
    :param corrected: CorrectedField E0_eta.
    :param stitched: FieldSolution (E^M, J^M).
    :return: ErrorReport
    """
    mesh = reference.mesh
    metal = mesh.tags == METAL
    ref_E = norm_Hcurl_T(mesh, reference.E)
    ref_J = norm_Hdiv(mesh, reference.J, metal)

    def e_error(E):
        return _relative(norm_Hcurl_T(mesh, E - reference.E), ref_E)

    return ErrorReport(
        omega=reference.omega,
        E0=e_error(homogenized.E),
        E0_eta=e_error(corrected.dofs),
        EM=e_error(stitched.E),
        JM=_relative(norm_Hdiv(mesh, stitched.J - reference.J, metal),
                     ref_J),
        mesh_id=mesh.fingerprint)


def error_table(reports):
    """
    DataFrame with one row per ErrorReport.
    """
    return pd.DataFrame([r.to_row() for r in reports])


def fit_slope(x, y, decades=1.0):
    """
    Least-squares slope of log10 y against log10 x over the points whose
    x lies in the largest `decades` decades of the data.

    :return: float
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError('Slope fitting needs at least two positive points')
    keep = x >= x.max() / 10 ** decades * (1 - 1e-12)
    if len(np.unique(x[keep])) < 2:
        keep = np.ones(len(x), dtype=bool)
    slope, _ = np.polyfit(np.log10(x[keep]), np.log10(y[keep]), 1)
    return float(slope)


def extension_convergence_study(mesh, mats, wave, lams, reference=None):
    """
    Errors of the extended system against the original system over a sweep
    of the extension parameter,

    .. math::
        err(\\lambda) = \\|E_\\eta - E_{\\eta,\\lambda}\\|_{H_T(curl)}
        + \\|J_\\eta - J_{\\eta,\\lambda}\\|_{H(div, metal)},

    together with the L2 norm of the extended current on the host.

    :param mesh: Tagged macro mesh.
    :param mats: ScaledMaterials.
    :param wave: IncidentWave.
    :param lams: Extension parameters, at least three.
    :param reference: FieldSolution of solve_original, computed if None.
    :return: (DataFrame, dict with the fitted slopes)
    """
    lams = [float(lam) for lam in lams]
    if len(lams) < 3:
        raise ValueError('The extension study needs at least 3 values of '
                         'the extension parameter')
    if reference is None:
        reference = solve_original(mesh, build_coefficient_field(mesh, mats),
                                   wave, mats)
    metal = mesh.tags == METAL
    host = mesh.tags == HOST

    rows = []
    for lam in lams:
        ext = solve_extended(mesh, build_coefficient_field(mesh, mats, lam),
                             wave, mats)
        err_E = norm_Hcurl_T(mesh, reference.E - ext.E)
        err_J = norm_Hdiv(mesh, reference.J - ext.J, metal)
        rows.append({'lam': lam, 'lam_over_gamma': lam / mats.gamma,
                     'err_E': err_E, 'err_J': err_J, 'err': err_E + err_J,
                     'host_current': norm_L2_face(mesh, ext.J, host),
                     'dofs': ext.stats['dofs'],
                     'time': ext.stats['factor_time']
                     + ext.stats['solve_time']})
        logger.info('lam %.3g: err %.3e', lam, rows[-1]['err'])

    table = pd.DataFrame(rows)
    slopes = {'slope': fit_slope(table['lam'], table['err']),
              'slope_all': fit_slope(table['lam'], table['err'],
                                     decades=np.inf)}
    if np.all(table['host_current'] > 0):
        slopes['host_current_slope'] = fit_slope(
            table['lam'], table['host_current'], decades=np.inf)
    return table, slopes


def alpha_study(cell_mesh, mesh, mats, wave, lams, threads=1):
    """
    The homogenized current coefficient over a sweep of the extension
    parameter: alpha (symmetrized and raw), the L2 norm of the homogenized
    current on the array, its product with alpha and the H_T(curl)
    distance between the homogenized coupled field and the homogenized
    Maxwell field.

    :return: DataFrame
    """
    scalar, _ = homogenize(cell_mesh, mats, threads=threads)
    E0 = solve_homogenized_maxwell(mesh, scalar, wave, mats)
    rows = []
    for lam in lams:
        tensors, _ = homogenize(cell_mesh, mats, omega=wave.omega, lam=lam,
                                curl=True, threads=threads)
        coupled = solve_homogenized_coupled(mesh, tensors, wave, mats)
        j_norm = norm_L2_face(mesh, coupled.J, coupled.current_mask)
        rows.append({'lam': float(lam), 'lam_over_gamma': lam / mats.gamma,
                     'alpha': tensors.alpha, 'alpha_raw': tensors.alpha_raw,
                     'current': j_norm, 'current_alpha': j_norm
                     * tensors.alpha,
                     'field_difference': norm_Hcurl_T(mesh,
                                                      coupled.E - E0.E)})
    return pd.DataFrame(rows)


def cost_report(stages, reference='original'):
    """
    Table of elements, DOFs and wall time per stage.

    :param stages: Dictionary stage name -> dict with keys elements, dofs
        and time. Stages that did not run are left out.
    :param reference: Name of the direct reference stage.
    :return: (DataFrame, ratio of the multiscale total to the reference
        time, None without a reference stage)
    """
    table = pd.DataFrame([
        {'stage': name, 'elements': int(s.get('elements', 0)),
         'dofs': int(s.get('dofs', 0)), 'time': float(s.get('time', 0.0))}
        for name, s in stages.items()])
    if reference not in stages:
        return table, None
    multiscale = table.loc[table['stage'] != reference, 'time'].sum()
    ref_time = stages[reference]['time']
    ratio = float(multiscale / ref_time) if ref_time > 0 else None
    return table, ratio


def locate_points(mesh, points):
    """
    Element of a structured box mesh that contains every point. Points on
    shared faces go to one of the neighbours.

    :return: Integer array of element ids.
    """
    if mesh.resolution is None or mesh.spacing is None:
        raise ValueError('Point location needs a structured mesh')
    points = np.atleast_2d(np.asarray(points, dtype=float))
    origin = mesh.vertices[0]
    res = mesh.resolution
    u = (points - origin) / mesh.spacing
    hexes = np.clip(np.floor(u).astype(np.int64), 0, res - 1)
    local = u - hexes
    if np.any(local < -1e-9) or np.any(local > 1 + 1e-9):
        raise ValueError('Point outside the mesh')
    order = np.argsort(-local, axis=1, kind='stable')
    lookup = {path: i for i, path in enumerate(KUHN_PATHS)}
    kuhn = np.array([lookup[tuple(o)] for o in order])
    flat = (hexes[:, 0] * res[1] + hexes[:, 1]) * res[2] + hexes[:, 2]
    return flat * len(KUHN_PATHS) + kuhn


def evaluate_edge_field(mesh, E, points, elements=None):
    """
    Values of an edge field at points, array (n, 3).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if elements is None:
        elements = locate_points(mesh, points)
    k = mesh_kernels(mesh)
    centers = mesh.barycenters[elements]
    bary = 0.25 + np.einsum('tpx,tx->tp', k.grads[elements],
                            points - centers)
    basis = np.einsum('tp,tapx->tax', bary, k.whitney[elements])
    return np.einsum('ta,tax->tx', np.asarray(E)[mesh.tet_edges[elements]],
                     basis)


def line_profile(mesh, fields, start=None, stop=None, samples=101):
    """
    Samples element vector fields along a straight line, by default the
    diagonal of the scatterer.

    :param mesh: Tagged structured mesh.
    :param fields: Dictionary name -> array (n_elements, 3).
    :param start: First point of the line.
    :param stop: Last point of the line.
    :param samples: Number of points.
    :return: DataFrame with arc length, position, element, tag and the
        real and imaginary components of every field.
    """
    if start is None or stop is None:
        if mesh.geometry is None:
            raise ValueError('A line needs end points on untagged meshes')
        ext = mesh.geometry.scatterer_extents
        start = ext[:, 0] if start is None else start
        stop = ext[:, 1] if stop is None else stop
    start, stop = np.asarray(start, float), np.asarray(stop, float)
    s = np.linspace(0.0, 1.0, samples)
    points = start + s[:, None] * (stop - start)
    elements = locate_points(mesh, points)

    table = pd.DataFrame({
        's': s * np.linalg.norm(stop - start),
        'x': points[:, 0], 'y': points[:, 1], 'z': points[:, 2],
        'element': elements
    })
    if mesh.tags is not None:
        table['tag'] = mesh.tags[elements]
    for name, values in fields.items():
        values = np.asarray(values)[elements]
        for i, axis in enumerate('xyz'):
            table['{}_{}_re'.format(name, axis)] = values[:, i].real
            table['{}_{}_im'.format(name, axis)] = values[:, i].imag
    return table


def energy_identity_defect(solution):
    """
    Relative defect of the discrete energy identity of the field equation
    tested with the solution itself,

    .. math::
        \\omega Z \\|E_T\\|^2_{\\partial\\Omega} + \\omega\\,Re(J, E)
        + Im\\langle g, E_T\\rangle = 0.

    :param solution: FieldSolution of a global solve with its load.
    :return: float
    """
    if solution.load is None:
        raise ValueError('The solution carries no boundary load')
    mesh, E, omega = solution.mesh, solution.E, solution.omega
    boundary = NormOperators(mesh).boundary
    trace = omega * solution.impedance * np.vdot(E, boundary @ E).real
    current = 0.0
    if solution.has_current:
        coupling = assemble_form(mesh, 'coupling_edge_face',
                                 mask=solution.current_mask)
        current = omega * np.vdot(E, coupling @ solution.J).real
    load = np.vdot(E, solution.load).imag
    scale = abs(trace) + abs(current) + abs(load)
    if scale == 0:
        return 0.0
    return float(abs(trace + current + load) / scale)


def prolong_edge_field(coarse, E, fine):
    """
    Edge DOFs on a nested finer mesh of a field given on a coarse mesh.
    """
    def values(points):
        return evaluate_edge_field(coarse, E, points)

    return edge_interpolant(fine, values)


def self_convergence(run, levels):
    """
    Runs a solver on successively refined meshes and measures the
    H_T(curl) difference of consecutive solutions on the finer mesh.

    :param run: Callable level -> (mesh, E) for nested meshes.
    :param levels: Increasing refinement levels, at least two.
    :return: DataFrame with the difference and the ratio of consecutive
        differences per level.
    """
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError('Self-convergence needs at least two levels')
    rows, previous = [], None
    for level in levels:
        start = time.perf_counter()
        mesh, E = run(level)
        row = {'level': level, 'edges': mesh.n_edges,
               'time': time.perf_counter() - start, 'difference': np.nan}
        if previous is not None:
            row['difference'] = norm_Hcurl_T(
                mesh, E - prolong_edge_field(previous[0], previous[1], mesh))
        rows.append(row)
        previous = (mesh, E)
    table = pd.DataFrame(rows)
    table['ratio'] = table['difference'].shift(1) / table['difference']
    return table
