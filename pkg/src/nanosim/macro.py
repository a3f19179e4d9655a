# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Global solvers on the whole domain: the original and the extended coupled
systems of the electric field E and the polarization current J, and the
homogenized Maxwell and homogenized coupled systems. Every system is one
monolithic complex sparse solve with the first-order absorbing boundary
condition

.. math::
    (\\mu_0^{-1}\\nabla\\times E)\\times n
    - i\\omega Z (n\\times E)\\times n = g

on the boundary of the domain, Z = sqrt(eps0/mu0).
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np
from scipy import sparse

from .fem import SparseSystem, apply_constraints, assemble_form
from .linsolve import factorize
from .model import build_coefficient_field

logger = logging.getLogger(__name__)


class IncidentWave:
    """
    Plane wave E_inc = A p exp(i k d . x) with k = omega sqrt(eps0 mu0).

    :param omega: Scaled frequency, nonzero. A negative value gives the
        time-reversed wave.
    :param direction: Propagation direction d.
    :param polarization: Polarization p, orthogonal to d.
    :param amplitude: Complex amplitude A.
    """

    def __init__(self, omega, direction=(0.0, 1.0, 0.0),
                 polarization=(1.0, 0.0, 0.0), amplitude=1.0):
        if not np.isfinite(omega) or omega == 0:
            raise ValueError('The frequency must be finite and nonzero')
        self.omega = float(omega)
        self.direction = self._unit(direction, 'direction')
        self.polarization = self._unit(polarization, 'polarization')
        if abs(self.direction @ self.polarization) > 1e-14:
            raise ValueError('Direction and polarization must be '
                             'orthogonal')
        self.amplitude = complex(amplitude)

    @staticmethod
    def _unit(vector, name):
        v = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(v)
        if v.shape != (3,) or norm == 0:
            raise ValueError('{} must be a nonzero 3-vector'.format(name))
        return v / norm

    def at(self, omega):
        """
        The same wave at another frequency.
        """
        return IncidentWave(omega, self.direction, self.polarization,
                            self.amplitude)

    def with_phase(self, phase):
        """
        The same wave with the amplitude rotated by exp(i phase).
        """
        return IncidentWave(self.omega, self.direction, self.polarization,
                            self.amplitude * np.exp(1j * phase))

    def field(self, points, k):
        phase = np.exp(1j * k * (np.asarray(points) @ self.direction))
        return self.amplitude * phase[:, None] * self.polarization

    def curl(self, points, k):
        return 1j * k * np.cross(self.direction, self.field(points, k))

    def to_dict(self):
        return {'omega': self.omega, 'direction': self.direction.tolist(),
                'polarization': self.polarization.tolist(),
                'amplitude': [self.amplitude.real, self.amplitude.imag]}


@dataclass
class FieldSolution:
    """
    Solution of one global system. E holds the edge DOFs over the domain,
    J the face DOFs over the mesh with zeros outside current_mask.
    """
    mesh: object
    E: np.ndarray
    J: np.ndarray
    system: str
    omega: float
    lam: float = None
    current_mask: np.ndarray = None
    load: np.ndarray = None
    impedance: float = 1.0
    stats: dict = field(default_factory=dict)

    @property
    def mesh_id(self):
        return self.mesh.fingerprint

    @property
    def has_current(self):
        return self.current_mask is not None and bool(self.current_mask.any())


@dataclass
class CurrentBlock:
    """
    Element data of the current equation

    .. math::
        (\\beta^2 \\nabla\\cdot J, \\nabla\\cdot w) - (\\Gamma J, w)
        + i\\omega\\,\\omega_p^2\\varepsilon_0 (E, w) = 0,

    which is the current equation of the scaled system multiplied by
    omega_p^2 eps0. gamma holds Gamma as element scalars or 3 x 3 tensors.
    """
    mask: np.ndarray
    beta2: np.ndarray
    gamma: np.ndarray
    plasma_weight: float


def incident_boundary_data(wave, mesh, mats, faces=None):
    """
    Assembles the boundary load <g, u_T> of the absorbing condition for
    the incident wave,

    .. math::
        g = \\mu_0^{-1}(\\nabla\\times E^{inc})\\times n
            - i\\omega Z (n\\times E^{inc})\\times n.

    :param wave: IncidentWave.
    :param mesh: TetMesh.
    :param mats: ScaledMaterials with the vacuum constants.
    :param faces: Boundary faces, default the boundary of the mesh.
    :return: Complex vector over the edges.
    """
    k = mats.wave_number(wave.omega)
    omega, admittance = wave.omega, mats.impedance
    if wave.amplitude == 0:
        return np.zeros(mesh.n_edges, dtype=complex)

    def g(points, normals):
        e = wave.field(points, k)
        curl = wave.curl(points, k)
        tangential = np.cross(np.cross(normals, e), normals)
        return np.cross(curl, normals) / mats.mu0 \
            - 1j * omega * admittance * tangential

    return assemble_form(mesh, 'load_from_field', faces=faces, field=g)


def _maxwell_block(mesh, omega, curl_coeff, mass_coeff, admittance):
    stiffness = assemble_form(mesh, 'curlcurl', curl_coeff)
    mass = assemble_form(mesh, 'mass_edge', mass_coeff)
    boundary = assemble_form(mesh, 'impedance_boundary')
    return stiffness - omega ** 2 * mass - 1j * omega * admittance * boundary


def assemble_coupled(mesh, omega, curl_coeff, mass_coeff, admittance,
                     current=None):
    """
    Block matrix of the coupled system in the unknowns [E, J],

    .. math::
        \\begin{pmatrix} K - \\omega^2 M - i\\omega Z B & -i\\omega C \\\\
        i\\omega\\,\\omega_p^2\\varepsilon_0 C^T & D - M_\\Gamma
        \\end{pmatrix}.

    The current blocks are integrated over current.mask only.

    :return: (matrix, faces eliminated by the hard-wall condition)
    """
    a_ee = _maxwell_block(mesh, omega, curl_coeff, mass_coeff, admittance)
    if current is None or not np.any(current.mask):
        return a_ee.tocsr(), None

    mask = current.mask
    coupling = assemble_form(mesh, 'coupling_edge_face', mask=mask)
    a_jj = assemble_form(mesh, 'divdiv', current.beta2, mask=mask) \
        - assemble_form(mesh, 'mass_face', current.gamma, mask=mask)
    matrix = sparse.bmat([
        [a_ee, -1j * omega * coupling],
        [1j * omega * current.plasma_weight * coupling.T, a_jj]],
        format='csr')
    free = mesh.interior_faces(mask)
    walls = np.setdiff1d(np.arange(mesh.n_faces), free)
    return matrix, walls


def solve_coupled(mesh, omega, curl_coeff, mass_coeff, admittance, load,
                  current=None, name='coupled', lam=None):
    """
    Assembles and solves one global system and wraps the result.
    """
    start = time.perf_counter()
    matrix, walls = assemble_coupled(mesh, omega, curl_coeff, mass_coeff,
                                     admittance, current)
    rhs = np.zeros(matrix.shape[0], dtype=complex)
    rhs[:mesh.n_edges] = load
    system = SparseSystem.from_full(matrix, rhs)
    if walls is not None and len(walls):
        system = apply_constraints(system, 'essential-zero-normal',
                                   indices=walls + mesh.n_edges)
    assemble_time = time.perf_counter() - start

    solver = factorize(system)
    x = system.expand(solver.solve(system.rhs))
    E = x[:mesh.n_edges]
    J = np.zeros(mesh.n_faces, dtype=complex)
    mask = None
    if walls is not None:
        J = x[mesh.n_edges:]
        mask = current.mask.copy()

    stats = {'elements': mesh.n_elements, 'dofs': system.n_free,
             'assemble_time': assemble_time,
             'factor_time': solver.factor_time,
             'solve_time': solver.solve_time}
    logger.info('%s system at omega %.4g: %d DOFs, factorized in %.3f s',
                name, omega, system.n_free, solver.factor_time)
    return FieldSolution(mesh=mesh, E=E, J=J, system=name, omega=omega,
                         lam=lam, current_mask=mask, load=load,
                         impedance=admittance, stats=stats)


def _current_block(coeffs, omega, mats):
    return CurrentBlock(mask=coeffs.current_mask, beta2=coeffs.beta2,
                        gamma=coeffs.gamma_weight(omega),
                        plasma_weight=mats.plasma_weight)


def solve_original(mesh, coeffs, wave, mats):
    """
    Solves the original coupled system with the current on the metal
    elements and the hard-wall condition n . J = 0 on the metal boundary.

    .. math::
        (\\mu^{-1}\\nabla\\times E, \\nabla\\times u)
        - \\omega^2(\\varepsilon E, u) - i\\omega Z\\langle E_T, u_T\\rangle
        - i\\omega (J, u) = \\langle g, u_T\\rangle

    :param mesh: Tagged macro mesh.
    :param coeffs: CoefficientField of the original system (lam None).
    :param wave: IncidentWave.
    :param mats: ScaledMaterials.
    :return: FieldSolution
    """
    if coeffs.lam is not None:
        raise ValueError('solve_original takes the coefficients without '
                         'extension')
    omega = wave.omega
    load = incident_boundary_data(wave, mesh, mats)
    return solve_coupled(mesh, omega, 1.0 / (mats.mu0 * coeffs.mu),
                         mats.eps0 * coeffs.eps, mats.impedance, load,
                         _current_block(coeffs, omega, mats),
                         name='original')


def solve_extended(mesh, coeffs, wave, mats):
    """
    Solves the extended coupled system, in which the current lives on the
    whole scatterer and the host carries gamma = beta^2 = lam.

    :param coeffs: CoefficientField with lam > 0.
    :return: FieldSolution
    """
    if coeffs.lam is None or not coeffs.lam > 0:
        raise ValueError('The extended system needs lam > 0')
    omega = wave.omega
    load = incident_boundary_data(wave, mesh, mats)
    return solve_coupled(mesh, omega, 1.0 / (mats.mu0 * coeffs.mu),
                         mats.eps0 * coeffs.eps, mats.impedance, load,
                         _current_block(coeffs, omega, mats),
                         name='extended', lam=coeffs.lam)


def effective_coefficients(mesh, tensors, mats):
    """
    Element tensors of mu and eps with the homogenized tensors on the array
    and the host or vacuum values elsewhere.

    :return: (mu, eps) as arrays (n_elements, 3, 3).
    """
    if mesh.in_array is None:
        raise ValueError('Mesh is not tagged')
    base = build_coefficient_field(mesh, mats)
    eye = np.eye(3)
    mu = base.mu[:, None, None] * eye
    eps = base.eps[:, None, None] * eye
    mu[mesh.in_array] = tensors.mu_hat
    eps[mesh.in_array] = tensors.eps_hat
    return mu, eps


def solve_homogenized_maxwell(mesh, tensors, wave, mats):
    """
    Solves the homogenized Maxwell equation on the whole domain, with
    mu_hat and eps_hat on the array and host or vacuum values elsewhere.

    .. math::
        (\\mu_{eff}^{-1}\\nabla\\times E^0, \\nabla\\times u)
        - \\omega^2(\\varepsilon_{eff} E^0, u)
        - i\\omega Z\\langle E^0_T, u_T\\rangle = \\langle g, u_T\\rangle

    :return: FieldSolution without current.
    """
    mu, eps = effective_coefficients(mesh, tensors, mats)
    load = incident_boundary_data(wave, mesh, mats)
    return solve_coupled(mesh, wave.omega, np.linalg.inv(mu) / mats.mu0,
                         mats.eps0 * eps, mats.impedance, load,
                         name='homogenized-maxwell')


def solve_homogenized_coupled(mesh, tensors, wave, mats):
    """
    Solves the homogenized coupled system with the current on the array
    region, the hard-wall condition on its boundary and the constant
    coefficients beta_hat and gamma_hat of the homogenized current
    equation.

    :param tensors: HomogenizedTensors with the current coefficients,
        computed at the frequency of the wave.
    :return: FieldSolution
    """
    if tensors.gamma_hat is None:
        raise ValueError('The homogenized coupled system needs gamma_hat '
                         'and beta_hat')
    omega = wave.omega
    if tensors.omega is not None and abs(tensors.omega - omega) > \
            1e-12 * omega:
        raise ValueError('Tensors were computed at omega {} but the wave '
                         'has omega {}'.format(tensors.omega, omega))
    mu, eps = effective_coefficients(mesh, tensors, mats)
    mask = mesh.in_array.copy()
    current = CurrentBlock(
        mask=mask, beta2=np.full(mesh.n_elements, tensors.beta_hat),
        gamma=np.broadcast_to(tensors.gamma_hat, (mesh.n_elements, 3, 3)),
        plasma_weight=mats.plasma_weight)
    load = incident_boundary_data(wave, mesh, mats)
    return solve_coupled(mesh, omega, np.linalg.inv(mu) / mats.mu0,
                         mats.eps0 * eps, mats.impedance, load, current,
                         name='homogenized-coupled', lam=tensors.lam)
