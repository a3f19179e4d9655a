# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Periodic cell problems of the reference cell and the homogenized
coefficients built from their solutions.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import time

import numpy as np
from scipy import sparse

from .fem import (SparseSystem, apply_constraints, assemble_form,
                  element_curl, element_dof_integrals, element_gradient,
                  mesh_kernels)
from .linsolve import factorize, solve_many
from .mesh import build_periodic_pairs
from .model import METAL, build_coefficient_field

logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-9


class CellProblem:
    """
    Solver for the cell problems on one periodic reference cell mesh.
    The periodic DOF maps and the basis integrals are computed once and
    shared by all cell problems.

    :param cell_mesh: Mesh of the reference cell from build_cell_mesh.
    """

    def __init__(self, cell_mesh):
        self.mesh = cell_mesh
        self.dofs = build_periodic_pairs(cell_mesh)
        self.volume = float(cell_mesh.volumes.sum())
        self.node_weights = element_dof_integrals(cell_mesh, 'node')
        self.edge_weights = element_dof_integrals(cell_mesh, 'edge').T

    def _check(self, coeff):
        coeff = np.asarray(coeff)
        if coeff.shape != (self.mesh.n_elements,):
            raise ValueError('Coefficient does not match the cell mesh')
        return coeff

    def scalar_system(self, coeff):
        """
        Periodic system of

        .. math::
            (c \\nabla\\theta_i, \\nabla v) = -(c e_i, \\nabla v)

        for i = 1, 2, 3 in the columns of the right-hand side, with one
        multiplier for the zero mean of theta.
        """
        coeff = self._check(coeff)
        mesh = self.mesh
        k = mesh_kernels(mesh)
        stiffness = assemble_form(mesh, 'stiffness_node', coeff)
        load = -(coeff * k.volume)[:, None, None] * k.grads
        rhs = np.zeros((mesh.n_vertices, 3))
        np.add.at(rhs, mesh.tets.ravel(), load.reshape(-1, 3))

        system = SparseSystem.from_full(stiffness, rhs)
        system = apply_constraints(system, 'periodic', dofs=self.dofs,
                                   blocks=('node',))
        return apply_constraints(system, 'zero-mean',
                                 weights=self.node_weights)

    def solve_scalar(self, coeff, directions=(0, 1, 2)):
        """
        Solves the scalar cell problems of a coefficient for the given unit
        directions with one factorization.

        :param coeff: Element values of mu or eps.
        :param directions: Indices i of the unit vectors e_i.
        :return: Array (len(directions), n_nodes) of cell functions.
        """
        system = self.scalar_system(coeff)
        solver = factorize(system)
        columns = solve_many(solver,
                             system.rhs[:, list(directions)].astype(complex))
        return np.array([system.expand(x).real for x in columns])

    def curl_system(self, gamma):
        """
        Periodic saddle-point system of

        .. math::
            (\\gamma^* \\nabla\\times\\Theta_i, \\nabla\\times u)
            + (\\nabla p, u) = -(\\gamma^* e_i, \\nabla\\times u), \\quad
            (\\Theta_i, \\nabla q) = 0,

        with multipliers for the zero mean of p and of Theta.
        """
        gamma = self._check(gamma)
        mesh = self.mesh
        k = mesh_kernels(mesh)
        curlcurl = assemble_form(mesh, 'curlcurl', gamma)
        coupling = assemble_form(mesh, 'coupling_edge_node')
        matrix = sparse.bmat([[curlcurl, coupling],
                              [coupling.T, None]], format='csr')

        load = -(gamma * k.volume)[:, None, None] * k.curls
        rhs = np.zeros((mesh.n_edges + mesh.n_vertices, 3), dtype=complex)
        np.add.at(rhs, mesh.tet_edges.ravel(), load.reshape(-1, 3))

        weights = np.zeros((4, mesh.n_edges + mesh.n_vertices))
        weights[0, mesh.n_edges:] = self.node_weights
        weights[1:, :mesh.n_edges] = self.edge_weights

        system = SparseSystem.from_full(matrix, rhs)
        system = apply_constraints(system, 'periodic', dofs=self.dofs,
                                   blocks=('edge', 'node'))
        return apply_constraints(system, 'zero-mean', weights=weights)

    def solve_curl(self, gamma, directions=(0, 1, 2)):
        """
        Solves the divergence-constrained curl cell problems.

        :param gamma: Complex element values of gamma*.
        :param directions: Indices i of the unit vectors e_i.
        :return: (Theta, residual) with Theta of shape
            (len(directions), n_edges) and the largest relative residual
            of the divergence constraint.
        """
        mesh = self.mesh
        system = self.curl_system(gamma)
        solver = factorize(system)
        columns = solve_many(solver, system.rhs[:, list(directions)])
        full = [system.expand(x) for x in columns]
        theta = np.array([x[:mesh.n_edges] for x in full])
        residual = max((self.divergence_residual(t) for t in theta),
                       default=0.0)
        if residual > DIVERGENCE_TOLERANCE:
            logger.warning('Divergence constraint residual %.2e',
                           residual)
        return theta, residual

    def divergence_residual(self, theta):
        """
        max_q |(Theta, grad q)| relative to the L2 norm of Theta, over the
        periodic node basis.
        """
        cache = self.mesh.cache
        if 'edge_node' not in cache:
            cache['edge_node'] = assemble_form(self.mesh,
                                               'coupling_edge_node')
            cache['edge_mass'] = assemble_form(self.mesh, 'mass_edge')
        coupling, mass = cache['edge_node'], cache['edge_mass']
        fold = self.dofs.prolongation('node')
        functional = fold.T @ (coupling.T @ theta)
        norm = np.sqrt(abs(np.vdot(theta, mass @ theta)))
        if norm == 0:
            return 0.0
        return float(np.abs(functional).max() / norm)


@dataclass
class CellSolution:
    """
    Cell functions on the reference cell. grad_mu[t, :, j] is the gradient
    of theta_j^mu on element t, curl_gamma[t, :, i] the curl of Theta_i.
    """
    mesh: object
    theta_mu: np.ndarray
    theta_eps: np.ndarray
    grad_mu: np.ndarray
    grad_eps: np.ndarray
    theta_gamma: np.ndarray = None
    curl_gamma: np.ndarray = None
    divergence_residual: float = 0.0
    timings: dict = field(default_factory=dict)

    @property
    def has_curl(self):
        return self.theta_gamma is not None


@dataclass
class HomogenizedTensors:
    """
    Homogenized coefficients. gamma_hat and beta_hat are the averages of
    omega (omega + i gamma) and beta^2; gamma_star_hat and beta_star_hat
    divide them by omega_p^2 eps0.
    """
    mu_hat: np.ndarray
    eps_hat: np.ndarray
    gamma_hat: np.ndarray = None
    beta_hat: float = None
    plasma_weight: float = 1.0
    omega: float = None
    lam: float = None
    volume_fraction: float = None

    @property
    def coupled(self):
        """
        True when the current coefficients exist and the coupling is on.
        """
        return self.gamma_hat is not None and self.plasma_weight > 0

    @property
    def gamma_star_hat(self):
        if not self.coupled:
            return None
        return self.gamma_hat / self.plasma_weight

    @property
    def beta_star_hat(self):
        if not self.coupled:
            return None
        return complex(self.beta_hat / self.plasma_weight)

    @property
    def alpha(self):
        """
        Smallest eigenvalue of the symmetric part of Im(gamma_star_hat).
        """
        if not self.coupled:
            return None
        im = self.gamma_star_hat.imag
        return float(np.linalg.eigvalsh(0.5 * (im + im.T)).min())

    @property
    def alpha_raw(self):
        """
        Smallest real part of the eigenvalues of Im(gamma_star_hat) without
        symmetrization.
        """
        if not self.coupled:
            return None
        return float(np.linalg.eigvals(self.gamma_star_hat.imag).real.min())

    def to_dict(self):
        def pairs(a):
            return np.stack([np.real(a), np.imag(a)], axis=-1).tolist()

        out = {
            'mu_hat': np.asarray(self.mu_hat).tolist(),
            'eps_hat': np.asarray(self.eps_hat).tolist(),
            'plasma_weight': self.plasma_weight,
            'omega': self.omega,
            'lam': self.lam,
            'volume_fraction': self.volume_fraction
        }
        if self.gamma_hat is not None:
            out['gamma_hat'] = pairs(self.gamma_hat)
            out['beta_hat'] = self.beta_hat
        if self.coupled:
            out['gamma_star_hat'] = pairs(self.gamma_star_hat)
            out['beta_star_hat'] = pairs(self.beta_star_hat)
            out['alpha'] = self.alpha
            out['alpha_raw'] = self.alpha_raw
        return out

    @classmethod
    def from_dict(cls, data):
        def unpair(a):
            a = np.asarray(a, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        weight = data.get('plasma_weight', 1.0)
        gamma_hat = beta_hat = None
        if 'gamma_hat' in data:
            gamma_hat = unpair(data['gamma_hat'])
            beta_hat = float(data['beta_hat'])
        return cls(mu_hat=np.asarray(data['mu_hat'], dtype=float),
                   eps_hat=np.asarray(data['eps_hat'], dtype=float),
                   gamma_hat=gamma_hat, beta_hat=beta_hat,
                   plasma_weight=weight, omega=data.get('omega'),
                   lam=data.get('lam'),
                   volume_fraction=data.get('volume_fraction'))


def solve_scalar_cell(problem, coeff, i):
    """
    Cell function theta_i of a scalar coefficient.
    """
    return problem.solve_scalar(coeff, directions=(i,))[0]


def solve_curl_cell(problem, gamma, i):
    """
    Cell function Theta_i of the complex coefficient gamma*.
    """
    return problem.solve_curl(gamma, directions=(i,))[0][0]


def solve_cells(problem, coeffs, omega=None, curl=False, threads=1):
    """
    Runs the scalar cell problems for mu and eps and, with curl=True, the
    curl cell problems for omega (omega + i gamma) as independent jobs.

    :param problem: CellProblem.
    :param coeffs: CoefficientField on the cell mesh.
    :param omega: Scaled frequency, needed for the curl problems.
    :param curl: Solve the curl cell problems too.
    :param threads: Number of worker threads.
    :return: CellSolution
    """
    if curl and omega is None:
        raise ValueError('The curl cell problems need a frequency')
    mesh = problem.mesh
    if coeffs.n_elements != mesh.n_elements:
        raise ValueError('Coefficients do not match the cell mesh')

    def timed(func, *args):
        start = time.perf_counter()
        out = func(*args)
        return out, time.perf_counter() - start

    jobs = {'mu': (problem.solve_scalar, coeffs.mu),
            'eps': (problem.solve_scalar, coeffs.eps)}
    if curl:
        jobs['gamma'] = (problem.solve_curl, coeffs.gamma_weight(omega))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {name: pool.submit(timed, func, arg)
                   for name, (func, arg) in jobs.items()}
        results = {name: f.result() for name, f in futures.items()}

    theta_mu, t_mu = results['mu']
    theta_eps, t_eps = results['eps']
    solution = CellSolution(
        mesh=mesh, theta_mu=theta_mu, theta_eps=theta_eps,
        grad_mu=element_gradient(mesh, theta_mu.T),
        grad_eps=element_gradient(mesh, theta_eps.T),
        timings={'mu': t_mu, 'eps': t_eps})
    if curl:
        (theta, residual), t_gamma = results['gamma']
        solution.theta_gamma = theta
        solution.curl_gamma = element_curl(mesh, theta.T)
        solution.divergence_residual = residual
        solution.timings['gamma'] = t_gamma
    logger.info('Cell problems solved in %.3f s',
                sum(solution.timings.values()))
    return solution


def homogenized_tensors(cells, coeffs, plasma_weight=1.0, omega=None):
    """
    Averages the corrected coefficients over the reference cell,

    .. math::
        \\hat\\mu = M_Y(\\mu (I + \\nabla_y\\theta^\\mu)),
        \\quad \\hat\\varepsilon
        = M_Y(\\varepsilon (I + \\nabla_y\\theta^\\varepsilon)),

    .. math::
        \\widehat{\\gamma^*}
        = M_Y(\\gamma^* (I + \\nabla_y\\times\\Theta^\\gamma)),
        \\quad \\widehat{\\beta^*} = M_Y(1/\\beta^*)^{-1}.

    The element averages are exact since every factor is element-constant.

    :param cells: CellSolution.
    :param coeffs: CoefficientField on the same cell mesh.
    :param plasma_weight: omega_p^2 eps0.
    :param omega: Scaled frequency of the curl cell problems.
    :return: HomogenizedTensors
    """
    mesh = cells.mesh
    if coeffs.n_elements != mesh.n_elements:
        raise ValueError('Coefficients and cell solutions live on '
                         'different meshes')
    volume = mesh.volumes
    total = volume.sum()
    eye = np.eye(3)

    def average(values, corrector):
        return np.einsum('t,txj->xj', volume * values,
                         eye + corrector) / total

    mu_hat = average(coeffs.mu, cells.grad_mu)
    eps_hat = average(coeffs.eps, cells.grad_eps)
    metal = coeffs.tags == METAL
    tensors = HomogenizedTensors(
        mu_hat=mu_hat, eps_hat=eps_hat, plasma_weight=plasma_weight,
        omega=omega, lam=coeffs.lam,
        volume_fraction=float(volume[metal].sum() / total))

    if cells.has_curl:
        if omega is None:
            raise ValueError('gamma_hat needs the frequency of the curl '
                             'cell problems')
        tensors.gamma_hat = average(coeffs.gamma_weight(omega),
                                    cells.curl_gamma)
        current = coeffs.current_mask
        if np.any(coeffs.beta2[current] <= 0):
            raise ValueError('beta^2 must be positive on the whole cell')
        tensors.beta_hat = float(total / np.sum(volume / coeffs.beta2))
    return tensors


def homogenize(cell_mesh, mats, omega=None, lam=None, curl=False,
               threads=1, problem=None):
    """
    Builds the cell coefficients, solves the cell problems and returns
    the tensors together with the cell solution.

    :param cell_mesh: Tagged reference cell mesh.
    :param mats: ScaledMaterials.
    :param omega: Scaled frequency, needed with curl=True.
    :param lam: Extension parameter of the host, needed with curl=True.
    :param curl: Solve the curl cell problems too.
    :param threads: Worker threads for the independent cell problems.
    :param problem: Reusable CellProblem for the same mesh.
    :return: (HomogenizedTensors, CellSolution)
    """
    if curl and lam is None:
        raise ValueError('The curl cell problems need the extension '
                         'parameter')
    coeffs = build_coefficient_field(cell_mesh, mats, lam)
    problem = CellProblem(cell_mesh) if problem is None else problem
    cells = solve_cells(problem, coeffs, omega=omega, curl=curl,
                        threads=threads)
    tensors = homogenized_tensors(cells, coeffs,
                                  plasma_weight=mats.plasma_weight,
                                  omega=omega)
    return tensors, cells
