# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Multiscale reconstruction on the macro mesh. The cell functions are sampled
through the periodic map x -> (x mod eta Y)/eta to correct the homogenized
fields, and the modified multiscale approach solves the original coupled
system again inside every particle with the corrected field as boundary
data. All particles share one local matrix and therefore one
factorization.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import time

import numpy as np
from scipy import sparse

from .fem import (SparseSystem, apply_constraints, assemble_form,
                  edge_interpolant_of_elements, element_average_edge,
                  element_average_face, face_interpolant_of_elements)
from .linsolve import FactorizationCache, fingerprint, solve_many
from .macro import (FieldSolution, solve_homogenized_coupled,
                    solve_homogenized_maxwell)
from .mesh import KUHN_PATHS, extract_particle_submesh
from .model import METAL

logger = logging.getLogger(__name__)


@dataclass
class CorrectorField:
    """
    Corrector matrices of every macro element. eps[t] = I + grad_y theta^eps
    and gamma[t] = I + curl_y Theta^gamma at the cell element under t,
    identity outside the array. cell_element is -1 outside the array.
    """
    eps: np.ndarray
    gamma: np.ndarray
    cell_element: np.ndarray


@dataclass
class CorrectedField:
    """
    Element-wise corrected field with its edge or face DOFs.
    """
    mesh: object
    vectors: np.ndarray
    dofs: np.ndarray
    omega: float


def cell_element_map(mesh, cell_mesh, geom):
    """
    Cell element under every macro element of the array, -1 elsewhere.
    Needs a macro grid aligned with the lattice and the same resolution per
    cell as the cell mesh.
    """
    n_c = geom.cell_resolution
    if mesh.hex_index is None or cell_mesh.resolution is None:
        raise ValueError('The corrector needs structured meshes')
    if np.any(cell_mesh.resolution != n_c) or np.any(
            mesh.resolution != geom.grid_shape) or not np.allclose(
            mesh.spacing, geom.spacing, rtol=1e-12, atol=0):
        raise ValueError('Macro mesh and cell mesh are incommensurate')

    rel = mesh.hex_index - geom.array_index_offset
    cell = rel // n_c
    inside = np.all((cell >= 0) & (cell < geom.counts), axis=1)
    local = rel - cell * n_c
    flat = (local[:, 0] * n_c[1] + local[:, 1]) * n_c[2] + local[:, 2]
    mapping = flat * len(KUHN_PATHS) + mesh.kuhn_index
    return np.where(inside, mapping, -1)


def corrector_field(mesh, cells, geom):
    """
    Samples I + grad_y theta^eps (and I + curl_y Theta^gamma, if solved)
    on the macro mesh.

    :param mesh: Tagged macro mesh.
    :param cells: CellSolution on the reference cell.
    :param geom: ArrayGeometry of the mesh.
    :return: CorrectorField
    """
    mapping = cell_element_map(mesh, cells.mesh, geom)
    inside = mapping >= 0
    eye = np.eye(3)
    eps = np.broadcast_to(eye, (mesh.n_elements, 3, 3)).copy()
    eps[inside] += cells.grad_eps[mapping[inside]]
    gamma = None
    if cells.has_curl:
        gamma = np.broadcast_to(eye, (mesh.n_elements, 3, 3)).astype(complex)
        gamma[inside] += cells.curl_gamma[mapping[inside]]
    return CorrectorField(eps=eps, gamma=gamma, cell_element=mapping)


def apply_corrector(E0, cells, geom, corrector=None):
    """
    Corrected field E0_eta = (I + grad_y theta^eps) E0. The element vectors
    are the corrector times the element mean of E0; the edge DOFs add the
    element-averaged interpolant of the correction to the DOFs of E0, so
    they equal E0 wherever the corrector is the identity.

    :param E0: FieldSolution of the homogenized problem.
    :param cells: CellSolution.
    :param geom: ArrayGeometry.
    :param corrector: Precomputed CorrectorField.
    :return: CorrectedField
    """
    mesh = E0.mesh
    if corrector is None:
        corrector = corrector_field(mesh, cells, geom)
    mean = element_average_edge(mesh, E0.E)
    vectors = np.einsum('txy,ty->tx', corrector.eps, mean)
    dofs = E0.E + edge_interpolant_of_elements(mesh, vectors - mean)
    return CorrectedField(mesh=mesh, vectors=vectors, dofs=dofs,
                          omega=E0.omega)


def apply_current_corrector(J0, cells, geom, corrector=None):
    """
    Corrected current J0_eta = (I + curl_y Theta^gamma) J0, built the same
    way as apply_corrector from face DOFs.
    """
    if not cells.has_curl:
        raise ValueError('The current corrector needs the curl cell '
                         'functions')
    mesh = J0.mesh
    if corrector is None:
        corrector = corrector_field(mesh, cells, geom)
    mean = element_average_face(mesh, J0.J)
    vectors = np.einsum('txy,ty->tx', corrector.gamma, mean)
    dofs = J0.J + face_interpolant_of_elements(mesh, vectors - mean)
    return CorrectedField(mesh=mesh, vectors=vectors, dofs=dofs,
                          omega=J0.omega)


@dataclass
class LocalSolution:
    """
    Solution of the local coupled problem in one particle. E_tilde vanishes
    on the tangential trace of the particle boundary; E is E_tilde plus the
    corrected field on the particle.
    """
    particle: int
    embedding: object
    E_tilde: np.ndarray
    E: np.ndarray
    J: np.ndarray


class ParticleSolver:
    """
    Local problems of the modified multiscale approach,

    .. math::
        (\\mu^{-1}\\nabla\\times\\tilde E, \\nabla\\times u)
        - \\varepsilon\\omega^2(\\tilde E, u) - i\\omega(J, u)
        = -(\\mu^{-1}\\nabla\\times E^0_\\eta, \\nabla\\times u)
        + \\varepsilon\\omega^2(E^0_\\eta, u)

    .. math::
        (\\beta^2\\nabla\\cdot J, \\nabla\\cdot w)
        - \\omega(\\omega + i\\gamma)(J, w)
        + i\\omega\\,\\omega_p^2\\varepsilon_0(\\tilde E, w)
        = -i\\omega\\,\\omega_p^2\\varepsilon_0(E^0_\\eta, w)

    with n x E_tilde = 0 and n . J = 0 on the particle boundary.

    :param mesh: Tagged macro mesh.
    :param mats: ScaledMaterials.
    :param omega: Scaled frequency.
    :param cache: FactorizationCache shared by the particles.
    :param threads: Worker threads for the right-hand sides.
    """

    def __init__(self, mesh, mats, omega, cache=None, threads=1):
        self.mesh = mesh
        self.mats = mats
        self.omega = omega
        self.cache = FactorizationCache() if cache is None else cache
        self.threads = max(1, int(threads))
        self.particles = [extract_particle_submesh(mesh, k)
                          for k in range(mesh.geometry.n_particles)]
        self.fingerprints = []
        self.local_solves = 0

    def local_operators(self, sub):
        """
        Full local blocks (A_EE, C) of one particle submesh.
        """
        mats, omega = self.mats, self.omega
        stiffness = assemble_form(sub, 'curlcurl',
                                  1.0 / (mats.mu0 * mats.mu_metal))
        mass = assemble_form(sub, 'mass_edge', mats.eps0 * mats.eps_metal)
        coupling = assemble_form(sub, 'coupling_edge_face')
        return (stiffness - omega ** 2 * mass).tocsr(), coupling

    def local_system(self, sub):
        """
        Constrained local system of one particle with zero right-hand side.
        """
        mats, omega = self.mats, self.omega
        a_ee, coupling = self.local_operators(sub)
        a_jj = assemble_form(sub, 'divdiv', mats.beta ** 2) \
            - omega * (omega + 1j * mats.gamma) \
            * assemble_form(sub, 'mass_face')
        matrix = sparse.bmat([
            [a_ee, -1j * omega * coupling],
            [1j * omega * mats.plasma_weight * coupling.T, a_jj]],
            format='csr')
        system = SparseSystem.from_full(
            matrix, np.zeros(matrix.shape[0], dtype=complex))
        system = apply_constraints(system, 'essential-zero-tangential',
                                   indices=sub.boundary_edges)
        return apply_constraints(system, 'essential-zero-normal',
                                 indices=sub.boundary_faces + sub.n_edges)

    def _rhs(self, sub, emb, corrected, a_ee, coupling, prolongation):
        e0 = corrected.dofs[emb.edges]
        full = np.concatenate([
            -(a_ee @ e0),
            -1j * self.omega * self.mats.plasma_weight * (coupling.T @ e0)])
        return prolongation.T @ full, e0

    def solve_all(self, corrected):
        """
        Solves the local problems of all particles with one factorization.

        :param corrected: CorrectedField E0_eta on the macro mesh.
        :return: List of LocalSolution, one per particle.
        """
        if abs(corrected.omega - self.omega) > 1e-12 * self.omega:
            raise ValueError('The corrected field belongs to another '
                             'frequency')
        systems = []
        self.fingerprints = []
        for k, (sub, emb) in enumerate(self.particles):
            system = self.local_system(sub)
            key = fingerprint(system.matrix)
            self.fingerprints.append(key)
            if k > 0 and key not in self.cache:
                raise RuntimeError('Local matrix of particle {} differs '
                                   'from particle 0'.format(k))
            solver = self.cache.factorize(system.matrix)
            systems.append(system)

        sub0 = self.particles[0][0]
        a_ee, coupling = self.local_operators(sub0)
        prolongation = systems[0].prolongation

        def job(item):
            sub, emb = item
            return self._rhs(sub, emb, corrected, a_ee, coupling,
                             prolongation)

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            loads = list(pool.map(job, self.particles))

        columns = solve_many(solver, np.stack([b for b, _ in loads], axis=1))
        self.local_solves += len(columns)

        results = []
        for (sub, emb), x, (_, e0) in zip(self.particles, columns, loads):
            full = systems[0].expand(x)
            e_tilde = full[:sub.n_edges]
            results.append(LocalSolution(
                particle=emb.particle, embedding=emb, E_tilde=e_tilde,
                E=e_tilde + e0, J=full[sub.n_edges:]))
        logger.info('Solved %d local problems, cache hits %d misses %d',
                    len(results), self.cache.hits, self.cache.misses)
        return results


def local_particle_solve_all(corrected, mesh, mats, omega, cache=None,
                             threads=1):
    """
    Convenience wrapper around ParticleSolver.solve_all.

    :return: (list of LocalSolution, ParticleSolver)
    """
    solver = ParticleSolver(mesh, mats, omega, cache=cache, threads=threads)
    return solver.solve_all(corrected), solver


def stitch_solution(corrected, locals_):
    """
    Assembles E^M and J^M on the macro mesh: E^M is E0_eta outside the
    particles and E_tilde + E0_eta inside, J^M is the union of the local
    currents.

    :param corrected: CorrectedField E0_eta.
    :param locals_: List of LocalSolution.
    :return: FieldSolution
    """
    mesh = corrected.mesh
    metal = mesh.tags == METAL
    owner = np.full(mesh.n_elements, -1, dtype=np.int64)
    for loc in locals_:
        elements = loc.embedding.elements
        if np.any(owner[elements] >= 0):
            raise ValueError('Particles {} and {} overlap'.format(
                int(owner[elements].max()), loc.particle))
        owner[elements] = loc.particle
    if np.any((owner >= 0) != metal):
        raise ValueError('Local solutions do not cover the metal elements '
                         'exactly')

    E = corrected.dofs.astype(complex)
    J = np.zeros(mesh.n_faces, dtype=complex)
    for loc in locals_:
        emb = loc.embedding
        E[emb.edges] += loc.E_tilde
        J[emb.faces] = loc.J
    return FieldSolution(mesh=mesh, E=E, J=J, system='modified-multiscale',
                         omega=corrected.omega, current_mask=metal)


@dataclass
class MultiscaleResult:
    """
    Fields and instrumentation of one multiscale run.
    """
    homogenized: FieldSolution
    corrected: CorrectedField
    solution: FieldSolution
    corrected_current: CorrectedField = None
    locals_: list = None
    stats: dict = field(default_factory=dict)


def modified_multiscale(mesh, cells, tensors, wave, mats, cache=None,
                        threads=1):
    """
    Modified multiscale approach: homogenized Maxwell solve on the whole
    domain, corrector, local coupled solves in the particles and stitching.

    :param mesh: Tagged macro mesh.
    :param cells: CellSolution with the scalar cell functions.
    :param tensors: HomogenizedTensors with mu_hat and eps_hat.
    :param wave: IncidentWave.
    :param mats: ScaledMaterials.
    :param cache: FactorizationCache of the local problems.
    :param threads: Worker threads.
    :return: MultiscaleResult
    """
    geom = mesh.geometry
    start = time.perf_counter()
    E0 = solve_homogenized_maxwell(mesh, tensors, wave, mats)
    homogenized_time = time.perf_counter() - start

    start = time.perf_counter()
    corrected = apply_corrector(E0, cells, geom)
    solver = ParticleSolver(mesh, mats, wave.omega, cache=cache,
                            threads=threads)
    locals_ = solver.solve_all(corrected)
    stitched = stitch_solution(corrected, locals_)
    local_time = time.perf_counter() - start

    sub = solver.particles[0][0]
    stats = {
        'homogenized_time': homogenized_time,
        'homogenized_elements': E0.stats['elements'],
        'homogenized_dofs': E0.stats['dofs'],
        'local_time': local_time,
        'local_elements': sub.n_elements * len(locals_),
        'local_dofs': (sub.n_edges + sub.n_faces) * len(locals_),
        'local_solves': solver.local_solves,
        'factorizations_local': solver.cache.factorizations,
        'cache_hits': solver.cache.hits,
        'cache_misses': solver.cache.misses,
        'fingerprints_equal': len(set(solver.fingerprints)) == 1
    }
    return MultiscaleResult(homogenized=E0, corrected=corrected,
                            solution=stitched, locals_=locals_, stats=stats)


def original_multiscale(mesh, cells, tensors, wave, mats):
    """
    Original multiscale approach: homogenized coupled solve followed by
    both correctors, giving the approximations of E and J.

    :param cells: CellSolution with the curl cell functions.
    :param tensors: HomogenizedTensors with gamma_hat and beta_hat.
    :return: MultiscaleResult
    """
    geom = mesh.geometry
    start = time.perf_counter()
    coupled = solve_homogenized_coupled(mesh, tensors, wave, mats)
    corrector = corrector_field(mesh, cells, geom)
    corrected = apply_corrector(coupled, cells, geom, corrector)
    current = apply_current_corrector(coupled, cells, geom, corrector)
    solution = FieldSolution(mesh=mesh, E=corrected.dofs, J=current.dofs,
                             system='original-multiscale',
                             omega=wave.omega, lam=tensors.lam,
                             current_mask=coupled.current_mask)
    stats = {'homogenized_time': time.perf_counter() - start,
             'homogenized_elements': coupled.stats['elements'],
             'homogenized_dofs': coupled.stats['dofs']}
    return MultiscaleResult(homogenized=coupled, corrected=corrected,
                            solution=solution, corrected_current=current,
                            stats=stats)
