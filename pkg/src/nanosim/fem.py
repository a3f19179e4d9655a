# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Lowest-order finite elements on tetrahedra: Whitney edge functions for
H(curl), Raviart-Thomas face functions for H(div) and P1 node functions for
H1. All element blocks are integrated exactly through barycentric monomial
integrals, the global matrices are assembled with scipy.sparse.
"""

from dataclasses import dataclass, field, replace
import logging

import numpy as np
from scipy import sparse

from .mesh import LOCAL_EDGES

logger = logging.getLogger(__name__)

# Order-4 rule on the reference triangle, barycentric points and weights.
_A, _B = 0.445948490915965, 0.091576213509771
_WA, _WB = 0.223381589678011, 0.109951743655322
TRIANGLE_POINTS = np.array([
    [1 - 2 * _A, _A, _A], [_A, 1 - 2 * _A, _A], [_A, _A, 1 - 2 * _A],
    [1 - 2 * _B, _B, _B], [_B, 1 - 2 * _B, _B], [_B, _B, 1 - 2 * _B]])
TRIANGLE_WEIGHTS = np.array([_WA, _WA, _WA, _WB, _WB, _WB])

# Edges of a boundary triangle in the order of TetMesh.face_edges.
TRIANGLE_EDGES = ((0, 1), (0, 2), (1, 2))


@dataclass
class ElementMatrices:
    """
    Geometric factors of a batch of tetrahedra from which every element
    block is formed.

    A Whitney function w_a = s (lambda_i grad lambda_j - lambda_j grad
    lambda_i) is stored through its coefficients whitney[t, a, p] of the
    barycentric coordinates, w_a = sum_p lambda_p whitney[t, a, p].
    Raviart-Thomas functions phi_k = s (x - x_k) / (3 |T|) are stored in
    the same way in rt[t, k, p].
    """
    volume: np.ndarray
    grads: np.ndarray
    whitney: np.ndarray
    curls: np.ndarray
    rt: np.ndarray
    divs: np.ndarray
    bary_mass: np.ndarray

    @property
    def n_elements(self):
        return len(self.volume)

    def subset(self, mask):
        return ElementMatrices(*(getattr(self, f)[mask] for f in
                                 self.__dataclass_fields__))

    def curlcurl(self, coeff=None):
        """
        Blocks of (coeff curl w_b, curl w_a), 6 x 6.
        """
        c = self.curls
        if _is_scalar(coeff):
            block = np.einsum('tax,tbx->tab', c, c)
            return _scale(block * self.volume[:, None, None], coeff)
        cc = np.einsum('txy,tby->tbx', coeff, c)
        return np.einsum('tax,tbx->tab', c, cc) * self.volume[:, None, None]

    def edge_mass(self, coeff=None):
        """
        Blocks of (coeff w_b, w_a), 6 x 6.
        """
        return self._mass(self.whitney, self.whitney, coeff)

    def face_mass(self, coeff=None):
        """
        Blocks of (coeff phi_l, phi_k), 4 x 4.
        """
        return self._mass(self.rt, self.rt, coeff)

    def edge_face_coupling(self, coeff=None):
        """
        Blocks of (coeff phi_k, w_a), 6 x 4.
        """
        return self._mass(self.whitney, self.rt, coeff)

    def divdiv(self, coeff=None):
        """
        Blocks of (coeff div phi_l, div phi_k), 4 x 4.
        """
        if not _is_scalar(coeff):
            raise ValueError('divdiv takes a scalar coefficient')
        d = self.divs
        return _scale(d[:, :, None] * d[:, None, :]
                      * self.volume[:, None, None], coeff)

    def node_stiffness(self, coeff=None):
        """
        Blocks of (coeff grad lambda_m, grad lambda_n), 4 x 4.
        """
        g = self.grads
        if _is_scalar(coeff):
            block = np.einsum('tnx,tmx->tnm', g, g)
            return _scale(block * self.volume[:, None, None], coeff)
        gc = np.einsum('txy,tmy->tmx', coeff, g)
        return np.einsum('tnx,tmx->tnm', g, gc) * self.volume[:, None, None]

    def node_mass(self, coeff=None):
        if not _is_scalar(coeff):
            raise ValueError('node mass takes a scalar coefficient')
        return _scale(self.bary_mass, coeff)

    def edge_node_coupling(self):
        """
        Blocks of (grad lambda_n, w_a), 6 x 4.
        """
        block = np.einsum('tapx,tnx->tan', self.whitney, self.grads)
        return block * self.volume[:, None, None] / 4.0

    def _mass(self, left, right, coeff):
        # Entry (a, b) is sum_pq m_pq left[a, p] . coeff right[b, q]
        if _is_scalar(coeff):
            weighted = right
        else:
            weighted = np.einsum('txy,tbqy->tbqx', coeff, right)
        mixed = np.einsum('tpq,tbqx->tbpx', self.bary_mass, weighted)
        block = np.einsum('tapx,tbpx->tab', left, mixed)
        return _scale(block, coeff) if _is_scalar(coeff) else block


def _is_scalar(coeff):
    return coeff is None or np.ndim(coeff) <= 1


def _scale(block, coeff):
    if coeff is None:
        return block
    coeff = np.asarray(coeff)
    if coeff.ndim == 0:
        return block * coeff
    return block * coeff[:, None, None]


def element_kernels(vertices, edge_signs=None, face_signs=None):
    """
    Computes the geometric factors of the lowest-order elements on a batch
    of tetrahedra. Without signs the local orientation is used: edge (i, j)
    points from local vertex i to j and every face function has outward
    flux one.

    :param vertices: Array (4, 3) or (n, 4, 3) of vertex coordinates.
    :param edge_signs: Array (n, 6) of +-1 for the global edge directions.
    :param face_signs: Array (n, 4) of +-1 for the global face normals.
    :return: ElementMatrices
    """
    x = np.asarray(vertices, dtype=float)
    if x.ndim == 2:
        x = x[None]
    n = len(x)

    # Barycentric coordinates are the columns of the inverse of [1 x]
    aug = np.concatenate([np.ones((n, 4, 1)), x], axis=2)
    det = np.linalg.det(aug)
    scale = np.abs(x[:, 1:] - x[:, :1]).max(axis=(1, 2)) ** 3
    if np.any(np.abs(det) <= 1e-12 * scale):
        raise ValueError('Degenerate tetrahedron')
    volume = np.abs(det) / 6.0
    grads = np.transpose(np.linalg.inv(aug)[:, 1:, :], (0, 2, 1))

    if edge_signs is None:
        edge_signs = np.ones((n, 6))
    if face_signs is None:
        face_signs = np.ones((n, 4))

    whitney = np.zeros((n, 6, 4, 3))
    curls = np.zeros((n, 6, 3))
    for a, (i, j) in enumerate(LOCAL_EDGES):
        s = edge_signs[:, a, None]
        whitney[:, a, i] = s * grads[:, j]
        whitney[:, a, j] = -s * grads[:, i]
        curls[:, a] = 2.0 * s * np.cross(grads[:, i], grads[:, j])

    # phi_k = s (x - x_k) / (3|T|) = sum_p lambda_p s (x_p - x_k) / (3|T|)
    rt = (x[:, None, :, :] - x[:, :, None, :]) \
        * (face_signs / (3.0 * volume[:, None]))[:, :, None, None]
    divs = face_signs / volume[:, None]

    bary_mass = (np.ones((4, 4)) + np.eye(4))[None] \
        * (volume / 20.0)[:, None, None]

    return ElementMatrices(volume=volume, grads=grads, whitney=whitney,
                           curls=curls, rt=rt, divs=divs,
                           bary_mass=bary_mass)


def mesh_kernels(mesh):
    """
    Element kernels of a whole mesh with its global orientations, cached
    on the mesh.
    """
    if 'kernels' not in mesh.cache:
        mesh.cache['kernels'] = element_kernels(
            mesh.vertices[mesh.tets], mesh.tet_edge_signs,
            mesh.tet_face_signs)
    return mesh.cache['kernels']


@dataclass
class TriangleKernels:
    """
    Surface Whitney functions of boundary triangles with vertices in sorted
    order, so every triangle edge agrees with the global edge direction.
    """
    area: np.ndarray
    normal: np.ndarray
    whitney: np.ndarray
    bary_mass: np.ndarray
    vertices: np.ndarray

    def tangential_mass(self):
        """
        Blocks of <w_b,T, w_a,T> over each triangle, 3 x 3.
        """
        mixed = np.einsum('fpq,fbqx->fbpx', self.bary_mass, self.whitney)
        return np.einsum('fapx,fbpx->fab', self.whitney, mixed)

    def values(self, points):
        """
        Whitney functions at barycentric points, array (f, q, 3, 3).
        """
        return np.einsum('qp,fapx->fqax', points, self.whitney)


def triangle_kernels(vertices):
    """
    Computes the surface Whitney functions on a batch of triangles.

    :param vertices: Array (n, 3, 3).
    :return: TriangleKernels
    """
    x = np.asarray(vertices, dtype=float)
    cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    double_area = np.linalg.norm(cross, axis=1)
    if np.any(double_area <= 0):
        raise ValueError('Degenerate triangle')
    normal = cross / double_area[:, None]

    grads = np.stack([
        np.cross(normal, x[:, (i + 2) % 3] - x[:, (i + 1) % 3])
        for i in range(3)], axis=1) / double_area[:, None, None]
    whitney = np.zeros((len(x), 3, 3, 3))
    for a, (i, j) in enumerate(TRIANGLE_EDGES):
        whitney[:, a, i] = grads[:, j]
        whitney[:, a, j] = -grads[:, i]
    area = double_area / 2.0
    bary_mass = (np.ones((3, 3)) + np.eye(3))[None] \
        * (area / 12.0)[:, None, None]
    return TriangleKernels(area=area, normal=normal, whitney=whitney,
                           bary_mass=bary_mass, vertices=x)


def boundary_kernels(mesh, faces=None):
    """
    Triangle kernels of the given faces (default: the mesh boundary) with
    the normal turned outward.
    """
    faces = mesh.boundary_faces if faces is None else np.asarray(faces)
    tri = triangle_kernels(mesh.vertices[mesh.faces[faces]])
    owner = mesh.face_tets[faces, 0]
    local = np.argmax(mesh.tet_faces[owner] == faces[:, None], axis=1)
    sign = mesh.tet_face_signs[owner, local]
    return replace(tri, normal=tri.normal * sign[:, None]), faces


def scatter(blocks, rows, cols, shape):
    """
    Sums element blocks into a global CSR matrix.
    """
    r = np.broadcast_to(rows[:, :, None], blocks.shape)
    c = np.broadcast_to(cols[:, None, :], blocks.shape)
    return sparse.coo_matrix((blocks.ravel(), (r.ravel(), c.ravel())),
                             shape=shape).tocsr()


def _coefficient(coeff, n):
    """
    Normalizes a coefficient to None, a per-element vector or per-element
    3 x 3 tensors.
    """
    if coeff is None:
        return None
    coeff = np.asarray(coeff)
    if coeff.ndim == 0:
        return np.full(n, coeff)
    if coeff.shape == (3, 3):
        return np.broadcast_to(coeff, (n, 3, 3))
    if coeff.shape in ((n,), (n, 3, 3)):
        return coeff
    raise ValueError('Coefficient of shape {} does not match {} '
                     'elements'.format(coeff.shape, n))


FORMS = {
    'curlcurl': ('edge', 'edge'),
    'mass_edge': ('edge', 'edge'),
    'mass_face': ('face', 'face'),
    'divdiv': ('face', 'face'),
    'coupling_edge_face': ('edge', 'face'),
    'coupling_edge_node': ('edge', 'node'),
    'stiffness_node': ('node', 'node'),
    'mass_node': ('node', 'node'),
    'impedance_boundary': ('edge', 'edge'),
    'load_from_field': ('edge', None)
}


def _dofs(mesh, kind):
    return {'edge': (mesh.tet_edges, mesh.n_edges),
            'face': (mesh.tet_faces, mesh.n_faces),
            'node': (mesh.tets, mesh.n_vertices)}[kind]


def assemble_form(mesh, form, coeff=None, mask=None, faces=None,
                  field=None):
    """
    Assembles one bilinear form (or the boundary load) on a mesh.

    Forms on elements take an element coefficient (scalar, per-element
    vector or per-element 3 x 3 tensors) and an optional element mask.
    'impedance_boundary' assembles the tangential trace mass
    <u_T, v_T> over the boundary triangles (default: the mesh boundary)
    times a scalar coeff. 'load_from_field' assembles <g, v_T> for a
    callable g(points, normals) evaluated with an order-4 surface rule.

    :param mesh: TetMesh.
    :param form: One of FORMS.
    :param coeff: Coefficient of the form.
    :param mask: Boolean element mask restricting the integration domain.
    :param faces: Boundary faces for the boundary forms.
    :param field: Callable for 'load_from_field'.
    :return: scipy.sparse CSR matrix, or a complex vector for the load.
    """
    if form not in FORMS:
        raise ValueError('Unknown form {}'.format(form))

    if form == 'impedance_boundary':
        if coeff is not None and np.ndim(coeff) != 0:
            raise ValueError('impedance_boundary takes a scalar coefficient')
        tri, faces = boundary_kernels(mesh, faces)
        dofs = mesh.face_edges[faces]
        blocks = tri.tangential_mass()
        if coeff is not None:
            blocks = blocks * coeff
        return scatter(blocks, dofs, dofs, (mesh.n_edges, mesh.n_edges))

    if form == 'load_from_field':
        if not callable(field):
            raise ValueError('load_from_field needs a callable field')
        return _boundary_load(mesh, field, faces)

    kernels = mesh_kernels(mesh)
    coeff = _coefficient(coeff, mesh.n_elements)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (mesh.n_elements,):
            raise ValueError('Element mask does not match the mesh')
        kernels = kernels.subset(mask)
        coeff = None if coeff is None else coeff[mask]

    row_kind, col_kind = FORMS[form]
    rows, n_rows = _dofs(mesh, row_kind)
    cols, n_cols = _dofs(mesh, col_kind)
    if mask is not None:
        rows, cols = rows[mask], cols[mask]

    if form == 'curlcurl':
        blocks = kernels.curlcurl(coeff)
    elif form == 'mass_edge':
        blocks = kernels.edge_mass(coeff)
    elif form == 'mass_face':
        blocks = kernels.face_mass(coeff)
    elif form == 'divdiv':
        blocks = kernels.divdiv(coeff)
    elif form == 'coupling_edge_face':
        blocks = kernels.edge_face_coupling(coeff)
    elif form == 'coupling_edge_node':
        if coeff is not None:
            raise ValueError('coupling_edge_node takes no coefficient')
        blocks = kernels.edge_node_coupling()
    elif form == 'stiffness_node':
        blocks = kernels.node_stiffness(coeff)
    else:
        blocks = kernels.node_mass(coeff)
    return scatter(blocks, rows, cols, (n_rows, n_cols))


def _boundary_load(mesh, field, faces=None):
    tri, faces = boundary_kernels(mesh, faces)
    points = np.einsum('qi,fix->fqx', TRIANGLE_POINTS, tri.vertices)
    normals = np.broadcast_to(tri.normal[:, None, :], points.shape)
    g = np.asarray(field(points.reshape(-1, 3), normals.reshape(-1, 3)))
    g = g.reshape(points.shape)
    w = tri.values(TRIANGLE_POINTS)
    blocks = np.einsum('fqx,fqax,q->fa', g, w, TRIANGLE_WEIGHTS) \
        * tri.area[:, None]
    load = np.zeros(mesh.n_edges, dtype=complex)
    np.add.at(load, mesh.face_edges[faces].ravel(), blocks.ravel())
    return load


def element_dof_integrals(mesh, kind):
    """
    Integrals of the basis functions: int lambda_n per node, or
    int w_e / int phi_f as (n, 3) vectors per edge or face.
    """
    k = mesh_kernels(mesh)
    if kind == 'node':
        out = np.zeros(mesh.n_vertices)
        np.add.at(out, mesh.tets.ravel(),
                  np.repeat(k.volume / 4.0, 4))
        return out
    if kind == 'edge':
        vec = k.whitney.sum(axis=2) * (k.volume / 4.0)[:, None, None]
        out = np.zeros((mesh.n_edges, 3))
        np.add.at(out, mesh.tet_edges.ravel(), vec.reshape(-1, 3))
        return out
    vec = k.rt.sum(axis=2) * (k.volume / 4.0)[:, None, None]
    out = np.zeros((mesh.n_faces, 3))
    np.add.at(out, mesh.tet_faces.ravel(), vec.reshape(-1, 3))
    return out


def gradient_matrix(mesh):
    """
    Discrete gradient from node values to edge DOFs, G[e, b] = 1 and
    G[e, a] = -1 for the edge a -> b.
    """
    n = mesh.n_edges
    rows = np.repeat(np.arange(n), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], n)
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(n, mesh.n_vertices))


def element_gradient(mesh, u):
    """
    Gradients of a P1 field per element, array (n_elements, 3) or
    (n_elements, 3, m) for a stack of fields in the columns of u.
    """
    k = mesh_kernels(mesh)
    vals = np.asarray(u)[mesh.tets]
    if vals.ndim == 2:
        return np.einsum('tn,tnx->tx', vals, k.grads)
    return np.einsum('tnm,tnx->txm', vals, k.grads)


def element_curl(mesh, E):
    """
    Curls of an edge field per element (constant on each element).
    """
    k = mesh_kernels(mesh)
    vals = np.asarray(E)[mesh.tet_edges]
    if vals.ndim == 2:
        return np.einsum('ta,tax->tx', vals, k.curls)
    return np.einsum('tam,tax->txm', vals, k.curls)


def element_divergence(mesh, J):
    k = mesh_kernels(mesh)
    return np.einsum('tk,tk->t', np.asarray(J)[mesh.tet_faces], k.divs)


def element_average_edge(mesh, E):
    """
    Element means of an edge field, array (n_elements, 3).
    """
    k = mesh_kernels(mesh)
    mean = k.whitney.sum(axis=2) / 4.0
    return np.einsum('ta,tax->tx', np.asarray(E)[mesh.tet_edges], mean)


def element_average_face(mesh, J):
    """
    Element means of a face field, array (n_elements, 3).
    """
    k = mesh_kernels(mesh)
    mean = k.rt.sum(axis=2) / 4.0
    return np.einsum('tk,tkx->tx', np.asarray(J)[mesh.tet_faces], mean)


def edge_interpolant(mesh, field):
    """
    Edge DOFs int_e f . t ds of a callable field f(points) -> (n, 3),
    by two-point Gauss quadrature along each edge.
    """
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    dofs = 0
    for s in (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)):
        values = np.asarray(field(a + s * (b - a)))
        dofs = dofs + 0.5 * np.einsum('ex,ex->e', values, b - a)
    return dofs


def face_interpolant(mesh, field):
    """
    Face DOFs int_F f . n_F dS of a callable field f(points) -> (n, 3),
    n_F being the global face normal.
    """
    tri = triangle_kernels(mesh.vertices[mesh.faces])
    points = np.einsum('qi,fix->fqx', TRIANGLE_POINTS, tri.vertices)
    values = np.asarray(field(points.reshape(-1, 3))).reshape(points.shape)
    flux = np.einsum('fqx,fx,q->f', values, tri.normal, TRIANGLE_WEIGHTS)
    return flux * tri.area


def edge_interpolant_of_elements(mesh, vectors, mask=None):
    """
    Edge DOFs of an element-wise constant vector field, averaged over the
    elements sharing each edge. Edges without a masked element get zero.
    """
    mask = np.ones(mesh.n_elements, dtype=bool) if mask is None else mask
    x = mesh.vertices
    tangent = x[mesh.edges[:, 1]] - x[mesh.edges[:, 0]]
    edges = mesh.tet_edges[mask]
    values = np.einsum('tx,tax->ta', np.asarray(vectors)[mask],
                       tangent[edges])
    return _average(edges, values, mesh.n_edges)


def face_interpolant_of_elements(mesh, vectors, mask=None):
    """
    Face DOFs (fluxes along the global normal) of an element-wise constant
    vector field, averaged over the masked elements sharing each face.
    """
    mask = np.ones(mesh.n_elements, dtype=bool) if mask is None else mask
    x = mesh.vertices
    f = mesh.faces
    area_vector = 0.5 * np.cross(x[f[:, 1]] - x[f[:, 0]],
                                 x[f[:, 2]] - x[f[:, 0]])
    faces = mesh.tet_faces[mask]
    values = np.einsum('tx,tkx->tk', np.asarray(vectors)[mask],
                       area_vector[faces])
    return _average(faces, values, mesh.n_faces)


def _average(index, values, n):
    index = index.ravel()
    values = values.ravel()
    count = np.bincount(index, minlength=n)
    total = np.bincount(index, weights=values.real, minlength=n)
    if np.iscomplexobj(values):
        total = total + 1j * np.bincount(index, weights=values.imag,
                                         minlength=n)
    return np.where(count > 0, total / np.maximum(count, 1), 0)


@dataclass
class SparseSystem:
    """
    Linear system A x = b on the free DOFs. prolongation maps the free
    DOFs (without multipliers) back to the full numbering, constrained
    marks full DOFs that were folded or eliminated.
    """
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    prolongation: sparse.csr_matrix
    constrained: np.ndarray
    n_multipliers: int = 0
    labels: dict = field(default_factory=dict)

    @classmethod
    def from_full(cls, matrix, rhs):
        matrix = sparse.csr_matrix(matrix)
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise ValueError('The system matrix must be square')
        rhs = np.asarray(rhs)
        if rhs.shape[0] != n:
            raise ValueError('Right-hand side does not match the matrix')
        return cls(matrix=matrix, rhs=rhs,
                   prolongation=sparse.identity(n, format='csr'),
                   constrained=np.zeros(n, dtype=bool))

    @property
    def n_free(self):
        return self.matrix.shape[0]

    @property
    def n_full(self):
        return self.prolongation.shape[0]

    def expand(self, x):
        """
        Full DOF vector(s) from a solution of the constrained system.
        """
        x = np.asarray(x)
        return self.prolongation @ x[:self.prolongation.shape[1]]

    def multipliers(self, x):
        return np.asarray(x)[self.prolongation.shape[1]:]

    def empty_rows(self):
        return np.flatnonzero(np.diff(self.matrix.indptr) == 0)


def apply_constraints(system, kind, dofs=None, blocks=None, indices=None,
                      weights=None):
    """
    Applies one constraint to a system and returns the new system.

    periodic: folds every slave row and column onto its master;
        dofs is a DofMaps and blocks names the DOF kind of each block of
        the unknown vector, e.g. ('edge', 'node').
    essential-zero-tangential / essential-zero-normal: eliminates the full
        DOFs in indices with value zero.
    zero-mean: appends one Lagrange multiplier per row of weights, the
        rows being functionals on the full DOFs.

    :return: SparseSystem
    """
    if kind != 'zero-mean' and system.n_multipliers:
        raise ValueError('Multipliers must be appended last')

    if kind == 'periodic':
        if system.constrained.any():
            raise ValueError('Periodic folding must come first')
        if dofs is None or blocks is None:
            raise ValueError('Periodic folding needs dofs and blocks')
        fold = sparse.block_diag([dofs.prolongation(b) for b in blocks],
                                 format='csr')
        if fold.shape[0] != system.n_full:
            raise ValueError('Blocks do not match the system size')
        masters = np.concatenate([
            dofs.master(b) + off for b, off in
            zip(blocks, np.cumsum([0] + [len(dofs.master(b))
                                         for b in blocks])[:-1])])
        constrained = masters != np.arange(system.n_full)
        return _transform(system, fold, constrained)

    if kind in ('essential-zero-tangential', 'essential-zero-normal'):
        indices = np.unique(np.asarray(indices, dtype=np.int64))
        if np.any(system.constrained[indices]):
            raise ValueError('Conflicting constraints on DOF {}'.format(
                int(indices[system.constrained[indices]][0])))
        P = system.prolongation.tocsr()
        columns = P[indices].indices
        keep = np.setdiff1d(np.arange(P.shape[1]), columns)
        select = sparse.csr_matrix(
            (np.ones(len(keep)), (keep, np.arange(len(keep)))),
            shape=(P.shape[1], len(keep)))
        constrained = system.constrained.copy()
        constrained[indices] = True
        return _transform(system, select, constrained)

    if kind == 'zero-mean':
        w = np.atleast_2d(np.asarray(weights))
        if w.shape[1] != system.n_full:
            raise ValueError('Weights do not match the system size')
        reduced = sparse.csr_matrix(system.prolongation.T @ w.T)
        k = w.shape[0]
        top = sparse.hstack([system.matrix, sparse.vstack([
            reduced, sparse.csr_matrix((system.n_multipliers, k))])])
        bottom = sparse.hstack([reduced.T, sparse.csr_matrix(
            (k, system.n_multipliers + k))])
        matrix = sparse.vstack([top, bottom]).tocsr()
        rhs = system.rhs
        pad = np.zeros((k,) + rhs.shape[1:], dtype=rhs.dtype)
        return replace(system, matrix=matrix,
                       rhs=np.concatenate([rhs, pad]),
                       n_multipliers=system.n_multipliers + k)

    raise ValueError('Unknown constraint {}'.format(kind))


def _transform(system, T, constrained):
    T = sparse.csr_matrix(T)
    matrix = (T.T @ system.matrix @ T).tocsr()
    rhs = T.T @ system.rhs
    return replace(system, matrix=matrix, rhs=np.asarray(rhs),
                   prolongation=(system.prolongation @ T).tocsr(),
                   constrained=constrained)
