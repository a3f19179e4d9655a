# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Structured tetrahedral meshes of the computational box, subdomain
tagging of the nanoparticle array, periodic identification of the
reference cell and extraction of the particle submeshes.
"""

from dataclasses import dataclass
import hashlib
import itertools
import logging

import numpy as np
from scipy import sparse

from .model import UNTAGGED, VACUUM, HOST, METAL

logger = logging.getLogger(__name__)

# Local edges and faces of a tetrahedron, face k is opposite vertex k.
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))

# Every hexahedron is cut into six tetrahedra along its main diagonal, one
# per monotone lattice path from the low to the high corner.
KUHN_PATHS = tuple(itertools.permutations(range(3)))


class Inclusion:
    """
    Metal inclusion of the reference cell Y, given in cell coordinates.
    A sphere is described by its radius, a box by its half widths. Both
    are closed sets: a point on the surface belongs to the inclusion.
    """

    shapes = ('sphere', 'box')

    def __init__(self, shape='sphere', center=(0.5, 0.5, 0.5), radius=0.4,
                 half_widths=None):
        if shape not in self.shapes:
            raise ValueError('Unknown inclusion shape {}'.format(shape))
        self.shape = shape
        self.center = np.asarray(center, dtype=float)
        if self.center.shape != (3,):
            raise ValueError('The inclusion center must have 3 components')
        if shape == 'sphere':
            if not radius > 0:
                raise ValueError('The inclusion radius must be positive')
            self.radius = float(radius)
            self.half_widths = np.full(3, self.radius)
        else:
            if half_widths is None:
                raise ValueError('A box inclusion needs half_widths')
            self.half_widths = np.asarray(half_widths, dtype=float)
            if self.half_widths.shape != (3,) or np.any(
                    self.half_widths <= 0):
                raise ValueError('half_widths must be 3 positive numbers')
            self.radius = None

    def contains(self, points):
        """
        Closed-set membership test.

        :param points: Array (n, 3) of cell coordinates.
        :return: Boolean array (n,).
        """
        diff = np.asarray(points, dtype=float) - self.center
        if self.shape == 'sphere':
            return np.einsum('ij,ij->i', diff, diff) <= \
                self.radius ** 2 * (1 + 1e-12)
        return np.all(np.abs(diff) <= self.half_widths * (1 + 1e-12),
                      axis=1)

    @property
    def volume(self):
        if self.shape == 'sphere':
            return 4.0 / 3.0 * np.pi * self.radius ** 3
        return float(np.prod(2 * self.half_widths))

    def to_dict(self):
        if self.shape == 'sphere':
            return {'shape': 'sphere', 'center': self.center.tolist(),
                    'radius': self.radius}
        return {'shape': 'box', 'center': self.center.tolist(),
                'half_widths': self.half_widths.tolist()}


class ArrayGeometry:
    """
    Periodic array of identical metal particles. The reference cell
    Y = (0, l1) x (0, l2) x (0, l3) holds one inclusion; the array repeats
    the cell scaled by eta counts[i] times along axis i. The scatterer box
    Omega_s is the array padded by host_margin elements of host, the
    domain Omega is Omega_s padded by vacuum_padding elements of vacuum.

    Every cell is meshed with cell_resolution elements per axis so that
    the macro grid is aligned with the lattice.

    :param cell_lengths: Side lengths of Y.
    :param inclusion: Inclusion instance in cell coordinates.
    :param counts: Number of particles per axis.
    :param eta: Scale factor between cell coordinates and macro units.
    :param cell_resolution: Elements per cell edge along each axis.
    :param host_margin: Host layer around the array, in elements.
    :param vacuum_padding: Vacuum layer around Omega_s, in elements.
    """

    def __init__(self, cell_lengths=(1.0, 1.0, 1.0), inclusion=None,
                 counts=(1, 1, 1), eta=1.0, cell_resolution=(8, 8, 8),
                 host_margin=0, vacuum_padding=2):
        self.cell_lengths = np.asarray(cell_lengths, dtype=float)
        self.inclusion = Inclusion() if inclusion is None else inclusion
        self.counts = np.asarray(counts, dtype=int)
        self.eta = float(eta)
        self.cell_resolution = np.broadcast_to(
            np.asarray(cell_resolution, dtype=int), (3,)).copy()
        self.host_margin = int(host_margin)
        self.vacuum_padding = int(vacuum_padding)

        if self.cell_lengths.shape != (3,) or np.any(self.cell_lengths <= 0):
            raise ValueError('cell_lengths must be 3 positive numbers')
        if self.counts.shape != (3,) or np.any(self.counts < 1):
            raise ValueError('counts must be 3 integers >= 1')
        if not self.eta > 0:
            raise ValueError('eta must be positive')
        if np.any(self.cell_resolution < 1):
            raise ValueError('cell_resolution must be >= 1 per axis')
        if self.host_margin < 0:
            raise ValueError('host_margin cannot be negative')
        if self.vacuum_padding < 1:
            raise ValueError('vacuum_padding must be at least one element '
                             'so that Omega_s lies inside Omega')

        # Checks that the inclusion stays strictly inside the cell
        low = self.inclusion.center - self.inclusion.half_widths
        high = self.inclusion.center + self.inclusion.half_widths
        if np.any(low <= 0) or np.any(high >= self.cell_lengths):
            raise ValueError('The inclusion must lie strictly inside the '
                             'reference cell')

    @property
    def n_particles(self):
        return int(np.prod(self.counts))

    @property
    def period(self):
        """
        Lattice period in macro units.
        """
        return self.eta * self.cell_lengths

    @property
    def spacing(self):
        return self.period / self.cell_resolution

    @property
    def array_index_offset(self):
        """
        Grid index of the low corner of the array in the macro mesh.
        """
        return self.vacuum_padding + self.host_margin

    @property
    def grid_shape(self):
        return (self.counts * self.cell_resolution
                + 2 * (self.host_margin + self.vacuum_padding))

    @property
    def array_extents(self):
        return np.stack([np.zeros(3), self.counts * self.period], axis=1)

    @property
    def scatterer_extents(self):
        pad = self.host_margin * self.spacing
        ext = self.array_extents
        return np.stack([ext[:, 0] - pad, ext[:, 1] + pad], axis=1)

    @property
    def domain_extents(self):
        pad = (self.host_margin + self.vacuum_padding) * self.spacing
        ext = self.array_extents
        return np.stack([ext[:, 0] - pad, ext[:, 1] + pad], axis=1)

    @property
    def cell_extents(self):
        return np.stack([np.zeros(3), self.cell_lengths], axis=1)

    @property
    def analytic_volume_fraction(self):
        return self.inclusion.volume / float(np.prod(self.cell_lengths))

    def lattice_vector(self, k):
        """
        Translation of particle k from particle 0 in macro units.
        """
        cell = np.array(np.unravel_index(k, tuple(self.counts)))
        return cell * self.period

    def inclusion_mask(self, local4):
        """
        Inclusion test on barycenters given as four times their grid index
        inside one cell. Integer input makes the test identical for every
        cell of the array.
        """
        y = local4 / (4.0 * self.cell_resolution) * self.cell_lengths
        return self.inclusion.contains(y)

    def to_dict(self):
        return {
            'cell_lengths': self.cell_lengths.tolist(),
            'inclusion': self.inclusion.to_dict(),
            'counts': self.counts.tolist(),
            'eta': self.eta,
            'cell_resolution': self.cell_resolution.tolist(),
            'host_margin': self.host_margin,
            'vacuum_padding': self.vacuum_padding
        }


class TetMesh:
    """
    Conforming tetrahedral mesh with global edges and faces.

    Edges run from the lower to the higher vertex id, faces store their
    vertex ids sorted and carry the normal given by the right-hand rule on
    that order. tet_edge_signs and tet_face_signs relate the local Whitney
    and Raviart-Thomas functions of each element to these global
    orientations.

    :param vertices: Array (n_vertices, 3).
    :param tets: Array (n_elements, 4) of vertex ids.
    :param grid_index: Integer lattice index of each vertex, if any.
    :param spacing: Grid spacing of a structured mesh.
    :param resolution: Cells per axis of a structured mesh.
    :param hex_index: Hexahedron of each element in a structured mesh.
    :param kuhn_index: Position of each element inside its hexahedron.
    """

    def __init__(self, vertices, tets, grid_index=None, spacing=None,
                 resolution=None, hex_index=None, kuhn_index=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        tets = np.array(tets, dtype=np.int64)
        self.grid_index = grid_index
        self.spacing = None if spacing is None else np.asarray(spacing)
        self.resolution = None if resolution is None else \
            np.asarray(resolution)
        self.hex_index = hex_index
        self.kuhn_index = kuhn_index

        # Subdomain data, set by tag_subdomains / tag_reference_cell
        self.tags = None
        self.particle = None
        self.in_array = None
        self.geometry = None
        self.translation = np.zeros(3)
        self.cache = {}

        # Flips negatively oriented elements by swapping two vertices
        det = self._determinants(tets)
        scale = np.max(np.abs(det)) if len(det) else 1.0
        if np.any(np.abs(det) <= 1e-12 * scale):
            raise ValueError('The mesh contains degenerate elements')
        flip = det < 0
        tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()
        self.tets = tets
        self.volumes = np.abs(det) / 6.0

        self._build_edges()
        self._build_faces()

    def _determinants(self, tets):
        x = self.vertices[tets]
        return np.linalg.det(x[:, 1:] - x[:, :1])

    def _pair_keys(self, a, b):
        return np.minimum(a, b) * self.n_vertices + np.maximum(a, b)

    def _triple_keys(self, tri):
        tri = np.sort(tri, axis=-1)
        n = self.n_vertices
        return (tri[..., 0] * n + tri[..., 1]) * n + tri[..., 2]

    def _build_edges(self):
        a = np.stack([self.tets[:, i] for i, _ in LOCAL_EDGES], axis=1)
        b = np.stack([self.tets[:, j] for _, j in LOCAL_EDGES], axis=1)
        keys, inverse = np.unique(self._pair_keys(a, b).ravel(),
                                  return_inverse=True)
        self.edge_keys = keys
        self.edges = np.stack([keys // self.n_vertices,
                               keys % self.n_vertices], axis=1)
        self.tet_edges = inverse.reshape(-1, 6)
        self.tet_edge_signs = np.where(a < b, 1.0, -1.0)

    def _build_faces(self):
        tri = np.stack([self.tets[:, list(f)] for f in LOCAL_FACES], axis=1)
        keys, inverse = np.unique(self._triple_keys(tri).ravel(),
                                  return_inverse=True)
        n = self.n_vertices
        self.face_keys = keys
        self.faces = np.stack([keys // (n * n), (keys // n) % n, keys % n],
                              axis=1)
        self.tet_faces = inverse.reshape(-1, 4)

        # Outward test of the global face normal against the opposite vertex
        x = self.vertices
        fv = self.faces[self.tet_faces]
        normal = np.cross(x[fv[..., 1]] - x[fv[..., 0]],
                          x[fv[..., 2]] - x[fv[..., 0]])
        outward = np.einsum('tkx,tkx->tk', normal,
                            x[fv[..., 0]] - x[self.tets])
        self.tet_face_signs = np.where(outward > 0, 1.0, -1.0)

        # Adjacent elements of every face, -1 marks the mesh boundary
        flat = self.tet_faces.ravel()
        owner = np.repeat(np.arange(self.n_elements), 4)
        order = np.argsort(flat, kind='stable')
        flat, owner = flat[order], owner[order]
        first = np.r_[True, flat[1:] != flat[:-1]]
        counts = np.bincount(flat, minlength=len(keys))
        if np.any(counts > 2):
            raise ValueError('Non-conforming mesh: a face has more than '
                             'two elements')
        self.face_tets = np.full((len(keys), 2), -1, dtype=np.int64)
        self.face_tets[flat[first], 0] = owner[first]
        self.face_tets[flat[~first], 1] = owner[~first]

        f = self.faces
        self.face_edges = np.stack([
            self.edge_index(f[:, 0], f[:, 1]),
            self.edge_index(f[:, 0], f[:, 2]),
            self.edge_index(f[:, 1], f[:, 2])], axis=1)

    def edge_index(self, a, b):
        """
        Global ids of the edges between vertices a and b.
        """
        keys = self._pair_keys(np.asarray(a), np.asarray(b))
        idx = np.searchsorted(self.edge_keys, keys)
        idx = np.minimum(idx, len(self.edge_keys) - 1)
        if np.any(self.edge_keys[idx] != keys):
            raise ValueError('Edge not in mesh')
        return idx

    def face_index(self, tri):
        """
        Global ids of the faces with the given vertex triples.
        """
        keys = self._triple_keys(np.asarray(tri))
        idx = np.searchsorted(self.face_keys, keys)
        idx = np.minimum(idx, len(self.face_keys) - 1)
        if np.any(self.face_keys[idx] != keys):
            raise ValueError('Face not in mesh')
        return idx

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.tets)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def barycenters(self):
        return self.vertices[self.tets].mean(axis=1)

    @property
    def global_vertices(self):
        """
        Vertex coordinates in the frame of the mesh this one was cut from.
        """
        return self.vertices + self.translation

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_tets[:, 1] < 0)

    @property
    def boundary_edges(self):
        return np.unique(self.face_edges[self.boundary_faces])

    @property
    def boundary_nodes(self):
        return np.unique(self.faces[self.boundary_faces])

    def interface_faces(self, mask):
        """
        Faces on the boundary of the element set mask, including the
        faces of mask that lie on the mesh boundary.
        """
        mask = np.asarray(mask, dtype=bool)
        t0, t1 = self.face_tets[:, 0], self.face_tets[:, 1]
        in0 = mask[t0]
        in1 = np.where(t1 >= 0, mask[np.maximum(t1, 0)], False)
        return np.flatnonzero(in0 != in1)

    def interior_faces(self, mask):
        """
        Faces with both neighbours in the element set mask.
        """
        mask = np.asarray(mask, dtype=bool)
        t0, t1 = self.face_tets[:, 0], self.face_tets[:, 1]
        return np.flatnonzero(mask[t0] & (t1 >= 0)
                              & mask[np.maximum(t1, 0)])

    def interior_edges(self, mask):
        """
        Edges of the element set mask that do not touch its boundary.
        """
        touched = np.unique(self.tet_edges[np.asarray(mask, dtype=bool)])
        boundary = np.unique(self.face_edges[self.interface_faces(mask)])
        return np.setdiff1d(touched, boundary, assume_unique=True)

    def boundary_face_markers(self):
        """
        Boundary face sets of the domain, the scatterer and the particles.
        """
        markers = {'domain': self.boundary_faces}
        if self.tags is not None:
            markers['scatterer'] = self.interface_faces(self.tags != VACUUM)
            if self.particle is not None and np.any(self.particle >= 0):
                for k in range(int(self.particle.max()) + 1):
                    markers['particle_{}'.format(k)] = \
                        self.interface_faces(self.particle == k)
        return markers

    @property
    def fingerprint(self):
        """
        Content hash of vertices and connectivity.
        """
        digest = hashlib.blake2b(digest_size=8)
        digest.update(np.ascontiguousarray(self.vertices).tobytes())
        digest.update(np.ascontiguousarray(self.tets).tobytes())
        return digest.hexdigest()


def build_box_mesh(extents, resolution):
    """
    Builds a Kuhn-subdivided box mesh with 6 tetrahedra per hexahedron.
    All hexahedra are cut along the same diagonal, so opposite faces of the
    box carry identical triangulations.

    :param extents: Array (3, 2) with low and high bound per axis.
    :param resolution: Number of hexahedra per axis.
    :return: TetMesh
    """
    extents = np.asarray(extents, dtype=float).reshape(3, 2)
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (3,))
    if np.any(res < 1):
        raise ValueError('The resolution must be at least 1 per axis')
    if np.any(extents[:, 1] <= extents[:, 0]):
        raise ValueError('The box extents must be positive')

    n0, n1, n2 = res
    spacing = (extents[:, 1] - extents[:, 0]) / res
    grid = np.stack(np.meshgrid(np.arange(n0 + 1), np.arange(n1 + 1),
                                np.arange(n2 + 1), indexing='ij'),
                    axis=-1).reshape(-1, 3)
    vertices = extents[:, 0] + grid * spacing

    hexes = np.stack(np.meshgrid(np.arange(n0), np.arange(n1),
                                 np.arange(n2), indexing='ij'),
                     axis=-1).reshape(-1, 3)

    # Lattice offsets of the four vertices of each Kuhn tetrahedron
    offsets = np.zeros((len(KUHN_PATHS), 4, 3), dtype=np.int64)
    for p, path in enumerate(KUHN_PATHS):
        for step, axis in enumerate(path):
            offsets[p, step + 1:, axis] += 1

    corners = hexes[:, None, None, :] + offsets[None, :, :, :]
    ids = (corners[..., 0] * (n1 + 1) + corners[..., 1]) * (n2 + 1) \
        + corners[..., 2]
    tets = ids.reshape(-1, 4)

    mesh = TetMesh(vertices, tets, grid_index=grid, spacing=spacing,
                   resolution=np.array(res),
                   hex_index=np.repeat(hexes, len(KUHN_PATHS), axis=0),
                   kuhn_index=np.tile(np.arange(len(KUHN_PATHS)),
                                      len(hexes)))
    logger.debug('Box mesh: %d vertices, %d elements, %d edges, %d faces',
                 mesh.n_vertices, mesh.n_elements, mesh.n_edges,
                 mesh.n_faces)
    return mesh


def build_macro_mesh(geom):
    """
    Mesh of the whole domain Omega aligned with the lattice of geom.
    """
    return build_box_mesh(geom.domain_extents, geom.grid_shape)


def build_cell_mesh(geom):
    """
    Mesh of the reference cell Y with geom.cell_resolution elements per
    axis.
    """
    return build_box_mesh(geom.cell_extents, geom.cell_resolution)


def _barycenter_index4(mesh):
    if mesh.grid_index is None:
        raise ValueError('Tagging needs a structured mesh')
    return mesh.grid_index[mesh.tets].sum(axis=1)


def tag_subdomains(mesh, geom):
    """
    Tags every element of the macro mesh as vacuum, host or metal by the
    position of its barycenter. Metal elements also get the index of their
    particle. The test runs in integer lattice coordinates relative to the
    cell holding the element, so the metal element sets of all particles
    are exact translates of each other.

    :param mesh: Mesh from build_macro_mesh(geom).
    :param geom: ArrayGeometry.
    :return: The same mesh, tagged.
    """
    if mesh.resolution is None or np.any(
            mesh.resolution != geom.grid_shape):
        raise ValueError('Mesh does not match the array geometry')

    b4 = _barycenter_index4(mesh)
    n_c = geom.cell_resolution
    pad, margin = geom.vacuum_padding, geom.host_margin

    # Barycenters never lie on a grid plane, so strict bounds are exact
    s_hi = 4 * (pad + 2 * margin + geom.counts * n_c)
    in_scatterer = np.all((b4 > 4 * pad) & (b4 < s_hi), axis=1)

    rel = b4 - 4 * geom.array_index_offset
    cell = rel // (4 * n_c)
    in_array = np.all((cell >= 0) & (cell < geom.counts), axis=1)
    local4 = rel - 4 * n_c * cell
    metal = in_array & geom.inclusion_mask(local4)

    tags = np.full(mesh.n_elements, VACUUM, dtype=np.int64)
    tags[in_scatterer] = HOST
    tags[metal] = METAL

    particle = np.full(mesh.n_elements, -1, dtype=np.int64)
    safe = np.clip(cell, 0, geom.counts - 1)
    particle[metal] = np.ravel_multi_index(tuple(safe[metal].T),
                                           tuple(geom.counts))

    counts = np.bincount(particle[metal], minlength=geom.n_particles)
    if np.any(counts == 0):
        raise ValueError('Particle {} is not resolved by any element, '
                         'increase cell_resolution'.format(
                             int(np.argmin(counts))))

    # Checks that no face joins two different particles
    t0, t1 = mesh.face_tets[:, 0], mesh.face_tets[:, 1]
    inner = t1 >= 0
    p0, p1 = particle[t0[inner]], particle[t1[inner]]
    if np.any((p0 >= 0) & (p1 >= 0) & (p0 != p1)):
        raise ValueError('Two particles share a face, increase '
                         'cell_resolution or reduce the inclusion')

    mesh.tags = tags
    mesh.particle = particle
    mesh.in_array = in_array
    mesh.geometry = geom
    logger.info('Tagged %d metal, %d host and %d vacuum elements in %d '
                'particles', int(metal.sum()),
                int(np.sum(tags == HOST)), int(np.sum(tags == VACUUM)),
                geom.n_particles)
    return mesh


def tag_reference_cell(cell_mesh, geom):
    """
    Tags the elements of the reference cell mesh with the same barycenter
    rule as tag_subdomains.
    """
    if cell_mesh.resolution is None or np.any(
            cell_mesh.resolution != geom.cell_resolution):
        raise ValueError('Cell mesh does not match the cell resolution')
    metal = geom.inclusion_mask(_barycenter_index4(cell_mesh))
    cell_mesh.tags = np.where(metal, METAL, HOST).astype(np.int64)
    cell_mesh.particle = np.where(metal, 0, -1).astype(np.int64)
    cell_mesh.in_array = np.ones(cell_mesh.n_elements, dtype=bool)
    cell_mesh.geometry = geom
    return cell_mesh


def voxel_volume_fraction(mesh):
    """
    Volume fraction of metal-tagged elements in a tagged mesh.
    """
    if mesh.tags is None or np.any(mesh.tags == UNTAGGED):
        raise ValueError('Mesh is not tagged')
    metal = mesh.tags == METAL
    return float(mesh.volumes[metal].sum() / mesh.volumes.sum())


@dataclass
class DofMaps:
    """
    Node, edge and face numbering of one mesh. The master arrays send
    every entity to the entity that carries its degree of freedom; they
    are the identity for meshes without periodic identification.
    """
    n_nodes: int
    n_edges: int
    n_faces: int
    node_master: np.ndarray
    edge_master: np.ndarray
    face_master: np.ndarray
    boundary_nodes: np.ndarray
    boundary_edges: np.ndarray
    boundary_faces: np.ndarray
    periodic: bool = False

    def master(self, kind):
        return {'node': self.node_master, 'edge': self.edge_master,
                'face': self.face_master}[kind]

    def prolongation(self, kind):
        """
        Sparse 0/1 matrix from the master DOFs to all DOFs of one kind.
        """
        master = self.master(kind)
        classes, column = np.unique(master, return_inverse=True)
        n = len(master)
        return sparse.csr_matrix(
            (np.ones(n), (np.arange(n), column)), shape=(n, len(classes)))

    def n_free(self, kind):
        return len(np.unique(self.master(kind)))


def build_dof_maps(mesh):
    """
    Plain DOF maps of a mesh, boundary sets taken from the mesh boundary.
    """
    return DofMaps(
        n_nodes=mesh.n_vertices, n_edges=mesh.n_edges,
        n_faces=mesh.n_faces,
        node_master=np.arange(mesh.n_vertices),
        edge_master=np.arange(mesh.n_edges),
        face_master=np.arange(mesh.n_faces),
        boundary_nodes=mesh.boundary_nodes,
        boundary_edges=mesh.boundary_edges,
        boundary_faces=mesh.boundary_faces)


def build_periodic_pairs(cell_mesh):
    """
    Identifies every node, edge and face on a max-coordinate side of the
    cell with its translate on the opposite side. All axes are reduced at
    once, so corner and edge chains end at a single master.

    :param cell_mesh: Mesh from build_box_mesh.
    :return: Periodic DofMaps.
    """
    grid = cell_mesh.grid_index
    res = cell_mesh.resolution
    if grid is None or res is None:
        raise ValueError('Periodic pairing needs a structured box mesh')
    n1, n2 = res[1] + 1, res[2] + 1

    def vertex_id(g):
        return (g[..., 0] * n1 + g[..., 1]) * n2 + g[..., 2]

    node_master = vertex_id(np.where(grid == res, 0, grid))

    def reduce(entities):
        g = grid[entities]
        shift = np.where(g.min(axis=1) == res, res, 0)
        return vertex_id(g - shift[:, None, :])

    try:
        ev = reduce(cell_mesh.edges)
        edge_master = cell_mesh.edge_index(ev[:, 0], ev[:, 1])
        face_master = cell_mesh.face_index(reduce(cell_mesh.faces))
    except ValueError:
        raise ValueError('Boundary discretizations of opposite cell sides '
                         'do not match')

    return DofMaps(
        n_nodes=cell_mesh.n_vertices, n_edges=cell_mesh.n_edges,
        n_faces=cell_mesh.n_faces, node_master=node_master,
        edge_master=edge_master, face_master=face_master,
        boundary_nodes=np.array([], dtype=np.int64),
        boundary_edges=np.array([], dtype=np.int64),
        boundary_faces=np.array([], dtype=np.int64), periodic=True)


@dataclass
class ParticleEmbedding:
    """
    Maps the local entities of a particle submesh to the macro mesh.
    """
    particle: int
    elements: np.ndarray
    vertices: np.ndarray
    edges: np.ndarray
    faces: np.ndarray


def extract_particle_submesh(mesh, k):
    """
    Cuts the elements of particle k out of a tagged macro mesh. Vertex
    coordinates are rebuilt from lattice indices relative to the cell of
    the particle, so the submeshes of all particles are bitwise identical;
    the lattice position is kept in submesh.translation.

    :param mesh: Mesh tagged by tag_subdomains.
    :param k: Particle index.
    :return: (TetMesh, ParticleEmbedding)
    """
    if mesh.particle is None:
        raise ValueError('Mesh is not tagged')
    elements = np.flatnonzero(mesh.particle == k)
    if len(elements) == 0:
        raise ValueError('Particle {} has no elements'.format(k))
    geom = mesh.geometry

    vertices = np.unique(mesh.tets[elements])
    local_tets = np.searchsorted(vertices, mesh.tets[elements])

    cell = np.array(np.unravel_index(k, tuple(geom.counts)))
    origin = geom.array_index_offset + cell * geom.cell_resolution
    local_grid = mesh.grid_index[vertices] - origin
    sub = TetMesh(local_grid * mesh.spacing, local_tets,
                  grid_index=local_grid, spacing=mesh.spacing)
    sub.translation = mesh.vertices[vertices[0]] - sub.vertices[0]
    sub.tags = np.full(sub.n_elements, METAL, dtype=np.int64)
    sub.particle = np.zeros(sub.n_elements, dtype=np.int64)

    edges = mesh.edge_index(vertices[sub.edges[:, 0]],
                            vertices[sub.edges[:, 1]])
    faces = mesh.face_index(vertices[sub.faces])
    return sub, ParticleEmbedding(particle=k, elements=elements,
                                  vertices=vertices, edges=edges,
                                  faces=faces)
