# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
File output of the solver: legacy ASCII VTK unstructured grids with
element-averaged fields, a binary DOF container with a JSON header,
tensors as JSON and tables as CSV.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np

from .fem import element_average_edge, element_average_face

logger = logging.getLogger(__name__)

VTK_TETRA = 10
DOF_MAGIC = b'NANODOF1'


def _open(path, mode):
    try:
        return open(path, mode)
    except OSError as err:
        raise OSError('Cannot open {}: {}'.format(path, err.strerror))


def field_arrays(mesh, E=None, J=None, name='E', current_name='J'):
    """
    Element-averaged real and imaginary parts of an edge field E and a face
    field J, named REAL_<name>, IMAG_<name>, REAL_<current_name> and
    IMAG_<current_name>.
    """
    arrays = {}
    if E is not None:
        mean = element_average_edge(mesh, E)
        arrays['REAL_' + name] = mean.real
        arrays['IMAG_' + name] = mean.imag
    if J is not None:
        mean = element_average_face(mesh, J)
        arrays['REAL_' + current_name] = mean.real
        arrays['IMAG_' + current_name] = mean.imag
    return arrays


def write_vtk(path, mesh, cell_data=None, title='nanosim'):
    """
    Writes a mesh and element data as a legacy ASCII VTK 3.0 unstructured
    grid of tetrahedra. Vector arrays have shape (n_elements, 3), scalar
    arrays (n_elements,); integer scalars are written as int.

    :param path: Output file.
    :param mesh: TetMesh.
    :param cell_data: Dictionary name -> array.
    :param title: Header line.
    """
    cell_data = {} if cell_data is None else cell_data
    n = mesh.n_elements
    for name, values in cell_data.items():
        if len(values) != n:
            raise ValueError('Cell data {} has {} values for {} elements'
                             .format(name, len(values), n))
        if ' ' in name:
            raise ValueError('VTK array names cannot contain spaces')

    with _open(path, 'w') as f:
        f.write('# vtk DataFile Version 3.0\n')
        f.write(title.splitlines()[0][:255] + '\n')
        f.write('ASCII\nDATASET UNSTRUCTURED_GRID\n')
        f.write('POINTS {} double\n'.format(mesh.n_vertices))
        np.savetxt(f, mesh.global_vertices, fmt='%.9e')
        f.write('CELLS {} {}\n'.format(n, 5 * n))
        np.savetxt(f, np.hstack([np.full((n, 1), 4), mesh.tets]), fmt='%d')
        f.write('CELL_TYPES {}\n'.format(n))
        np.savetxt(f, np.full(n, VTK_TETRA), fmt='%d')
        if cell_data:
            f.write('CELL_DATA {}\n'.format(n))
        for name, values in cell_data.items():
            values = np.asarray(values)
            if values.ndim == 2:
                f.write('VECTORS {} double\n'.format(name))
                np.savetxt(f, values, fmt='%.9e')
            elif np.issubdtype(values.dtype, np.integer):
                f.write('SCALARS {} int 1\nLOOKUP_TABLE default\n'.format(
                    name))
                np.savetxt(f, values, fmt='%d')
            else:
                f.write('SCALARS {} double 1\nLOOKUP_TABLE default\n'.format(
                    name))
                np.savetxt(f, values, fmt='%.9e')
    logger.debug('Wrote %s', path)
    return Path(path)


def read_vtk(path):
    """
    Reads a file written by write_vtk.

    :return: Dictionary with points, cells, cell_types and cell_data.
    """
    with _open(path, 'r') as f:
        tokens = f.read().split('\n')

    lines = iter(tokens)
    header = next(lines)
    if not header.startswith('# vtk DataFile Version'):
        raise ValueError('{} is not a legacy VTK file'.format(path))
    out = {'title': next(lines), 'cell_data': {}}
    if next(lines).strip() != 'ASCII':
        raise ValueError('Only ASCII VTK files are supported')

    def block(count, dtype):
        return np.array([next(lines).split() for _ in range(count)],
                        dtype=dtype)

    n_cells = 0
    for line in lines:
        words = line.split()
        if not words:
            continue
        key = words[0]
        if key == 'POINTS':
            out['points'] = block(int(words[1]), float)
        elif key == 'CELLS':
            n_cells = int(words[1])
            out['cells'] = block(n_cells, np.int64)[:, 1:]
        elif key == 'CELL_TYPES':
            out['cell_types'] = block(int(words[1]), np.int64).ravel()
        elif key == 'VECTORS':
            out['cell_data'][words[1]] = block(n_cells, float)
        elif key == 'SCALARS':
            next(lines)
            dtype = np.int64 if words[2] == 'int' else float
            out['cell_data'][words[1]] = block(n_cells, dtype).ravel()
    return out


def write_dofs(path, values, kind, mesh_id, **metadata):
    """
    Writes a complex DOF vector to a binary container: 8 magic bytes, the
    header length as little-endian uint64, a UTF-8 JSON header and the
    values as little-endian float64 (re, im) pairs.

    :param path: Output file.
    :param values: Complex vector.
    :param kind: DOF kind, 'edge', 'face' or 'node'.
    :param mesh_id: Fingerprint of the mesh.
    """
    values = np.ascontiguousarray(values, dtype=np.complex128)
    header = dict(metadata, dimension=len(values), kind=kind, mesh=mesh_id,
                  dtype='<f8', layout='re,im')
    encoded = json.dumps(header, sort_keys=True).encode('utf-8')
    with _open(path, 'wb') as f:
        f.write(DOF_MAGIC)
        f.write(struct.pack('<Q', len(encoded)))
        f.write(encoded)
        f.write(values.view(np.float64).astype('<f8').tobytes())
    return Path(path)


def read_dofs(path):
    """
    Reads a DOF container.

    :return: (complex vector, header dictionary)
    """
    with _open(path, 'rb') as f:
        if f.read(len(DOF_MAGIC)) != DOF_MAGIC:
            raise ValueError('{} is not a DOF container'.format(path))
        (length,) = struct.unpack('<Q', f.read(8))
        header = json.loads(f.read(length).decode('utf-8'))
        data = np.frombuffer(f.read(), dtype='<f8')
    if len(data) != 2 * header['dimension']:
        raise ValueError('{} is truncated'.format(path))
    return data[0::2] + 1j * data[1::2], header


def write_json(path, data):
    with _open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
    return Path(path)


def read_json(path):
    with _open(path, 'r') as f:
        return json.load(f)


def write_tensors(path, tensors, **extra):
    """
    Writes HomogenizedTensors as JSON, complex entries as [re, im] pairs.
    """
    data = tensors.to_dict()
    data.update(extra)
    return write_json(path, data)


def write_table(path, table):
    """
    Writes a DataFrame as CSV without the index.
    """
    try:
        table.to_csv(path, index=False)
    except OSError as err:
        raise OSError('Cannot write {}: {}'.format(path, err.strerror))
    return Path(path)
