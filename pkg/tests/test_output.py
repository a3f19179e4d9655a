# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Test file for the VTK, DOF, JSON and CSV writers
"""

from nanosim.fem import edge_interpolant
from nanosim.homog import HomogenizedTensors
from nanosim.mesh import build_box_mesh
from nanosim.output import (DOF_MAGIC, VTK_TETRA, field_arrays, read_dofs,
                            read_json, read_vtk, write_dofs, write_json,
                            write_table, write_tensors, write_vtk)

import numpy as np
import pandas as pd
import pytest

UNIT = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]


@pytest.fixture
def cube():
    return build_box_mesh(UNIT, 2)


def test_field_arrays(cube):
    """
    A constant complex field gives constant real and imaginary element
    vectors.
    """
    E = edge_interpolant(
        cube, lambda x: np.tile([1.0 + 2.0j, 0.0, 0.0], (len(x), 1)))
    arrays = field_arrays(cube, E=E, name='E0')
    assert set(arrays) == {'REAL_E0', 'IMAG_E0'}
    assert np.abs(arrays['REAL_E0'] - [1, 0, 0]).max() <= 1e-12
    assert np.abs(arrays['IMAG_E0'] - [2, 0, 0]).max() <= 1e-12
    both = field_arrays(cube, E=E, J=np.zeros(cube.n_faces))
    assert set(both) == {'REAL_E', 'IMAG_E', 'REAL_J', 'IMAG_J'}


def test_vtk_file(cube, tmp_path):
    """
    The VTK file holds the mesh and the element data.
    """
    vectors = np.random.default_rng(0).random((cube.n_elements, 3))
    tags = np.arange(cube.n_elements)
    path = write_vtk(tmp_path / 'cube.vtk', cube,
                     {'REAL_E': vectors, 'subdomain': tags})
    data = read_vtk(path)
    assert data['points'] == pytest.approx(cube.vertices)
    assert np.array_equal(data['cells'], cube.tets)
    assert np.all(data['cell_types'] == VTK_TETRA)
    assert data['cell_data']['REAL_E'] == pytest.approx(vectors, rel=1e-8)
    assert np.array_equal(data['cell_data']['subdomain'], tags)
    with open(path) as f:
        assert f.readline().startswith('# vtk DataFile Version 3.0')


@pytest.mark.parametrize('cell_data', [
    {'E': np.zeros((3, 3))},
    {'bad name': np.zeros(48)},
])
def test_vtk_invalid(cube, tmp_path, cell_data):
    """
    Data of the wrong length and names with spaces are rejected.
    """
    with pytest.raises(ValueError):
        write_vtk(tmp_path / 'bad.vtk', cube, cell_data)


def test_vtk_not_vtk(tmp_path):
    """
    Other files are not read as VTK.
    """
    path = tmp_path / 'other.vtk'
    path.write_text('hello\n')
    with pytest.raises(ValueError):
        read_vtk(path)


def test_dof_container(tmp_path):
    """
    The DOF container keeps the values bitwise and the header.
    """
    values = np.array([1.0 + 2.0j, -0.5j, np.pi])
    path = write_dofs(tmp_path / 'E.dofs', values, 'edge', 'abc', omega=0.5)
    back, header = read_dofs(path)
    assert np.array_equal(back, values)
    assert header['kind'] == 'edge' and header['mesh'] == 'abc'
    assert header['dimension'] == 3 and header['omega'] == 0.5
    assert path.read_bytes()[:8] == DOF_MAGIC


def test_dof_container_invalid(tmp_path):
    """
    Wrong magic bytes and truncated data are reported.
    """
    path = write_dofs(tmp_path / 'E.dofs', np.ones(4), 'face', 'abc')
    raw = path.read_bytes()
    truncated = tmp_path / 'short.dofs'
    truncated.write_bytes(raw[:-16])
    with pytest.raises(ValueError):
        read_dofs(truncated)
    other = tmp_path / 'other.dofs'
    other.write_bytes(b'NOTADOFS' + raw[8:])
    with pytest.raises(ValueError):
        read_dofs(other)


def test_missing_directory(tmp_path):
    """
    Unwritable paths raise OSError with the path in the message.
    """
    with pytest.raises(OSError, match='Cannot open'):
        write_json(tmp_path / 'missing' / 'x.json', {})


def test_tensors_json(tmp_path):
    """
    Tensors are written with their extra entries.
    """
    tensors = HomogenizedTensors(mu_hat=np.eye(3), eps_hat=2 * np.eye(3))
    path = write_tensors(tmp_path / 'tensors.json', tensors,
                         analytic_volume_fraction=0.27)
    data = read_json(path)
    assert data['analytic_volume_fraction'] == 0.27
    assert np.array(data['eps_hat']) == pytest.approx(2 * np.eye(3))


def test_csv_table(tmp_path):
    """
    Tables are written without the index.
    """
    table = pd.DataFrame({'omega': [0.5, 0.6], 'EM': [0.1, 0.05]})
    path = write_table(tmp_path / 'errors.csv', table)
    back = pd.read_csv(path)
    assert list(back.columns) == ['omega', 'EM']
    assert back['EM'].tolist() == pytest.approx([0.1, 0.05])
