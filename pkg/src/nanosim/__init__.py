# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
nanosim: multiscale finite element solver for periodic arrays of metal
nanoparticles described by the nonlocal hydrodynamic Drude model.
"""

from .simulation import NanoSim, RunConfig, StageError

__all__ = ['NanoSim', 'RunConfig', 'StageError']
__version__ = '0.1.0'
