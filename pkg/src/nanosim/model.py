# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
File with the material classes, the nondimensionalization of the
nonlocal hydrodynamic Drude (NHD) model and the piecewise coefficient
fields of the original and the extended coupled systems.
"""

from dataclasses import dataclass, replace
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

EPS0_SI = 8.8541878128e-12
MU0_SI = 1.25663706212e-6

# Element tags shared by the mesh and every coefficient field.
UNTAGGED = -1
VACUUM = 0
HOST = 1
METAL = 2


class Material:
    """
    Class Material is the super-class of every medium in the scattering
    problem. A material has a relative permittivity eps and a relative
    permeability mu. The class-level dictionary param_dict holds the
    default parameters, every instance copies them at construction so that
    a built instance does not change when the class defaults change.
    """
    param_dict = {
        'eps': 1.0,
        'mu': 1.0
    }

    @classmethod
    def new_parameters(cls, parameters):
        """
        Takes a dictionary of parameters as input. It overrides the default
        parameter values of the class. If unknown parameters or
        non-positive values are given a ValueError is raised.

        :param parameters: A dictionary of parameters.
        """
        cls.check_parameters(parameters)
        for key in parameters:
            cls.param_dict[key] = float(parameters[key])

    @classmethod
    def check_parameters(cls, parameters):
        """
        Checks a dictionary of parameters against param_dict without
        storing it.

        :param parameters: A dictionary of parameters.
        """
        for key in parameters:
            if key not in cls.param_dict:
                raise ValueError('{} is not a parameter of {}'.format(
                    key, cls.__name__))
            value = parameters[key]
            if isinstance(value, bool) or not isinstance(
                    value, (int, float)):
                raise ValueError('{} must be a number'.format(key))
            if not math.isfinite(value) or value <= 0:
                raise ValueError('{} must be positive'.format(key))

    def __init__(self, **overrides):
        self.check_parameters(overrides)
        self.params = dict(self.param_dict)
        self.params.update({k: float(v) for k, v in overrides.items()})

    @property
    def eps(self):
        return self.params['eps']

    @property
    def mu(self):
        return self.params['mu']


class Vacuum(Material):
    """
    Free space surrounding the scatterer.
    """
    param_dict = {
        'eps': 1.0,
        'mu': 1.0
    }


class Dielectric(Material):
    """
    Non-dispersive dielectric host embedding the metal particles.
    """
    param_dict = {
        'eps': 1.0,
        'mu': 1.0
    }


class SiliconDioxide(Dielectric):
    """
    Silicon dioxide host, eps = 3.9.
    """
    param_dict = {
        'eps': 3.9,
        'mu': 1.0
    }


class Water(Dielectric):
    """
    Water host, eps = 80.
    """
    param_dict = {
        'eps': 80.0,
        'mu': 1.0
    }


class Metal(Material):
    """
    Class Metal holds the parameters of the free electron gas of the NHD
    model in SI units:

        omega_p: Plasma frequency (rad/s).

        gamma: Damping constant (rad/s).

        beta: Nonlocality velocity (m/s).

        eps: Relative permittivity of the bound electrons.

        mu: Relative permeability.
    """
    param_dict = {
        'eps': 1.0,
        'mu': 1.0,
        'omega_p': 1.0,
        'gamma': 1.0,
        'beta': 1.0
    }

    @property
    def omega_p(self):
        return self.params['omega_p']

    @property
    def gamma(self):
        return self.params['gamma']

    @property
    def beta(self):
        return self.params['beta']


class Gold(Metal):
    """
    Gold with the standard NHD parameters for nanoplasmonic simulations.
    """
    param_dict = {
        'eps': 9.5,
        'mu': 1.0,
        'omega_p': 1.37e16,
        'gamma': 1.08e14,
        'beta': 1.08e6
    }


METALS = {'gold': Gold, 'metal': Metal}
HOSTS = {
    'silicon_dioxide': SiliconDioxide,
    'water': Water,
    'dielectric': Dielectric,
    'vacuum': Vacuum
}


@dataclass(frozen=True)
class MaterialSet:
    """
    All physical constants of one NHD configuration in SI units.
    """
    omega_p: float
    gamma: float
    beta: float
    eps_metal: float
    mu_metal: float
    eps_host: float
    mu_host: float
    eps0: float = EPS0_SI
    mu0: float = MU0_SI

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError('{} must be positive, got {}'.format(
                    name, value))

    @classmethod
    def from_materials(cls, metal, host):
        """
        Builds the set from a Metal and a Dielectric instance.

        :param metal: Metal instance, e.g. Gold().
        :param host: Material instance of the host medium.
        :return: MaterialSet
        """
        return cls(omega_p=metal.omega_p, gamma=metal.gamma,
                   beta=metal.beta, eps_metal=metal.eps,
                   mu_metal=metal.mu, eps_host=host.eps, mu_host=host.mu)

    @classmethod
    def from_names(cls, metal='gold', host='silicon_dioxide',
                   metal_overrides=None, host_overrides=None):
        """
        Builds the set from preset names such as 'gold' and 'water'.
        """
        if metal not in METALS:
            raise ValueError('Unknown metal preset {}'.format(metal))
        if host not in HOSTS:
            raise ValueError('Unknown host preset {}'.format(host))
        return cls.from_materials(METALS[metal](**(metal_overrides or {})),
                                  HOSTS[host](**(host_overrides or {})))


@dataclass(frozen=True)
class NondimScheme:
    """
    Length and frequency scales of the dimensionless formulation.

    With vacuum='unit' the scaled vacuum constants are eps0 = mu0 = 1, so
    that the scaled wave number of free space equals the scaled frequency.
    With vacuum='si' eps0 = 1 and mu0 = 1/c^2 where c = c_SI/(L0 omega0) is
    the scaled speed of light.
    """
    length_scale: float = 1e-9
    frequency_scale: float = None
    vacuum: str = 'unit'

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ValueError('length_scale must be positive')
        if self.frequency_scale is not None and not self.frequency_scale > 0:
            raise ValueError('frequency_scale must be positive')
        if self.vacuum not in ('unit', 'si'):
            raise ValueError("vacuum must be 'unit' or 'si'")

    def omega0(self, mats):
        if self.frequency_scale is None:
            return mats.omega_p
        return self.frequency_scale

    def scale_frequency(self, omega, mats):
        return omega / self.omega0(mats)

    def unscale_frequency(self, omega, mats):
        return omega * self.omega0(mats)

    def scale_length(self, length):
        return length / self.length_scale

    def unscale_length(self, length):
        return length * self.length_scale

    def scale_velocity(self, velocity, mats):
        return velocity / (self.length_scale * self.omega0(mats))


@dataclass(frozen=True)
class ScaledMaterials:
    """
    Dimensionless constants entering the weak forms. omega_p = 0 switches
    the coupling between the electric field and the polarization current
    off.
    """
    omega_p: float
    gamma: float
    beta: float
    eps_metal: float
    mu_metal: float
    eps_host: float
    mu_host: float
    eps0: float = 1.0
    mu0: float = 1.0

    @property
    def plasma_weight(self):
        """
        Coupling factor omega_p^2 eps0 of the current equation.
        """
        return self.omega_p ** 2 * self.eps0

    @property
    def impedance(self):
        """
        Free-space admittance sqrt(eps0/mu0) of the absorbing condition.
        """
        return math.sqrt(self.eps0 / self.mu0)

    def wave_number(self, omega):
        return omega * math.sqrt(self.eps0 * self.mu0)

    def without_coupling(self):
        return replace(self, omega_p=0.0)

    def with_host(self, eps_host, mu_host=None):
        return replace(self, eps_host=eps_host,
                       mu_host=self.mu_host if mu_host is None else mu_host)


def nondimensionalize(mats, scheme=None):
    """
    Turns SI constants into the dimensionless constants of the solver,

    .. math::
        \\tilde\\omega_p = \\omega_p/\\omega_0, \\quad
        \\tilde\\gamma = \\gamma/\\omega_0, \\quad
        \\tilde\\beta = \\beta/(L_0\\omega_0).

    Relative permittivities and permeabilities are unchanged.

    :param mats: MaterialSet in SI units.
    :param scheme: NondimScheme, default 1 nm and omega_0 = omega_p.
    :return: ScaledMaterials
    """
    if scheme is None:
        scheme = NondimScheme()
    for name in mats.__dataclass_fields__:
        if not getattr(mats, name) > 0:
            raise ValueError('{} must be positive'.format(name))

    if scheme.vacuum == 'unit':
        eps0, mu0 = 1.0, 1.0
    else:
        light = 1.0 / math.sqrt(mats.eps0 * mats.mu0)
        light = scheme.scale_velocity(light, mats)
        eps0, mu0 = 1.0, 1.0 / light ** 2

    scaled = ScaledMaterials(
        omega_p=scheme.scale_frequency(mats.omega_p, mats),
        gamma=scheme.scale_frequency(mats.gamma, mats),
        beta=scheme.scale_velocity(mats.beta, mats),
        eps_metal=mats.eps_metal, mu_metal=mats.mu_metal,
        eps_host=mats.eps_host, mu_host=mats.mu_host,
        eps0=eps0, mu0=mu0)
    logger.debug('Scaled materials: %s', scaled)
    return scaled


@dataclass(frozen=True)
class CoefficientField:
    """
    Element-constant coefficients of the coupled system on one mesh.

    lam is None for the original system, whose current lives on the metal
    only; otherwise the current lives on the whole scatterer and host
    elements carry gamma = beta^2 = lam.
    """
    mu: np.ndarray
    eps: np.ndarray
    gamma: np.ndarray
    beta2: np.ndarray
    current_mask: np.ndarray
    tags: np.ndarray
    lam: float = None

    @property
    def n_elements(self):
        return len(self.tags)

    def gamma_weight(self, omega):
        """
        Element values of omega (omega + i gamma), the unnormalized
        gamma* of the current equation.
        """
        return omega * (omega + 1j * self.gamma)


def build_coefficient_field(mesh, mats, lam=None):
    """
    Builds the element coefficients of the original (lam=None) or the
    extended system from the subdomain tags of the mesh. Metal elements
    get the metal values, host elements the host values and everything
    else the scaled vacuum values mu = eps = 1.

    :param mesh: Tagged TetMesh.
    :param mats: ScaledMaterials.
    :param lam: Extension parameter, None for the original system.
    :return: CoefficientField
    """
    tags = mesh.tags
    if tags is None or np.any(tags == UNTAGGED):
        raise ValueError('Mesh has untagged elements, call tag_subdomains '
                         'first')
    if lam is not None and lam < 0:
        raise ValueError('The extension parameter cannot be negative')

    metal = tags == METAL
    host = tags == HOST

    mu = np.ones(len(tags))
    eps = np.ones(len(tags))
    mu[metal], eps[metal] = mats.mu_metal, mats.eps_metal
    mu[host], eps[host] = mats.mu_host, mats.eps_host

    # Outside the current domain gamma and beta2 are never read.
    gamma = np.zeros(len(tags))
    beta2 = np.zeros(len(tags))
    gamma[metal] = mats.gamma
    beta2[metal] = mats.beta ** 2
    if lam is None:
        current_mask = metal
    else:
        gamma[host] = lam
        beta2[host] = lam
        current_mask = metal | host

    return CoefficientField(mu=mu, eps=eps, gamma=gamma, beta2=beta2,
                            current_mask=current_mask, tags=tags.copy(),
                            lam=lam)
