# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Run configuration and the NanoSim orchestrator, which runs the stages of a
pipeline, writes the artifacts and keeps a machine-readable manifest of
the run.
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
import time

import numpy as np

from . import analysis, output
from .fem import element_average_edge
from .homog import DIVERGENCE_TOLERANCE, CellProblem, homogenize
from .linsolve import FactorizationCache
from .macro import IncidentWave, solve_extended, solve_original
from .mesh import (ArrayGeometry, Inclusion, build_cell_mesh,
                   build_macro_mesh, tag_reference_cell, tag_subdomains,
                   voxel_volume_fraction)
from .model import (HOSTS, METALS, MaterialSet, NondimScheme,
                    build_coefficient_field, nondimensionalize)
from .multiscale import modified_multiscale, original_multiscale

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent / 'configs'

PIPELINES = ('reference', 'extended', 'homogenize', 'original-multiscale',
             'modified-multiscale', 'extension-study', 'alpha-study', 'full')
FORMATS = ('vtk', 'dofs', 'csv', 'json')


class StageError(RuntimeError):
    """
    Raised when a stage of a pipeline fails. stage holds the stage name.
    """

    def __init__(self, stage, message):
        super().__init__('Stage {} failed: {}'.format(stage, message))
        self.stage = stage


class RunConfig:
    """
    Validated run configuration. The class-level dictionary default_config
    holds every block with its default values; a config file may override
    any subset of them but no key outside them.
    """
    default_config = {
        'geometry': {
            'cell_lengths': [1.0, 1.0, 1.0],
            'inclusion': {
                'shape': 'sphere',
                'center': [0.5, 0.5, 0.5],
                'radius': 0.4,
                'half_widths': None
            },
            'counts': [2, 2, 2],
            'eta': 5.0,
            'cell_resolution': 8,
            'host_margin': 0,
            'vacuum_padding': 2
        },
        'materials': {
            'metal': 'gold',
            'host': 'silicon_dioxide',
            'metal_overrides': {},
            'host_overrides': {},
            'length_scale': 1e-9,
            'frequency_scale': None,
            'vacuum': 'unit'
        },
        'wave': {
            'direction': [0.0, 1.0, 0.0],
            'polarization': [1.0, 0.0, 0.0],
            'amplitude': 1.0,
            'omegas': [0.75]
        },
        'numerics': {
            'lambdas': [10.0, 100.0, 1000.0, 10000.0],
            'lambda_units': 'gamma',
            'residual_tolerance': 1e-10,
            'threads': 1,
            'profile_samples': 101
        },
        'pipeline': {
            'name': 'modified-multiscale',
            'reference': True
        },
        'output': {
            'directory': 'results',
            'formats': ['vtk', 'dofs', 'csv', 'json']
        }
    }

    # Keys whose values are free-form dictionaries validated elsewhere
    open_keys = {'materials.metal_overrides', 'materials.host_overrides'}

    def __init__(self, data=None, source=None):
        self.data = self._merge(self.default_config, data or {}, '')
        self.source = source
        self._validate()

    @classmethod
    def from_file(cls, name):
        """
        Loads a config from a JSON file, or a shipped preset by name such
        as 'case_5_1'.
        """
        path = Path(name)
        if not path.suffix and not path.exists():
            path = CONFIG_DIR / (str(name) + '.json')
        if not path.exists():
            raise ValueError('No config file or preset named {}'.format(
                name))
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as err:
            raise ValueError('{} is not valid JSON: {}'.format(path, err))
        return cls(data, source=str(path))

    @classmethod
    def presets(cls):
        return sorted(p.stem for p in CONFIG_DIR.glob('*.json'))

    def _merge(self, defaults, data, prefix):
        if not isinstance(data, dict):
            raise ValueError('{} must be an object'.format(
                prefix.rstrip('.') or 'config'))
        merged = copy.deepcopy(defaults)
        for key, value in data.items():
            path = prefix + key
            if key not in defaults:
                raise ValueError('Unknown config key {}'.format(path))
            default = defaults[key]
            if isinstance(default, dict) and path not in self.open_keys:
                merged[key] = self._merge(default, value, path + '.')
            else:
                self._check_type(path, default, value)
                merged[key] = copy.deepcopy(value)
        return merged

    @staticmethod
    def _check_type(path, default, value):
        def is_number(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool)

        if default is None:
            ok = value is None or is_number(value) or isinstance(value, list)
        elif isinstance(default, bool):
            ok = isinstance(value, bool)
        elif is_number(default):
            ok = is_number(value)
        elif isinstance(default, str):
            ok = isinstance(value, str)
        elif isinstance(default, list):
            ok = isinstance(value, list) and all(
                is_number(v) or isinstance(v, str) for v in value)
        else:
            ok = isinstance(value, dict)
        if not ok:
            raise ValueError('Config key {} has the wrong type'.format(path))

    def _validate(self):
        d = self.data
        mats = d['materials']
        if mats['metal'] not in METALS:
            raise ValueError('Unknown preset materials.metal: {}'.format(
                mats['metal']))
        if mats['host'] not in HOSTS:
            raise ValueError('Unknown preset materials.host: {}'.format(
                mats['host']))
        for key, table in (('metal', METALS), ('host', HOSTS)):
            try:
                table[mats[key]].check_parameters(mats[key + '_overrides'])
            except ValueError as err:
                raise ValueError('materials.{}_overrides: {}'.format(
                    key, err))
        if mats['vacuum'] not in ('unit', 'si'):
            raise ValueError("materials.vacuum must be 'unit' or 'si'")

        wave = d['wave']
        if not wave['omegas'] or any(not isinstance(w, (int, float)) or
                                     w <= 0 for w in wave['omegas']):
            raise ValueError('wave.omegas must be a list of positive '
                             'numbers')
        for key in ('direction', 'polarization'):
            if len(wave[key]) != 3:
                raise ValueError('wave.{} must have 3 components'.format(
                    key))

        num = d['numerics']
        if any(not isinstance(lam, (int, float)) or lam <= 0
               for lam in num['lambdas']):
            raise ValueError('numerics.lambdas must be positive numbers')
        if num['lambda_units'] not in ('gamma', 'absolute'):
            raise ValueError("numerics.lambda_units must be 'gamma' or "
                             "'absolute'")
        if num['threads'] < 1:
            raise ValueError('numerics.threads must be at least 1')

        if d['pipeline']['name'] not in PIPELINES:
            raise ValueError('Unknown pipeline.name {}, choose one of {}'
                             .format(d['pipeline']['name'],
                                     ', '.join(PIPELINES)))
        unknown = set(d['output']['formats']) - set(FORMATS)
        if unknown:
            raise ValueError('Unknown output.formats {}'.format(
                sorted(unknown)))

        # Builds the derived objects once so that geometry errors show up
        # as config errors
        try:
            self.geometry()
            self.materials()
            self.waves()
        except ValueError as err:
            raise ValueError('Invalid config: {}'.format(err))

    def to_dict(self):
        return copy.deepcopy(self.data)

    @property
    def hash(self):
        text = json.dumps(self.data, sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    @property
    def pipeline(self):
        return self.data['pipeline']['name']

    def geometry(self):
        g = self.data['geometry']
        inc = g['inclusion']
        inclusion = Inclusion(shape=inc['shape'], center=inc['center'],
                              radius=inc['radius'],
                              half_widths=inc['half_widths'])
        return ArrayGeometry(cell_lengths=g['cell_lengths'],
                             inclusion=inclusion, counts=g['counts'],
                             eta=g['eta'],
                             cell_resolution=g['cell_resolution'],
                             host_margin=g['host_margin'],
                             vacuum_padding=g['vacuum_padding'])

    def materials(self):
        m = self.data['materials']
        return MaterialSet.from_names(m['metal'], m['host'],
                                      m['metal_overrides'],
                                      m['host_overrides'])

    def scheme(self):
        m = self.data['materials']
        return NondimScheme(length_scale=m['length_scale'],
                            frequency_scale=m['frequency_scale'],
                            vacuum=m['vacuum'])

    def scaled_materials(self):
        return nondimensionalize(self.materials(), self.scheme())

    def waves(self):
        w = self.data['wave']
        return [IncidentWave(omega, w['direction'], w['polarization'],
                             w['amplitude']) for omega in w['omegas']]

    def lambdas(self, scaled=None):
        """
        Extension parameters in scaled units.
        """
        lams = np.asarray(self.data['numerics']['lambdas'], dtype=float)
        if self.data['numerics']['lambda_units'] == 'gamma':
            scaled = self.scaled_materials() if scaled is None else scaled
            lams = lams * scaled.gamma
        return lams.tolist()


def _tag(omega):
    return '{:.4f}'.format(omega)


class NanoSim:
    """
    The NanoSim class runs one pipeline of the multiscale solver for a
    RunConfig. Every stage is timed and recorded in the manifest; a failing
    stage marks the manifest as failed and raises a StageError.

    :param config: RunConfig.
    :param out_dir: Output directory, default the config's
        output.directory.
    :param threads: Worker threads, overrides numerics.threads.
    """

    def __init__(self, config, out_dir=None, threads=None):
        self.config = config
        self.out_dir = Path(out_dir or config.data['output']['directory'])
        self.threads = threads or config.data['numerics']['threads']
        self.formats = set(config.data['output']['formats'])
        self.geometry = config.geometry()
        self.mats = config.scaled_materials()
        self.waves = config.waves()

        self.mesh = None
        self.cell_mesh = None
        self.cell_problem = None
        self.tensors = None
        self.cells = None
        self.references = {}
        self.stages = {}
        self.results = {}
        self.manifest = {
            'config_hash': config.hash,
            'config': config.to_dict(),
            'status': 'running',
            'files': [],
            'timings': {}
        }

    def _stage(self, name, func, *args, prints=False, **kwargs):
        """
        Runs one stage and records its wall time.
        """
        logger.info('Stage %s', name)
        start = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as err:
            self.manifest['status'] = 'failed'
            self.manifest['failed_stage'] = name
            self.manifest['error'] = '{}: {}'.format(type(err).__name__, err)
            self.manifest['partial'] = True
            self.write_manifest()
            raise StageError(name, err) from err
        elapsed = time.perf_counter() - start
        self.manifest['timings'][name] = elapsed
        if prints:
            print('{:<40s} {:10.3f} s'.format(name, elapsed))
        return result

    def _path(self, name):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        if name not in self.manifest['files']:
            self.manifest['files'].append(name)
        return path

    def write_manifest(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return output.write_json(self.out_dir / 'manifest.json',
                                 self.manifest)

    def setup_meshes(self):
        """
        Builds and tags the macro mesh and the reference cell mesh.
        """
        geom = self.geometry
        self.mesh = tag_subdomains(build_macro_mesh(geom), geom)
        self.cell_mesh = tag_reference_cell(build_cell_mesh(geom), geom)
        self.cell_problem = CellProblem(self.cell_mesh)
        self.manifest['mesh'] = {
            'macro': self.mesh.fingerprint,
            'cell': self.cell_mesh.fingerprint,
            'macro_elements': self.mesh.n_elements,
            'cell_elements': self.cell_mesh.n_elements,
            'particles': geom.n_particles
        }
        self.manifest['volume_fraction'] = {
            'analytic': geom.analytic_volume_fraction,
            'voxel': voxel_volume_fraction(self.cell_mesh)
        }

    def new_cache(self):
        return FactorizationCache(
            tolerance=self.config.data['numerics']['residual_tolerance'])

    def write_fields(self, name, mesh, E=None, J=None, omega=None):
        """
        Writes a field as VTK and its DOFs as binary containers, as far as
        the output formats ask for them.
        """
        if 'vtk' in self.formats:
            data = output.field_arrays(mesh, E, J)
            if mesh.tags is not None:
                data['subdomain'] = mesh.tags
            output.write_vtk(self._path(name + '.vtk'), mesh, data,
                             title='nanosim {}'.format(name))
        if 'dofs' in self.formats:
            if E is not None:
                output.write_dofs(self._path(name + '_E.dofs'), E, 'edge',
                                  mesh.fingerprint, omega=omega)
            if J is not None:
                output.write_dofs(self._path(name + '_J.dofs'), J, 'face',
                                  mesh.fingerprint, omega=omega)

    def write_table(self, name, table):
        if 'csv' in self.formats:
            output.write_table(self._path(name), table)

    def homogenize(self, prints=False):
        """
        Scalar cell problems and the tensors mu_hat and eps_hat.
        """
        start = time.perf_counter()
        self.tensors, self.cells = homogenize(
            self.cell_mesh, self.mats, threads=self.threads,
            problem=self.cell_problem)
        self.stages['cell'] = {
            'elements': self.cell_mesh.n_elements,
            'dofs': 2 * self.cell_problem.dofs.n_free('node'),
            'time': time.perf_counter() - start}
        if 'json' in self.formats:
            output.write_tensors(
                self._path('tensors.json'), self.tensors,
                analytic_volume_fraction=self.geometry
                .analytic_volume_fraction)

    def reference(self, wave):
        """
        Direct solve of the original coupled system at one frequency.
        """
        coeffs = build_coefficient_field(self.mesh, self.mats)
        solution = solve_original(self.mesh, coeffs, wave, self.mats)
        self.references[wave.omega] = solution
        self.stages['original'] = {
            'elements': solution.stats['elements'],
            'dofs': solution.stats['dofs'],
            'time': solution.stats['assemble_time']
            + solution.stats['factor_time'] + solution.stats['solve_time']}
        defect = analysis.energy_identity_defect(solution)
        self.manifest.setdefault('energy_defect', {})[_tag(wave.omega)] = \
            defect
        self.write_fields('reference_' + _tag(wave.omega), self.mesh,
                          solution.E, solution.J, wave.omega)
        return solution

    def extended(self, wave):
        for lam in self.config.lambdas(self.mats):
            coeffs = build_coefficient_field(self.mesh, self.mats, lam)
            solution = solve_extended(self.mesh, coeffs, wave, self.mats)
            self.write_fields('extended_{}_{:.4g}'.format(
                _tag(wave.omega), lam), self.mesh, solution.E, solution.J,
                wave.omega)

    def modified(self, wave):
        """
        Modified multiscale approach at one frequency, with errors and the
        diagonal profile when a reference solution exists.
        """
        result = modified_multiscale(self.mesh, self.cells, self.tensors,
                                     wave, self.mats,
                                     cache=self.new_cache(),
                                     threads=self.threads)
        stats = result.stats
        self.stages['homogenized'] = {
            'elements': stats['homogenized_elements'],
            'dofs': stats['homogenized_dofs'],
            'time': stats['homogenized_time']}
        self.stages['modified'] = {'elements': stats['local_elements'],
                                   'dofs': stats['local_dofs'],
                                   'time': stats['local_time']}
        self.manifest.setdefault('local', {})[_tag(wave.omega)] = {
            key: stats[key] for key in
            ('factorizations_local', 'local_solves', 'cache_hits',
             'cache_misses', 'fingerprints_equal')}
        tag = _tag(wave.omega)
        self.write_fields('homogenized_' + tag, self.mesh,
                          result.homogenized.E, None, wave.omega)
        self.write_fields('modified_' + tag, self.mesh, result.solution.E,
                          result.solution.J, wave.omega)
        self.results.setdefault('modified', {})[wave.omega] = result

        reference = self.references.get(wave.omega)
        if reference is not None:
            report = analysis.error_report(reference, result.homogenized,
                                           result.corrected,
                                           result.solution)
            report.timings = {'local_time': stats['local_time'],
                              'homogenized_time': stats['homogenized_time']}
            self.results.setdefault('errors', []).append(report)
            self.profile(wave, {
                'reference': _element_field(reference),
                'E0_eta': result.corrected.vectors,
                'EM': _element_field(result.solution)})
        return result

    def original(self, wave):
        lam = max(self.config.lambdas(self.mats))
        tensors, cells = homogenize(self.cell_mesh, self.mats,
                                    omega=wave.omega, lam=lam, curl=True,
                                    threads=self.threads,
                                    problem=self.cell_problem)
        self.manifest.setdefault('alpha', {})[_tag(wave.omega)] = {
            'alpha': tensors.alpha, 'alpha_raw': tensors.alpha_raw,
            'divergence_residual': cells.divergence_residual}
        if 'json' in self.formats:
            output.write_tensors(
                self._path('tensors_{}.json'.format(_tag(wave.omega))),
                tensors)
        result = original_multiscale(self.mesh, cells, tensors, wave,
                                     self.mats)
        self.write_fields('original_multiscale_' + _tag(wave.omega),
                          self.mesh, result.solution.E, result.solution.J,
                          wave.omega)
        return result

    def profile(self, wave, fields):
        table = analysis.line_profile(
            self.mesh, fields,
            samples=self.config.data['numerics']['profile_samples'])
        self.write_table('profile_{}.csv'.format(_tag(wave.omega)), table)

    def extension_study(self, wave):
        table, slopes = analysis.extension_convergence_study(
            self.mesh, self.mats, wave, self.config.lambdas(self.mats),
            reference=self.references.get(wave.omega))
        self.manifest.setdefault('slopes', {})[_tag(wave.omega)] = slopes
        self.write_table('extension_{}.csv'.format(_tag(wave.omega)), table)
        return table, slopes

    def alpha_study(self, wave):
        table = analysis.alpha_study(self.cell_mesh, self.mesh, self.mats,
                                     wave, self.config.lambdas(self.mats),
                                     threads=self.threads)
        self.write_table('alpha_{}.csv'.format(_tag(wave.omega)), table)
        return table

    def run(self, pipeline=None, prints=False):
        """
        Runs a pipeline and writes the manifest.

        :param pipeline: Pipeline name, default the config's pipeline.name.
        :param prints: Prints one line per finished stage if True.
        :return: The manifest dictionary.
        """
        pipeline = pipeline or self.config.pipeline
        if pipeline not in PIPELINES:
            raise ValueError('Unknown pipeline {}'.format(pipeline))
        self.manifest['pipeline'] = pipeline
        with_reference = self.config.data['pipeline']['reference']

        self._stage('mesh', self.setup_meshes, prints=prints)
        if pipeline in ('homogenize', 'modified-multiscale', 'full'):
            self._stage('cell', self.homogenize, prints=prints)

        for wave in self.waves:
            tag = _tag(wave.omega)
            if pipeline == 'reference' or (with_reference and pipeline in (
                    'modified-multiscale', 'original-multiscale',
                    'extension-study', 'full')):
                self._stage('reference ' + tag, self.reference, wave,
                            prints=prints)
            if pipeline == 'extended':
                self._stage('extended ' + tag, self.extended, wave,
                            prints=prints)
            if pipeline in ('modified-multiscale', 'full'):
                self._stage('modified ' + tag, self.modified, wave,
                            prints=prints)
            if pipeline in ('original-multiscale', 'full'):
                self._stage('original multiscale ' + tag, self.original,
                            wave, prints=prints)
            if pipeline in ('extension-study', 'full'):
                self._stage('extension study ' + tag, self.extension_study,
                            wave, prints=prints)
            if pipeline in ('alpha-study', 'full'):
                self._stage('alpha study ' + tag, self.alpha_study, wave,
                            prints=prints)

        self._stage('report', self.report, prints=prints)
        self.manifest['status'] = 'completed'
        self.manifest['partial'] = False
        self.write_manifest()
        return self.manifest

    def report(self):
        if self.results.get('errors'):
            self.write_table('errors.csv',
                             analysis.error_table(self.results['errors']))
        if self.stages:
            table, ratio = analysis.cost_report(self.stages)
            self.manifest['cost_ratio'] = ratio
            self.write_table('costs.csv', table)

    def run_checks(self):
        """
        Invariant checks on the finished run. Every check is a dictionary
        with name, passed and value; the list is stored in the manifest.

        :return: True if all checks passed.
        """
        checks = []

        def record(name, passed, value=None):
            checks.append({'name': name, 'passed': bool(passed),
                           'value': value})

        if self.tensors is not None:
            for key in ('mu_hat', 'eps_hat'):
                t = getattr(self.tensors, key)
                record(key + '_symmetric', np.abs(t - t.T).max() <= 1e-9,
                       float(np.abs(t - t.T).max()))
            coeffs = build_coefficient_field(self.cell_mesh, self.mats)
            volume = self.cell_mesh.volumes
            arith = float(np.sum(volume * coeffs.eps) / volume.sum())
            harm = float(volume.sum() / np.sum(volume / coeffs.eps))
            eig = np.linalg.eigvalsh(0.5 * (self.tensors.eps_hat
                                            + self.tensors.eps_hat.T))
            record('eps_hat_bounds', eig.min() >= harm - 1e-9
                   and eig.max() <= arith + 1e-9, eig.tolist())

        for tag, local in self.manifest.get('local', {}).items():
            record('local_fingerprints_equal_' + tag,
                   local['fingerprints_equal'])
            record('local_single_factorization_' + tag,
                   local['factorizations_local'] == 1,
                   local['factorizations_local'])

        for tag, alpha in self.manifest.get('alpha', {}).items():
            residual = alpha['divergence_residual']
            record('divergence_residual_' + tag,
                   residual <= DIVERGENCE_TOLERANCE, residual)

        for tag, defect in self.manifest.get('energy_defect', {}).items():
            record('energy_identity_' + tag, defect <= 1e-8, defect)

        missing = [name for name in self.manifest['files']
                   if not (self.out_dir / name).exists()]
        record('files_exist', not missing, missing)

        self.manifest['checks'] = checks
        failed = [c['name'] for c in checks if not c['passed']]
        if failed:
            logger.warning('Failed checks: %s', ', '.join(failed))
        self.write_manifest()
        return not failed


def _element_field(solution):
    return element_average_edge(solution.mesh, solution.E)
