# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Command line entry point,

    solve <config> [--pipeline NAME] [--threads N] [--check] [--out DIR]

where config is a JSON file or the name of a shipped preset. The exit
status is 0 on success, 1 when a stage fails, 2 for an invalid
configuration and 3 when the checks fail.
"""

import argparse
import logging

from .simulation import PIPELINES, NanoSim, RunConfig, StageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_CONFIG = 2
EXIT_CHECKS = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog='solve',
        description='Multiscale solver for periodic arrays of metal '
                    'nanoparticles in the hydrodynamic Drude model.')
    parser.add_argument('config',
                        help='JSON config file or preset name, one of '
                             '{}'.format(', '.join(RunConfig.presets())))
    parser.add_argument('--pipeline', choices=PIPELINES, default=None,
                        help='Overrides pipeline.name of the config')
    parser.add_argument('--threads', type=int, default=None,
                        help='Caps the worker threads of every stage')
    parser.add_argument('--check', action='store_true', default=False,
                        help='Runs the invariant checks on the results')
    parser.add_argument('--out', default=None,
                        help='Output directory, overrides '
                             'output.directory')
    parser.add_argument('--prints', action='store_true', default=False,
                        help='Prints a summary line per stage')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='More log output, repeat for debug')
    parser.add_argument('-q', '--quiet', action='store_true', default=False,
                        help='Only warnings and errors')
    return parser


def _log_level(args):
    if args.quiet:
        return logging.WARNING
    if args.verbose >= 2:
        return logging.DEBUG
    if args.verbose == 1:
        return logging.INFO
    return logging.WARNING


def main(argv=None):
    """
    Runs the command line interface.

    :param argv: Argument list, default sys.argv[1:].
    :return: Exit status.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=_log_level(args),
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')

    if args.threads is not None and args.threads < 1:
        logger.error('--threads must be at least 1')
        return EXIT_CONFIG
    try:
        config = RunConfig.from_file(args.config)
        sim = NanoSim(config, out_dir=args.out, threads=args.threads)
    except ValueError as err:
        logger.error('Invalid configuration: %s', err)
        return EXIT_CONFIG

    try:
        sim.run(pipeline=args.pipeline, prints=args.prints)
    except StageError as err:
        logger.error('%s', err)
        return EXIT_STAGE

    if args.check and not sim.run_checks():
        return EXIT_CHECKS
    logger.info('Results written to %s', sim.out_dir)
    return EXIT_OK
