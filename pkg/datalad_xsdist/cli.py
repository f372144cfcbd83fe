"""``xsdist`` command line entry point

A thin front end over the command suite: every subcommand parser is set up
by datalad's own command line machinery from the parameter declarations of
its command class. The command runs with result rendering disabled, and
the CSV report is printed to stdout.

Exit codes: 0 on success, 1 if a computation failed numerically
(non-convergence or divergence), 2 for usage, input and I/O errors.
"""

from __future__ import annotations

__docformat__ = "numpy"

import argparse
import importlib
import logging
import sys
from typing import Sequence

from datalad.cli.parser import setup_parser_for_interface
from datalad.cli.interface import alter_interface_docs_for_cmdline

from datalad_xsdist import command_suite

lgr = logging.getLogger('datalad.xsdist.cli')

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _subcommands() -> dict[str, type]:
    # subcommand name -> command class, without the 'xs-' prefix
    cmds = {}
    for module, clsname, cliname, *_ in command_suite[1]:
        cls = getattr(importlib.import_module(module), clsname)
        cmds[cliname[len('xs-'):]] = cls
    return cmds


def _add_command(subparsers, name: str, cls: type) -> None:
    doc = alter_interface_docs_for_cmdline(cls.__doc__ or '')
    parser = subparsers.add_parser(
        name,
        help=doc.strip().splitlines()[0] if doc.strip() else None,
        description=doc,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.set_defaults(_command=cls)
    setup_parser_for_interface(parser, cls)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='xsdist',
        description='X-ray Sobolev distances of point clouds and their '
                    'Monte-Carlo, geodesic and training workflows',
    )
    parser.add_argument(
        '-l', '--log-level',
        default='warning',
        choices=('debug', 'info', 'warning', 'error'),
        help='verbosity of log messages on stderr [Default: %(default)r]')
    subparsers = parser.add_subparsers(dest='subcommand', metavar='COMMAND')
    subparsers.required = True
    for name, cls in _subcommands().items():
        _add_command(subparsers, name, cls)
    return parser


def _exit_code(statuses: Sequence[str]) -> int:
    if any(s in ('impossible', 'notneeded') for s in statuses):
        return EXIT_USAGE
    if 'error' in statuses:
        return EXIT_NUMERICAL
    return EXIT_OK


def main(args: Sequence[str] | None = None) -> int:
    """Run one ``xsdist`` subcommand and return its exit code"""
    parser = build_parser()
    try:
        ns = parser.parse_args(args)
    except SystemExit as e:
        # argparse exits with 2 on usage errors, 0 on --help
        return int(e.code or 0)
    logging.getLogger('datalad').setLevel(ns.log_level.upper())

    cls = ns._command
    kwargs = {
        k: v for k, v in vars(ns).items()
        if k not in ('_command', 'subcommand', 'log_level')
    }
    statuses = []
    try:
        for res in cls.__call__(
                **kwargs,
                result_renderer='disabled',
                on_failure='ignore',
                return_type='generator'):
            statuses.append(res['status'])
            if res['status'] == 'ok':
                if res.get('csv') and not res.get('output'):
                    sys.stdout.write(res['csv'])
            else:
                print(f"xsdist {ns.subcommand}: {res['status']}: "
                      f"{res.get('message', '')}", file=sys.stderr)
    except ValueError as e:
        # parameter validation failures
        print(f'xsdist {ns.subcommand}: {e}', file=sys.stderr)
        return EXIT_USAGE
    return _exit_code(statuses)


if __name__ == '__main__':
    sys.exit(main())
