"""
Prethermal - Command Line Runner
Subcommands:
    run               Run one experiment config and write CSV + manifest
    validate          Fast acceptance checks (optionally with the oracle)
    list-experiments  Show the bundled experiment configs
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from src import __version__
from src.cli.config import EXPERIMENTS_DIR, load_config, runtime_settings
from src.cli.experiments import EXPERIMENTS
from src.cli.validate import validate
from src.errors import ConfigError, DomainError, NumericalError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _jsonable(value):
    """Convert numpy scalars and containers for json.dump."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and value != value:
        return None
    return value


def run(
    config_path: Union[str, Path],
    out_dir: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    verbose: bool = True,
) -> Dict:
    """
    Run one experiment and write its outputs.

    Args:
        config_path: JSON experiment file
        out_dir: Output directory (PRETHERMAL_OUT_DIR by default)
        threads: Worker threads (PRETHERMAL_THREADS by default)
        seed: Recorded in the manifest; the computations are deterministic
        verbose: Print progress

    Returns:
        The manifest dict
    """
    cfg = load_config(config_path)
    threads, output_dir = runtime_settings(threads, None if out_dir is None else str(out_dir))

    if verbose:
        print(f"🔬 Prethermal - {cfg.name}")
        print("=" * 50)
        if cfg.reproduces:
            print(f"📋 {cfg.reproduces}")
        print(f"⏳ Running '{cfg.experiment}' with {threads} threads...")

    tables, summary = EXPERIMENTS[cfg.experiment](cfg, threads)

    output_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for stem, table in tables.items():
        output_file = output_dir / f'{stem}.csv'
        table.to_csv(output_file, index=False, float_format='%.17g')
        files.append(output_file.name)

    manifest = {
        'name': cfg.name,
        'reproduces': cfg.reproduces,
        'version': __version__,
        'config': cfg.resolved,
        'tolerances': {
            'method': cfg.simulation.integrator.method,
            'rtol': cfg.simulation.integrator.rtol,
            'atol': cfg.simulation.integrator.atol,
            'quad': cfg.resolved['simulation']['quad'],
        },
        'threads': threads,
        'seed': seed,
        'outputs': files,
        'summary': summary,
    }
    manifest_file = output_dir / f'{cfg.name}.manifest.json'
    with open(manifest_file, 'w') as f:
        json.dump(_jsonable(manifest), f, indent=2, sort_keys=True)

    if verbose:
        print()
        print("=" * 50)
        print(f"✅ {cfg.name} complete! {sum(len(t) for t in tables.values())} rows written")
        print(f"📁 Results saved to: {output_dir}")
    return manifest


def list_experiments(directory: Path = EXPERIMENTS_DIR) -> List[Dict]:
    entries = []
    for path in sorted(directory.glob('*.json')):
        with open(path, 'r') as f:
            document = json.load(f)
        entries.append({
            'file': path.name,
            'name': document.get('name', path.stem),
            'experiment': document.get('experiment', '?'),
            'reproduces': document.get('reproduces', ''),
        })
    return entries


def _report_error(kind: str, error: Exception):
    payload = {'error': kind, 'message': str(error)}
    if isinstance(error, ConfigError) and error.path:
        payload['path'] = error.path
    if isinstance(error, NumericalError):
        payload['details'] = {k: v for k, v in (('error_bound', getattr(error, 'error_bound', None)),
                                                ('t_reached', getattr(error, 't_reached', None)))
                              if v is not None}
    print(json.dumps(payload), file=sys.stderr)


def _parse_oracle(tokens: Optional[List[str]]) -> Optional[Dict[str, int]]:
    if tokens is None:
        return None
    sizes = {'N': 1000, 'M': 50}
    for token in tokens:
        key, _, value = token.partition('=')
        if key not in sizes or not value.isdigit():
            raise ConfigError(f"expected N=<int> or M=<int>, got {token!r}", '--oracle')
        sizes[key] = int(value)
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Prethermal - hierarchical bath qubit simulator')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    run_parser = sub.add_parser('run', help='Run one experiment config')
    run_parser.add_argument('--config', required=True, help='Path to a JSON experiment config')
    run_parser.add_argument('--out', default=None, help='Output directory')
    run_parser.add_argument('--threads', type=int, default=None, help='Worker threads')
    run_parser.add_argument('--seed', type=int, default=None, help='Recorded in the manifest')
    run_parser.add_argument('--quiet', action='store_true', help='No progress output')

    validate_parser = sub.add_parser('validate', help='Fast acceptance checks')
    validate_parser.add_argument('--oracle', nargs='*', metavar='KEY=VALUE', default=None,
                                 help='Add an oracle comparison, e.g. --oracle N=1000 M=50')
    validate_parser.add_argument('--threads', type=int, default=None, help='Worker threads')

    sub.add_parser('list-experiments', help='List bundled experiment configs')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == 'run':
            run(args.config, args.out, args.threads, args.seed, verbose=not args.quiet)
            return EXIT_OK
        if args.command == 'validate':
            threads, _ = runtime_settings(args.threads)
            passed, _ = validate(oracle=_parse_oracle(args.oracle), threads=threads)
            return EXIT_OK if passed else EXIT_CHECK_FAILED
        for entry in list_experiments():
            print(f"📋 {entry['name']:<26} {entry['experiment']:<14} {entry['reproduces']}")
        return EXIT_OK
    except ConfigError as e:
        _report_error('config', e)
        return EXIT_CONFIG
    except DomainError as e:
        _report_error('domain', e)
        return EXIT_CONFIG
    except NumericalError as e:
        _report_error('numerical', e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
