"""The cli module is the ``emulator-forge`` command line front end.

Subcommands
-----------
``gen``
    Write a random graph.
``build``
    Build an emulator of a graph file and its size CSV.
``verify``
    Check an emulator against its graph; exit status 1 on violations.
``bench``
    Record emulator sizes over a grid of graph sizes and fit the slope.
``compare-tz``
    Write the Thorup-Zwick threshold table.
``dump``
    Write the hierarchy sampled for a graph.

Exit status is 0 on success, 1 when verification finds violations, 2 for
usage and input errors and 3 for requests beyond the supported precision.
"""
import argparse
import logging
import sys
import time
from dataclasses import dataclass, fields

from emulator_forge import __version__
from emulator_forge.emulators import (
    Tag,
    build_alg1,
    build_alg2,
    build_fast,
    build_general,
    format_emulator,
    read_emulator,
    write_emulator,
)
from emulator_forge.graphs import (
    format_graph,
    random_graph,
    read_graph,
    write_graph,
)
from emulator_forge.hierarchy import (
    HierarchyConfig,
    build_hierarchy,
    format_hierarchy,
)
from emulator_forge.thresholds import (
    PrecisionCapError,
    format_sweep_csv,
    format_threshold_csv,
    threshold_table,
    winner_sweep,
)
from emulator_forge.verify import (
    format_claims,
    format_size_csv,
    format_stretch_csv,
    format_summary,
    scaling_slope,
    size_report,
    verify_claims,
    verify_stretch,
)


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_CAPABILITY = 3

_MODE_K = {'alg1': 3, 'alg2': 4}


class ConfigError(ValueError):
    """An exception for inconsistent command line options."""
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class RunConfig:
    """Validated options of one command line run."""
    command: str
    graph: str = None
    emulator: str = None
    out: str = None
    n: int = 100
    m: int = 300
    weights: str = 'uniform'
    connected: bool = True
    k: int = None
    mode: str = 'general'
    seed: int = 0
    betas: tuple = None
    cap: int = 10**5
    pairs: int = 10**4
    grid: tuple = (256, 512, 1024, 2048)
    repeats: int = 5
    density: int = 4
    kmax: int = 4
    sweep: int = 0
    claims: bool = False
    prune: bool = False
    verbose: int = 0

    @classmethod
    def from_args(cls, args):
        names = {f.name for f in fields(cls)}
        values = {
            key: value for key, value in vars(args).items()
            if key in names and value is not None
        }
        config = cls(**values)
        config.validate()
        return config

    def resolved_k(self):
        """Return ``k``, implied by the mode for the specialised builders."""
        if self.mode in _MODE_K:
            return _MODE_K[self.mode]
        return self.k

    def validate(self):
        """Raise :class:`ConfigError` for inconsistent options."""
        for name in ('n', 'cap', 'pairs', 'repeats', 'density'):
            if getattr(self, name) < 1:
                raise ConfigError(f'--{name} must be positive')
        if self.m < 0:
            raise ConfigError('--m must not be negative')
        if self.seed < 0:
            raise ConfigError('--seed must not be negative')
        if self.sweep < 0:
            raise ConfigError('--sweep must not be negative')
        if any(n < 2 for n in self.grid):
            raise ConfigError('--grid sizes must be at least 2')
        if self.betas is not None and not all(0 < b <= 1 for b in self.betas):
            raise ConfigError('--betas must lie in (0, 1]')
        if self.mode in _MODE_K:
            expected = _MODE_K[self.mode]
            if self.k is not None and self.k != expected:
                raise ConfigError(
                    f'mode {self.mode} builds with k={expected}, '
                    f'not k={self.k}'
                )
            if self.betas is not None and len(self.betas) != expected - 1:
                raise ConfigError(
                    f'mode {self.mode} takes {expected - 1} exponents'
                )
        elif self.command in ('build', 'bench', 'dump') and self.k is None:
            raise ConfigError(f'mode {self.mode} needs --k')


def _numbers(kind):
    def parse(text):
        try:
            return tuple(kind(part) for part in text.split(',') if part)
        except ValueError:
            raise argparse.ArgumentTypeError(
                f'expected a comma separated list, got {text!r}'
            ) from None
    return parse


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def _build(graph, config, seed):
    k = config.resolved_k()
    if config.mode == 'alg1':
        beta, gamma = config.betas or (1 / 3, 1 / 3)
        return build_alg1(graph, beta, gamma, seed=seed)
    if config.mode == 'alg2':
        return build_alg2(graph, config.betas or (1 / 4,) * 3, seed=seed)
    if config.mode == 'fast':
        emulator, _ = build_fast(graph, k, seed=seed, betas=config.betas,
                                 prune_unused=config.prune)
        return emulator
    return build_general(graph, k, betas=config.betas, seed=seed)


def cmd_gen(config):
    graph, attempts = random_graph(
        config.n, config.m, config.weights, config.seed, config.connected
    )
    logger.info('generated n=%d m=%d in %d attempts', graph.n, graph.m,
                attempts)
    if config.out is None:
        _emit(format_graph(graph), None)
    else:
        write_graph(graph, config.out)
    return EXIT_OK


def cmd_build(config):
    graph = read_graph(config.graph)
    emulator = _build(graph, config, config.seed)
    if config.out is None:
        _emit(format_emulator(emulator), None)
        return EXIT_OK
    write_emulator(emulator, config.out)
    _emit(format_size_csv(size_report(emulator, graph)),
          config.out + '.size.csv')
    return EXIT_OK


def cmd_verify(config):
    graph = read_graph(config.graph)
    emulator = read_emulator(config.emulator)
    report = verify_stretch(
        graph, emulator, enumeration_cap=config.cap,
        pair_budget=config.pairs, seed=config.seed,
    )
    if config.out is not None:
        _emit(format_stretch_csv(report), config.out)
    print(format_summary(report))
    passed = report.passed
    if config.claims:
        hierarchy = build_hierarchy(graph, emulator.meta.hierarchy_config())
        claims = verify_claims(graph, hierarchy, seed=config.seed)
        print(format_claims(claims))
        for line in claims.counterexamples:
            print(line)
        passed = passed and claims.passed
    return EXIT_OK if passed else EXIT_VIOLATIONS


def cmd_bench(config):
    rows = []
    for n in config.grid:
        for repeat in range(config.repeats):
            seed = config.seed + repeat
            m = min(config.density * n, n * (n - 1) // 2)
            graph, _ = random_graph(n, m, config.weights, seed)
            start = time.perf_counter()
            emulator = _build(graph, config, seed)
            seconds = time.perf_counter() - start
            rows.append((n, seed, emulator, seconds))
            logger.info('bench n=%d seed=%d edges=%d %.3fs', n, seed,
                        len(emulator), seconds)
    tags = sorted(
        {tag for *_, emulator, _ in rows for tag in emulator.tag_counts()},
        key=lambda text: Tag.parse(text).rank,
    )
    header = ['n', 'seed', 'k', 'mode', 'edges', 'seconds'] + tags
    lines = [','.join(header)]
    for n, seed, emulator, seconds in rows:
        counts = emulator.tag_counts()
        values = [n, seed, emulator.meta.k, config.mode, len(emulator),
                  f'{seconds:.6f}'] + [counts.get(tag, 0) for tag in tags]
        lines.append(','.join(str(value) for value in values))
    slope = scaling_slope([r[0] for r in rows], [len(r[2]) for r in rows])
    lines.append('# slope=' + ('n/a' if slope is None else f'{slope:.6f}'))
    _emit('\n'.join(lines) + '\n', config.out)
    return EXIT_OK


def cmd_compare_tz(config):
    text = format_threshold_csv(threshold_table(config.kmax))
    if config.sweep:
        k = config.k or 2
        rows = winner_sweep(k, range(1, config.sweep + 1))
        text += format_sweep_csv(k, rows)
    _emit(text, config.out)
    return EXIT_OK


def cmd_dump(config):
    graph = read_graph(config.graph)
    k = config.resolved_k()
    if config.mode == 'alg1' and config.betas is None:
        betas = (1 / 3, 1 / 3)
    else:
        betas = config.betas or (1 / k,) * (k - 1)
    hierarchy = build_hierarchy(graph, HierarchyConfig(k, betas, config.seed))
    _emit(format_hierarchy(hierarchy), config.out)
    return EXIT_OK


COMMANDS = {
    'gen': cmd_gen,
    'build': cmd_build,
    'verify': cmd_verify,
    'bench': cmd_bench,
    'compare-tz': cmd_compare_tz,
    'dump': cmd_dump,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='emulator-forge',
        description='Build and verify sparse emulators of weighted graphs.',
    )
    parser.add_argument('--version', action='version', version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for debug output')
    common.add_argument('--seed', type=int, help='base random seed')
    common.add_argument('--out', help='output path (default: stdout)')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', parents=[common], help='write a random graph')
    gen.add_argument('--n', type=int, help='number of vertices')
    gen.add_argument('--m', type=int, help='number of edges')
    gen.add_argument('--weights', choices=('uniform', 'unit'))
    gen.add_argument('--connected', action=argparse.BooleanOptionalAction,
                     help='redraw until connected (default: yes)')

    building = argparse.ArgumentParser(add_help=False)
    building.add_argument('--k', type=int, help='hierarchy parameter')
    building.add_argument('--mode',
                          choices=('alg1', 'alg2', 'general', 'fast'))
    building.add_argument('--betas', type=_numbers(float),
                          help='comma separated sampling exponents')
    building.add_argument('--prune', action=argparse.BooleanOptionalAction,
                          help='skip unused bunch edges in fast mode '
                               '(default: no)')

    build = sub.add_parser('build', parents=[common, building],
                           help='build an emulator')
    build.add_argument('--graph', required=True, help='graph file')

    verify = sub.add_parser('verify', parents=[common],
                            help='verify an emulator')
    verify.add_argument('--graph', required=True, help='graph file')
    verify.add_argument('--emulator', required=True, help='emulator file')
    verify.add_argument('--cap', type=int,
                        help='shortest paths enumerated per pair')
    verify.add_argument('--pairs', type=int,
                        help='pairs sampled on graphs above 300 vertices')
    verify.add_argument('--claims', action='store_true',
                        help='also check the pivot distance bounds')

    bench = sub.add_parser('bench', parents=[common, building],
                           help='measure emulator sizes')
    bench.add_argument('--grid', type=_numbers(int),
                       help='comma separated vertex counts')
    bench.add_argument('--repeats', type=int, help='seeds per vertex count')
    bench.add_argument('--density', type=int, help='edges per vertex')
    bench.add_argument('--weights', choices=('uniform', 'unit'))

    compare = sub.add_parser('compare-tz', parents=[common],
                             help='write the Thorup-Zwick thresholds')
    compare.add_argument('--kmax', type=int, help='largest k in the table')
    compare.add_argument('--k', type=int, help='k of the winner sweep')
    compare.add_argument('--sweep', type=int,
                         help='also compare every distance up to this one')

    dump = sub.add_parser('dump', parents=[common, building],
                          help='write a sampled hierarchy')
    dump.add_argument('--graph', required=True, help='graph file')
    return parser


def _configure_logging(verbose):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format='%(levelname)s %(name)s: %(message)s',
    )


def main(argv=None):
    """Run the command line and return its exit status."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = RunConfig.from_args(args)
        return COMMANDS[config.command](config)
    except PrecisionCapError as error:
        print(f'emulator-forge: {error}', file=sys.stderr)
        return EXIT_CAPABILITY
    except (ValueError, OSError) as error:
        print(f'emulator-forge: {error}', file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    raise SystemExit(main())
