import sys
import argparse
import logging

from .Scenario import load_scenario, validate_scenario, ScenarioError, StageInputMissing, STAGES
from .Pipeline import run_scenario
from .TriangleMesh import MeshError, write_obj
from .primitives import make_hand_phantom, HAND_POSES
from .Baseband import DimensionMismatch
from .formats import FormatError

log = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer, got %r" % (text))
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1, got %d" % (value))
    return value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog='mimoray',
        description="Ray-traced MIMO radar imaging simulator")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="Debug logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="Warnings and errors only")
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help="Trace, synthesize and image a scenario")
    run.add_argument('config', help="Scenario YAML file")
    run.add_argument('--stage', choices=STAGES + ('imaging', 'all'),
                     help="Run only this stage (default: stages from the config)")
    run.add_argument('--seed', type=int, help="Override trace.seed")
    run.add_argument('--threads', type=_positive_int, default=1, help="Worker threads (results do not depend on it)")
    run.add_argument('--out', help="Override output.directory")
    run.add_argument('--progress', action='store_true', help="Show progress bars")

    validate = commands.add_parser('validate', help="Check a scenario and print derived metrics")
    validate.add_argument('config', help="Scenario YAML file")

    phantom = commands.add_parser('phantom', help="Write the built-in hand phantom as OBJ")
    phantom.add_argument('path', help="Output .obj file")
    phantom.add_argument('--pose', choices=sorted(HAND_POSES), default='open')
    phantom.add_argument('--segments', type=_positive_int, default=12, help="Facets around each finger segment")

    return parser


def _format_metric(value):
    if isinstance(value, float):
        return '%.6g' % (value)
    if isinstance(value, tuple):
        return ' x '.join(str(v) for v in value)
    if isinstance(value, list):
        return ', '.join('%g' % (v) for v in value)
    return str(value)


def cmd_run(args):
    scenario = load_scenario(args.config, seed=args.seed, output_dir=args.out, stages=args.stage)
    result = run_scenario(scenario, threads=args.threads, progress=args.progress)
    for row in result.sweep:
        log.info("alpha=%g records=%s peak=%s correlation=%s", row.alpha, row.n_records,
                 'n/a' if row.peak is None else '%.4g' % (row.peak),
                 'n/a' if row.correlation is None else '%.4f' % (row.correlation))
    print(result.manifest)
    return EXIT_OK


def cmd_validate(args):
    report = validate_scenario(args.config)
    for name, value in report.metrics.items():
        print("%-24s %s" % (name, _format_metric(value)))
    for violation in report.violations:
        print("violation: %s" % (violation))
    if report.violations:
        return EXIT_VIOLATIONS
    print("ok")
    return EXIT_OK


def cmd_phantom(args):
    mesh = make_hand_phantom(args.pose, segments=args.segments)
    write_obj(mesh, args.path)
    log.info("Wrote %s: %d faces", args.path, mesh.n_faces)
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'validate': cmd_validate,
    'phantom': cmd_phantom,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, StageInputMissing, MeshError, FormatError, DimensionMismatch) as e:
        print("mimoray: error: %s" % (e), file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
