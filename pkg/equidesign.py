import argparse
import logging
import sys

from solvers.design_solver import (
    ESW,
    MODES,
    USW,
    Query,
    SolverSettings,
    Welfare,
    check,
    check_threshold,
    exact,
    opt,
    uopt,
    verify_scheme,
)
from solvers.errors import EquiDesignError
from solvers.game_model import apply_scheme
from solvers.oracle_solver import SizeGuard, lp_campaign, punishment_campaign, query_campaign
from solvers.punishment_solver import punishment_table
from utils.config_utils import load_config
from utils.file_utils import (
    add_meta,
    dumps,
    load_game,
    load_scheme,
    load_spec,
    load_support,
    lp_dump_sink,
    opt_document,
    punishment_document,
    verdict_document,
    write_json,
)
from utils.logging_utils import setup_logging

logger = logging.getLogger(__name__)

EXIT_YES = 0
EXIT_NO = 1
EXIT_INTERNAL = 4


def parse_arguments(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog='equidesign',
        description='Decide and optimize equilibrium design queries on concurrent mean-payoff games.')
    parser.add_argument('--config', type=str, default=None,
                        help='Configuration file (default: config.yaml next to this script)')
    parser.add_argument('--max-verify-calls', type=int, default=None,
                        help='Refuse searches needing more scheme verifications than this')
    parser.add_argument('--verbose', action='store_true', help='Log debug output to the console')
    parser.add_argument('--quiet', action='store_true', help='Only log warnings and errors to the console')
    parser.add_argument('--dump-lp', type=str, default=None, metavar='DIR',
                        help='Write every LP instance built to DIR as a text matrix')
    parser.add_argument('--no-meta', action='store_true',
                        help='Leave the meta block (version, timestamp) out of the output')

    commands = parser.add_subparsers(dest='command', required=True)

    def query_arguments(sub, budget_required=True):
        sub.add_argument('--mode', choices=MODES, required=True)
        sub.add_argument('--game', type=str, required=True, help='Game file (JSON)')
        sub.add_argument('--spec', type=str, required=True, help='GR(1) spec file (JSON)')
        if budget_required is not None:
            sub.add_argument('--budget', type=int, required=budget_required, default=None)
        sub.add_argument('--support', type=str, default=None,
                         help='Slots that may carry rewards (default: all)')
        sub.add_argument('--welfare', choices=(USW, ESW), default=None)
        sub.add_argument('--threshold', type=str, default=None, help='Welfare threshold, integer or p/q')
        sub.add_argument('--witness', type=str, default=None, metavar='OUT',
                         help='Also write the verdict document to OUT')

    query_arguments(commands.add_parser('check', help='Search for an implementing reward scheme'))
    verify = commands.add_parser('verify', help='Verify one reward scheme')
    query_arguments(verify, budget_required=False)
    verify.add_argument('--scheme', type=str, required=True, help='Scheme file or verdict document')
    query_arguments(commands.add_parser('opt', help='Least budget that implements the spec'), budget_required=None)
    query_arguments(commands.add_parser('exact', help='Is the budget exactly the optimum?'))
    query_arguments(commands.add_parser('uopt', help='Is the optimal scheme unique?'), budget_required=None)

    punish = commands.add_parser('punish', help='Print punishment values and coalition strategies')
    punish.add_argument('--game', type=str, required=True)
    punish.add_argument('--scheme', type=str, default=None, help='Apply this scheme first')

    selftest = commands.add_parser('selftest', help='Run the oracle agreement campaigns')
    selftest.add_argument('--seed', type=int, default=None)
    selftest.add_argument('--punishment-games', type=int, default=None)
    selftest.add_argument('--lp-instances', type=int, default=None)
    selftest.add_argument('--queries', type=int, default=None)

    return parser.parse_args(argv)


def _welfare(args):
    if args.welfare is None and args.threshold is None:
        return None
    if args.welfare is None or args.threshold is None:
        raise EquiDesignError("--welfare and --threshold must be given together")
    return Welfare(args.welfare, args.threshold)


def _query(args, budget, game=None):
    game = game or load_game(args.game)
    spec = load_spec(args.spec).bind(game)
    support = load_support(args.support, game) if args.support else None
    return Query(game, spec, budget, args.mode, support, _welfare(args))


def _run_check(args, settings):
    query = _query(args, args.budget)
    verdict = check_threshold(query, settings) if query.welfare else check(query, settings)
    return (EXIT_YES if verdict.answer else EXIT_NO), verdict_document('check', verdict, query)


def _run_verify(args, settings):
    game = load_game(args.game)
    scheme = load_scheme(args.scheme, game)
    query = _query(args, args.budget if args.budget is not None else scheme.cost, game)
    verdict = verify_scheme(query, scheme, settings)
    return (EXIT_YES if verdict.answer else EXIT_NO), verdict_document('verify', verdict, query)


def _run_opt(args, settings, unique=False):
    query = _query(args, 0)
    solve = uopt if unique else opt
    result = solve(query.game, query.spec, query.mode, query.support, query.welfare, settings)
    document = opt_document('uopt' if unique else 'opt', query.mode, result)
    return (EXIT_YES if result.optimum is not None else EXIT_NO), document


def _run_exact(args, settings):
    query = _query(args, args.budget)
    answer = exact(query.game, query.spec, query.mode, query.budget, query.support, query.welfare, settings)
    document = {'command': 'exact', 'mode': query.mode, 'budget': query.budget, 'answer': 'yes' if answer else 'no'}
    return (EXIT_YES if answer else EXIT_NO), document


def _run_punish(args, settings):
    game = load_game(args.game)
    if args.scheme:
        game = apply_scheme(game, load_scheme(args.scheme, game))
    table = punishment_table(game, start_rounds=settings.value_iteration_start)
    return EXIT_YES, punishment_document(game, table)


def _run_selftest(args, config, settings):
    section = config['selftest']
    oracle = config['oracle']
    guard = SizeGuard.from_config(config)
    seed = args.seed if args.seed is not None else int(section['seed'])
    weights = dict(weight_low=int(oracle['weight_low']), weight_high=int(oracle['weight_high']))

    games = args.punishment_games if args.punishment_games is not None else int(section['punishment_games'])
    instances = args.lp_instances if args.lp_instances is not None else int(section['lp_instances'])
    queries = args.queries if args.queries is not None else int(section['queries'])

    logger.info(f"Selftest with seed {seed}: {games} games, {instances} LP instances, {queries} queries")
    pun_mismatches = punishment_campaign(seed, games, guard, **weights)
    compared, lp_mismatches = lp_campaign(seed + 1, instances, guard, **weights)
    query_mismatches = query_campaign(seed + 2, queries, guard, settings)

    document = {
        'command': 'selftest',
        'seed': seed,
        'punishment': {'games': games, 'mismatches': len(pun_mismatches)},
        'lp': {'instances': compared, 'mismatches': len(lp_mismatches)},
        'queries': {'queries': queries, 'mismatches': len(query_mismatches)},
    }
    failed = pun_mismatches or lp_mismatches or query_mismatches
    document['answer'] = 'no' if failed else 'yes'
    return (EXIT_NO if failed else EXIT_YES), document


def _execute(argv):
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        # --help and --version have already printed their text
        if e.code == 0:
            return 0, None, 2
        return 2, {'error': 'invalid arguments', 'type': 'ArgumentError'}, 2

    config = load_config(args.config)
    indent = int(config['output'].get('indent', 2))
    console_level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else None
    setup_logging(config['logging'], console_level)
    if args.max_verify_calls is not None:
        config['solver']['max_verify_calls'] = args.max_verify_calls
    settings = SolverSettings.from_config(config, lp_dump_sink(args.dump_lp) if args.dump_lp else None)

    try:
        if args.command == 'check':
            code, document = _run_check(args, settings)
        elif args.command == 'verify':
            code, document = _run_verify(args, settings)
        elif args.command == 'opt':
            code, document = _run_opt(args, settings)
        elif args.command == 'uopt':
            code, document = _run_opt(args, settings, unique=True)
        elif args.command == 'exact':
            code, document = _run_exact(args, settings)
        elif args.command == 'punish':
            code, document = _run_punish(args, settings)
        else:
            code, document = _run_selftest(args, config, settings)
    except EquiDesignError as e:
        logger.error(f"{type(e).__name__}: {e}")
        document = {'command': args.command, 'error': str(e), 'type': type(e).__name__}
        return e.exit_code, document, indent
    except Exception as e:
        logger.exception(f"Internal error in {args.command}")
        document = {'command': args.command, 'error': str(e), 'type': type(e).__name__}
        return EXIT_INTERNAL, document, indent

    if config['output'].get('include_meta', True) and not args.no_meta:
        add_meta(document, config['path'])
    witness = getattr(args, 'witness', None)
    if witness:
        write_json(witness, document, indent)
    return code, document, indent


def run(argv=None):
    """
    Run one command and return (exit code, output document).

    Exit codes: 0 yes, 1 no, 2 input error, 3 search larger than the verify-call cap,
    4 internal error. After --help the document is None.
    """
    code, document, _ = _execute(argv)
    return code, document


def main(argv=None):
    code, document, indent = _execute(argv)
    if document is not None:
        sys.stdout.write(dumps(document, indent))
    return code


if __name__ == "__main__":
    sys.exit(main())
