"""
Command line interface.

Every command resolves its configuration from an optional --config JSON file and the command line flags (flags win),
writes its output atomically and writes a sidecar manifest `<output>.manifest.json` holding the resolved
configuration and the package version.

Exit codes: 0 on success, 2 if a run degenerated (e.g. post-selection discarded every shot), 1 on any other error.
"""
import argparse
import logging
import sys
from typing import List, Sequence, Union

from quantum_portfolio.benchmark import SOLVERS, instance_suite_run, random_state_baseline, return_error, \
    top_bitstrings
from quantum_portfolio.config import default_jobs, deep_merge, package_version, resolve_run_config
from quantum_portfolio.encoding import decode_z
from quantum_portfolio.exceptions import ConfigurationError, DegenerateRunError, QuantumPortfolioError
from quantum_portfolio.noise_model import NOISE_KINDS
from quantum_portfolio.optimizer import ALGORITHMS
from quantum_portfolio.portfolio import DEFAULT_THETA, generate_instance, investment_fractions, objective
from quantum_portfolio.qaoa_solver import COST_MODES, QaoaConfig, solve_qaoa
from quantum_portfolio.qite_solver import QITE_MODES, QiteConfig, solve_qite
from quantum_portfolio.serialization import SCHEMA_VERSION, InstanceRecord, prepare_record, read_instance_file, \
    read_json, render_histogram, select_record, write_instance_file, write_json, write_manifest
from quantum_portfolio.utils import bits_to_string, render_bitstring

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_ERROR = 1
EXIT_DEGENERATE = 2

COMMAND_DEFAULTS = dict(
    gen=dict(assets=3, slices=3, history=100, budget=10., theta=list(DEFAULT_THETA), count=100, seed=0),
    exact=dict(id=0, bit_order='canonical'),
    qaoa=dict(id=0, seed=0, bit_order='canonical', top=10, solver=dict()),
    qite=dict(id=0, seed=0, bit_order='canonical', top=10, solver=dict()),
    bench=dict(solver_name='qaoa', noise_kind='cx_x_flip', p_list=[0.], seeds=1, solver=dict()),
    baseline=dict(samples=10, seed=0),
)

SOLVER_CONFIGS = dict(qaoa=QaoaConfig, qite=QiteConfig)


def _float_list(text: str) -> List[float]:
    try:
        return [float(value) for value in text.split(',') if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers. Not '{}'".format(text)) from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(value) for value in text.split(',') if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated integers. Not '{}'".format(text)) from None


def _noise(text: str) -> dict:
    kind, _, rate = text.partition(':')
    if kind not in NOISE_KINDS:
        raise argparse.ArgumentTypeError("noise kind must be one of {}. Not '{}'".format(NOISE_KINDS, kind))
    try:
        return dict(kind=kind, error_rate=float(rate) if rate else 0.)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'kind:rate'. Not '{}'".format(text)) from None


def _sweep(text: str) -> dict:
    kind, _, rates = text.partition(':')
    if kind not in NOISE_KINDS:
        raise argparse.ArgumentTypeError("noise kind must be one of {}. Not '{}'".format(NOISE_KINDS, kind))
    return dict(noise_kind=kind, p_list=_float_list(rates) or [0.])


def _beta(text: str) -> Union[str, float]:
    if text == 'auto':
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("beta must be a number or 'auto'. Not '{}'".format(text)) from None


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON file with default values for all flags (a run manifest works too)")
    parser.add_argument("-o", "--output", help="output file (required unless set by --config)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output")


def _add_instance(parser: argparse.ArgumentParser, multiple: bool = False):
    parser.add_argument("--instance", help="instance file written by 'gen'")
    if multiple:
        parser.add_argument("--ids", type=_int_list, help="comma separated instance ids (default: all)")
    else:
        parser.add_argument("--id", type=int, help="instance id (default: 0)")


def _add_optimizer(parser: argparse.ArgumentParser):
    parser.add_argument("--algorithm", choices=ALGORITHMS, help="optimizer (default: cobyla)")
    parser.add_argument("--max-evals", type=int, help="cost evaluation budget (default: 1000)")
    parser.add_argument("--rho-begin", type=float, help="initial step in radians (default: 0.5)")
    parser.add_argument("--rho-end", type=float, help="final step in radians (default: 1e-4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantum-portfolio",
        description="Portfolio optimization with variational and imaginary-time ground state search on a "
                    "statevector simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
examples:
  quantum-portfolio gen --assets 3 --slices 3 --count 100 --seed 7 -o inst.json
  quantum-portfolio qaoa --instance inst.json --id 0 --layers 2 --mode exact -o r.json
  quantum-portfolio qite --instance inst.json --id 0 --mode exact --beta auto -o q.json
  quantum-portfolio bench --instance inst.json --sweep cx_x_flip:0.001,0.003,0.007,0.011 --seeds 10 -o b.csv
""")
    parser.add_argument("--version", action="version", version="%(prog)s " + package_version())
    commands = parser.add_subparsers(dest="command")
    commands.required = True

    gen = commands.add_parser("gen", help="generate a suite of problem instances")
    _add_common(gen)
    gen.add_argument("--assets", type=int, help="number of assets m (default: 3)")
    gen.add_argument("--slices", type=int, help="bits per asset w (default: 3)")
    gen.add_argument("--history", type=int, help="price history length N_f (default: 100)")
    gen.add_argument("--budget", type=float, help="budget b (default: 10)")
    gen.add_argument("--theta", type=_float_list, help="preference weights, e.g. 0.8,0.1,0.1")
    gen.add_argument("--count", type=int, help="number of instances (default: 100)")
    gen.add_argument("--seed", type=int, help="generator seed (default: 0)")

    exact = commands.add_parser("exact", help="brute force the ground state of an instance")
    _add_common(exact)
    _add_instance(exact)
    exact.add_argument("--bit-order", choices=('canonical', 'reversed'), help="bitstring rendering")

    qaoa = commands.add_parser("qaoa", help="variational ground state search")
    _add_common(qaoa)
    _add_instance(qaoa)
    qaoa.add_argument("--bit-order", choices=('canonical', 'reversed'), help="bitstring rendering")
    qaoa.add_argument("--seed", type=int, help="run seed (default: 0)")
    qaoa.add_argument("--layers", type=int, help="ansatz layers (default: 2)")
    qaoa.add_argument("--mode", choices=('exact', 'sampled'), help="exact expectation or shot estimates")
    qaoa.add_argument("--shots", type=int, help="shots per estimate in sampled mode (default: 4096)")
    qaoa.add_argument("--final-shots", type=int, help="shots of the final histogram (default: 8192)")
    qaoa.add_argument("--noise", type=_noise, help="noise model as kind:rate, e.g. cx_x_flip:0.007")
    qaoa.add_argument("--trajectories", type=int, help="noisy trajectories per evaluation (default: 1)")
    qaoa.add_argument("--entangler", choices=('ecr', 'cx'), help="ansatz entangler (default: ecr)")
    qaoa.add_argument("--cost-mode", choices=COST_MODES, help="cost function (default: deviation)")
    qaoa.add_argument("--trace-csv", help="also write the optimization trace to this CSV file")
    qaoa.add_argument("--top", type=int, help="number of most frequent bitstrings in the output (default: 10)")
    _add_optimizer(qaoa)

    qite = commands.add_parser("qite", help="imaginary time evolution by unitary dilation")
    _add_common(qite)
    _add_instance(qite)
    qite.add_argument("--bit-order", choices=('canonical', 'reversed'), help="bitstring rendering")
    qite.add_argument("--seed", type=int, help="run seed (default: 0)")
    qite.add_argument("--mode", choices=QITE_MODES, help="exact dilation or compiled circuit (default: exact)")
    qite.add_argument("--beta", type=_beta, help="imaginary time or 'auto' (default: auto)")
    qite.add_argument("--shots", type=int, help="shots (default: 4096)")
    qite.add_argument("--layers", type=int, help="layers of the compiled circuit (default: 4)")
    qite.add_argument("--noise", type=_noise, help="noise model of compiled runs as kind:rate")
    qite.add_argument("--trajectories", type=int, help="noisy trajectories (default: 1)")
    qite.add_argument("--threshold", type=float, help="compilation convergence threshold (default: 0.1)")
    qite.add_argument("--entangler", choices=('ecr', 'cx'), help="ansatz entangler (default: ecr)")
    qite.add_argument("--top", type=int, help="number of most frequent bitstrings in the output (default: 10)")
    _add_optimizer(qite)

    bench = commands.add_parser("bench", help="run a solver over instances, error rates and seeds")
    _add_common(bench)
    _add_instance(bench, multiple=True)
    bench.add_argument("--solver", choices=SOLVERS, help="solver (default: qaoa)")
    bench.add_argument("--sweep", type=_sweep, help="noise sweep as kind:p1,p2,... (default: noiseless)")
    bench.add_argument("--seeds", type=int, help="number of seeds per error rate (default: 1)")
    bench.add_argument("--jobs", type=int, help="worker threads (default: $QUANTUM_PORTFOLIO_JOBS or 1)")
    bench.add_argument("--layers", type=int, help="ansatz layers")
    bench.add_argument("--mode", help="qaoa: exact|sampled, qite: exact|compiled")
    bench.add_argument("--shots", type=int, help="shots")
    bench.add_argument("--beta", type=_beta, help="qite imaginary time or 'auto'")
    bench.add_argument("--trajectories", type=int, help="noisy trajectories")
    _add_optimizer(bench)

    baseline = commands.add_parser("baseline", help="return errors of random states")
    _add_common(baseline)
    _add_instance(baseline, multiple=True)
    baseline.add_argument("--samples", type=int, help="random states per instance (default: 10)")
    baseline.add_argument("--seed", type=int, help="seed (default: 0)")
    return parser


def _optimizer_flags(args) -> dict:
    return dict(algorithm=args.algorithm, max_evals=args.max_evals, rho_begin=args.rho_begin, rho_end=args.rho_end)


def _qaoa_solver_flags(args) -> dict:
    shots = 'exact' if args.mode == 'exact' else args.shots
    flags = dict(layers=args.layers, shots=shots, optimizer_parameters=_optimizer_flags(args))
    for key in ('final_shots', 'entangler', 'cost_mode'):
        flags[key] = getattr(args, key, None)
    flags['noise_parameters'] = getattr(args, 'noise', None)
    flags['trajectories_per_eval'] = args.trajectories
    return flags


def _qite_solver_flags(args) -> dict:
    flags = dict(beta=args.beta, mode=args.mode, shots=args.shots, layers=args.layers,
                 optimizer_parameters=_optimizer_flags(args), trajectories=args.trajectories)
    flags['noise_parameters'] = getattr(args, 'noise', None)
    flags['compile_threshold'] = getattr(args, 'threshold', None)
    flags['entangler'] = getattr(args, 'entangler', None)
    return flags


def _flags(args) -> dict:
    common = dict(output=args.output)
    if args.command == 'gen':
        return dict(common, assets=args.assets, slices=args.slices, history=args.history, budget=args.budget,
                    theta=args.theta, count=args.count, seed=args.seed)
    common['instance'] = args.instance
    if args.command == 'exact':
        return dict(common, id=args.id, bit_order=args.bit_order)
    if args.command == 'qaoa':
        return dict(common, id=args.id, seed=args.seed, bit_order=args.bit_order, trace_csv=args.trace_csv,
                    top=args.top, solver=_qaoa_solver_flags(args))
    if args.command == 'qite':
        return dict(common, id=args.id, seed=args.seed, bit_order=args.bit_order, top=args.top,
                    solver=_qite_solver_flags(args))
    if args.command == 'bench':
        sweep = args.sweep or {}
        flags = dict(common, ids=args.ids, solver_name=args.solver, seeds=args.seeds, jobs=args.jobs,
                     noise_kind=sweep.get('noise_kind'), p_list=sweep.get('p_list'))
        flags['solver_flags'] = args
        return flags
    return dict(common, ids=args.ids, samples=args.samples, seed=args.seed)


def _prune(flags: dict) -> dict:
    """Drops unset flags, also inside nested dicts."""
    pruned = {}
    for key, value in flags.items():
        if isinstance(value, dict):
            value = _prune(value)
            if not value:
                continue
        if value is not None:
            pruned[key] = value
    return pruned


def _resolve_solver(solver: str, parameters: dict) -> dict:
    """The solver parameters with every default filled in, as echoed in the manifest."""
    if solver not in SOLVER_CONFIGS:
        raise ConfigurationError("solver must be one of {}. Not '{}'".format(SOLVERS, solver))
    try:
        return SOLVER_CONFIGS[solver](**parameters).to_dict()
    except TypeError as e:
        raise ConfigurationError("invalid {} parameters: {}".format(solver, e))


def resolve_config(args) -> dict:
    flags = _flags(args)
    solver_args = flags.pop('solver_flags', None)
    file_config = read_json(args.config) if args.config else None
    config = resolve_run_config(args.command, _prune(flags), file_config)
    config = deep_merge(COMMAND_DEFAULTS[args.command], config)
    if args.command == 'bench':
        # solver flags depend on the solver, which may come from the config file
        solver_flags = _qaoa_solver_flags if config['solver_name'] == 'qaoa' else _qite_solver_flags
        if solver_args.mode is not None and config['solver_name'] == 'qaoa' and solver_args.mode not in (
                'exact', 'sampled'):
            raise ConfigurationError("qaoa mode must be 'exact' or 'sampled'. Not '{}'".format(solver_args.mode))
        config['solver'] = deep_merge(config.get('solver', {}), _prune(solver_flags(solver_args)))
        if config.get('jobs') is None:
            config['jobs'] = default_jobs()
    if 'solver' in config:
        config['solver'] = _resolve_solver(config.get('solver_name', args.command), config['solver'])
    required = ('output',) if args.command == 'gen' else ('output', 'instance')
    for key in required:
        if config.get(key) is None:
            raise ConfigurationError("--{} is required".format(key))
    return config


def _load(config: dict) -> List[InstanceRecord]:
    _, records = read_instance_file(config['instance'])
    ids = config.get('ids')
    if ids is not None:
        records = [select_record(records, instance_id) for instance_id in ids]
    return records


def _load_one(config: dict) -> InstanceRecord:
    _, records = read_instance_file(config['instance'])
    return select_record(records, config['id'])


def _bitstring_summary(record: InstanceRecord, histogram, config: dict) -> dict:
    bit_order = config['bit_order']
    ground = record.ground_string
    summary = dict(instance_id=record.instance_id,
                   ground_energy=record.ising.ground_energy,
                   ground_bitstring=render_bitstring(ground, bit_order),
                   bit_order=bit_order,
                   histogram=render_histogram(histogram, bit_order),
                   top_bitstrings=[dict(bitstring=render_bitstring(bitstring, bit_order), frequency=frequency,
                                        optimal=optimal)
                                   for bitstring, frequency, optimal in top_bitstrings(histogram, config['top'],
                                                                                       ground)])
    if len(histogram):
        summary['F_error_expectation'] = return_error(record.instance, record.summary, histogram).f_error
        summary['F_error_argmax'] = return_error(record.instance, record.summary, histogram, 'argmax').f_error
    return summary


def cmd_gen(config: dict):
    records = [prepare_record(generate_instance(config['assets'], config['slices'], config['history'],
                                                config['budget'], config['theta'], config['seed'], instance_id))
               for instance_id in range(config['count'])]
    write_instance_file(config['output'], records, config['assets'], config['slices'], config['history'],
                        config['budget'], config['theta'], config['seed'])
    logger.info("wrote %d instance(s) to %s", len(records), config['output'])


def cmd_exact(config: dict):
    record = _load_one(config)
    bits = record.ising.ground_bitstring
    z = decode_z(bits, record.instance.w)
    write_json(config['output'], dict(
        schema_version=SCHEMA_VERSION, instance_id=record.instance_id,
        ground_energy=record.ising.ground_energy,
        ground_bitstring=render_bitstring(bits_to_string(bits), config['bit_order']),
        bit_order=config['bit_order'], gap=record.gap, z=z,
        investment_fractions=investment_fractions(z, record.instance.w),
        F_ideal=objective(record.instance, record.summary, z)))


def cmd_qaoa(config: dict):
    record = _load_one(config)
    result = solve_qaoa(record.ising, QaoaConfig(**config['solver']), config['seed'])
    document = dict(schema_version=SCHEMA_VERSION, solver='qaoa', seed=config['seed'], **result.to_dict())
    document.update(_bitstring_summary(record, result.histogram, config))
    write_json(config['output'], document)
    if config.get('trace_csv'):
        result.trace.to_csv(config['trace_csv'])
    logger.info("min energy deviation %.4g after %d evaluations", result.min_energy_deviation, len(result.trace))


def cmd_qite(config: dict):
    record = _load_one(config)
    result = solve_qite(record.ising, QiteConfig(**config['solver']), config['seed'])
    document = dict(schema_version=SCHEMA_VERSION, solver='qite', seed=config['seed'], **result.to_dict())
    document['energy_deviation'] = abs(result.energy - record.ising.ground_energy)
    document.update(_bitstring_summary(record, result.histogram, config))
    write_json(config['output'], document)
    logger.info("success probability %.4g, energy %.6g", result.success_probability, result.energy)


def cmd_bench(config: dict):
    records = _load(config)
    report = instance_suite_run(records, config['solver_name'], config['solver'], config['p_list'],
                                range(config['seeds']), config['noise_kind'], config['jobs'])
    report.to_csv(config['output'])
    aggregate = [dict(solver=solver, p=p, **values) for (solver, p), values in report.aggregate().items()]
    write_json(config['output'] + '.histograms.json',
               dict(schema_version=SCHEMA_VERSION, runs=report.histograms(), aggregate=aggregate))
    failures = sum(row.failed for row in report.rows)
    logger.info("%d row(s), %d failure(s)", len(report), failures)


def cmd_baseline(config: dict):
    rows = []
    for record in _load(config):
        baseline = random_state_baseline(record.ising, record.instance, record.summary, config['samples'],
                                         config['seed'])
        rows.append(dict(instance_id=record.instance_id, F_error_mean=baseline.mean, F_error_std=baseline.std,
                         F_errors=baseline.f_errors))
    write_json(config['output'], dict(schema_version=SCHEMA_VERSION, samples=config['samples'], instances=rows))


COMMANDS = dict(gen=cmd_gen, exact=cmd_exact, qaoa=cmd_qaoa, qite=cmd_qite, bench=cmd_bench, baseline=cmd_baseline)


def _configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Union[None, Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config)
        write_manifest(config['output'], args.command, config, package_version())
    except DegenerateRunError as e:
        logger.error("degenerate run: %s (success probability %s)", e, e.success_probability)
        return EXIT_DEGENERATE
    except (QuantumPortfolioError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
