import concurrent.futures
import csv
import logging
import math
import time
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy.stats
from sortedcontainers import SortedDict

from quantum_portfolio.encoding import IsingModel, decode_z
from quantum_portfolio.exceptions import DegenerateRunError, ParameterError, QuantumPortfolioError
from quantum_portfolio.portfolio import FinancialSummary, PortfolioInstance, objective_values
from quantum_portfolio.qaoa_solver import QaoaConfig, solve_qaoa
from quantum_portfolio.qite_solver import QiteConfig, solve_qite
from quantum_portfolio.serialization import InstanceRecord, read_instance_file
from quantum_portfolio.statevector import histogram_mode
from quantum_portfolio.utils import all_bits, atomic_writer, rng_stream, string_to_index

logger = logging.getLogger(__name__)

RETURN_MODES = ('expectation', 'argmax')
SOLVERS = ('qaoa', 'qite')
REPORT_COLUMNS = ('instance_id', 'solver', 'mode', 'p', 'seed', 'min_energy_deviation', 'F_error_expectation',
                  'F_error_argmax', 'success_probability', 'matched_optimum', 'wall_time_s')


class ReturnMetrics:
    """
    Portfolio return of a solver output compared to the best achievable return.
    """
    __slots__ = "f_ideal", "f_circuit", "mode"

    def __init__(self, f_ideal: float, f_circuit: float, mode: str):
        self.f_ideal = float(f_ideal)
        self.f_circuit = float(f_circuit)
        self.mode = mode

    @property
    def f_error(self) -> float:
        return self.f_ideal - self.f_circuit


def objective_table(instance: PortfolioInstance, summary: FinancialSummary) -> np.ndarray:
    """F(z(x)) for every basis index x."""
    return objective_values(instance, summary, decode_z(all_bits(instance.qubit_count), instance.w))


def return_error_from_probabilities(instance: PortfolioInstance, summary: FinancialSummary,
                                    probabilities: np.ndarray) -> ReturnMetrics:
    """Expectation-mode return error of an exact distribution over basis indices."""
    table = objective_table(instance, summary)
    probabilities = np.asarray(probabilities, dtype=float)
    if probabilities.shape != table.shape:
        raise ParameterError("expected {} probabilities. Got shape {}".format(len(table), probabilities.shape))
    return ReturnMetrics(np.max(table), probabilities @ table / np.sum(probabilities), 'expectation')


def return_error(instance: PortfolioInstance, summary: FinancialSummary, histogram: SortedDict,
                 mode: str = 'expectation') -> ReturnMetrics:
    """
    Computes the return error F_ideal - F_circuit of a measured histogram.

    F_ideal is the maximum of F over all allocations. In 'expectation' mode F_circuit is the frequency weighted mean
    of F over the histogram, in 'argmax' mode it is F of the most frequent bitstring.

    :param instance: The problem instance.
    :param summary: Its financial summary.
    :param histogram: Histogram over canonical bitstrings of the instance's qubits.
    :param mode: 'expectation' or 'argmax'.
    :return: The metrics.
    """
    if mode not in RETURN_MODES:
        raise ParameterError("mode must be one of {}. Not '{}'".format(RETURN_MODES, mode))
    total = sum(histogram.values())
    if total == 0:
        raise DegenerateRunError("cannot compute the return error of an empty histogram")
    table = objective_table(instance, summary)
    if mode == 'argmax':
        f_circuit = table[string_to_index(histogram_mode(histogram))]
    else:
        f_circuit = sum(count * table[string_to_index(bitstring)] for bitstring, count in histogram.items()) / total
    return ReturnMetrics(np.max(table), f_circuit, mode)


class BaselineResult:
    """Return errors of randomly drawn states."""
    __slots__ = "metrics"

    def __init__(self, metrics: List[ReturnMetrics]):
        self.metrics = metrics

    @property
    def f_errors(self) -> np.ndarray:
        return np.array([metric.f_error for metric in self.metrics])

    @property
    def mean(self) -> float:
        return float(np.mean(self.f_errors))

    @property
    def std(self) -> float:
        return float(np.std(self.f_errors))


def random_state_baseline(ising: IsingModel, instance: PortfolioInstance, summary: FinancialSummary,
                          samples: int = 10, seed: int = 0) -> BaselineResult:
    """
    Return errors of random states sum_i a_i |i> / ||a|| with every a_i drawn uniformly from [0, 1].

    The probabilities of a sample are a_i^2 / ||a||^2 and enter the expectation-mode return error exactly.

    :param ising: The instance's Hamiltonian, which fixes the number of qubits.
    :param instance: The problem instance.
    :param summary: Its financial summary.
    :param samples: The number of random states.
    :param seed: Seed of the random states. Sample k uses the stream (seed, k).
    :return: One ReturnMetrics per sample.
    """
    if samples < 1:
        raise ParameterError("samples must be at least 1. Not '{}'".format(samples))
    if ising.n != instance.qubit_count:
        raise ParameterError("the Hamiltonian has {} qubits but the instance needs {}".format(
            ising.n, instance.qubit_count))
    metrics = []
    for k in range(samples):
        amplitudes = rng_stream(seed, k).uniform(0, 1, 2 ** ising.n)
        metrics.append(return_error_from_probabilities(instance, summary, amplitudes ** 2))
    return BaselineResult(metrics)


class BenchRow:
    """
    One benchmark cell. Failed cells keep their identifying columns, NaN metrics and the error text.
    """
    __slots__ = "instance_id", "solver", "mode", "p", "seed", "min_energy_deviation", "f_error_expectation", \
                "f_error_argmax", "success_probability", "matched_optimum", "wall_time_s", "histogram", \
                "mode_bitstring", "error"

    def __init__(self, instance_id: int, solver: str, mode: str, p: float, seed: int):
        self.instance_id = instance_id
        self.solver = solver
        self.mode = mode
        self.p = float(p)
        self.seed = seed
        self.min_energy_deviation = math.nan
        self.f_error_expectation = math.nan
        self.f_error_argmax = math.nan
        self.success_probability = None  # type: Union[None, float]
        self.matched_optimum = False
        self.wall_time_s = 0.
        self.histogram = SortedDict()
        self.mode_bitstring = None  # type: Union[None, str]
        self.error = None  # type: Union[None, str]

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_values(self) -> list:
        return [self.instance_id, self.solver, self.mode, repr(self.p), self.seed, repr(self.min_energy_deviation),
                repr(self.f_error_expectation), repr(self.f_error_argmax),
                '' if self.success_probability is None else repr(self.success_probability),
                str(self.matched_optimum).lower(), '{:.3f}'.format(self.wall_time_s)]


class BenchReport:
    """Rows in deterministic order: instance, then p, then seed."""
    __slots__ = "rows"

    def __init__(self, rows: Sequence[BenchRow] = ()):
        self.rows = list(rows)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path: str):
        with atomic_writer(path, newline='') as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in self.rows:
                writer.writerow(row.csv_values())

    def histograms(self) -> List[dict]:
        """Per-run histograms for distribution plots."""
        return [dict(instance_id=row.instance_id, solver=row.solver, p=row.p, seed=row.seed,
                     histogram=dict(row.histogram), error=row.error) for row in self.rows]

    def aggregate(self) -> Dict[Tuple[str, float], dict]:
        """
        Mean and standard deviation of min_energy_deviation and F_error_expectation per (solver, p), over the
        rows that did not fail.
        """
        groups = SortedDict()
        for row in self.rows:
            groups.setdefault((row.solver, row.p), []).append(row)
        summary = {}
        for key, rows in groups.items():
            succeeded = [row for row in rows if not row.failed]
            deviations = np.array([row.min_energy_deviation for row in succeeded])
            f_errors = np.array([row.f_error_expectation for row in succeeded])
            summary[key] = dict(runs=len(rows), failures=len(rows) - len(succeeded),
                                min_energy_deviation_mean=_mean(deviations),
                                min_energy_deviation_std=_std(deviations),
                                f_error_mean=_mean(f_errors), f_error_std=_std(f_errors))
        return summary


def _mean(values: np.ndarray) -> float:
    return float(np.mean(values)) if len(values) else math.nan


def _std(values: np.ndarray) -> float:
    return float(np.std(values)) if len(values) else math.nan


def _solver_config(solver: str, solver_parameters: dict, noise_kind: str, p: float):
    parameters = dict(solver_parameters)
    if p > 0:
        parameters['noise_parameters'] = dict(kind=noise_kind, error_rate=p)
    if solver == 'qaoa':
        return QaoaConfig(**parameters)
    if solver == 'qite':
        return QiteConfig(**parameters)
    raise ParameterError("solver must be one of {}. Not '{}'".format(SOLVERS, solver))


def _run_mode(solver: str, solver_parameters: dict) -> str:
    if solver == 'qite':
        return solver_parameters.get('mode', 'exact')
    return 'exact' if solver_parameters.get('shots') == 'exact' else 'sampled'


def run_cell(record: InstanceRecord, solver: str, solver_parameters: dict, p: float, seed: int,
             noise_kind: str = 'cx_x_flip') -> BenchRow:
    """
    Runs one solver on one instance at one error rate and seed.

    Errors of the package are recorded in the row instead of being raised.
    """
    row = BenchRow(record.instance_id, solver, _run_mode(solver, solver_parameters), p, seed)
    start = time.perf_counter()
    try:
        config = _solver_config(solver, solver_parameters, noise_kind, p)
        ground_energy = record.ising.ground_energy
        if solver == 'qaoa':
            result = solve_qaoa(record.ising, config, seed)
            row.min_energy_deviation = result.min_energy_deviation
        else:
            result = solve_qite(record.ising, config, seed)
            row.min_energy_deviation = abs(result.energy - ground_energy)
            row.success_probability = result.success_probability
        row.histogram = result.histogram
        row.f_error_expectation = return_error(record.instance, record.summary, result.histogram).f_error
        row.f_error_argmax = return_error(record.instance, record.summary, result.histogram, 'argmax').f_error
        row.mode_bitstring = histogram_mode(result.histogram)
        row.matched_optimum = row.mode_bitstring == record.ground_string
    except (QuantumPortfolioError, FloatingPointError, np.linalg.LinAlgError) as e:
        row.error = "{}: {}".format(type(e).__name__, e)
        if isinstance(e, DegenerateRunError):
            row.success_probability = e.success_probability
        logger.warning("instance %s, %s, p=%s, seed %s failed: %s", record.instance_id, solver, p, seed, row.error)
    row.wall_time_s = time.perf_counter() - start
    logger.info("instance %s, %s, p=%s, seed %s: deviation %.4g, F_error %.4g (%.1f s)", record.instance_id, solver,
                p, seed, row.min_energy_deviation, row.f_error_expectation, row.wall_time_s)
    return row


def _run_cells(cells: List[tuple], jobs: int) -> BenchReport:
    if jobs < 1:
        raise ParameterError("jobs must be at least 1. Not '{}'".format(jobs))
    if jobs == 1 or len(cells) <= 1:
        return BenchReport([run_cell(*cell) for cell in cells])
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
        return BenchReport(list(executor.map(lambda cell: run_cell(*cell), cells)))


def noise_sweep(record: InstanceRecord, solver: str, solver_parameters: dict, p_list: Sequence[float],
                seeds: Sequence[int], noise_kind: str = 'cx_x_flip', jobs: int = 1) -> BenchReport:
    """
    Runs a solver on one instance for every error rate in `p_list` and every seed.

    :param record: The instance with its Hamiltonian.
    :param solver: 'qaoa' or 'qite'.
    :param solver_parameters: Keyword arguments of QaoaConfig or QiteConfig. The noise parameters are set per cell.
    :param p_list: The error rates.
    :param seeds: The seeds run at every error rate.
    :param noise_kind: The noise model kind used for p > 0.
    :param jobs: Number of worker threads.
    :return: The report, rows ordered by p and then seed.
    """
    if len(p_list) == 0:
        raise ParameterError("p_list must not be empty")
    cells = [(record, solver, solver_parameters, p, seed, noise_kind) for p in p_list for seed in seeds]
    return _run_cells(cells, jobs)


def instance_suite_run(records: Union[str, Sequence[InstanceRecord]], solver: str, solver_parameters: dict,
                       p_list: Sequence[float] = (0.,), seeds: Sequence[int] = (0,), noise_kind: str = 'cx_x_flip',
                       jobs: int = 1) -> BenchReport:
    """
    Runs a solver on every instance of a suite, optionally over several error rates and seeds.

    :param records: The instance records or the path of an instance file.
    :return: The report, rows ordered by instance, p and seed. An empty suite gives an empty report.
    """
    if isinstance(records, str):
        _, records = read_instance_file(records)
    logger.info("running %s on %d instance(s), %d error rate(s), %d seed(s)", solver, len(records), len(p_list),
                len(seeds))
    cells = [(record, solver, solver_parameters, p, seed, noise_kind)
             for record in records for p in p_list for seed in seeds]
    return _run_cells(cells, jobs)


def top_bitstrings(histogram: SortedDict, k: int = 10, ground_bitstring: Union[None, str] = None) \
        -> List[Tuple[str, float, bool]]:
    """
    The k most frequent bitstrings as (bitstring, relative frequency, is ground bitstring). Equal counts are
    ordered lexicographically.
    """
    total = sum(histogram.values())
    if total == 0:
        return []
    ranked = sorted(histogram.items(), key=lambda item: -item[1])
    return [(bitstring, count / total, bitstring == ground_bitstring) for bitstring, count in ranked[:k]]


def f_error_histogram(rows: Sequence[BenchRow], bins: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """Histogram of the expectation-mode return errors of the successful rows, as (counts, bin edges)."""
    f_errors = np.array([row.f_error_expectation for row in rows if not row.failed])
    if len(f_errors) == 0:
        return np.zeros(bins, dtype=int), np.linspace(0, 1, bins + 1)
    return np.histogram(f_errors, bins=bins)


def rank_trend(report: BenchReport, solver: str, metric: str = 'min_energy_deviation') -> float:
    """
    Spearman rank correlation between the error rate and the seed-averaged metric. NaN for fewer than two rates.
    """
    key = dict(min_energy_deviation='min_energy_deviation_mean', f_error='f_error_mean')[metric]
    aggregate = report.aggregate()
    points = [(p, values[key]) for (row_solver, p), values in aggregate.items()
              if row_solver == solver and not math.isnan(values[key])]
    if len(points) < 2:
        return math.nan
    rates, means = zip(*points)
    correlation, _ = scipy.stats.spearmanr(rates, means)
    return float(correlation)
