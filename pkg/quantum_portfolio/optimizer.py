import csv
from typing import Callable, List, Sequence, Tuple

import numpy as np
import scipy.optimize

from quantum_portfolio.exceptions import EvaluationError, ParameterError
from quantum_portfolio.utils import atomic_writer, rng_stream

ALGORITHMS = ('cobyla', 'nelder_mead')
RESTART_EVALS_PER_PARAMETER = 50


class OptimizerConfig:
    """
    Settings of a derivative-free minimization.
    """
    __slots__ = "algorithm", "max_evals", "rho_begin", "rho_end", "seed"

    def __init__(self, algorithm: str = 'cobyla', max_evals: int = 1000, rho_begin: float = 0.5,
                 rho_end: float = 1e-4, seed: int = 0):
        """
        Constructs a new OptimizerConfig.

        :param algorithm: 'cobyla' (Powell's linear-approximation trust region) or 'nelder_mead' (simplex).
        :param max_evals: Hard limit on the number of cost evaluations.
        :param rho_begin: Initial step, radians. For cobyla the initial trust region radius, for nelder_mead the
        edge length of the initial simplex.
        :param rho_end: Final step, radians. The search stops once its step falls below this value.
        :param seed: Seed for random initial parameters.
        """
        if algorithm not in ALGORITHMS:
            raise ParameterError("algorithm must be one of {}. Not '{}'".format(ALGORITHMS, algorithm))
        if max_evals < 1:
            raise ParameterError("max_evals must be at least 1. Not '{}'".format(max_evals))
        if not 0 < rho_end < rho_begin:
            raise ParameterError("0 < rho_end < rho_begin must hold. Got rho_end={}, rho_begin={}".format(
                rho_end, rho_begin))
        self.algorithm = algorithm
        self.max_evals = int(max_evals)
        self.rho_begin = float(rho_begin)
        self.rho_end = float(rho_end)
        self.seed = int(seed)

    def to_dict(self) -> dict:
        return dict(algorithm=self.algorithm, max_evals=self.max_evals, rho_begin=self.rho_begin,
                    rho_end=self.rho_end, seed=self.seed)


class OptTrace:
    """
    Every evaluation of a minimization in call order as (iteration, parameters, cost).
    """
    __slots__ = "evaluations"

    def __init__(self):
        self.evaluations = []  # type: List[Tuple[int, np.ndarray, float]]

    def record(self, params: np.ndarray, value: float):
        self.evaluations.append((len(self.evaluations), np.array(params, dtype=float), float(value)))

    def __len__(self):
        return len(self.evaluations)

    @property
    def values(self) -> np.ndarray:
        return np.array([value for _, _, value in self.evaluations])

    def running_minimum(self) -> np.ndarray:
        return np.minimum.accumulate(self.values)

    @property
    def best_index(self) -> int:
        if not self.evaluations:
            raise ParameterError("the trace is empty")
        return int(np.argmin(self.values))

    @property
    def best_value(self) -> float:
        return self.evaluations[self.best_index][2]

    @property
    def best_params(self) -> np.ndarray:
        return self.evaluations[self.best_index][1]

    def to_csv(self, path: str):
        """Writes the columns (i, cost, best_so_far)."""
        with atomic_writer(path, newline='') as fh:
            writer = csv.writer(fh)
            writer.writerow(['i', 'cost', 'best_so_far'])
            for (i, _, value), best in zip(self.evaluations, self.running_minimum()):
                writer.writerow([i, repr(value), repr(float(best))])


class _BudgetExhausted(Exception):
    pass


def minimize(cost: Callable[[np.ndarray], float], initial: Sequence[float], config: OptimizerConfig) -> OptTrace:
    """
    Minimizes a scalar cost over unbounded real parameters without derivatives.

    Evaluations are strictly sequential. The trace holds every evaluation in call order and never more than
    `config.max_evals` of them, also when the cost is stochastic.

    :param cost: Function from a parameter vector to a real number.
    :param initial: Starting parameters.
    :param config: The optimizer settings.
    :return: The evaluation trace. Its best entry is the result.
    """
    initial = np.array(initial, dtype=float).reshape(-1)
    trace = OptTrace()
    limit = [config.max_evals]

    def traced_cost(params):
        if len(trace) >= limit[0]:
            raise _BudgetExhausted()
        value = cost(np.array(params, dtype=float))
        if not np.isfinite(value):
            raise EvaluationError(len(trace), value)
        trace.record(params, value)
        return float(value)

    if config.algorithm == 'cobyla':
        _cobyla_with_restarts(traced_cost, initial, config, trace, limit)
    else:
        simplex = np.vstack([initial, initial + config.rho_begin * np.eye(len(initial))])
        try:
            scipy.optimize.minimize(traced_cost, initial, method='Nelder-Mead',
                                    options=dict(maxfev=config.max_evals, initial_simplex=simplex,
                                                 xatol=config.rho_end, fatol=1e-12))
        except _BudgetExhausted:
            pass
    return trace


def _cobyla_with_restarts(traced_cost: Callable[[np.ndarray], float], initial: np.ndarray, config: OptimizerConfig,
                          trace: OptTrace, limit: list):
    """
    Runs COBYLA in segments of at most RESTART_EVALS_PER_PARAMETER * (d + 1) evaluations. Every segment after the
    first starts from the best point so far with the trust region radius reset to rho_begin. Restarts stop when the
    budget is spent or a segment brings no improvement.
    """
    segment = RESTART_EVALS_PER_PARAMETER * (len(initial) + 1)
    start = initial
    while len(trace) < config.max_evals:
        best_before = trace.best_value if len(trace) else np.inf
        evaluations_before = len(trace)
        limit[0] = min(config.max_evals, evaluations_before + segment)
        try:
            scipy.optimize.minimize(traced_cost, start, method='COBYLA', tol=config.rho_end,
                                    options=dict(rhobeg=config.rho_begin, maxiter=config.max_evals))
        except _BudgetExhausted:
            pass
        if len(trace) == evaluations_before or not trace.best_value < best_before:
            break
        start = trace.best_params


def random_initial_params(count: int, seed: int = 0) -> np.ndarray:
    """Uniform angles in [0, 2 pi), deterministic given the seed."""
    if count < 1:
        raise ParameterError("count must be at least 1. Not '{}'".format(count))
    return rng_stream(seed).uniform(0, 2 * np.pi, count)
