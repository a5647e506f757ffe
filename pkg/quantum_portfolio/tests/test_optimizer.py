import numpy as np

import pytest

from quantum_portfolio.exceptions import EvaluationError, ParameterError
from quantum_portfolio.optimizer import ALGORITHMS, OptimizerConfig, OptTrace, minimize, random_initial_params
from quantum_portfolio.utils import rng_stream


def sphere(x):
    return float(np.sum(x ** 2))


def rosenbrock(x):
    return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)


def test_config_validation():
    with pytest.raises(ParameterError):
        OptimizerConfig(algorithm='lbfgsb')
    with pytest.raises(ParameterError):
        OptimizerConfig(max_evals=0)
    with pytest.raises(ParameterError):
        OptimizerConfig(rho_begin=0.1, rho_end=0.2)


def test_cobyla_sphere():
    trace = minimize(sphere, np.ones(9), OptimizerConfig('cobyla', max_evals=500))
    assert len(trace) <= 500
    assert trace.best_value < 1e-4


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_rosenbrock(algorithm):
    trace = minimize(rosenbrock, [-1.2, 1.], OptimizerConfig(algorithm, max_evals=2000))
    assert len(trace) <= 2000
    assert trace.best_value < 1e-2


@pytest.mark.parametrize("algorithm", ['cobyla', 'nelder_mead'])
def test_single_evaluation(algorithm):
    trace = minimize(sphere, [1., 2.], OptimizerConfig(algorithm, max_evals=1))
    assert len(trace) == 1
    assert trace.best_value == 5.
    assert np.all(trace.best_params == [1., 2.])


@pytest.mark.parametrize("algorithm", ['cobyla', 'nelder_mead'])
def test_running_minimum_is_monotone(algorithm):
    trace = minimize(rosenbrock, [-1.2, 1.], OptimizerConfig(algorithm, max_evals=300))
    running = trace.running_minimum()
    assert np.all(np.diff(running) <= 0)
    assert running[-1] == trace.best_value == np.min(trace.values)
    assert [i for i, _, _ in trace.evaluations] == list(range(len(trace)))


@pytest.mark.parametrize("algorithm", ['cobyla', 'nelder_mead'])
def test_deterministic_cost_gives_identical_traces(algorithm):
    config = OptimizerConfig(algorithm, max_evals=200)
    a = minimize(rosenbrock, [-1.2, 1.], config)
    b = minimize(rosenbrock, [-1.2, 1.], config)
    assert np.all(a.values == b.values)


@pytest.mark.parametrize("algorithm", ['cobyla', 'nelder_mead'])
def test_stochastic_cost_respects_budget(algorithm):
    random = rng_stream(3)

    def noisy_sphere(x):
        return sphere(x) + random.normal(scale=0.1)

    trace = minimize(noisy_sphere, np.ones(4), OptimizerConfig(algorithm, max_evals=150))
    assert 1 <= len(trace) <= 150


def test_non_finite_cost_reports_iteration():
    calls = []

    def cost(x):
        calls.append(x)
        return np.nan if len(calls) == 3 else sphere(x)

    with pytest.raises(EvaluationError) as e:
        minimize(cost, np.ones(3), OptimizerConfig())
    assert e.value.iteration == 2


def test_trace_csv(tmp_path):
    trace = OptTrace()
    for value in (3., 1., 2.):
        trace.record(np.zeros(2), value)
    path = str(tmp_path / "trace.csv")
    trace.to_csv(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines == ["i,cost,best_so_far", "0,3.0,3.0", "1,1.0,1.0", "2,2.0,1.0"]


def test_empty_trace_has_no_best():
    with pytest.raises(ParameterError):
        OptTrace().best_value


def test_random_initial_params():
    a = random_initial_params(54, seed=12)
    assert np.all(a == random_initial_params(54, seed=12))
    assert np.all((a >= 0) & (a < 2 * np.pi))
    for seed in range(100):
        assert np.any(random_initial_params(54, seed) != random_initial_params(54, seed + 100))
    with pytest.raises(ParameterError):
        random_initial_params(0)
