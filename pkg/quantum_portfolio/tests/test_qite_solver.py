import numpy as np
import scipy.linalg

import pytest

from quantum_portfolio.circuit import Circuit
from quantum_portfolio.encoding import IsingModel, build_ising, build_qubo
from quantum_portfolio.exceptions import DegenerateRunError, ParameterError, RangeError
from quantum_portfolio.gates import Z_MATRIX
from quantum_portfolio.noise_model import NoiseModel
from quantum_portfolio.optimizer import OptimizerConfig
from quantum_portfolio.portfolio import generate_instance, summarize
from quantum_portfolio.qite_solver import QiteConfig, apply_qite_exact, build_dilation, \
    build_dilation_from_hamiltonian, compile_cost, compile_qite_circuit, default_beta, energy_curve, \
    post_selected_state, run_qite_compiled, solve_qite
from quantum_portfolio.statevector import StateVector, histogram_mode
from quantum_portfolio.utils import bits_to_string, rng_stream


def random_ising(n, seed=0):
    random = np.random.RandomState(seed)
    return IsingModel(random.normal(size=n), random.normal(size=(n, n)) / n, random.normal()).with_ground_state()


def portfolio_ising(seed):
    instance = generate_instance(seed=seed)
    return build_ising(build_qubo(instance, summarize(instance))).with_ground_state()


def check_dilation(dilation, non_unitary):
    u = dilation.matrix
    assert np.max(np.abs(u @ u.conj().T - np.eye(len(u)))) < 1e-10
    assert np.allclose(dilation.scaled_block, dilation.u * non_unitary, atol=1e-10, rtol=0)
    column = dilation.scaled_block.conj().T @ dilation.scaled_block + \
        dilation.lower_block.conj().T @ dilation.lower_block
    assert np.allclose(column, np.eye(dilation.dimension), atol=1e-10)


def test_zero_beta_is_trivial():
    dilation = build_dilation(random_ising(3), 0.)
    assert dilation.u == 1
    assert np.allclose(dilation.scaled_block, np.eye(8))
    assert np.allclose(dilation.lower_block, 0)


def test_single_spin_by_hand():
    beta = np.log(2) / 2
    # s = 2x - 1, so |0> is the lower level of h s
    dilation = build_dilation(IsingModel([1.], np.zeros((1, 1)), 0.), beta)
    assert np.isclose(dilation.u, np.exp(-beta))
    assert np.allclose(dilation.scaled_block, np.diag([1, 0.5]), atol=1e-12)
    assert np.allclose(dilation.lower_block, np.diag([0, np.sqrt(3) / 2]), atol=1e-12)


def test_pauli_z_by_hand():
    dilation = build_dilation_from_hamiltonian(Z_MATRIX, np.log(2) / 2)
    assert np.allclose(dilation.scaled_block, np.diag([0.5, 1]), atol=1e-12)
    assert np.allclose(dilation.lower_block, np.diag([np.sqrt(3) / 2, 0]), atol=1e-12)


@pytest.mark.parametrize("n", [*range(1, 8), *(pytest.param(n, marks=pytest.mark.slow) for n in (8, 9))])
def test_diagonal_dilation_invariants(n):
    ising = random_ising(n, seed=n)
    beta = rng_stream(n).uniform(0.01, 4)
    check_dilation(build_dilation(ising, beta), np.diag(np.exp(-beta * ising.energies())))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_general_dilation_invariants(n):
    random = np.random.RandomState(n)
    a = random.normal(size=(2 ** n, 2 ** n)) + 1j * random.normal(size=(2 ** n, 2 ** n))
    hamiltonian = (a + a.conj().T) / 2
    dilation = build_dilation_from_hamiltonian(hamiltonian, 0.7)
    check_dilation(dilation, scipy.linalg.expm(-0.7 * hamiltonian))


def test_general_path_agrees_with_diagonal_path():
    ising = random_ising(3, seed=1)
    diagonal = build_dilation(ising, 1.)
    general = build_dilation_from_hamiltonian(np.diag(ising.energies()), 1.)
    assert np.isclose(diagonal.u, general.u)
    assert np.allclose(diagonal.scaled_block, general.scaled_block, atol=1e-10)
    assert np.allclose(np.abs(diagonal.lower_block), np.abs(general.lower_block), atol=1e-10)


def test_dilation_errors():
    with pytest.raises(ParameterError):
        build_dilation(random_ising(2), -0.1)
    with pytest.raises(RangeError):
        build_dilation(IsingModel([1000.], np.zeros((1, 1)), 0.), 1.)
    with pytest.raises(ParameterError):
        build_dilation_from_hamiltonian(np.array([[0., 1.], [0., 0.]]), 1.)


def test_default_beta():
    assert np.isclose(default_beta(IsingModel([1.], np.zeros((1, 1)), 0.)), 1.)
    assert np.isclose(default_beta(IsingModel([0.001], np.zeros((1, 1)), 0.)), 5.)
    assert np.isclose(default_beta(IsingModel([100.], np.zeros((1, 1)), 0.)), 0.1)
    assert np.isclose(default_beta(IsingModel([0.], np.zeros((1, 1)), 0.)), 5.)


def test_zero_beta_keeps_the_initial_state():
    ising = random_ising(3)
    state, success_probability = post_selected_state(build_dilation(ising, 0.))
    assert np.isclose(success_probability, 1)
    assert np.isclose(state.fidelity(StateVector.uniform(3)), 1)


@pytest.mark.parametrize("n", range(1, 10))
def test_post_selection_fidelity_and_success_law(n):
    ising = random_ising(n, seed=10 + n)
    beta = rng_stream(n, 1).uniform(0.01, 4)
    dilation = build_dilation(ising, beta)
    random = rng_stream(n, 2)
    amplitudes = random.normal(size=2 ** n) + 1j * random.normal(size=2 ** n)
    initial = StateVector(amplitudes / np.linalg.norm(amplitudes))

    state, success_probability = post_selected_state(dilation, initial)
    target = np.exp(-beta * ising.energies()) * initial.amplitudes
    assert state.fidelity(StateVector(target / np.linalg.norm(target))) >= 1 - 1e-10
    assert np.isclose(success_probability, dilation.u ** 2 * np.linalg.norm(target) ** 2, atol=1e-10, rtol=0)


def test_large_beta_finds_the_ground_state():
    # without couplings the gap is twice the smallest field
    ising = IsingModel([1., 0.8, 0.6, 0.5, 0.3], np.zeros((5, 5)), 0.).with_ground_state()
    gap = 0.6
    result = apply_qite_exact(build_dilation(ising, 10 / gap), ising, shots=4096, seed=1)
    ground = bits_to_string(ising.ground_bitstring)
    assert histogram_mode(result.histogram) == ground
    assert result.histogram[ground] / 4096 > 0.99
    assert 0 < result.success_probability <= 1


def test_exact_qite_is_noiseless():
    dilation = build_dilation(random_ising(2), 1.)
    with pytest.raises(ParameterError):
        apply_qite_exact(dilation, random_ising(2), noise=NoiseModel('cx_x_flip', 0.01))
    with pytest.raises(ParameterError):
        QiteConfig(noise_parameters="cx_x_flip:0.01")


def test_vanishing_overlap_is_degenerate():
    # E(0) = -1, E(1) = 1000, so e^(-beta H) annihilates |1> numerically
    ising = IsingModel([500.5], np.zeros((1, 1)), 499.5)
    with pytest.raises(DegenerateRunError) as e:
        apply_qite_exact(build_dilation(ising, 1.), ising, initial=StateVector.basis(1, 1))
    assert e.value.success_probability == 0


@pytest.mark.parametrize("seed", range(3))
def test_energy_decreases_with_imaginary_time(seed):
    curve = energy_curve(portfolio_ising(seed), [0, 0.25, 0.5, 1, 2, 4])
    assert np.all(np.diff(curve[:, 1]) <= 1e-9)
    assert np.all((curve[:, 2] > 0) & (curve[:, 2] <= 1 + 1e-12))


def test_compile_cost():
    u = build_dilation(random_ising(2), 1.).matrix
    assert np.isclose(compile_cost(u, u), 0)
    assert np.isclose(compile_cost(np.eye(4), np.eye(4)), 0)
    assert np.isclose(compile_cost(-u, u), 2)


def test_compile_returns_best_circuit_and_warns():
    dilation = build_dilation(random_ising(1), 0.5)
    with pytest.warns(UserWarning):
        circuit, cost, trace = compile_qite_circuit(dilation, layers=1, seed=3, threshold=1e-12,
                                                    optimizer=OptimizerConfig(max_evals=100))
    assert circuit.n == 2
    assert np.isclose(cost, trace.best_value)
    assert np.isclose(compile_cost(circuit.unitary(), dilation.matrix), cost)


def test_compile_layer_range():
    with pytest.raises(ParameterError):
        compile_qite_circuit(build_dilation(random_ising(1), 0.5), layers=13)


def identity_circuit(n):
    circuit = Circuit(n + 1)
    for qubit in range(n + 1):
        circuit.u3(qubit, 0., 0., 0.)
    return circuit


def test_identity_circuit_keeps_everything():
    ising = random_ising(3)
    result = run_qite_compiled(identity_circuit(3), ising, shots=4000, seed=2)
    assert result.success_probability == 1
    assert sum(result.histogram.values()) == 4000
    assert len(result.histogram) == 8


def test_compiled_success_probability_follows_the_ancilla():
    ising = random_ising(2)
    theta = 1.1
    circuit = identity_circuit(2)
    circuit.u3(2, theta, 0., 0.)
    shots = 20000
    result = run_qite_compiled(circuit, ising, shots=shots, seed=4)
    expected = np.cos(theta / 2) ** 2
    assert abs(result.success_probability - expected) < 5 * np.sqrt(expected * (1 - expected) / shots)


def test_compiled_run_without_kept_shots_is_degenerate():
    circuit = identity_circuit(1)
    circuit.u3(1, np.pi, 0., np.pi)
    with pytest.raises(DegenerateRunError):
        run_qite_compiled(circuit, random_ising(1), shots=100)


def test_compiled_circuit_size_must_match():
    with pytest.raises(ParameterError):
        run_qite_compiled(identity_circuit(2), random_ising(3))


def test_solve_qite_exact():
    ising = portfolio_ising(0)
    result = solve_qite(ising, QiteConfig(), seed=0)
    assert result.mode == 'exact'
    assert np.isclose(result.beta, default_beta(ising))
    assert sum(result.histogram.values()) == 4096
    assert result.energy < np.mean(ising.energies())
    assert result.to_dict()['success_probability'] == result.success_probability


def test_solve_qite_compiled_small():
    ising = random_ising(1)
    config = QiteConfig(beta=0.5, mode='compiled', layers=2, shots=500, compile_threshold=10.,
                        optimizer_parameters=dict(max_evals=40))
    result = solve_qite(ising, config, seed=1)
    assert result.mode == 'compiled'
    assert result.converged
    assert np.isclose(result.beta, 0.5)
    assert result.compile_cost is not None


@pytest.mark.slow
def test_two_qubit_dilation_compiles():
    dilation = build_dilation(random_ising(1, seed=5), 1.)
    _, cost, _ = compile_qite_circuit(dilation, layers=4, seed=0, threshold=0.01,
                                      optimizer=OptimizerConfig(max_evals=2000))
    assert cost < 0.01


@pytest.mark.slow
def test_five_qubit_dilation_compiles():
    dilation = build_dilation(random_ising(4, seed=3), 1.)
    _, cost, trace = compile_qite_circuit(dilation, layers=6, seed=0, threshold=0.05,
                                          optimizer=OptimizerConfig(max_evals=5000))
    assert len(trace) <= 5000
    assert cost < 0.05


@pytest.mark.slow
def test_ten_qubit_dilation_compiles():
    ising = portfolio_ising(0)
    dilation = build_dilation(ising, default_beta(ising))
    _, cost, _ = compile_qite_circuit(dilation, layers=8, seed=0, threshold=0.1,
                                      optimizer=OptimizerConfig(max_evals=20000))
    assert cost < 0.1


@pytest.mark.parametrize("seed", range(3))
def test_compiled_distribution_tracks_the_compile_cost(seed):
    n = 1
    dilation = build_dilation(random_ising(n, seed=seed), 0.8)
    circuit, cost, _ = compile_qite_circuit(dilation, layers=2, seed=seed, threshold=2.,
                                            optimizer=OptimizerConfig(max_evals=120))
    initial = StateVector(np.concatenate([StateVector.uniform(n).amplitudes, np.zeros(2 ** n, dtype=complex)]))
    kept = np.abs(circuit.evolve(initial).amplitudes[:2 ** n]) ** 2
    exact, _ = post_selected_state(dilation)
    distance = 0.5 * np.sum(np.abs(kept / kept.sum() - exact.probabilities()))
    assert distance < 10 * cost


@pytest.mark.slow
def test_gap_adaptive_beta_identifies_the_optimum():
    matches = 0
    for seed in range(50):
        ising = portfolio_ising(seed)
        result = solve_qite(ising, QiteConfig(), seed=seed)
        matches += histogram_mode(result.histogram) == bits_to_string(ising.ground_bitstring)
        curve = energy_curve(ising, [0, 0.25, 0.5, 1, 2, 4])
        assert np.all(np.diff(curve[:, 1]) <= 1e-9)
    assert matches >= 48
