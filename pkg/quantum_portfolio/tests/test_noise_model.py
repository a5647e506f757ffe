import numpy as np

import pytest

from quantum_portfolio.circuit import Circuit, build_layered_ansatz
from quantum_portfolio.exceptions import ParameterError
from quantum_portfolio.gates import Gate
from quantum_portfolio.noise_model import NoiseModel, run_trajectory
from quantum_portfolio.optimizer import random_initial_params
from quantum_portfolio.statevector import StateVector
from quantum_portfolio.tests.density_matrix_oracle import noisy_populations
from quantum_portfolio.utils import rng_stream


def bell_circuit():
    return Circuit(2, [Gate('h', (0,)), Gate('cx', (0, 1))])


def reference_circuit(n=3, layers=2, entangler='ecr', seed=0):
    circuit = build_layered_ansatz(n, layers, entangler)
    return circuit.bind(random_initial_params(circuit.parameter_count, seed))


@pytest.mark.parametrize("spec,kind,rate", [(None, 'none', 0.), ("cx_x_flip:0.01", 'cx_x_flip', 0.01),
                                            (dict(kind='cx_depolarizing', error_rate=0.2), 'cx_depolarizing', 0.2),
                                            ("none", 'none', 0.)])
def test_parse(spec, kind, rate):
    noise = NoiseModel.parse(spec)
    assert noise.kind == kind
    assert np.isclose(noise.error_rate, rate)


def test_validation():
    with pytest.raises(ParameterError):
        NoiseModel('readout', 0.1)
    with pytest.raises(ParameterError):
        NoiseModel('cx_x_flip', 1.5)


@pytest.mark.parametrize("kind", ['cx_x_flip', 'cx_depolarizing'])
def test_zero_rate_reproduces_noiseless_evolution(kind):
    circuit = reference_circuit()
    noiseless = circuit.evolve()
    noisy = run_trajectory(circuit, NoiseModel(kind, 0.), seed=3)
    assert np.all(noisy.amplitudes == noiseless.amplitudes)


def test_certain_flip_after_single_cx():
    circuit = Circuit(2).cx(0, 1)
    state = run_trajectory(circuit, NoiseModel('cx_x_flip', 1.), seed=0)
    # X fires on the target, qubit 1
    assert np.isclose(state.probabilities()[2], 1)


@pytest.mark.parametrize("kind", ['cx_x_flip', 'cx_depolarizing'])
def test_trajectories_are_reproducible(kind):
    circuit = reference_circuit()
    noise = NoiseModel(kind, 0.3)
    a = run_trajectory(circuit, noise, seed=17)
    b = run_trajectory(circuit, noise, seed=17)
    assert np.all(a.amplitudes == b.amplitudes)


@pytest.mark.parametrize("kind", ['cx_x_flip', 'cx_depolarizing'])
def test_trajectories_keep_the_norm(kind):
    state = run_trajectory(reference_circuit(), NoiseModel(kind, 0.5), seed=1)
    assert state.norm_deviation() < 1e-10


@pytest.mark.parametrize("kind", ['cx_x_flip', 'cx_depolarizing'])
def test_bell_trajectory_average_matches_density_matrix(kind):
    circuit = bell_circuit()
    noise = NoiseModel(kind, 0.1)
    trajectories = 10000
    random = rng_stream(42)
    average = sum(run_trajectory(circuit, noise, seed=random).probabilities() for _ in range(trajectories))
    average /= trajectories
    expected = noisy_populations(circuit, noise)
    sigma = np.sqrt(expected * (1 - expected) / trajectories)
    assert np.all(np.abs(average - expected) <= 3 * sigma + 1e-12)


def test_x_flip_bell_populations_by_hand():
    populations = noisy_populations(bell_circuit(), NoiseModel('cx_x_flip', 0.1))
    assert np.allclose(populations, [0.45, 0.05, 0.05, 0.45])


def test_noise_on_ecr_fragment_changes_the_outcome():
    circuit = Circuit(2).ecr(0, 1)
    noiseless = circuit.evolve().probabilities()
    random = rng_stream(5)
    noisy = np.mean([run_trajectory(circuit, NoiseModel('cx_x_flip', 0.5), seed=random).probabilities()
                     for _ in range(2000)], axis=0)
    assert np.max(np.abs(noisy - noiseless)) > 0.1
    assert np.allclose(noisy, noisy_populations(circuit, NoiseModel('cx_x_flip', 0.5)), atol=0.05)


@pytest.mark.parametrize("kind", ['cx_x_flip', 'cx_depolarizing'])
def test_fidelity_decreases_with_error_rate(kind):
    circuit = reference_circuit(n=3, layers=3, entangler='cx', seed=8)
    ideal = circuit.evolve()
    fidelities = []
    for p in (0., 0.05, 0.2):
        random = rng_stream(11)
        fidelities.append(np.mean([ideal.fidelity(run_trajectory(circuit, NoiseModel(kind, p), seed=random))
                                   for _ in range(200)]))
    assert np.isclose(fidelities[0], 1)
    assert fidelities[0] > fidelities[1] > fidelities[2]


def test_initial_state_must_match():
    with pytest.raises(ParameterError):
        run_trajectory(reference_circuit(n=3), NoiseModel('cx_x_flip', 0.1), initial=StateVector.zero(2))
