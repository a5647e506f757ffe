import warnings
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from sortedcontainers import SortedDict

from quantum_portfolio.circuit import Circuit, build_layered_ansatz
from quantum_portfolio.encoding import IsingModel, spectral_gap
from quantum_portfolio.exceptions import DegenerateRunError, ParameterError, RangeError
from quantum_portfolio.noise_model import NoiseModel, run_trajectory
from quantum_portfolio.optimizer import OptimizerConfig, OptTrace, minimize, random_initial_params
from quantum_portfolio.qaoa_solver import _split_shots
from quantum_portfolio.statevector import StateVector, histogram_from_counts, merge_histograms, sample_bitstrings, \
    sampled_expectation
from quantum_portfolio.utils import rng_stream

MAX_DILATION_QUBITS = 13
COMPILE_THRESHOLD = 0.1
BETA_RANGE = (0.1, 5.)


class Dilation:
    """
    Unitary U on n system qubits plus one ancilla (the highest qubit) whose ancilla-|0> block is u e^(-beta H).

    With the ancilla as most significant bit, U = [[u U_non, *], [C, *]] in block form.
    """
    __slots__ = "n", "beta", "u", "matrix"

    def __init__(self, n: int, beta: float, u: float, matrix: np.ndarray):
        self.n = n
        self.beta = beta
        self.u = u
        self.matrix = matrix
        self.matrix.setflags(write=False)

    @property
    def dimension(self) -> int:
        return 2 ** self.n

    @property
    def scaled_block(self) -> np.ndarray:
        """The top-left block u U_non."""
        return self.matrix[:self.dimension, :self.dimension]

    @property
    def lower_block(self) -> np.ndarray:
        """The lower-left block C."""
        return self.matrix[self.dimension:, :self.dimension]


class QiteResult:
    """
    Outcome of a QITE run. `histogram` only counts the shots that survived post-selection.
    """
    __slots__ = "histogram", "success_probability", "energy", "beta", "u", "mode", "compile_cost", "converged"

    def __init__(self, histogram: SortedDict, success_probability: float, energy: float, beta: Union[None, float],
                 u: Union[None, float], mode: str, compile_cost: Union[None, float] = None, converged: bool = True):
        self.histogram = histogram
        self.success_probability = float(success_probability)
        self.energy = float(energy)
        self.beta = beta
        self.u = u
        self.mode = mode
        self.compile_cost = compile_cost
        self.converged = converged

    def to_dict(self) -> dict:
        return dict(mode=self.mode, beta=self.beta, u=self.u, success_probability=self.success_probability,
                    energy=self.energy, compile_cost=self.compile_cost, converged=self.converged,
                    histogram=dict(self.histogram))


def default_beta(ising: IsingModel) -> float:
    """2 / (E_1 - E_0) of the instance, clamped to BETA_RANGE."""
    gap = spectral_gap(ising)
    return float(np.clip(2 / gap, *BETA_RANGE)) if gap > 0 else BETA_RANGE[1]


def _complete_unitary(scaled_block: np.ndarray, lower_block: np.ndarray) -> np.ndarray:
    # QR of [[u U_non, I], [C, I]] with a positive diagonal in R keeps the orthonormal first block column as it is
    dimension = len(scaled_block)
    identity = np.eye(dimension)
    ansatz = np.block([[scaled_block, identity], [lower_block, identity]])
    q, r = np.linalg.qr(ansatz)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1
    return q * signs[None, :]


def _check_dilation_size(n: int, beta: float):
    if beta < 0:
        raise ParameterError("beta must be non-negative. Not '{}'".format(beta))
    if n > MAX_DILATION_QUBITS:
        raise ParameterError("dense dilations are limited to {} system qubits. Got {}".format(MAX_DILATION_QUBITS, n))


def build_dilation(ising: IsingModel, beta: float) -> Dilation:
    """
    Embeds e^(-beta H) of a diagonal Hamiltonian into a unitary on n + 1 qubits.

    u^-2 is the largest eigenvalue of U_non^dagger U_non, so u U_non has spectral norm one. For diagonal H the
    singular value decomposition is a sort of the diagonal e^(-beta E(x)), which makes C = sqrt(I - u^2 Sigma^2)
    diagonal in the computational basis.

    :param ising: The Hamiltonian.
    :param beta: Imaginary time, non-negative.
    :return: The dilation.
    """
    _check_dilation_size(ising.n, beta)
    energies = ising.energies()
    with np.errstate(over='raise'):
        try:
            singular_values = np.exp(-beta * energies)
        except FloatingPointError:
            raise RangeError("e^(-beta E) overflows for beta={} and energies down to {}. Rescale the Hamiltonian or "
                             "lower beta".format(beta, np.min(energies))) from None
    order = np.argsort(-singular_values, kind='stable')
    if singular_values[order[0]] == 0:
        raise RangeError("e^(-beta E) underflows for beta={} on every basis state. Rescale the Hamiltonian or lower "
                         "beta".format(beta))
    u = 1 / singular_values[order[0]]
    scaled = np.empty_like(singular_values)
    scaled[order] = np.clip(u * singular_values[order], 0, 1)
    lower = np.sqrt(1 - scaled ** 2)
    return Dilation(ising.n, float(beta), float(u), _complete_unitary(np.diag(scaled), np.diag(lower)))


def build_dilation_from_hamiltonian(hamiltonian: np.ndarray, beta: float) -> Dilation:
    """
    General path for a dense Hermitian Hamiltonian: U_non = e^(-beta H) = A Sigma E^dagger and
    C = A sqrt(I - u^2 Sigma^2) E^dagger.
    """
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    n = int(np.log2(len(hamiltonian)))
    _check_dilation_size(n, beta)
    if hamiltonian.shape != (2 ** n, 2 ** n) or not np.allclose(hamiltonian, hamiltonian.conj().T):
        raise ParameterError("the Hamiltonian must be a Hermitian 2^n x 2^n matrix")
    eigenvalues, eigenvectors = np.linalg.eigh(hamiltonian)
    non_unitary = (eigenvectors * np.exp(-beta * eigenvalues)) @ eigenvectors.conj().T
    left, sigma, right_h = scipy.linalg.svd(non_unitary)
    u = 1 / sigma[0]
    scaled_sigma = np.clip(u * sigma, 0, 1)
    lower = (left * np.sqrt(1 - scaled_sigma ** 2)) @ right_h
    return Dilation(n, float(beta), float(u), _complete_unitary(u * non_unitary, lower))


def _post_select(joint: np.ndarray, n: int) -> Tuple[np.ndarray, float]:
    kept = joint[:2 ** n]
    return kept, float(np.sum(np.abs(kept) ** 2))


def apply_qite_exact(dilation: Dilation, ising: IsingModel, initial: Union[None, StateVector] = None,
                     shots: int = 4096, seed: int = 0, noise: Union[None, NoiseModel] = None) -> QiteResult:
    """
    Applies the dilation to |psi> (x) |0> and post-selects the ancilla on |0>.

    The kept branch is u U_non |psi>, so the success probability is ||u U_non |psi>||^2 and the normalized system
    state is e^(-beta H)|psi> / ||e^(-beta H)|psi>||. The histogram is sampled from that state.

    :param dilation: The dilation.
    :param ising: The Hamiltonian the dilation was built from, used for the energy estimate.
    :param initial: Initial system state, uniform superposition by default.
    :param shots: Number of post-selected shots in the histogram.
    :param seed: Sampling seed.
    :param noise: Must be inactive. Noise only applies to compiled circuits.
    :return: The result, with `energy` the exact <H> of the post-selected state.
    """
    if noise is not None and noise.is_active:
        raise ParameterError("exact QITE is noiseless. Use run_qite_compiled for noisy runs")
    post_selected, success_probability = post_selected_state(dilation, initial)
    energy = float(post_selected.probabilities() @ ising.energies())
    histogram = sample_bitstrings(post_selected, shots, seed)
    return QiteResult(histogram, success_probability, energy, dilation.beta, dilation.u, 'exact')


def post_selected_state(dilation: Dilation, initial: Union[None, StateVector] = None) -> Tuple[StateVector, float]:
    """
    :return: The normalized post-selected system state and the probability of post-selection success.
    """
    initial = StateVector.uniform(dilation.n) if initial is None else initial
    if initial.n != dilation.n:
        raise ParameterError("the initial state must have {} qubits. Got {}".format(dilation.n, initial.n))
    joint = np.concatenate([initial.amplitudes, np.zeros(dilation.dimension, dtype=complex)])
    kept, success_probability = _post_select(dilation.matrix @ joint, dilation.n)
    if success_probability <= 0:
        raise DegenerateRunError("post-selection never succeeds", 0.)
    return StateVector(kept / np.sqrt(success_probability)), success_probability


def energy_curve(ising: IsingModel, betas: Sequence[float], initial: Union[None, StateVector] = None) -> np.ndarray:
    """
    Exact <H>_beta and post-selection success probability for every beta.

    :return: Array of shape (len(betas), 3) with rows (beta, energy, success probability).
    """
    energies = ising.energies()
    rows = []
    for beta in betas:
        state, success_probability = post_selected_state(build_dilation(ising, beta), initial)
        rows.append((beta, float(state.probabilities() @ energies), success_probability))
    return np.array(rows)


def compile_cost(circuit_unitary: np.ndarray, target: np.ndarray) -> float:
    """1 - Re(Tr[V^dagger U]) / 2^(n+1). Zero exactly when V = U, including the global phase."""
    return float(1 - np.real(np.vdot(circuit_unitary, target)) / len(target))


def compile_qite_circuit(dilation: Dilation, layers: int = 4,
                         optimizer: Union[None, OptimizerConfig] = None, seed: int = 0, entangler: str = 'ecr',
                         threshold: float = COMPILE_THRESHOLD) -> Tuple[Circuit, float, OptTrace]:
    """
    Trains the layered ansatz on n + 1 qubits to reproduce the dilation.

    The cost is evaluated exactly from the dense circuit unitary. If the best cost misses `threshold` a warning is
    issued and the best circuit is returned nonetheless.

    :param dilation: The target unitary.
    :param layers: Ansatz layers, between 1 and 12.
    :param optimizer: Optimizer settings. Defaults to cobyla with its defaults.
    :param seed: Seed of the initial angles.
    :param entangler: 'ecr' or 'cx'.
    :param threshold: Cost below which the compilation counts as converged.
    :return: The bound circuit, its cost and the optimization trace.
    """
    if not 1 <= layers <= 12:
        raise ParameterError("layers must lie in [1, 12]. Not '{}'".format(layers))
    optimizer = OptimizerConfig() if optimizer is None else optimizer
    ansatz = build_layered_ansatz(dilation.n + 1, layers, entangler)
    target = np.asarray(dilation.matrix)

    def cost(params):
        return compile_cost(ansatz.bind(params).unitary(), target)

    trace = minimize(cost, random_initial_params(ansatz.parameter_count, seed), optimizer)
    ansatz.bind(trace.best_params)
    if trace.best_value >= threshold:
        warnings.warn("QITE compilation stopped at cost {:.4f}, above the threshold {}".format(
            trace.best_value, threshold))
    return ansatz, trace.best_value, trace


def run_qite_compiled(circuit: Circuit, ising: IsingModel, shots: int = 4096, noise: Union[None, NoiseModel] = None,
                      seed: int = 0, trajectories: int = 1) -> QiteResult:
    """
    Runs a compiled QITE circuit on |+>^n (x) |0> and post-selects shots whose ancilla reads 0.

    :param circuit: The compiled circuit on n + 1 qubits. The ancilla is qubit n.
    :param ising: The Hamiltonian on n qubits.
    :param shots: Total shots before post-selection.
    :param noise: The noise model.
    :param seed: Seed of the trajectories and the shots.
    :param trajectories: Noisy trajectories the shots are split between.
    :return: The post-selected result. `energy` is the shot average over the kept shots.
    """
    n = ising.n
    if circuit.n != n + 1:
        raise ParameterError("the circuit must act on {} qubits. Got {}".format(n + 1, circuit.n))
    noise = NoiseModel() if noise is None else noise
    initial = StateVector(np.concatenate([StateVector.uniform(n).amplitudes, np.zeros(2 ** n, dtype=complex)]))
    random = rng_stream(seed)
    runs = _split_shots(shots, trajectories if noise.is_active else 1)
    joint = merge_histograms(*(sample_bitstrings(run_trajectory(circuit, noise, initial, random), part, random)
                               for part in runs))

    # the ancilla is the last character of a canonical bitstring
    counts = np.zeros(2 ** n, dtype=np.int64)
    for bitstring, count in joint.items():
        if bitstring[-1] == '0':
            counts[int(bitstring[:-1][::-1], 2)] += count
    kept = int(counts.sum())
    if kept == 0:
        raise DegenerateRunError("all {} shots were discarded by post-selection".format(shots), 0.)
    histogram = histogram_from_counts(counts, n)
    return QiteResult(histogram, kept / shots, sampled_expectation(ising.energies(), histogram), None, None,
                      'compiled')


QITE_MODES = ('exact', 'compiled')


class QiteConfig:
    """
    Settings of a QITE run.
    """
    __slots__ = "beta", "mode", "shots", "layers", "noise", "optimizer", "compile_threshold", "trajectories", \
                "entangler"

    def __init__(self, beta: Union[str, float] = 'auto', mode: str = 'exact', shots: int = 4096, layers: int = 4,
                 noise_parameters: Union[None, dict, str] = None, optimizer_parameters: Union[None, dict] = None,
                 compile_threshold: float = COMPILE_THRESHOLD, trajectories: int = 1, entangler: str = 'ecr'):
        """
        Constructs a new QiteConfig.

        :param beta: Imaginary time, or 'auto' for default_beta of the instance.
        :param mode: 'exact' applies the dense dilation, 'compiled' trains and runs the layered circuit.
        :param shots: Shots of the final histogram. In compiled mode this counts shots before post-selection.
        :param layers: Ansatz layers of the compiled circuit.
        :param noise_parameters: Parameters passed to NoiseModel. Only compiled runs may be noisy.
        :param optimizer_parameters: Parameters passed to OptimizerConfig for the compilation.
        :param compile_threshold: Compilation cost below which the circuit counts as converged.
        :param trajectories: Noisy trajectories the shots are split between.
        :param entangler: 'ecr' or 'cx'.
        """
        if beta != 'auto' and (isinstance(beta, str) or beta < 0):
            raise ParameterError("beta must be non-negative or 'auto'. Not '{}'".format(beta))
        if mode not in QITE_MODES:
            raise ParameterError("mode must be one of {}. Not '{}'".format(QITE_MODES, mode))
        if shots < 1 or trajectories < 1:
            raise ParameterError("shots and trajectories must be at least 1")
        self.beta = beta if beta == 'auto' else float(beta)
        self.mode = mode
        self.shots = int(shots)
        self.layers = int(layers)
        self.noise = NoiseModel.parse(noise_parameters)
        self.optimizer = OptimizerConfig(**(optimizer_parameters or {}))
        self.compile_threshold = float(compile_threshold)
        self.trajectories = int(trajectories)
        self.entangler = entangler
        if mode == 'exact' and self.noise.is_active:
            raise ParameterError("exact QITE is noiseless. Use mode='compiled' for noisy runs")

    def resolve_beta(self, ising: IsingModel) -> float:
        return default_beta(ising) if self.beta == 'auto' else self.beta

    def to_dict(self) -> dict:
        return dict(beta=self.beta, mode=self.mode, shots=self.shots, layers=self.layers,
                    noise_parameters=self.noise.to_dict(), optimizer_parameters=self.optimizer.to_dict(),
                    compile_threshold=self.compile_threshold, trajectories=self.trajectories,
                    entangler=self.entangler)


def solve_qite(ising: IsingModel, config: Union[None, QiteConfig] = None, seed: int = 0) -> QiteResult:
    """
    Builds the dilation at the configured beta and runs it exactly or through a compiled circuit.

    :param ising: The Hamiltonian.
    :param config: The QITE settings. Defaults to exact mode at the gap-adaptive beta.
    :param seed: Seed of the compilation and of all shots.
    :return: The result.
    """
    config = QiteConfig() if config is None else config
    dilation = build_dilation(ising, config.resolve_beta(ising))
    if config.mode == 'exact':
        return apply_qite_exact(dilation, ising, shots=config.shots, seed=seed)
    circuit, cost, _ = compile_qite_circuit(dilation, config.layers, config.optimizer, seed, config.entangler,
                                            config.compile_threshold)
    result = run_qite_compiled(circuit, ising, config.shots, config.noise, seed, config.trajectories)
    result.beta = dilation.beta
    result.u = dilation.u
    result.compile_cost = cost
    result.converged = cost < config.compile_threshold
    return result
