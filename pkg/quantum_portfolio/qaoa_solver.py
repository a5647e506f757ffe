from typing import Union

import numpy as np
from sortedcontainers import SortedDict

from quantum_portfolio.circuit import Circuit, build_layered_ansatz
from quantum_portfolio.encoding import IsingModel
from quantum_portfolio.exceptions import ConfigurationError, ParameterError
from quantum_portfolio.noise_model import NoiseModel, run_trajectory
from quantum_portfolio.optimizer import OptimizerConfig, OptTrace, minimize, random_initial_params
from quantum_portfolio.statevector import merge_histograms, sample_bitstrings, sampled_expectation
from quantum_portfolio.utils import rng_stream

COST_MODES = ('deviation', 'energy')


class QaoaConfig:
    """
    Settings of a variational ground-state search.
    """
    __slots__ = "layers", "shots", "noise", "optimizer", "trajectories_per_eval", "final_shots", "entangler", \
                "cost_mode"

    def __init__(self, layers: int = 2, shots: Union[int, str] = 4096, noise_parameters: Union[None, dict] = None,
                 optimizer_parameters: Union[None, dict] = None, trajectories_per_eval: int = 1,
                 final_shots: int = 8192, entangler: str = 'ecr', cost_mode: str = 'deviation'):
        """
        Constructs a new QaoaConfig.

        :param layers: Number of ansatz layers L.
        :param shots: Shots per energy estimate, or 'exact' to use the exact expectation of the final state(s).
        :param noise_parameters: Parameters passed to NoiseModel. Defaults to noiseless.
        :param optimizer_parameters: Parameters passed to OptimizerConfig.
        :param trajectories_per_eval: Number of noisy trajectories per cost evaluation. The shots are split evenly
        between them. Ignored without noise.
        :param final_shots: Shots of the histogram taken at the best parameters.
        :param entangler: 'ecr' or 'cx'.
        :param cost_mode: 'deviation' minimizes |E_g - <H>|, 'energy' minimizes <H> itself.
        """
        if layers < 1:
            raise ParameterError("layers must be at least 1. Not '{}'".format(layers))
        if shots != 'exact' and (isinstance(shots, str) or shots < 1):
            raise ParameterError("shots must be a positive integer or 'exact'. Not '{}'".format(shots))
        if trajectories_per_eval < 1 or final_shots < 1:
            raise ParameterError("trajectories_per_eval and final_shots must be at least 1")
        if cost_mode not in COST_MODES:
            raise ParameterError("cost_mode must be one of {}. Not '{}'".format(COST_MODES, cost_mode))
        self.layers = int(layers)
        self.shots = shots if shots == 'exact' else int(shots)
        self.noise = NoiseModel.parse(noise_parameters)
        self.optimizer = OptimizerConfig(**(optimizer_parameters or {}))
        self.trajectories_per_eval = int(trajectories_per_eval)
        self.final_shots = int(final_shots)
        self.entangler = entangler
        self.cost_mode = cost_mode

    @property
    def exact(self) -> bool:
        return self.shots == 'exact'

    def to_dict(self) -> dict:
        return dict(layers=self.layers, shots=self.shots, noise_parameters=self.noise.to_dict(),
                    optimizer_parameters=self.optimizer.to_dict(), trajectories_per_eval=self.trajectories_per_eval,
                    final_shots=self.final_shots, entangler=self.entangler, cost_mode=self.cost_mode)


class QaoaResult:
    """
    Outcome of solve_qaoa.

    `trace` holds the cost values, `energies` the estimated energy of every evaluation and `min_energy_deviation`
    the smallest |E_g - E_i| of the whole run.
    """
    __slots__ = "trace", "energies", "ground_energy", "min_energy_deviation", "histogram", "best_params", "config"

    def __init__(self, trace: OptTrace, relative_energies: np.ndarray, ground_energy: float, histogram: SortedDict,
                 config: QaoaConfig):
        """
        :param relative_energies: Estimated E_i - E_g of every evaluation.
        """
        relative_energies = np.asarray(relative_energies, dtype=float)
        self.trace = trace
        self.energies = relative_energies + ground_energy
        self.ground_energy = float(ground_energy)
        self.min_energy_deviation = float(np.min(np.abs(relative_energies)))
        self.histogram = histogram
        self.best_params = trace.best_params
        self.config = config

    def to_dict(self) -> dict:
        return dict(config=self.config.to_dict(),
                    trace=[dict(i=i, cost=value, energy=float(energy))
                           for (i, _, value), energy in zip(self.trace.evaluations, self.energies)],
                    ground_energy=self.ground_energy,
                    min_energy_deviation=self.min_energy_deviation,
                    histogram=dict(self.histogram),
                    best_params=[float(p) for p in self.best_params])


def _split_shots(shots: int, parts: int):
    base, remainder = divmod(shots, parts)
    sizes = [base + 1] * remainder + [base] * (parts - remainder)
    return [size for size in sizes if size > 0]


def estimate_energy(ansatz: Circuit, config: QaoaConfig, random: np.random.Generator, energies: np.ndarray,
                    shots: Union[int, str, None] = None) -> (float, SortedDict):
    """
    Estimates <H> for the bound ansatz.

    :param energies: Tabulated energies of the basis states the estimate is based on.
    :param shots: Overrides config.shots.
    :return: The estimate and the histogram it was taken from (empty in exact mode).
    """
    shots = config.shots if shots is None else shots
    trajectories = config.trajectories_per_eval if config.noise.is_active else 1
    if shots == 'exact':
        estimates = [float(run_trajectory(ansatz, config.noise, seed=random).probabilities() @ energies)
                     for _ in range(trajectories)]
        return float(np.mean(estimates)), SortedDict()
    histograms = [sample_bitstrings(run_trajectory(ansatz, config.noise, seed=random), part, random)
                  for part in _split_shots(shots, trajectories)]
    histogram = merge_histograms(*histograms)
    return sampled_expectation(energies, histogram), histogram


def qaoa_cost(params: np.ndarray, ising: IsingModel, ansatz: Circuit, config: QaoaConfig,
              seed: Union[int, np.random.Generator] = 0) -> float:
    """
    The variational cost of one parameter vector.

    In 'deviation' mode the cost is |E_g - <H>|, in 'energy' mode <H> itself. Energies are evaluated relative to the
    ground level, so the constant offset of the Hamiltonian never enters the deviation.

    :param params: 3 * n * L angles in the ansatz's slot order.
    :param ising: The Hamiltonian, with its ground state filled in.
    :param ansatz: The layered ansatz on n qubits.
    :param config: Solver settings (shots or exact, noise, trajectories).
    :param seed: Seed or generator for trajectories and shots.
    :return: The cost.
    """
    if ising.ground_energy is None:
        raise ConfigurationError("the ground energy E_g must be known. Call IsingModel.with_ground_state() first")
    random = seed if isinstance(seed, np.random.Generator) else rng_stream(seed)
    relative_energy, _ = estimate_energy(ansatz.bind(params), config, random, ising.relative_energies())
    return _cost_from_relative_energy(relative_energy, ising, config)


def _cost_from_relative_energy(relative_energy: float, ising: IsingModel, config: QaoaConfig) -> float:
    if config.cost_mode == 'energy':
        return relative_energy + ising.ground_energy
    return abs(relative_energy)


def solve_qaoa(ising: IsingModel, config: QaoaConfig, seed: int = 0) -> QaoaResult:
    """
    Runs the variational search from random initial angles and samples the final histogram at the best angles.

    Evaluation k draws its trajectories and shots from the stream (seed, k), so a run is reproducible from its seed.

    :param ising: The Hamiltonian. Its ground state is computed if missing.
    :param config: The solver settings.
    :param seed: Seed of the initial angles and all random streams.
    :return: The result.
    """
    if ising.ground_energy is None:
        ising.with_ground_state()
    ansatz = build_layered_ansatz(ising.n, config.layers, config.entangler)
    relative_energies = ising.relative_energies()
    relative_trace = []

    def cost(params):
        random = rng_stream(seed, 1, len(relative_trace))
        relative_energy, _ = estimate_energy(ansatz.bind(params), config, random, relative_energies)
        relative_trace.append(relative_energy)
        return _cost_from_relative_energy(relative_energy, ising, config)

    trace = minimize(cost, random_initial_params(ansatz.parameter_count, seed), config.optimizer)

    ansatz.bind(trace.best_params)
    _, histogram = estimate_energy(ansatz, config, rng_stream(seed, 2), relative_energies,
                                   shots=config.final_shots)
    return QaoaResult(trace, relative_trace, ising.ground_energy, histogram, config)

