import itertools
from typing import Union

import numpy as np

from quantum_portfolio.circuit import Circuit
from quantum_portfolio.exceptions import ParameterError
from quantum_portfolio.gates import PAULI_MATRICES, X_MATRIX, Gate
from quantum_portfolio.statevector import StateVector, apply_matrix
from quantum_portfolio.utils import rng_stream

NOISE_KINDS = ('none', 'cx_x_flip', 'cx_depolarizing')

# The 15 non-identity two-qubit Paulis as (control factor, target factor).
_TWO_QUBIT_PAULIS = [pair for pair in itertools.product('IXYZ', repeat=2) if pair != ('I', 'I')]


class NoiseModel:
    """
    Stochastic error model for two-qubit gates.

    Errors are inserted after every CX gate, including the CX gates ECR gates are lowered to:
        * 'cx_x_flip' applies X to the target qubit with probability `error_rate`.
        * 'cx_depolarizing' applies one of the 15 non-identity two-qubit Paulis, chosen uniformly, with probability
          `error_rate`.
    """
    __slots__ = "kind", "error_rate", "seed"

    def __init__(self, kind: str = 'none', error_rate: float = 0., seed: int = 0):
        """
        Constructs a new NoiseModel.

        :param kind: One of 'none', 'cx_x_flip' or 'cx_depolarizing'.
        :param error_rate: Probability p in [0, 1] that an error follows a CX gate.
        :param seed: Default seed of trajectories that do not get their own.
        """
        if kind not in NOISE_KINDS:
            raise ParameterError("noise kind must be one of {}. Not '{}'".format(NOISE_KINDS, kind))
        if not 0 <= error_rate <= 1:
            raise ParameterError("error_rate must lie in [0, 1]. Not '{}'".format(error_rate))
        self.kind = kind
        self.error_rate = float(error_rate)
        self.seed = int(seed)

    @classmethod
    def parse(cls, spec: Union[None, str, dict, 'NoiseModel']) -> 'NoiseModel':
        """
        Builds a noise model from None, a 'kind:rate' string, a parameter dict or an existing model.
        """
        if spec is None:
            return cls()
        if isinstance(spec, NoiseModel):
            return spec
        if isinstance(spec, dict):
            return cls(**spec)
        kind, _, rate = str(spec).partition(':')
        return cls(kind, float(rate) if rate else 0.)

    @property
    def is_active(self) -> bool:
        return self.kind != 'none' and self.error_rate > 0

    def to_dict(self) -> dict:
        return dict(kind=self.kind, error_rate=self.error_rate, seed=self.seed)

    def __call__(self, amplitudes: np.ndarray, gate: Gate, n: int, random: np.random.Generator) -> np.ndarray:
        """
        Applies the error that may follow `gate`.

        :param amplitudes: Amplitudes after the gate.
        :param gate: The gate that was just applied. Only CX gates are noisy.
        :param n: Number of qubits.
        :param random: The trajectory's generator.
        :return: The (possibly) perturbed amplitudes.
        """
        if gate.kind != 'cx' or not self.is_active:
            return amplitudes
        if random.random() >= self.error_rate:
            return amplitudes
        control, target = gate.qubits
        if self.kind == 'cx_x_flip':
            return apply_matrix(amplitudes, X_MATRIX, (target,), n)
        control_pauli, target_pauli = _TWO_QUBIT_PAULIS[random.integers(len(_TWO_QUBIT_PAULIS))]
        if control_pauli != 'I':
            amplitudes = apply_matrix(amplitudes, PAULI_MATRICES[control_pauli], (control,), n)
        if target_pauli != 'I':
            amplitudes = apply_matrix(amplitudes, PAULI_MATRICES[target_pauli], (target,), n)
        return amplitudes


def run_trajectory(circuit: Circuit, noise: Union[None, NoiseModel] = None, initial: Union[None, StateVector] = None,
                   seed: Union[None, int, np.random.Generator] = None) -> StateVector:
    """
    Simulates one stochastic realization of a noisy circuit.

    If the noise model is active, ECR gates are lowered to their two-CX fragment so that errors can follow each CX.
    An inactive model leaves the circuit untouched and reproduces the noiseless evolution exactly.

    :param circuit: A circuit with all parameter slots bound.
    :param noise: The noise model. None means noiseless.
    :param initial: Initial state, |0...0> by default.
    :param seed: Seed or generator of this trajectory. Defaults to the noise model's seed.
    :return: The final state of the trajectory.
    """
    noise = NoiseModel() if noise is None else noise
    if not noise.is_active:
        return circuit.evolve(initial)
    random = seed if isinstance(seed, np.random.Generator) else rng_stream(noise.seed if seed is None else seed)
    lowered = circuit.lowered()
    state = StateVector.zero(circuit.n) if initial is None else initial
    if state.n != circuit.n:
        raise ParameterError("a {}-qubit circuit cannot act on a {}-qubit state".format(circuit.n, state.n))
    amplitudes = state.amplitudes
    for gate in lowered.gates:
        amplitudes = apply_matrix(amplitudes, gate.matrix(lowered.bound_params(gate)), gate.qubits, circuit.n)
        amplitudes = noise(amplitudes, gate, circuit.n, random)
    return StateVector(amplitudes)
