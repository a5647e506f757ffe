import json
from typing import Sequence, Union

import numpy as np
from sortedcontainers import SortedDict

from quantum_portfolio.encoding import IsingModel
from quantum_portfolio.exceptions import ParameterError, ShapeError
from quantum_portfolio.gates import Gate
from quantum_portfolio.utils import index_to_string, rng_stream, string_to_index

NORM_TOLERANCE = 1e-10


def apply_matrix(amplitudes: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """
    Applies a one- or two-qubit matrix to amplitudes of shape (2^n,) or (2^n, batch).

    Qubit q is bit q of the amplitude index. Two-qubit matrices use the local index bit(qubits[0]) + 2 bit(qubits[1]).

    :return: A new array of the same shape.
    """
    batch_shape = amplitudes.shape[1:]
    tensor = amplitudes.reshape((2,) * n + batch_shape)
    axes = [n - 1 - q for q in reversed(qubits)]
    k = len(qubits)
    gate = matrix.reshape((2,) * (2 * k))
    result = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), axes))
    result = np.moveaxis(result, list(range(k)), axes)
    return result.reshape(amplitudes.shape)


class StateVector:
    """
    Dense pure state of n qubits. Amplitude k belongs to the basis state whose bit q is the value of qubit q.
    """
    __slots__ = "n", "amplitudes"

    def __init__(self, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        n = int(np.log2(len(amplitudes))) if len(amplitudes) else -1
        if amplitudes.ndim != 1 or n < 0 or 2 ** n != len(amplitudes):
            raise ShapeError("a state needs 2^n amplitudes. Got shape {}".format(amplitudes.shape))
        self.n = n
        self.amplitudes = amplitudes

    @classmethod
    def zero(cls, n: int) -> 'StateVector':
        return cls.basis(n, 0)

    @classmethod
    def basis(cls, n: int, index: int) -> 'StateVector':
        amplitudes = np.zeros(2 ** n, dtype=complex)
        amplitudes[index] = 1
        return cls(amplitudes)

    @classmethod
    def uniform(cls, n: int) -> 'StateVector':
        return cls(np.full(2 ** n, 2 ** (-n / 2), dtype=complex))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_deviation(self) -> float:
        return abs(1 - float(np.sum(self.probabilities())))

    def fidelity(self, other: 'StateVector') -> float:
        return float(np.abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def to_json(self) -> str:
        """Dumps the amplitudes as [real, imag] pairs."""
        return json.dumps(dict(n=self.n, amplitudes=[[float(a.real), float(a.imag)] for a in self.amplitudes]))


def apply_gate(state: StateVector, gate: Gate, bound_params: Sequence[float] = ()) -> StateVector:
    """
    Applies a gate to a state.

    :param state: The state. It is not modified.
    :param gate: The gate. Its qubits must exist in the state.
    :param bound_params: Numeric u3 angles if the gate is parameterized.
    :return: The new state.
    """
    if any(q >= state.n for q in gate.qubits):
        raise ParameterError("gate {} does not fit on {} qubits".format(gate, state.n))
    return StateVector(apply_matrix(state.amplitudes, gate.matrix(bound_params), gate.qubits, state.n))


def histogram_from_counts(counts: np.ndarray, n: int) -> SortedDict:
    """Turns counts per basis index into a histogram keyed by canonical bitstring."""
    return SortedDict({index_to_string(index, n): int(counts[index]) for index in np.flatnonzero(counts)})


def histogram_to_counts(histogram: SortedDict, n: int) -> np.ndarray:
    counts = np.zeros(2 ** n, dtype=np.int64)
    for bitstring, count in histogram.items():
        counts[string_to_index(bitstring)] += count
    return counts


def merge_histograms(*histograms: SortedDict) -> SortedDict:
    merged = SortedDict()
    for histogram in histograms:
        for bitstring, count in histogram.items():
            merged[bitstring] = merged.get(bitstring, 0) + count
    return merged


def histogram_mode(histogram: SortedDict) -> str:
    """The most frequent bitstring. Ties go to the lexicographically smallest bitstring."""
    if len(histogram) == 0:
        raise ParameterError("the histogram is empty")
    best_count = max(histogram.values())
    return next(bitstring for bitstring, count in histogram.items() if count == best_count)


def sample_bitstrings(state: StateVector, shots: int, seed: Union[int, np.random.Generator] = 0) -> SortedDict:
    """
    Measures all qubits `shots` times.

    :param state: The state to measure.
    :param shots: The number of shots, at least 1.
    :param seed: Seed or generator for the multinomial draw.
    :return: Histogram mapping canonical bitstrings to counts. The counts add up to `shots`.
    """
    if shots < 1:
        raise ParameterError("shots must be at least 1. Not '{}'".format(shots))
    random = seed if isinstance(seed, np.random.Generator) else rng_stream(seed)
    probabilities = state.probabilities()
    counts = random.multinomial(shots, probabilities / probabilities.sum())
    return histogram_from_counts(counts, state.n)


def diagonal_expectation(ising: IsingModel, state: StateVector) -> float:
    """The exact expectation <psi|H|psi> = sum_x |psi_x|^2 E(x) of a diagonal Hamiltonian."""
    if ising.n != state.n:
        raise ShapeError("Hamiltonian on {} qubits cannot be evaluated on a {}-qubit state".format(ising.n, state.n))
    return float(state.probabilities() @ ising.energies())


def sampled_expectation(energies: np.ndarray, histogram: SortedDict) -> float:
    """Shot average of tabulated energies over a histogram."""
    total = sum(histogram.values())
    if total == 0:
        raise ParameterError("the histogram is empty")
    return float(sum(count * energies[string_to_index(bitstring)] for bitstring, count in histogram.items()) / total)
