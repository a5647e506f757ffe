from collections import OrderedDict
from typing import Dict, List, Sequence, Union

import numpy as np

from quantum_portfolio.exceptions import BindingError, ParameterError
from quantum_portfolio.gates import Gate, ecr_decomposition
from quantum_portfolio.statevector import StateVector, apply_matrix

U3_ANGLES = ("theta", "phi", "lam")


class Circuit:
    """
    An ordered list of gates on n qubits together with named parameter slots.

    Slot values are radians. Every slot used by a gate must be bound before the circuit is simulated.
    """
    __slots__ = "n", "gates", "parameter_slots"

    def __init__(self, n: int, gates: Sequence[Gate] = (), parameter_slots: Union[None, Dict[str, float]] = None):
        if n < 1:
            raise ParameterError("a circuit needs at least one qubit. Not '{}'".format(n))
        self.n = int(n)
        self.gates = []
        self.parameter_slots = OrderedDict() if parameter_slots is None else OrderedDict(parameter_slots)
        for gate in gates:
            self.append(gate)

    def append(self, gate: Gate) -> 'Circuit':
        if any(q >= self.n for q in gate.qubits):
            raise ParameterError("gate {} does not fit on {} qubits".format(gate, self.n))
        for name in gate.slot_names:
            self.parameter_slots.setdefault(name, None)
        self.gates.append(gate)
        return self

    def u3(self, qubit: int, theta, phi, lam) -> 'Circuit':
        return self.append(Gate('u3', (qubit,), (theta, phi, lam)))

    def cx(self, control: int, target: int) -> 'Circuit':
        return self.append(Gate('cx', (control, target)))

    def ecr(self, first: int, second: int) -> 'Circuit':
        return self.append(Gate('ecr', (first, second)))

    @property
    def parameter_count(self) -> int:
        return len(self.parameter_slots)

    @property
    def parameter_names(self) -> List[str]:
        return list(self.parameter_slots.keys())

    def bind(self, values: Union[Sequence[float], Dict[str, float]]) -> 'Circuit':
        """
        Sets slot values, either all of them in slot order or a subset by name.

        :return: The circuit itself.
        """
        if isinstance(values, dict):
            unknown = set(values) - set(self.parameter_slots)
            if unknown:
                raise BindingError("unknown parameter slots {}".format(sorted(unknown)))
            self.parameter_slots.update((name, float(value)) for name, value in values.items())
        else:
            values = np.asarray(values, dtype=float).reshape(-1)
            if len(values) != self.parameter_count:
                raise BindingError("expected {} parameter values. Got {}".format(self.parameter_count, len(values)))
            for name, value in zip(self.parameter_slots, values):
                self.parameter_slots[name] = float(value)
        return self

    def parameter_values(self) -> np.ndarray:
        self._check_bound()
        return np.array(list(self.parameter_slots.values()), dtype=float)

    def bound_params(self, gate: Gate) -> List[float]:
        values = []
        for p in gate.params:
            if isinstance(p, str):
                value = self.parameter_slots.get(p)
                if value is None:
                    raise BindingError("parameter slot '{}' of {} is not bound".format(p, gate))
                values.append(value)
            else:
                values.append(float(p))
        return values

    def _check_bound(self):
        unbound = [name for name, value in self.parameter_slots.items() if value is None]
        if unbound:
            raise BindingError("{} parameter slot(s) are not bound, e.g. '{}'".format(len(unbound), unbound[0]))

    def lowered(self) -> 'Circuit':
        """A copy in which every ECR gate is replaced by its two-CX fragment. Parameter slots are shared by value."""
        lowered = Circuit(self.n, parameter_slots=self.parameter_slots)
        for gate in self.gates:
            if gate.kind == 'ecr':
                for fragment_gate in ecr_decomposition(*gate.qubits):
                    lowered.append(fragment_gate)
            else:
                lowered.append(gate)
        return lowered

    def evolve(self, state: Union[None, StateVector] = None) -> StateVector:
        """Noiseless evolution of `state` (default |0...0>)."""
        state = StateVector.zero(self.n) if state is None else state
        if state.n != self.n:
            raise ParameterError("a {}-qubit circuit cannot act on a {}-qubit state".format(self.n, state.n))
        amplitudes = state.amplitudes
        for gate in self.gates:
            amplitudes = apply_matrix(amplitudes, gate.matrix(self.bound_params(gate)), gate.qubits, self.n)
        return StateVector(amplitudes)

    def unitary(self) -> np.ndarray:
        """The dense 2^n x 2^n matrix of the circuit, built by pushing the identity through the gate kernel."""
        matrix = np.eye(2 ** self.n, dtype=complex)
        for gate in self.gates:
            matrix = apply_matrix(matrix, gate.matrix(self.bound_params(gate)), gate.qubits, self.n)
        return matrix


def build_layered_ansatz(n: int, layers: int, entangler: str = 'ecr') -> Circuit:
    """
    Builds the layered hardware-efficient ansatz.

    Every layer holds one u3 gate per qubit with three fresh parameter slots, followed by entanglers on the
    neighbouring pairs (0, 1), (1, 2), ..., (n - 2, n - 1). The circuit has 3 * n * layers slots, named
    'l{layer}_q{qubit}_{angle}'.

    :param n: Number of qubits.
    :param layers: Number of layers, at least 1.
    :param entangler: Either 'ecr' or 'cx'.
    :return: The unbound circuit.
    """
    if layers < 1:
        raise ParameterError("layers must be at least 1. Not '{}'".format(layers))
    if entangler not in ('ecr', 'cx'):
        raise ParameterError("entangler must be either 'ecr' or 'cx'. Not '{}'".format(entangler))
    circuit = Circuit(n)
    for layer in range(layers):
        for qubit in range(n):
            circuit.u3(qubit, *("l{}_q{}_{}".format(layer, qubit, angle) for angle in U3_ANGLES))
        for qubit in range(n - 1):
            circuit.append(Gate(entangler, (qubit, qubit + 1)))
    return circuit
