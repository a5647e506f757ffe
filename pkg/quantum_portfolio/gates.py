from typing import List, Sequence, Union

import numpy as np

from quantum_portfolio.exceptions import ParameterError

_SQRT2_INV = 1 / np.sqrt(2)

X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)
Y_MATRIX = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z_MATRIX = np.array([[1, 0], [0, -1]], dtype=complex)
H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
SDG_MATRIX = np.array([[1, 0], [0, -1j]], dtype=complex)

# Two-qubit matrices use the local index bit(first qubit) + 2 * bit(second qubit).
CX_MATRIX = np.array([[1, 0, 0, 0],
                      [0, 0, 0, 1],
                      [0, 0, 1, 0],
                      [0, 1, 0, 0]], dtype=complex)
ECR_MATRIX = np.array([[0, 1, 0, 1j],
                       [1, 0, -1j, 0],
                       [0, 1j, 0, 1],
                       [-1j, 0, 1, 0]], dtype=complex) * _SQRT2_INV

for _matrix in (X_MATRIX, Y_MATRIX, Z_MATRIX, H_MATRIX, SDG_MATRIX, CX_MATRIX, ECR_MATRIX):
    _matrix.setflags(write=False)

PAULI_MATRICES = {'I': np.eye(2, dtype=complex), 'X': X_MATRIX, 'Y': Y_MATRIX, 'Z': Z_MATRIX}

# Global phase of the two-CX fragment relative to ECR: fragment = ECR_FRAGMENT_PHASE * ECR.
ECR_FRAGMENT_PHASE = np.exp(-1j * np.pi / 4)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """
    The general single-qubit rotation

        U3 = [[cos(theta/2),              -e^(i lam) sin(theta/2)],
              [e^(i phi) sin(theta/2),   e^(i (phi + lam)) cos(theta/2)]]
    """
    cos, sin = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[cos, -np.exp(1j * lam) * sin],
                     [np.exp(1j * phi) * sin, np.exp(1j * (phi + lam)) * cos]], dtype=complex)


_FIXED_MATRICES = {'x': X_MATRIX, 'h': H_MATRIX, 'sdg': SDG_MATRIX, 'cx': CX_MATRIX, 'ecr': ECR_MATRIX}
_ARITY = {'u3': 1, 'x': 1, 'h': 1, 'sdg': 1, 'cx': 2, 'ecr': 2}


class Gate:
    """
    One gate of a circuit.

    Parameters of a u3 gate are either numbers or names of parameter slots of the owning circuit. For cx the first
    qubit is the control and the second the target.
    """
    __slots__ = "kind", "qubits", "params"

    def __init__(self, kind: str, qubits: Sequence[int], params: Sequence[Union[str, float]] = ()):
        if kind not in _ARITY:
            raise ParameterError("gate kind must be one of {}. Not '{}'".format(sorted(_ARITY), kind))
        qubits = tuple(int(q) for q in qubits)
        if len(qubits) != _ARITY[kind]:
            raise ParameterError("{} acts on {} qubit(s). Got {}".format(kind, _ARITY[kind], qubits))
        if len(set(qubits)) != len(qubits):
            raise ParameterError("{} needs distinct qubits. Got {}".format(kind, qubits))
        if len(params) != (3 if kind == 'u3' else 0):
            raise ParameterError("{} takes {} parameters. Got {}".format(kind, 3 if kind == 'u3' else 0, params))
        self.kind = kind
        self.qubits = qubits
        self.params = tuple(params)

    @property
    def slot_names(self) -> List[str]:
        return [p for p in self.params if isinstance(p, str)]

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def matrix(self, bound_params: Sequence[float] = ()) -> np.ndarray:
        """
        :param bound_params: The numeric values of the u3 angles, in (theta, phi, lam) order.
        :return: The unitary of the gate, in the local qubit order of `qubits`.
        """
        if self.kind == 'u3':
            return u3_matrix(*bound_params)
        return _FIXED_MATRICES[self.kind]

    def __repr__(self):
        params = "({})".format(", ".join(str(p) for p in self.params)) if self.params else ""
        return "{}{}{}".format(self.kind, params, list(self.qubits))


def ecr_decomposition(first: int = 0, second: int = 1) -> List[Gate]:
    """
    Two-CX fragment implementing ECR on (first, second) up to the global phase ECR_FRAGMENT_PHASE.

    Written as an operator product acting on (second (x) first) the fragment is (H (x) I) CX (I (x) Sdg) CX (H (x) X),
    with the CX controlled by `second`. Out of the eight readings of that product (operator vs. circuit order, which
    tensor factor is which qubit, which qubit controls the CX) this is the only one that reproduces ECR.

    :return: The gates in application order.
    """
    return [Gate('x', (first,)),
            Gate('h', (second,)),
            Gate('cx', (second, first)),
            Gate('sdg', (first,)),
            Gate('cx', (second, first)),
            Gate('h', (second,))]
