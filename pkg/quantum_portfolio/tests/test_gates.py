import itertools

import numpy as np

import pytest

from quantum_portfolio.circuit import Circuit
from quantum_portfolio.exceptions import ParameterError
from quantum_portfolio.gates import CX_MATRIX, ECR_FRAGMENT_PHASE, ECR_MATRIX, H_MATRIX, PAULI_MATRICES, SDG_MATRIX, \
    X_MATRIX, Gate, ecr_decomposition, u3_matrix


def equal_up_to_phase(a, b, atol=1e-10):
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[k] / b[k]
    return np.isclose(abs(phase), 1, atol=atol) and np.allclose(a, phase * b, atol=atol)


@pytest.mark.parametrize("matrix", [X_MATRIX, H_MATRIX, SDG_MATRIX, CX_MATRIX, ECR_MATRIX])
def test_fixed_gates_are_unitary(matrix):
    assert np.allclose(matrix @ matrix.conj().T, np.eye(len(matrix)), atol=1e-12)


@pytest.mark.parametrize("angles", [(0., 0., 0.), (np.pi, 0., np.pi), (0.3, -1.2, 2.5), (7., 8., 9.)])
def test_u3_is_unitary(angles):
    u = u3_matrix(*angles)
    assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)


def test_u3_special_cases():
    assert np.allclose(u3_matrix(0, 0, 0), np.eye(2), atol=1e-12)
    assert np.allclose(u3_matrix(np.pi, 0, np.pi), X_MATRIX, atol=1e-12)


def test_ecr_pauli_form():
    # local index bit(first) + 2 bit(second), so kron(second factor, first factor)
    x, y, i = PAULI_MATRICES['X'], PAULI_MATRICES['Y'], PAULI_MATRICES['I']
    assert np.allclose(ECR_MATRIX, (np.kron(i, x) - np.kron(x, y)) / np.sqrt(2))


def test_gate_validation():
    with pytest.raises(ParameterError):
        Gate('cz', (0, 1))
    with pytest.raises(ParameterError):
        Gate('cx', (0,))
    with pytest.raises(ParameterError):
        Gate('cx', (1, 1))
    with pytest.raises(ParameterError):
        Gate('u3', (0,), (1., 2.))
    assert Gate('u3', (0,), ('a', 0., 'b')).slot_names == ['a', 'b']


def test_ecr_decomposition_structure():
    gates = ecr_decomposition(0, 1)
    assert sum(gate.kind == 'cx' for gate in gates) == 2


@pytest.mark.parametrize("first,second", [(0, 1), (1, 0)])
def test_ecr_decomposition_matches_ecr(first, second):
    fragment = Circuit(2, ecr_decomposition(first, second)).unitary()
    reference = Circuit(2).ecr(first, second).unitary()
    assert np.allclose(fragment, ECR_FRAGMENT_PHASE * reference, atol=1e-10)


def _reading(operator_order: bool, left_qubit: int, control: int) -> Circuit:
    """One reading of the product (H x I) CX (I x Sdg) CX (H x X)."""
    right_qubit = 1 - left_qubit
    factors = [('h', None), 'cx', (None, 'sdg'), 'cx', ('h', 'x')]
    if operator_order:
        factors = factors[::-1]
    circuit = Circuit(2)
    for factor in factors:
        if factor == 'cx':
            circuit.cx(control, 1 - control)
            continue
        for kind, qubit in zip(factor, (left_qubit, right_qubit)):
            if kind is not None:
                circuit.append(Gate(kind, (qubit,)))
    return circuit


def test_exactly_one_reading_of_the_decomposition_is_ecr():
    matches = [(order, left, control)
               for order, left, control in itertools.product([True, False], [0, 1], [0, 1])
               if equal_up_to_phase(_reading(order, left, control).unitary(), ECR_MATRIX)]
    assert matches == [(True, 1, 1)]
    assert np.allclose(_reading(True, 1, 1).unitary(), Circuit(2, ecr_decomposition(0, 1)).unitary())
