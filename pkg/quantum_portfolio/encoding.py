from typing import Sequence, Tuple, Union

import numpy as np

from quantum_portfolio.exceptions import CapacityError, RangeError, ShapeError
from quantum_portfolio.portfolio import FinancialSummary, PortfolioInstance
from quantum_portfolio.utils import all_bits, bits_to_index, index_to_bits

MAX_ENUMERATION_QUBITS = 24
_ENUMERATION_CHUNK_QUBITS = 16


def encode_z(z: Sequence[int], w: int) -> np.ndarray:
    """
    Encodes integer allocations as a bitstring.

    Variable i = u * w + k (zero based) holds bit k of z_u, i.e. the coefficient of 2^k.

    :param z: One integer per asset, each in [0, 2^w - 1].
    :param w: Bits per asset.
    :return: The bits, in canonical order.
    """
    z = np.asarray(z, dtype=int)
    if np.any(z < 0) or np.any(z >= 2 ** w):
        raise RangeError("z entries must lie in [0, {}]. Got {}".format(2 ** w - 1, z))
    return ((z[:, None] >> np.arange(w)[None, :]) & 1).reshape(-1)


def decode_z(bits: Sequence[int], w: int) -> np.ndarray:
    """Inverse of encode_z. Also accepts stacks of bitstrings of shape (..., m * w)."""
    bits = np.asarray(bits, dtype=int)
    if bits.shape[-1] % w != 0:
        raise ShapeError("bitstring length {} is not a multiple of w={}".format(bits.shape[-1], w))
    if np.any((bits != 0) & (bits != 1)):
        raise RangeError("bits must be 0 or 1")
    grouped = bits.reshape(bits.shape[:-1] + (bits.shape[-1] // w, w))
    return grouped @ (1 << np.arange(w))


class QuboModel:
    """
    Quadratic unconstrained binary objective sum_i q_i x_i + sum_ij Q_ij x_i x_j + gamma.

    Q is kept exactly as built (including the diagonal) and summed over all ordered pairs (i, j).
    """
    __slots__ = "q", "Q", "gamma"

    def __init__(self, q: np.ndarray, Q: np.ndarray, gamma: float):
        q = np.asarray(q, dtype=float)
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (len(q), len(q)):
            raise ShapeError("Q must be of shape {}. Got {}".format((len(q), len(q)), Q.shape))
        self.q = q
        self.Q = Q
        self.gamma = float(gamma)

    @property
    def n(self) -> int:
        return len(self.q)

    def value(self, x: Sequence[int]) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ShapeError("bitstring must have length {}. Got shape {}".format(self.n, x.shape))
        return float(self.q @ x + x @ self.Q @ x + self.gamma)

    def values(self, bits: np.ndarray) -> np.ndarray:
        """QUBO values of a stack of bitstrings of shape (k, n)."""
        bits = np.asarray(bits, dtype=float)
        return bits @ self.q + np.einsum('ki,ij,kj->k', bits, self.Q, bits) + self.gamma


def build_qubo(instance: PortfolioInstance, summary: FinancialSummary) -> QuboModel:
    """
    Builds the QUBO whose value at x equals -F(z(x)).

    With variable i = (asset u, bit k) and weight 2^k:
        q_i = -theta1 2^k r_u - 2 theta3 b^2 p_w 2^k
        Q_ij = theta2 2^k 2^k' c_uv + theta3 b^2 p_w^2 2^k 2^k'
        gamma = theta3 b^2

    :param instance: The problem instance.
    :param summary: Its financial summary.
    :return: The QUBO model on m * w variables.
    """
    m, w = instance.asset_count, instance.slices_per_asset
    if summary.expected_return.shape != (m,) or summary.covariance.shape != (m, m):
        raise ShapeError("summary does not match an instance with {} assets".format(m))
    theta1, theta2, theta3 = instance.theta
    b = instance.budget
    p_w = summary.quantized_fraction

    weights = np.tile(2. ** np.arange(w), m)
    asset = np.repeat(np.arange(m), w)
    r = weights * summary.expected_return[asset]
    c = np.outer(weights, weights) * summary.covariance[np.ix_(asset, asset)]

    q = -theta1 * r - 2 * theta3 * b ** 2 * p_w * weights
    Q = theta2 * c + theta3 * b ** 2 * p_w ** 2 * np.outer(weights, weights)
    return QuboModel(q, Q, theta3 * b ** 2)


class IsingModel:
    """
    Diagonal spin Hamiltonian sum_i h_i s_i + sum_ij J_ij s_i s_j + delta with spins s_i = 2 x_i - 1.

    The energies of all 2^n basis states are computed once on first use. The ground state is filled in by
    brute_force_ground (see with_ground_state).
    """
    __slots__ = "h", "J", "delta", "ground_energy", "ground_bitstring", "_field_energies"

    def __init__(self, h: np.ndarray, J: np.ndarray, delta: float, ground_energy: Union[None, float] = None,
                 ground_bitstring: Union[None, Sequence[int]] = None):
        h = np.asarray(h, dtype=float)
        J = np.asarray(J, dtype=float)
        if J.shape != (len(h), len(h)):
            raise ShapeError("J must be of shape {}. Got {}".format((len(h), len(h)), J.shape))
        self.h = h
        self.J = J
        self.delta = float(delta)
        self.ground_energy = None if ground_energy is None else float(ground_energy)
        self.ground_bitstring = None if ground_bitstring is None else np.asarray(ground_bitstring, dtype=int)
        self._field_energies = None

    @property
    def n(self) -> int:
        return len(self.h)

    def _energies_of(self, bits: np.ndarray) -> np.ndarray:
        spins = 2. * np.asarray(bits, dtype=float) - 1
        return spins @ self.h + np.einsum('ki,ij,kj->k', spins, self.J, spins)

    def energies(self, include_offset: bool = True) -> np.ndarray:
        """
        Energies of all computational basis states, indexed by the integer whose bit i is x_i.

        :param include_offset: If False, delta is left out. Solvers use these energies so that delta never enters
        their arithmetic.
        """
        if self._field_energies is None:
            if self.n > MAX_ENUMERATION_QUBITS:
                raise CapacityError("cannot tabulate energies of {} > {} qubits".format(
                    self.n, MAX_ENUMERATION_QUBITS))
            self._field_energies = np.concatenate([self._energies_of(chunk) for chunk in _bit_chunks(self.n)])
            self._field_energies.setflags(write=False)
        return self._field_energies + self.delta if include_offset else self._field_energies

    def relative_energies(self) -> np.ndarray:
        """Energies above the ground level, E(x) - E_g, computed without touching delta."""
        field_energies = self.energies(include_offset=False)
        return field_energies - np.min(field_energies)

    def with_ground_state(self) -> 'IsingModel':
        self.ground_energy, self.ground_bitstring = brute_force_ground(self)
        return self


def _bit_chunks(n: int):
    chunk_qubits = min(n, _ENUMERATION_CHUNK_QUBITS)
    low_bits = all_bits(chunk_qubits)
    for high in range(2 ** (n - chunk_qubits)):
        high_bits = np.broadcast_to(index_to_bits(high, n - chunk_qubits), (len(low_bits), n - chunk_qubits))
        yield np.concatenate([low_bits, high_bits], axis=1)


def build_ising(qubo: QuboModel) -> IsingModel:
    """
    Substitutes x_i = (1 + s_i) / 2 into the QUBO.

    J = Q / 4, h_i = q_i / 2 + (sum_j Q_ij + sum_j Q_ji) / 4, delta = sum_ij Q_ij / 4 + sum_i q_i / 2 + gamma.
    For symmetric Q the field reduces to q_i / 2 + sum_j Q_ij / 2.

    :param qubo: The QUBO model.
    :return: An Ising model with the same value on every bitstring.
    """
    Q = qubo.Q
    h = qubo.q / 2 + (Q.sum(axis=1) + Q.sum(axis=0)) / 4
    delta = Q.sum() / 4 + qubo.q.sum() / 2 + qubo.gamma
    return IsingModel(h, Q / 4, delta)


def ising_energy(ising: IsingModel, bits: Sequence[int]) -> float:
    bits = np.asarray(bits)
    if bits.shape != (ising.n,):
        raise ShapeError("bitstring must have length {}. Got shape {}".format(ising.n, bits.shape))
    return float(ising._energies_of(bits[None, :])[0] + ising.delta)


def _lexicographic_first(indices: np.ndarray, n: int) -> int:
    return min(indices, key=lambda index: tuple(index_to_bits(index, n)))


def brute_force_ground(ising: IsingModel) -> Tuple[float, np.ndarray]:
    """
    Finds the exact ground state by enumerating all 2^n bitstrings.

    Ties are broken towards the lexicographically smallest bitstring in canonical order.

    :param ising: The Ising model, at most MAX_ENUMERATION_QUBITS qubits.
    :return: The ground energy and the ground bitstring.
    """
    if ising.n > MAX_ENUMERATION_QUBITS:
        raise CapacityError("brute force enumeration is limited to {} qubits. Got {}".format(
            MAX_ENUMERATION_QUBITS, ising.n))
    field_energies = ising.energies(include_offset=False)
    minimum = np.min(field_energies)
    candidates = np.flatnonzero(field_energies == minimum)
    ground_index = _lexicographic_first(candidates, ising.n)
    return float(minimum + ising.delta), index_to_bits(ground_index, ising.n)


def spectral_gap(ising: IsingModel, atol: float = 1e-9) -> float:
    """
    Distance between the ground level and the first distinct excited level. Zero if all levels coincide.
    """
    relative = ising.relative_energies()
    excited = relative[relative > atol]
    return float(np.min(excited)) if len(excited) else 0.


def ground_index(ising: IsingModel) -> int:
    if ising.ground_bitstring is None:
        ising.with_ground_state()
    return bits_to_index(ising.ground_bitstring)
