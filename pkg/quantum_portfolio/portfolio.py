from typing import Sequence

import numpy as np

from quantum_portfolio.exceptions import InsufficientHistoryError, ParameterError, RangeError, ShapeError
from quantum_portfolio.utils import rng_stream

DEFAULT_THETA = (0.8, 0.1, 0.1)


def _validate_theta(theta: Sequence[float]) -> tuple:
    theta = tuple(float(t) for t in theta)
    if len(theta) != 3:
        raise ParameterError("theta must have exactly three entries. Not '{}'".format(theta))
    if any(t < 0 for t in theta):
        raise ParameterError("theta entries must be non-negative. Not '{}'".format(theta))
    if abs(sum(theta) - 1) > 1e-12:
        raise ParameterError("theta entries must sum to 1. Not '{}' (sum {})".format(theta, sum(theta)))
    return theta


class PortfolioInstance:
    """
    Holds the raw input of one portfolio selection problem: a price history per asset plus the budget and the
    investor preferences.

    The investment into asset u is the integer z_u times the budget slice p_w * b, where p_w = 2^(1 - w) and w is the
    number of bits per asset.
    """
    __slots__ = "asset_count", "slices_per_asset", "history_len", "budget", "prices", "theta", "seed", "instance_id"

    def __init__(self, prices: np.ndarray, slices_per_asset: int, budget: float, theta: Sequence[float] = DEFAULT_THETA,
                 seed: int = 0, instance_id: int = 0):
        """
        Constructs a new PortfolioInstance.

        :param prices: Price history of shape (m, N_f). All prices must be strictly positive.
        :param slices_per_asset: The number of binary slices w used to encode the investment into each asset.
        :param budget: The total budget b.
        :param theta: Preference weights (return, risk, budget deviation) summing to 1.
        :param seed: The seed the prices were generated with.
        :param instance_id: Identifier of the instance inside a suite.
        """
        prices = np.array(prices, dtype=float)
        if prices.ndim != 2 or prices.shape[0] < 1 or prices.shape[1] < 1:
            raise ShapeError("prices must be a non-empty (m, N_f) matrix. Got shape {}".format(prices.shape))
        if not np.all(prices > 0):
            raise ParameterError("all prices must be strictly positive")
        if slices_per_asset < 1:
            raise ParameterError("slices_per_asset must be at least 1. Not '{}'".format(slices_per_asset))
        if not budget > 0:
            raise ParameterError("budget must be positive. Not '{}'".format(budget))
        prices.setflags(write=False)

        self.prices = prices
        self.asset_count, self.history_len = prices.shape
        self.slices_per_asset = int(slices_per_asset)
        self.budget = float(budget)
        self.theta = _validate_theta(theta)
        self.seed = int(seed)
        self.instance_id = int(instance_id)

    @property
    def m(self) -> int:
        return self.asset_count

    @property
    def w(self) -> int:
        return self.slices_per_asset

    @property
    def qubit_count(self) -> int:
        return self.asset_count * self.slices_per_asset

    @property
    def quantized_fraction(self) -> float:
        return 2. ** (1 - self.slices_per_asset)


class FinancialSummary:
    """
    Budget-scaled expected returns and covariances of a PortfolioInstance.
    """
    __slots__ = "expected_return", "covariance", "quantized_fraction"

    def __init__(self, expected_return: np.ndarray, covariance: np.ndarray, quantized_fraction: float):
        self.expected_return = np.asarray(expected_return, dtype=float)
        self.covariance = np.asarray(covariance, dtype=float)
        self.quantized_fraction = float(quantized_fraction)


def generate_instance(m: int = 3, w: int = 3, history_len: int = 100, budget: float = 10.,
                      theta: Sequence[float] = DEFAULT_THETA, seed: int = 0, instance_id: int = 0) -> PortfolioInstance:
    """
    Generates a synthetic price history.

    Each asset gets a base price drawn uniformly from [b/10, b]. Every history point is the base price scaled by
    (1 + alpha) with alpha drawn uniformly from [-0.25, 0.25], independently for every asset and time step.

    :param m: Number of assets.
    :param w: Number of binary slices per asset.
    :param history_len: Number of price points N_f per asset.
    :param budget: The total budget b.
    :param theta: Preference weights summing to 1.
    :param seed: Seed of the price generator.
    :param instance_id: Identifier of the instance. Different ids use independent random streams of the same seed.
    :return: The generated instance. Identical arguments always give bit-identical prices.
    """
    if m < 1 or w < 1 or history_len < 1:
        raise ParameterError("m, w and history_len must all be at least 1. Not '{}'".format((m, w, history_len)))
    if not budget > 0:
        raise ParameterError("budget must be positive. Not '{}'".format(budget))
    theta = _validate_theta(theta)

    random = rng_stream(seed, instance_id)
    base_prices = random.uniform(budget / 10, budget, m)
    alpha = random.uniform(-0.25, 0.25, (m, history_len))
    prices = (1 + alpha) * base_prices[:, None]
    return PortfolioInstance(prices, w, budget, theta, seed, instance_id)


def summarize(instance: PortfolioInstance) -> FinancialSummary:
    """
    Computes the budget-scaled expected return r and covariance c of an instance.

    r_u = (b p_w / a_u,last) * mean of the N_f - 1 consecutive price differences
    c_uv = (b^2 p_w^2 / (a_u,last a_v,last)) * sample covariance (divisor N_f - 1) of the prices

    :param instance: The instance to summarize.
    :return: The financial summary.
    """
    if instance.history_len < 2:
        raise InsufficientHistoryError("at least two price points are needed. Got {}".format(instance.history_len))
    prices = instance.prices
    p_w = instance.quantized_fraction
    scale = instance.budget * p_w / prices[:, -1]

    expected_return = scale * np.mean(np.diff(prices, axis=1), axis=1)
    covariance = np.atleast_2d(np.cov(prices, ddof=1)) * np.outer(scale, scale)
    covariance = (covariance + covariance.T) / 2
    return FinancialSummary(expected_return, covariance, p_w)


def _check_allocations(instance: PortfolioInstance, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    if z.shape[-1] != instance.asset_count:
        raise ShapeError("z must have one entry per asset ({}). Got shape {}".format(instance.asset_count, z.shape))
    if np.any(z < 0) or np.any(z > 2 ** instance.slices_per_asset - 1):
        raise RangeError("z entries must lie in [0, {}]. Got {}".format(2 ** instance.slices_per_asset - 1, z))
    return z.astype(float)


def objective_values(instance: PortfolioInstance, summary: FinancialSummary, z: np.ndarray) -> np.ndarray:
    """
    Vectorized objective over a stack of allocations of shape (..., m).
    """
    z = _check_allocations(instance, z)
    theta1, theta2, theta3 = instance.theta
    b = instance.budget
    returns = z @ summary.expected_return
    risk = np.einsum('...u,uv,...v->...', z, summary.covariance, z)
    budget_deviation = (np.sum(z, axis=-1) * summary.quantized_fraction * b - b) ** 2
    return theta1 * returns - theta2 * risk - theta3 * budget_deviation


def objective(instance: PortfolioInstance, summary: FinancialSummary, z: Sequence[int]) -> float:
    """
    The portfolio objective F(z), which is to be maximized.

    F(z) = theta1 sum_u r_u z_u - theta2 sum_uv c_uv z_u z_v - theta3 (sum_u z_u p_w b - b)^2

    :param instance: The problem instance.
    :param summary: Its financial summary.
    :param z: One integer allocation per asset, each in [0, 2^w - 1].
    :return: The objective value.
    """
    z = np.asarray(z)
    if z.ndim != 1:
        raise ShapeError("z must be a vector. Got shape {}".format(z.shape))
    return float(objective_values(instance, summary, z))


def investment_fractions(z: Sequence[int], w: int) -> np.ndarray:
    """The fraction of the budget invested into every asset, z_u * p_w."""
    return np.asarray(z, dtype=float) * 2. ** (1 - w)
