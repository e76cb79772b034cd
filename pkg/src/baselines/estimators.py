"""
Reference estimators of the task vector from a regression context: least squares, the discrete minimum mean squared
    error estimator of a finite pool, the importance sampled posterior mean under the cap prior and the cap projection
    bound
"""

from __future__ import annotations

from math import cos
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import softmax

from src.core.core import debug
from src.core.sphere import angle_between, project_to_cap

if TYPE_CHECKING:
    from typing import Optional, Union

    from src.core.core import RngStream
    from src.core.episode import Episode
    from src.core.sphere import CapSpec
    from src.core.task import TaskPool

PINV_CUTOFF = 1e-10
ESS_FLOOR = 10
MAX_IMPORTANCE_SAMPLES = 10 ** 7
IMPORTANCE_CHUNK = 10 ** 5


class RegressionContext:
    """
    Observed (x, y) pairs of a context with the label noise variance, the context may be empty
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray, noise_var: float = 0.0):
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.noise_var = noise_var

        assert self.xs.ndim == 2 and len(self.xs) == len(self.ys), \
            f'Context inputs {self.xs.shape} and labels {self.ys.shape} lengths differ'
        assert noise_var >= 0, f'Noise variance {noise_var} must be non-negative'

    @property
    def k(self) -> int:
        return len(self.xs)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @staticmethod
    def from_episode(episode: Episode, k: Optional[int] = None, noise_var: Optional[float] = None) -> RegressionContext:
        """
        Context of the pairs before the query, C_n without its final label

        :param episode: The episode
        :param k: Number of observed pairs, by default all but the last
        :param noise_var: The noise variance, by default the noise variance of the episode task
        :return: The regression context
        """
        k = episode.context_length - 1 if k is None else k
        if noise_var is None:
            noise_var = episode.task.noise_var if episode.task is not None else 0.0
        return RegressionContext(episode.xs[:k], episode.ys[:k], noise_var)

    def squared_residuals(self, weights: np.ndarray) -> np.ndarray:
        """Sum over the context of squared residuals for each row of weights"""
        return np.sum((weights @ self.xs.T - self.ys) ** 2, axis=-1)


def ols(ctx: RegressionContext) -> np.ndarray:
    """
    Minimum norm least squares solution through the singular value pseudo inverse

    :param ctx: The regression context
    :return: The estimate, zero for an empty context
    """
    if ctx.k == 0:
        return np.zeros(ctx.dim)

    u, singular_values, vt = np.linalg.svd(ctx.xs, full_matrices=False)
    if singular_values[0] == 0:
        return np.zeros(ctx.dim)
    kept = singular_values > PINV_CUTOFF * singular_values[0]
    inverse = np.where(kept, 1 / np.where(kept, singular_values, 1), 0)
    return vt.T @ (inverse * (u.T @ ctx.ys))


def _pool_weights(pool: Union[TaskPool, np.ndarray]) -> np.ndarray:
    return pool if isinstance(pool, np.ndarray) else pool.weights()


def dmmse_index(pool: Union[TaskPool, np.ndarray], ctx: RegressionContext) -> int:
    """
    Index of the pool task with the least squared residual, ties go to the lowest index

    :param pool: The task pool or the matrix of pool weights
    :param ctx: The regression context
    :return: The pool index
    """
    return int(np.argmin(ctx.squared_residuals(_pool_weights(pool))))


def dmmse_posterior(pool: Union[TaskPool, np.ndarray], ctx: RegressionContext) -> np.ndarray:
    """
    Posterior weights of the pool tasks under a uniform prior with gaussian likelihood

    :param pool: The task pool or the matrix of pool weights
    :param ctx: The regression context, the noise variance must be positive
    :return: The posterior probability of each task
    """
    assert ctx.noise_var > 0, 'Posterior weights require a positive noise variance'
    return softmax(-ctx.squared_residuals(_pool_weights(pool)) / (2 * ctx.noise_var))


def dmmse(pool: Union[TaskPool, np.ndarray], ctx: RegressionContext) -> np.ndarray:
    """
    Discrete minimum mean squared error estimate: the posterior mean of a uniform prior on the pool, for noiseless
        contexts this is the pool task with the least residual

    :param pool: The task pool or the matrix of pool weights
    :param ctx: The regression context
    :return: The estimate
    """
    weights = _pool_weights(pool)
    if weights.shape[1] != ctx.dim:
        raise ValueError(f'dmmse: pool dimension {weights.shape[1]} does not match context dimension {ctx.dim}')
    if ctx.noise_var == 0:
        return weights[dmmse_index(weights, ctx)].copy()
    return dmmse_posterior(weights, ctx) @ weights


class BayesEstimate:
    """
    Posterior mean estimate with the diagnostics of how it was computed
    """

    def __init__(self, w: np.ndarray, effective_sample_size: float, n_samples: int, reliable: bool):
        self.w = w
        self.effective_sample_size = effective_sample_size
        self.n_samples = n_samples
        self.reliable = reliable

    def __str__(self) -> str:
        return f'Bayes Estimate - samples: {self.n_samples}, ESS: {self.effective_sample_size:.1f}, ' \
               f'reliable: {self.reliable}'


class _ImportanceAccumulator:
    """Streaming self normalised importance sampling sums with a running log weight maximum"""

    def __init__(self, dim: int):
        self.max_log_weight = -np.inf
        self.weight_sum = 0.0
        self.squared_weight_sum = 0.0
        self.weighted_samples = np.zeros(dim)
        self.n_samples = 0

    def add(self, samples: np.ndarray, log_weights: np.ndarray):
        chunk_max = float(np.max(log_weights))
        if chunk_max > self.max_log_weight:
            rescale = np.exp(self.max_log_weight - chunk_max)
            self.weight_sum *= rescale
            self.squared_weight_sum *= rescale ** 2
            self.weighted_samples *= rescale
            self.max_log_weight = chunk_max

        weights = np.exp(log_weights - self.max_log_weight)
        self.weight_sum += float(np.sum(weights))
        self.squared_weight_sum += float(np.sum(weights ** 2))
        self.weighted_samples += weights @ samples
        self.n_samples += len(samples)

    @property
    def effective_sample_size(self) -> float:
        return self.weight_sum ** 2 / self.squared_weight_sum

    @property
    def mean(self) -> np.ndarray:
        return self.weighted_samples / self.weight_sum


def bayes_cap_mc(spec: CapSpec, ctx: RegressionContext, rng: RngStream, n_samples: int = 10 ** 4,
                 ess_floor: float = ESS_FLOOR, max_samples: int = MAX_IMPORTANCE_SAMPLES,
                 debug_sampling: bool = False) -> BayesEstimate:
    """
    Posterior mean under the uniform cap prior by self normalised importance sampling with the prior as the proposal,
        the number of samples is doubled until the effective sample size reaches the floor or the sample cap

    :param spec: The cap prior
    :param ctx: The regression context (it may be empty), the noise variance must be positive
    :param rng: The random number stream
    :param n_samples: The initial number of prior samples
    :param ess_floor: The effective sample size below which the estimate is flagged as unreliable
    :param max_samples: The maximum number of samples
    :param debug_sampling: If to debug the sample doubling
    :return: The estimate with its effective sample size
    """
    if ctx.noise_var <= 0:
        raise ValueError('bayes_cap_mc: the noise variance must be positive, use bayes_cap_noiseless for noiseless '
                         'contexts')
    if n_samples < 10 ** 3:
        raise ValueError(f'bayes_cap_mc: at least 1000 samples are required, got {n_samples}')
    if spec.dim != ctx.dim:
        raise ValueError(f'bayes_cap_mc: cap dimension {spec.dim} does not match context dimension {ctx.dim}')

    accumulator, target = _ImportanceAccumulator(ctx.dim), n_samples
    while True:
        while accumulator.n_samples < target:
            samples = spec.sample(rng, min(IMPORTANCE_CHUNK, target - accumulator.n_samples))
            accumulator.add(samples, -ctx.squared_residuals(samples) / (2 * ctx.noise_var))

        if accumulator.effective_sample_size >= ess_floor or target >= max_samples:
            break
        target = min(2 * target, max_samples)
        debug(f'ESS {accumulator.effective_sample_size:.1f} below {ess_floor}, increasing to {target} samples',
              debug_sampling)

    ess = accumulator.effective_sample_size
    return BayesEstimate(accumulator.mean, ess, accumulator.n_samples, ess >= ess_floor)


def bayes_cap_noiseless(spec: CapSpec, ctx: RegressionContext) -> BayesEstimate:
    """
    Limit of the cap posterior mean for noiseless contexts: the projection onto the cap of the least squares solution,
        only defined once the context determines the task (k >= d)

    :param spec: The cap prior
    :param ctx: The regression context
    :return: The estimate, flagged as unreliable when k < d
    """
    w = ols(ctx)
    norm = np.linalg.norm(w)
    if norm == 0:
        return BayesEstimate(spec.radius * spec.pole, 0.0, 0, False)
    projected, _ = project_to_cap(w / norm, spec)
    return BayesEstimate(projected, float('inf'), 0, ctx.k >= ctx.dim)


def cap_bound_loss(spec: CapSpec, w_star: np.ndarray) -> float:
    """
    Excess squared error of the best predictor restricted to the cap, |w_OB - w*|^2 = 2 - 2cos(max(0, angle - phi))

    :param spec: The cap
    :param w_star: The target unit vector
    :return: The excess loss of the nearest cap point
    """
    return 2 - 2 * cos(max(0.0, angle_between(w_star, spec.pole) - spec.half_angle))
