"""Predictors of the final label of an episode, the trained transformer or a reference estimator"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np

from src.baselines.estimators import RegressionContext, bayes_cap_mc, bayes_cap_noiseless, dmmse, ols
from src.core.sphere import project_to_cap
from src.transformer.model import predict_final_batch

if TYPE_CHECKING:
    from typing import Dict, List, Optional

    from src.core.core import RngStream
    from src.core.episode import Episode
    from src.core.sphere import CapSpec
    from src.core.task import TaskPool
    from src.transformer.model import ModelConfig


class Predictor(ABC):
    """
    Predicts y_n from the context C_n of each episode
    """

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def predict(self, episodes: List[Episode]) -> np.ndarray:
        """
        Predictions of the final label of each episode

        :param episodes: List of episodes
        :return: Array of predictions
        """
        pass

    def __str__(self) -> str:
        return self.name


class LinearPredictor(Predictor, ABC):
    """
    Estimates a task vector from the pairs before the query and predicts w^T x_n
    """

    @abstractmethod
    def estimate(self, episode: Episode) -> np.ndarray:
        """Estimate of the task vector of the episode"""
        pass

    def predict(self, episodes: List[Episode]) -> np.ndarray:
        return np.array([self.estimate(episode) @ episode.xs[-1] for episode in episodes])


class OlsPredictor(LinearPredictor):
    def __init__(self):
        LinearPredictor.__init__(self, 'ols')

    def estimate(self, episode: Episode) -> np.ndarray:
        return ols(RegressionContext.from_episode(episode))


class DmmsePredictor(LinearPredictor):
    def __init__(self, pool: TaskPool, noise_var: Optional[float] = None):
        LinearPredictor.__init__(self, 'dmmse')
        self.weights = pool.weights()
        self.noise_var = noise_var

    def estimate(self, episode: Episode) -> np.ndarray:
        return dmmse(self.weights, RegressionContext.from_episode(episode, noise_var=self.noise_var))


class BayesCapPredictor(LinearPredictor):
    """
    Posterior mean under the cap prior, importance sampled for noisy contexts and the projected least squares limit
        for noiseless ones
    """

    def __init__(self, spec: CapSpec, rng: RngStream, n_samples: int = 10 ** 4, noise_var: Optional[float] = None):
        LinearPredictor.__init__(self, 'bayes_mc')
        self.spec = spec
        self.rng = rng
        self.n_samples = n_samples
        self.noise_var = noise_var
        self.unreliable = 0

    def estimate(self, episode: Episode) -> np.ndarray:
        ctx = RegressionContext.from_episode(episode, noise_var=self.noise_var)
        if ctx.noise_var > 0:
            estimate = bayes_cap_mc(self.spec, ctx, self.rng, self.n_samples)
        else:
            estimate = bayes_cap_noiseless(self.spec, ctx)
        self.unreliable += not estimate.reliable
        return estimate.w


class CapBoundPredictor(LinearPredictor):
    """
    The nearest cap point to the true task, the best any estimator restricted to the cap can do
    """

    def __init__(self, spec: CapSpec):
        LinearPredictor.__init__(self, 'cap_bound')
        self.spec = spec

    def estimate(self, episode: Episode) -> np.ndarray:
        assert episode.task is not None, 'The cap bound requires the episode task'
        w = episode.task.parameters
        projected, _ = project_to_cap(w / np.linalg.norm(w), self.spec)
        return projected * np.linalg.norm(w) / self.spec.radius


class FixedPredictor(LinearPredictor):
    def __init__(self, w: np.ndarray, name: str = 'fixed'):
        LinearPredictor.__init__(self, name)
        self.w = np.asarray(w, dtype=np.float64)

    def estimate(self, episode: Episode) -> np.ndarray:
        return self.w


class OraclePredictor(LinearPredictor):
    def __init__(self):
        LinearPredictor.__init__(self, 'oracle')

    def estimate(self, episode: Episode) -> np.ndarray:
        return episode.task.parameters


class ZeroPredictor(Predictor):
    def __init__(self):
        Predictor.__init__(self, 'zero')

    def predict(self, episodes: List[Episode]) -> np.ndarray:
        return np.zeros(len(episodes))


class TransformerPredictor(Predictor):
    """
    The prediction of a trained transformer at the last x token
    """

    def __init__(self, params: Dict[str, np.ndarray], config: ModelConfig, name: str = 'transformer',
                 batch_size: int = 256):
        Predictor.__init__(self, name)
        self.params = params
        self.config = config
        self.batch_size = batch_size

    def predict(self, episodes: List[Episode]) -> np.ndarray:
        return predict_final_batch(self.params, episodes, self.config, self.batch_size)


ESTIMATORS = ('ols', 'dmmse', 'bayes_mc', 'cap_bound')


def make_predictor(name: str, spec: Optional[CapSpec] = None, pool: Optional[TaskPool] = None,
                   rng: Optional[RngStream] = None, n_samples: int = 10 ** 4) -> Predictor:
    """
    Creates a reference estimator from its name

    :param name: One of ols, dmmse, bayes_mc and cap_bound
    :param spec: The training cap (bayes_mc and cap_bound)
    :param pool: The training task pool (dmmse)
    :param rng: The random number stream (bayes_mc)
    :param n_samples: The initial number of importance samples (bayes_mc)
    :return: The predictor
    """
    if name == 'ols':
        return OlsPredictor()
    elif name == 'dmmse':
        if pool is None:
            raise ValueError('The dmmse estimator requires a task pool')
        return DmmsePredictor(pool)
    elif name == 'bayes_mc':
        if spec is None or rng is None:
            raise ValueError('The bayes_mc estimator requires the training cap and a random number stream')
        return BayesCapPredictor(spec, rng, n_samples)
    elif name == 'cap_bound':
        if spec is None:
            raise ValueError('The cap_bound estimator requires the training cap')
        return CapBoundPredictor(spec)
    else:
        raise ValueError(f'Unknown estimator ({name}), expected one of {", ".join(ESTIMATORS)}')
