"""Test loss of predictors over band task distributions, loss normalisation and the derived loss curves"""

from __future__ import annotations

from math import degrees, inf, radians
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from src.baselines.predictor import OlsPredictor
from src.core.episode import sample_episodes
from src.core.sphere import BandSpec, great_circle_interpolate, max_cap_distance
from src.core.task import ContinuousTaskSource, FixedTaskSource, LinearTask, TaskFamily
from src.extra.result import EvalRecord

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple, Union

    from src.baselines.predictor import Predictor
    from src.core.core import RngStream
    from src.core.episode import Episode, InputDistribution
    from src.core.sphere import CapSpec
    from src.core.task import TaskSource

    Region = Union[CapSpec, BandSpec]

BAND_WIDTH = 5.0
DEFAULT_RADII = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
EPISODE_CHUNK = 1000


def default_delta_grid() -> List[float]:
    """Test angles in degrees, bands of 5 degrees starting every 15 degrees and the final band [175, 180]"""
    return [float(delta) for delta in range(0, 166, 15)] + [175.0]


def evaluation_band(dim: int, delta: float, width: float = BAND_WIDTH) -> BandSpec:
    """
    Band of test tasks from angles in degrees

    :param dim: The task dimension
    :param delta: The band start angle in degrees
    :param width: The band width in degrees
    :return: The band
    """
    return BandSpec(dim, radians(delta), radians(min(width, 180 - delta)))


def _region_angles(region: Region) -> Tuple[float, float]:
    if isinstance(region, BandSpec):
        return degrees(region.start_angle), degrees(region.width)
    return 0.0, degrees(region.half_angle)


def squared_errors(predictor: Predictor, episodes: List[Episode]) -> np.ndarray:
    """
    Squared error of the prediction of the final label of each episode

    :param predictor: The predictor
    :param episodes: List of episodes
    :return: Array of squared errors
    """
    return (predictor.predict(episodes) - np.array([episode.ys[-1] for episode in episodes])) ** 2


def _mean_stderr(errors: np.ndarray) -> Tuple[float, float]:
    stderr = float(np.std(errors, ddof=1) / np.sqrt(len(errors))) if len(errors) > 1 else 0.0
    return float(np.mean(errors)), stderr


def sample_chunked(rng: RngStream, task_source: TaskSource, input_dist: InputDistribution, n: int,
                   n_episodes: int) -> List[Episode]:
    episodes = []
    for start in range(0, n_episodes, EPISODE_CHUNK):
        episodes += sample_episodes(rng, task_source, input_dist, n, task_source.dim,
                                    min(EPISODE_CHUNK, n_episodes - start))
    return episodes


def normalize_in_dist(loss: float, phi: float) -> float:
    """
    Normalises an in distribution loss by the largest squared distance between two points of the cap

    :param loss: The loss
    :param phi: The training cap half angle in radians
    :return: The normalised loss
    """
    assert loss >= 0, f'Loss {loss} must be non-negative'
    if phi < 1e-6:
        raise ValueError(f'Cap half angle {phi} is too small to normalise by')
    return loss / max_cap_distance(phi)


def normalize_ood(loss: float) -> float:
    """Normalises an out of distribution loss by 4, the largest loss of unit predictors and targets"""
    return loss / 4


def test_loss(predictor: Predictor, region: Region, input_dist: InputDistribution, n: int, noise_var: float,
              n_episodes: int, rng: RngStream, family: TaskFamily = TaskFamily.LINEAR,
              train_phi: Optional[float] = None, num_tasks: Union[int, float] = inf,
              seed: Optional[int] = None) -> EvalRecord:
    """
    Mean squared error of the final prediction over fresh episodes with tasks from a band (or cap)

    :param predictor: The predictor
    :param region: The band or cap of the test tasks
    :param input_dist: The input distribution
    :param n: The context length
    :param noise_var: The label noise variance
    :param n_episodes: The number of episodes
    :param rng: The random number stream
    :param family: The task family
    :param train_phi: The training cap half angle in degrees, the loss is normalised in distribution when the test
        region lies inside the training cap and by 4 otherwise
    :param num_tasks: The number of training tasks (recorded)
    :param seed: The training seed (recorded)
    :return: The evaluation record
    """
    assert n_episodes >= 1, f'Number of episodes {n_episodes} must be positive'
    episodes = sample_chunked(rng, ContinuousTaskSource(family, region, noise_var), input_dist, n, n_episodes)
    loss, stderr = _mean_stderr(squared_errors(predictor, episodes))

    delta, width = _region_angles(region)
    if train_phi is not None and delta + width <= train_phi + 1e-9:
        normalized = normalize_in_dist(loss, radians(train_phi))
    else:
        normalized = normalize_ood(loss)
    return EvalRecord(predictor.name, train_phi, delta, width, num_tasks, seed, n, region.radius, loss, normalized,
                      n_episodes, stderr, noise_var)


def max_excess(dmmse_losses: Sequence[float], model_losses: Sequence[float]) -> float:
    """
    Largest excess of the dMMSE loss over the model loss along a path, negative when the model is better everywhere

    :param dmmse_losses: The dMMSE loss at each path point
    :param model_losses: The model loss at each path point
    :return: D
    """
    assert len(dmmse_losses) == len(model_losses) and len(model_losses) > 0, 'Path losses must be nonempty and aligned'
    return float(np.max(np.asarray(dmmse_losses) - np.asarray(model_losses)))


class ExcessResult:
    """
    Excess loss of dMMSE over a model along a great circle path
    """

    def __init__(self, excess: float, normalized_excess: Optional[float], path: pd.DataFrame):
        self.excess = excess
        self.normalized_excess = normalized_excess
        self.path = path

    def __str__(self) -> str:
        return f'Excess over dMMSE - D: {self.excess:.5f}, normalised: {self.normalized_excess}'


def excess_over_dmmse(model: Predictor, dmmse_predictor: Predictor, w_a: np.ndarray, w_b: np.ndarray,
                      alphas: Sequence[float], input_dist: InputDistribution, n: int, noise_var: float,
                      n_episodes: int, rng: RngStream, train_phi: Optional[float] = None) -> ExcessResult:
    """
    Evaluates the model and dMMSE on the same episodes for tasks along the great circle between two pool tasks

    :param model: The model predictor
    :param dmmse_predictor: The dMMSE predictor of the training pool
    :param w_a: The start pool task
    :param w_b: The end pool task
    :param alphas: Fractions of the path in [0, 1]
    :param input_dist: The input distribution
    :param n: The context length
    :param noise_var: The label noise variance
    :param n_episodes: The number of episodes per path point
    :param rng: The random number stream
    :param train_phi: The training cap half angle in degrees, D is normalised in distribution if given
    :return: The maximum excess and the per point losses
    """
    rows = []
    for alpha in alphas:
        task = LinearTask(great_circle_interpolate(w_a, w_b, alpha), noise_var)
        episodes = sample_chunked(rng, FixedTaskSource(task), input_dist, n, n_episodes)
        model_loss, model_stderr = _mean_stderr(squared_errors(model, episodes))
        dmmse_loss, dmmse_stderr = _mean_stderr(squared_errors(dmmse_predictor, episodes))
        rows.append({'alpha': alpha, 'model_loss': model_loss, 'model_stderr': model_stderr,
                     'dmmse_loss': dmmse_loss, 'dmmse_stderr': dmmse_stderr, 'difference': dmmse_loss - model_loss})

    path = pd.DataFrame(rows)
    excess = max_excess(path['dmmse_loss'], path['model_loss'])
    normalized = excess / max_cap_distance(radians(train_phi)) if train_phi is not None else None
    return ExcessResult(excess, normalized, path)


def context_length_curve(predictor: Predictor, region: Region, input_dist: InputDistribution, n: int,
                         k_grid: Sequence[int], noise_var: float, n_episodes: int, rng: RngStream,
                         family: TaskFamily = TaskFamily.LINEAR,
                         baseline: Optional[Predictor] = None) -> pd.DataFrame:
    """
    Loss of the prediction of y_k from the context C_k for each k of the grid, next to least squares fitted on the
        first k - 1 pairs

    :param predictor: The predictor
    :param region: The band or cap of the test tasks
    :param input_dist: The input distribution
    :param n: The full context length
    :param k_grid: The context lengths in [1, n]
    :param noise_var: The label noise variance
    :param n_episodes: The number of episodes
    :param rng: The random number stream
    :param family: The task family
    :param baseline: The comparison predictor, least squares by default
    :return: Data frame of the losses and standard errors per k
    """
    if any(not 1 <= k <= n for k in k_grid):
        raise ValueError(f'Context lengths {list(k_grid)} must be in [1, {n}]')
    baseline = baseline or OlsPredictor()

    episodes = sample_chunked(rng, ContinuousTaskSource(family, region, noise_var), input_dist, n, n_episodes)
    rows = []
    for k in k_grid:
        truncated = [episode.truncate(k) for episode in episodes]
        model_loss, model_stderr = _mean_stderr(squared_errors(predictor, truncated))
        baseline_loss, baseline_stderr = _mean_stderr(squared_errors(baseline, truncated))
        rows.append({'k': k, 'model_loss': model_loss, 'model_stderr': model_stderr,
                     f'{baseline.name}_loss': baseline_loss, f'{baseline.name}_stderr': baseline_stderr})
    return pd.DataFrame(rows)


def radius_curve(predictor: Predictor, spec: CapSpec, input_dist: InputDistribution, n: int,
                 radii: Sequence[float] = DEFAULT_RADII, noise_var: float = 0.0, n_episodes: int = 10 ** 4,
                 rng: Optional[RngStream] = None, train_phi: Optional[float] = None) -> List[EvalRecord]:
    """
    Test loss on caps of the training half angle with the task radius swept over the grid

    :param predictor: The predictor
    :param spec: The training cap
    :param input_dist: The input distribution
    :param n: The context length
    :param radii: The radius grid
    :param noise_var: The label noise variance
    :param n_episodes: The number of episodes per radius
    :param rng: The random number stream
    :param train_phi: The training cap half angle in degrees
    :return: List of evaluation records, one per radius
    """
    assert rng is not None, 'The radius curve requires a random number stream'
    return [test_loss(predictor, spec.with_radius(radius), input_dist, n, noise_var, n_episodes, rng,
                      train_phi=train_phi) for radius in radii]
