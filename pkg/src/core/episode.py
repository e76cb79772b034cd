"""Episodes of in-context examples and their interleaved, zero padded token layout"""

from __future__ import annotations

from enum import Enum, auto
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional, Union

    from src.core.core import RngStream
    from src.core.sphere import BandSpec, CapSpec
    from src.core.task import Task, TaskSource


class InputKind(Enum):
    """
    Distribution of the inputs x_i
    """
    GAUSSIAN_ISO = auto()
    CAP_RESTRICTED = auto()


class InputDistribution:
    """
    Input distribution, isotropic gaussian or uniform on a cap (or band) of the unit sphere
    """

    def __init__(self, kind: InputKind = InputKind.GAUSSIAN_ISO, cap: Optional[Union[CapSpec, BandSpec]] = None):
        assert kind == InputKind.GAUSSIAN_ISO or cap is not None, 'Cap restricted inputs require a cap'
        self.kind = kind
        self.cap = cap if kind == InputKind.CAP_RESTRICTED else None

    def sample(self, rng: RngStream, size: int, dim: int) -> np.ndarray:
        """
        Samples input rows

        :param rng: The random number stream
        :param size: The number of inputs
        :param dim: The input dimension
        :return: Array of inputs (size x dim)
        """
        if self.kind == InputKind.GAUSSIAN_ISO:
            return rng.normal(size=(size, dim))
        if self.cap.dim != dim:
            raise ValueError(f'Input cap dimension {self.cap.dim} does not match the task dimension {dim}')
        return self.cap.sample(rng, size)

    def save(self) -> Dict[str, Any]:
        return {'kind': self.kind.name.lower(), 'cap': self.cap.save() if self.cap is not None else None}

    def __str__(self) -> str:
        return 'Gaussian inputs' if self.kind == InputKind.GAUSSIAN_ISO else f'Inputs on {self.cap}'


class Episode:
    """
    Context of (x, y) pairs generated by one task, the label noise draws are recorded so labels are reproducible
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray, task: Optional[Task] = None,
                 noise: Optional[np.ndarray] = None):
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.task = task
        self.noise = noise

        assert self.xs.ndim == 2 and len(self.xs) == len(self.ys), \
            f'Episode inputs {self.xs.shape} and labels {self.ys.shape} lengths differ'

    @property
    def context_length(self) -> int:
        return len(self.xs)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def truncate(self, k: int) -> Episode:
        """
        The episode restricted to its first k pairs (the context C_k)

        :param k: The context length
        :return: The truncated episode
        """
        assert 1 <= k <= self.context_length, f'Truncation {k} outside of [1, {self.context_length}]'
        return Episode(self.xs[:k], self.ys[:k], self.task, None if self.noise is None else self.noise[:k])

    def relabel(self) -> np.ndarray:
        """
        Recomputes the labels from the task and the recorded noise

        :return: The labels
        """
        assert self.task is not None, 'Episode has no task to relabel with'
        return self.task.labels(self.xs, noise=self.noise)


def sample_episodes(rng: RngStream, task_source: TaskSource, input_dist: InputDistribution, n: int, d: int,
                    size: int) -> List[Episode]:
    """
    Samples independent episodes, each with its own task from the task source

    :param rng: The random number stream
    :param task_source: The source of the episode tasks
    :param input_dist: The input distribution
    :param n: The context length
    :param d: The input dimension
    :param size: The number of episodes
    :return: List of episodes
    """
    if n < 1:
        raise ValueError(f'Context length must be at least 1, got {n}')
    if task_source.dim != d:
        raise ValueError(f'Task dimension {task_source.dim} does not match the input dimension {d}')

    tasks = task_source.draw(rng, size)
    xs = input_dist.sample(rng, size * n, d).reshape(size, n, d)

    episodes = []
    for task, task_xs in zip(tasks, xs):
        noise = rng.normal(0, np.sqrt(task.noise_var), n) if task.noise_var > 0 else None
        episodes.append(Episode(task_xs, task.labels(task_xs, noise=noise), task, noise))
    return episodes


def sample_episode(rng: RngStream, task_source: TaskSource, input_dist: InputDistribution, n: int, d: int) -> Episode:
    return sample_episodes(rng, task_source, input_dist, n, d, 1)[0]


def tokenize(episode: Episode, dtype=np.float64) -> np.ndarray:
    """
    Interleaves the episode into 2n token rows of width d, row 2k - 1 is x_k and row 2k is (y_k, 0, ..., 0)

    :param episode: The episode
    :param dtype: The token data type
    :return: Token matrix (2n x d)
    """
    tokens = np.zeros((2 * episode.context_length, episode.dim), dtype=dtype)
    tokens[0::2] = episode.xs
    tokens[1::2, 0] = episode.ys
    return tokens


def detokenize(tokens: np.ndarray, task: Optional[Task] = None, noise: Optional[np.ndarray] = None) -> Episode:
    """
    Recovers the episode from its token matrix

    :param tokens: Token matrix (2n x d)
    :param task: The episode task
    :param noise: The recorded noise
    :return: The episode
    """
    assert len(tokens) % 2 == 0, f'Token sequence has an odd number of rows {len(tokens)}'
    return Episode(tokens[0::2], tokens[1::2, 0], task, noise)


def tokenize_batch(episodes: List[Episode], dtype=np.float32) -> np.ndarray:
    """
    Stacks the token matrices of episodes of equal length

    :param episodes: List of episodes
    :param dtype: The token data type
    :return: Batch tensor (batch x 2n x d)
    """
    return np.stack([tokenize(episode, dtype) for episode in episodes])


def zero_perpendicular(episode: Episode, pole: np.ndarray, recompute_labels: bool = False) -> Episode:
    """
    Zeros the components of the inputs perpendicular to the pole, x_i -> (x_i . v) v

    :param episode: The episode
    :param pole: The unit pole v
    :param recompute_labels: If to recompute the labels from the projected inputs, by default the labels of the
        original inputs are kept
    :return: The projected episode
    """
    projected = np.outer(episode.xs @ pole, pole)
    if recompute_labels:
        assert episode.task is not None, 'Recomputing labels requires the episode task'
        return Episode(projected, episode.task.labels(projected, noise=episode.noise), episode.task, episode.noise)
    return Episode(projected, episode.ys.copy(), episode.task, episode.noise)


def make_batch(rng: RngStream, task_source: TaskSource, input_dist: InputDistribution, batch_size: int, n: int,
               d: int, dtype=np.float32, perpendicular_pole: Optional[np.ndarray] = None,
               recompute_labels: bool = False) -> np.ndarray:
    """
    Builds a training batch of tokenised episodes

    :param rng: The random number stream
    :param task_source: The source of the episode tasks
    :param input_dist: The input distribution
    :param batch_size: The number of episodes
    :param n: The context length
    :param d: The input dimension
    :param dtype: The token data type
    :param perpendicular_pole: If given, the components of the inputs perpendicular to this pole are zeroed
    :param recompute_labels: If to recompute labels after zeroing the perpendicular components
    :return: Batch tensor (batch x 2n x d)
    """
    if batch_size < 1:
        raise ValueError(f'Batch size must be at least 1, got {batch_size}')

    episodes = sample_episodes(rng, task_source, input_dist, n, d, batch_size)
    if perpendicular_pole is not None:
        episodes = [zero_perpendicular(episode, perpendicular_pole, recompute_labels) for episode in episodes]
    return tokenize_batch(episodes, dtype)
