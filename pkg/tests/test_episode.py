"""
Tests the episodes, the token layout and the training batches
"""

from __future__ import annotations

from math import radians

import numpy as np
import pytest

from src.core.core import RngStream
from src.core.episode import (Episode, InputDistribution, InputKind, detokenize, make_batch, sample_episodes,
                              tokenize, tokenize_batch, zero_perpendicular)
from src.core.sphere import CapSpec, angle_between, canonical_pole
from src.core.task import ContinuousTaskSource, FixedTaskSource, LinearTask, TaskFamily


def linear_source(dim: int = 3, half_angle: float = 60, noise_var: float = 0.0) -> ContinuousTaskSource:
    return ContinuousTaskSource(TaskFamily.LINEAR, CapSpec(dim, radians(half_angle)), noise_var)


def test_tokenize_layout():
    episode = sample_episodes(RngStream(0), linear_source(), InputDistribution(), 4, 3, 1)[0]
    tokens = tokenize(episode)

    assert tokens.shape == (8, 3)
    assert np.array_equal(tokens[0::2], episode.xs)
    assert np.array_equal(tokens[1::2, 0], episode.ys)
    assert np.all(tokens[1::2, 1:] == 0)

    recovered = detokenize(tokens)
    assert np.array_equal(recovered.xs, episode.xs) and np.array_equal(recovered.ys, episode.ys)

    batch = tokenize_batch([episode, episode])
    assert batch.shape == (2, 8, 3) and batch.dtype == np.float32


def test_sample_episodes():
    rng = RngStream(1)
    episodes = sample_episodes(rng, linear_source(noise_var=0.25), InputDistribution(), 5, 3, 10)
    assert len(episodes) == 10
    for episode in episodes:
        assert episode.context_length == 5 and episode.dim == 3
        assert np.array_equal(episode.relabel(), episode.ys)
        assert np.allclose(episode.ys - episode.xs @ episode.task.w, episode.noise)

    with pytest.raises(ValueError):
        sample_episodes(rng, linear_source(), InputDistribution(), 0, 3, 1)
    with pytest.raises(ValueError):
        sample_episodes(rng, linear_source(), InputDistribution(), 5, 4, 1)


def test_noiseless_episode_labels():
    task = LinearTask(np.array([0.0, 1.0]))
    episode = sample_episodes(RngStream(2), FixedTaskSource(task), InputDistribution(), 6, 2, 1)[0]
    assert episode.noise is None
    assert np.array_equal(episode.ys, episode.xs[:, 1])


def test_truncate():
    episode = sample_episodes(RngStream(3), linear_source(noise_var=0.1), InputDistribution(), 6, 3, 1)[0]
    truncated = episode.truncate(2)
    assert truncated.context_length == 2
    assert np.array_equal(truncated.xs, episode.xs[:2]) and np.array_equal(truncated.noise, episode.noise[:2])
    with pytest.raises(AssertionError):
        episode.truncate(7)


def test_cap_restricted_inputs():
    cap = CapSpec(3, radians(30))
    input_dist = InputDistribution(InputKind.CAP_RESTRICTED, cap)
    xs = input_dist.sample(RngStream(4), 500, 3)
    assert np.allclose(np.linalg.norm(xs, axis=1), 1)
    assert np.all(angle_between(xs, cap.pole) <= radians(30) + 1e-9)

    with pytest.raises(ValueError):
        input_dist.sample(RngStream(4), 10, 4)
    with pytest.raises(AssertionError):
        InputDistribution(InputKind.CAP_RESTRICTED)


def test_zero_perpendicular():
    episode = sample_episodes(RngStream(5), linear_source(), InputDistribution(), 5, 3, 1)[0]
    pole = canonical_pole(3)

    kept = zero_perpendicular(episode, pole)
    assert np.all(kept.xs[:, 1:] == 0) and np.array_equal(kept.xs[:, 0], episode.xs[:, 0])
    assert np.array_equal(kept.ys, episode.ys)

    recomputed = zero_perpendicular(episode, pole, recompute_labels=True)
    assert np.allclose(recomputed.ys, episode.xs[:, 0] * episode.task.w[0])


def test_make_batch():
    batch = make_batch(RngStream(6), linear_source(), InputDistribution(), 8, 5, 3)
    assert batch.shape == (8, 10, 3) and batch.dtype == np.float32
    assert np.array_equal(batch, make_batch(RngStream(6), linear_source(), InputDistribution(), 8, 5, 3))

    zeroed = make_batch(RngStream(6), linear_source(), InputDistribution(), 8, 5, 3,
                        perpendicular_pole=canonical_pole(3))
    assert np.all(zeroed[:, 0::2, 1:] == 0)

    with pytest.raises(ValueError):
        make_batch(RngStream(6), linear_source(), InputDistribution(), 0, 5, 3)


def test_episode_length_mismatch():
    with pytest.raises(AssertionError):
        Episode(np.zeros((3, 2)), np.zeros(2))
