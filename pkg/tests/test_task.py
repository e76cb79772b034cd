"""
Tests the task families, the finite task pools and the task sources
"""

from __future__ import annotations

from math import pi, radians

import numpy as np
import pytest
from scipy.stats import beta, kstest

from src.core.core import RngStream
from src.core.sphere import BandSpec, CapSpec, angle_between, canonical_pole
from src.core.task import (ContinuousTaskSource, FixedTaskSource, LinearTask, LogisticTask, MlpScheme, MlpTask,
                           PoolTaskSource, TaskFamily, linear_label, logistic_label, make_task_pool, make_tasks,
                           mlp_input_dim, mlp_label, readout_region, sample_mlp_tasks)


def test_linear_label():
    task = LinearTask(np.array([1.0, -2.0, 0.5]))
    x = np.array([2.0, 1.0, 4.0])
    assert linear_label(task, x) == 2.0
    assert isinstance(linear_label(task, x), float)

    xs = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    assert np.array_equal(task.labels(xs), np.array([1.0, -2.0]))
    assert np.array_equal(task.labels(xs, noise=np.array([0.5, 0.25])), np.array([1.5, -1.75]))

    with pytest.raises(ValueError):
        linear_label(task, np.ones(2))


def test_noisy_linear_label():
    task = LinearTask(np.array([1.0, 0.0]), noise_var=0.25)
    labels = linear_label(task, np.tile([1.0, 0.0], (20000, 1)), RngStream(0))
    assert abs(np.mean(labels) - 1) < 0.02
    assert abs(np.var(labels) - 0.25) < 0.02


def test_logistic_label():
    task = LogisticTask(np.array([0.6, 0.8]))
    assert logistic_label(task, np.array([1.0, 0.0])) == 1
    assert logistic_label(task, np.array([-1.0, 0.0])) == 0
    # logistic(0) = 1/2 is labelled 1
    assert logistic_label(task, np.array([0.8, -0.6])) == 1
    assert np.array_equal(task.labels(np.array([[1.0, 1.0], [-1.0, -1.0]])), np.array([1.0, 0.0]))

    with pytest.raises(AssertionError):
        LogisticTask(np.array([1.0, 1.0]))


def test_mlp_label():
    w1 = np.array([[1.0, 0.0], [0.0, -1.0]])
    w2 = np.array([0.6, 0.8])
    task = MlpTask(w1 / np.linalg.norm(w1), w2, MlpScheme.PER_LAYER_SPHERES)
    x = np.array([2.0, 3.0])
    expected = np.maximum(task.w1 @ x, 0) @ w2
    assert abs(mlp_label(task, x) - expected) < 1e-12
    assert task.family == TaskFamily.MLP_PER_LAYER
    assert task.parameters.shape == (6,)

    with pytest.raises(AssertionError):
        MlpTask(w1, w2, MlpScheme.JOINT_SPHERE)


def test_mlp_input_dim():
    assert mlp_input_dim(12, MlpScheme.JOINT_SPHERE) == 3
    assert mlp_input_dim(110, MlpScheme.JOINT_SPHERE) == 10
    assert mlp_input_dim(9, MlpScheme.PER_LAYER_SPHERES) == 3
    with pytest.raises(ValueError):
        mlp_input_dim(10, MlpScheme.JOINT_SPHERE)
    with pytest.raises(ValueError):
        mlp_input_dim(10, MlpScheme.PER_LAYER_SPHERES)


def test_sample_mlp_tasks():
    rng = RngStream(1)
    joint = CapSpec(12, radians(45))
    for task in sample_mlp_tasks(rng, joint, MlpScheme.JOINT_SPHERE, 50):
        assert task.dim == 3 and task.family == TaskFamily.MLP_JOINT
        assert abs(np.linalg.norm(task.parameters) - 1) < 1e-9
        assert angle_between(task.parameters, joint.pole) <= radians(45) + 1e-9

    per_layer = CapSpec(9, radians(60))
    readout = CapSpec(3, radians(30))
    for task in sample_mlp_tasks(rng, per_layer, MlpScheme.PER_LAYER_SPHERES, 50, readout):
        assert angle_between(task.w1.ravel(), per_layer.pole) <= radians(60) + 1e-9
        assert angle_between(task.w2, readout.pole) <= radians(30) + 1e-9

    with pytest.raises(ValueError):
        sample_mlp_tasks(rng, per_layer, MlpScheme.PER_LAYER_SPHERES, 1, CapSpec(4, radians(30)))


def test_make_tasks():
    rng = RngStream(2)
    band = BandSpec(3, radians(90), radians(5))
    for task in make_tasks(rng, TaskFamily.LINEAR, band, 20, noise_var=0.1):
        assert task.noise_var == 0.1
        assert radians(90) - 1e-9 <= angle_between(task.w, band.pole) <= radians(95) + 1e-9

    logistic = make_tasks(rng, TaskFamily.LOGISTIC, CapSpec(3, pi), 20)
    assert all(isinstance(task, LogisticTask) for task in logistic)


def test_task_pool():
    spec = CapSpec(4, radians(60))
    pool = make_task_pool(RngStream(3, 7), spec, 16)
    assert pool.N == 16 and pool.dim == 4
    assert pool.weights().shape == (16, 4)
    assert np.all(angle_between(pool.weights(), spec.pole) <= radians(60) + 1e-9)
    assert np.array_equal(pool.weights(), make_task_pool(RngStream(3, 7), spec, 16).weights())

    indices = pool.draw_indices(RngStream(4), 10000)
    assert indices.min() == 0 and indices.max() == 15
    # Draws are uniform with replacement
    assert np.all(np.abs(np.bincount(indices) / 10000 - 1 / 16) < 0.015)

    with pytest.raises(ValueError):
        make_task_pool(RngStream(3), spec, 0)


def test_task_sources():
    rng = RngStream(5)
    continuous = ContinuousTaskSource(TaskFamily.LINEAR, CapSpec(3, radians(30)))
    tasks = continuous.draw(rng, 5)
    assert continuous.dim == 3 and len({id(task) for task in tasks}) == 5

    assert ContinuousTaskSource(TaskFamily.MLP_JOINT, CapSpec(12, pi)).dim == 3
    assert ContinuousTaskSource(TaskFamily.MLP_PER_LAYER, CapSpec(9, pi)).dim == 3

    pool = make_task_pool(rng, CapSpec(3, radians(30)), 2)
    assert all(task in pool.tasks for task in PoolTaskSource(pool).draw(rng, 10))

    fixed = LinearTask(np.array([1.0, 0, 0]))
    assert FixedTaskSource(fixed).draw(rng, 3) == [fixed] * 3


def test_linear_label_is_linear_in_w():
    rng = RngStream(6)
    xs = rng.normal(size=(50, 4))
    w_a, w_b = rng.normal(size=4), rng.normal(size=4)
    combined = linear_label(LinearTask(2.5 * w_a - 0.5 * w_b), xs)
    assert np.allclose(combined, 2.5 * linear_label(LinearTask(w_a), xs) - 0.5 * linear_label(LinearTask(w_b), xs))


def test_logistic_label_scale_invariant():
    xs = RngStream(7).normal(size=(200, 3))
    unit = make_tasks(RngStream(8), TaskFamily.LOGISTIC, CapSpec(3, radians(120)), 10)
    scaled = make_tasks(RngStream(8), TaskFamily.LOGISTIC, CapSpec(3, radians(120), radius=3.0), 10)
    for task_a, task_b in zip(unit, scaled):
        assert np.array_equal(task_a.labels(xs), task_b.labels(xs))
        assert np.array_equal(task_a.labels(xs), task_a.labels(4.0 * xs))


def test_mlp_label_positively_homogeneous():
    rng = RngStream(9)
    xs = rng.normal(size=(100, 3))
    for task in sample_mlp_tasks(rng, CapSpec(12, pi), MlpScheme.JOINT_SPHERE, 5):
        for scale in (0.5, 3.0):
            assert np.allclose(mlp_label(task, scale * xs), scale * mlp_label(task, xs))


def test_joint_sphere_readout_norm():
    # On the full joint sphere |w_2|^2 is the squared norm of d of the d^2 + d uniform coordinates
    dim = 3
    tasks = sample_mlp_tasks(RngStream(10), CapSpec(dim * dim + dim, pi), MlpScheme.JOINT_SPHERE, 5000)
    squared_norms = np.array([task.w2 @ task.w2 for task in tasks])
    assert kstest(squared_norms, beta(dim / 2, dim * dim / 2).cdf).pvalue > 1e-3


def test_pool_source_uniform_frequency():
    pool = make_task_pool(RngStream(11), CapSpec(3, radians(90)), 8)
    drawn = PoolTaskSource(pool).draw(RngStream(12), 40000)
    counts = np.array([sum(task is pool_task for task in drawn) for pool_task in pool.tasks])
    assert counts.sum() == 40000
    # Binomial standard deviation of each frequency is about 0.0017
    assert np.all(np.abs(counts / 40000 - 1 / 8) < 0.01)


def test_per_layer_readout_region():
    band = BandSpec(9, radians(120), radians(5))
    readout = readout_region(band, 3)
    assert isinstance(readout, BandSpec) and readout.dim == 3 and readout.start_angle == band.start_angle

    for task in sample_mlp_tasks(RngStream(13), band, MlpScheme.PER_LAYER_SPHERES, 30):
        assert radians(120) - 1e-9 <= angle_between(task.w1.ravel(), band.pole) <= radians(125) + 1e-9
        assert radians(120) - 1e-9 <= angle_between(task.w2, readout.pole) <= radians(125) + 1e-9

    cap_readout = readout_region(CapSpec(9, radians(40)), 3)
    assert isinstance(cap_readout, CapSpec) and cap_readout.half_angle == radians(40)

    pool = make_task_pool(RngStream(14), CapSpec(9, radians(60)), 10, TaskFamily.MLP_PER_LAYER,
                          readout_spec=CapSpec(3, radians(20)))
    assert all(angle_between(task.w2, canonical_pole(3)) <= radians(20) + 1e-9 for task in pool.tasks)
