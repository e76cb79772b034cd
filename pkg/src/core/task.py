"""Task families (linear, logistic and one hidden layer networks), their labels and the task sources of episodes"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from math import isqrt, pi
from typing import TYPE_CHECKING, Union

import numpy as np

from src.core.core import as_matrix
from src.core.sphere import BandSpec, CapSpec

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional

    from src.core.core import RngStream

    Region = Union[CapSpec, BandSpec]


class TaskFamily(Enum):
    """
    Task families with the names used in the config files
    """
    LINEAR = 'linear'
    LOGISTIC = 'logistic'
    MLP_JOINT = 'mlp_joint'
    MLP_PER_LAYER = 'mlp_perlayer'


class MlpScheme(Enum):
    """
    How the parameters of the one hidden layer network are placed on spheres
    """
    JOINT_SPHERE = 'joint'
    PER_LAYER_SPHERES = 'per layer'


class LinearTask:
    """
    Linear regression task with weights w and gaussian label noise of variance sigma^2
    """

    family = TaskFamily.LINEAR

    def __init__(self, w: np.ndarray, noise_var: float = 0.0):
        assert noise_var >= 0, f'Noise variance {noise_var} must be non-negative'
        self.w = np.asarray(w, dtype=np.float64)
        self.noise_var = noise_var

    @property
    def dim(self) -> int:
        return len(self.w)

    @property
    def parameters(self) -> np.ndarray:
        return self.w

    def labels(self, xs: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        return linear_label(self, xs, noise=noise)

    def save(self) -> Dict[str, Any]:
        return {'family': self.family.value, 'w': self.w.tolist(), 'noise var': self.noise_var}

    def __str__(self) -> str:
        return f'Linear Task - |w|: {np.linalg.norm(self.w):.3f}, noise var: {self.noise_var}'


class LogisticTask:
    """
    Classification task with labels H_{1/2}(logistic(w^T x))
    """

    family = TaskFamily.LOGISTIC
    noise_var = 0.0

    def __init__(self, w: np.ndarray):
        self.w = np.asarray(w, dtype=np.float64)
        assert abs(np.linalg.norm(self.w) - 1) <= 1e-9, f'Logistic task weights must be unit, |w| = {np.linalg.norm(w)}'

    @property
    def dim(self) -> int:
        return len(self.w)

    @property
    def parameters(self) -> np.ndarray:
        return self.w

    def labels(self, xs: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        return logistic_label(self, xs)

    def save(self) -> Dict[str, Any]:
        return {'family': self.family.value, 'w': self.w.tolist()}

    def __str__(self) -> str:
        return f'Logistic Task - w: {np.round(self.w, 3)}'


class MlpTask:
    """
    Nonlinear regression task y = w_2^T ReLU(W_1 x) with the parameters on one joint sphere or a sphere per layer
    """

    noise_var = 0.0

    def __init__(self, w1: np.ndarray, w2: np.ndarray, scheme: MlpScheme):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.scheme = scheme

        assert self.w1.shape == (len(self.w2), len(self.w2)), \
            f'First layer shape {self.w1.shape} does not match readout length {len(self.w2)}'
        if scheme == MlpScheme.JOINT_SPHERE:
            assert abs(np.linalg.norm(self.parameters) - 1) <= 1e-9, \
                f'Joint sphere parameters must be unit, norm is {np.linalg.norm(self.parameters)}'
        else:
            assert abs(np.linalg.norm(self.w1) - 1) <= 1e-9 and abs(np.linalg.norm(self.w2) - 1) <= 1e-9, \
                f'Per layer parameters must be unit, norms are {np.linalg.norm(self.w1)} and {np.linalg.norm(self.w2)}'

    @property
    def family(self) -> TaskFamily:
        return TaskFamily.MLP_JOINT if self.scheme == MlpScheme.JOINT_SPHERE else TaskFamily.MLP_PER_LAYER

    @property
    def dim(self) -> int:
        return len(self.w2)

    @property
    def parameters(self) -> np.ndarray:
        """The parameter vector theta = (vec(W_1), w_2)"""
        return np.concatenate((self.w1.ravel(), self.w2))

    def labels(self, xs: np.ndarray, noise: Optional[np.ndarray] = None) -> np.ndarray:
        return mlp_label(self, xs)

    def save(self) -> Dict[str, Any]:
        return {'family': self.family.value, 'w1': self.w1.tolist(), 'w2': self.w2.tolist()}

    def __str__(self) -> str:
        return f'MLP Task ({self.scheme.value}) - |W1|: {np.linalg.norm(self.w1):.3f}, ' \
               f'|w2|: {np.linalg.norm(self.w2):.3f}'


Task = Union[LinearTask, LogisticTask, MlpTask]


def _check_dim(task: Task, xs: np.ndarray, operation: str) -> np.ndarray:
    matrix = as_matrix(xs)
    if matrix.shape[1] != task.dim:
        raise ValueError(f'{operation}: input dimension {matrix.shape[1]} does not match task dimension {task.dim}')
    return matrix


def linear_label(task: LinearTask, x: np.ndarray, rng: Optional[RngStream] = None,
                 noise: Optional[np.ndarray] = None) -> Union[float, np.ndarray]:
    """
    Linear label w^T x + epsilon, with epsilon either given (recorded noise) or drawn from N(0, sigma^2)

    :param task: The linear task
    :param x: Input vector or matrix of input rows
    :param rng: The random number stream for the label noise
    :param noise: Recorded noise draws
    :return: The label or vector of labels
    """
    matrix = _check_dim(task, x, 'linear_label')
    labels = matrix @ task.w
    if noise is not None:
        labels = labels + noise
    elif task.noise_var > 0:
        assert rng is not None, 'Noisy linear labels require a random number stream'
        labels = labels + rng.normal(0, np.sqrt(task.noise_var), len(labels))
    return float(labels[0]) if np.ndim(x) == 1 else labels


def logistic_label(task: LogisticTask, x: np.ndarray) -> Union[int, np.ndarray]:
    """
    Thresholded logistic label, 1 if logistic(w^T x) >= 1/2 (equivalently w^T x >= 0) else 0

    :param task: The logistic task
    :param x: Input vector or matrix of input rows
    :return: The label or vector of labels
    """
    matrix = _check_dim(task, x, 'logistic_label')
    labels = (matrix @ task.w >= 0).astype(np.float64)
    return int(labels[0]) if np.ndim(x) == 1 else labels


def mlp_label(task: MlpTask, x: np.ndarray) -> Union[float, np.ndarray]:
    """
    One hidden layer network label w_2^T ReLU(W_1 x)

    :param task: The network task
    :param x: Input vector or matrix of input rows
    :return: The label or vector of labels
    """
    matrix = _check_dim(task, x, 'mlp_label')
    labels = np.maximum(matrix @ task.w1.T, 0) @ task.w2
    return float(labels[0]) if np.ndim(x) == 1 else labels


def mlp_input_dim(parameter_dim: int, scheme: MlpScheme) -> int:
    """
    Input dimension d of a network from the dimension of its parameter sphere

    :param parameter_dim: Dimension of the joint sphere (d^2 + d) or of the first layer sphere (d^2)
    :param scheme: The sphere scheme
    :return: The input dimension
    """
    if scheme == MlpScheme.JOINT_SPHERE:
        dim = (isqrt(1 + 4 * parameter_dim) - 1) // 2
        if dim * dim + dim != parameter_dim:
            raise ValueError(f'Joint sphere dimension {parameter_dim} is not d^2 + d')
    else:
        dim = isqrt(parameter_dim)
        if dim * dim != parameter_dim:
            raise ValueError(f'First layer sphere dimension {parameter_dim} is not d^2')
    return dim


def readout_region(region: Region, dim: int) -> Region:
    """The region of the same angles as the first layer region on the readout sphere"""
    if isinstance(region, BandSpec):
        return BandSpec(dim, region.start_angle, region.width)
    return CapSpec(dim, region.upper_angle)


def sample_mlp_task(rng: RngStream, spec: Region, scheme: MlpScheme, readout_spec: Optional[Region] = None) -> MlpTask:
    return sample_mlp_tasks(rng, spec, scheme, 1, readout_spec)[0]


def sample_mlp_tasks(rng: RngStream, spec: Region, scheme: MlpScheme, size: int,
                     readout_spec: Optional[Region] = None) -> List[MlpTask]:
    """
    Samples one hidden layer network tasks, for the joint sphere the region covers the d^2 + d parameters, for per
        layer spheres the region covers vec(W_1) and the readout region covers w_2, by default the readout
        is drawn from the region of the same angles (cap or band) in the input dimension

    :param rng: The random number stream
    :param spec: The parameter region
    :param scheme: The sphere scheme
    :param size: The number of tasks
    :param readout_spec: The readout region for per layer spheres
    :return: List of tasks
    """
    dim = mlp_input_dim(spec.dim, scheme)
    parameters = spec.sample(rng, size)
    if scheme == MlpScheme.JOINT_SPHERE:
        return [MlpTask(theta[:dim * dim].reshape(dim, dim), theta[dim * dim:], scheme) for theta in parameters]

    if readout_spec is None:
        readout_spec = readout_region(spec, dim)
    if readout_spec.dim != dim:
        raise ValueError(f'Readout sphere dimension {readout_spec.dim} does not match input dimension {dim}')
    readouts = readout_spec.sample(rng, size)
    return [MlpTask(w1.reshape(dim, dim), w2, scheme) for w1, w2 in zip(parameters, readouts)]


class TaskPool:
    """
    Finite set of tasks drawn once from a cap, episodes select tasks uniformly with replacement
    """

    def __init__(self, tasks: List[Task]):
        assert len(tasks) >= 1, 'A task pool requires at least one task'
        self.tasks = tuple(tasks)

    @property
    def N(self) -> int:
        return len(self.tasks)

    @property
    def dim(self) -> int:
        return self.tasks[0].dim

    def draw_indices(self, rng: RngStream, size: int) -> np.ndarray:
        return rng.integers(0, self.N, size)

    def draw(self, rng: RngStream, size: int) -> List[Task]:
        return [self.tasks[index] for index in self.draw_indices(rng, size)]

    def weights(self) -> np.ndarray:
        """The pool task parameters as a matrix (N x parameter dim)"""
        return np.stack([task.parameters for task in self.tasks])

    def save(self) -> Dict[str, Any]:
        return {'N': self.N, 'tasks': [task.save() for task in self.tasks]}


def make_tasks(rng: RngStream, family: TaskFamily, region: Region, size: int, noise_var: float = 0.0,
               readout_region: Optional[Region] = None) -> List[Task]:
    """
    Draws tasks of a family from a region of the parameter sphere

    :param rng: The random number stream
    :param family: The task family
    :param region: The cap or band of the task parameters
    :param size: The number of tasks
    :param noise_var: The label noise variance (linear tasks only)
    :param readout_region: The readout region for per layer network tasks
    :return: List of tasks
    """
    if family == TaskFamily.LINEAR:
        return [LinearTask(w, noise_var) for w in region.sample(rng, size)]
    elif family == TaskFamily.LOGISTIC:
        return [LogisticTask(w / np.linalg.norm(w)) for w in region.sample(rng, size)]
    elif family == TaskFamily.MLP_JOINT:
        return sample_mlp_tasks(rng, region, MlpScheme.JOINT_SPHERE, size)
    elif family == TaskFamily.MLP_PER_LAYER:
        return sample_mlp_tasks(rng, region, MlpScheme.PER_LAYER_SPHERES, size, readout_region)
    else:
        raise ValueError(f'Unknown task family ({family})')


def make_task_pool(rng: RngStream, spec: CapSpec, N: int, family: TaskFamily = TaskFamily.LINEAR,
                   noise_var: float = 0.0, readout_spec: Optional[CapSpec] = None) -> TaskPool:
    """
    Draws the finite pretraining task pool

    :param rng: The random number stream
    :param spec: The pretraining cap
    :param N: The number of tasks
    :param family: The task family
    :param noise_var: The label noise variance
    :param readout_spec: The readout cap of per layer network tasks
    :return: The task pool
    """
    if N < 1:
        raise ValueError(f'Task pool size must be at least 1, got {N}')
    return TaskPool(make_tasks(rng, family, spec, N, noise_var, readout_spec))


class TaskSource(ABC):
    """Source of the task of each episode"""

    def __init__(self, name: str):
        self.name = name

    @property
    @abstractmethod
    def dim(self) -> int:
        """Input dimension of the tasks"""
        pass

    @abstractmethod
    def draw(self, rng: RngStream, size: int) -> List[Task]:
        """Draws the tasks of a number of episodes"""
        pass


class ContinuousTaskSource(TaskSource):
    """A fresh task is drawn for every episode from a cap or band (the N = infinity regime)"""

    def __init__(self, family: TaskFamily, region: Region, noise_var: float = 0.0,
                 readout_region: Optional[Region] = None):
        TaskSource.__init__(self, f'Continuous {family.value}')
        self.family = family
        self.region = region
        self.noise_var = noise_var
        self.readout_region = readout_region

    @property
    def dim(self) -> int:
        if self.family == TaskFamily.MLP_JOINT:
            return mlp_input_dim(self.region.dim, MlpScheme.JOINT_SPHERE)
        elif self.family == TaskFamily.MLP_PER_LAYER:
            return mlp_input_dim(self.region.dim, MlpScheme.PER_LAYER_SPHERES)
        return self.region.dim

    def draw(self, rng: RngStream, size: int) -> List[Task]:
        return make_tasks(rng, self.family, self.region, size, self.noise_var, self.readout_region)


class PoolTaskSource(TaskSource):
    """Tasks are drawn uniformly with replacement from a finite pool"""

    def __init__(self, pool: TaskPool):
        TaskSource.__init__(self, f'Pool of {pool.N}')
        self.pool = pool

    @property
    def dim(self) -> int:
        return self.pool.dim

    def draw(self, rng: RngStream, size: int) -> List[Task]:
        return self.pool.draw(rng, size)


class FixedTaskSource(TaskSource):
    """Every episode uses the same task"""

    def __init__(self, task: Task):
        TaskSource.__init__(self, 'Fixed')
        self.task = task

    @property
    def dim(self) -> int:
        return self.task.dim

    def draw(self, rng: RngStream, size: int) -> List[Task]:
        return [self.task] * size


def full_sphere(dim: int) -> CapSpec:
    return CapSpec(dim, pi)
