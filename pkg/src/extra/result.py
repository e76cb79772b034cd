"""Results of the evaluation: loss records per (phi, delta, N, seed) cell and the phase of a (phi, N) cell"""

from __future__ import annotations

import pprint
from enum import Enum
from math import inf, isinf
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import Any, Dict, Optional, Union


class Phase(Enum):
    """
    Phases of in-context learning
    """
    IWL = 'in-weights learning'
    IN_DIST_ICL = 'in-distribution ICL'
    OOD_ICL = 'out-of-distribution ICL'


def num_tasks_value(num_tasks: Union[int, float, str, None]) -> Union[int, float]:
    """
    Parses the number of tasks, infinity (a fresh task per episode) is "inf" in files

    :param num_tasks: Integer, infinity, "inf" or None
    :return: The integer number of tasks or infinity
    """
    if num_tasks is None or num_tasks == 'inf' or (isinstance(num_tasks, float) and isinf(num_tasks)):
        return inf
    return int(num_tasks)


def num_tasks_str(num_tasks: Union[int, float]) -> Union[int, str]:
    return 'inf' if isinf(num_tasks) else int(num_tasks)


class EvalRecord:
    """
    Monte Carlo test loss of one predictor on one cell
    """

    pp = pprint.PrettyPrinter()

    def __init__(self, predictor: str, train_phi: Optional[float], test_delta: float, band_width: float,
                 num_tasks: Union[int, float], seed: Optional[int], context_length: int, radius: float,
                 raw_loss: float, normalized_loss: float, n_episodes: int, stderr: float, noise_var: float = 0.0):
        assert raw_loss >= 0 and stderr >= 0 and normalized_loss >= 0, \
            f'Losses ({raw_loss}, {normalized_loss}) and standard error {stderr} must be non-negative'
        self.predictor = predictor
        self.train_phi = train_phi
        self.test_delta = test_delta
        self.band_width = band_width
        self.num_tasks = num_tasks
        self.seed = seed
        self.context_length = context_length
        self.radius = radius
        self.raw_loss = raw_loss
        self.normalized_loss = normalized_loss
        self.n_episodes = n_episodes
        self.stderr = stderr
        self.noise_var = noise_var

    @property
    def excess_loss(self) -> float:
        """Loss above the noise floor"""
        return self.raw_loss - self.noise_var

    def save(self) -> Dict[str, Any]:
        """
        The record as a csv row, angles are in degrees

        :return: Dictionary of the column values
        """
        return {
            'predictor': self.predictor, 'train_phi': self.train_phi, 'test_delta': self.test_delta,
            'band_width': self.band_width, 'N': num_tasks_str(self.num_tasks), 'seed': self.seed,
            'context_length': self.context_length, 'radius': self.radius, 'noise_var': self.noise_var,
            'raw_loss': self.raw_loss, 'excess_loss': self.excess_loss, 'normalized_loss': self.normalized_loss,
            'n_episodes': self.n_episodes, 'stderr': self.stderr
        }

    @staticmethod
    def load(row: Dict[str, Any]) -> EvalRecord:
        return EvalRecord(row['predictor'], row['train_phi'], row['test_delta'], row['band_width'],
                          num_tasks_value(row['N']), row['seed'], int(row['context_length']), row['radius'],
                          row['raw_loss'], row['normalized_loss'], int(row['n_episodes']), row['stderr'],
                          row.get('noise_var', 0.0))

    def pretty_print(self):
        self.pp.pprint(self.save())

    def __str__(self) -> str:
        return f'{self.predictor} - phi: {self.train_phi}, delta: {self.test_delta}, loss: {self.raw_loss:.4f} ' \
               f'+- {self.stderr:.4f}'


class PhaseCell:
    """
    Normalised in distribution and out of distribution losses of a (phi, N) cell with its phase
    """

    def __init__(self, phi: float, num_tasks: Union[int, float], in_dist_loss: float, ood_loss: float, phase: Phase):
        self.phi = phi
        self.num_tasks = num_tasks
        self.in_dist_loss = in_dist_loss
        self.ood_loss = ood_loss
        self.phase = phase

    def save(self) -> Dict[str, Any]:
        return {'phi': self.phi, 'N': num_tasks_str(self.num_tasks), 'in_dist_loss': self.in_dist_loss,
                'ood_loss': self.ood_loss, 'phase': self.phase.name}

    def __str__(self) -> str:
        return f'Phase Cell - phi: {self.phi}, N: {num_tasks_str(self.num_tasks)}, phase: {self.phase.value}'
