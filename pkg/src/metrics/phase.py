"""Transition statistic over test angles, phase classification and transition detection over the training angles"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from src.extra.result import Phase

if TYPE_CHECKING:
    from typing import List, Mapping, Optional

PHASE_THRESHOLD = 1e-2
NSR_THRESHOLD = 0.5


def nsr(losses_by_delta: Mapping[float, float]) -> float:
    """
    Population standard deviation over the test angles of the mean losses divided by their mean, close to zero when
        the loss does not depend on the test angle

    :param losses_by_delta: Mean loss of each test angle
    :return: The noise to signal ratio
    """
    losses = np.array(list(losses_by_delta.values()), dtype=np.float64)
    if len(losses) < 2:
        raise ValueError(f'NSR requires at least 2 test angles, got {len(losses)}')
    mean = np.mean(losses)
    if mean == 0:
        raise ValueError('NSR is undefined when every loss is zero')
    return float(np.std(losses) / mean)


def classify_phase(in_dist_norm: float, ood_norm: float, threshold: float = PHASE_THRESHOLD) -> Phase:
    """
    Phase of a model from its normalised in distribution and out of distribution losses

    :param in_dist_norm: The normalised in distribution loss
    :param ood_norm: The normalised out of distribution loss
    :param threshold: The threshold between low and high losses
    :return: The phase
    """
    if in_dist_norm >= threshold:
        return Phase.IWL
    elif ood_norm >= threshold:
        return Phase.IN_DIST_ICL
    else:
        return Phase.OOD_ICL


class Transition:
    """
    Transition angle with the angles at which the NSR crossed the threshold
    """

    def __init__(self, phi_c: Optional[float], crossings: List[float], monotone: bool):
        self.phi_c = phi_c
        self.crossings = crossings
        self.monotone = monotone

    def save(self):
        return {'phi_c': self.phi_c, 'crossings': self.crossings, 'monotone': self.monotone}

    def __str__(self) -> str:
        return f'Transition - phi_c: {self.phi_c}, monotone: {self.monotone}'


def detect_transition(nsr_by_phi: Mapping[float, float], nsr_threshold: float = NSR_THRESHOLD) -> Transition:
    """
    Smallest training angle from which the NSR stays below the threshold for every larger angle

    :param nsr_by_phi: NSR of each training angle
    :param nsr_threshold: The NSR threshold
    :return: The transition with phi_c None if the final NSR is not below the threshold
    """
    phis = sorted(nsr_by_phi)
    below = [nsr_by_phi[phi] < nsr_threshold for phi in phis]

    phi_c = None
    for phi, is_below in zip(reversed(phis), reversed(below)):
        if not is_below:
            break
        phi_c = phi

    crossings = [phi for phi, was_below, is_below in zip(phis[1:], below, below[1:]) if was_below != is_below]
    # Monotone if the NSR is above the threshold up to some angle and below it after
    return Transition(phi_c, crossings, below == sorted(below))
