"""AdamW with decoupled weight decay"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from src.core.core import NumericalError

if TYPE_CHECKING:
    from typing import Any, Dict, Optional, Tuple

    ModelParams = Dict[str, np.ndarray]


class OptimizerState:
    """
    Moment accumulators and hyperparameters of AdamW
    """

    def __init__(self, params: ModelParams, learning_rate: float = 3e-4, weight_decay: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        assert 0 <= beta1 < 1 and 0 <= beta2 < 1, f'Betas ({beta1}, {beta2}) must be in [0, 1)'
        assert learning_rate > 0 and weight_decay >= 0, \
            f'Learning rate {learning_rate} must be positive and weight decay {weight_decay} non-negative'

        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

        self.step = 0
        self.first_moments = {name: np.zeros_like(value) for name, value in params.items()}
        self.second_moments = {name: np.zeros_like(value) for name, value in params.items()}

    def hyperparameters(self) -> Dict[str, Any]:
        return {'learning rate': self.learning_rate, 'weight decay': self.weight_decay, 'beta1': self.beta1,
                'beta2': self.beta2, 'eps': self.eps, 'step': self.step}

    @staticmethod
    def load(hyperparameters: Dict[str, Any], first_moments: ModelParams,
             second_moments: ModelParams) -> OptimizerState:
        state = OptimizerState(first_moments, hyperparameters['learning rate'], hyperparameters['weight decay'],
                               hyperparameters['beta1'], hyperparameters['beta2'], hyperparameters['eps'])
        state.step = hyperparameters['step']
        state.first_moments = dict(first_moments)
        state.second_moments = dict(second_moments)
        return state

    def __str__(self) -> str:
        return f'AdamW - step: {self.step}, lr: {self.learning_rate}, weight decay: {self.weight_decay}'


def adamw_step(params: ModelParams, grads: ModelParams, state: OptimizerState, learning_rate: Optional[float] = None,
               weight_decay: Optional[float] = None) -> Tuple[ModelParams, OptimizerState]:
    """
    One AdamW update in place, the parameters are decayed by (1 - lr * wd) before the bias corrected Adam step

    :param params: The parameters
    :param grads: The gradient of each parameter
    :param state: The optimiser state
    :param learning_rate: Overrides the learning rate of the state
    :param weight_decay: Overrides the weight decay of the state
    :return: The updated parameters and optimiser state
    """
    learning_rate = state.learning_rate if learning_rate is None else learning_rate
    weight_decay = state.weight_decay if weight_decay is None else weight_decay

    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ValueError(f'Gradient of {name} has shape {grad.shape}, expected {params[name].shape}')
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f'Non-finite gradient for {name} at step {state.step + 1}')

    state.step += 1
    first_correction = 1 - state.beta1 ** state.step
    second_correction = 1 - state.beta2 ** state.step
    for name, param in params.items():
        grad = grads[name]
        first, second = state.first_moments[name], state.second_moments[name]

        param *= 1 - learning_rate * weight_decay
        first *= state.beta1
        first += (1 - state.beta1) * grad
        second *= state.beta2
        second += (1 - state.beta2) * grad * grad
        param -= learning_rate * (first / first_correction) / (np.sqrt(second / second_correction) + state.eps)

    return params, state
