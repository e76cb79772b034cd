"""
Tests the AdamW update
"""

from __future__ import annotations

import numpy as np
import pytest

from src.core.core import NumericalError
from src.transformer.optimiser import OptimizerState, adamw_step


def test_quadratic_convergence():
    params = {'p': np.zeros(1)}
    state = OptimizerState(params, learning_rate=1e-2, weight_decay=0)
    for _ in range(5000):
        adamw_step(params, {'p': params['p'] - 5}, state)

    print(f'\nAfter {state.step} steps p = {params["p"][0]:.6f}')
    assert abs(params['p'][0] - 5) < 1e-3


def test_first_step_is_learning_rate():
    params = {'p': np.zeros(3)}
    state = OptimizerState(params, learning_rate=0.05, weight_decay=0)
    adamw_step(params, {'p': np.array([3.0, -0.2, 100.0])}, state)
    # The bias corrected first step is lr * sign(g)
    assert np.allclose(params['p'], [-0.05, 0.05, -0.05], atol=1e-6)
    assert state.step == 1


def test_decoupled_weight_decay():
    params = {'p': np.array([2.0, -4.0])}
    state = OptimizerState(params, learning_rate=0.1, weight_decay=0.5)
    adamw_step(params, {'p': np.zeros(2)}, state)
    assert np.allclose(params['p'], [1.9, -3.8], rtol=0, atol=1e-12)

    # The override arguments replace the state values for one step
    adamw_step(params, {'p': np.zeros(2)}, state, learning_rate=0.1, weight_decay=0)
    assert np.allclose(params['p'], [1.9, -3.8], rtol=0, atol=1e-12)


def test_invalid_gradients():
    params = {'p': np.zeros(2)}
    state = OptimizerState(params)
    with pytest.raises(NumericalError):
        adamw_step(params, {'p': np.array([1.0, np.nan])}, state)
    with pytest.raises(ValueError):
        adamw_step(params, {'p': np.zeros(3)}, state)
    assert state.step == 0


def test_state_load():
    params = {'p': np.zeros(2)}
    state = OptimizerState(params, learning_rate=1e-3)
    adamw_step(params, {'p': np.ones(2)}, state)

    loaded = OptimizerState.load(state.hyperparameters(), state.first_moments, state.second_moments)
    assert loaded.step == 1 and loaded.learning_rate == 1e-3
    assert np.array_equal(loaded.first_moments['p'], state.first_moments['p'])
