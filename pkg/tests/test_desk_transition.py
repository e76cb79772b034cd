"""
Trains the desk preset of the transition experiment, several hours on a desktop cpu

Run with: pytest -m slow
"""

from __future__ import annotations

import pytest

from evaluation.transition import run_transition
from src.extra.config import apply_overrides, get_config


@pytest.mark.slow
def test_desk_transition(tmp_path):
    config = apply_overrides(get_config('desk', 'transition'), output_dir=str(tmp_path), workers=4)
    summary = run_transition(config)

    nsr_by_phi = {row['train_phi']: row['nsr'] for row in summary['nsr'] if str(row['seed']) == 'mean'}
    print(f'\nNSR: {nsr_by_phi}')
    assert nsr_by_phi[30] >= 0.5 and nsr_by_phi[60] >= 0.5
    assert nsr_by_phi[180] < 0.5

    phi_c = next(found['phi_c'] for found in summary['transitions'] if str(found['seed']) == 'mean')
    if phi_c is None or not 90 <= phi_c <= 165:
        print(f'Warning: transition angle {phi_c} is outside of [90, 165]')
