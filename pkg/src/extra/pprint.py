"""
Pretty print functions
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import Any, Dict, List

    import pandas as pd

    from src.extra.result import PhaseCell


def print_records(records: pd.DataFrame, predictor: str = 'transformer'):
    """
    Prints the raw loss of a predictor as a table of training angles by test angles

    :param records: The evaluation records
    :param predictor: The predictor name
    """
    table = records[records['predictor'] == predictor].pivot_table(index='train_phi', columns='test_delta',
                                                                   values='raw_loss', aggfunc='mean')
    print(f'\t\t{predictor} loss (rows: train phi, columns: test delta)')
    print(f"{'phi':>6}|" + '|'.join(f'{delta:^8g}' for delta in table.columns))
    for phi, row in table.iterrows():
        print(f'{phi:>6g}|' + '|'.join(f'{loss:^8.4f}' for loss in row))
    print()


def print_transitions(transitions: List[Dict[str, Any]]):
    """
    Prints the transition angle of every model

    :param transitions: List of transitions with their model columns
    """
    print('Transitions')
    for transition in transitions:
        model = ', '.join(f'{key}: {value}' for key, value in transition.items()
                          if key not in ('phi_c', 'crossings', 'monotone'))
        print(f"{model} - phi_c: {transition['phi_c']}, crossings: {transition['crossings']}"
              f"{'' if transition['monotone'] else ' (non-monotone)'}")
    print()


def print_phase_cells(cells: List[PhaseCell]):
    """
    Prints the phase of every (phi, N) cell

    :param cells: List of phase cells
    """
    print(f"{'phi':>6}|{'N':^6}|{'in dist':^10}|{'ood':^10}| Phase")
    for cell in cells:
        saved = cell.save()
        print(f"{cell.phi:>6g}|{saved['N']:^6}|{cell.in_dist_loss:^10.4f}|{cell.ood_loss:^10.4f}| {cell.phase.value}")
    print()
