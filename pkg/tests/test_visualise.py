"""
Tests that every results file plots and that identical results give identical svg files
"""

from __future__ import annotations

import os

import pytest

from src.extra.io import write_csv
from src.extra.visualise import emit_plots


def results_files(folder: str):
    records = [{'predictor': predictor, 'family': 'linear', 'dim': 3, 'layers': 2, 'noise_var': 0.0, 'N': 'inf',
                'variant': 'normal', 'train_phi': phi, 'seed': 0, 'test_delta': delta, 'radius': 1.0,
                'raw_loss': 0.1 + delta / phi, 'normalized_loss': (0.1 + delta / phi) / 4}
               for predictor in ('transformer', 'ols') for phi in (30.0, 180.0) for delta in (0.0, 90.0, 175.0)]
    nsr = [{'family': 'linear', 'dim': 3, 'layers': 2, 'noise_var': 0.0, 'N': 'inf', 'variant': 'normal',
            'train_phi': phi, 'seed': seed, 'nsr': value}
           for seed in (0, 'mean') for phi, value in ((30.0, 0.9), (180.0, 0.1))]
    phases = [{'N': '16', 30.0: 'IWL', 180.0: 'OOD_ICL'}, {'N': 'inf', 30.0: 'IN_DIST_ICL', 180.0: 'OOD_ICL'}]
    losses = [{'N': '16', 30.0: 0.5, 180.0: 1e-3}, {'N': 'inf', 30.0: 1e-3, 180.0: 1e-4}]
    context = [{'run_id': 'run', 'train_phi': 60.0, 'k': k, 'model_loss': 1 / k, 'ols_loss': 2 / k}
               for k in (1, 2, 4)]
    path = [{'run_id': 'run', 'train_phi': 60.0, 'N': 16, 'alpha': alpha, 'model_loss': 0.2, 'dmmse_loss': alpha}
            for alpha in (0.0, 0.5, 1.0)]
    traces = [{'step': step, 'run a': 1 / step, 'run b': 2 / step} for step in range(1, 6)]

    return [write_csv(os.path.join(folder, f'{name}.csv'), rows) for name, rows in (
        ('records', records), ('nsr', nsr), ('heatmap_phase', phases), ('heatmap_in_dist_loss', losses),
        ('context', context), ('path', path), ('traces', traces))]


def test_emit_plots_deterministic(tmp_path):
    filenames = results_files(str(tmp_path / 'csv'))
    first = emit_plots(filenames, str(tmp_path / 'first'))
    second = emit_plots(filenames, str(tmp_path / 'second'))

    assert len(first) == len(second) >= len(filenames)
    assert all(filename.endswith('.svg') for filename in first)
    for first_filename, second_filename in zip(first, second):
        assert os.path.basename(first_filename) == os.path.basename(second_filename)
        with open(first_filename, 'rb') as file_a, open(second_filename, 'rb') as file_b:
            assert file_a.read() == file_b.read(), f'{first_filename} differs between runs'


def test_emit_plots_invalid(tmp_path):
    empty = tmp_path / 'empty.csv'
    empty.write_text('')
    with pytest.raises(ValueError):
        emit_plots([str(empty)], str(tmp_path))

    header = tmp_path / 'header.csv'
    header.write_text('predictor,train_phi,test_delta,raw_loss\n')
    with pytest.raises(ValueError):
        emit_plots([str(header)], str(tmp_path))

    unknown = tmp_path / 'unknown.csv'
    unknown.write_text('a,b\n1,2\n')
    with pytest.raises(ValueError):
        emit_plots([str(unknown)], str(tmp_path))
