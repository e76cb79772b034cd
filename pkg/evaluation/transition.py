"""
Trains one transformer per training angle and measures the loss over every test band, the transition angle is where
    the loss stops depending on the test angle
"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

from src.extra.harness import RunManifest, collect, nsr_table, run_sweep, transitions
from src.extra.io import frame_records, results_filename, write_csv, write_json
from src.extra.pprint import print_records, print_transitions
from src.extra.visualise import emit_plots

if TYPE_CHECKING:
    from typing import Any, Dict, List, Tuple

    from src.extra.config import ExperimentConfig


def figure_dir(config: ExperimentConfig) -> str:
    return os.path.join(config.output_dir, 'figs')


def transition_results(config: ExperimentConfig, manifest: RunManifest) -> Tuple[Dict[str, Any], List[str]]:
    """
    Writes the records, the NSR table and the transitions of the completed runs

    :param config: The experiment config
    :param manifest: The run manifest
    :return: The summary and the csv filenames
    """
    records = collect(config, manifest, 'eval')
    records_file = write_csv(results_filename('records', config, 'csv'), records.to_dict('records'))

    nsr_rows = nsr_table(records[records['predictor'] == 'transformer'])
    nsr_file = write_csv(results_filename('nsr', config, 'csv'), nsr_rows.to_dict('records'))
    found = transitions(nsr_rows)

    print_records(records)
    print_transitions(found)
    summary = {'config hash': config.config_hash(), 'transitions': found, 'nsr': frame_records(nsr_rows),
               'failed runs': manifest.failed()}
    return summary, [records_file, nsr_file]


def run_transition(config: ExperimentConfig, force: bool = False) -> Dict[str, Any]:
    """
    Transition experiment: trains a model per training angle (and per model of the other grids), evaluates every test
        band, then writes the records, NSR table, transition angles and plots

    :param config: The experiment config
    :param force: If to rerun completed runs
    :return: The summary
    """
    print(f'Transition experiment for training angles {config.train_angles} and test angles {config.test_angles}')
    manifest = run_sweep(config, force)
    summary, csvs = transition_results(config, manifest)
    write_json(results_filename('summary', config), summary)
    emit_plots(csvs, figure_dir(config))
    return summary
