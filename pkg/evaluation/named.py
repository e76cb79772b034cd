"""
The other experiments: depth and dimension sweeps, task radius, context length, classification, nonlinear regression,
    input diversity, the perpendicular zeroing probe and the interpolation between pool tasks
"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

from evaluation.transition import figure_dir, transition_results
from src.extra.harness import RunManifest, build_run_specs, collect, probe_traces, run_sweep
from src.extra.io import read_json, results_filename, write_csv, write_json
from src.extra.visualise import emit_plots

if TYPE_CHECKING:
    from typing import Any, Dict, List

    from src.extra.config import ExperimentConfig

# Experiments that only differ from the transition experiment in their config grids
TRANSITION_LIKE = ('depth_sweep', 'dim_sweep', 'classification', 'nonlinear', 'x_diversity')


def _excess_rows(config: ExperimentConfig, manifest: RunManifest) -> List[Dict[str, Any]]:
    rows = []
    for run in build_run_specs(config):
        if manifest.is_completed(run.run_id):
            summary = read_json(manifest.runs[run.run_id]['paths']['summary'])
            rows.append({'run_id': run.run_id, 'train_phi': run.phi, 'N': run.save()['N'], 'seed': run.seed,
                         'excess': summary['excess'], 'normalized_excess': summary['normalized excess']})
    return rows


def run_named(config: ExperimentConfig, force: bool = False) -> Dict[str, Any]:
    """
    Runs a named experiment: trains the runs of the config, writes the transition results and the experiment
        specific curves

    :param config: The experiment config
    :param force: If to rerun completed runs
    :return: The summary
    """
    print(f'{config.kind} experiment')
    manifest = run_sweep(config, force)
    summary, csvs = transition_results(config, manifest)

    if config.kind == 'radius':
        csvs.append(write_csv(results_filename('radius', config, 'csv'),
                              collect(config, manifest, 'radius').to_dict('records')))
    elif config.kind == 'context_length':
        csvs.append(write_csv(results_filename('context', config, 'csv'),
                              collect(config, manifest, 'context').to_dict('records')))
    elif config.kind == 'spec2_probe':
        csvs.append(write_csv(results_filename('traces', config, 'csv'),
                              probe_traces(config, manifest).to_dict('records')))
    elif config.kind == 'dmmse_interp':
        csvs.append(write_csv(results_filename('path', config, 'csv'),
                              collect(config, manifest, 'path').to_dict('records')))
        excess = _excess_rows(config, manifest)
        csvs.append(write_csv(results_filename('excess', config, 'csv'), excess))
        summary['excess'] = excess
    elif config.kind not in TRANSITION_LIKE:
        raise ValueError(f'Unknown named experiment ({config.kind})')

    summary['files'] = csvs
    write_json(results_filename('summary', config), summary)
    emit_plots([csv for csv in csvs if not os.path.basename(csv).startswith('excess')], figure_dir(config))
    return summary
