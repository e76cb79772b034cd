"""
Phase diagram over the training angle and the number of pretraining tasks
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from evaluation.transition import figure_dir
from src.extra.harness import collect, phase_cells, phase_heatmaps, run_sweep
from src.extra.io import results_filename, write_csv, write_json
from src.extra.pprint import print_phase_cells
from src.extra.visualise import emit_plots

if TYPE_CHECKING:
    from typing import Any, Dict

    from src.extra.config import ExperimentConfig


def run_phase_diagram(config: ExperimentConfig, force: bool = False) -> Dict[str, Any]:
    """
    Trains the (phi, N) grid with finite task pools, averages the normalised losses of the first (in distribution)
        and last (out of distribution) test bands over the seeds and classifies the phase of every cell

    :param config: The experiment config
    :param force: If to rerun completed runs
    :return: The summary
    """
    print(f'Phase diagram for training angles {config.train_angles} and number of tasks {config.num_tasks} with '
          f'{len(config.seeds)} replicates')
    manifest = run_sweep(config, force)
    records = collect(config, manifest, 'eval')
    records_file = write_csv(results_filename('records', config, 'csv'), records.to_dict('records'))

    cells = phase_cells(records[records['predictor'] == 'transformer'])
    print_phase_cells(cells)
    phases_file = write_csv(results_filename('phases', config, 'csv'), [cell.save() for cell in cells])
    heatmap_files = [write_csv(results_filename(f'heatmap_{name}', config, 'csv'),
                               heatmap.reset_index().to_dict('records'))
                     for name, heatmap in phase_heatmaps(cells, config).items()]

    summary = {'config hash': config.config_hash(), 'phases': [cell.save() for cell in cells],
               'failed runs': manifest.failed(), 'files': [records_file, phases_file] + heatmap_files}
    write_json(results_filename('summary', config), summary)
    emit_plots(heatmap_files, figure_dir(config))
    return summary
