"""
Sweep orchestration: the runs of an experiment config, the run manifest, the bounded worker pool that trains and
    evaluates the runs and the aggregation of the per run results
"""

from __future__ import annotations

import glob
import hashlib
import itertools
import os
from datetime import datetime
from math import isinf, radians
from multiprocessing import Pool
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.baselines.predictor import DmmsePredictor, TransformerPredictor, make_predictor
from src.core.core import RngStream, exponential_moving_average
from src.core.episode import InputDistribution, InputKind
from src.core.sphere import CapSpec, canonical_pole
from src.core.task import ContinuousTaskSource, PoolTaskSource, TaskFamily, full_sphere, make_task_pool
from src.extra.config import ExperimentConfig
from src.extra.io import read_csv, read_json, write_csv, write_json
from src.extra.result import EvalRecord, PhaseCell, num_tasks_str, num_tasks_value
from src.metrics import losses
from src.metrics.phase import classify_phase, detect_transition, nsr
from src.transformer.checkpoint import read_checkpoint_extra
from src.transformer.training import ESTIMATOR_STREAM, EVAL_STREAM, POOL_STREAM, train

if TYPE_CHECKING:
    from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

    from src.baselines.predictor import Predictor
    from src.core.task import TaskSource

    ModelParams = Dict[str, np.ndarray]
    Evaluator = Callable[[ModelParams, int], Dict[str, Any]]

MANIFEST_FILENAME = 'manifest.json'
RUN_STATUSES = ('pending', 'running', 'completed', 'failed')
PROBE_VARIANTS = ('normal', 'zeroed')

# Columns identifying the model of a record, the training angle and test angle are the sweep axes
GROUP_COLUMNS = ['predictor', 'family', 'dim', 'layers', 'noise_var', 'N', 'variant']


class RunSpec:
    """
    One training run of a sweep
    """

    def __init__(self, phi: float, num_tasks: Union[int, float], dim: int, layers: int, noise_var: float,
                 family: str, seed: int, variant: str = 'normal'):
        self.phi = phi
        self.num_tasks = num_tasks
        self.dim = dim
        self.layers = layers
        self.noise_var = noise_var
        self.family = family
        self.seed = seed
        self.variant = variant

    @property
    def cell_id(self) -> str:
        """Id of the run without its variant"""
        return f'{self.family}_phi{self.phi:g}_N{num_tasks_str(self.num_tasks)}_d{self.dim}_L{self.layers}_' \
               f'noise{self.noise_var:g}_seed{self.seed}'

    @property
    def run_id(self) -> str:
        return self.cell_id if self.variant == 'normal' else f'{self.cell_id}_{self.variant}'

    @property
    def stream_base(self) -> int:
        """Offset of the run stream ids, 16 streams are reserved for each cell and shared by its variants"""
        digest = hashlib.sha256(self.cell_id.encode('utf-8')).hexdigest()
        return int(digest[:12], 16) * 16

    @property
    def task_family(self) -> TaskFamily:
        return TaskFamily(self.family)

    @property
    def parameter_dim(self) -> int:
        """Dimension of the sphere of the task parameters"""
        if self.task_family == TaskFamily.MLP_JOINT:
            return self.dim * self.dim + self.dim
        elif self.task_family == TaskFamily.MLP_PER_LAYER:
            return self.dim * self.dim
        return self.dim

    def save(self) -> Dict[str, Any]:
        return {'phi': self.phi, 'N': num_tasks_str(self.num_tasks), 'dim': self.dim, 'layers': self.layers,
                'noise var': self.noise_var, 'family': self.family, 'seed': self.seed, 'variant': self.variant}

    @staticmethod
    def load(run_spec: Dict[str, Any]) -> RunSpec:
        return RunSpec(run_spec['phi'], num_tasks_value(run_spec['N']), run_spec['dim'], run_spec['layers'],
                       run_spec['noise var'], run_spec['family'], run_spec['seed'], run_spec.get('variant', 'normal'))

    def __str__(self) -> str:
        return f'Run {self.run_id}'


def build_run_specs(config: ExperimentConfig) -> List[RunSpec]:
    """
    Every run of the config grids, in a fixed order

    :param config: The experiment config
    :return: List of run specs
    """
    variants = PROBE_VARIANTS if config.kind == 'spec2_probe' else ('normal',)
    return [RunSpec(phi, num_tasks, dim, layers, noise_var, family, seed, variant)
            for family, dim, layers, noise_var, num_tasks, phi, seed, variant in itertools.product(
                config.families, config.dims, config.layers, config.noise_vars, config.num_tasks,
                config.train_angles, config.seeds, variants)]


class RunManifest:
    """
    Status of every run of an experiment, only the aggregating process writes it
    """

    def __init__(self, filename: str, config_hash: str, runs: Optional[Dict[str, Dict[str, Any]]] = None):
        self.filename = filename
        self.config_hash = config_hash
        self.runs = runs or {}

    @staticmethod
    def open(config: ExperimentConfig) -> RunManifest:
        """
        Opens the manifest of the config output folder, the runs are reset if the config has changed

        :param config: The experiment config
        :return: The run manifest
        """
        filename = os.path.join(config.output_dir, MANIFEST_FILENAME)
        config_hash = config.config_hash()
        if not os.path.exists(filename):
            return RunManifest(filename, config_hash)

        manifest = read_json(filename)
        if manifest['config hash'] != config_hash:
            print(f'Warning: config hash of {filename} does not match the config, every run is rescheduled')
            return RunManifest(filename, config_hash)
        return RunManifest(filename, config_hash, manifest['runs'])

    def status(self, run_id: str) -> str:
        return self.runs.get(run_id, {}).get('status', 'pending')

    def is_completed(self, run_id: str) -> bool:
        return self.status(run_id) == 'completed'

    def update(self, run_id: str, status: str, **fields):
        """
        Updates the status of a run and saves the manifest

        :param run_id: The run id
        :param status: The new status
        :param fields: Other fields of the run entry (paths, error)
        """
        assert status in RUN_STATUSES, f'Unknown run status ({status})'
        entry = self.runs.setdefault(run_id, {})
        entry.update(fields, status=status)
        entry[f'{status} time'] = datetime.now().isoformat(timespec='seconds')
        self.save()

    def completed(self) -> List[str]:
        return [run_id for run_id, entry in self.runs.items() if entry['status'] == 'completed']

    def failed(self) -> List[str]:
        return [run_id for run_id, entry in self.runs.items() if entry['status'] == 'failed']

    def save(self):
        temporary = f'{self.filename}.tmp'
        write_json(temporary, {'config hash': self.config_hash, 'runs': self.runs})
        os.replace(temporary, self.filename)

    def __str__(self) -> str:
        return f'Run Manifest - completed: {len(self.completed())}, failed: {len(self.failed())}, ' \
               f'total: {len(self.runs)}'


def run_dir(config: ExperimentConfig, run: RunSpec) -> str:
    return os.path.join(config.output_dir, 'runs', run.run_id)


def training_region(config: ExperimentConfig, run: RunSpec) -> CapSpec:
    """Region of the pretraining tasks, the whole sphere when the inputs carry the diversity"""
    if config.input_kind == 'cap':
        return full_sphere(run.parameter_dim)
    return CapSpec(run.parameter_dim, radians(run.phi))


def training_inputs(config: ExperimentConfig, run: RunSpec) -> InputDistribution:
    if config.input_kind == 'cap':
        return InputDistribution(InputKind.CAP_RESTRICTED, CapSpec(run.dim, radians(run.phi)))
    return InputDistribution()


def task_source(config: ExperimentConfig, run: RunSpec) -> Tuple[TaskSource, Optional[Any]]:
    """
    The pretraining task source, a fresh task per episode for infinitely many tasks or a finite pool

    :param config: The experiment config
    :param run: The run
    :return: The task source and the task pool (None for infinitely many tasks)
    """
    region = training_region(config, run)
    readout = None
    if run.task_family == TaskFamily.MLP_PER_LAYER and config.readout_angle is not None:
        readout = CapSpec(run.dim, radians(config.readout_angle))
    if isinf(run.num_tasks):
        return ContinuousTaskSource(run.task_family, region, run.noise_var, readout), None

    pool = make_task_pool(RngStream(run.seed, run.stream_base + POOL_STREAM), region, run.num_tasks,
                          run.task_family, run.noise_var, readout)
    return PoolTaskSource(pool), pool


def latest_checkpoint(folder: str, config_hash: str) -> Optional[str]:
    """
    The latest checkpoint of a run folder written for the config hash, checkpoints of other configs are deleted
        with the outputs of their run

    :param folder: The run folder
    :param config_hash: The experiment config hash
    :return: The checkpoint filename, None if training must start from the beginning
    """
    checkpoints = sorted(glob.glob(os.path.join(folder, 'checkpoint_*.ckpt')))
    stale = [filename for filename in checkpoints if read_checkpoint_extra(filename).get('config hash') != config_hash]
    if stale:
        print(f'Removing {len(stale)} checkpoints of {folder} written for another config')
        clear_run_dir(folder)
        return None
    return checkpoints[-1] if checkpoints else None


def clear_run_dir(folder: str):
    """Deletes the checkpoints, loss trace and results of a run folder"""
    for filename in glob.glob(os.path.join(folder, '*')):
        if os.path.isfile(filename):
            os.remove(filename)


def _eval_rng(run: RunSpec) -> RngStream:
    # Every predictor is evaluated on the same episodes
    return RngStream(run.seed, run.stream_base + EVAL_STREAM)


def band_records(config: ExperimentConfig, run: RunSpec, predictor: Predictor, n_episodes: int) -> List[EvalRecord]:
    """
    Test loss of a predictor on every test band, for input diversity runs the bands restrict the inputs

    :param config: The experiment config
    :param run: The run
    :param predictor: The predictor
    :param n_episodes: The number of episodes per band
    :return: List of evaluation records
    """
    records = []
    for delta in config.test_angles:
        if config.input_kind == 'cap':
            band = losses.evaluation_band(run.dim, delta, config.band_width)
            record = losses.test_loss(predictor, full_sphere(run.parameter_dim),
                                      InputDistribution(InputKind.CAP_RESTRICTED, band), config.context_length,
                                      run.noise_var, n_episodes, _eval_rng(run), run.task_family,
                                      num_tasks=run.num_tasks, seed=run.seed)
            record.train_phi, record.test_delta, record.band_width = run.phi, delta, min(config.band_width, 180 - delta)
        else:
            band = losses.evaluation_band(run.parameter_dim, delta, config.band_width)
            record = losses.test_loss(predictor, band, InputDistribution(), config.context_length, run.noise_var,
                                      n_episodes, _eval_rng(run), run.task_family, run.phi, run.num_tasks, run.seed)
        records.append(record)
    return records


def estimator_predictors(config: ExperimentConfig, run: RunSpec, pool) -> List[Predictor]:
    """The reference estimators of a run, only defined for linear tasks on caps, dmmse requires a finite pool"""
    if run.task_family != TaskFamily.LINEAR or config.input_kind == 'cap':
        return []

    predictors = []
    for name in config.estimators:
        if name == 'dmmse' and pool is None:
            print(f'Skipping dmmse for {run.run_id}, it requires a finite task pool')
            continue
        predictors.append(make_predictor(name, CapSpec(run.dim, radians(run.phi)), pool,
                                         RngStream(run.seed, run.stream_base + ESTIMATOR_STREAM),
                                         config.importance_samples))
    return predictors


def _record_rows(run: RunSpec, records: Iterable[EvalRecord]) -> List[Dict[str, Any]]:
    return [{'run_id': run.run_id, 'family': run.family, 'dim': run.dim, 'layers': run.layers,
             'variant': run.variant, **record.save()} for record in records]


def snapshot_evaluator(config: ExperimentConfig, run: RunSpec) -> Optional[Evaluator]:
    """
    Evaluation during training: the test band losses of the current parameters on the same episodes at every
        snapshot and their NSR

    :param config: The experiment config
    :param run: The run
    :return: The evaluation callback, None if the schedule takes no snapshots
    """
    if not config.schedule.eval_every:
        return None
    model_config = config.model_config(run.dim, run.layers)

    def evaluate(params: ModelParams, step: int) -> Dict[str, Any]:
        records = band_records(config, run, TransformerPredictor(params, model_config), config.snapshot_episodes)
        snapshot = {f'loss_{record.test_delta:g}': record.raw_loss for record in records}
        if len(records) >= 2:
            snapshot['nsr'] = nsr({record.test_delta: record.raw_loss for record in records})
        print(f'Run {run.run_id} step {step}: ' + ', '.join(f'{key} {value:.4f}' for key, value in snapshot.items()))
        return snapshot

    return evaluate


def run_cell(config: ExperimentConfig, run: RunSpec, force: bool = False, progress: bool = False) -> Dict[str, Any]:
    """
    Trains the transformer of a run then evaluates it (with the reference estimators) as the experiment kind requires

    :param config: The experiment config
    :param run: The run
    :param force: If to restart training instead of resuming from the latest checkpoint
    :param progress: If to show the training progress bar
    :return: The paths of the run outputs
    """
    folder = run_dir(config, run)
    os.makedirs(folder, exist_ok=True)
    model_config = config.model_config(run.dim, run.layers)
    source, pool = task_source(config, run)
    input_dist = training_inputs(config, run)

    config_hash = config.config_hash()
    if force:
        clear_run_dir(folder)
    resume = latest_checkpoint(folder, config_hash)
    pole = canonical_pole(run.dim) if run.variant == 'zeroed' else None
    result = train(model_config, source, input_dist, config.schedule, run.seed, folder, resume,
                   evaluate=snapshot_evaluator(config, run), perpendicular_pole=pole,
                   recompute_labels=config.recompute_labels, progress=progress, stream_base=run.stream_base,
                   config_hash=config_hash)

    model = TransformerPredictor(result.params, model_config)
    records = band_records(config, run, model, config.eval_episodes)
    for estimator in estimator_predictors(config, run, pool):
        records += band_records(config, run, estimator, config.estimator_episodes)
    paths = {'checkpoint': result.checkpoint_filename,
             'eval': write_csv(os.path.join(folder, 'eval.csv'), _record_rows(run, records))}
    if result.snapshots:
        snapshots = [{'run_id': run.run_id, 'variant': run.variant, **snapshot} for snapshot in result.snapshots]
        paths['snapshots'] = write_csv(os.path.join(folder, 'snapshots.csv'), snapshots)
    summary = {'run': run.save(), 'run id': run.run_id, 'training': result.summary()}

    if config.kind == 'radius':
        radius_records = losses.radius_curve(model, CapSpec(run.dim, radians(run.phi)), InputDistribution(),
                                             config.context_length, config.radii, run.noise_var,
                                             config.eval_episodes, _eval_rng(run), run.phi)
        for record in radius_records:
            record.num_tasks, record.seed = run.num_tasks, run.seed
        paths['radius'] = write_csv(os.path.join(folder, 'radius.csv'), _record_rows(run, radius_records))
    elif config.kind == 'context_length':
        if config.context_band is not None:
            region = losses.evaluation_band(run.parameter_dim, *config.context_band)
        else:
            region = CapSpec(run.parameter_dim, radians(run.phi))
        curve = losses.context_length_curve(model, region, InputDistribution(), config.context_length,
                                            config.context_grid, run.noise_var, config.eval_episodes,
                                            _eval_rng(run), run.task_family)
        curve.insert(0, 'run_id', run.run_id)
        curve.insert(1, 'train_phi', run.phi)
        paths['context'] = write_csv(os.path.join(folder, 'context.csv'), curve.to_dict('records'))
    elif config.kind == 'dmmse_interp':
        if pool is None or pool.N < 2:
            raise ValueError(f'Interpolation between pool tasks requires a pool of at least 2 tasks ({run.run_id})')
        excess = losses.excess_over_dmmse(model, DmmsePredictor(pool), pool.tasks[0].w, pool.tasks[1].w,
                                          config.interp_alphas, InputDistribution(), config.context_length,
                                          run.noise_var, config.eval_episodes, _eval_rng(run), run.phi)
        path = excess.path
        path.insert(0, 'run_id', run.run_id)
        path.insert(1, 'train_phi', run.phi)
        path.insert(2, 'N', num_tasks_str(run.num_tasks))
        paths['path'] = write_csv(os.path.join(folder, 'path.csv'), path.to_dict('records'))
        summary.update({'excess': excess.excess, 'normalized excess': excess.normalized_excess})

    paths['summary'] = os.path.join(folder, 'summary.json')
    write_json(paths['summary'], summary)
    return paths


def run_worker(job: Tuple[Dict[str, Any], Dict[str, Any], bool, bool]) -> Tuple[str, str, Dict[str, Any]]:
    """
    Runs a cell in a worker process, errors are caught so a failed run never stops the sweep

    :param job: The saved config, the saved run spec, the force flag and the progress flag
    :return: The run id, the status and the manifest fields
    """
    config, run = ExperimentConfig.load(job[0]), RunSpec.load(job[1])
    try:
        return run.run_id, 'completed', {'paths': run_cell(config, run, job[2], job[3])}
    except Exception as error:
        print(f'Run {run.run_id} failed: {type(error).__name__}: {error}')
        return run.run_id, 'failed', {'error': f'{type(error).__name__}: {error}'}


def run_sweep(config: ExperimentConfig, force: bool = False) -> RunManifest:
    """
    Runs every run of the config that is not completed with a bounded pool of worker processes

    :param config: The experiment config
    :param force: If to rerun completed runs
    :return: The run manifest
    """
    specs = build_run_specs(config)
    os.makedirs(config.output_dir, exist_ok=True)
    write_json(os.path.join(config.output_dir, 'config.json'), config.save())
    manifest = RunManifest.open(config)

    scheduled = [run for run in specs if force or not manifest.is_completed(run.run_id)]
    print(f'{config}\n{len(specs)} runs, {len(specs) - len(scheduled)} already completed, '
          f'{len(scheduled)} scheduled with {config.workers} workers')
    for run in scheduled:
        manifest.update(run.run_id, 'running', run=run.save())

    jobs = [(config.save(), run.save(), force, config.workers == 1) for run in scheduled]
    if config.workers == 1:
        outcomes = map(run_worker, jobs)
        for run_id, status, fields in tqdm(outcomes, total=len(jobs), desc='Runs'):
            manifest.update(run_id, status, **fields)
            print(f'Run {run_id}: {status}')
    else:
        with Pool(min(config.workers, max(len(jobs), 1))) as pool:
            for run_id, status, fields in tqdm(pool.imap_unordered(run_worker, jobs), total=len(jobs), desc='Runs'):
                manifest.update(run_id, status, **fields)
                print(f'Run {run_id}: {status}')

    print(manifest)
    return manifest


def collect(config: ExperimentConfig, manifest: RunManifest, name: str) -> pd.DataFrame:
    """
    Concatenates a per run csv of the completed runs, ordered as the config grids

    :param config: The experiment config
    :param manifest: The run manifest
    :param name: The csv name (eval, radius, context or path)
    :return: The concatenated data frame
    """
    frames = [read_csv(manifest.runs[run.run_id]['paths'][name]) for run in build_run_specs(config)
              if manifest.is_completed(run.run_id) and name in manifest.runs[run.run_id].get('paths', {})]
    if not frames:
        raise ValueError(f'No completed run has {name} results')
    return pd.concat(frames, ignore_index=True)


def _group_columns(records: pd.DataFrame) -> List[str]:
    return [column for column in GROUP_COLUMNS if column in records.columns]


def nsr_table(records: pd.DataFrame) -> pd.DataFrame:
    """
    NSR over the test angles of every model and training angle, per seed and of the mean loss over the seeds

    :param records: The evaluation records
    :return: Data frame with the group columns, train_phi, seed and nsr
    """
    keys = _group_columns(records) + ['train_phi']
    per_seed = records.groupby(keys + ['seed'], sort=True)
    rows = [dict(zip(keys + ['seed'], key), nsr=nsr(dict(zip(group['test_delta'], group['raw_loss']))))
            for key, group in per_seed]

    mean = records.groupby(keys + ['test_delta'], sort=True)['raw_loss'].mean().reset_index()
    for key, group in mean.groupby(keys, sort=True):
        rows.append(dict(zip(keys, key), seed='mean', nsr=nsr(dict(zip(group['test_delta'], group['raw_loss'])))))
    return pd.DataFrame(rows)


def transitions(nsr_rows: pd.DataFrame) -> List[Dict[str, Any]]:
    """
    Transition angle of every model (seed mean and per seed)

    :param nsr_rows: The nsr table
    :return: List of the transitions with their model columns
    """
    keys = [column for column in nsr_rows.columns if column not in ('train_phi', 'nsr')]
    results = []
    for key, group in nsr_rows.groupby(keys, sort=False):
        transition = detect_transition(dict(zip(group['train_phi'], group['nsr'])))
        if not transition.monotone:
            print(f'Warning: non-monotone NSR crossings at {transition.crossings} for {dict(zip(keys, key))}')
        results.append({**{column: _plain(value) for column, value in zip(keys, key)}, **transition.save()})
    return results


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def phase_cells(records: pd.DataFrame, ood_delta: Optional[float] = None) -> List[PhaseCell]:
    """
    Phase of every (phi, N) cell from the normalised losses of the first band (in distribution) and the last band
        (out of distribution), averaged over the seeds

    :param records: The evaluation records of the transformer
    :param ood_delta: The out of distribution test angle, the largest test angle by default
    :return: List of phase cells
    """
    in_dist_delta = records['test_delta'].min()
    ood_delta = records['test_delta'].max() if ood_delta is None else ood_delta
    cells = []
    for (phi, num_tasks), group in records.groupby(['train_phi', 'N'], sort=False):
        in_dist = float(group[group['test_delta'] == in_dist_delta]['normalized_loss'].mean())
        ood = float(group[group['test_delta'] == ood_delta]['normalized_loss'].mean())
        cells.append(PhaseCell(float(phi), num_tasks_value(num_tasks), in_dist, ood, classify_phase(in_dist, ood)))
    return cells


def phase_heatmaps(cells: List[PhaseCell], config: ExperimentConfig) -> Dict[str, pd.DataFrame]:
    """
    Heatmaps (rows N, columns phi, both in config grid order) of the in distribution loss, out of distribution loss
        and phase

    :param cells: The phase cells
    :param config: The experiment config
    :return: Dictionary of heatmap name to data frame
    """
    table = pd.DataFrame([cell.save() for cell in cells])
    table['N'] = table['N'].astype(str)
    rows = [str(num_tasks_str(num_tasks)) for num_tasks in config.num_tasks]
    heatmaps = {}
    for column in ('in_dist_loss', 'ood_loss', 'phase'):
        heatmap = table.pivot(index='N', columns='phi', values=column).reindex(index=rows, columns=config.train_angles)
        heatmap.index.name, heatmap.columns.name = 'N', None
        heatmaps[column] = heatmap
    return heatmaps


def probe_traces(config: ExperimentConfig, manifest: RunManifest) -> pd.DataFrame:
    """
    Exponential moving averages of the loss traces of the normal and the perpendicular zeroed runs on one step axis

    :param config: The experiment config
    :param manifest: The run manifest
    :return: Data frame with the step and one column per run
    """
    traces = {}
    for run in build_run_specs(config):
        if manifest.is_completed(run.run_id):
            trace = read_csv(os.path.join(run_dir(config, run), 'loss_trace.csv'))['train_loss']
            traces[run.run_id] = exponential_moving_average(trace, config.smoothing)
    if not traces:
        raise ValueError('No completed run has a loss trace')
    length = min(len(trace) for trace in traces.values())
    return pd.DataFrame({'step': np.arange(1, length + 1),
                         **{run_id: trace[:length] for run_id, trace in traces.items()}})
