"""
Experiment configuration
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import TYPE_CHECKING

from src.baselines.predictor import ESTIMATORS
from src.extra.result import num_tasks_str, num_tasks_value
from src.transformer.model import ModelConfig
from src.transformer.training import Schedule

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional, Union

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), 'configs')

EXPERIMENT_KINDS = ('transition', 'phase_diagram', 'depth_sweep', 'dim_sweep', 'radius', 'context_length',
                    'classification', 'nonlinear', 'x_diversity', 'spec2_probe', 'dmmse_interp')
NAMED_KINDS = EXPERIMENT_KINDS[2:]
FAMILIES = ('linear', 'logistic', 'mlp_joint', 'mlp_perlayer')
PRESETS = ('desk', 'full')

# Fields that do not change results
UNHASHED_FIELDS = ('name', 'output dir', 'workers')


class ExperimentConfig:
    """
    Grids and settings of one experiment, angles are in degrees
    """

    def __init__(self, name: str, kind: str, train_angles: List[float], num_tasks: List[Union[int, float]],
                 dims: List[int], layers: List[int], noise_vars: List[float], families: List[str],
                 test_angles: List[float], band_width: float, radii: List[float], context_grid: List[int],
                 context_length: int, model: Dict[str, Any], schedule: Schedule, seeds: List[int],
                 eval_episodes: int = 10 ** 4, estimators: Optional[List[str]] = None, estimator_episodes: int = 1000,
                 importance_samples: int = 10 ** 4, smoothing: float = 0.99, input_kind: str = 'gaussian',
                 readout_angle: Optional[float] = None, recompute_labels: bool = False,
                 interp_alphas: Optional[List[float]] = None, context_band: Optional[List[float]] = None,
                 snapshot_episodes: int = 500, output_dir: str = 'results', workers: int = 1):
        self.name = name
        self.kind = kind
        self.train_angles = train_angles
        self.num_tasks = num_tasks
        self.dims = dims
        self.layers = layers
        self.noise_vars = noise_vars
        self.families = families
        self.test_angles = test_angles
        self.band_width = band_width
        self.radii = radii
        self.context_grid = context_grid
        self.context_length = context_length
        self.model = model
        self.schedule = schedule
        self.seeds = seeds
        self.eval_episodes = eval_episodes
        self.estimators = estimators or []
        self.estimator_episodes = estimator_episodes
        self.importance_samples = importance_samples
        self.smoothing = smoothing
        self.input_kind = input_kind
        self.readout_angle = readout_angle
        self.recompute_labels = recompute_labels
        self.interp_alphas = interp_alphas or [alpha / 10 for alpha in range(11)]
        self.context_band = context_band
        self.snapshot_episodes = snapshot_episodes
        self.output_dir = output_dir
        self.workers = workers

        self.validate()

    def validate(self):
        """
        Checks that the grids are nonempty and every option is valid
        """
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f'Unknown experiment kind ({self.kind}), expected one of {", ".join(EXPERIMENT_KINDS)}')
        for field in ('train_angles', 'num_tasks', 'dims', 'layers', 'noise_vars', 'families', 'test_angles',
                      'seeds'):
            if len(getattr(self, field)) == 0:
                raise ValueError(f'Config grid {field.replace("_", " ")} is empty')
        if any(not 0 < angle <= 180 for angle in self.train_angles):
            raise ValueError(f'Training angles {self.train_angles} must be in (0, 180]')
        if any(not 0 <= angle < 180 for angle in self.test_angles):
            raise ValueError(f'Test angles {self.test_angles} must be in [0, 180)')
        if any(family not in FAMILIES for family in self.families):
            raise ValueError(f'Unknown task family in {self.families}, expected one of {", ".join(FAMILIES)}')
        if any(not 1 <= k <= self.context_length for k in self.context_grid):
            raise ValueError(f'Context grid {self.context_grid} must be in [1, {self.context_length}]')
        if self.input_kind not in ('gaussian', 'cap'):
            raise ValueError(f'Unknown input kind ({self.input_kind})')
        if self.snapshot_episodes < 1:
            raise ValueError(f'Number of snapshot episodes {self.snapshot_episodes} must be positive')
        if self.workers < 1:
            raise ValueError(f'Number of workers {self.workers} must be positive')
        if any(estimator not in ESTIMATORS for estimator in self.estimators):
            raise ValueError(f'Unknown estimator in {self.estimators}, expected one of {", ".join(ESTIMATORS)}')

    def model_config(self, dim: int, layers: int) -> ModelConfig:
        """
        Transformer config of a run

        :param dim: The input dimension
        :param layers: The number of layers
        :return: The model config
        """
        model = dict(ModelConfig().save(), **self.model)
        model.update({'layers': layers, 'input dim': dim, 'max positions': 2 * self.context_length})
        return ModelConfig.load(model)

    def save(self) -> Dict[str, Any]:
        return {
            'name': self.name, 'kind': self.kind, 'train angles': self.train_angles,
            'num tasks': [num_tasks_str(num_tasks) for num_tasks in self.num_tasks], 'dims': self.dims,
            'layers': self.layers, 'noise vars': self.noise_vars, 'families': self.families,
            'test angles': self.test_angles, 'band width': self.band_width, 'radii': self.radii,
            'context grid': self.context_grid, 'context length': self.context_length, 'model': self.model,
            'schedule': self.schedule.save(), 'seeds': self.seeds, 'eval episodes': self.eval_episodes,
            'estimators': self.estimators, 'estimator episodes': self.estimator_episodes,
            'importance samples': self.importance_samples, 'smoothing': self.smoothing, 'input kind': self.input_kind,
            'readout angle': self.readout_angle, 'recompute labels': self.recompute_labels,
            'interp alphas': self.interp_alphas, 'context band': self.context_band,
            'snapshot episodes': self.snapshot_episodes, 'output dir': self.output_dir, 'workers': self.workers
        }

    @staticmethod
    def load(config: Dict[str, Any]) -> ExperimentConfig:
        return ExperimentConfig(
            config['name'], config['kind'], [float(angle) for angle in config['train angles']],
            [num_tasks_value(num_tasks) for num_tasks in config.get('num tasks', ['inf'])],
            config.get('dims', [10]), config.get('layers', [10]), config.get('noise vars', [0.0]),
            config.get('families', ['linear']),
            [float(angle) for angle in config.get('test angles', list(range(0, 166, 15)) + [175])],
            config.get('band width', 5.0), config.get('radii', [0.25, 0.5, 0.75, 1.0, 1.25, 1.5]),
            config.get('context grid', []), config.get('context length', 50), config.get('model', {}),
            Schedule.load(config.get('schedule', {})), config.get('seeds', [0]), config.get('eval episodes', 10 ** 4),
            config.get('estimators', []), config.get('estimator episodes', 1000),
            config.get('importance samples', 10 ** 4), config.get('smoothing', 0.99),
            config.get('input kind', 'gaussian'), config.get('readout angle'), config.get('recompute labels', False),
            config.get('interp alphas'), config.get('context band'), config.get('snapshot episodes', 500),
            config.get('output dir', 'results'), config.get('workers', 1))

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical json of the fields that change results

        :return: The hex digest
        """
        fields = {key: value for key, value in self.save().items() if key not in UNHASHED_FIELDS}
        canonical = json.dumps(fields, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def __str__(self) -> str:
        return f'Experiment {self.name} ({self.kind}) - train angles: {self.train_angles}, seeds: {self.seeds}'


def load_config(filename: str) -> ExperimentConfig:
    with open(filename) as file:
        return ExperimentConfig.load(json.load(file))


def preset_filename(preset: str, kind: str) -> str:
    return os.path.join(CONFIG_DIR, f'{preset}_{kind}.json')


def get_config(config_name: str, kind: Optional[str] = None) -> ExperimentConfig:
    """
    Gets an experiment config from a preset name (desk or full) with the experiment kind or from a config file

    :param config_name: The preset name or config filename
    :param kind: The experiment kind of a preset
    :return: The experiment config
    """
    if config_name in PRESETS:
        if kind is None:
            raise ValueError(f'The {config_name} preset requires an experiment kind')
        filename = preset_filename(config_name, kind)
        if not os.path.exists(filename):
            raise ValueError(f'No {config_name} preset for the {kind} experiment')
        return load_config(filename)
    elif os.path.exists(config_name):
        return load_config(config_name)
    else:
        raise ValueError(f'Unknown experiment config ({config_name})')


def apply_overrides(config: ExperimentConfig, output_dir: Optional[str] = None, seed: Optional[int] = None,
                    workers: Optional[int] = None) -> ExperimentConfig:
    """
    Replaces the output folder, seeds and number of workers of a config with the command line values

    :param config: The experiment config
    :param output_dir: The output folder
    :param seed: The single seed to run
    :param workers: The number of workers
    :return: The new experiment config
    """
    saved = config.save()
    if output_dir is not None:
        saved['output dir'] = output_dir
    if seed is not None:
        saved['seeds'] = [seed]
    if workers is not None:
        saved['workers'] = workers
    return ExperimentConfig.load(saved)
