"""Training loop minimising the mean squared error of the in-context predictions"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.autodiff.tensor import Tape, backward
from src.core.core import NumericalError, RngStream, exponential_moving_average, final_window_slope
from src.core.episode import make_batch
from src.transformer.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.transformer.model import init_params, train_loss
from src.transformer.optimiser import OptimizerState, adamw_step

if TYPE_CHECKING:
    from typing import Any, Callable, Dict, List, Optional

    from src.core.episode import InputDistribution
    from src.core.task import TaskSource
    from src.transformer.model import ModelConfig

    ModelParams = Dict[str, np.ndarray]

# Stream ids of the random number streams owned by one run
INIT_STREAM = 0
DATA_STREAM = 1
EVAL_STREAM = 2
POOL_STREAM = 3
ESTIMATOR_STREAM = 4


class Schedule:
    """
    Training schedule, the learning rate is constant
    """

    def __init__(self, steps: int = 58000, batch_size: int = 128, learning_rate: float = 3e-4,
                 weight_decay: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 log_every: int = 500, eval_every: int = 0, checkpoint_every: int = 0):
        assert steps >= 1 and batch_size >= 1, f'Steps {steps} and batch size {batch_size} must be positive'
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.log_every = log_every
        self.eval_every = eval_every
        self.checkpoint_every = checkpoint_every

    def save(self) -> Dict[str, Any]:
        return {
            'steps': self.steps, 'batch size': self.batch_size, 'learning rate': self.learning_rate,
            'weight decay': self.weight_decay, 'beta1': self.beta1, 'beta2': self.beta2, 'eps': self.eps,
            'log every': self.log_every, 'eval every': self.eval_every, 'checkpoint every': self.checkpoint_every
        }

    @staticmethod
    def load(schedule: Dict[str, Any]) -> Schedule:
        defaults = Schedule().save()
        defaults.update(schedule)
        return Schedule(defaults['steps'], defaults['batch size'], defaults['learning rate'], defaults['weight decay'],
                        defaults['beta1'], defaults['beta2'], defaults['eps'], defaults['log every'],
                        defaults['eval every'], defaults['checkpoint every'])

    def __str__(self) -> str:
        return f'Schedule - steps: {self.steps}, batch size: {self.batch_size}, lr: {self.learning_rate}'


class TrainingResult:
    """
    The trained parameters with the per step loss trace and the evaluation snapshots taken during training
    """

    def __init__(self, params: ModelParams, optimiser: OptimizerState, trace: List[float],
                 snapshots: List[Dict[str, Any]], checkpoint_filename: Optional[str] = None):
        self.params = params
        self.optimiser = optimiser
        self.trace = trace
        self.snapshots = snapshots
        self.checkpoint_filename = checkpoint_filename

    @property
    def final_slope(self) -> Optional[float]:
        return final_window_slope(self.trace)

    def smoothed_trace(self, smoothing: float = 0.99) -> List[float]:
        return exponential_moving_average(self.trace, smoothing)

    def summary(self) -> Dict[str, Any]:
        return {
            'steps': len(self.trace), 'final loss': self.trace[-1] if self.trace else None,
            'final smoothed loss': self.smoothed_trace()[-1] if self.trace else None,
            'final window slope': self.final_slope, 'checkpoint': self.checkpoint_filename
        }


def checkpoint_filename(output_dir: str, step: int) -> str:
    return os.path.join(output_dir, f'checkpoint_{step:06d}.ckpt')


def save_loss_trace(filename: str, trace: List[float]):
    pd.DataFrame({'step': np.arange(1, len(trace) + 1), 'train_loss': trace}).to_csv(filename, index=False)


def _save(output_dir: str, config: ModelConfig, params: ModelParams, optimiser: OptimizerState, step: int,
          data_rng: RngStream, trace: List[float], snapshots: List[Dict[str, Any]], config_hash: Optional[str]) -> str:
    filename = checkpoint_filename(output_dir, step)
    save_checkpoint(filename, Checkpoint(config, params, optimiser, step, {'data': data_rng.get_state()},
                                         {'loss trace': trace, 'snapshots': snapshots, 'config hash': config_hash}))
    save_loss_trace(os.path.join(output_dir, 'loss_trace.csv'), trace)
    return filename


def train(config: ModelConfig, task_source: TaskSource, input_dist: InputDistribution, schedule: Schedule,
          seed: int, output_dir: Optional[str] = None, resume: Optional[str] = None,
          evaluate: Optional[Callable[[ModelParams, int], Dict[str, Any]]] = None,
          perpendicular_pole: Optional[np.ndarray] = None, recompute_labels: bool = False,
          progress: bool = True, stream_base: int = 0, config_hash: Optional[str] = None) -> TrainingResult:
    """
    Trains a transformer with AdamW on batches of fresh episodes

    :param config: The model config
    :param task_source: The source of the episode tasks
    :param input_dist: The input distribution
    :param schedule: The training schedule
    :param seed: The run seed, the initial parameters and the data use separate streams of it
    :param output_dir: Folder of the checkpoints and the loss trace, nothing is written if None
    :param resume: Checkpoint filename to resume training from
    :param evaluate: Called with the parameters and the step every eval every steps, its results are the snapshots
    :param perpendicular_pole: If given, the input components perpendicular to this pole are zeroed
    :param recompute_labels: If to recompute the labels after zeroing the perpendicular components
    :param progress: If to show a progress bar
    :param stream_base: Offset of the stream ids so that runs sharing a seed own separate streams
    :param config_hash: Hash of the experiment config, stored in the checkpoints and checked when resuming
    :return: The training result
    """
    if resume is not None:
        checkpoint = load_checkpoint(resume)
        if checkpoint.extra.get('config hash') != config_hash:
            raise ValueError(f'Checkpoint {resume} was written for config hash {checkpoint.extra.get("config hash")}, '
                             f'expected {config_hash}')
        assert checkpoint.config == config, f'Checkpoint config ({checkpoint.config}) does not match ({config})'
        params, optimiser, start = checkpoint.params, checkpoint.optimiser, checkpoint.step
        data_rng = RngStream.load(checkpoint.rng_states['data'])
        trace = list(checkpoint.extra.get('loss trace', []))
        snapshots = list(checkpoint.extra.get('snapshots', []))
        print(f'Resuming from {resume} at step {start}')
    else:
        params = init_params(config, RngStream(seed, stream_base + INIT_STREAM))
        optimiser = OptimizerState(params, schedule.learning_rate, schedule.weight_decay, schedule.beta1,
                                   schedule.beta2, schedule.eps)
        data_rng = RngStream(seed, stream_base + DATA_STREAM)
        start, trace, snapshots = 0, [], []

    saved_filename, saved_step = None, start
    steps = tqdm(range(start + 1, schedule.steps + 1), desc='Training', disable=not progress, leave=False)
    for step in steps:
        batch = make_batch(data_rng, task_source, input_dist, schedule.batch_size, config.context_length,
                           config.input_dim, config.np_dtype, perpendicular_pole, recompute_labels)

        tape = Tape()
        loss = train_loss(tape.watch_all(params), batch, config)
        loss_value = loss.data.item()
        if not np.isfinite(loss_value):
            if output_dir is not None:
                os.makedirs(output_dir, exist_ok=True)
                np.save(os.path.join(output_dir, 'bad_batch.npy'), batch)
            raise NumericalError(f'Non-finite training loss {loss_value} at step {step}')

        adamw_step(params, backward(tape, loss), optimiser)
        trace.append(loss_value)

        if schedule.log_every and step % schedule.log_every == 0:
            steps.set_postfix(loss=f'{loss_value:.4f}')
            print(f'Step {step}: smoothed loss {exponential_moving_average(trace)[-1]:.5f}')
        if evaluate is not None and schedule.eval_every and step % schedule.eval_every == 0:
            snapshots.append({'step': step, **evaluate(params, step)})
        if output_dir is not None and schedule.checkpoint_every and step % schedule.checkpoint_every == 0:
            saved_filename = _save(output_dir, config, params, optimiser, step, data_rng, trace, snapshots,
                                   config_hash)
            saved_step = step

    if output_dir is not None and (saved_filename is None or saved_step != optimiser.step):
        saved_filename = _save(output_dir, config, params, optimiser, optimiser.step, data_rng, trace, snapshots,
                               config_hash)

    result = TrainingResult(params, optimiser, trace, snapshots, saved_filename)
    if result.final_slope is not None:
        print(f'Trained {len(trace)} steps, final loss {trace[-1]:.5f}, final window slope {result.final_slope:.3e}')
    return result
