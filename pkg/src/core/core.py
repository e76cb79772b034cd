"""Additional functions shared by the samplers, the training loop and the evaluation"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from typing import Any, Dict, Iterable, List, Optional


class NumericalError(ArithmeticError):
    """
    Raised when a numerical procedure fails (non-convergence or non-finite values)
    """
    pass


class RngStream:
    """
    Random number stream identified by a seed and a stream id, one stream is owned by each training run or worker

    Identical (seed, stream id) pairs give identical sequences and distinct stream ids give independent sequences as
        the stream id is used as the spawn key of the numpy seed sequence
    """

    def __init__(self, seed: int, stream_id: int = 0):
        assert 0 <= seed < 2 ** 64 and 0 <= stream_id < 2 ** 64, f'Seed {seed} and stream id {stream_id} must be 64-bit'
        self.seed = seed
        self.stream_id = stream_id

        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,))))

    def spawn(self, stream_id: int) -> RngStream:
        """
        Creates a new stream with the same seed and a different stream id

        :param stream_id: The new stream id
        :return: The new random number stream
        """
        return RngStream(self.seed, stream_id)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size)

    def get_state(self) -> Dict[str, Any]:
        """
        Gets the stream state for checkpointing

        :return: Dictionary of the seed, stream id and bit generator state
        """
        return {'seed': self.seed, 'stream id': self.stream_id, 'state': self.generator.bit_generator.state}

    @staticmethod
    def load(stream_state: Dict[str, Any]) -> RngStream:
        """
        Loads a random number stream from a saved state

        :param stream_state: The saved stream state
        :return: A stream that continues from the saved state
        """
        stream = RngStream(stream_state['seed'], stream_state['stream id'])
        stream.generator.bit_generator.state = stream_state['state']
        return stream

    def __str__(self) -> str:
        return f'RngStream - seed: {self.seed}, stream id: {self.stream_id}'


def as_matrix(xs: np.ndarray) -> np.ndarray:
    """
    Views a vector as a one row matrix, matrices are unchanged

    :param xs: A vector or matrix
    :return: Two dimensional array
    """
    xs = np.asarray(xs, dtype=np.float64)
    return xs[np.newaxis, :] if xs.ndim == 1 else xs


def exponential_moving_average(values: Iterable[float], smoothing: float = 0.99) -> List[float]:
    """
    Smooths a loss trace with an exponential moving average (bias corrected so early values are not pulled to zero)

    :param values: The trace values
    :param smoothing: The smoothing constant
    :return: The smoothed trace
    """
    assert 0 <= smoothing < 1, f'Smoothing constant {smoothing} must be in [0, 1)'
    smoothed, average = [], 0.0
    for step, value in enumerate(values, start=1):
        average = smoothing * average + (1 - smoothing) * value
        smoothed.append(average / (1 - smoothing ** step))
    return smoothed


def final_window_slope(values: List[float], window_fraction: float = 0.1) -> Optional[float]:
    """
    Least squares slope of the final window of a loss trace, used to report convergence

    :param values: The trace values
    :param window_fraction: The fraction of the trace to fit
    :return: The slope per step or None if the window has fewer than two points
    """
    window = max(2, int(len(values) * window_fraction))
    if len(values) < 2:
        return None
    tail = np.asarray(values[-window:], dtype=np.float64)
    return float(np.polyfit(np.arange(len(tail)), tail, 1)[0])


def debug(message, case):
    """
    Debug a message

    :param message: The message
    :param case: If to print the message
    """
    if case:
        print(message)
