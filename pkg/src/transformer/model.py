"""
Decoder only transformer over interleaved episode tokens, the prediction of y_k is read from the x_k token
"""

from __future__ import annotations

from math import sqrt
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import truncnorm

from src.autodiff.ops import (add, causal_mask_fill, embedding_add, gelu, layer_norm, matmul, mse_masked, reshape,
                              scale, slice_, softmax, transpose)
from src.autodiff.tensor import Tensor
from src.core.episode import tokenize

if TYPE_CHECKING:
    from typing import Any, Dict, List, Mapping, Union

    from src.core.core import RngStream
    from src.core.episode import Episode

    ModelParams = Dict[str, np.ndarray]


class ModelConfig:
    """
    Transformer hyperparameters
    """

    def __init__(self, n_layers: int = 10, hidden_dim: int = 128, n_heads: int = 8, max_positions: int = 100,
                 input_dim: int = 10, dtype: str = 'float32', init_std: float = 0.02, post_norm: bool = False,
                 exact_gelu: bool = False):
        assert n_layers >= 1, f'Number of layers {n_layers} must be positive'
        assert hidden_dim % n_heads == 0, f'Hidden dimension {hidden_dim} is not divisible by {n_heads} heads'
        assert max_positions >= 2 and max_positions % 2 == 0, f'Max positions {max_positions} must be even (2n)'
        assert dtype in ('float32', 'float64'), f'Unsupported dtype {dtype}'

        self.n_layers = n_layers
        self.hidden_dim = hidden_dim
        self.n_heads = n_heads
        self.max_positions = max_positions
        self.input_dim = input_dim
        self.dtype = dtype
        self.init_std = init_std
        self.post_norm = post_norm
        self.exact_gelu = exact_gelu

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.n_heads

    @property
    def context_length(self) -> int:
        return self.max_positions // 2

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def parameter_count(self) -> int:
        """
        Closed form number of parameters

        :return: The number of scalar parameters
        """
        d, hidden = self.input_dim, self.hidden_dim
        per_layer = 12 * hidden ** 2 + 13 * hidden
        return self.n_layers * per_layer + d * hidden + hidden + self.max_positions * hidden + 2 * hidden + hidden + 1

    def save(self) -> Dict[str, Any]:
        return {
            'layers': self.n_layers, 'hidden dim': self.hidden_dim, 'heads': self.n_heads,
            'max positions': self.max_positions, 'input dim': self.input_dim, 'dtype': self.dtype,
            'init std': self.init_std, 'post norm': self.post_norm, 'exact gelu': self.exact_gelu
        }

    @staticmethod
    def load(model_config: Dict[str, Any]) -> ModelConfig:
        return ModelConfig(model_config['layers'], model_config['hidden dim'], model_config['heads'],
                           model_config['max positions'], model_config['input dim'],
                           model_config.get('dtype', 'float32'), model_config.get('init std', 0.02),
                           model_config.get('post norm', False), model_config.get('exact gelu', False))

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelConfig) and self.save() == other.save()

    def __str__(self) -> str:
        return f'Transformer - layers: {self.n_layers}, hidden dim: {self.hidden_dim}, heads: {self.n_heads}, ' \
               f'positions: {self.max_positions}, input dim: {self.input_dim}'


def _layer_shapes(config: ModelConfig, layer: int) -> Dict[str, tuple]:
    hidden = config.hidden_dim
    return {
        f'layer {layer}.ln1.gain': (hidden,), f'layer {layer}.ln1.bias': (hidden,),
        f'layer {layer}.attention.qkv.weight': (hidden, 3 * hidden), f'layer {layer}.attention.qkv.bias': (3 * hidden,),
        f'layer {layer}.attention.out.weight': (hidden, hidden), f'layer {layer}.attention.out.bias': (hidden,),
        f'layer {layer}.ln2.gain': (hidden,), f'layer {layer}.ln2.bias': (hidden,),
        f'layer {layer}.mlp.in.weight': (hidden, 4 * hidden), f'layer {layer}.mlp.in.bias': (4 * hidden,),
        f'layer {layer}.mlp.out.weight': (4 * hidden, hidden), f'layer {layer}.mlp.out.bias': (hidden,),
    }


def parameter_shapes(config: ModelConfig) -> Dict[str, tuple]:
    """
    Names and shapes of every parameter in a fixed order (the order of the checkpoint and the optimiser)

    :param config: The model config
    :return: Dictionary of parameter name to shape
    """
    shapes = {
        'read in.weight': (config.input_dim, config.hidden_dim), 'read in.bias': (config.hidden_dim,),
        'positional': (config.max_positions, config.hidden_dim)
    }
    for layer in range(config.n_layers):
        shapes.update(_layer_shapes(config, layer))
    shapes.update({
        'ln final.gain': (config.hidden_dim,), 'ln final.bias': (config.hidden_dim,),
        'read out.weight': (config.hidden_dim, 1), 'read out.bias': (1,)
    })
    return shapes


def init_params(config: ModelConfig, rng: RngStream) -> ModelParams:
    """
    Initialises the parameters, weights and the positional table from a normal truncated at two standard deviations,
        biases at zero and layer norm gains at one

    :param config: The model config
    :param rng: The random number stream
    :return: Dictionary of named parameters
    """
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith('.gain'):
            value = np.ones(shape)
        elif name.endswith('.bias'):
            value = np.zeros(shape)
        else:
            value = truncnorm.rvs(-2, 2, scale=config.init_std, size=shape, random_state=rng.generator)
        params[name] = np.ascontiguousarray(value, dtype=config.np_dtype)
    return params


def count_params(params: Mapping[str, np.ndarray]) -> int:
    return sum(value.size for value in params.values())


def _linear(x: Tensor, params: Mapping[str, Tensor], name: str) -> Tensor:
    return add(matmul(x, params[f'{name}.weight']), params[f'{name}.bias'])


def _layer_norm(x: Tensor, params: Mapping[str, Tensor], name: str) -> Tensor:
    return layer_norm(x, params[f'{name}.gain'], params[f'{name}.bias'])


def _attention(x: Tensor, params: Mapping[str, Tensor], layer: int, config: ModelConfig) -> Tensor:
    batch, positions, hidden = x.shape
    heads, head_dim = config.n_heads, config.head_dim

    qkv = _linear(x, params, f'layer {layer}.attention.qkv')
    qkv = transpose(reshape(qkv, (batch, positions, 3, heads, head_dim)), (2, 0, 3, 1, 4))
    queries, keys, values = slice_(qkv, 0), slice_(qkv, 1), slice_(qkv, 2)

    scores = scale(matmul(queries, transpose(keys, (0, 1, 3, 2))), 1 / sqrt(head_dim))
    attention = softmax(causal_mask_fill(scores))
    mixed = reshape(transpose(matmul(attention, values), (0, 2, 1, 3)), (batch, positions, hidden))
    return _linear(mixed, params, f'layer {layer}.attention.out')


def _mlp(x: Tensor, params: Mapping[str, Tensor], layer: int, config: ModelConfig) -> Tensor:
    hidden = gelu(_linear(x, params, f'layer {layer}.mlp.in'), approximate=not config.exact_gelu)
    return _linear(hidden, params, f'layer {layer}.mlp.out')


def _block(x: Tensor, params: Mapping[str, Tensor], layer: int, config: ModelConfig) -> Tensor:
    if config.post_norm:
        x = _layer_norm(add(x, _attention(x, params, layer, config)), params, f'layer {layer}.ln1')
        return _layer_norm(add(x, _mlp(x, params, layer, config)), params, f'layer {layer}.ln2')

    x = add(x, _attention(_layer_norm(x, params, f'layer {layer}.ln1'), params, layer, config))
    return add(x, _mlp(_layer_norm(x, params, f'layer {layer}.ln2'), params, layer, config))


def _as_tensors(params: Mapping[str, Union[Tensor, np.ndarray]]) -> Dict[str, Tensor]:
    return {name: value if isinstance(value, Tensor) else Tensor(value, name=name) for name, value in params.items()}


def _check_tokens(tokens: np.ndarray, config: ModelConfig) -> np.ndarray:
    tokens = np.asarray(tokens)
    if tokens.ndim != 3 or tokens.shape[2] != config.input_dim:
        raise ValueError(f'Tokens must be (batch, 2n, {config.input_dim}), got {tokens.shape}')
    if tokens.shape[1] > config.max_positions:
        raise ValueError(f'{tokens.shape[1]} positions exceed the maximum of {config.max_positions}')
    if tokens.shape[1] % 2 != 0:
        raise ValueError(f'Token sequences must have an even number of rows, got {tokens.shape[1]}')
    return tokens.astype(config.np_dtype, copy=False)


def forward_all(params: Mapping[str, Union[Tensor, np.ndarray]], tokens: np.ndarray, config: ModelConfig) -> Tensor:
    """
    Scalar read out at every token position

    :param params: The parameters, as watched tensors to record on a tape or as arrays
    :param tokens: Batch of token sequences (batch x 2n x d)
    :param config: The model config
    :return: Tensor of outputs (batch x 2n)
    """
    tokens = _check_tokens(tokens, config)
    params = _as_tensors(params)
    batch, positions, _ = tokens.shape

    x = embedding_add(_linear(Tensor(tokens), params, 'read in'), params['positional'])
    for layer in range(config.n_layers):
        x = _block(x, params, layer, config)
    x = _layer_norm(x, params, 'ln final')
    return reshape(_linear(x, params, 'read out'), (batch, positions))


def forward(params: Mapping[str, Union[Tensor, np.ndarray]], tokens: np.ndarray, config: ModelConfig) -> Tensor:
    """
    Predictions at the x rows, column k - 1 is the estimate of y_k from the context C_k

    :param params: The parameters
    :param tokens: Batch of token sequences (batch x 2n x d)
    :param config: The model config
    :return: Tensor of predictions (batch x n)
    """
    return slice_(forward_all(params, tokens, config), (slice(None), slice(0, None, 2)))


def train_loss(params: Mapping[str, Union[Tensor, np.ndarray]], tokens: np.ndarray, config: ModelConfig) -> Tensor:
    """
    Mean squared error of the predictions of every y_k, the y rows produce no loss

    :param params: The parameters
    :param tokens: Batch of token sequences (batch x 2n x d)
    :param config: The model config
    :return: Scalar loss tensor
    """
    outputs = forward_all(params, tokens, config)
    targets = np.zeros(outputs.shape, dtype=outputs.dtype)
    targets[:, 0::2] = tokens[:, 1::2, 0]
    mask = np.zeros(outputs.shape, dtype=bool)
    mask[:, 0::2] = True
    return mse_masked(outputs, targets, mask)


def predict(params: Mapping[str, np.ndarray], tokens: np.ndarray, config: ModelConfig,
            batch_size: int = 256) -> np.ndarray:
    """
    Predictions without recording a tape, evaluated in chunks of the batch

    :param params: The parameters
    :param tokens: Batch of token sequences (batch x 2n x d)
    :param config: The model config
    :param batch_size: The chunk size
    :return: Array of predictions (batch x n)
    """
    return np.concatenate([forward(params, tokens[start:start + batch_size], config).data
                           for start in range(0, len(tokens), batch_size)])


def predict_final(params: Mapping[str, np.ndarray], episode: Episode, config: ModelConfig) -> float:
    """
    Prediction of the final label y_n from the full context, y_n itself is never attended to

    :param params: The parameters
    :param episode: The episode
    :param config: The model config
    :return: The prediction
    """
    tokens = tokenize(episode, config.np_dtype)[np.newaxis]
    return float(forward(params, tokens, config).data[0, -1])


def predict_final_batch(params: Mapping[str, np.ndarray], episodes: List[Episode], config: ModelConfig,
                        batch_size: int = 256) -> np.ndarray:
    tokens = np.stack([tokenize(episode, config.np_dtype) for episode in episodes])
    return predict(params, tokens, config, batch_size)[:, -1].astype(np.float64)
