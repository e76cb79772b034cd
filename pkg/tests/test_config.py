"""
Tests the experiment configs, the presets and the command line arguments
"""

from __future__ import annotations

import json
from math import inf

import pytest

from src.extra.config import (EXPERIMENT_KINDS, PRESETS, ExperimentConfig, apply_overrides, get_config,
                              load_config)
from src.extra.io import parse_args


def minimal_config(**fields) -> ExperimentConfig:
    config = {'name': 'small', 'kind': 'transition', 'train angles': [30, 180], 'dims': [2], 'layers': [1]}
    config.update(fields)
    return ExperimentConfig.load(config)


def test_config_hash():
    config = minimal_config()
    assert len(config.config_hash()) == 64
    assert apply_overrides(config, output_dir='elsewhere', workers=4).config_hash() == config.config_hash()
    assert minimal_config(name='renamed').config_hash() == config.config_hash()
    assert apply_overrides(config, seed=3).config_hash() != config.config_hash()
    assert minimal_config(**{'train angles': [30, 90]}).config_hash() != config.config_hash()


def test_save_load():
    config = minimal_config(**{'num tasks': [16, 'inf'], 'estimators': ['ols', 'dmmse']})
    assert config.num_tasks == [16, inf]
    loaded = ExperimentConfig.load(json.loads(json.dumps(config.save())))
    assert loaded.save() == config.save()
    assert loaded.test_angles == [float(delta) for delta in range(0, 166, 15)] + [175.0]


def test_validation():
    with pytest.raises(ValueError):
        minimal_config(kind='bogus')
    with pytest.raises(ValueError):
        minimal_config(**{'train angles': []})
    with pytest.raises(ValueError):
        minimal_config(**{'train angles': [0]})
    with pytest.raises(ValueError):
        minimal_config(**{'test angles': [180]})
    with pytest.raises(ValueError):
        minimal_config(families=['quadratic'])
    with pytest.raises(ValueError):
        minimal_config(**{'context grid': [51]})
    with pytest.raises(ValueError):
        minimal_config(estimators=['ridge'])
    with pytest.raises(ValueError):
        minimal_config(workers=0)
    with pytest.raises(ValueError):
        minimal_config(**{'snapshot episodes': 0})


def test_model_config():
    config = minimal_config(**{'model': {'hidden dim': 16, 'heads': 2}, 'context length': 8})
    model = config.model_config(3, 2)
    assert model.n_layers == 2 and model.input_dim == 3 and model.hidden_dim == 16
    assert model.max_positions == 16 and model.context_length == 8


@pytest.mark.parametrize('preset', PRESETS)
@pytest.mark.parametrize('kind', EXPERIMENT_KINDS)
def test_presets_load(preset, kind):
    config = get_config(preset, kind)
    assert config.kind == kind
    config.model_config(config.dims[0], config.layers[0])


def test_get_config_errors(tmp_path):
    with pytest.raises(ValueError):
        get_config('desk')
    with pytest.raises(ValueError):
        get_config(str(tmp_path / 'missing.json'))

    filename = tmp_path / 'config.json'
    filename.write_text(json.dumps(minimal_config().save()))
    assert load_config(str(filename)).save() == minimal_config().save()
    assert get_config(str(filename)).name == 'small'


def test_parse_args():
    args = parse_args(['transition'])
    assert args.kind == 'transition' and args.config == 'full' and not args.force
    assert args.seed is None and args.workers is None

    args = parse_args(['phase_diagram', '--desk', '-s', '2', '-w', '3', '--force', '-o', 'out'])
    assert args.config == 'desk' and args.seed == 2 and args.workers == 3 and args.force and args.output == 'out'

    args = parse_args(['plots', 'a.csv', 'b.csv'])
    assert args.csvs == ['a.csv', 'b.csv']

    with pytest.raises(SystemExit):
        parse_args(['unknown'])
