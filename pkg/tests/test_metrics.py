"""
Tests the loss metrics, the noise to signal ratio, the phase classification and the transition detection
"""

from __future__ import annotations

from math import radians

import numpy as np
import pytest

from src.baselines.predictor import FixedPredictor, OraclePredictor, ZeroPredictor
from src.core.core import RngStream
from src.core.episode import InputDistribution
from src.core.sphere import CapSpec, cap_mean_cosine
from src.extra.result import EvalRecord, Phase
from src.metrics import losses
from src.metrics.phase import classify_phase, detect_transition, nsr


def test_nsr():
    assert nsr({0: 1.0, 15: 3.0}) == pytest.approx(0.5)
    assert nsr({0: 1.0, 15: 1.0, 30: 1.0}) == 0
    with pytest.raises(ValueError):
        nsr({0: 1.0})
    with pytest.raises(ValueError):
        nsr({0: 0.0, 15: 0.0})


def test_classify_phase():
    assert classify_phase(0.5, 0.5) == Phase.IWL
    assert classify_phase(0.5, 0.0) == Phase.IWL
    assert classify_phase(1e-3, 0.2) == Phase.IN_DIST_ICL
    assert classify_phase(1e-3, 1e-3) == Phase.OOD_ICL
    assert classify_phase(1e-2, 0) == Phase.IWL
    assert classify_phase(0.05, 0.05, threshold=0.1) == Phase.OOD_ICL


def test_detect_transition():
    monotone = detect_transition({30: 1.2, 60: 0.8, 90: 0.4, 120: 0.2, 180: 0.1})
    assert monotone.phi_c == 90 and monotone.monotone and monotone.crossings == [90]

    # A dip below the threshold that recovers does not count as the transition
    dip = detect_transition({30: 1.2, 60: 0.3, 90: 0.7, 120: 0.2, 180: 0.1})
    assert dip.phi_c == 120 and not dip.monotone and dip.crossings == [60, 90, 120]

    assert detect_transition({30: 1.2, 60: 0.8, 180: 0.6}).phi_c is None
    assert detect_transition({30: 0.1, 60: 0.1, 180: 0.1}).phi_c == 30
    assert detect_transition({30: 1.0, 60: 0.4}, nsr_threshold=0.3).phi_c is None


def test_max_excess():
    assert losses.max_excess([1.0, 2.0, 0.5], [0.5, 1.0, 1.0]) == 1.0
    assert losses.max_excess([0.1, 0.2], [0.3, 0.4]) == pytest.approx(-0.2)
    with pytest.raises(AssertionError):
        losses.max_excess([], [])


def test_zero_predictor_loss():
    record = losses.test_loss(ZeroPredictor(), CapSpec(3, radians(90), radius=2), InputDistribution(), 5, 0.0,
                              20000, RngStream(0))
    print(f'\n{record}')
    assert abs(record.raw_loss - 4) < 0.15
    assert record.normalized_loss == pytest.approx(record.raw_loss / 4)
    assert record.radius == 2 and record.band_width == pytest.approx(90)


def test_oracle_predictor_noise_floor():
    record = losses.test_loss(OraclePredictor(), CapSpec(3, radians(60)), InputDistribution(), 5, 0.25, 5000,
                              RngStream(1))
    assert abs(record.raw_loss - 0.25) < 0.02
    assert abs(record.excess_loss) < 0.02


def test_normalisation():
    predictor = FixedPredictor(np.array([1.0, 0.0, 0.0]))
    inside = losses.test_loss(predictor, losses.evaluation_band(3, 0), InputDistribution(), 4, 0.0, 200,
                              RngStream(2), train_phi=60)
    assert inside.normalized_loss == pytest.approx(inside.raw_loss / 3)

    outside = losses.test_loss(predictor, losses.evaluation_band(3, 90), InputDistribution(), 4, 0.0, 200,
                               RngStream(3), train_phi=60)
    assert outside.normalized_loss == pytest.approx(outside.raw_loss / 4)

    with pytest.raises(ValueError):
        losses.normalize_in_dist(1.0, 0.0)


def test_delta_grid():
    grid = losses.default_delta_grid()
    assert len(grid) == 13 and grid[0] == 0 and grid[-2] == 165 and grid[-1] == 175

    final = losses.evaluation_band(3, 175)
    assert final.start_angle + final.width == pytest.approx(radians(180))


def test_context_length_curve():
    curve = losses.context_length_curve(OraclePredictor(), CapSpec(2, radians(90)), InputDistribution(), 6,
                                        [1, 3, 6], 0.0, 50, RngStream(4))
    assert list(curve['k']) == [1, 3, 6]
    assert np.allclose(curve['model_loss'], 0)
    # Two pairs determine a two dimensional linear task
    assert curve['ols_loss'].iloc[-1] < 1e-12

    with pytest.raises(ValueError):
        losses.context_length_curve(OraclePredictor(), CapSpec(2, radians(90)), InputDistribution(), 6, [0, 3],
                                    0.0, 10, RngStream(5))
    with pytest.raises(ValueError):
        losses.context_length_curve(OraclePredictor(), CapSpec(2, radians(90)), InputDistribution(), 6, [7],
                                    0.0, 10, RngStream(5))


def test_radius_curve():
    records = losses.radius_curve(ZeroPredictor(), CapSpec(2, radians(45)), InputDistribution(), 3,
                                  radii=(0.5, 1.5), n_episodes=100, rng=RngStream(6))
    assert [record.radius for record in records] == [0.5, 1.5]
    assert records[0].raw_loss < records[1].raw_loss


def test_eval_record_save_load():
    record = EvalRecord('transformer', 60.0, 15.0, 5.0, np.inf, 3, 16, 1.0, 0.5, 0.125, 100, 0.01, 0.25)
    loaded = EvalRecord.load(record.save())
    assert loaded.save() == record.save()
    assert record.save()['N'] == 'inf' and record.excess_loss == 0.25


def test_zero_predictor_radius_curve():
    records = losses.radius_curve(ZeroPredictor(), CapSpec(3, radians(90)), InputDistribution(), 4,
                                  n_episodes=2000, rng=RngStream(7))
    assert [record.radius for record in records] == list(losses.DEFAULT_RADII)
    for record in records:
        assert abs(record.raw_loss - record.radius ** 2) < 4 * record.stderr, str(record)


def test_fixed_predictor_loss_identity():
    # With isotropic inputs the loss of a fixed w_hat is E|w_hat - w|^2 + noise, and the cap mean of w is
    # the mean cosine times the pole
    rng = RngStream(8)
    for case in range(20):
        dim = int(rng.integers(2, 7))
        pole = rng.normal(size=dim)
        pole /= np.linalg.norm(pole)
        half_angle = float(rng.uniform(radians(10), radians(180)))
        radius = float(rng.uniform(0.5, 1.5))
        noise_var = (0.0, 0.1, 0.25)[int(rng.integers(0, 3))]
        w_hat = rng.normal(size=dim)

        spec = CapSpec(dim, half_angle, pole, radius)
        record = losses.test_loss(FixedPredictor(w_hat), spec, InputDistribution(), 3, noise_var, 4000,
                                  RngStream(9, case))
        mean_w = radius * cap_mean_cosine(half_angle, dim) * pole
        expected = w_hat @ w_hat - 2 * w_hat @ mean_w + radius ** 2 + noise_var
        assert abs(record.raw_loss - expected) <= 3.5 * record.stderr, f'case {case}: {record}, expected {expected}'
