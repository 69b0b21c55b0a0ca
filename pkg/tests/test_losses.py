"""Loss kernels: values, analytic gradients, finite-difference checks."""

import math

import numpy as np
import pytest

from centerseg import FocalParams, focal_loss, offset_loss, run_gradient_checks, total_loss
from centerseg.losses import finite_difference_gradient, max_relative_error


def cross_entropy_oracle(pred, true):
    """Direct mean over pixels of the summed -log p_t terms."""
    pred = np.clip(np.asarray(pred, dtype=np.float64), 1e-7, 1 - 1e-7)
    true = np.asarray(true, dtype=np.float64)
    p_t = pred * true + (1 - pred) * (1 - true)
    per_pixel = -np.log(p_t).reshape(pred.shape[0] if pred.ndim > 1 else 1, -1).sum(-1)
    n_pixels = int(np.prod(pred.shape[:-1])) if pred.ndim > 1 else 1
    return float(-np.log(p_t).sum() / n_pixels)


def test_perfect_prediction_is_zero():
    true = np.eye(3)[np.array([[0, 1], [2, 1]])]
    value = focal_loss(true.copy(), true, FocalParams(gamma=2.0)).value
    assert value <= 1e-6


def test_gamma_zero_equals_cross_entropy():
    rng = np.random.default_rng(0)
    pred = rng.uniform(0.05, 0.95, (4, 5, 3))
    true = np.eye(3)[rng.integers(0, 3, (4, 5))]
    got = focal_loss(pred, true, FocalParams(alpha=1.0, gamma=0.0)).value
    assert abs(got - cross_entropy_oracle(pred, true)) <= 1e-12


def test_focal_binary_scalar_example():
    got = focal_loss(np.array([[0.9]]), np.array([[1.0]]), FocalParams(alpha=1.0, gamma=2.0))
    expected = -((0.1) ** 2) * math.log(0.9)
    assert got.value == pytest.approx(expected, abs=1e-12)
    assert got.value == pytest.approx(1.0536e-3, rel=1e-4)


def test_focal_shape_mismatch():
    with pytest.raises(ValueError):
        focal_loss(np.zeros((2, 3)), np.zeros((3, 3)))


def test_focal_nonnegative_and_permutation_invariant():
    rng = np.random.default_rng(1)
    pred = rng.uniform(0.02, 0.98, (30, 3))
    true = np.eye(3)[rng.integers(0, 3, 30)]
    params = FocalParams(alpha=[0.5, 1.0, 2.0], gamma=1.5)
    base = focal_loss(pred, true, params).value
    assert base >= 0
    perm = rng.permutation(30)
    assert focal_loss(pred[perm], true[perm], params).value == pytest.approx(base, rel=1e-12)


def test_offset_loss_zero_when_equal():
    pred = np.ones((3, 3, 2))
    mask = np.ones((3, 3))
    assert offset_loss(pred, pred.copy(), mask).value == 0.0


def test_offset_loss_hand_example():
    pred = np.zeros((1, 2, 2))
    true = np.zeros((1, 2, 2))
    pred[0, 0] = (3.0, 4.0)
    mask = np.array([[1.0, 0.0]])
    got = offset_loss(pred, true, mask)
    assert got.value == 12.5
    # gradient (2/N) * mask * (pred - true)
    assert got.gradient[0, 0, 0] == pytest.approx(2 / 2 * 3.0)
    assert got.gradient[0, 1, 0] == 0.0


def test_offset_loss_unmasked_error_ignored():
    pred = np.zeros((1, 2, 2))
    true = np.zeros((1, 2, 2))
    pred[0, 1] = (5.0, -2.0)
    mask = np.array([[1.0, 0.0]])
    assert offset_loss(pred, true, mask).value == 0.0


def test_offset_loss_dimension_mismatch():
    from centerseg import DimensionMismatch

    with pytest.raises(DimensionMismatch):
        offset_loss(np.zeros((2, 2, 2)), np.zeros((2, 3, 2)), np.ones((2, 2)))


def test_offset_loss_permutation_invariance():
    rng = np.random.default_rng(2)
    pred = rng.normal(0, 2, (40, 2))
    true = rng.normal(0, 2, (40, 2))
    mask = (rng.random(40) < 0.5).astype(float)
    base = offset_loss(pred, true, mask).value
    perm = rng.permutation(40)
    assert offset_loss(pred[perm], true[perm], mask[perm]).value == pytest.approx(base, rel=1e-12)


def test_total_loss():
    assert total_loss(2.0, 4.0, 0.25) == 3.5
    assert total_loss(7.0, 123.0, 1.0) == 7.0
    assert total_loss(3.0, 5.0, 0.5) == 4.0
    with pytest.raises(ValueError):
        total_loss(1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        total_loss(1.0, 1.0, -0.1)


def test_focal_gradient_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        pred = rng.uniform(0.1, 0.9, (4, 4, 3))
        true = np.eye(3)[rng.integers(0, 3, (4, 4))]
        params = FocalParams(alpha=rng.uniform(0.3, 1.5, 3), gamma=float(rng.choice([0.0, 1.0, 2.0])))
        analytic = focal_loss(pred, true, params).gradient
        numeric = finite_difference_gradient(lambda a: focal_loss(a, true, params).value, pred.copy())
        assert max_relative_error(analytic, numeric) <= 1e-4


def test_offset_gradient_finite_differences():
    rng = np.random.default_rng(4)
    for _ in range(10):
        pred = rng.normal(0, 3, (5, 3, 2))
        true = rng.normal(0, 3, (5, 3, 2))
        mask = (rng.random((5, 3)) < 0.7).astype(float)
        analytic = offset_loss(pred, true, mask).gradient
        numeric = finite_difference_gradient(lambda a: offset_loss(a, true, mask).value, pred.copy())
        assert max_relative_error(analytic, numeric) <= 1e-4


def test_gradcheck_harness_passes_and_negative_control_fails():
    reports = run_gradient_checks(n_cases=6, seed=0)
    assert all(r["passed"] for r in reports)
    corrupted = run_gradient_checks(n_cases=6, seed=0, corrupt=True)
    assert not all(r["passed"] for r in corrupted)


def test_focal_params_validation():
    with pytest.raises(ValueError):
        FocalParams(alpha=-1.0)
    with pytest.raises(ValueError):
        FocalParams(gamma=-0.5)
