import numpy as np
import pytest

from helpers import assert_grad_close, fd_gradient
from pimdn.cfm import (
    CfmModel,
    bridge,
    cfm_loss,
    cfm_param_count,
    cfm_sample,
    fit_standardization_cfm,
    init_cfm,
    train_cfm,
)
from pimdn.errors import InvalidInput
from pimdn.losses import Batch
from pimdn.optim import TrainConfig
from pimdn.rng import make_rng


def test_parameter_count_is_521():
    assert cfm_param_count(hidden=20, n_layers=2, d_x=1) == 521
    assert init_cfm(0).params.size == 521


def test_bridge_endpoints():
    u_t, v = bridge(2.0, -1.0, 0.0)
    assert u_t == 2.0 and v == -3.0
    u_t, v = bridge(2.0, -1.0, 1.0)
    assert u_t == -1.0


def test_bridge_constant_path_when_endpoints_equal():
    t = np.linspace(0, 1, 11)
    u_t, v = bridge(np.full(11, 0.7), np.full(11, 0.7), t)
    assert np.array_equal(u_t, np.full(11, 0.7))
    assert np.array_equal(v, np.zeros(11))


def test_bridge_rejects_time_outside_unit_interval():
    with pytest.raises(InvalidInput):
        bridge(0.0, 1.0, 1.5)


def test_loss_deterministic_under_seed():
    model = init_cfm(3)
    batch = Batch(np.linspace(-1, 1, 32), np.sin(np.linspace(-1, 1, 32)))
    a = float(cfm_loss(model, batch, make_rng(7, 4)).value)
    b = float(cfm_loss(model, batch, make_rng(7, 4)).value)
    assert a == b


def test_zero_model_loss_matches_moment_oracle():
    # v = 0 gives E||u1 - u0||^2 = Var(u1_std) + 1 = 2 for standardized data
    rng = np.random.default_rng(0)
    xs = rng.normal(size=4000)
    us = 2.0 * rng.normal(size=4000) + 1.0
    model = fit_standardization_cfm(init_cfm(0), xs, us)
    model.params[:] = 0.0
    value = float(cfm_loss(model, Batch(xs, us), make_rng(1, 5)).value)
    assert value == pytest.approx(2.0, abs=0.15)


def test_cheating_network_reaches_zero_loss():
    # freeze the base draws, pick targets u1 = u0 + 3 so every bridge
    # velocity equals 3, and rig a bias-only network with v = 3 everywhere
    u0 = make_rng(0, 6).standard_normal(8)
    xs = np.linspace(-1.0, 1.0, 8)
    model = init_cfm(1)
    model.params[:] = 0.0
    model.params[-1] = 3.0
    value = cfm_loss(model, Batch(xs, u0 + 3.0), make_rng(0, 6))
    assert float(value.value) == 0.0


def test_zero_network_loss_on_frozen_draws():
    model = init_cfm(1)
    model.params[:] = 0.0
    value = cfm_loss(model, Batch(np.zeros(8), np.zeros(8)), make_rng(0, 6))
    u0 = make_rng(0, 6).standard_normal(8)
    assert float(value.value) == pytest.approx(np.mean(u0**2), abs=1e-12)


def test_loss_gradient_matches_finite_differences():
    model = fit_standardization_cfm(init_cfm(2, hidden=6),
                                    np.linspace(-1, 1, 10), np.linspace(2, 3, 10))
    batch = Batch(np.linspace(-1, 1, 10), np.linspace(2, 3, 10))

    def f(theta):
        trial = CfmModel(params=theta, hidden=6, n_layers=2, d_x=1,
                         x_mean=model.x_mean, x_std=model.x_std,
                         u_mean=model.u_mean, u_std=model.u_std)
        return float(cfm_loss(trial, batch, make_rng(5, 7)).value)

    loss = cfm_loss(model, batch, make_rng(5, 7))
    assert_grad_close(loss.tape.backward(loss)[0], fd_gradient(f, model.params))


def test_zero_velocity_returns_base_draw():
    model = init_cfm(0)
    model.params[:] = 0.0
    draws = cfm_sample(model, 0.3, n_steps=50, rng=make_rng(9, 8), n=4)
    base = make_rng(9, 8).standard_normal(4)
    assert np.allclose(draws, base, atol=1e-12)


def test_constant_velocity_shifts_by_one():
    model = init_cfm(0)
    model.params[:] = 0.0
    model.params[-1] = 3.0  # output bias: v = 3 everywhere
    draws = cfm_sample(model, 0.0, n_steps=100, rng=make_rng(2, 9), n=6)
    base = make_rng(2, 9).standard_normal(6)
    assert np.allclose(draws, base + 3.0, atol=1e-9)


def test_sampling_deterministic_under_seed():
    model = init_cfm(4)
    a = cfm_sample(model, 0.5, 100, make_rng(11, 10), n=8)
    b = cfm_sample(model, 0.5, 100, make_rng(11, 10), n=8)
    assert np.array_equal(a, b)


def test_training_reduces_loss():
    rng = np.random.default_rng(1)
    xs = rng.uniform(-1, 1, 512)
    us = np.where(xs > 0, 1.0, -1.0) + 0.05 * rng.standard_normal(512)
    model = fit_standardization_cfm(init_cfm(1), xs, us)
    trained, log = train_cfm(model, Batch(xs, us), TrainConfig(iterations=1500, seed=1))
    assert np.mean(log.total[-100:]) < np.mean(log.total[:100])


def test_step_refinement_keeps_distribution():
    rng = np.random.default_rng(2)
    xs = rng.uniform(-1, 1, 512)
    us = xs + 0.1 * rng.standard_normal(512)
    model = fit_standardization_cfm(init_cfm(2), xs, us)
    trained, _ = train_cfm(model, Batch(xs, us), TrainConfig(iterations=2000, seed=2))
    a = np.sort(cfm_sample(trained, 0.4, 100, make_rng(0, 11), n=5000))
    b = np.sort(cfm_sample(trained, 0.4, 200, make_rng(1, 11), n=5000))
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    assert np.max(np.abs(fa - fb)) < 0.05
