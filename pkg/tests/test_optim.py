import numpy as np
import pytest

from helpers import zero_model
from pimdn.errors import InvalidConfig, NonFiniteGradient
from pimdn.losses import Batch, ResidualSpec
from pimdn.mdn import Architecture, fit_standardization, init_params
from pimdn.optim import AdamState, TrainConfig, TrainLog, adam_init, adam_step, train
from pimdn.problems import gen_bifurcation


def reference_adam(params, grads, state):
    """Naive per-element loops; the independent oracle for adam_step."""
    import math

    t = state.step + 1
    m = [0.0] * len(params)
    v = [0.0] * len(params)
    new = [0.0] * len(params)
    for i in range(len(params)):
        m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i]
        v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] ** 2
        m_hat = m[i] / (1.0 - state.beta1**t)
        v_hat = v[i] / (1.0 - state.beta2**t)
        new[i] = params[i] - state.lr * m_hat / (math.sqrt(v_hat) + state.eps)
    return np.array(new), np.array(m), np.array(v)


def test_first_step_has_learning_rate_magnitude():
    state = adam_init(1, lr=1e-3)
    params, state = adam_step(np.array([1.0]), np.array([5.0]), state)
    assert params[0] == pytest.approx(0.999, abs=1e-9)
    assert state.step == 1


def test_zero_gradient_leaves_params_unchanged():
    state = adam_init(3)
    params = np.array([1.0, -2.0, 0.5])
    new, _ = adam_step(params, np.zeros(3), state)
    assert np.array_equal(new, params)


def test_adam_matches_naive_reference_bitwise():
    rng = np.random.default_rng(0)
    params = rng.normal(size=20)
    state = adam_init(20, lr=3e-3)
    for _ in range(5):
        grads = rng.normal(size=20)
        ref_params, ref_m, ref_v = reference_adam(params, grads, state)
        params, state = adam_step(params, grads, state)
        assert np.array_equal(params, ref_params)
        assert np.array_equal(state.m, ref_m)
        assert np.array_equal(state.v, ref_v)


def test_non_finite_gradient_rejected_in_step():
    state = adam_init(2)
    with pytest.raises(NonFiniteGradient):
        adam_step(np.zeros(2), np.array([1.0, np.nan]), state)


def test_single_iteration_single_log_row():
    model = zero_model(hidden=4, n_components=2)
    batch = Batch([0.0, 1.0], [0.5, -0.5])
    trained, log = train(model, batch, TrainConfig(iterations=1))
    assert len(log) == 1
    assert not np.array_equal(trained.params, model.params)


def test_train_log_csv_round_trip(tmp_path):
    log = TrainLog([1.0, 0.5], [0.1, 0.05], [1.1, 0.55])
    path = tmp_path / "log.csv"
    log.to_csv(path)
    back = TrainLog.from_csv(path)
    assert np.array_equal(back.nll, log.nll)
    assert np.array_equal(back.total, log.total)


def test_zero_weight_and_zero_residual_trajectories_identical():
    model = fit_standardization(init_params(Architecture(1, 6, 2, 2), 1),
                                np.array([0.0, 1.0, 2.0]), np.array([0.1, -0.2, 0.4]))
    batch = Batch([0.0, 1.0, 2.0], [0.1, -0.2, 0.4])

    def zero_residual(ctx):
        return ctx.tape.apply("mul", ctx.mu, ctx.tape.leaf(0.0))

    plain, _ = train(model, batch, TrainConfig(iterations=50))
    spec = ResidualSpec("custom", h=1e-2, custom_fn=zero_residual)
    with_zero, _ = train(model, batch, TrainConfig(iterations=50, lambda_weight=1.0,
                                                   residual=spec))
    assert np.array_equal(plain.params, with_zero.params)


def test_training_reduces_loss_in_aggregate():
    ds = gen_bifurcation(600, seed=1)
    model = fit_standardization(init_params(Architecture(1, 16, 2, 3), 1),
                                ds.contexts, ds.targets)
    trained, log = train(model, Batch(ds.contexts, ds.targets), TrainConfig(iterations=800))
    assert np.mean(log.total[-100:]) < np.mean(log.total[:100])


def test_divergent_run_reports_iteration_and_partial_log():
    model = init_params(Architecture(1, 4, 2, 2), 3)
    batch = Batch([0.3, 1.7], [0.9, -0.2])
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteGradient) as err:
            train(model, batch, TrainConfig(iterations=50, lr=1e200))
    assert err.value.iteration >= 1
    assert len(err.value.partial_log) == err.value.iteration - 1


def test_config_validation():
    with pytest.raises(InvalidConfig):
        TrainConfig(iterations=0)
    with pytest.raises(InvalidConfig):
        TrainConfig(iterations=10, lr=0.0)
    with pytest.raises(InvalidConfig):
        TrainConfig(iterations=10, lambda_weight=-1.0)


def test_adam_shape_mismatch_rejected():
    with pytest.raises(InvalidConfig):
        adam_step(np.zeros(3), np.zeros(2), adam_init(3))
