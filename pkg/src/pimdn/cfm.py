"""Conditional flow matching baseline.

A small ELU network learns a time-dependent velocity field v(u, t, x)
whose forward-Euler flow transports a standard Gaussian base draw onto
the conditional target distribution.  Training regresses the network
onto the constant velocity of a linear bridge between a base draw and a
data point; both the bridge and the integration happen in standardized
target units (the base distribution is N(0, 1) per target dimension).

Network input columns are (u, t, context); the flat parameter layout
follows the same row-major weights-then-biases convention as the mixture
network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import InvalidConfig, InvalidInput, SamplerDiverged
from .losses import Batch
from .mdn import affine_from_flat, mlp_param_count
from .optim import TrainConfig, TrainLog, adam_init, adam_step
from .rng import STREAM_INIT, STREAM_TRAIN_NOISE, make_rng


@dataclass
class CfmModel:
    """Velocity network plus standardization statistics."""

    params: np.ndarray
    hidden: int = 20
    n_layers: int = 2
    d_x: int = 1
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    u_mean: float = 0.0
    u_std: float = 1.0

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = cfm_param_count(self.hidden, self.n_layers, self.d_x)
        if self.params.shape != (expected,):
            raise InvalidConfig(
                f"parameter vector has length {self.params.size}, expected {expected}"
            )
        if self.x_mean is None:
            self.x_mean = np.zeros(self.d_x)
        if self.x_std is None:
            self.x_std = np.ones(self.d_x)
        self.x_mean = np.asarray(self.x_mean, dtype=np.float64).reshape(self.d_x)
        self.x_std = np.asarray(self.x_std, dtype=np.float64).reshape(self.d_x)

    @property
    def dims(self) -> list[int]:
        return [2 + self.d_x] + [self.hidden] * self.n_layers + [1]


def cfm_param_count(hidden: int = 20, n_layers: int = 2, d_x: int = 1) -> int:
    """Parameter count of the velocity network (inputs u, t, context)."""
    return mlp_param_count([2 + d_x] + [hidden] * n_layers + [1])


def init_cfm(seed: int, hidden: int = 20, n_layers: int = 2, d_x: int = 1) -> CfmModel:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases."""
    rng = make_rng(seed, STREAM_INIT)
    dims = [2 + d_x] + [hidden] * n_layers + [1]
    chunks = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(1.0 / d_in)
        chunks.append(rng.uniform(-bound, bound, size=d_in * d_out))
        chunks.append(np.zeros(d_out))
    return CfmModel(params=np.concatenate(chunks), hidden=hidden, n_layers=n_layers, d_x=d_x)


def fit_standardization_cfm(model: CfmModel, contexts, targets) -> CfmModel:
    xs = np.asarray(contexts, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    us = np.asarray(targets, dtype=np.float64)
    x_std = xs.std(axis=0)
    u_std = float(us.std())
    return replace(
        model,
        params=model.params.copy(),
        x_mean=xs.mean(axis=0),
        x_std=np.where(x_std > 0.0, x_std, 1.0),
        u_mean=float(us.mean()),
        u_std=u_std if u_std > 0.0 else 1.0,
    )


def velocity_on_tape(tape: ad.Tape, params_var: ad.Var, inputs: np.ndarray,
                     dims: list[int]) -> ad.Var:
    """Network forward pass on an (n, 2 + d_x) input matrix."""
    a = tape.leaf(inputs)
    offset = 0
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        a, offset = affine_from_flat(tape, params_var, a, offset, d_in, d_out)
        if i < len(dims) - 2:
            a = tape.apply("elu", a)
    return a


def velocity_batch(model: CfmModel, u_std_units: np.ndarray, t: np.ndarray,
                   x_std_units: np.ndarray) -> np.ndarray:
    """Velocity values (standardized units) at given states/times/contexts."""
    inputs = np.column_stack([u_std_units, t, x_std_units])
    tape = ad.Tape()
    p = tape.param(model.params)
    return velocity_on_tape(tape, p, inputs, model.dims).value[:, 0]


def bridge(u0, u1, t):
    """Linear interpolation u_t = (1 - t) u0 + t u1 and its constant
    pathwise velocity u1 - u0."""
    u0 = np.asarray(u0, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise InvalidInput("bridge time must lie in [0, 1]")
    return (1.0 - t) * u0 + t * u1, u1 - u0


def cfm_loss(model: CfmModel, batch: Batch, rng: np.random.Generator) -> ad.Var:
    """Mean squared error between the network velocity and the bridge
    velocity, with fresh base draws u0 ~ N(0,1) and times t ~ U(0,1).

    Draw order: n base normals, then n time uniforms.
    """
    n = len(batch)
    if n == 0:
        raise InvalidInput("cfm_loss requires a nonempty batch")
    x_std = (batch.contexts[:, None] - model.x_mean) / model.x_std
    u1 = (batch.targets - model.u_mean) / model.u_std
    u0 = rng.standard_normal(n)
    t = rng.random(n)
    u_t, w = bridge(u0, u1, t)
    inputs = np.column_stack([u_t, t, x_std[:, 0]])
    tape = ad.Tape()
    p = tape.param(model.params)
    v = velocity_on_tape(tape, p, inputs, model.dims)
    diff = tape.apply("sub", v, tape.leaf(w[:, None]))
    return ad.mean_all(tape.apply("square", diff))


def cfm_sample(model: CfmModel, context: float, n_steps: int,
               rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """Draw target samples by forward-Euler integration of the velocity
    field from t=0 to t=1, context held fixed.  Returns physical units."""
    if n_steps < 1:
        raise InvalidInput("n_steps must be >= 1")
    x_std = (float(context) - model.x_mean[0]) / model.x_std[0]
    u = rng.standard_normal(n)
    dt = 1.0 / n_steps
    xcol = np.full(n, x_std)
    for k in range(n_steps):
        t = np.full(n, k * dt)
        u = u + dt * velocity_batch(model, u, t, xcol)
    if not np.all(np.isfinite(u)):
        raise SamplerDiverged("flow integration left the finite range")
    return model.u_mean + model.u_std * u


def train_cfm(model: CfmModel, batch: Batch, config: TrainConfig):
    """Adam on the flow-matching objective with fresh (u0, t) every
    iteration (stochastic objective, unlike the full-batch mixture side).

    The log stores the regression loss in both the nll and total columns.
    """
    noise_rng = make_rng(config.seed, STREAM_TRAIN_NOISE)
    theta = model.params.copy()
    state = adam_init(theta.size, config.lr, config.beta1, config.beta2, config.eps)
    losses = np.empty(config.iterations)
    work = replace(model, params=theta)
    for it in range(1, config.iterations + 1):
        work.params = theta
        loss = cfm_loss(work, batch, noise_rng)
        grads = loss.tape.backward(loss)[0]
        losses[it - 1] = float(loss.value)
        theta, state = adam_step(theta, grads, state)
    trained = replace(model, params=theta)
    return trained, TrainLog(losses, np.zeros_like(losses), losses)
