"""Conditional Gaussian mixture network: forward pass, density, moments,
sampling, and initialization.

The network is an ELU multilayer perceptron with three linear heads that
produce, for each query context, the mixture logits, component means, and
component log standard deviations.  Mixture weights go through a
max-shifted softmax; standard deviations through ``exp`` of a clamped
pre-activation so they stay strictly positive.

Networks operate internally on standardized inputs and targets.  A model
carries its standardization statistics (identity by default); the public
forward pass accepts physical-unit contexts and returns physical-unit
mixture parameters.

Flat parameter layout (row-major, fixed for checkpoint portability)::

    W1 (d_x, h), b1 (h,), W2 (h, h), b2 (h,), ..., W_L, b_L,
    W_pi (h, M), b_pi (M,), W_mu (h, M), b_mu (M,), W_sigma (h, M), b_sigma (M,)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import InvalidConfig, InvalidInput
from .rng import STREAM_INIT, make_rng

LOG_2PI = math.log(2.0 * math.pi)

#: pre-activation clamp for the log standard deviation head
SIGMA_CLAMP = (-10.0, 10.0)


@dataclass(frozen=True)
class Architecture:
    """Shape of the mixture network (targets are scalar throughout)."""

    d_x: int = 1
    hidden: int = 16
    n_layers: int = 2
    n_components: int = 3
    d_u: int = 1
    activation: str = "elu"

    def __post_init__(self):
        if self.hidden < 1 or self.n_components < 1 or self.n_layers < 1 or self.d_x < 1:
            raise InvalidConfig("architecture dimensions must be >= 1")
        if self.d_u != 1:
            raise InvalidConfig("only scalar targets are supported")
        if self.activation != "elu":
            raise InvalidConfig("only elu activation is supported")


def param_count(arch: Architecture) -> int:
    """Number of trainable parameters for the given architecture."""
    h, m = arch.hidden, arch.n_components
    body = (arch.d_x * h + h) + (arch.n_layers - 1) * (h * h + h)
    heads = h * 3 * m + 3 * m
    return body + heads


def mlp_param_count(dims: list[int]) -> int:
    """Parameter count of a plain MLP with the given layer widths."""
    return sum(d_in * d_out + d_out for d_in, d_out in zip(dims[:-1], dims[1:]))


@dataclass
class MdnModel:
    """Architecture, flat parameter vector, and standardization stats."""

    arch: Architecture
    params: np.ndarray
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    u_mean: float = 0.0
    u_std: float = 1.0
    sigma_clamp: tuple[float, float] = SIGMA_CLAMP

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = param_count(self.arch)
        if self.params.shape != (expected,):
            raise InvalidConfig(
                f"parameter vector has length {self.params.size}, expected {expected}"
            )
        if self.x_mean is None:
            self.x_mean = np.zeros(self.arch.d_x)
        if self.x_std is None:
            self.x_std = np.ones(self.arch.d_x)
        self.x_mean = np.asarray(self.x_mean, dtype=np.float64).reshape(self.arch.d_x)
        self.x_std = np.asarray(self.x_std, dtype=np.float64).reshape(self.arch.d_x)


@dataclass
class MixtureParams:
    """Gaussian mixture at one query point, in target units."""

    pi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if not (self.pi.shape == self.mu.shape == self.sigma.shape):
            raise InvalidInput("pi, mu, sigma must have equal lengths")
        if np.any(self.pi < 0.0) or abs(self.pi.sum() - 1.0) > 1e-9:
            raise InvalidInput("mixture weights must be a probability vector")
        if np.any(self.sigma <= 0.0):
            raise InvalidInput("component standard deviations must be positive")


def param_layout(arch: Architecture) -> dict[str, tuple[int, tuple]]:
    """Offsets and shapes of every weight block in the flat vector.

    Keys: w1, b1, ..., w{L}, b{L} for the body, then w_pi, b_pi, w_mu,
    b_mu, w_sigma, b_sigma for the heads.
    """
    h, m = arch.hidden, arch.n_components
    layout: dict[str, tuple[int, tuple]] = {}
    offset = 0

    def block(name: str, shape: tuple) -> None:
        nonlocal offset
        layout[name] = (offset, shape)
        offset += int(np.prod(shape))

    block("w1", (arch.d_x, h))
    block("b1", (h,))
    for i in range(2, arch.n_layers + 1):
        block(f"w{i}", (h, h))
        block(f"b{i}", (h,))
    for head in ("pi", "mu", "sigma"):
        block(f"w_{head}", (h, m))
        block(f"b_{head}", (m,))
    return layout


# -- tape-level building blocks -------------------------------------------

def affine_from_flat(tape, params_var, x_var, offset: int, d_in: int, d_out: int):
    """One affine layer whose weights live in a flat parameter leaf."""
    w = tape.slice(params_var, offset, offset + d_in * d_out, (d_in, d_out))
    offset += d_in * d_out
    b = tape.slice(params_var, offset, offset + d_out, (d_out,))
    offset += d_out
    return tape.affine(x_var, w, b), offset


def heads_on_tape(tape, params_var, x_std_var, arch: Architecture,
                  sigma_clamp: tuple[float, float] = SIGMA_CLAMP):
    """Run the network on standardized contexts already on the tape.

    Returns (log_pi, pi, mu, sigma) as (n, M) variables in standardized
    target units.
    """
    h, m = arch.hidden, arch.n_components
    a, offset = affine_from_flat(tape, params_var, x_std_var, 0, arch.d_x, h)
    a = tape.apply("elu", a)
    for _ in range(arch.n_layers - 1):
        a, offset = affine_from_flat(tape, params_var, a, offset, h, h)
        a = tape.apply("elu", a)
    logits, offset = affine_from_flat(tape, params_var, a, offset, h, m)
    mu, offset = affine_from_flat(tape, params_var, a, offset, h, m)
    sigma_pre, offset = affine_from_flat(tape, params_var, a, offset, h, m)
    log_pi = tape.apply("sub", logits, ad.logsumexp_rows(logits))
    pi = tape.apply("exp", log_pi)
    sigma = tape.apply("exp", ad.clamp(sigma_pre, *sigma_clamp))
    return log_pi, pi, mu, sigma


# -- forward pass -----------------------------------------------------------

def standardize_contexts(model: MdnModel, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    return (xs - model.x_mean) / model.x_std


def mdn_forward_batch(model: MdnModel, xs: np.ndarray):
    """Mixture parameters at many contexts; returns (pi, mu, sigma) arrays
    of shape (n, M) in physical target units."""
    xs = np.asarray(xs, dtype=np.float64)
    if not np.all(np.isfinite(xs)):
        raise InvalidInput("contexts must be finite")
    x_std = standardize_contexts(model, xs)
    if x_std.shape[1] != model.arch.d_x:
        raise InvalidInput(f"contexts must have {model.arch.d_x} columns")
    tape = ad.Tape()
    p = tape.param(model.params)
    _, pi, mu, sigma = heads_on_tape(tape, p, tape.leaf(x_std), model.arch, model.sigma_clamp)
    return (
        pi.value,
        model.u_mean + model.u_std * mu.value,
        model.u_std * sigma.value,
    )


def mdn_forward(model: MdnModel, x) -> MixtureParams:
    """Mixture parameters at one context (physical units)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    pi, mu, sigma = mdn_forward_batch(model, x[None, :])
    return MixtureParams(pi[0], mu[0], sigma[0])


# -- density and moments ----------------------------------------------------

def component_log_weights(pi: np.ndarray) -> np.ndarray:
    """log pi with zero-weight components mapped to -inf (they then
    contribute exactly nothing under the max-shifted sum)."""
    with np.errstate(divide="ignore"):
        return np.where(pi > 0.0, np.log(np.maximum(pi, 1e-300)), -np.inf)


def log_pdf_grid(pi, mu, sigma, u: np.ndarray) -> np.ndarray:
    """log density of one mixture at many target values (vectorized)."""
    u = np.asarray(u, dtype=np.float64)
    z = (u[..., None] - mu) / sigma
    comp = component_log_weights(pi) - np.log(sigma) - 0.5 * LOG_2PI - 0.5 * z * z
    m = comp.max(axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(comp - m), axis=-1, keepdims=True)))[..., 0]


def log_pdf(mp: MixtureParams, u: float) -> float:
    """Max-shifted log-sum-exp evaluation of the mixture log density."""
    return float(log_pdf_grid(mp.pi, mp.mu, mp.sigma, np.asarray(float(u))))


def pdf(mp: MixtureParams, u) -> np.ndarray:
    return np.exp(log_pdf_grid(mp.pi, mp.mu, mp.sigma, np.asarray(u, dtype=np.float64)))


def mean(mp: MixtureParams) -> float:
    """Closed-form mixture mean."""
    return float(np.sum(mp.pi * mp.mu))


def second_moment(mp: MixtureParams) -> float:
    """Closed-form mixture second moment."""
    return float(np.sum(mp.pi * (mp.sigma**2 + mp.mu**2)))


# -- sampling ----------------------------------------------------------------

def sample_n(mp: MixtureParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n values: component by inverse-CDF on one uniform per draw,
    then a normal via the generator's ziggurat ``standard_normal``.

    Draw order is fixed (n uniforms, then n normals) so streams are
    reproducible under a seeded generator.
    """
    cdf = np.cumsum(mp.pi)
    cdf[-1] = 1.0
    comp = np.searchsorted(cdf, rng.random(n), side="right")
    comp = np.minimum(comp, len(mp.pi) - 1)
    z = rng.standard_normal(n)
    return mp.mu[comp] + mp.sigma[comp] * z


def sample(mp: MixtureParams, rng: np.random.Generator) -> float:
    """Draw one value (equivalent to ``sample_n(mp, 1, rng)[0]``)."""
    return float(sample_n(mp, 1, rng)[0])


# -- initialization -----------------------------------------------------------

def init_params(arch: Architecture, seed: int) -> MdnModel:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases.

    Zero log-sigma head biases give unit initial standard deviations in
    standardized target units.  Standardization starts as the identity.
    """
    rng = make_rng(seed, STREAM_INIT)
    h, m = arch.hidden, arch.n_components
    dims = [(arch.d_x, h)] + [(h, h)] * (arch.n_layers - 1) + [(h, m)] * 3
    chunks = []
    for d_in, d_out in dims:
        bound = math.sqrt(1.0 / d_in)
        chunks.append(rng.uniform(-bound, bound, size=d_in * d_out))
        chunks.append(np.zeros(d_out))
    return MdnModel(arch=arch, params=np.concatenate(chunks))


def fit_standardization(model: MdnModel, contexts: np.ndarray, targets: np.ndarray) -> MdnModel:
    """Return a copy of the model with standardization statistics taken
    from a dataset (population mean/std; constant columns keep std 1)."""
    xs = np.asarray(contexts, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    us = np.asarray(targets, dtype=np.float64)
    x_std = xs.std(axis=0)
    x_std = np.where(x_std > 0.0, x_std, 1.0)
    u_std = float(us.std())
    return replace(
        model,
        params=model.params.copy(),
        x_mean=xs.mean(axis=0),
        x_std=x_std,
        u_mean=float(us.mean()),
        u_std=u_std if u_std > 0.0 else 1.0,
    )
