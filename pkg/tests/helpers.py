"""Shared oracles and rigged networks for the test suite."""

from __future__ import annotations

import numpy as np

from pimdn.mdn import Architecture, MdnModel, init_params, param_layout


def fd_gradient(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        up[i] += h
        down = theta.copy()
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad


def assert_grad_close(g_ad: np.ndarray, g_fd: np.ndarray,
                      rel_tol: float = 1e-5, abs_tol: float = 1e-8) -> float:
    """Elementwise gradient check, |ad - fd| <= rel_tol*|fd| + abs_tol.

    The absolute floor covers components whose magnitude sits at or below
    the noise floor of double-precision central differences (the oracle,
    not the tape, limits accuracy there).  Returns the worst ratio of
    error to tolerance (< 1 means pass)."""
    g_ad = np.asarray(g_ad).ravel()
    g_fd = np.asarray(g_fd).ravel()
    diff = np.abs(g_ad - g_fd)
    ratio = diff / (rel_tol * np.abs(g_fd) + abs_tol)
    worst = float(ratio.max())
    assert worst < 1.0, (
        f"gradient mismatch: worst error/tolerance ratio {worst:.3f} "
        f"(|diff|={diff[ratio.argmax()]:.3e} at |fd|={abs(g_fd[ratio.argmax()]):.3e})"
    )
    return worst


def zero_model(d_x=1, hidden=16, n_layers=2, n_components=3) -> MdnModel:
    """All-zero parameters: uniform weights, zero means, unit spreads."""
    arch = Architecture(d_x, hidden, n_layers, n_components)
    model = init_params(arch, 0)
    model.params[:] = 0.0
    return model


def rigged_linear_model(slope: float, intercept: float = 0.0, n_components: int = 1,
                        component: int = 0, hidden: int = 4) -> MdnModel:
    """Network whose chosen component mean is exactly slope*x + intercept
    for |x| < 10 (identity standardization, unit sigma, uniform weights).

    Routes x through one hidden unit per layer inside the linear region of
    the elu, so the mean is affine in x up to float round-off.
    """
    arch = Architecture(1, hidden, 2, n_components)
    model = init_params(arch, 0)
    model.params[:] = 0.0
    layout = param_layout(arch)
    w1, _ = layout["w1"]
    b1, _ = layout["b1"]
    w2, _ = layout["w2"]
    w_mu, _ = layout["w_mu"]
    b_mu, _ = layout["b_mu"]
    model.params[w1] = 1.0                      # W1[0, 0]
    model.params[b1] = 10.0                     # b1[0]: keep elu linear
    model.params[w2] = 1.0                      # W2[0, 0]
    model.params[w_mu + component] = slope      # W_mu[0, component]
    model.params[b_mu + component] = intercept - 10.0 * slope
    return model


def rigged_quadratic_model(alpha: float = 1e-3) -> MdnModel:
    """Single-component network whose mean is (1/alpha^2) * 2 cosh(alpha x)
    plus a constant, so its second derivative is 2 cosh(alpha x) ~= 2.

    Built from two exponential-regime elu units; valid for |x| << 1/alpha.
    """
    arch = Architecture(1, 4, 2, 1)
    model = init_params(arch, 0)
    model.params[:] = 0.0
    layout = param_layout(arch)
    w1, (d_x, h) = layout["w1"]
    b1, _ = layout["b1"]
    model.params[w1 + 0] = alpha
    model.params[w1 + 1] = -alpha
    model.params[b1 + 0] = -1.0
    model.params[b1 + 1] = -1.0
    w2, (h2, _) = layout["w2"]
    b2, _ = layout["b2"]
    model.params[w2 + 0] = 1.0        # W2[0, 0]
    model.params[w2 + h2 + 1] = 1.0   # W2[1, 1]
    model.params[b2 + 0] = 2.0        # shift into the linear elu region
    model.params[b2 + 1] = 2.0
    w_mu, _ = layout["w_mu"]
    c = np.e / alpha**2
    model.params[w_mu + 0] = c
    model.params[w_mu + 1] = c
    return model


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    points = np.union1d(a, b)
    fa = np.searchsorted(a, points, side="right") / len(a)
    fb = np.searchsorted(b, points, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def normal_cdf(x):
    from math import erf, sqrt

    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.vectorize(erf)(x / np.sqrt(2.0)))


def mixture_window_mass(mp, lo: float, hi: float) -> float:
    """Closed-form mixture probability of [lo, hi] via Gaussian CDFs."""
    z_hi = (hi - mp.mu) / mp.sigma
    z_lo = (lo - mp.mu) / mp.sigma
    return float(np.sum(mp.pi * (normal_cdf(z_hi) - normal_cdf(z_lo))))
