"""Metrics comparing learned conditional distributions against oracles
and data: density error, mode recovery, monotonicity violation, window
mass, and small report helpers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidInput
from .mdn import MdnModel, mdn_forward, mdn_forward_batch, pdf
from .problems import DensityCurve


def density_l1(p: DensityCurve, q: DensityCurve) -> float:
    """Trapezoidal integral of |p - q|; lies in [0, 2] for densities."""
    if p.grid.shape != q.grid.shape or not np.array_equal(p.grid, q.grid):
        raise GridMismatch("density curves must share an identical grid")
    return float(np.trapezoid(np.abs(p.density - q.density), p.grid))


def mdn_density_curve(model: MdnModel, context: float, grid: np.ndarray) -> DensityCurve:
    """Model conditional density on a grid.  The curve is renormalized by
    the trapezoidal rule only if its raw integral strays from 1 by more
    than 1e-3; the ``renormalized`` flag records that."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(grid) <= 0.0):
        raise InvalidInput("grid must be strictly increasing")
    mp = mdn_forward(model, context)
    dens = pdf(mp, grid)
    integral = float(np.trapezoid(dens, grid))
    renormalized = abs(integral - 1.0) > 1e-3
    if renormalized:
        dens = dens / integral
    return DensityCurve(grid, dens, conditioning=float(context), renormalized=renormalized)


@dataclass
class ModeReport:
    """Components surviving the weight threshold at one context, sorted by
    mean, with nearest-oracle-mode errors when an oracle is given."""

    context: float
    threshold: float
    pi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    oracle_modes: np.ndarray | None = None
    errors: np.ndarray | None = None


def extract_modes(model: MdnModel, context: float, pi_threshold: float = 0.05,
                  oracle_modes=None) -> ModeReport:
    """Report components with weight >= threshold, sorted by mean; match
    each to its nearest oracle mode if oracle modes are supplied."""
    mp = mdn_forward(model, context)
    keep = mp.pi >= pi_threshold
    order = np.argsort(mp.mu[keep])
    pi, mu, sigma = mp.pi[keep][order], mp.mu[keep][order], mp.sigma[keep][order]
    oracle = None
    errors = None
    if oracle_modes is not None:
        oracle = np.asarray(oracle_modes, dtype=np.float64)
        errors = np.array([np.min(np.abs(oracle - m)) for m in mu])
    return ModeReport(float(context), pi_threshold, pi, mu, sigma, oracle, errors)


def monotonicity_violation(model: MdnModel, grid: np.ndarray, h: float) -> float:
    """Mean over the grid of sum_m pi_m * max(0, -dmu_m/dx), with the same
    central-difference stencil the training penalty uses (physical units)."""
    grid = np.asarray(grid, dtype=np.float64)
    pi, _, _ = mdn_forward_batch(model, grid)
    _, mu_p, _ = mdn_forward_batch(model, grid + h)
    _, mu_m, _ = mdn_forward_batch(model, grid - h)
    dmu = (mu_p - mu_m) / (2.0 * h)
    return float(np.mean(np.sum(pi * np.maximum(0.0, -dmu), axis=1)))


def chafee_weighted_residual(model: MdnModel, grid: np.ndarray, h: float, nu: float) -> float:
    """Mean over the grid of sum_m pi_m * (mu - mu^3 + nu*Lap mu)^2 using
    the training stencil (physical units)."""
    grid = np.asarray(grid, dtype=np.float64)
    pi, mu_c, _ = mdn_forward_batch(model, grid)
    _, mu_p, _ = mdn_forward_batch(model, grid + h)
    _, mu_m, _ = mdn_forward_batch(model, grid - h)
    lap = (mu_p - 2.0 * mu_c + mu_m) / h**2
    r = (mu_c - mu_c**3 + nu * lap) ** 2
    return float(np.mean(np.sum(pi * r, axis=1)))


def average_sigma(model: MdnModel, grid: np.ndarray) -> float:
    """Component standard deviation averaged over components and grid."""
    _, _, sigma = mdn_forward_batch(model, np.asarray(grid, dtype=np.float64))
    return float(sigma.mean())


def inter_mode_mass(samples: np.ndarray, window: tuple[float, float]) -> float:
    """Fraction of samples falling inside the closed window [a, b]."""
    samples = np.asarray(samples, dtype=np.float64)
    a, b = window
    if len(samples) == 0:
        return 0.0
    return float(np.mean((samples >= a) & (samples <= b)))


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_report(path, metrics: dict, config: dict | None = None, seed: int | None = None) -> None:
    """Metric name -> value JSON document with provenance fields."""
    doc = {"metrics": metrics}
    if config is not None:
        doc["config_hash"] = config_hash(config)
    if seed is not None:
        doc["seed"] = seed
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
