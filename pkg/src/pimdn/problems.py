"""Benchmark data generators and their analytic oracles.

Four problems, each pairing a generator with an independently derived
reference:

* cusp bifurcation steady states (rejection sampling; closed-form roots),
* a slow/fast SDE (Euler-Maruyama; stationary Fokker-Planck density),
* shock Hugoniot records (CSV loader plus a synthetic three-branch
  surrogate with known monotone branch lines),
* the Chafee-Infante reaction-diffusion equation (method-of-lines RK4;
  steady-state residual).

A small annulus dataset for component-count studies rounds out the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    GridTooNarrow,
    InvalidInput,
    ParseError,
    SimulationDiverged,
    UnstableTimestep,
)
from .rng import STREAM_DATA, STREAM_SIM, make_rng

#: canonical label order for shock regimes (also the class-index order)
REGIMES = ("elastic", "plastic", "phase_transformation")


# =========================================================================
# cusp bifurcation
# =========================================================================

@dataclass(frozen=True)
class BifurcationSample:
    """One accepted steady state of x' = -x^3 + lam*x + imperfection."""

    lam: float
    x: float
    imperfection: float


def bifurcation_roots(lam: float) -> np.ndarray:
    """Real roots of x^3 - lam*x = 0: the ideal zero-imperfection branches.

    A single root at 0 for lam <= 0; {-sqrt(lam), 0, +sqrt(lam)} sorted
    for lam > 0.
    """
    if lam <= 0.0:
        return np.array([0.0])
    r = math.sqrt(lam)
    return np.array([-r, 0.0, r])


def gen_bifurcation(
    n_target: int,
    seed: int,
    accept_bound: float = 0.05,
    x_range: tuple[float, float] = (-2.0, 2.0),
    lam_range: tuple[float, float] = (-2.5, 2.5),
) -> Dataset:
    """Rejection-sample steady states near the ideal bifurcation surface.

    Proposes (x, lam) uniformly, computes the imperfection mu = x^3 - lam*x
    that would make the pair a steady state, and keeps pairs with
    |mu| < accept_bound.  Context is lam, target is x.
    """
    if n_target < 1:
        raise InvalidInput("n_target must be >= 1")
    rng = make_rng(seed, STREAM_DATA)
    xs, lams, mus = [], [], []
    kept, proposed = 0, 0
    while kept < n_target:
        x = rng.uniform(*x_range, size=4096)
        lam = rng.uniform(*lam_range, size=4096)
        mu = x**3 - lam * x
        keep = np.abs(mu) < accept_bound
        xs.append(x[keep])
        lams.append(lam[keep])
        mus.append(mu[keep])
        kept += int(keep.sum())
        proposed += 4096
    x = np.concatenate(xs)[:n_target]
    lam = np.concatenate(lams)[:n_target]
    mu = np.concatenate(mus)[:n_target]
    meta = {
        "problem": "bifurcation",
        "seed": seed,
        "accept_bound": accept_bound,
        "x_range": list(x_range),
        "lam_range": list(lam_range),
        "n_proposed": proposed,
        "imperfections": mu,
    }
    return Dataset(contexts=lam, targets=x, meta=meta)


# =========================================================================
# slow/fast SDE and its stationary density
# =========================================================================

@dataclass
class SdeTrajectory:
    """Euler-Maruyama path of the two-variable system."""

    times: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    a1: float
    a2: float
    a3: float
    dt: float

    def __post_init__(self):
        if not (len(self.times) == len(self.u1) == len(self.u2)):
            raise InvalidInput("trajectory arrays must have equal lengths")
        if self.dt <= 0.0:
            raise InvalidInput("dt must be positive")


def sde_drift(u2, u1):
    """Drift of the fast variable: -(-1 + 0.2*u1 + 4*u2*(-1 + u2^2))."""
    return 1.0 - 0.2 * u1 - 4.0 * u2 * (u2 * u2 - 1.0)


def simulate_sde(
    a1: float,
    a2: float,
    a3: float,
    dt: float,
    n_steps: int,
    u1_0: float = 0.0,
    u2_0: float = 1.0,
    seed: int = 0,
) -> SdeTrajectory:
    """Euler-Maruyama integration with independent unit normals per step.

    u1 is Brownian motion with drift (a1 dt + a2 dB1) and is advanced in
    closed form; u2 follows the bistable drift with additive noise a3 dB2.
    Noise draw order: all n_steps u1 increments first, then all u2
    increments (drawn even when an amplitude is zero, so the stream layout
    does not depend on parameter values).
    """
    if dt <= 0.0:
        raise InvalidInput("dt must be positive")
    rng = make_rng(seed, STREAM_SIM)
    sqdt = math.sqrt(dt)

    u1 = np.empty(n_steps + 1)
    u1[0] = u1_0
    np.cumsum((a2 * sqdt) * rng.standard_normal(n_steps), out=u1[1:])
    u1[1:] += u1_0 + a1 * dt * np.arange(1, n_steps + 1)

    # per-step increment that does not depend on u2
    base = dt * (1.0 - 0.2 * u1[:-1]) + (a3 * sqdt) * rng.standard_normal(n_steps)

    u2 = np.empty(n_steps + 1)
    u2[0] = u2_0
    dt4 = 4.0 * dt
    v = float(u2_0)
    chunk = 100_000
    pos = 1
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        buf: list[float] = []
        append = buf.append
        for c in base[start:stop].tolist():
            v = v + c - dt4 * v * (v * v - 1.0)
            append(v)
        u2[pos : pos + len(buf)] = buf
        pos += len(buf)
        if not math.isfinite(v):
            bad = int(np.argmax(~np.isfinite(u2[:pos])))
            raise SimulationDiverged("fast variable left the finite range", max(bad - 1, 0))

    times = dt * np.arange(n_steps + 1)
    return SdeTrajectory(times, u1, u2, a1, a2, a3, dt)


@dataclass
class DensityCurve:
    """A conditional density tabulated on a grid of target values."""

    grid: np.ndarray
    density: np.ndarray
    conditioning: float | None = None
    noise_amp: float | None = None
    renormalized: bool = False

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.density = np.asarray(self.density, dtype=np.float64)
        if self.grid.shape != self.density.shape:
            raise InvalidInput("grid and density must have equal shapes")


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 3 or np.any(np.diff(grid) <= 0.0):
        raise InvalidInput("grid must be 1-d and strictly increasing")
    if grid[0] > -3.0 or grid[-1] < 3.0:
        raise InvalidInput("grid must span at least [-3, 3]")
    return grid


def _normalize_on_grid(log_unnorm: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Max-shifted exponentiation and trapezoidal normalization.

    A decaying density whose boundary value exceeds 1e-10 of the peak is
    truncated, so the grid is rejected.  Densities that do not decay at
    the boundary (uniform or monotone in the tilt) are taken as supported
    on the grid itself and pass.
    """
    p = np.exp(log_unnorm - log_unnorm.max())
    p /= np.trapezoid(p, grid)
    boundary = max(p[0], p[-1])
    if 1e-10 * p.max() < boundary < 0.99 * p.max():
        raise GridTooNarrow("stationary density does not vanish at the grid boundary")
    return p


def stationary_density(u1: float, a3: float, grid: np.ndarray) -> DensityCurve:
    """Zero-flux stationary density of the fast variable at frozen u1.

    Closed form: proportional to
    exp(-(2/a3^2) * ((u2^2 - 1)^2 + (0.2*u1 - 1)*u2)), normalized by the
    trapezoidal rule on the grid.
    """
    grid = _check_grid(grid)
    expo = -(2.0 / a3**2) * ((grid**2 - 1.0) ** 2 + (0.2 * u1 - 1.0) * grid)
    return DensityCurve(grid, _normalize_on_grid(expo, grid), conditioning=u1, noise_amp=a3)


def stationary_density_generic(drift, u1: float, a3: float, grid: np.ndarray,
                               refine: int = 16) -> DensityCurve:
    """Stationary density from an arbitrary drift via quadrature.

    The exponent (2/a3^2) * integral of drift is accumulated with the
    cumulative trapezoidal rule on a grid refined ``refine``-fold (each
    cell subdivided), then restricted to the requested grid points; the
    refinement keeps the quadrature error well below tabulation accuracy.
    ``drift`` must be vectorized as drift(u2_values, u1).
    """
    grid = _check_grid(grid)
    if refine < 1:
        raise InvalidInput("refine must be >= 1")
    offsets = np.arange(refine) / refine
    fine = (grid[:-1, None] + np.diff(grid)[:, None] * offsets[None, :]).ravel()
    fine = np.append(fine, grid[-1])
    b = np.asarray(drift(fine, u1), dtype=np.float64)
    steps = np.diff(fine)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (b[1:] + b[:-1]) * steps)])
    expo = (2.0 / a3**2) * cum[::refine]
    return DensityCurve(grid, _normalize_on_grid(expo, grid), conditioning=u1, noise_amp=a3)


def gen_sde_dataset(traj: SdeTrajectory, n_subsample: int, seed: int) -> Dataset:
    """Uniform random subsample (without replacement) of (u1, u2) pairs."""
    n = len(traj.u1)
    if n_subsample > n:
        raise InvalidInput("cannot subsample more points than the trajectory holds")
    idx = make_rng(seed, STREAM_DATA).choice(n, size=n_subsample, replace=False)
    meta = {
        "problem": "sde",
        "seed": seed,
        "n_subsample": n_subsample,
        "trajectory_length": n,
        "a1": traj.a1,
        "a2": traj.a2,
        "a3": traj.a3,
        "dt": traj.dt,
    }
    return Dataset(contexts=traj.u1[idx], targets=traj.u2[idx], meta=meta)


# Trajectory defaults: the slow variable drifts across roughly [0, 11]
# over 1e7 steps, slowly enough that the fast variable hops between its
# wells many times per u1 window (conditionals are quasi-stationary) while
# queries at u1 = 12 stay outside the training range.  The noise amplitude
# balances two pressures: smaller a3 makes the conditional wells more
# Gaussian (easier for a two-component mixture) but slows well hopping
# exponentially, starving the data of balanced mode visits.  Toolkit
# choices, not literature constants.
SDE_DEFAULTS = {
    "a1": 5.5e-4,
    "a2": 5e-3,
    "a3": 0.75,
    "dt": 2e-3,
    "n_steps": 10_000_000,
    "u1_0": 0.0,
    "u2_0": 1.0,
}


# =========================================================================
# Chafee-Infante reaction-diffusion equation
# =========================================================================

@dataclass
class ChafeeProfile:
    """Solution values of u_t = u - u^3 + nu*u_xx on [0, pi] at one time."""

    x: np.ndarray
    u: np.ndarray
    a_coeffs: np.ndarray
    nu: float
    t_end: float

    def __post_init__(self):
        if self.u[0] != 0.0 or self.u[-1] != 0.0:
            raise InvalidInput("Dirichlet boundary values must be exactly zero")


def chafee_rhs(u_interior: np.ndarray, nu: float, dx: float) -> np.ndarray:
    """u - u^3 + nu * (second-order central Laplacian), zero boundaries.

    Operates on the last axis, so a leading batch axis integrates many
    profiles at once.
    """
    lap = np.empty_like(u_interior)
    lap[..., 1:-1] = u_interior[..., :-2] - 2.0 * u_interior[..., 1:-1] + u_interior[..., 2:]
    lap[..., 0] = -2.0 * u_interior[..., 0] + u_interior[..., 1]
    lap[..., -1] = u_interior[..., -2] - 2.0 * u_interior[..., -1]
    return u_interior - u_interior**3 + (nu / dx**2) * lap


def _integrate_chafee(u0_interior: np.ndarray, nu: float, dx: float, dt: float,
                      n_steps: int) -> np.ndarray:
    """RK4 time stepping of the interior values (any leading batch shape)."""
    u = u0_interior
    for step in range(n_steps):
        k1 = chafee_rhs(u, nu, dx)
        k2 = chafee_rhs(u + 0.5 * dt * k1, nu, dx)
        k3 = chafee_rhs(u + 0.5 * dt * k2, nu, dx)
        k4 = chafee_rhs(u + dt * k3, nu, dx)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % 500 == 499 and not np.all(np.abs(u) < 1e6):
            raise SimulationDiverged("reaction-diffusion solve left the finite range", step)
    if not np.all(np.isfinite(u)):
        raise SimulationDiverged("reaction-diffusion solve left the finite range", n_steps - 1)
    return u


def _chafee_grid(nx: int):
    x = np.linspace(0.0, math.pi, nx + 2)
    return x, math.pi / (nx + 1)


def _check_chafee_step(nu: float, dx: float, dt: float) -> None:
    bound = 0.9 * dx * dx / (2.0 * nu)
    if dt > bound:
        raise UnstableTimestep(f"dt={dt:g} exceeds the stability bound {bound:g}")


def solve_chafee(
    nu: float,
    a_coeffs,
    t_end: float,
    nx: int = 64,
    dt: float = 1e-3,
) -> ChafeeProfile:
    """Method-of-lines RK4 with Dirichlet endpoints held at zero.

    The initial condition is sum_n a_n sin(n x).  The explicit step must
    satisfy dt <= 0.9 * dx^2 / (2 nu).
    """
    a_coeffs = np.asarray(a_coeffs, dtype=np.float64)
    if t_end <= 0.0:
        raise InvalidInput("t_end must be positive")
    x, dx = _chafee_grid(nx)
    _check_chafee_step(nu, dx, dt)
    xi = x[1:-1]
    u = np.zeros(nx)
    for n, a_n in enumerate(a_coeffs, start=1):
        u += a_n * np.sin(n * xi)
    n_steps = int(round(t_end / dt))
    u = _integrate_chafee(u, nu, dx, dt, n_steps)
    full = np.concatenate([[0.0], u, [0.0]])
    return ChafeeProfile(x=x, u=full, a_coeffs=a_coeffs, nu=nu, t_end=n_steps * dt)


def chafee_steady_residual(profile: ChafeeProfile) -> np.ndarray:
    """Discrete steady-state residual u - u^3 + nu*Lap(u) on the interior."""
    dx = profile.x[1] - profile.x[0]
    return chafee_rhs(profile.u[1:-1], profile.nu, dx)


def gen_chafee_dataset(
    n_profiles: int = 100,
    nu: float = 0.16,
    t_end: float = 4.5,
    seed: int = 0,
    nx: int = 64,
    dt: float = 1e-3,
) -> Dataset:
    """Pool (x, u(x, t_end)) pairs from profiles with random sine initial
    data, a_n ~ N(0,1) for n = 1..3 (three normals drawn per profile).

    All profiles are integrated together as one batched RK4 solve, which
    is step-for-step identical to solving them one at a time.
    """
    rng = make_rng(seed, STREAM_DATA)
    a = rng.standard_normal((n_profiles, 3))
    x, dx = _chafee_grid(nx)
    _check_chafee_step(nu, dx, dt)
    xi = x[1:-1]
    # same accumulation order as solve_chafee, so results match bitwise
    u0 = np.zeros((n_profiles, nx))
    for n in (1, 2, 3):
        u0 += a[:, n - 1 : n] * np.sin(n * xi)[None, :]
    n_steps = int(round(t_end / dt))
    u = _integrate_chafee(u0, nu, dx, dt, n_steps)
    mid = nx // 2  # interior index closest to the domain midpoint
    meta = {
        "problem": "chafee",
        "seed": seed,
        "nu": nu,
        "t_end": t_end,
        "nx": nx,
        "dt": dt,
        "n_profiles": n_profiles,
        "n_mid_positive": int(np.sum(u[:, mid] > 0.0)),
        "dx": dx,
    }
    return Dataset(
        contexts=np.tile(xi, n_profiles),
        targets=u.reshape(-1),
        meta=meta,
    )


# =========================================================================
# shock Hugoniot records
# =========================================================================

@dataclass(frozen=True)
class HugoniotRecord:
    """One (particle velocity, shock velocity) point with its regime."""

    up: float
    us: float
    regime: str


HUGONIOT_HEADER = ["up_km_s", "us_km_s", "regime"]


def load_hugoniot(path) -> Dataset:
    """Read Hugoniot records; context is Up, target is Us, label the regime."""
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(_csv.reader(fh))
    if not rows or rows[0] != HUGONIOT_HEADER:
        raise ParseError(f"expected header {','.join(HUGONIOT_HEADER)}", 1)
    ups, uss, regimes = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", i)
        try:
            up, us = float(row[0]), float(row[1])
        except ValueError as exc:
            raise ParseError(str(exc), i) from exc
        if row[2] not in REGIMES:
            raise ParseError(f"unknown regime {row[2]!r}", i)
        if up < 0.0 or us <= 0.0:
            raise ParseError("require up >= 0 and us > 0", i)
        ups.append(up)
        uss.append(us)
        regimes.append(row[2])
    return Dataset(np.array(ups), np.array(uss), regimes, meta={"problem": "shock"})


def save_hugoniot(dataset: Dataset, path) -> None:
    import csv as _csv

    from .data import fmt17

    if dataset.labels is None:
        raise InvalidInput("Hugoniot datasets require regime labels")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(HUGONIOT_HEADER)
        for up, us, regime in zip(dataset.contexts, dataset.targets, dataset.labels):
            writer.writerow([fmt17(up), fmt17(us), regime])


#: surrogate branch lines (intercept at up_lo, slope, up range), chosen to
#: mimic three overlapping non-decreasing response branches
SURROGATE_BRANCHES = {
    "elastic": {"up_lo": 0.0, "up_hi": 1.6, "us_lo": 7.0, "slope": 3.0},
    "plastic": {"up_lo": 1.0, "up_hi": 3.0, "us_lo": 7.5, "slope": 0.7},
    "phase_transformation": {"up_lo": 2.4, "up_hi": 4.5, "us_lo": 8.8, "slope": 1.2},
}


def surrogate_branch_us(regime: str, up) -> np.ndarray:
    """Noise-free branch line for one regime."""
    b = SURROGATE_BRANCHES[regime]
    return b["us_lo"] + b["slope"] * (np.asarray(up, dtype=np.float64) - b["up_lo"])


def gen_hugoniot_surrogate(n_per_regime: int = 50, noise: float = 0.15, seed: int = 0) -> Dataset:
    """Labeled three-branch stand-in for digitized shock data.

    Each regime contributes points with Up uniform on its range and Us on
    the branch line plus N(0, noise^2) scatter, so every ground-truth
    branch is non-decreasing.  Per regime (in REGIMES order) the uniforms
    are drawn first, then the normals.
    """
    rng = make_rng(seed, STREAM_DATA)
    ups, uss, labels = [], [], []
    for regime in REGIMES:
        b = SURROGATE_BRANCHES[regime]
        up = rng.uniform(b["up_lo"], b["up_hi"], size=n_per_regime)
        us = surrogate_branch_us(regime, up) + noise * rng.standard_normal(n_per_regime)
        ups.append(up)
        uss.append(us)
        labels.extend([regime] * n_per_regime)
    meta = {
        "problem": "shock",
        "seed": seed,
        "n_per_regime": n_per_regime,
        "noise": noise,
        "branches": SURROGATE_BRANCHES,
    }
    return Dataset(np.concatenate(ups), np.concatenate(uss), labels, meta=meta)


# =========================================================================
# annulus dataset for component-count studies
# =========================================================================

def gen_circle(
    n: int = 400,
    seed: int = 10,
    r_in: float = 0.35,
    r_out: float = 0.5,
    center: tuple[float, float] = (0.5, 0.5),
) -> Dataset:
    """Points uniform in area over an annulus; context is the x coordinate,
    target the y coordinate.  Draw order: n angles, then n radius uniforms."""
    rng = make_rng(seed, STREAM_DATA)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    r = np.sqrt(r_in**2 + rng.random(n) * (r_out**2 - r_in**2))
    meta = {
        "problem": "circle",
        "seed": seed,
        "r_in": r_in,
        "r_out": r_out,
        "center": list(center),
    }
    return Dataset(center[0] + r * np.cos(theta), center[1] + r * np.sin(theta), meta=meta)
