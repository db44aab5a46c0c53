"""Adam optimizer and the full-batch training loop with loss logging."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .data import fmt17
from .errors import InvalidConfig, NonFiniteGradient
from .losses import Batch, ClassMap, LossPlan, ResidualSpec
from .mdn import MdnModel


@dataclass
class AdamState:
    """First/second moment estimates and step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0.0:
        raise InvalidConfig("learning rate must be positive")
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise InvalidConfig("parameter, gradient, and moment shapes must match")
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradient("gradient is not finite", state.step + 1)
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


@dataclass
class TrainLog:
    """Per-iteration loss components (physics is zero when unused)."""

    nll: np.ndarray
    physics: np.ndarray
    total: np.ndarray

    def __post_init__(self):
        self.nll = np.asarray(self.nll, dtype=np.float64)
        self.physics = np.asarray(self.physics, dtype=np.float64)
        self.total = np.asarray(self.total, dtype=np.float64)
        if not (len(self.nll) == len(self.physics) == len(self.total)):
            raise InvalidConfig("loss component logs must have equal lengths")

    def __len__(self) -> int:
        return len(self.total)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "nll", "physics", "total"])
            for i in range(len(self.total)):
                writer.writerow(
                    [i + 1, fmt17(self.nll[i]), fmt17(self.physics[i]), fmt17(self.total[i])]
                )

    @classmethod
    def from_csv(cls, path) -> "TrainLog":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if rows.size == 0:
            return cls(np.empty(0), np.empty(0), np.empty(0))
        return cls(rows[:, 1], rows[:, 2], rows[:, 3])


@dataclass
class TrainConfig:
    """Everything the training loop needs besides model and data."""

    iterations: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda_weight: float = 0.0
    residual: ResidualSpec | None = None
    class_informed: bool = False
    class_map: ClassMap | None = None
    collocation: np.ndarray | None = None
    n_collocation_grid: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidConfig("iterations must be >= 1")
        if self.lr <= 0.0:
            raise InvalidConfig("learning rate must be positive")
        if self.lambda_weight < 0.0:
            raise InvalidConfig("lambda_weight must be nonnegative")


def train(model: MdnModel, batch: Batch, config: TrainConfig):
    """Run total-loss gradient descent with Adam for the configured number
    of iterations.  Returns (trained model, TrainLog).

    The run is single-threaded and fully deterministic.  A non-finite
    loss or gradient aborts with :class:`NonFiniteGradient` carrying the
    iteration index and the partial log (``exc.partial_log``).
    """
    plan = LossPlan(
        model,
        batch,
        lambda_weight=config.lambda_weight,
        residual=config.residual,
        class_informed=config.class_informed,
        class_map=config.class_map,
        collocation=config.collocation,
        n_collocation_grid=config.n_collocation_grid,
    )
    theta = model.params.copy()
    state = adam_init(theta.size, config.lr, config.beta1, config.beta2, config.eps)
    nll_log = np.empty(config.iterations)
    phys_log = np.empty(config.iterations)
    total_log = np.empty(config.iterations)

    for it in range(1, config.iterations + 1):
        tape, total, nll_var, phys_var = plan.build(theta)
        grads = tape.backward(total)[0]
        total_value = float(total.value)
        if not (np.isfinite(total_value) and np.all(np.isfinite(grads))):
            exc = NonFiniteGradient("training loss or gradient became non-finite", it)
            exc.partial_log = TrainLog(nll_log[: it - 1], phys_log[: it - 1], total_log[: it - 1])
            raise exc
        nll_log[it - 1] = float(nll_var.value)
        phys_log[it - 1] = 0.0 if phys_var is None else float(phys_var.value)
        total_log[it - 1] = total_value
        theta, state = adam_step(theta, grads, state)

    trained = replace(model, params=theta)
    return trained, TrainLog(nll_log, phys_log, total_log)
