"""Training objectives: likelihood terms and weight-aware physics penalties.

All losses are built on a fresh tape and returned as scalar tape nodes,
so ``autodiff.backward`` yields exact parameter gradients.  Derivatives
of component means with respect to the context are approximated by
central-difference stencils of full network evaluations; every stencil
term lives on the tape, so parameter gradients are exact for the
stencil-approximated objective.

Losses are expressed in physical target units (the standardization shift
``log u_std`` is added to likelihood terms, and residuals are formed from
un-standardized means), so logged values match the public density API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Dataset
from .errors import EmptyBatch, InvalidConfig, InvalidInput, MissingLabel
from .mdn import LOG_2PI, MdnModel, heads_on_tape

#: built-in residual kinds
RESIDUAL_KINDS = ("monotonicity", "chafee_steady_state", "custom")

#: default monotonicity stencil step, in standardized context units
DEFAULT_MONOTONICITY_H_STD = 1e-2


@dataclass
class Batch:
    """Training records: contexts, targets, optional integer class labels.

    Labels are 0-based component-class indices; -1 marks an unlabeled
    record (mixed batches are handled by the masked likelihood).
    """

    contexts: np.ndarray
    targets: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.contexts.shape[0] != self.targets.shape[0]:
            raise InvalidInput("contexts and targets must have equal lengths")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.targets.shape[0],):
                raise InvalidInput("labels must be one integer per record")

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_dataset(cls, dataset: Dataset, class_order: tuple[str, ...] | None = None) -> "Batch":
        """Convert string labels to class indices via ``class_order``
        (sorted unique labels when omitted)."""
        labels = None
        if dataset.labels is not None:
            order = class_order if class_order is not None else tuple(sorted(set(dataset.labels)))
            index = {name: i for i, name in enumerate(order)}
            try:
                labels = np.array([index[c] for c in dataset.labels], dtype=np.int64)
            except KeyError as exc:
                raise InvalidInput(f"label {exc.args[0]!r} not in class order {order}") from exc
        return cls(dataset.contexts, dataset.targets, labels)


@dataclass(frozen=True)
class ClassMap:
    """Assignment of class labels to mixture components (0-based)."""

    g: tuple[int, ...]

    @classmethod
    def identity(cls, n: int) -> "ClassMap":
        return cls(tuple(range(n)))

    def component(self, label: int) -> int:
        return self.g[label]


@dataclass(frozen=True)
class ResidualSpec:
    """What physics penalty to apply to component means.

    ``h`` is the stencil step in physical context units.  When omitted for
    the monotonicity residual it defaults to 1e-2 standardized units,
    resolved against the model's context scale at build time; the
    steady-state residual requires an explicit h (the spatial grid
    spacing).  ``constants`` carries residual constants such as ``nu``.
    ``custom_fn`` (kind "custom") receives a :class:`ResidualContext` and
    must return an (n, M) tape variable of nonnegative penalties.
    """

    kind: str
    h: float | None = None
    constants: dict = field(default_factory=dict)
    custom_fn: object = None

    def __post_init__(self):
        if self.kind not in RESIDUAL_KINDS:
            raise InvalidConfig(f"unknown residual kind {self.kind!r}")
        if self.h is not None and self.h <= 0.0:
            raise InvalidConfig("stencil step h must be positive")
        if self.kind == "chafee_steady_state":
            if "nu" not in self.constants:
                raise InvalidConfig("chafee_steady_state requires constants['nu']")
            if self.h is None:
                raise InvalidConfig("chafee_steady_state requires an explicit stencil step h")
        if self.kind == "custom" and not callable(self.custom_fn):
            raise InvalidConfig("custom residual requires a callable custom_fn")


@dataclass
class ResidualContext:
    """Tape handles offered to custom residuals."""

    tape: ad.Tape
    xs: np.ndarray            # physical collocation contexts (n,)
    h: float                  # physical stencil step
    pi: ad.Var                # (n, M) mixture weights at xs
    mu: ad.Var                # (n, M) component means at xs, physical units
    mu_plus: ad.Var           # means at xs + h
    mu_minus: ad.Var          # means at xs - h


def collocation_points(contexts: np.ndarray, n_grid: int = 256) -> np.ndarray:
    """Unique training contexts joined with a uniform grid over their range."""
    contexts = np.asarray(contexts, dtype=np.float64).reshape(-1)
    return np.union1d(contexts, np.linspace(contexts.min(), contexts.max(), n_grid))


class LossPlan:
    """Precompiled loss for one (model, batch, objective) combination.

    Standardized design matrices, stencil grids, and label masks are
    computed once; :meth:`build` then evaluates the objective for a given
    parameter vector on a fresh tape.  ``train`` calls ``build`` every
    iteration.
    """

    def __init__(
        self,
        model: MdnModel,
        batch: Batch | None,
        *,
        lambda_weight: float = 0.0,
        residual: ResidualSpec | None = None,
        class_informed: bool = False,
        class_map: ClassMap | None = None,
        collocation: np.ndarray | None = None,
        n_collocation_grid: int = 256,
    ):
        if lambda_weight < 0.0:
            raise InvalidConfig("lambda_weight must be nonnegative")
        if model.arch.d_x != 1:
            raise InvalidConfig("losses support scalar contexts only")
        self.model = model
        self.arch = model.arch
        self.lambda_weight = float(lambda_weight)
        self.residual = residual
        self.class_informed = class_informed

        x_std_scale = float(model.x_std[0])
        self.has_likelihood = batch is not None
        if self.has_likelihood:
            if len(batch) == 0:
                raise EmptyBatch("cannot build a loss on an empty batch")
            self.x_data = ((batch.contexts - model.x_mean[0]) / x_std_scale)[:, None]
            self.u_data = ((batch.targets - model.u_mean) / model.u_std)[:, None]
            # repeated evaluation points (pooled-profile datasets) share one
            # network forward pass over the unique contexts
            uniq, inverse = np.unique(self.x_data[:, 0], return_inverse=True)
            if len(uniq) <= len(batch) // 2:
                self.x_unique = uniq[:, None]
                self.row_index = inverse
            else:
                self.x_unique = None
                self.row_index = None
        elif residual is None:
            raise InvalidConfig("a loss needs a batch, a residual, or both")
        self.log_u_std = math.log(model.u_std)

        m = self.arch.n_components
        self.onehot = None
        self.labeled_mask = None
        if class_informed:
            if batch is None or batch.labels is None:
                raise MissingLabel("class-informed loss requires labels")
            gmap = class_map if class_map is not None else ClassMap.identity(m)
            comp = np.full(len(batch), -1, dtype=np.int64)
            labeled = batch.labels >= 0
            if not labeled.any():
                raise MissingLabel("class-informed loss requires at least one label")
            for idx in np.nonzero(labeled)[0]:
                c = int(batch.labels[idx])
                if c >= len(gmap.g):
                    raise InvalidConfig(f"label {c} outside class map of size {len(gmap.g)}")
                comp[idx] = gmap.component(c)
            if np.any((comp >= m) & labeled):
                raise InvalidConfig("class map assigns a component outside the mixture")
            onehot = np.zeros((len(batch), m))
            onehot[labeled, comp[labeled]] = 1.0
            self.onehot = onehot
            self.labeled_mask = labeled[:, None].astype(np.float64)
            self.all_labeled = bool(labeled.all())

        if residual is not None and lambda_weight > 0.0:
            if collocation is not None:
                xs = np.asarray(collocation, dtype=np.float64).reshape(-1)
            elif batch is not None:
                xs = collocation_points(batch.contexts, n_collocation_grid)
            else:
                raise InvalidConfig("physics-only losses need explicit collocation points")
            if not np.all(np.isfinite(xs)):
                raise InvalidInput("collocation points must be finite")
            h_phys = residual.h if residual.h is not None \
                else DEFAULT_MONOTONICITY_H_STD * x_std_scale
            self.colloc_xs = xs
            self.h_phys = float(h_phys)
            self.x_c = ((xs - model.x_mean[0]) / x_std_scale)[:, None]
            self.x_p = ((xs + h_phys - model.x_mean[0]) / x_std_scale)[:, None]
            self.x_m = ((xs - h_phys - model.x_mean[0]) / x_std_scale)[:, None]

    # -- tape assembly ---------------------------------------------------
    def _likelihood(self, tape, p):
        model = self.model
        if self.row_index is not None:
            log_pi, _, mu, sigma = heads_on_tape(
                tape, p, tape.leaf(self.x_unique), self.arch, model.sigma_clamp)
            log_pi = tape.take_rows(log_pi, self.row_index)
            mu = tape.take_rows(mu, self.row_index)
            sigma = tape.take_rows(sigma, self.row_index)
        else:
            log_pi, _, mu, sigma = heads_on_tape(
                tape, p, tape.leaf(self.x_data), self.arch, model.sigma_clamp)
        z = tape.apply("div", tape.apply("sub", tape.leaf(self.u_data), mu), sigma)
        comp = tape.apply(
            "sub",
            tape.apply("sub", log_pi, tape.apply("ln", sigma)),
            tape.apply("add", tape.leaf(0.5 * LOG_2PI), tape.apply("mul", tape.leaf(0.5), tape.apply("square", z))),
        )
        if not self.class_informed:
            lp = ad.logsumexp_rows(comp)
        else:
            selected = tape.rowsum(tape.apply("mul", comp, tape.leaf(self.onehot)))
            if self.all_labeled:
                lp = selected
            else:
                mask = tape.leaf(self.labeled_mask)
                inv = tape.leaf(1.0 - self.labeled_mask)
                lp = tape.apply(
                    "add",
                    tape.apply("mul", mask, selected),
                    tape.apply("mul", inv, ad.logsumexp_rows(comp)),
                )
        return tape.apply("sub", tape.leaf(self.log_u_std), ad.mean_all(lp))

    def _physics(self, tape, p):
        model, arch = self.model, self.arch
        _, pi_c, mu_c, _ = heads_on_tape(tape, p, tape.leaf(self.x_c), arch, model.sigma_clamp)
        _, _, mu_p, _ = heads_on_tape(tape, p, tape.leaf(self.x_p), arch, model.sigma_clamp)
        _, _, mu_m, _ = heads_on_tape(tape, p, tape.leaf(self.x_m), arch, model.sigma_clamp)
        u_std, u_mean = model.u_std, model.u_mean
        spec = self.residual
        if spec.kind == "monotonicity":
            scale = u_std / (2.0 * self.h_phys)
            dmu = tape.apply("mul", tape.apply("sub", mu_p, mu_m), tape.leaf(scale))
            r = tape.apply("max0", tape.apply("neg", dmu))
        elif spec.kind == "chafee_steady_state":
            nu = float(spec.constants["nu"])
            lap = tape.apply(
                "mul",
                tape.apply("sub", tape.apply("add", mu_p, mu_m), tape.apply("mul", tape.leaf(2.0), mu_c)),
                tape.leaf(u_std / self.h_phys**2),
            )
            mu_phys = tape.apply("add", tape.leaf(u_mean), tape.apply("mul", tape.leaf(u_std), mu_c))
            cubic = tape.apply("mul", tape.apply("square", mu_phys), mu_phys)
            inner = tape.apply(
                "add",
                tape.apply("sub", mu_phys, cubic),
                tape.apply("mul", tape.leaf(nu), lap),
            )
            r = tape.apply("square", inner)
        else:
            def phys(v):
                return tape.apply("add", tape.leaf(u_mean), tape.apply("mul", tape.leaf(u_std), v))

            ctx = ResidualContext(
                tape=tape, xs=self.colloc_xs, h=self.h_phys, pi=pi_c,
                mu=phys(mu_c), mu_plus=phys(mu_p), mu_minus=phys(mu_m),
            )
            r = spec.custom_fn(ctx)
        weighted = tape.apply("mul", pi_c, r)
        return tape.apply("mul", tape.sumall(weighted), tape.leaf(1.0 / len(self.colloc_xs)))

    def build(self, params: np.ndarray):
        """Return (tape, total, nll_part, physics_part) for one parameter
        vector; a part not present in the objective is None."""
        tape = ad.Tape()
        p = tape.param(params)
        if not self.has_likelihood:
            phys_var = self._physics(tape, p)
            return tape, phys_var, None, phys_var
        nll_var = self._likelihood(tape, p)
        if self.residual is None or self.lambda_weight == 0.0:
            return tape, nll_var, nll_var, None
        phys_var = self._physics(tape, p)
        total = tape.apply("add", nll_var, tape.apply("mul", tape.leaf(self.lambda_weight), phys_var))
        return tape, total, nll_var, phys_var


# -- public objective constructors ----------------------------------------

def nll(model: MdnModel, batch: Batch) -> ad.Var:
    """Mean negative log likelihood under the full mixture (tape node)."""
    _, total, _, _ = LossPlan(model, batch).build(model.params)
    return total


def class_nll(model: MdnModel, batch: Batch, class_map: ClassMap | None = None) -> ad.Var:
    """Mean negative log of (pi_g(c) * phi_g(c)): the likelihood restricted
    to each record's assigned component."""
    if batch.labels is None or np.any(batch.labels < 0):
        raise MissingLabel("class_nll requires a label on every record")
    plan = LossPlan(model, batch, class_informed=True, class_map=class_map)
    _, total, _, _ = plan.build(model.params)
    return total


def physics_loss(model: MdnModel, collocation: np.ndarray, residual: ResidualSpec) -> ad.Var:
    """Mean over collocation points of sum_m pi_m * R(mu_m); gradients flow
    through both the weights and the residual."""
    plan = LossPlan(model, None, lambda_weight=1.0, residual=residual,
                    collocation=collocation)
    _, _, _, phys = plan.build(model.params)
    return phys


def total_loss(
    model: MdnModel,
    batch: Batch,
    collocation: np.ndarray | None,
    residual: ResidualSpec | None,
    lambda_weight: float,
    class_informed: bool = False,
    class_map: ClassMap | None = None,
) -> ad.Var:
    """(nll or class_nll) + lambda * physics_loss; lambda = 0 returns the
    bare likelihood node itself."""
    if lambda_weight < 0.0:
        raise InvalidConfig("lambda_weight must be nonnegative")
    plan = LossPlan(
        model, batch,
        lambda_weight=lambda_weight, residual=residual,
        class_informed=class_informed, class_map=class_map,
        collocation=collocation,
    )
    _, total, _, _ = plan.build(model.params)
    return total


def input_derivative(model: MdnModel, x, component: int, order: int, h: float) -> ad.Var:
    """Central-difference derivative of one component mean with respect to
    the physical context (order 1 or 2), as a tape node.

    Every stencil term is a full network evaluation on the tape, so
    parameter gradients of the returned node are exact for the stencil.
    """
    if model.arch.d_x != 1:
        raise InvalidInput("input derivatives require a scalar context")
    if order not in (1, 2):
        raise InvalidInput("order must be 1 or 2")
    if h <= 0.0:
        raise InvalidInput("stencil step h must be positive")
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    tape = ad.Tape()
    p = tape.param(model.params)
    pick = np.zeros((1, model.arch.n_components))
    pick[0, component] = 1.0
    sel = tape.leaf(pick)

    def mu_at(points):
        x_std = ((points - model.x_mean[0]) / model.x_std[0])[:, None]
        _, _, mu, _ = heads_on_tape(tape, p, tape.leaf(x_std), model.arch, model.sigma_clamp)
        return tape.rowsum(tape.apply("mul", mu, sel))

    if order == 1:
        diff = tape.apply("sub", mu_at(xs + h), mu_at(xs - h))
        return tape.apply("mul", diff, tape.leaf(model.u_std / (2.0 * h)))
    core = tape.apply(
        "sub",
        tape.apply("add", mu_at(xs + h), mu_at(xs - h)),
        tape.apply("mul", tape.leaf(2.0), mu_at(xs)),
    )
    return tape.apply("mul", core, tape.leaf(model.u_std / h**2))
