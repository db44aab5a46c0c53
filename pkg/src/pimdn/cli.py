"""Command-line interface: dataset generation, training, sampling, and
evaluation with plot-data export.

Configuration precedence is defaults < ``--config`` JSON file < explicit
flags; the fully resolved configuration is persisted next to every
output so runs are reproducible byte for byte.  Exit codes: 0 success,
2 configuration or I/O problem, 3 numeric failure.

Randomness: every command derives PCG64 child streams from its seed (see
``pimdn.rng``), so identical commands produce identical files.  Output
files never embed timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import problems
from .cfm import cfm_sample, fit_standardization_cfm, init_cfm, train_cfm
from .checkpoints import load_checkpoint, save_checkpoint
from .data import fmt17, load_csv, save_csv
from .errors import (
    InvalidConfig,
    NonFiniteGradient,
    NonFiniteValue,
    PimdnError,
    SamplerDiverged,
    SimulationDiverged,
    UnstableTimestep,
)
from .evaluate import (
    average_sigma,
    chafee_weighted_residual,
    density_l1,
    extract_modes,
    mdn_density_curve,
    monotonicity_violation,
    write_report,
)
from .losses import Batch, ClassMap, ResidualSpec
from .mdn import (
    Architecture,
    fit_standardization,
    init_params,
    mdn_forward,
    mdn_forward_batch,
    sample_n,
)
from .optim import TrainConfig, train
from .rng import STREAM_SAMPLE, make_rng

PROBLEMS = ("bifurcation", "sde", "shock", "chafee", "circle")

NUMERIC_ERRORS = (
    NonFiniteGradient,
    NonFiniteValue,
    SimulationDiverged,
    SamplerDiverged,
    UnstableTimestep,
)

#: per-problem training defaults (mixture side)
TRAIN_DEFAULTS = {
    "bifurcation": {"n_components": 3, "hidden": 16, "iterations": 20_000,
                    "residual": None, "lambda": 0.0},
    "sde": {"n_components": 2, "hidden": 32, "iterations": 20_000,
            "residual": None, "lambda": 0.0},
    "shock": {"n_components": 3, "hidden": 32, "iterations": 10_000,
              "residual": "monotonicity", "lambda": 1.0},
    "chafee": {"n_components": 2, "hidden": 32, "iterations": 50_000,
               "residual": "chafee_steady_state", "lambda": 1.0},
    "circle": {"n_components": 8, "hidden": 32, "iterations": 5_000,
               "residual": None, "lambda": 0.0},
}

CFM_DEFAULTS = {"hidden": 20, "iterations": 20_000}

GEN_DEFAULTS = {
    "bifurcation": {"n": 5000},
    "sde": {"n": 10_000},
    "shock": {"n": 150},
    "chafee": {"n": 100},
    "circle": {"n": 400},
}


@dataclass
class RunConfig:
    """Resolved settings for one training run."""

    problem: str
    model: str = "mdn"
    n_components: int = 3
    hidden: int = 16
    iterations: int = 20_000
    lr: float = 1e-3
    lambda_weight: float = 0.0
    residual_kind: str | None = None
    residual_h: float | None = None
    residual_constants: dict = field(default_factory=dict)
    class_mode: str = "none"
    seed: int = 0
    data: str | None = None
    out: str | None = None

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lambda_weight")
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        if "lambda" in doc:
            doc["lambda_weight"] = doc.pop("lambda")
        return cls(**doc)

    def validate(self, force_residual: bool = False) -> None:
        if self.problem not in PROBLEMS:
            raise InvalidConfig(f"unknown problem {self.problem!r}")
        if self.model not in ("mdn", "cfm"):
            raise InvalidConfig(f"unknown model {self.model!r}")
        if self.class_mode not in ("none", "class_informed"):
            raise InvalidConfig(f"unknown class mode {self.class_mode!r}")
        if self.residual_kind == "chafee_steady_state" and self.problem != "chafee" \
                and not force_residual:
            raise InvalidConfig(
                "chafee_steady_state residual outside the chafee problem "
                "(pass --force-residual to override)"
            )


def _resolve(defaults: dict, config_file: dict, flags: dict) -> dict:
    merged = dict(defaults)
    merged.update({k: v for k, v in config_file.items() if v is not None})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _meta_path(data_path: Path) -> Path:
    return data_path.with_suffix(data_path.suffix + ".meta.json")


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ==========================================================================
# gen
# ==========================================================================

def cmd_gen(args) -> int:
    cfg_file = _load_config_file(args.config)
    problem = args.problem or cfg_file.get("problem")
    if problem not in PROBLEMS:
        raise InvalidConfig(f"unknown problem {problem!r}")
    merged = _resolve({"n": GEN_DEFAULTS[problem]["n"], "seed": 0},
                      cfg_file, {"n": args.n, "seed": args.seed})
    n, seed = int(merged["n"]), int(merged["seed"])
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    if problem == "bifurcation":
        ds = problems.gen_bifurcation(n, seed)
    elif problem == "sde":
        sim = dict(problems.SDE_DEFAULTS)
        traj = problems.simulate_sde(**sim, seed=seed)
        ds = problems.gen_sde_dataset(traj, n, seed)
        ds.meta.update(sim)
    elif problem == "shock":
        per_regime = max(1, n // len(problems.REGIMES))
        ds = problems.gen_hugoniot_surrogate(n_per_regime=per_regime, seed=seed)
    elif problem == "chafee":
        ds = problems.gen_chafee_dataset(n_profiles=n, seed=seed)
    else:
        ds = problems.gen_circle(n=n, seed=seed)

    data_path = out_dir / f"{problem}.csv"
    if problem == "shock":
        problems.save_hugoniot(ds, data_path)
    else:
        save_csv(ds, data_path)
    meta = {k: v for k, v in ds.meta.items() if not isinstance(v, np.ndarray)}
    meta.update({"problem": problem, "seed": seed, "n_records": len(ds)})
    _write_json(_meta_path(data_path), meta)
    print(f"wrote {data_path} ({len(ds)} records) and sidecar")
    return 0


# ==========================================================================
# train
# ==========================================================================

def _build_run_config(args) -> RunConfig:
    cfg_file = _load_config_file(args.config)
    problem = args.problem or cfg_file.get("problem")
    if problem not in PROBLEMS:
        raise InvalidConfig(f"unknown problem {problem!r}")
    model_kind = args.model or cfg_file.get("model") or "mdn"
    defaults = dict(TRAIN_DEFAULTS[problem])
    if model_kind == "cfm":
        defaults.update(CFM_DEFAULTS)
    flag_values = {
        "n_components": args.components,
        "hidden": args.hidden,
        "iterations": args.iters,
        "lr": args.lr,
        "lambda": args.lambda_weight,
        "residual": args.residual,
        "seed": args.seed,
        "data": args.data,
        "out": args.out,
        "class_mode": "class_informed" if args.class_informed else None,
        "residual_h": args.stencil_h,
    }
    merged = _resolve({**defaults, "lr": 1e-3, "seed": 0, "class_mode": "none",
                       "residual_h": None, "data": None, "out": None},
                      cfg_file, flag_values)
    residual_kind = merged.get("residual")
    if residual_kind in ("none", ""):
        residual_kind = None
    config = RunConfig(
        problem=problem,
        model=model_kind,
        n_components=int(merged["n_components"]),
        hidden=int(merged["hidden"]),
        iterations=int(merged["iterations"]),
        lr=float(merged["lr"]),
        lambda_weight=float(merged["lambda"]),
        residual_kind=residual_kind,
        residual_h=None if merged.get("residual_h") is None else float(merged["residual_h"]),
        residual_constants=dict(merged.get("residual_constants", {})),
        class_mode=merged["class_mode"],
        seed=int(merged["seed"]),
        data=merged.get("data"),
        out=merged.get("out"),
    )
    config.validate(force_residual=args.force_residual)
    return config


def _residual_spec(config: RunConfig, meta: dict) -> ResidualSpec | None:
    if config.residual_kind is None or config.lambda_weight == 0.0:
        return None
    if config.residual_kind == "monotonicity":
        return ResidualSpec("monotonicity", h=config.residual_h)
    if config.residual_kind == "chafee_steady_state":
        constants = dict(config.residual_constants)
        constants.setdefault("nu", meta.get("nu", 0.16))
        h = config.residual_h if config.residual_h is not None else meta.get("dx")
        if h is None:
            raise InvalidConfig(
                "chafee_steady_state needs a stencil step: pass --stencil-h or "
                "train from a dataset with a sidecar carrying dx"
            )
        return ResidualSpec("chafee_steady_state", h=float(h), constants=constants)
    raise InvalidConfig(f"unsupported residual kind {config.residual_kind!r}")


def run_training(config: RunConfig) -> Path:
    """Train one model per the resolved config; returns the checkpoint path."""
    if not config.data:
        raise InvalidConfig("training requires --data")
    data_path = Path(config.data)
    ds = problems.load_hugoniot(data_path) if config.problem == "shock" \
        else load_csv(data_path)
    meta_file = _meta_path(data_path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    out_dir = Path(config.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    class_order = problems.REGIMES if config.problem == "shock" else None
    batch = Batch.from_dataset(ds, class_order=class_order)
    resolved = config.to_json_dict()
    _write_json(out_dir / "config.json", resolved)

    if config.model == "cfm":
        model = fit_standardization_cfm(
            init_cfm(config.seed, hidden=config.hidden), ds.contexts, ds.targets)
        trained, log = train_cfm(model, batch, TrainConfig(
            iterations=config.iterations, lr=config.lr, seed=config.seed))
    else:
        arch = Architecture(1, config.hidden, 2, config.n_components)
        model = fit_standardization(init_params(arch, config.seed),
                                    ds.contexts, ds.targets)
        spec = _residual_spec(config, meta)
        train_cfg = TrainConfig(
            iterations=config.iterations,
            lr=config.lr,
            lambda_weight=config.lambda_weight if spec is not None else 0.0,
            residual=spec,
            class_informed=config.class_mode == "class_informed",
            class_map=ClassMap.identity(config.n_components)
            if config.class_mode == "class_informed" else None,
            seed=config.seed,
        )
        try:
            trained, log = train(model, batch, train_cfg)
        except NonFiniteGradient as exc:
            partial = getattr(exc, "partial_log", None)
            if partial is not None:
                partial.to_csv(out_dir / "trainlog.csv")
            raise

    log.to_csv(out_dir / "trainlog.csv")
    checkpoint = out_dir / "checkpoint.json"
    save_checkpoint(trained, checkpoint, seed=config.seed,
                    training={"config": resolved,
                              "final_nll": fmt17(log.nll[-1]),
                              "final_physics": fmt17(log.physics[-1]),
                              "final_total": fmt17(log.total[-1])})
    print(f"trained {config.model} on {config.problem}: "
          f"nll {log.nll[-1]:.6f} physics {log.physics[-1]:.6f} total {log.total[-1]:.6f}")
    print(f"wrote {checkpoint}")
    return checkpoint


def cmd_train(args) -> int:
    base = _build_run_config(args)
    if args.sweep_seeds:
        seeds = [int(s) for s in args.sweep_seeds.split(",") if s != ""]
        root = Path(base.out or ".")
        for seed in seeds:
            sub = RunConfig(**{**asdict(base), "seed": seed, "out": str(root / f"seed{seed}")})
            run_training(sub)
        return 0
    run_training(base)
    return 0


# ==========================================================================
# sample
# ==========================================================================

def _parse_contexts(args) -> np.ndarray:
    if args.context_grid:
        lo, hi, count = args.context_grid.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    if args.contexts:
        return np.array([float(v) for v in args.contexts.split(",")])
    raise InvalidConfig("pass --contexts or --context-grid")


def cmd_sample(args) -> int:
    model, doc = load_checkpoint(args.checkpoint)
    contexts = _parse_contexts(args)
    n = args.n
    rng = make_rng(args.seed, STREAM_SAMPLE)
    out = Path(args.out or "samples.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["context", "sample"])
        for x in contexts:
            if doc["kind"] == "cfm":
                draws = cfm_sample(model, float(x), args.ode_steps, rng, n=n)
            else:
                draws = sample_n(mdn_forward(model, float(x)), n, rng)
            for value in draws:
                writer.writerow([fmt17(x), fmt17(value)])
    print(f"wrote {out} ({len(contexts)} contexts x {n} samples)")
    return 0


# ==========================================================================
# eval
# ==========================================================================

def _write_params_vs_context(model, grid: np.ndarray, path: Path) -> None:
    pi, mu, sigma = mdn_forward_batch(model, grid)
    m = pi.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["context"]
        for k in range(m):
            header += [f"pi{k}", f"mu{k}", f"sigma{k}"]
        writer.writerow(header)
        for i, x in enumerate(grid):
            row = [fmt17(x)]
            for k in range(m):
                row += [fmt17(pi[i, k]), fmt17(mu[i, k]), fmt17(sigma[i, k])]
            writer.writerow(row)


def _write_density_csv(path: Path, grid: np.ndarray, columns: dict) -> None:
    names = list(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["grid"] + names)
        for i, g in enumerate(grid):
            writer.writerow([fmt17(g)] + [fmt17(columns[name][i]) for name in names])


def cmd_eval(args) -> int:
    model, doc = load_checkpoint(args.checkpoint)
    problem = args.problem or doc.get("training", {}).get("config", {}).get("problem")
    if problem not in PROBLEMS:
        raise InvalidConfig(f"unknown problem {problem!r}")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    is_mdn = doc["kind"] == "mdn"
    seed = args.seed
    metrics: dict = {}
    provenance = doc.get("training", {}).get("config", {"problem": problem})

    if args.contexts:
        eval_contexts = np.array([float(v) for v in args.contexts.split(",")])
    else:
        eval_contexts = None

    if problem == "bifurcation":
        contexts = eval_contexts if eval_contexts is not None else np.array([-0.8, 0.0, 0.8])
        rng = make_rng(seed, STREAM_SAMPLE)
        rows = []
        for lam in contexts:
            roots = problems.bifurcation_roots(float(lam))
            if is_mdn:
                report = extract_modes(model, float(lam), oracle_modes=roots)
                metrics[f"n_modes_at_{lam:g}"] = len(report.pi)
                if report.errors is not None and len(report.errors):
                    metrics[f"max_mode_error_at_{lam:g}"] = float(np.max(report.errors))
                draws = sample_n(mdn_forward(model, float(lam)), args.n_samples, rng)
            else:
                draws = cfm_sample(model, float(lam), args.ode_steps, rng, n=args.n_samples)
            rows += [(lam, v) for v in draws]
        with open(out_dir / "samples.csv", "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["context", "sample"])
            for lam, v in rows:
                writer.writerow([fmt17(lam), fmt17(v)])
        if is_mdn:
            _write_params_vs_context(model, np.linspace(-3, 3, 601),
                                     out_dir / "params_vs_context.csv")

    elif problem == "sde":
        meta = doc.get("training", {}).get("config", {})
        a3 = float(args.a3)
        grid = np.linspace(-3, 3, 6001)
        contexts = eval_contexts if eval_contexts is not None else np.array([5.0, 12.0])
        for u1 in contexts:
            oracle = problems.stationary_density(float(u1), a3, grid)
            if is_mdn:
                curve = mdn_density_curve(model, float(u1), grid)
                metrics[f"density_l1_at_{u1:g}"] = density_l1(curve, oracle)
                cols = {"model": curve.density, "oracle": oracle.density}
            else:
                cols = {"oracle": oracle.density}
            _write_density_csv(out_dir / f"density_u1_{u1:g}.csv", grid, cols)
        if is_mdn:
            _write_params_vs_context(model, np.linspace(0, 12, 601),
                                     out_dir / "params_vs_context.csv")

    elif problem == "shock":
        grid = np.linspace(args.lo, args.hi, 257)
        if is_mdn:
            h = 1e-2 * float(model.x_std[0])
            metrics["monotonicity_violation"] = monotonicity_violation(model, grid, h)
            _write_params_vs_context(model, grid, out_dir / "params_vs_context.csv")

    elif problem == "chafee":
        import math as _math

        nx = 64
        dx = _math.pi / (nx + 1)
        grid = np.linspace(dx, _math.pi - dx, nx)
        if is_mdn:
            metrics["weighted_steady_residual"] = chafee_weighted_residual(
                model, grid, h=dx, nu=args.nu)
            metrics["average_sigma"] = average_sigma(model, grid)
            _write_params_vs_context(model, grid, out_dir / "params_vs_context.csv")

    else:  # circle
        contexts = eval_contexts if eval_contexts is not None else np.linspace(0.15, 0.85, 9)
        grid = np.linspace(-0.3, 1.3, 1601)
        if is_mdn:
            pi, _, _ = mdn_forward_batch(model, contexts)
            suppressed = int(np.sum(pi.max(axis=0) < 0.05))
            metrics["n_suppressed_components"] = suppressed
            for x in contexts:
                curve = mdn_density_curve(model, float(x), grid)
                _write_density_csv(out_dir / f"density_x_{x:g}.csv", grid,
                                   {"model": curve.density})
            _write_params_vs_context(model, np.linspace(0.0, 1.0, 401),
                                     out_dir / "params_vs_context.csv")

    write_report(out_dir / "report.json", metrics, config=provenance, seed=seed)
    for name, value in sorted(metrics.items()):
        print(f"{name}: {value}")
    print(f"wrote {out_dir / 'report.json'}")
    return 0


# ==========================================================================
# parser
# ==========================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pimdn",
        description="physics-informed mixture density toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a benchmark dataset")
    gen.add_argument("--problem", choices=PROBLEMS)
    gen.add_argument("--n", type=int, help="records (or profiles for chafee)")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--config", help="JSON config file")
    gen.add_argument("--out", help="output directory")
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train a model on a dataset CSV")
    tr.add_argument("--problem", choices=PROBLEMS)
    tr.add_argument("--model", choices=("mdn", "cfm"))
    tr.add_argument("--data", help="dataset CSV path")
    tr.add_argument("--out", help="output directory")
    tr.add_argument("--config", help="JSON config file")
    tr.add_argument("--components", type=int)
    tr.add_argument("--hidden", type=int)
    tr.add_argument("--iters", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--lambda", dest="lambda_weight", type=float)
    tr.add_argument("--residual", choices=("none", "monotonicity", "chafee_steady_state"))
    tr.add_argument("--stencil-h", type=float)
    tr.add_argument("--class-informed", action="store_true", default=None)
    tr.add_argument("--force-residual", action="store_true")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--sweep-seeds", help="comma-separated seeds for independent runs")
    tr.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="draw samples from a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--contexts", help="comma-separated context values")
    sp.add_argument("--context-grid", help="lo:hi:count")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--ode-steps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample)

    ev = sub.add_parser("eval", help="evaluate a checkpoint against oracles")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--problem", choices=PROBLEMS)
    ev.add_argument("--contexts", help="comma-separated evaluation contexts")
    ev.add_argument("--n-samples", type=int, default=5000)
    ev.add_argument("--ode-steps", type=int, default=100)
    ev.add_argument("--a3", type=float, default=1.0)
    ev.add_argument("--nu", type=float, default=0.16)
    ev.add_argument("--lo", type=float, default=0.0, help="shock grid lower bound")
    ev.add_argument("--hi", type=float, default=4.5, help="shock grid upper bound")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (PimdnError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
