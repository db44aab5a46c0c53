"""Official-artifact pipelines used by the acceptance suite.

Every heavy run goes through the command-line interface so that the
artifacts on disk (dataset CSV + sidecar, checkpoint JSON, training log,
resolved config) are the same files a user would produce.  The
determinism criterion re-invokes these with identical arguments and
compares bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from pimdn.checkpoints import load_checkpoint
from pimdn.cli import main as cli_main


def run_cli(*argv: str) -> None:
    code = cli_main([str(a) for a in argv])
    assert code == 0, f"cli {argv} exited with {code}"


def gen_args(problem: str, seed: int, out: Path, n: int | None = None) -> list:
    argv = ["gen", "--problem", problem, "--seed", seed, "--out", out]
    if n is not None:
        argv += ["--n", n]
    return argv


def bifurcation_mdn_args(seed: int, data: Path, out: Path) -> list:
    return ["train", "--problem", "bifurcation", "--model", "mdn", "--data", data,
            "--out", out, "--seed", seed]


def bifurcation_cfm_args(seed: int, data: Path, out: Path) -> list:
    return ["train", "--problem", "bifurcation", "--model", "cfm", "--data", data,
            "--out", out, "--seed", seed]


def sde_args(seed: int, data: Path, out: Path) -> list:
    return ["train", "--problem", "sde", "--data", data, "--out", out, "--seed", seed]


def shock_args(seed: int, data: Path, out: Path, lam: float, class_informed: bool) -> list:
    argv = ["train", "--problem", "shock", "--data", data, "--out", out,
            "--seed", seed, "--lambda", lam]
    if lam == 0.0:
        argv += ["--residual", "none"]
    if class_informed:
        argv += ["--class-informed"]
    return argv


def chafee_args(seed: int, data: Path, out: Path, lam: float) -> list:
    argv = ["train", "--problem", "chafee", "--data", data, "--out", out,
            "--seed", seed, "--lambda", lam]
    if lam == 0.0:
        argv += ["--residual", "none"]
    return argv


def circle_args(m: int, data: Path, out: Path, seed: int = 10) -> list:
    return ["train", "--problem", "circle", "--data", data, "--out", out,
            "--seed", seed, "--components", m]


class Run:
    """One generated dataset + trained checkpoint, with replay support."""

    def __init__(self, root: Path, gen_argv: list, train_argv: list):
        self.root = Path(root)
        self.gen_argv = [str(a) for a in gen_argv]
        self.train_argv = [str(a) for a in train_argv]
        run_cli(*self.gen_argv)
        run_cli(*self.train_argv)

    @property
    def data_dir(self) -> Path:
        return Path(self.gen_argv[self.gen_argv.index("--out") + 1])

    @property
    def out_dir(self) -> Path:
        return Path(self.train_argv[self.train_argv.index("--out") + 1])

    @property
    def checkpoint(self) -> Path:
        return self.out_dir / "checkpoint.json"

    def model(self):
        model, _ = load_checkpoint(self.checkpoint)
        return model

    def log_path(self) -> Path:
        return self.out_dir / "trainlog.csv"

    def artifact_bytes(self) -> dict[str, bytes]:
        files = sorted(p for p in self.data_dir.glob("*") if p.is_file())
        files += sorted(p for p in self.out_dir.glob("*") if p.is_file())
        return {str(p): p.read_bytes() for p in files}

    def replay(self) -> dict[str, bytes]:
        """Re-run generation and training with identical arguments."""
        run_cli(*self.gen_argv)
        run_cli(*self.train_argv)
        return self.artifact_bytes()


def dataset_meta(run: Run, problem: str) -> dict:
    return json.loads((run.data_dir / f"{problem}.csv.meta.json").read_text())
