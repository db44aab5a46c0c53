"""Session-scoped heavy training runs shared by the acceptance suite.

Each fixture trains full-size models through the CLI once per session;
acceptance criteria read metrics from the cached runs, and the
determinism criterion replays them.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pipelines import (  # noqa: E402
    Run,
    bifurcation_cfm_args,
    bifurcation_mdn_args,
    chafee_args,
    circle_args,
    gen_args,
    sde_args,
    shock_args,
)

SEEDS = (0, 1, 2)
SHOCK_SEEDS = (1, 2, 3)


@pytest.fixture(scope="session")
def work_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def bifurcation_runs(work_dir) -> dict[int, Run]:
    runs = {}
    for seed in SEEDS:
        data_dir = work_dir / f"bif_data_{seed}"
        runs[seed] = Run(
            work_dir,
            gen_args("bifurcation", seed, data_dir),
            bifurcation_mdn_args(seed, data_dir / "bifurcation.csv",
                                 work_dir / f"bif_mdn_{seed}"),
        )
    return runs


@pytest.fixture(scope="session")
def cfm_runs(work_dir, bifurcation_runs) -> dict[int, Run]:
    runs = {}
    for seed in SEEDS:
        data_dir = work_dir / f"bif_data_{seed}"  # same datasets as the MDN side
        runs[seed] = Run(
            work_dir,
            gen_args("bifurcation", seed, data_dir),
            bifurcation_cfm_args(seed, data_dir / "bifurcation.csv",
                                 work_dir / f"bif_cfm_{seed}"),
        )
    return runs


@pytest.fixture(scope="session")
def sde_run(work_dir) -> Run:
    data_dir = work_dir / "sde_data"
    return Run(
        work_dir,
        gen_args("sde", 1, data_dir),
        sde_args(1, data_dir / "sde.csv", work_dir / "sde_mdn"),
    )


@pytest.fixture(scope="session")
def shock_runs(work_dir) -> dict[tuple, Run]:
    """Keyed by (seed, lambda, class_informed)."""
    runs = {}
    for seed in SHOCK_SEEDS:
        data_dir = work_dir / f"shock_data_{seed}"
        for lam, class_informed in ((0.0, False), (1.0, False), (1.0, True)):
            tag = f"shock_{seed}_lam{lam:g}_{'cls' if class_informed else 'plain'}"
            runs[(seed, lam, class_informed)] = Run(
                work_dir,
                gen_args("shock", seed, data_dir),
                shock_args(seed, data_dir / "shock.csv", work_dir / tag,
                           lam, class_informed),
            )
    return runs


@pytest.fixture(scope="session")
def chafee_runs(work_dir) -> dict[tuple, Run]:
    """Keyed by (seed, regularized)."""
    runs = {}
    for seed in SEEDS:
        data_dir = work_dir / f"chafee_data_{seed}"
        for lam in (0.0, 1.0):
            tag = f"chafee_{seed}_lam{lam:g}"
            runs[(seed, lam > 0)] = Run(
                work_dir,
                gen_args("chafee", seed, data_dir),
                chafee_args(seed, data_dir / "chafee.csv", work_dir / tag, lam),
            )
    return runs


@pytest.fixture(scope="session")
def circle_runs(work_dir) -> dict[int, Run]:
    data_dir = work_dir / "circle_data"
    runs = {}
    for m in (2, 4, 8):
        runs[m] = Run(
            work_dir,
            gen_args("circle", 10, data_dir),
            circle_args(m, data_dir / "circle.csv", work_dir / f"circle_m{m}", seed=1),
        )
    return runs
