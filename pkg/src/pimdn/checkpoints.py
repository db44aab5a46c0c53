"""Model checkpoints: one JSON document per trained model.

Schema (``format`` = "pimdn-checkpoint-v1")::

    {
      "format": ..., "kind": "mdn" | "cfm",
      "architecture": {...},
      "standardization": {"x_mean": [...], "x_std": [...],
                           "u_mean": ..., "u_std": ...},
      "parameters": ["<17-significant-digit decimal>", ...],
      "seed": ..., "training": {...}
    }

Floating-point fields are stored as decimal strings with 17 significant
digits, which round-trips IEEE float64 exactly; loading a checkpoint
therefore reproduces every parameter bit-for-bit.  Files are written
with sorted keys and LF newlines so identical models produce identical
bytes.  Timestamps are deliberately excluded.
"""

from __future__ import annotations

import json

import numpy as np

from .cfm import CfmModel
from .data import fmt17
from .errors import InvalidInput
from .mdn import Architecture, MdnModel

FORMAT = "pimdn-checkpoint-v1"


def _std_block(model) -> dict:
    return {
        "x_mean": [fmt17(v) for v in model.x_mean],
        "x_std": [fmt17(v) for v in model.x_std],
        "u_mean": fmt17(model.u_mean),
        "u_std": fmt17(model.u_std),
    }


def _apply_std_block(block: dict) -> dict:
    return {
        "x_mean": np.array([float(v) for v in block["x_mean"]]),
        "x_std": np.array([float(v) for v in block["x_std"]]),
        "u_mean": float(block["u_mean"]),
        "u_std": float(block["u_std"]),
    }


def checkpoint_dict(model, seed: int | None = None, training: dict | None = None) -> dict:
    if isinstance(model, MdnModel):
        kind = "mdn"
        arch = {
            "d_x": model.arch.d_x,
            "hidden": model.arch.hidden,
            "n_layers": model.arch.n_layers,
            "n_components": model.arch.n_components,
            "d_u": model.arch.d_u,
            "activation": model.arch.activation,
            "sigma_clamp": list(model.sigma_clamp),
        }
    elif isinstance(model, CfmModel):
        kind = "cfm"
        arch = {"d_x": model.d_x, "hidden": model.hidden, "n_layers": model.n_layers}
    else:
        raise InvalidInput(f"cannot checkpoint object of type {type(model).__name__}")
    return {
        "format": FORMAT,
        "kind": kind,
        "architecture": arch,
        "standardization": _std_block(model),
        "parameters": [fmt17(v) for v in model.params],
        "seed": seed,
        "training": training or {},
    }


def save_checkpoint(model, path, seed: int | None = None, training: dict | None = None) -> None:
    doc = checkpoint_dict(model, seed=seed, training=training)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise InvalidInput(f"not a checkpoint document (format={doc.get('format')!r})")
    params = np.array([float(v) for v in doc["parameters"]])
    std = _apply_std_block(doc["standardization"])
    arch = doc["architecture"]
    if doc["kind"] == "mdn":
        return MdnModel(
            arch=Architecture(
                d_x=arch["d_x"],
                hidden=arch["hidden"],
                n_layers=arch["n_layers"],
                n_components=arch["n_components"],
                d_u=arch["d_u"],
                activation=arch["activation"],
            ),
            params=params,
            sigma_clamp=tuple(arch["sigma_clamp"]),
            **std,
        )
    if doc["kind"] == "cfm":
        return CfmModel(
            params=params,
            hidden=arch["hidden"],
            n_layers=arch["n_layers"],
            d_x=arch["d_x"],
            **std,
        )
    raise InvalidInput(f"unknown checkpoint kind {doc['kind']!r}")


def load_checkpoint(path):
    """Returns (model, full document).  Model kind dispatch is automatic."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc
