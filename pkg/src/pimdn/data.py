"""Dataset container and CSV serialization.

CSV schema: header ``context,target`` with an optional third ``label``
column, UTF-8, LF newlines.  Floats are written with 17 significant
digits so a save/load round trip is value-exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, ParseError


def fmt17(x: float) -> str:
    """Decimal text with 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


@dataclass
class Dataset:
    """Records of (context, target) pairs with optional class labels."""

    contexts: np.ndarray
    targets: np.ndarray
    labels: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.contexts.shape[0] != self.targets.shape[0]:
            raise InvalidInput("contexts and targets must have equal lengths")
        if self.labels is not None:
            self.labels = list(self.labels)
            if len(self.labels) != len(self.targets):
                raise InvalidInput("labels must match record count")

    def __len__(self) -> int:
        return len(self.targets)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if dataset.labels is None:
            writer.writerow(["context", "target"])
            for x, u in zip(dataset.contexts, dataset.targets):
                writer.writerow([fmt17(x), fmt17(u)])
        else:
            writer.writerow(["context", "target", "label"])
            for x, u, c in zip(dataset.contexts, dataset.targets, dataset.labels):
                writer.writerow([fmt17(x), fmt17(u), c])


def load_csv(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file, expected a header row", 1)
    header = rows[0]
    if header == ["context", "target"]:
        labeled = False
    elif header == ["context", "target", "label"]:
        labeled = True
    else:
        raise ParseError(f"unexpected header {header!r}", 1)
    xs, us, labels = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", i)
        try:
            xs.append(float(row[0]))
            us.append(float(row[1]))
        except ValueError as exc:
            raise ParseError(str(exc), i) from exc
        if labeled:
            labels.append(row[2])
    return Dataset(np.array(xs), np.array(us), labels if labeled else None)
