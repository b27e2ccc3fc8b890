"""Energy accounting and test-set accuracy.

Energy is in parameter-pass units: parameters touched times passes, with an
overhead factor for LL0 passes and a flat multiplier for structural rules.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError

LL0_PASS_FACTOR = 3
RULE_FACTOR = 10


@dataclass(frozen=True)
class LedgerEntry:
    step: int
    params: int
    passes: int
    factor: int
    kind: str  # "baseline" | "pass" | "rule"

    @property
    def energy(self) -> int:
        return self.params * self.passes * self.factor


@dataclass
class EnergyLedger:
    cumulative_energy: int = 0
    entries: list = field(default_factory=list)
    step: int = 0

    def _add(self, entry: LedgerEntry):
        self.entries.append(entry)
        self.cumulative_energy += entry.energy
        return entry.energy

    def charge_baseline(self, params: int, points_processed: int):
        """One forward and one backward pass per training point."""
        return self._add(LedgerEntry(self.step, params, 2 * points_processed, 1, "baseline"))

    def charge_ll0_pass(self, current_params: int, did_backprop: bool):
        passes = 2 if did_backprop else 1
        return self._add(LedgerEntry(self.step, current_params, passes, LL0_PASS_FACTOR, "pass"))

    def charge_rule(self, current_params: int):
        return self._add(LedgerEntry(self.step, current_params, 1, RULE_FACTOR, "rule"))

    def replay(self) -> int:
        return sum(e.energy for e in self.entries)


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    if len(labels) == 0:
        raise DatasetError("cannot evaluate accuracy on an empty test set")
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def eval_accuracy(model, test) -> float:
    """Accuracy of an LL0 network or an MLP on a dataset; never charged."""
    from .baselines import Mlp
    from .graph import Network, predict_batch

    if len(test) == 0:
        raise DatasetError("cannot evaluate accuracy on an empty test set")
    if isinstance(model, Network):
        probs = predict_batch(model, test.X)
    elif isinstance(model, Mlp):
        probs = model.predict_proba(test.X)
    else:
        raise TypeError(f"cannot evaluate {type(model).__name__}")
    return accuracy(probs, test.labels)


METRIC_COLUMNS = ("step", "epoch", "accuracy", "energy", "nodes", "concepts", "depth", "max_fan_in")
LEDGER_COLUMNS = ("step", "accuracy", "energy", "n_nodes", "n_edges", "n_params")


def write_rows(path, columns, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
