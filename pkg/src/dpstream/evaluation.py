"""Workload-error metrics comparing a synthetic stream against the true one.

The evaluator is offline analysis: it reads the exact accumulated true dataset
and is not privacy constrained.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .domain import WeightedDataset
from .queries import Workload, WorkloadSet, eval_workload


@dataclass(frozen=True)
class MetricRow:
    """Per-step metric record for one (algorithm, epsilon, seed) run."""

    t: int
    epsilon: float
    algorithm: str
    seed: int
    avg_we: float
    max_we: float
    avg_relwe: float
    max_relwe: float


class MetricAggregate(NamedTuple):
    avg_we: float
    max_we: float
    avg_relwe: float
    max_relwe: float


def workload_error(
    workload: Workload,
    true_data: WeightedDataset,
    synthetic: WeightedDataset,
    normalize: bool = True,
) -> float:
    """Average absolute cell error over the workload.

    With ``normalize`` both cell vectors are divided by the true dataset's
    total mass first, turning counts into frequencies relative to the true
    data; this is the scale the headline numbers are reported on.
    """
    f = eval_workload(workload, true_data)
    g = eval_workload(workload, synthetic)
    if normalize:
        mass = true_data.total_mass()
        if mass == 0:
            raise ValueError("cannot normalize against a zero-mass true dataset")
        f = f / mass
        g = g / mass
    return float(np.abs(f - g).mean())


def _relative_error_cells(
    workload: Workload, true_data: WeightedDataset, synthetic: WeightedDataset
) -> tuple[float, int]:
    f = eval_workload(workload, true_data)
    g = eval_workload(workload, synthetic)
    mask = f > 0
    excluded = int((~mask).sum())
    if not mask.any():
        raise ValueError("relative workload error undefined: all true cells are zero")
    rel = np.abs((f[mask] - g[mask]) / f[mask])
    return float(rel.mean()), excluded


def relative_workload_error(
    workload: Workload, true_data: WeightedDataset, synthetic: WeightedDataset
) -> float:
    """Average relative cell error; cells with a zero true value are excluded
    from both the numerator and the divisor count."""
    value, _ = _relative_error_cells(workload, true_data, synthetic)
    return value


def aggregate(we_values: Sequence[float], relwe_values: Sequence[float]) -> MetricAggregate:
    """Mean and max over per-workload errors."""
    if len(we_values) == 0 or len(relwe_values) == 0:
        raise ValueError("cannot aggregate over an empty workload set")
    return MetricAggregate(
        avg_we=float(np.mean(we_values)),
        max_we=float(np.max(we_values)),
        avg_relwe=float(np.mean(relwe_values)),
        max_relwe=float(np.max(relwe_values)),
    )


def evaluate_step(
    workloads: WorkloadSet,
    true_data: WeightedDataset,
    synthetic: WeightedDataset,
    normalize: bool = True,
) -> tuple[MetricAggregate, int]:
    """All four aggregates for one time step, plus the count of excluded
    zero-denominator cells (reported in run metadata)."""
    we = []
    relwe = []
    excluded = 0
    for w in workloads:
        we.append(workload_error(w, true_data, synthetic, normalize=normalize))
        value, skipped = _relative_error_cells(w, true_data, synthetic)
        relwe.append(value)
        excluded += skipped
    return aggregate(we, relwe), excluded


def summarize_tail(rows: Sequence[MetricRow], window: int) -> dict[str, float]:
    """Per-metric means over the final ``window`` rows."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(rows) < window:
        raise ValueError(f"need at least {window} rows, got {len(rows)}")
    tail = rows[-window:]
    return {
        "AvgWE": float(np.mean([r.avg_we for r in tail])),
        "MaxWE": float(np.mean([r.max_we for r in tail])),
        "AvgRelWE": float(np.mean([r.avg_relwe for r in tail])),
        "MaxRelWE": float(np.mean([r.max_relwe for r in tail])),
    }
