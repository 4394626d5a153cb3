"""The two streaming synthesizers: a per-step MWEM baseline and the
counter-backed select-measure-fit algorithm.

Both consume one insert-only differential per time step and release one
synthetic dataset per step; neither ever reads the accumulated true dataset.
Per step, half the budget goes to exponential-mechanism selections and half to
the measurements (fresh Laplace noise for the baseline, continual counters for
the main algorithm). Distinct steps hold disjoint records, so the per-step
budget is the whole-stream guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .counters import MultiDimCounter
from .domain import WeightedDataset, accumulate, dataset_mean
from .fitters import (
    DEFAULT_SEED_SUPPORT,
    Measurement,
    MultiplicativeWeightsFitter,
    WorkingSupport,
    make_fitter,
)
from .mechanisms import BudgetLedger, NoiseSource, exponential_mechanism
from .queries import WorkloadSet, eval_workload

# child-source roles under the run seed
_SELECT = 0
_MEASURE = 1
_COUNTER = 2
_SUPPORT = 3

ALGORITHMS = ("baseline", "main")


@dataclass
class RunConfig:
    """Everything one synthesizer run needs besides the stream itself."""

    epsilon: Fraction
    k: int
    workloads: WorkloadSet
    counter_kind: str = "simple"
    block_size: int | None = None
    selection_sensitivity: float | None = None
    fitter_name: str = "mw"
    seed_support_size: int = DEFAULT_SEED_SUPPORT
    passes: int = 1
    seed: int = 0
    noise_mode: str = "laplace"

    def __post_init__(self) -> None:
        self.epsilon = Fraction(str(self.epsilon)) if not isinstance(self.epsilon, Fraction) else self.epsilon
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > len(self.workloads):
            raise ValueError(
                f"cannot select k={self.k} distinct workloads out of {len(self.workloads)}"
            )

    def resolved_sensitivity(self) -> float:
        """Selection sensitivity: 1/4 when every workload is 2-way, else 1."""
        if self.selection_sensitivity is not None:
            return float(self.selection_sensitivity)
        if all(w.arity == 2 for w in self.workloads):
            return 0.25
        return 1.0


class _StreamSynthesizer:
    """Shared state: working support, fitter, noise sources, budget ledger."""

    algorithm = "base"

    def __init__(self, config: RunConfig):
        self.config = config
        self.workloads = config.workloads
        self.schema = config.workloads[0].schema
        self.t = 0
        root = NoiseSource(config.seed, mode=config.noise_mode)
        self._select_source = root.child(_SELECT)
        self._measure_source = root.child(_MEASURE)
        self._counter_root = root.child(_COUNTER)
        self.support = WorkingSupport(
            self.schema, seed_size=config.seed_support_size, seed=config.seed
        )
        self.fitter: MultiplicativeWeightsFitter = make_fitter(
            config.fitter_name, self.support, passes=config.passes
        )
        self.ledger = BudgetLedger(config.epsilon)
        self.g = self.support.unit_dataset()
        self._eps_step = float(config.epsilon) / (2 * config.k)
        self._sensitivity = config.resolved_sensitivity()

    def _check_delta(self, delta: WeightedDataset) -> None:
        if delta.schema != self.schema:
            raise ValueError("differential schema does not match the run schema")

    def step(self, delta: WeightedDataset) -> WeightedDataset:
        raise NotImplementedError


class StreamingMwem(_StreamSynthesizer):
    """Baseline: an independent MWEM pass over each differential.

    Each step fits a fresh synthetic differential from scratch (uniform over
    the working support at the differential's mass) using k rounds of
    exponential-mechanism selection and per-cell Laplace measurement, then adds
    the averaged fit onto the running synthetic dataset.
    """

    algorithm = "baseline"

    def step(self, delta: WeightedDataset) -> WeightedDataset:
        self._check_delta(delta)
        self.t += 1
        self.support.observe(delta)
        target = delta.total_mass()
        if target == 0:
            return self.g  # nothing arrived: no spend, synthetic stream holds
        cfg = self.config
        group = f"t={self.t}"
        h = self.support.uniform_dataset(target)
        delta_values = {i: eval_workload(w, delta) for i, w in enumerate(self.workloads)}
        fits: list[WeightedDataset] = []
        measured: list[Measurement] = []
        selected: list[int] = []
        for l in range(1, cfg.k + 1):
            candidates = [i for i in range(len(self.workloads)) if i not in selected]
            utilities = np.array(
                [
                    np.abs(delta_values[i] - eval_workload(self.workloads[i], h)).sum()
                    / self.workloads[i].size
                    for i in candidates
                ]
            )
            pick = exponential_mechanism(
                utilities, self._eps_step, self._sensitivity, self._select_source
            )
            j = candidates[pick]
            self.ledger.spend(
                f"{group}/select/l={l}", cfg.epsilon, 2 * cfg.k, group=group, category="selection"
            )
            selected.append(j)
            workload = self.workloads[j]
            scale = 1.0 / self._eps_step  # sensitivity-1 histogram at eps/2k
            noisy = delta_values[j] + self._measure_source.laplace_vector(scale, workload.size)
            self.ledger.spend(
                f"{group}/measure/W={j}", cfg.epsilon, 2 * cfg.k, group=group, category="measurement"
            )
            measured.append(Measurement(j, workload, noisy))
            h = self.fitter.fit(measured, h, target)
            fits.append(h)
        self.g = accumulate(self.g, dataset_mean(fits))
        return self.g


class CounterSynthesizer(_StreamSynthesizer):
    """Counter-backed select-measure-fit over the whole stream.

    Each workload owns a multi-dimensional continual counter fed only at the
    steps where the workload is selected. For unselected steps the remainder
    map carries the workload's value as read off the synthetic stream, so a
    measurement at time t is always counter value plus remainder. Selection
    scores workloads against the surrogate (differential plus previous
    synthetic dataset), with the cell-count bias subtracted.
    """

    algorithm = "main"

    def __init__(self, config: RunConfig):
        super().__init__(config)
        self.counters: dict[int, MultiDimCounter] = {}
        self.remainders: dict[int, np.ndarray] = {}
        self.last_measurements: dict[int, np.ndarray] = {}
        self.last_selected: list[int] = []

    def _ensure_counter(self, j: int) -> MultiDimCounter:
        counter = self.counters.get(j)
        if counter is None:
            counter = MultiDimCounter(
                self.config.counter_kind,
                self.workloads[j].size,
                self._eps_step,
                self._counter_root.child(j),
                block_size=self.config.block_size,
            )
            self.counters[j] = counter
        return counter

    def _remainder_on_first_selection(self, j: int) -> np.ndarray:
        # Never-selected workloads have an all-zero counter, so the remainder
        # they would have been carrying is just the workload's value on the
        # latest synthetic dataset (zero before any dataset exists).
        if self.t == 1:
            return np.zeros(self.workloads[j].size)
        return eval_workload(self.workloads[j], self.g)

    def step(self, delta: WeightedDataset) -> WeightedDataset:
        self._check_delta(delta)
        self.t += 1
        self.support.observe(delta)
        surrogate = accumulate(delta, self.g)
        target = surrogate.total_mass()
        if target == 0:
            return self.g  # no data and no synthetic mass: skip, no spend
        cfg = self.config
        group = f"t={self.t}"
        surrogate_values = {i: eval_workload(w, surrogate) for i, w in enumerate(self.workloads)}
        h = self.support.extend(self.g)
        fits: list[WeightedDataset] = []
        measured: list[Measurement] = []
        selected: list[int] = []
        for l in range(1, cfg.k + 1):
            candidates = [i for i in range(len(self.workloads)) if i not in selected]
            utilities = np.array(
                [
                    np.abs(surrogate_values[i] - eval_workload(self.workloads[i], h)).sum()
                    / self.workloads[i].size
                    - self.workloads[i].size
                    for i in candidates
                ]
            )
            pick = exponential_mechanism(
                utilities, self._eps_step, self._sensitivity, self._select_source
            )
            j = candidates[pick]
            self.ledger.spend(
                f"{group}/select/l={l}", cfg.epsilon, 2 * cfg.k, group=group, category="selection"
            )
            selected.append(j)
            workload = self.workloads[j]
            if j not in self.remainders:
                self.remainders[j] = self._remainder_on_first_selection(j)
            counter = self._ensure_counter(j)
            counter_values = counter.feed(eval_workload(workload, delta))
            self.ledger.spend(
                f"{group}/counter/W={j}", cfg.epsilon, 2 * cfg.k, group=group, category="counter"
            )
            # remainder carries over unchanged on a selected step
            self.last_measurements[j] = counter_values + self.remainders[j]
            measured.append(Measurement(j, workload, self.last_measurements[j]))
            h = self.fitter.fit(measured, h, target)
            fits.append(h)
        g_t = dataset_mean(fits)
        for i in self.counters:
            if i not in selected:
                self.remainders[i] = eval_workload(self.workloads[i], g_t) - self.counters[i].peek()
        self.last_selected = selected
        self.g = g_t
        return g_t


def make_synthesizer(algorithm: str, config: RunConfig) -> _StreamSynthesizer:
    if algorithm == "baseline":
        return StreamingMwem(config)
    if algorithm == "main":
        return CounterSynthesizer(config)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
