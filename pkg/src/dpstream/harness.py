"""Dataset ingestion, stream construction, and experiment orchestration.

The harness owns every file format: schema JSON (which fixes the string-to-
index dictionaries), input CSVs, per-run metric CSVs, and summary/metadata
JSON. Algorithms only ever see differentials, never the accumulated dataset.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .algorithms import ALGORITHMS, RunConfig, make_synthesizer
from .domain import DatasetStream, DomainSchema, WeightedDataset, accumulate
from .evaluation import MetricRow, evaluate_step, summarize_tail
from .queries import enumerate_workloads

METRIC_COLUMNS = ("t", "AvgWE", "MaxWE", "AvgRelWE", "MaxRelWE")

STREAM_VARIANTS = ("timestamp_bucketed", "randomized_batch", "ordered_batch")


class IngestError(ValueError):
    """A CSV row could not be mapped onto the schema."""


def load_schema(path: str | Path) -> tuple[DomainSchema, list[list[str]]]:
    """Read a schema file: an ordered list of {name, values} attribute specs.

    The position of a value in its list defines the integer index used
    everywhere downstream.
    """
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if not isinstance(spec, list) or not spec:
        raise ValueError(f"schema file {path} must be a nonempty list of attributes")
    attributes = []
    value_lists = []
    for entry in spec:
        name = entry["name"]
        values = entry["values"]
        if not values:
            raise ValueError(f"attribute {name!r} has no values")
        if len(set(values)) != len(values):
            raise ValueError(f"attribute {name!r} has duplicate values")
        attributes.append((name, len(values)))
        value_lists.append([str(v) for v in values])
    return DomainSchema(tuple(attributes)), value_lists


@dataclass(frozen=True)
class StreamSpec:
    """How to slice a row file into a time-indexed stream."""

    variant: str
    timestamp_column: str | None = None
    bucket_days: int | None = None
    batch_size: int | None = None
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.variant not in STREAM_VARIANTS:
            raise ValueError(f"unknown stream variant {self.variant!r}; expected {STREAM_VARIANTS}")
        if self.variant == "timestamp_bucketed":
            if not self.timestamp_column:
                raise ValueError("timestamp_bucketed streams need a timestamp_column")
            if self.bucket_days is None or self.bucket_days < 1:
                raise ValueError("bucket width must be at least one day")
        else:
            if self.batch_size is None or self.batch_size < 1:
                raise ValueError("batched streams need batch_size >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> "StreamSpec":
        known = {"variant", "timestamp_column", "bucket_days", "batch_size", "seed", "max_steps"}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown stream spec fields: {sorted(unknown)}")
        return cls(**spec)


def ingest_csv(
    path: str | Path,
    schema: DomainSchema,
    value_lists: list[list[str]],
    timestamp_column: str | None = None,
) -> list[tuple[tuple[int, ...], date | None]]:
    """Map CSV rows to dense index tuples, optionally parsing an ISO date column.

    Every schema attribute must appear in the header; extra CSV columns are
    ignored, which makes projecting a wide file onto a narrow schema free.
    """
    indexes = [{v: i for i, v in enumerate(values)} for values in value_lists]
    rows: list[tuple[tuple[int, ...], date | None]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise IngestError(f"{path}: columns missing from CSV header: {missing}")
        if timestamp_column and timestamp_column not in header:
            raise IngestError(f"{path}: timestamp column {timestamp_column!r} not in header")
        for line_no, row in enumerate(reader, start=2):
            point = []
            for name, index in zip(schema.names, indexes):
                raw = row[name]
                if raw not in index:
                    raise IngestError(
                        f"{path} row {line_no}: value {raw!r} in column {name!r} "
                        "is not in the schema"
                    )
                point.append(index[raw])
            stamp: date | None = None
            if timestamp_column:
                raw = row[timestamp_column]
                try:
                    stamp = date.fromisoformat(raw)
                except ValueError as exc:
                    raise IngestError(
                        f"{path} row {line_no}: cannot parse date {raw!r} "
                        f"in column {timestamp_column!r}"
                    ) from exc
            rows.append((tuple(point), stamp))
    return rows


def build_stream(
    rows: list[tuple[tuple[int, ...], date | None]],
    spec: StreamSpec,
    schema: DomainSchema,
) -> DatasetStream:
    """Slice ingested rows into differentials according to the stream spec."""
    if spec.variant == "timestamp_bucketed":
        if any(stamp is None for _, stamp in rows):
            raise ValueError("timestamp_bucketed stream needs a timestamp on every row")
        start = min(stamp for _, stamp in rows)
        width = int(spec.bucket_days)  # type: ignore[arg-type]
        buckets: dict[int, list[tuple[int, ...]]] = {}
        last = 0
        for point, stamp in rows:
            b = (stamp - start).days // width  # type: ignore[operator]
            buckets.setdefault(b, []).append(point)
            last = max(last, b)
        slices: Iterable[list[tuple[int, ...]]] = (buckets.get(b, []) for b in range(last + 1))
    else:
        ordered = [point for point, _ in rows]
        if spec.variant == "randomized_batch":
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(spec.seed))))
            order = rng.permutation(len(ordered))
            ordered = [ordered[i] for i in order]
        batch = int(spec.batch_size)  # type: ignore[arg-type]
        slices = (ordered[i : i + batch] for i in range(0, len(ordered), batch))
    differentials = [WeightedDataset.from_rows(schema, chunk) for chunk in slices]
    if spec.max_steps is not None:
        differentials = differentials[: spec.max_steps]
    return DatasetStream(schema, tuple(differentials))


@dataclass
class ExperimentConfig:
    """One experiment grid: dataset x algorithms x epsilons x seeds."""

    dataset: str
    schema: str
    stream: StreamSpec
    output_dir: str
    k_way: int = 2
    algorithms: tuple[str, ...] = ("baseline", "main")
    epsilons: tuple[Fraction, ...] = (Fraction(1, 2), Fraction(1), Fraction(2), Fraction(4))
    k: int = 3
    counter: str = "simple"
    block_size: int | None = None
    selection_sensitivity: float | None = None
    fitter: dict[str, Any] = field(default_factory=lambda: {"name": "mw"})
    seeds: tuple[int, ...] = (0,)
    noise: str = "laplace"
    normalize: bool = True
    summary_window: int = 10

    def __post_init__(self) -> None:
        self.algorithms = tuple(self.algorithms)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.epsilons = tuple(
            e if isinstance(e, Fraction) else Fraction(str(e)) for e in self.epsilons
        )
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; expected subset of {ALGORITHMS}")
        for e in self.epsilons:
            if e <= 0:
                raise ValueError("epsilon values must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {
            "dataset", "schema", "stream", "output_dir", "k_way", "algorithms",
            "epsilons", "k", "counter", "block_size", "selection_sensitivity",
            "fitter", "seeds", "noise", "normalize", "summary_window",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        raw["stream"] = StreamSpec.from_dict(raw["stream"])
        if "epsilons" in raw:
            raw["epsilons"] = tuple(Fraction(str(e)) for e in raw["epsilons"])
        if "algorithms" in raw:
            raw["algorithms"] = tuple(raw["algorithms"])
        if "seeds" in raw:
            raw["seeds"] = tuple(raw["seeds"])
        return cls(**raw)

    def triples(self) -> list[tuple[str, Fraction, int]]:
        return [
            (alg, eps, seed)
            for alg in self.algorithms
            for eps in self.epsilons
            for seed in self.seeds
        ]

    def run_dir(self, out_root: Path, algorithm: str, epsilon: Fraction, seed: int) -> Path:
        dataset_name = Path(self.dataset).stem
        return out_root / dataset_name / algorithm / f"eps{float(epsilon)}" / f"seed{seed}"


def _eps_label(epsilon: Fraction) -> str:
    return repr(float(epsilon))


def run_triple(
    config: ExperimentConfig, algorithm: str, epsilon: Fraction, seed: int
) -> dict[str, Any]:
    """Run one (algorithm, epsilon, seed) cell of the grid and write its files."""
    started = time.monotonic()
    schema, value_lists = load_schema(config.schema)
    spec = config.stream
    rows = ingest_csv(
        config.dataset,
        schema,
        value_lists,
        timestamp_column=spec.timestamp_column if spec.variant == "timestamp_bucketed" else None,
    )
    stream = build_stream(rows, spec, schema)
    workloads = enumerate_workloads(schema, config.k_way)
    block_size = config.block_size
    if config.counter in ("block", "bounded_block") and block_size is None:
        block_size = max(1, math.isqrt(max(stream.num_steps - 1, 0)) + 1)  # ceil sqrt(T)
    fitter_params = dict(config.fitter)
    run_config = RunConfig(
        epsilon=epsilon,
        k=config.k,
        workloads=workloads,
        counter_kind=config.counter,
        block_size=block_size,
        selection_sensitivity=config.selection_sensitivity,
        fitter_name=fitter_params.pop("name", "mw"),
        seed_support_size=fitter_params.pop("seed_support_size", 10_000),
        passes=fitter_params.pop("passes", 1),
        seed=seed,
        noise_mode=config.noise,
    )
    if fitter_params:
        raise ValueError(f"unknown fitter parameters: {sorted(fitter_params)}")
    synthesizer = make_synthesizer(algorithm, run_config)

    run_dir = config.run_dir(Path(config.output_dir), algorithm, epsilon, seed)
    run_dir.mkdir(parents=True, exist_ok=True)

    rows_out: list[MetricRow] = []
    excluded_cells = 0
    true_data = WeightedDataset.empty(schema)
    eps_float = float(epsilon)
    for t, delta in enumerate(stream.differentials, start=1):
        synthetic = synthesizer.step(delta)
        true_data = accumulate(true_data, delta)
        if true_data.total_mass() == 0:
            metrics = (math.nan, math.nan, math.nan, math.nan)
            row = MetricRow(t, eps_float, algorithm, seed, *metrics)
        else:
            agg, skipped = evaluate_step(
                workloads, true_data, synthetic, normalize=config.normalize
            )
            excluded_cells += skipped
            row = MetricRow(t, eps_float, algorithm, seed, *agg)
        rows_out.append(row)

    metrics_path = run_dir / "metrics.csv"
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in rows_out:
            writer.writerow(
                [row.t, repr(row.avg_we), repr(row.max_we), repr(row.avg_relwe), repr(row.max_relwe)]
            )

    window = min(config.summary_window, len(rows_out)) if rows_out else 0
    summary: dict[str, Any] = {
        "algorithm": algorithm,
        "epsilon": _eps_label(epsilon),
        "seed": seed,
        "window": window,
        "steps": len(rows_out),
    }
    if window:
        summary.update(summarize_tail(rows_out, window))
    with open(run_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    ledger = synthesizer.ledger
    spent_groups = [g for g in ledger.groups() if ledger.group_total(g) > 0]
    step_totals = {str(ledger.group_total(g)) for g in spent_groups}
    selection_totals = {str(ledger.category_total(g, "selection")) for g in spent_groups}
    measure_totals = {
        str(ledger.category_total(g, "counter") + ledger.category_total(g, "measurement"))
        for g in spent_groups
    }
    meta = {
        "algorithm": algorithm,
        "epsilon": _eps_label(epsilon),
        "epsilon_exact": str(epsilon),
        "seed": seed,
        "noise": config.noise,
        "counter": config.counter,
        "block_size": block_size,
        "k": config.k,
        "k_way": config.k_way,
        "workloads": len(workloads),
        "selection_sensitivity": run_config.resolved_sensitivity(),
        "steps": stream.num_steps,
        "normalize": config.normalize,
        "ledger": {
            "total_epsilon": str(ledger.total_epsilon),
            "spent_steps": len(spent_groups),
            "per_step_totals": sorted(step_totals),
            "selection_per_step": sorted(selection_totals),
            "measurement_per_step": sorted(measure_totals),
        },
        "fit_clamp_events": synthesizer.fitter.stats.clamped_exponents,
        "relwe_excluded_cells": excluded_cells,
        "runtime_sec": round(time.monotonic() - started, 3),
    }
    with open(run_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"ok": True, "algorithm": algorithm, "epsilon": _eps_label(epsilon), "seed": seed,
            "dir": str(run_dir)}


def _run_triple_guarded(
    config: ExperimentConfig, algorithm: str, epsilon: Fraction, seed: int
) -> dict[str, Any]:
    try:
        return run_triple(config, algorithm, epsilon, seed)
    except Exception as exc:  # an aborted triple must not sink the others
        return {
            "ok": False,
            "algorithm": algorithm,
            "epsilon": _eps_label(epsilon),
            "seed": seed,
            "error": f"{type(exc).__name__}: {exc}",
        }


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[dict[str, Any]]:
    """Run the whole grid; each triple writes its own files and reports status."""
    triples = config.triples()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_triple_guarded, config, alg, eps, seed)
                for alg, eps, seed in triples
            ]
            return [f.result() for f in futures]
    return [_run_triple_guarded(config, alg, eps, seed) for alg, eps, seed in triples]


def validate_config(config: ExperimentConfig) -> list[str]:
    """Dry-run checks; returns a list of problems (empty means good to go)."""
    problems: list[str] = []
    try:
        schema, value_lists = load_schema(config.schema)
    except (OSError, ValueError) as exc:
        return [f"schema: {exc}"]
    if not Path(config.dataset).exists():
        problems.append(f"dataset file not found: {config.dataset}")
        return problems
    try:
        with open(config.dataset, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
    except OSError as exc:
        return [f"dataset: {exc}"]
    for name in schema.names:
        if name not in header:
            problems.append(f"dataset is missing schema column {name!r}")
    spec = config.stream
    if spec.variant == "timestamp_bucketed" and spec.timestamp_column not in header:
        problems.append(f"dataset is missing timestamp column {spec.timestamp_column!r}")
    max_k = schema.num_attributes
    if not 1 <= config.k_way <= max_k:
        problems.append(f"k_way {config.k_way} out of range [1, {max_k}]")
    else:
        n_workloads = len(enumerate_workloads(schema, config.k_way))
        if config.k > n_workloads:
            problems.append(f"k={config.k} exceeds the {n_workloads} available workloads")
    return problems
