"""Differentially private synthetic data for evolving tabular datasets."""

from .algorithms import CounterSynthesizer, RunConfig, StreamingMwem, make_synthesizer
from .counters import (
    BinaryTreeCounter,
    BlockCounter,
    Counter,
    MultiDimCounter,
    SimpleCounter,
    UnboundedBlockCounter,
    counter_feed,
    counter_peek,
    make_counter,
    multidim_feed,
    unbounded_block_feed,
)
from .domain import (
    DatasetStream,
    DomainSchema,
    WeightedDataset,
    accumulate,
    dataset_mean,
    stream_difference_norm,
    stream_norm,
    total_mass,
)
from .evaluation import (
    MetricRow,
    aggregate,
    evaluate_step,
    relative_workload_error,
    summarize_tail,
    workload_error,
)
from .fitters import (
    Measurement,
    MultiplicativeWeightsFitter,
    WorkingSupport,
    make_fitter,
    mw_fit,
    mw_update,
)
from .harness import (
    ExperimentConfig,
    StreamSpec,
    build_stream,
    ingest_csv,
    load_schema,
    run_experiment,
)
from .mechanisms import (
    BudgetLedger,
    BudgetOverspendError,
    NoiseSource,
    exponential_mechanism,
    laplace,
    ledger_spend,
)
from .queries import (
    MarginalQuery,
    Workload,
    WorkloadSet,
    enumerate_workloads,
    eval_query,
    eval_workload,
)

__all__ = [name for name in dir() if not name.startswith("_")]
