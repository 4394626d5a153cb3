"""Differentially private continual-observation counters.

Every counter estimates the running sum of a real-valued stream and releases
one value per fed item. Between feeds, `peek` repeats the last release without
touching the noise stream. For a fixed failure probability the error grows
roughly like sqrt(t) for the simple counter, like a low power of t for the
block counters, and polylogarithmically for the binary tree counter.
"""

from __future__ import annotations

import numpy as np

from .mechanisms import NoiseSource

KINDS = ("simple", "bounded_block", "binary_tree", "unbounded_block")


class Counter:
    """Base continual counter: feed values one per time step, peek for free."""

    kind = "base"

    def __init__(self, epsilon: float, source: NoiseSource):
        if epsilon <= 0:
            raise ValueError("counter epsilon must be positive")
        self.epsilon = float(epsilon)
        self.source = source
        self.t = 0
        self._last = 0.0

    def feed(self, value: float) -> float:
        self.t += 1
        self._last = self._release(float(value))
        return self._last

    def peek(self) -> float:
        """Last released value (0 before the first feed); no state change, no spend."""
        return self._last

    def _release(self, value: float) -> float:
        raise NotImplementedError


class SimpleCounter(Counter):
    """Running sum of per-item noisy increments.

    Each item is masked by exactly one Laplace(1/eps) draw, so the counter is
    eps-DP without any composition argument; the accumulated error at time t
    has standard deviation sqrt(2 t)/eps.
    """

    kind = "simple"

    def __init__(self, epsilon: float, source: NoiseSource):
        super().__init__(epsilon, source)
        self._total = 0.0

    def _release(self, value: float) -> float:
        self._total += value + self.source.laplace(1.0 / self.epsilon)
        return self._total


class BlockCounter(Counter):
    """Two-level counter with a fixed block size (horizon known in advance).

    Within a block, items accumulate as noisy increments; when a block closes,
    its true sum is re-measured with one fresh draw and folded into the running
    block total, discarding the in-block noise. Every item meets at most two
    Laplace(2/eps) draws: its own increment and its block's closing fold.
    """

    kind = "bounded_block"

    def __init__(self, epsilon: float, source: NoiseSource, block_size: int):
        super().__init__(epsilon, source)
        if block_size < 1:
            raise ValueError("block size must be >= 1")
        self.block_size = int(block_size)
        self._last_block = 0.0
        self._true_in_block = 0.0
        self._synth_in_block = 0.0

    def _release(self, value: float) -> float:
        scale = 2.0 / self.epsilon
        self._true_in_block += value
        if self.t % self.block_size == 0:
            self._last_block += self._true_in_block + self.source.laplace(scale)
            self._true_in_block = 0.0
            self._synth_in_block = 0.0
            return self._last_block
        self._synth_in_block += value + self.source.laplace(scale)
        return self._last_block + self._synth_in_block


class UnboundedBlockCounter(Counter):
    """Block counter without a horizon: time is cut into partitions of sizes
    4, 9, 16, ..., and partition number b uses block size b + 1 (the optimal
    block size sqrt(T) for a horizon-T block counter).

    Instrumentation flags record whether the last fed step closed a block and
    whether it rolled the partition over, so tests can check the schedule.
    """

    kind = "unbounded_block"

    def __init__(self, epsilon: float, source: NoiseSource):
        super().__init__(epsilon, source)
        self.partition_size = 4
        self.block_size = 2
        self.t_at_partition = 0
        self._last_block = 0.0
        self._true_in_block = 0.0
        self._synth_in_block = 0.0
        self.last_was_boundary = False
        self.last_was_rollover = False

    def _release(self, value: float) -> float:
        scale = 2.0 / self.epsilon
        delta = self.t - self.t_at_partition
        self._true_in_block += value
        self.last_was_boundary = False
        self.last_was_rollover = False
        if delta % self.block_size == 0:
            self.last_was_boundary = True
            self._last_block += self._true_in_block + self.source.laplace(scale)
            self._true_in_block = 0.0
            self._synth_in_block = 0.0
            out = self._last_block
            if delta == self.partition_size:
                self.last_was_rollover = True
                self.t_at_partition = self.t
                self.block_size += 1
                self.partition_size = self.block_size ** 2
            return out
        self._synth_in_block += value + self.source.laplace(scale)
        return self._last_block + self._synth_in_block


class BinaryTreeCounter(Counter):
    """Dyadic-interval tree counter made unbounded by doubling epochs.

    Epoch j covers times [2^j, 2^(j+1)) and runs a binary mechanism over
    2^j leaves with j + 1 levels; each node gets one Laplace(levels/eps)
    draw when it completes, so any item is masked by at most
    ceil(log2(t + 1)) + 1 draws whose budgets sum to eps. The released value
    at an epoch boundary is frozen as the base of the next epoch.
    """

    kind = "binary_tree"

    def __init__(self, epsilon: float, source: NoiseSource):
        super().__init__(epsilon, source)
        self._epoch = 0
        self._epoch_len = 1
        self._i = 0  # position within the epoch, 1-based after increment
        self._base = 0.0
        self._alpha = [0.0]
        self._alpha_hat = [0.0]

    @property
    def levels(self) -> int:
        return self._epoch + 1

    def _release(self, value: float) -> float:
        if self._i == self._epoch_len:
            self._base = self._last
            self._epoch += 1
            self._epoch_len *= 2
            self._i = 0
            self._alpha = [0.0] * self.levels
            self._alpha_hat = [0.0] * self.levels
        self._i += 1
        i = self._i
        low = (i & -i).bit_length() - 1  # level of the node completed at this step
        merged = value
        for level in range(low):
            merged += self._alpha[level]
            self._alpha[level] = 0.0
            self._alpha_hat[level] = 0.0
        self._alpha[low] = merged
        self._alpha_hat[low] = merged + self.source.laplace(self.levels / self.epsilon)
        out = self._base
        bits = i
        level = 0
        while bits:
            if bits & 1:
                out += self._alpha_hat[level]
            bits >>= 1
            level += 1
        return out


def make_counter(
    kind: str,
    epsilon: float,
    source: NoiseSource,
    block_size: int | None = None,
) -> Counter:
    if kind == "simple":
        return SimpleCounter(epsilon, source)
    if kind in ("bounded_block", "block"):
        if block_size is None:
            raise ValueError("bounded block counter needs a block_size")
        return BlockCounter(epsilon, source, block_size)
    if kind == "binary_tree":
        return BinaryTreeCounter(epsilon, source)
    if kind == "unbounded_block":
        return UnboundedBlockCounter(epsilon, source)
    raise ValueError(f"unknown counter kind {kind!r}; expected one of {KINDS}")


class MultiDimCounter:
    """A vector of identical-kind counters, one per workload cell.

    The cells of a workload are disjoint, so a single record feeds exactly one
    cell; all cells share the same epsilon by parallel composition and draw
    from independently seeded noise streams.
    """

    def __init__(
        self,
        kind: str,
        num_cells: int,
        epsilon: float,
        source: NoiseSource,
        block_size: int | None = None,
    ):
        if num_cells < 1:
            raise ValueError("multi-dimensional counter needs at least one cell")
        self.kind = kind
        self.epsilon = float(epsilon)
        self.cells = [
            make_counter(kind, epsilon, source.child(c), block_size) for c in range(num_cells)
        ]

    def __len__(self) -> int:
        return len(self.cells)

    def feed(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(self.cells),):
            raise ValueError(f"expected {len(self.cells)} cell values, got shape {values.shape}")
        return np.array([c.feed(v) for c, v in zip(self.cells, values)])

    def peek(self) -> np.ndarray:
        return np.array([c.peek() for c in self.cells])


def counter_feed(counter: Counter, value: float) -> float:
    """Feed one stream value and return the current noisy prefix-sum estimate."""
    return counter.feed(value)


def counter_peek(counter: Counter) -> float:
    """Repeat the last released value without consuming noise."""
    return counter.peek()


def unbounded_block_feed(counter: Counter, value: float) -> float:
    """Feed restricted to the unbounded block counter; rejects other kinds."""
    if counter.kind != "unbounded_block":
        raise ValueError(f"expected an unbounded_block counter, got kind {counter.kind!r}")
    return counter.feed(value)


def multidim_feed(counter: MultiDimCounter, cell_values: np.ndarray) -> np.ndarray:
    """Feed one value per cell; returns the vector of released estimates."""
    return counter.feed(cell_values)
