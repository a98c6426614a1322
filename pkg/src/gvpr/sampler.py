"""Mining-free batch composition over graded similarity labels.

Labels are bucketed into four similarity bands, and each batch strategy
fills its batch with exact per-band quotas:

  A: 1/2 from [0.5, 1], 1/4 from (0, 0.5), 1/4 from {0}
  B: 1/4 each from [0.75, 1], [0.5, 0.75), (0, 0.5), {0}
  C: 1/3 each from [0.5, 1], (0, 0.5), {0}
  D: 1/2 from [0.5, 1], 1/2 from [0, 0.5)

Sampling is uniform with replacement inside each band group, so small
bands never run dry; quotas hold exactly for every batch, not merely in
expectation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np


class Band(Enum):
    HIGH = "[0.75, 1]"
    MID = "[0.5, 0.75)"
    LOW = "(0, 0.5)"
    ZERO = "{0}"


def band_of(psi: float) -> Band:
    if not 0.0 <= psi <= 1.0:
        raise ValueError(f"psi must be in [0, 1], got {psi}")
    if psi >= 0.75:
        return Band.HIGH
    if psi >= 0.5:
        return Band.MID
    if psi > 0.0:
        return Band.LOW
    return Band.ZERO


class BatchStrategy(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


# per strategy: ordered (band group, batch fraction); groups pool their bands
_QUOTAS = {
    BatchStrategy.A: (
        ((Band.HIGH, Band.MID), Fraction(1, 2)),
        ((Band.LOW,), Fraction(1, 4)),
        ((Band.ZERO,), Fraction(1, 4)),
    ),
    BatchStrategy.B: (
        ((Band.HIGH,), Fraction(1, 4)),
        ((Band.MID,), Fraction(1, 4)),
        ((Band.LOW,), Fraction(1, 4)),
        ((Band.ZERO,), Fraction(1, 4)),
    ),
    BatchStrategy.C: (
        ((Band.HIGH, Band.MID), Fraction(1, 3)),
        ((Band.LOW,), Fraction(1, 3)),
        ((Band.ZERO,), Fraction(1, 3)),
    ),
    BatchStrategy.D: (
        ((Band.HIGH, Band.MID), Fraction(1, 2)),
        ((Band.LOW, Band.ZERO), Fraction(1, 2)),
    ),
}

_GROUP_DESC = {
    (Band.HIGH, Band.MID): "[0.5, 1]",
    (Band.LOW, Band.ZERO): "[0, 0.5)",
}


def _group_desc(group) -> str:
    return _GROUP_DESC.get(group, group[0].value)


def strategy_denominator(strategy: BatchStrategy) -> int:
    """Smallest batch size divisor that makes every quota an exact count."""
    denoms = [frac.denominator for _, frac in _QUOTAS[strategy]]
    return int(np.lcm.reduce(denoms))


@dataclass(frozen=True)
class PairIndex:
    """Labels bucketed by similarity band; every label sits in exactly one."""

    buckets: dict = field(repr=False)

    def band_sizes(self) -> dict:
        return {band: len(self.buckets[band]) for band in Band}


@dataclass(frozen=True)
class Batch:
    """Ordered labeled pairs composing one training batch."""

    pairs: tuple

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("batch must be nonempty")
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def band_counts(self) -> dict:
        counts = {band: 0 for band in Band}
        for lab in self.pairs:
            counts[band_of(lab.psi)] += 1
        return counts


def index_labels(labels) -> PairIndex:
    """Bucket labels by band, preserving input order within each bucket."""
    labels = list(labels)
    if not labels:
        raise ValueError("cannot index an empty label list")
    buckets = {band: [] for band in Band}
    for lab in labels:
        buckets[band_of(lab.psi)].append(lab)
    return PairIndex({band: tuple(labs) for band, labs in buckets.items()})


def _quota_counts(strategy: BatchStrategy, batch_size: int) -> list:
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    denom = strategy_denominator(strategy)
    if batch_size % denom != 0:
        raise ValueError(
            f"strategy {strategy.value} needs batch_size divisible by {denom}, got {batch_size}"
        )
    return [(group, int(frac * batch_size)) for group, frac in _QUOTAS[strategy]]


def compose_batch(idx: PairIndex, strategy: BatchStrategy, batch_size: int, rng) -> Batch:
    """Draw one batch meeting the strategy's band quotas exactly.

    ``rng`` is a numpy Generator or an integer seed (deterministic either
    way). An empty required band group is an error naming the group.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    pairs = []
    for group, count in _quota_counts(strategy, batch_size):
        pool = [lab for band in group for lab in idx.buckets[band]]
        if not pool:
            raise ValueError(
                f"strategy {strategy.value} needs pairs with psi in {_group_desc(group)}; none indexed"
            )
        picks = rng.integers(0, len(pool), size=count)
        pairs.extend(pool[i] for i in picks)
    return Batch(tuple(pairs))


class BatchSampler:
    """Stateful batch stream: one RNG stream per instance, fixed strategy.

    Instances are independent; a single instance is meant for use from one
    thread at a time.
    """

    def __init__(self, idx: PairIndex, strategy: BatchStrategy, batch_size: int, seed: int = 42):
        self.idx = idx
        self.strategy = strategy
        self.batch_size = batch_size
        self._rng = np.random.default_rng(seed)
        # pools rebuilt once, not per batch; also surfaces config errors eagerly
        self._groups = []
        for group, count in _quota_counts(strategy, batch_size):
            pool = [lab for band in group for lab in idx.buckets[band]]
            if not pool:
                raise ValueError(
                    f"strategy {strategy.value} needs pairs with psi in {_group_desc(group)}; none indexed"
                )
            self._groups.append((pool, count))

    def next_batch(self) -> Batch:
        pairs = []
        for pool, count in self._groups:
            picks = self._rng.integers(0, len(pool), size=count)
            pairs.extend(pool[i] for i in picks)
        return Batch(tuple(pairs))

    def batches(self, n: int):
        for _ in range(n):
            yield self.next_batch()
