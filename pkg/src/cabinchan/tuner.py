"""Exhaustive hyperparameter grid search over (layer1, layer2, epochs).

Each (layer1, layer2) pair is trained once for max(epoch_candidates) epochs
with its own derived seed; every epoch candidate is then scored from the
recorded loss history, which is identical to retraining per candidate because
training is deterministic.  Configurations whose training diverges are
recorded as failed with infinite score instead of aborting the sweep.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import math
import time

from . import lstm
from .errors import TrainingError, ValidationError
from .rng import derive_seed
from .types import ChannelDataset

DEFAULT_LAYER1_VALUES = (20, 40, 60, 80, 100)
DEFAULT_LAYER2_VALUES = (2, 3, 4, 5, 6, 7, 8, 9)
DEFAULT_EPOCH_CANDIDATES = (25, 50, 75, 100, 125)


def _validated_counts(values, name: str) -> tuple[int, ...]:
    counts = tuple(int(v) for v in values)
    if not counts:
        raise ValidationError(f"{name} must be non-empty")
    if any(v < 1 for v in counts):
        raise ValidationError(f"{name} values must be >= 1")
    if len(set(counts)) != len(counts):
        raise ValidationError(f"{name} contains duplicates")
    return tuple(sorted(counts))


@dataclass(frozen=True)
class TuneGrid:
    layer1_values: tuple[int, ...] = DEFAULT_LAYER1_VALUES
    layer2_values: tuple[int, ...] = DEFAULT_LAYER2_VALUES
    epoch_candidates: tuple[int, ...] = DEFAULT_EPOCH_CANDIDATES
    base_config: lstm.TrainConfig = lstm.TrainConfig()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "layer1_values", _validated_counts(self.layer1_values, "layer1_values")
        )
        object.__setattr__(
            self, "layer2_values", _validated_counts(self.layer2_values, "layer2_values")
        )
        object.__setattr__(
            self,
            "epoch_candidates",
            _validated_counts(self.epoch_candidates, "epoch_candidates"),
        )


@dataclass(frozen=True)
class TuneRecord:
    layer1: int
    layer2: int
    epochs: int
    loss_train: float
    loss_test: float
    score: float
    status: str  # "ok" or "failed"


@dataclass(frozen=True)
class TuneResult:
    records: tuple[TuneRecord, ...]
    selected: TuneRecord
    wall_time_s: float


def combined_score(loss_train: float, loss_test: float) -> float:
    """Default selection score: joint train+test loss."""
    return loss_train + loss_test


def _train_one(dataset: ChannelDataset, layer1: int, layer2: int,
               grid: TuneGrid, train_fn) -> list[TuneRecord]:
    config = replace(
        grid.base_config,
        epochs=max(grid.epoch_candidates),
        rng_seed=derive_seed(grid.base_config.rng_seed, layer1, layer2),
    )
    try:
        _, report = train_fn(dataset, (layer1, layer2), config)
        loss_train, loss_test = report.loss_train, report.loss_test
        failed = False
    except TrainingError:
        failed = True
    records = []
    for epochs in grid.epoch_candidates:
        if failed:
            records.append(
                TuneRecord(layer1, layer2, epochs, math.inf, math.inf, math.inf, "failed")
            )
        else:
            lt = float(loss_train[epochs - 1])
            lv = float(loss_test[epochs - 1])
            records.append(
                TuneRecord(layer1, layer2, epochs, lt, lv, combined_score(lt, lv), "ok")
            )
    return records


def tune(
    dataset: ChannelDataset,
    grid: TuneGrid | None = None,
    train_fn=lstm.train,
    jobs: int = 1,
) -> TuneResult:
    """Grid search; returns the full record table and the selected argmin.

    Ties are broken by smaller loss_test, then smaller layer1, layer2, and
    epochs.  `train_fn(dataset, arch, config)` is pluggable for testing and
    must be picklable when jobs > 1.
    """
    if grid is None:
        grid = TuneGrid()
    started = time.perf_counter()
    pairs = [(l1, l2) for l1 in grid.layer1_values for l2 in grid.layer2_values]
    by_pair: dict[tuple[int, int], list[TuneRecord]] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pair: pool.submit(_train_one, dataset, pair[0], pair[1], grid, train_fn)
                for pair in pairs
            }
            for pair, future in futures.items():
                by_pair[pair] = future.result()
    else:
        for l1, l2 in pairs:
            by_pair[(l1, l2)] = _train_one(dataset, l1, l2, grid, train_fn)
    records = tuple(rec for pair in pairs for rec in by_pair[pair])
    viable = [r for r in records if math.isfinite(r.score)]
    if not viable:
        raise TrainingError("every configuration in the sweep failed")
    selected = min(
        viable, key=lambda r: (r.score, r.loss_test, r.layer1, r.layer2, r.epochs)
    )
    return TuneResult(
        records=records, selected=selected, wall_time_s=time.perf_counter() - started
    )
