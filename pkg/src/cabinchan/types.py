"""Domain types shared across the pipeline.

Everything here is an immutable value object: arrays are copied in, cast to
64-bit floats or complex128, and marked read-only, and every invariant is
checked at construction time so invalid values never circulate.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError

SPEED_OF_LIGHT_M_S = 299_792_458.0

# Measurement campaign layout used as defaults throughout: 55-65 GHz swept in
# 10 MHz steps, 13 training distances and 2 held-out distances inside a bus.
DEFAULT_F_START_HZ = 55e9
DEFAULT_F_STOP_HZ = 65e9
DEFAULT_F_STEP_HZ = 10e6
DEFAULT_TRAIN_DISTANCES_M = (
    1.18, 1.47, 1.66, 2.24, 2.35, 3.66, 5.12,
    5.16, 6.66, 6.76, 8.18, 9.36, 9.72,
)
DEFAULT_TEST_DISTANCES_M = (3.7, 9.75)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_float_vector(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64).copy()
    if a.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {a.shape}")
    return _readonly(a)


def _as_complex_vector(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.complex128).copy()
    if a.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {a.shape}")
    return _readonly(a)


@dataclass(frozen=True)
class FrequencyGrid:
    """A uniform frequency sweep [f_start_hz, f_stop_hz] with step f_step_hz."""

    f_start_hz: float
    f_stop_hz: float
    f_step_hz: float

    def __post_init__(self) -> None:
        if not (self.f_stop_hz > self.f_start_hz):
            raise ValidationError(
                f"f_stop_hz ({self.f_stop_hz}) must exceed f_start_hz ({self.f_start_hz})"
            )
        if not (self.f_step_hz > 0):
            raise ValidationError(f"f_step_hz must be positive, got {self.f_step_hz}")
        span = self.f_stop_hz - self.f_start_hz
        steps = span / self.f_step_hz
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValidationError(
                f"span {span} Hz is not an integer multiple of step {self.f_step_hz} Hz"
            )

    @property
    def n_points(self) -> int:
        return int(round((self.f_stop_hz - self.f_start_hz) / self.f_step_hz)) + 1

    @property
    def frequencies_hz(self) -> np.ndarray:
        return _readonly(
            self.f_start_hz + self.f_step_hz * np.arange(self.n_points, dtype=np.float64)
        )

    def delay_window_s(self) -> float:
        """Unambiguous delay span 1/f_step of a sweep with this resolution."""
        return 1.0 / self.f_step_hz


def default_grid() -> FrequencyGrid:
    return FrequencyGrid(DEFAULT_F_START_HZ, DEFAULT_F_STOP_HZ, DEFAULT_F_STEP_HZ)


@dataclass(frozen=True)
class CtfRecord:
    """Channel transfer function at one TX-RX distance over a frequency grid.

    The primary representation is magnitude gain in dB; the complex response
    is optional (synthetic data carries it, predictions do not).
    """

    distance_m: float
    grid: FrequencyGrid
    gain_db: np.ndarray
    complex_gain: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (self.distance_m > 0):
            raise ValidationError(f"distance_m must be positive, got {self.distance_m}")
        gain = _as_float_vector(self.gain_db, "gain_db")
        object.__setattr__(self, "gain_db", gain)
        n = self.grid.n_points
        if gain.shape[0] != n:
            raise ValidationError(
                f"gain_db has {gain.shape[0]} samples but the grid has {n} points"
            )
        if not np.all(np.isfinite(gain)):
            raise ValidationError("gain_db contains non-finite values")
        if self.complex_gain is not None:
            cg = _as_complex_vector(self.complex_gain, "complex_gain")
            object.__setattr__(self, "complex_gain", cg)
            if cg.shape[0] != n:
                raise ValidationError(
                    f"complex_gain has {cg.shape[0]} samples but the grid has {n} points"
                )
            mags = np.abs(cg)
            if np.any(mags <= 0):
                raise ValidationError("complex_gain contains zero-magnitude samples")
            mismatch = np.max(np.abs(20.0 * np.log10(mags) - gain))
            if mismatch > 1e-6:
                raise ValidationError(
                    f"complex_gain magnitude disagrees with gain_db by {mismatch:.3g} dB"
                )


@dataclass(frozen=True)
class Cir:
    """Complex impulse-response taps on a uniform delay grid."""

    delay_step_s: float
    taps: np.ndarray

    def __post_init__(self) -> None:
        if not (self.delay_step_s > 0):
            raise ValidationError(f"delay_step_s must be positive, got {self.delay_step_s}")
        taps = _as_complex_vector(self.taps, "taps")
        if taps.shape[0] == 0:
            raise ValidationError("taps must be non-empty")
        if not np.all(np.isfinite(taps)):
            raise ValidationError("taps contain non-finite values")
        object.__setattr__(self, "taps", taps)

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]

    @property
    def delays_s(self) -> np.ndarray:
        return _readonly(self.delay_step_s * np.arange(self.n_taps, dtype=np.float64))


@dataclass(frozen=True)
class Pdp:
    """Power delay profile in dB on the same delay grid as its source Cir."""

    delay_step_s: float
    power_db: np.ndarray
    noise_floor_db: float

    def __post_init__(self) -> None:
        if not (self.delay_step_s > 0):
            raise ValidationError(f"delay_step_s must be positive, got {self.delay_step_s}")
        power = _as_float_vector(self.power_db, "power_db")
        if power.shape[0] == 0:
            raise ValidationError("power_db must be non-empty")
        if not np.all(np.isfinite(power)):
            raise ValidationError("power_db contains non-finite values")
        object.__setattr__(self, "power_db", power)
        if not math.isfinite(self.noise_floor_db):
            raise ValidationError("noise_floor_db must be finite")

    @property
    def n_bins(self) -> int:
        return self.power_db.shape[0]

    @property
    def delays_s(self) -> np.ndarray:
        return _readonly(self.delay_step_s * np.arange(self.n_bins, dtype=np.float64))

    @property
    def dynamic_range_db(self) -> float:
        return float(np.max(self.power_db) - self.noise_floor_db)


@dataclass(frozen=True)
class TdlModel:
    """Sparse tapped-delay-line summary of a Pdp.

    Taps are (delay_s, power_db) pairs with strictly increasing delays; every
    retained tap lies within threshold_db of the strongest one.
    """

    taps: tuple[tuple[float, float], ...]
    threshold_db: float

    def __post_init__(self) -> None:
        taps = tuple((float(d), float(p)) for d, p in self.taps)
        object.__setattr__(self, "taps", taps)
        if not (self.threshold_db > 0):
            raise ValidationError(f"threshold_db must be positive, got {self.threshold_db}")
        if not taps:
            raise ValidationError("a TdlModel needs at least one tap")
        delays = [d for d, _ in taps]
        powers = [p for _, p in taps]
        if any(not (math.isfinite(d) and d >= 0) for d in delays):
            raise ValidationError("tap delays must be finite and non-negative")
        if any(not math.isfinite(p) for p in powers):
            raise ValidationError("tap powers must be finite")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValidationError("tap delays must be strictly increasing")
        peak = max(powers)
        weakest = min(powers)
        if weakest < peak - self.threshold_db - 1e-9:
            raise ValidationError(
                f"tap at {weakest:.2f} dB lies below the {self.threshold_db} dB "
                f"threshold under the {peak:.2f} dB peak"
            )

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    @property
    def delays_s(self) -> np.ndarray:
        return _readonly(np.array([d for d, _ in self.taps], dtype=np.float64))

    @property
    def powers_db(self) -> np.ndarray:
        return _readonly(np.array([p for _, p in self.taps], dtype=np.float64))

    @property
    def peak_power_db(self) -> float:
        return max(p for _, p in self.taps)


@dataclass(frozen=True)
class ChannelDataset:
    """All CTF records of one campaign plus the train/test distance split."""

    records: tuple[CtfRecord, ...]
    train_distances_m: tuple[float, ...]
    test_distances_m: tuple[float, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        train = tuple(float(d) for d in self.train_distances_m)
        test = tuple(float(d) for d in self.test_distances_m)
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "train_distances_m", train)
        object.__setattr__(self, "test_distances_m", test)
        if not train or not test:
            raise ValidationError("both train and test distance lists must be non-empty")
        if set(train) & set(test):
            raise ValidationError("train and test distance sets overlap")
        by_distance: dict[float, int] = {}
        for rec in records:
            by_distance[rec.distance_m] = by_distance.get(rec.distance_m, 0) + 1
        for d in train + test:
            if by_distance.get(d, 0) != 1:
                raise ValidationError(
                    f"distance {d} m must have exactly one record, "
                    f"found {by_distance.get(d, 0)}"
                )

    def record_for(self, distance_m: float) -> CtfRecord:
        for rec in self.records:
            if rec.distance_m == distance_m:
                return rec
        raise ValidationError(f"no record at distance {distance_m} m")

    @property
    def train_records(self) -> tuple[CtfRecord, ...]:
        return tuple(self.record_for(d) for d in sorted(self.train_distances_m))

    @property
    def test_records(self) -> tuple[CtfRecord, ...]:
        return tuple(self.record_for(d) for d in sorted(self.test_distances_m))

    @property
    def grid(self) -> FrequencyGrid:
        return self.records[0].grid
