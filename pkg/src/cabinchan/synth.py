"""Synthetic intra-vehicle mmWave channel generator.

Produces complex CTFs from a clustered multipath model: a line-of-sight ray
whose power follows a log-distance pathloss law and a distance-dependent
Rician K factor, plus clusters of diffuse rays with Poisson arrival times and
double-exponential power decay (Saleh-Valenzuela structure), plus additive
complex Gaussian measurement noise per frequency sample.

Determinism: every record is generated from its own xoshiro256** stream whose
seed mixes the base seed with the bit pattern of the distance, so a record
depends only on (distance, grid, params), never on request order.

Draw order within a record's stream (fixed, part of the format):
  1. cluster inter-arrival times (exponential), until the window is exceeded;
  2. per cluster, in arrival order: ray inter-arrivals, then one pair of
     normals per ray (including the ray at the cluster arrival itself);
  3. one pair of normals per frequency sample for measurement noise.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigurationError, ValidationError
from .rng import Xoshiro256StarStar, derive_seed, float_token
from .types import (
    ChannelDataset,
    CtfRecord,
    FrequencyGrid,
    SPEED_OF_LIGHT_M_S,
)


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic channel; defaults give a dense in-cabin channel
    with an LOS peak and roughly 30-40 dB of usable dynamic range."""

    pathloss_exponent: float = 1.8
    ref_loss_db_at_1m: float = 68.0
    rician_k_db_at_1m: float = 8.0
    k_decay_db_per_m: float = 0.5
    cluster_rate_per_ns: float = 0.05
    ray_rate_per_ns: float = 0.4
    cluster_decay_ns: float = 12.0
    ray_decay_ns: float = 4.0
    max_excess_delay_ns: float = 80.0
    noise_floor_db: float = -45.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (self.pathloss_exponent > 0):
            raise ValidationError("pathloss_exponent must be positive")
        if not math.isfinite(self.ref_loss_db_at_1m):
            raise ValidationError("ref_loss_db_at_1m must be finite")
        if not math.isfinite(self.rician_k_db_at_1m):
            raise ValidationError("rician_k_db_at_1m must be finite")
        if self.k_decay_db_per_m < 0 or not math.isfinite(self.k_decay_db_per_m):
            raise ValidationError("k_decay_db_per_m must be finite and >= 0")
        # Zero rates are the documented pure-LOS limiting case.
        if self.cluster_rate_per_ns < 0 or self.ray_rate_per_ns < 0:
            raise ValidationError("arrival rates must be >= 0")
        if not (self.cluster_decay_ns > 0 and self.ray_decay_ns > 0):
            raise ValidationError("decay constants must be positive")
        if not (self.max_excess_delay_ns > 0):
            raise ValidationError("max_excess_delay_ns must be positive")
        if math.isnan(self.noise_floor_db) or self.noise_floor_db >= 0:
            raise ValidationError(
                "noise_floor_db must be negative (-inf disables noise)"
            )
        if not (0 <= self.rng_seed < 2**64):
            raise ValidationError("rng_seed must fit in 64 unsigned bits")


def _poisson_arrivals(rng: Xoshiro256StarStar, rate_per_ns: float, window_ns: float,
                      start_ns: float = 0.0) -> list[float]:
    """Arrival times after `start_ns` (exclusive) up to `window_ns`."""
    arrivals: list[float] = []
    if rate_per_ns <= 0.0:
        return arrivals
    t = start_ns
    mean = 1.0 / rate_per_ns
    while True:
        t += rng.exponential(mean)
        if t > window_ns:
            return arrivals
        arrivals.append(t)


def generate_ctf(distance_m: float, grid: FrequencyGrid, params: SynthParams) -> CtfRecord:
    """One channel transfer function, fully determined by its arguments."""
    if not (distance_m > 0):
        raise ValidationError(f"distance_m must be positive, got {distance_m}")
    window_ns = params.max_excess_delay_ns
    if window_ns * 1e-9 >= grid.delay_window_s():
        raise ConfigurationError(
            f"max excess delay {window_ns} ns does not fit the unambiguous "
            f"delay span {grid.delay_window_s() * 1e9:.3f} ns of this grid"
        )
    rng = Xoshiro256StarStar(derive_seed(params.rng_seed, float_token(distance_m)))

    pathloss_db = params.ref_loss_db_at_1m + 10.0 * params.pathloss_exponent * math.log10(
        distance_m
    )
    total_gain = 10.0 ** (-pathloss_db / 10.0)
    k_db = params.rician_k_db_at_1m - params.k_decay_db_per_m * (distance_m - 1.0)
    k_lin = 10.0 ** (k_db / 10.0)
    los_power = total_gain * k_lin / (1.0 + k_lin)
    diffuse_power = total_gain / (1.0 + k_lin)

    los_delay_s = distance_m / SPEED_OF_LIGHT_M_S

    # Diffuse rays: cluster arrivals, then rays inside each cluster.  All
    # delays below are excess (relative to the LOS arrival), in ns.
    cluster_times = _poisson_arrivals(rng, params.cluster_rate_per_ns, window_ns)
    excess_ns: list[float] = []
    mean_weights: list[float] = []
    gauss_pairs: list[complex] = []
    for t_cluster in cluster_times:
        ray_times = [t_cluster] + _poisson_arrivals(
            rng, params.ray_rate_per_ns, window_ns, start_ns=t_cluster
        )
        for t_ray in ray_times:
            excess_ns.append(t_ray)
            mean_weights.append(
                math.exp(-t_cluster / params.cluster_decay_ns)
                * math.exp(-(t_ray - t_cluster) / params.ray_decay_ns)
            )
            gauss_pairs.append(complex(rng.normal(), rng.normal()))

    delays_s = [los_delay_s]
    if mean_weights:
        amplitudes = [complex(math.sqrt(los_power), 0.0)]
        # Scale mean ray powers so the expected diffuse total matches the
        # Rician budget exactly.
        scale = diffuse_power / sum(mean_weights)
        for t_ns, weight, g in zip(excess_ns, mean_weights, gauss_pairs):
            delays_s.append(los_delay_s + t_ns * 1e-9)
            amplitudes.append(g * math.sqrt(scale * weight / 2.0))
    else:
        # No diffuse ray drawn: the direct path carries the whole pathloss
        # budget, so the pure-LOS limit lands exactly on the pathloss law.
        amplitudes = [complex(math.sqrt(total_gain), 0.0)]

    freqs = grid.frequencies_hz
    tau = np.array(delays_s, dtype=np.float64)
    amp = np.array(amplitudes, dtype=np.complex128)
    h = (amp[:, None] * np.exp(-2j * np.pi * tau[:, None] * freqs[None, :])).sum(axis=0)

    if params.noise_floor_db > -math.inf:
        # Noise floor is referenced to the LOS component power at 1 m.
        k_ref = 10.0 ** (params.rician_k_db_at_1m / 10.0)
        los_db_at_1m = -params.ref_loss_db_at_1m + 10.0 * math.log10(
            k_ref / (1.0 + k_ref)
        )
        noise_power = 10.0 ** ((los_db_at_1m + params.noise_floor_db) / 10.0)
        sigma = math.sqrt(noise_power / 2.0)
        noise = np.array(
            [complex(rng.normal(), rng.normal()) for _ in range(grid.n_points)],
            dtype=np.complex128,
        )
        h = h + sigma * noise

    gain_db = 20.0 * np.log10(np.abs(h))
    return CtfRecord(
        distance_m=distance_m, grid=grid, gain_db=gain_db, complex_gain=h
    )


def generate_dataset(
    distances_m,
    test_distances_m,
    grid: FrequencyGrid,
    params: SynthParams,
) -> ChannelDataset:
    """One record per distance; the split is recorded alongside the records."""
    train = [float(d) for d in distances_m]
    test = [float(d) for d in test_distances_m]
    if not train or not test:
        raise ValidationError("both distance lists must be non-empty")
    combined = train + test
    if len(set(combined)) != len(combined):
        raise ValidationError("distances must be pairwise distinct across both lists")
    records = tuple(generate_ctf(d, grid, params) for d in sorted(combined))
    return ChannelDataset(
        records=records,
        train_distances_m=tuple(train),
        test_distances_m=tuple(test),
    )
