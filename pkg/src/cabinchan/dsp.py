"""Delay-domain processing: magnitude-to-complex reconstruction, CTF/CIR
transforms, power delay profiles, trend smoothing, and TDL extraction.

Conventions fixed here once and used everywhere:
  * inverse DFT carries the 1/N factor: h[n] = (1/N)·Σ_k H[k]·e^{+j2πkn/N},
    so Parseval reads Σ|h|² = (1/N)·Σ|H|²;
  * the delay axis has step 1/(N·f_step) and spans 1/f_step;
  * PDPs are peak-normalized to 0 dB and floored.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DimensionError, DomainError, ValidationError
from .types import Cir, FrequencyGrid, Pdp, TdlModel

WINDOW_KINDS = ("rectangular", "hann")


@dataclass(frozen=True)
class WindowSpec:
    """Taper applied across the frequency axis before the inverse transform."""

    kind: str = "rectangular"

    def __post_init__(self) -> None:
        if self.kind not in WINDOW_KINDS:
            raise ValidationError(
                f"unknown window kind {self.kind!r}, expected one of {WINDOW_KINDS}"
            )

    def coefficients(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValidationError("window length must be >= 1")
        if self.kind == "rectangular":
            return np.ones(n, dtype=np.float64)
        # Hann sampled without its zero endpoints: coefficients must stay
        # strictly positive so no frequency sample is annihilated.
        w = np.hanning(n + 2)[1:-1]
        return w / w.max()


@dataclass(frozen=True)
class TrendSpec:
    """Moving-average smoothing of a PDP, always in the dB domain."""

    window_bins: int = 21

    def __post_init__(self) -> None:
        if self.window_bins < 3 or self.window_bins % 2 == 0:
            raise ValidationError(
                f"window_bins must be odd and >= 3, got {self.window_bins}"
            )


def minimum_phase_reconstruct(gain_db, grid: FrequencyGrid) -> np.ndarray:
    """Complex CTF with the given magnitude and minimum-phase response.

    The phase is the negative Hilbert transform of ln|H|, computed by the
    discrete cepstral method: ln|H| is extended to an even, conjugate-symmetric
    sequence of length 2N-2, its real cepstrum is folded onto the causal part,
    and the forward DFT of the folded cepstrum gives ln H for the minimum-phase
    system.  The returned magnitude equals the input magnitude exactly.
    """
    gain = np.asarray(gain_db, dtype=np.float64).ravel()
    if gain.shape[0] != grid.n_points:
        raise DimensionError(
            f"gain_db has {gain.shape[0]} samples, grid has {grid.n_points}"
        )
    if not np.all(np.isfinite(gain)):
        raise DomainError("gain_db must be finite")
    magnitude = 10.0 ** (gain / 20.0)
    if np.any(magnitude == 0.0):
        raise DomainError("zero magnitude sample: floor the gain before reconstruction")
    n = magnitude.shape[0]
    if n == 1:
        return magnitude.astype(np.complex128)
    log_mag = np.log(magnitude)
    extended = np.concatenate([log_mag, log_mag[-2:0:-1]])  # even, length 2N-2
    cepstrum = np.fft.ifft(extended).real
    m = extended.shape[0]
    folded = np.zeros(m, dtype=np.float64)
    folded[0] = cepstrum[0]
    folded[1 : m // 2] = 2.0 * cepstrum[1 : m // 2]
    folded[m // 2] = cepstrum[m // 2]
    phase = np.fft.fft(folded).imag[:n]
    return magnitude * np.exp(1j * phase)


def ctf_to_cir(ctf, grid: FrequencyGrid, window: WindowSpec | None = None) -> Cir:
    """Inverse transform of a complex CTF to impulse-response taps."""
    h_freq = np.asarray(ctf, dtype=np.complex128).ravel()
    if h_freq.shape[0] != grid.n_points:
        raise DimensionError(
            f"ctf has {h_freq.shape[0]} samples, grid has {grid.n_points}"
        )
    if window is None:
        window = WindowSpec()
    n = h_freq.shape[0]
    taps = np.fft.ifft(window.coefficients(n) * h_freq)
    return Cir(delay_step_s=1.0 / (n * grid.f_step_hz), taps=taps)


def cir_to_ctf(cir: Cir) -> np.ndarray:
    """Forward transform, the exact inverse of ctf_to_cir with no window."""
    return np.fft.fft(cir.taps)


def cir_to_pdp(cir: Cir, floor_db: float = -50.0) -> Pdp:
    """Peak-normalized power delay profile in dB, floored at floor_db."""
    if not (floor_db < 0):
        raise ValidationError(f"floor_db must be negative, got {floor_db}")
    power = np.abs(cir.taps) ** 2
    peak = power.max()
    if peak == 0.0:
        raise DomainError("all-zero impulse response has no power profile")
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(power / peak)
    power_db = np.maximum(power_db, floor_db)
    return Pdp(delay_step_s=cir.delay_step_s, power_db=power_db, noise_floor_db=floor_db)


def extract_trend(pdp: Pdp, spec: TrendSpec | None = None) -> Pdp:
    """Centered moving average of the dB profile.

    Near the edges the window is clipped to the available samples, so the
    first and last bins average over fewer neighbors instead of zero-padding.
    """
    if spec is None:
        spec = TrendSpec()
    n = pdp.n_bins
    if spec.window_bins > n:
        raise ValidationError(
            f"trend window of {spec.window_bins} bins exceeds profile length {n}"
        )
    kernel = np.ones(spec.window_bins, dtype=np.float64)
    sums = np.convolve(pdp.power_db, kernel, mode="same")
    counts = np.convolve(np.ones(n, dtype=np.float64), kernel, mode="same")
    return Pdp(
        delay_step_s=pdp.delay_step_s,
        power_db=sums / counts,
        noise_floor_db=pdp.noise_floor_db,
    )


def extract_tdl(
    pdp: Pdp, bin_width_s: float = 1e-9, threshold_db: float = 25.0
) -> TdlModel:
    """Collapse a PDP into sparse (delay, power) taps.

    The delay axis is partitioned into consecutive bins of width bin_width_s;
    each bin's power is the dB value of its total linear power; bins more than
    threshold_db below the strongest bin are dropped; the tap delay is the bin
    center.
    """
    if bin_width_s < pdp.delay_step_s:
        raise ValidationError(
            f"bin width {bin_width_s} s is finer than the delay step {pdp.delay_step_s} s"
        )
    if not (threshold_db > 0):
        raise ValidationError(f"threshold_db must be positive, got {threshold_db}")
    linear = 10.0 ** (pdp.power_db / 10.0)
    # Nudge the bin assignment so samples landing exactly on a boundary due
    # to float rounding go to the bin their index intends.
    indices = np.floor(pdp.delays_s / bin_width_s * (1.0 + 1e-12)).astype(np.int64)
    n_bins = int(indices.max()) + 1
    bin_power = np.zeros(n_bins, dtype=np.float64)
    np.add.at(bin_power, indices, linear)
    occupied = bin_power > 0.0
    with np.errstate(divide="ignore"):
        bin_db = np.where(occupied, 10.0 * np.log10(np.where(occupied, bin_power, 1.0)), -np.inf)
    keep = bin_db >= bin_db.max() - threshold_db
    taps = tuple(
        ((idx + 0.5) * bin_width_s, float(bin_db[idx]))
        for idx in np.nonzero(keep)[0]
    )
    return TdlModel(taps=taps, threshold_db=threshold_db)


def rms_delay_spread(tdl: TdlModel) -> float:
    """Power-weighted standard deviation of the tap delays, in seconds."""
    delays = tdl.delays_s
    weights = 10.0 ** (tdl.powers_db / 10.0)
    total = weights.sum()
    mean = float(np.sum(weights * delays) / total)
    second = float(np.sum(weights * delays**2) / total)
    return math.sqrt(max(second - mean * mean, 0.0))
