#!/usr/bin/env python3
"""BER over a dispersive tapped-delay-line channel, per equalizer.

Simulates BPSK over a three-tap channel with no equalizer, a zero-forcing
linear equalizer, and an MMSE linear equalizer, and compares each curve with
the closed-form single-tap bound Q(sqrt(2*Eb/N0)).  Writes:

- demos/out/ber_equalizers.png
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cabinchan.ber import BerConfig, awgn_bpsk_ber, simulate_ber, tdl_to_fir
from cabinchan.types import TdlModel

CHANNEL = TdlModel(
    taps=((0.0, 0.0), (2e-9, -6.0), (5e-9, -12.0)),
    threshold_db=25.0,
)
SNR_DB = tuple(float(s) for s in range(0, 13, 2))
SYMBOLS = 400_000
OUT = Path(__file__).resolve().parent / "out"


def main() -> int:
    OUT.mkdir(exist_ok=True)
    fir = tdl_to_fir(CHANNEL, symbol_rate_hz=1e9, rng_seed=7)
    print(f"channel FIR ({fir.size} symbol-spaced taps): {np.round(fir, 4)}")

    curves = {}
    for equalizer in ("none", "zero-forcing-linear", "mmse-linear"):
        config = BerConfig(
            snr_db_points=SNR_DB,
            symbols_per_point=SYMBOLS,
            equalizer=equalizer,
            rng_seed=11,
        )
        curves[equalizer] = simulate_ber(fir, config)

    reference = [awgn_bpsk_ber(s) for s in SNR_DB]
    print(f"{'Eb/N0':>6} {'awgn bound':>11} " + " ".join(f"{n:>12}" for n in curves))
    for i, snr in enumerate(SNR_DB):
        row = " ".join(f"{c.points[i].ber:12.3e}" for c in curves.values())
        print(f"{snr:6.0f} {reference[i]:11.3e} {row}")

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.semilogy(SNR_DB, reference, "k--", label="single-tap bound")
    for name, curve in curves.items():
        bers = [p.ber for p in curve.points]
        ax.semilogy(SNR_DB, bers, marker="o", label=name)
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("bit error rate")
    ax.set_title("BPSK over a 3-tap channel")
    ax.set_ylim(1e-6, 1)
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "ber_equalizers.png", dpi=150)
    plt.close(fig)
    print(f"wrote {OUT / 'ber_equalizers.png'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
