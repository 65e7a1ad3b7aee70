import math

import numpy as np
import pytest

from cabinchan.dsp import WindowSpec, cir_to_pdp, ctf_to_cir, extract_tdl
from cabinchan.errors import ConfigurationError, ValidationError
from cabinchan.synth import SynthParams, generate_ctf, generate_dataset
from cabinchan.types import FrequencyGrid, SPEED_OF_LIGHT_M_S


def grid_of(n_points: int, f_step: float = 10e6) -> FrequencyGrid:
    start = 55e9
    return FrequencyGrid(start, start + (n_points - 1) * f_step, f_step)


def pure_los(seed: int = 0, noise_db: float = -math.inf) -> SynthParams:
    return SynthParams(
        cluster_rate_per_ns=0.0,
        ray_rate_per_ns=0.0,
        noise_floor_db=noise_db,
        rng_seed=seed,
    )


def pathloss_db(params: SynthParams, distance_m: float) -> float:
    return params.ref_loss_db_at_1m + 10.0 * params.pathloss_exponent * math.log10(
        distance_m
    )


# ------------------------------------------------------------- determinism


def test_same_inputs_give_bit_identical_records():
    grid = grid_of(101)
    params = SynthParams(rng_seed=42)
    a = generate_ctf(3.7, grid, params)
    b = generate_ctf(3.7, grid, params)
    assert np.array_equal(a.gain_db, b.gain_db)
    assert np.array_equal(a.complex_gain, b.complex_gain)


def test_different_seeds_give_different_records():
    grid = grid_of(101)
    a = generate_ctf(3.7, grid, SynthParams(rng_seed=1))
    b = generate_ctf(3.7, grid, SynthParams(rng_seed=2))
    assert not np.array_equal(a.gain_db, b.gain_db)


def test_record_gain_matches_complex_magnitude():
    grid = grid_of(101)
    rec = generate_ctf(2.24, grid, SynthParams(rng_seed=7))
    assert np.allclose(rec.gain_db, 20.0 * np.log10(np.abs(rec.complex_gain)))


# ---------------------------------------------------------- pure-LOS limit


def test_pure_los_pdp_is_single_tap_at_propagation_delay():
    # 1000-point grid so the delay step is exactly 0.1 ns and a distance of
    # 200 delay bins lands on a bin boundary (no spectral leakage).
    grid = grid_of(1000)
    step_s = 1.0 / (1000 * grid.f_step_hz)
    distance = SPEED_OF_LIGHT_M_S * 200 * step_s
    params = pure_los()
    rec = generate_ctf(distance, grid, params)

    cir = ctf_to_cir(rec.complex_gain, grid, WindowSpec("rectangular"))
    pdp = cir_to_pdp(cir, -50.0)
    tdl = extract_tdl(pdp, 1e-9, 25.0)
    assert tdl.n_taps == 1
    assert abs(tdl.delays_s[0] - distance / SPEED_OF_LIGHT_M_S) <= 1e-9

    peak_db = 10.0 * math.log10(np.abs(cir.taps[200]) ** 2)
    assert peak_db == pytest.approx(-pathloss_db(params, distance), abs=0.1)


def test_pure_los_total_power_follows_pathloss_law():
    # Parseval makes the total delay-domain power exact for a single path,
    # regardless of where the delay falls between bins.
    grid = grid_of(501)
    params = pure_los()
    for distance in (1.0, 2.24, 3.7, 9.75):
        rec = generate_ctf(distance, grid, params)
        cir = ctf_to_cir(rec.complex_gain, grid, WindowSpec("rectangular"))
        total_db = 10.0 * math.log10(np.sum(np.abs(cir.taps) ** 2))
        assert total_db == pytest.approx(-pathloss_db(params, distance), abs=0.1)


def test_pathloss_difference_over_seeds_matches_exponent():
    # Constant K so the dB-mean Jensen offset of Rician fading is the same
    # at both ranges and the difference isolates the pathloss law.
    grid = grid_of(51)
    means = {}
    for distance in (2.0, 8.0):
        acc = 0.0
        for seed in range(200):
            params = SynthParams(k_decay_db_per_m=0.0, rng_seed=seed)
            rec = generate_ctf(distance, grid, params)
            acc += float(np.mean(rec.gain_db))
        means[distance] = acc / 200.0
    expected = 10.0 * 1.8 * math.log10(8.0 / 2.0)
    assert means[2.0] - means[8.0] == pytest.approx(expected, abs=0.5)


def test_los_bin_is_global_pdp_peak_at_short_range():
    # Strong Rician K and short range: the direct path must dominate every
    # diffuse contribution, whatever the multipath draw.
    grid = grid_of(251)
    distance = 2.5
    step_s = 1.0 / (grid.n_points * grid.f_step_hz)
    los_bin = distance / SPEED_OF_LIGHT_M_S / step_s
    for seed in range(50):
        rec = generate_ctf(distance, grid, SynthParams(rng_seed=seed))
        cir = ctf_to_cir(rec.complex_gain, grid, WindowSpec("rectangular"))
        peak = int(np.argmax(np.abs(cir.taps)))
        assert abs(peak - los_bin) <= 1.0


# ------------------------------------------------------------- noise floor


def test_noise_floor_is_referenced_to_los_at_one_meter():
    grid = grid_of(1001)
    quiet = generate_ctf(1.0, grid, pure_los(seed=3))
    noisy = generate_ctf(1.0, grid, pure_los(seed=3, noise_db=-45.0))
    diff = noisy.complex_gain - quiet.complex_gain

    params = pure_los()
    k1 = 10.0 ** (params.rician_k_db_at_1m / 10.0)
    los_db_1m = -params.ref_loss_db_at_1m + 10.0 * math.log10(k1 / (1.0 + k1))
    expected_power = 10.0 ** ((los_db_1m - 45.0) / 10.0)
    assert float(np.mean(np.abs(diff) ** 2)) == pytest.approx(
        expected_power, rel=0.10
    )


# --------------------------------------------------------------- validation


def test_excess_delay_must_fit_the_grid_delay_window():
    # f_step 12.5 MHz gives an 80 ns unambiguous window; the default 80 ns
    # excess-delay span no longer fits.
    grid = FrequencyGrid(55e9, 57.5e9, 12.5e6)
    with pytest.raises(ConfigurationError):
        generate_ctf(3.7, grid, SynthParams())


def test_rejects_nonpositive_distance():
    grid = grid_of(51)
    with pytest.raises(ValidationError):
        generate_ctf(0.0, grid, SynthParams())
    with pytest.raises(ValidationError):
        generate_ctf(-1.0, grid, SynthParams())


def test_params_validation():
    with pytest.raises(ValidationError):
        SynthParams(pathloss_exponent=0.0)
    with pytest.raises(ValidationError):
        SynthParams(cluster_rate_per_ns=-0.1)
    with pytest.raises(ValidationError):
        SynthParams(ray_decay_ns=0.0)
    with pytest.raises(ValidationError):
        SynthParams(noise_floor_db=0.0)
    with pytest.raises(ValidationError):
        SynthParams(rng_seed=-1)


# ----------------------------------------------------------------- datasets


def test_dataset_keeps_split_and_sorts_records():
    grid = grid_of(51)
    train = (3.66, 1.18, 2.35)
    test = (3.7,)
    ds = generate_dataset(train, test, grid, SynthParams(rng_seed=5))
    assert len(ds.records) == 4
    assert [r.distance_m for r in ds.records] == sorted(train + test)
    assert ds.train_distances_m == train
    assert ds.test_distances_m == test


def test_records_do_not_depend_on_request_order():
    grid = grid_of(51)
    params = SynthParams(rng_seed=9)
    a = generate_dataset((1.18, 2.35, 5.12), (3.7,), grid, params)
    b = generate_dataset((5.12, 1.18, 2.35), (3.7,), grid, params)
    for d in (1.18, 2.35, 5.12, 3.7):
        assert np.array_equal(a.record_for(d).gain_db, b.record_for(d).gain_db)


def test_single_train_single_test_minimal_dataset():
    grid = grid_of(51)
    ds = generate_dataset((2.0,), (4.0,), grid, SynthParams(rng_seed=1))
    assert len(ds.records) == 2
    assert [r.distance_m for r in ds.train_records] == [2.0]
    assert [r.distance_m for r in ds.test_records] == [4.0]


def test_dataset_rejects_duplicate_and_empty_distances():
    grid = grid_of(51)
    params = SynthParams()
    with pytest.raises(ValidationError):
        generate_dataset((2.0, 2.0), (4.0,), grid, params)
    with pytest.raises(ValidationError):
        generate_dataset((2.0,), (2.0,), grid, params)
    with pytest.raises(ValidationError):
        generate_dataset((), (4.0,), grid, params)
    with pytest.raises(ValidationError):
        generate_dataset((2.0,), (), grid, params)


def test_nearby_distances_use_decorrelated_streams():
    # Records 4 cm apart share the deterministic decay envelope but draw
    # independent fading; their centered gains must be nearly uncorrelated.
    grid = grid_of(1001)
    params = SynthParams(rng_seed=11)
    a = generate_ctf(3.66, grid, params)
    b = generate_ctf(3.70, grid, params)
    xa = a.gain_db - np.mean(a.gain_db)
    xb = b.gain_db - np.mean(b.gain_db)
    rho = float(np.dot(xa, xb) / (np.linalg.norm(xa) * np.linalg.norm(xb)))
    assert abs(rho) < 0.3


def test_generated_records_have_finite_energy():
    grid = grid_of(251)
    params = SynthParams(rng_seed=2)
    for d in (1.18, 3.7, 9.75):
        rec = generate_ctf(d, grid, params)
        cir = ctf_to_cir(rec.complex_gain, grid, WindowSpec("rectangular"))
        total = float(np.sum(np.abs(cir.taps) ** 2))
        assert math.isfinite(total) and total > 0.0
