import math

import pytest

from cabinchan import lstm
from cabinchan.errors import TrainingError, ValidationError
from cabinchan.rng import derive_seed
from cabinchan.synth import SynthParams, generate_dataset
from cabinchan.tuner import TuneGrid, TuneRecord, combined_score, tune
from cabinchan.types import FrequencyGrid


def tiny_dataset(n_points: int = 21):
    grid = FrequencyGrid(55e9, 55e9 + (n_points - 1) * 10e6, 10e6)
    return generate_dataset((2.0, 5.0), (3.5,), grid, SynthParams(rng_seed=0))


def _stub_report(loss_train, loss_test):
    return lstm.TrainReport(
        loss_train=tuple(loss_train),
        loss_test=tuple(loss_test),
        params=None,
        wall_time_s=0.0,
    )


def quadratic_stub(dataset, arch, config):
    """Test loss (l1-60)^2 + (l2-5)^2 + (e-50)^2; train loss zero."""
    l1, l2 = arch
    test = [
        float((l1 - 60) ** 2 + (l2 - 5) ** 2 + ((e + 1) - 50) ** 2)
        for e in range(config.epochs)
    ]
    return None, _stub_report([0.0] * config.epochs, test)


def constant_stub(dataset, arch, config):
    ones = [1.0] * config.epochs
    return None, _stub_report(ones, ones)


def failing_stub_layer2_three(dataset, arch, config):
    if arch[1] == 3:
        raise TrainingError("non-finite training loss at epoch 0, batch 0")
    return quadratic_stub(dataset, arch, config)


def always_failing_stub(dataset, arch, config):
    raise TrainingError("non-finite training loss at epoch 0, batch 0")


def test_quadratic_stub_argmin():
    result = tune(tiny_dataset(), TuneGrid(), train_fn=quadratic_stub)
    sel = result.selected
    assert (sel.layer1, sel.layer2, sel.epochs) == (60, 5, 50)
    assert sel.score == 0.0
    assert sel.status == "ok"


def test_degenerate_grid_returns_only_member():
    grid = TuneGrid(
        layer1_values=(100,), layer2_values=(9,), epoch_candidates=(94,)
    )
    result = tune(tiny_dataset(), grid, train_fn=quadratic_stub)
    sel = result.selected
    assert (sel.layer1, sel.layer2, sel.epochs) == (100, 9, 94)
    assert len(result.records) == 1


def test_table_covers_full_product():
    grid = TuneGrid(
        layer1_values=(10, 20, 30),
        layer2_values=(2, 4),
        epoch_candidates=(5, 10, 15, 20),
    )
    result = tune(tiny_dataset(), grid, train_fn=quadratic_stub)
    assert len(result.records) == 3 * 2 * 4
    triples = {(r.layer1, r.layer2, r.epochs) for r in result.records}
    assert len(triples) == 24
    assert all(
        (l1, l2, e) in triples
        for l1 in (10, 20, 30)
        for l2 in (2, 4)
        for e in (5, 10, 15, 20)
    )


def test_selected_score_is_table_minimum():
    result = tune(tiny_dataset(), TuneGrid(), train_fn=quadratic_stub)
    assert all(result.selected.score <= r.score for r in result.records)


def test_tie_broken_toward_smaller_loss_test_first():
    # Equal scores, distinct split: layer1=20 carries the smaller test loss.
    def stub(dataset, arch, config):
        if arch[0] == 10:
            return None, _stub_report([0.0] * config.epochs, [1.0] * config.epochs)
        return None, _stub_report([1.0] * config.epochs, [0.0] * config.epochs)

    grid = TuneGrid(layer1_values=(10, 20), layer2_values=(2,), epoch_candidates=(3,))
    result = tune(tiny_dataset(), grid, train_fn=stub)
    assert result.selected.layer1 == 20
    assert result.selected.loss_test == 0.0


def test_full_tie_prefers_smallest_configuration():
    grid = TuneGrid(
        layer1_values=(10, 20), layer2_values=(2, 4), epoch_candidates=(3, 6)
    )
    result = tune(tiny_dataset(), grid, train_fn=constant_stub)
    sel = result.selected
    assert (sel.layer1, sel.layer2, sel.epochs) == (10, 2, 3)


def test_each_pair_trains_once_with_derived_seed():
    calls = []

    def recording_stub(dataset, arch, config):
        calls.append((arch, config.rng_seed, config.epochs))
        return quadratic_stub(dataset, arch, config)

    grid = TuneGrid(
        layer1_values=(10, 20),
        layer2_values=(2, 4),
        epoch_candidates=(5, 10, 15),
        base_config=lstm.TrainConfig(rng_seed=7),
    )
    tune(tiny_dataset(), grid, train_fn=recording_stub)
    assert len(calls) == 4
    for arch, seed, epochs in calls:
        assert epochs == 15
        assert seed == derive_seed(7, arch[0], arch[1])
    assert len({seed for _, seed, _ in calls}) == 4


def test_failed_configuration_recorded_not_fatal():
    result = tune(tiny_dataset(), TuneGrid(), train_fn=failing_stub_layer2_three)
    failed = [r for r in result.records if r.status == "failed"]
    assert len(failed) == 5 * len(TuneGrid().epoch_candidates)
    assert all(math.isinf(r.score) for r in failed)
    assert all(r.layer2 == 3 for r in failed)
    assert result.selected.status == "ok"
    assert (result.selected.layer1, result.selected.layer2) != (60, 3)


def test_all_failures_raise():
    with pytest.raises(TrainingError, match="every configuration"):
        tune(tiny_dataset(), TuneGrid(), train_fn=always_failing_stub)


def test_determinism_with_real_trainer():
    ds = tiny_dataset()
    grid = TuneGrid(
        layer1_values=(2, 3),
        layer2_values=(2,),
        epoch_candidates=(1, 2),
        base_config=lstm.TrainConfig(batch_size=16, window_len=4, rng_seed=3),
    )
    r1 = tune(ds, grid)
    r2 = tune(ds, grid)
    assert r1.records == r2.records
    assert r1.selected == r2.selected
    assert all(r.status == "ok" for r in r1.records)


def test_monotone_grid_refinement():
    ds = tiny_dataset()
    small = TuneGrid(
        layer1_values=(40, 80), layer2_values=(4,), epoch_candidates=(25,)
    )
    larger = TuneGrid(
        layer1_values=(40, 60, 80), layer2_values=(4, 5), epoch_candidates=(25, 50)
    )
    score_small = tune(ds, small, train_fn=quadratic_stub).selected.score
    score_larger = tune(ds, larger, train_fn=quadratic_stub).selected.score
    assert score_larger <= score_small


def test_parallel_jobs_match_serial():
    ds = tiny_dataset()
    grid = TuneGrid(
        layer1_values=(10, 20, 30), layer2_values=(2, 4), epoch_candidates=(5, 10)
    )
    serial = tune(ds, grid, train_fn=quadratic_stub, jobs=1)
    parallel = tune(ds, grid, train_fn=quadratic_stub, jobs=2)
    assert serial.records == parallel.records
    assert serial.selected == parallel.selected


def test_grid_validation():
    with pytest.raises(ValidationError):
        TuneGrid(layer1_values=())
    with pytest.raises(ValidationError):
        TuneGrid(layer2_values=(0, 2))
    with pytest.raises(ValidationError):
        TuneGrid(epoch_candidates=(10, 10))


def test_grid_values_are_sorted():
    grid = TuneGrid(layer1_values=(30, 10, 20))
    assert grid.layer1_values == (10, 20, 30)


def test_combined_score_is_sum():
    assert combined_score(0.25, 0.5) == 0.75


def test_record_fields_round_trip():
    rec = TuneRecord(20, 3, 25, 0.5, 0.75, 1.25, "ok")
    assert rec.score == combined_score(rec.loss_train, rec.loss_test)
