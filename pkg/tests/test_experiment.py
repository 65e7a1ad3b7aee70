import json
from dataclasses import replace
from pathlib import Path

import pytest

from cabinchan.errors import StageError, ValidationError
from cabinchan.experiment import (
    DspSettings,
    ExperimentConfig,
    STAGE_ORDER,
    distance_tag,
    plan_hashes,
    render_report_text,
    run_pipeline,
    run_single_stage,
)
from cabinchan.rng import derive_seed, label_token


def tiny_doc(out_dir: str, seed: int = 0) -> dict:
    return {
        "version": 1,
        "seed": seed,
        "out_dir": out_dir,
        "grid": {"f_start_hz": 55e9, "f_stop_hz": 55.5e9, "f_step_hz": 10e6},
        "split": {"train_distances_m": [2.0, 3.0, 4.0], "test_distances_m": [2.5]},
        "arch": {"layer1": 4, "layer2": 2},
        "train": {"epochs": 2, "batch_size": 32, "window_len": 8},
        "synth": {"max_excess_delay_ns": 40.0},
        "dsp": {"tdl_bin_ns": 4.0, "floor_db": -40.0},
        "ber": {"snr_db_points": [0.0, 4.0], "symbols_per_point": 20000},
    }


def tiny_config(tmp_path: Path, seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig.from_dict(tiny_doc(str(tmp_path / "run"), seed=seed))


# ------------------------------------------------------------------- config


def test_empty_document_takes_module_defaults():
    config = ExperimentConfig.from_dict({})
    assert config.seed == 0
    assert config.out_dir == "run"
    assert config.arch == (100, 9)
    assert config.grid.f_start_hz == 55e9 and config.grid.f_stop_hz == 65e9
    assert config.dsp == DspSettings()
    assert config.train.epochs == 94 and config.train.batch_size == 20


def test_module_seeds_derive_from_global_seed():
    config = ExperimentConfig.from_dict({"seed": 42})
    assert config.synth.rng_seed == derive_seed(42, label_token("synth"))
    assert config.train.rng_seed == derive_seed(42, label_token("train"))
    assert config.ber.rng_seed == derive_seed(42, label_token("ber"))


def test_explicit_module_seed_is_honored():
    config = ExperimentConfig.from_dict({"seed": 42, "ber": {"rng_seed": 7}})
    assert config.ber.rng_seed == 7


def test_unknown_keys_rejected_at_every_level():
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"seeds": 1})
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"grid": {"f_center_hz": 60e9}})
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"dsp": {"taper": "hann"}})
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"train": {"momentum": 0.9}})
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"split": {"validation_distances_m": [2.0]}})
    with pytest.raises(ValidationError, match="unknown keys"):
        ExperimentConfig.from_dict({"ber": {"modulation": "qpsk"}})


def test_unsupported_version_rejected():
    with pytest.raises(ValidationError, match="version"):
        ExperimentConfig.from_dict({"version": 2})


def test_out_dir_resolves_relative_to_config_file(tmp_path):
    nested = tmp_path / "configs"
    nested.mkdir()
    path = nested / "exp.json"
    path.write_text(json.dumps({"out_dir": "runs/a"}))
    config = ExperimentConfig.from_file(path)
    assert config.out_dir == str(nested / "runs" / "a")
    path.write_text(json.dumps({"out_dir": "/abs/path"}))
    assert ExperimentConfig.from_file(path).out_dir == "/abs/path"


def test_to_dict_round_trips(tmp_path):
    config = tiny_config(tmp_path)
    rebuilt = ExperimentConfig.from_dict(config.to_dict())
    assert rebuilt == config
    assert rebuilt.config_hash() == config.config_hash()


def test_config_hash_tracks_content_not_key_order(tmp_path):
    doc = tiny_doc(str(tmp_path / "run"))
    reordered = dict(reversed(list(doc.items())))
    a = ExperimentConfig.from_dict(doc)
    b = ExperimentConfig.from_dict(reordered)
    assert a.config_hash() == b.config_hash()
    c = ExperimentConfig.from_dict(tiny_doc(str(tmp_path / "run"), seed=1))
    assert c.config_hash() != a.config_hash()


def test_dsp_settings_validation():
    with pytest.raises(ValidationError):
        DspSettings(window="kaiser")
    with pytest.raises(ValidationError):
        DspSettings(trend_bins=2)
    with pytest.raises(ValidationError):
        DspSettings(tdl_bin_ns=0.0)
    with pytest.raises(ValidationError):
        DspSettings(floor_db=10.0)
    with pytest.raises(ValidationError):
        DspSettings(phase="measured")


def test_distance_tags_are_filename_safe():
    assert distance_tag(3.7) == "3p7"
    assert distance_tag(9.75) == "9p75"
    assert distance_tag(3.0) == "3"


# -------------------------------------------------------------- plan hashes


def test_stage_hashes_chain_through_dependencies(tmp_path):
    config = tiny_config(tmp_path)
    base = plan_hashes(config)

    ber_only = replace(config, ber=replace(config.ber, rng_seed=99))
    diff = [s for s in STAGE_ORDER if plan_hashes(ber_only)[s] != base[s]]
    assert diff == ["ber", "evaluate"]

    tdl_change = replace(config, dsp=replace(config.dsp, tdl_bin_ns=2.0))
    diff = [s for s in STAGE_ORDER if plan_hashes(tdl_change)[s] != base[s]]
    assert diff == ["tdl", "ber", "evaluate"]

    pdp_change = replace(config, dsp=replace(config.dsp, trend_bins=11))
    diff = [s for s in STAGE_ORDER if plan_hashes(pdp_change)[s] != base[s]]
    assert diff == ["pdp", "tdl", "ber", "evaluate"]

    train_change = replace(config, arch=(8, 2))
    diff = [s for s in STAGE_ORDER if plan_hashes(train_change)[s] != base[s]]
    assert diff == ["train", "predict", "pdp", "tdl", "ber", "evaluate"]

    synth_change = replace(config, synth=replace(config.synth, rng_seed=1))
    diff = [s for s in STAGE_ORDER if plan_hashes(synth_change)[s] != base[s]]
    assert diff == list(STAGE_ORDER)


# ----------------------------------------------------------------- pipeline


def test_pipeline_produces_every_artifact(tmp_path):
    config = tiny_config(tmp_path)
    outcomes = run_pipeline(config)
    assert [o.stage for o in outcomes] == list(STAGE_ORDER)
    assert not any(o.skipped for o in outcomes)
    out = Path(config.out_dir)
    expected = [
        "ctf.csv", "manifest.json", "model.json", "loss.csv",
        "predicted_ctf.csv",
        "pdp_measured_2p5.csv", "pdp_predicted_2p5.csv",
        "tdl_measured_2p5.csv", "tdl_trend_2p5.csv", "tdl_predicted_2p5.csv",
        "ber_trend_2p5.csv", "ber_predicted_2p5.csv",
        "ctf_compare_2p5.csv", "report.json", "report.txt",
    ]
    for name in expected:
        assert (out / name).exists(), name
    assert not (out / ".lock").exists()

    report = json.loads((out / "report.json").read_text())
    entry = report["distances"]["2.5"]
    assert set(entry["tdl"]) == {
        "measured_vs_trend", "measured_vs_predicted", "trend_vs_predicted"
    }
    for pair in entry["tdl"].values():
        assert set(pair) == {"rmse_db", "r_squared", "average_tap_error", "shared_taps"}
    assert set(entry["tap_counts"]) == {"measured", "trend", "predicted"}
    assert entry["ctf"]["rmse_db"] > 0.0
    assert report["config_hash"] == config.config_hash()

    text = render_report_text(report)
    assert "measured vs trend" in text
    assert "tap error (trend vs predicted)" in text


def test_second_run_skips_everything(tmp_path):
    config = tiny_config(tmp_path)
    run_pipeline(config)
    report_bytes = (Path(config.out_dir) / "report.json").read_bytes()
    outcomes = run_pipeline(config)
    assert all(o.skipped for o in outcomes)
    assert (Path(config.out_dir) / "report.json").read_bytes() == report_bytes


def test_fresh_rerun_in_same_directory_is_byte_identical(tmp_path):
    import shutil

    config = tiny_config(tmp_path)
    run_pipeline(config)
    first = (Path(config.out_dir) / "report.json").read_bytes()
    shutil.rmtree(config.out_dir)
    run_pipeline(config)
    second = (Path(config.out_dir) / "report.json").read_bytes()
    assert first == second


def test_config_edit_reruns_only_affected_suffix(tmp_path):
    config = tiny_config(tmp_path)
    run_pipeline(config)
    edited = replace(config, ber=replace(config.ber, rng_seed=123))
    outcomes = run_pipeline(edited)
    skipped = {o.stage: o.skipped for o in outcomes}
    assert skipped == {
        "synth": True, "train": True, "predict": True, "pdp": True,
        "tdl": True, "ber": False, "evaluate": False,
    }


def test_force_reruns_everything(tmp_path):
    config = tiny_config(tmp_path)
    run_pipeline(config)
    outcomes = run_pipeline(config, force=True)
    assert not any(o.skipped for o in outcomes)


def test_tampered_output_invalidates_stage(tmp_path):
    config = tiny_config(tmp_path)
    run_pipeline(config)
    ctf = Path(config.out_dir) / "ctf.csv"
    ctf.write_bytes(ctf.read_bytes() + b"# tampered\n")
    outcomes = run_pipeline(config)
    assert outcomes[0].stage == "synth" and not outcomes[0].skipped


def test_single_stage_requires_fresh_dependencies(tmp_path):
    config = tiny_config(tmp_path)
    with pytest.raises(StageError, match="needs up-to-date"):
        run_single_stage(config, "train")
    run_pipeline(config)
    outcome = run_single_stage(config, "tdl")
    assert outcome.skipped
    outcome = run_single_stage(config, "tdl", force=True)
    assert not outcome.skipped


def test_single_stage_rejects_unknown_stage(tmp_path):
    config = tiny_config(tmp_path)
    with pytest.raises(ValidationError, match="unknown stage"):
        run_single_stage(config, "plot")


def test_locked_directory_refuses_second_run(tmp_path):
    config = tiny_config(tmp_path)
    out = Path(config.out_dir)
    out.mkdir(parents=True)
    (out / ".lock").write_text("12345\n")
    with pytest.raises(StageError, match="locked"):
        run_pipeline(config)
    (out / ".lock").unlink()
    run_pipeline(config)
    assert not (out / ".lock").exists()
