"""Experiment configuration and the staged, restartable pipeline.

A pipeline directory is populated by seven stages (synth, train, predict,
pdp, tdl, ber, evaluate) executed in dependency order.  Every stage is
stamped with a content hash of its resolved configuration plus the hashes of
its upstream stages; a stage whose stamp and output files match is skipped,
so reruns are idempotent and a config edit re-executes exactly the affected
suffix of the graph.

The experiment document is versioned JSON; unknown keys are rejected at
every level and omitted sections fall back to module defaults, so a minimal
config is a handful of lines.  Per-module RNG seeds default to streams
derived from the single global seed and may be pinned explicitly.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from . import dsp, fileio, lstm, metrics, synth
from .ber import BerConfig, ber_compare
from .errors import StageError, ValidationError
from .rng import derive_seed, float_token, label_token
from .types import (
    ChannelDataset,
    CtfRecord,
    DEFAULT_TEST_DISTANCES_M,
    DEFAULT_TRAIN_DISTANCES_M,
    FrequencyGrid,
    TdlModel,
    default_grid,
)

CONFIG_VERSION = 1
PHASE_MODES = ("minimum", "true")

STAGE_ORDER = ("synth", "train", "predict", "pdp", "tdl", "ber", "evaluate")
STAGE_DEPS: dict[str, tuple[str, ...]] = {
    "synth": (),
    "train": ("synth",),
    "predict": ("synth", "train"),
    "pdp": ("synth", "predict"),
    "tdl": ("pdp",),
    "ber": ("tdl",),
    "evaluate": ("synth", "predict", "pdp", "tdl", "ber"),
}

# Default acceptance bar for `evaluate --strict`: mean per-tap deviation of
# the predicted TDL from the measured-trend TDL, as a fraction of the
# reference dynamic range.
DEFAULT_MAX_TAP_ERROR = 0.15


@dataclass(frozen=True)
class DspSettings:
    window: str = "hann"
    trend_bins: int = 21
    tdl_bin_ns: float = 1.0
    tdl_threshold_db: float = 25.0
    floor_db: float = -50.0
    phase: str = "minimum"

    def __post_init__(self) -> None:
        dsp.WindowSpec(self.window)
        dsp.TrendSpec(self.trend_bins)
        if not (self.tdl_bin_ns > 0):
            raise ValidationError("tdl_bin_ns must be positive")
        if not (self.tdl_threshold_db > 0):
            raise ValidationError("tdl_threshold_db must be positive")
        if not (self.floor_db < 0):
            raise ValidationError("floor_db must be negative")
        if self.phase not in PHASE_MODES:
            raise ValidationError(f"phase must be one of {PHASE_MODES}")


def _reject_unknown(section: dict, allowed, context: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValidationError(f"{context}: unknown keys {unknown}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment run."""

    seed: int = 0
    out_dir: str = "run"
    grid: FrequencyGrid = default_grid()
    train_distances_m: tuple[float, ...] = DEFAULT_TRAIN_DISTANCES_M
    test_distances_m: tuple[float, ...] = DEFAULT_TEST_DISTANCES_M
    synth: synth.SynthParams = synth.SynthParams()
    arch: tuple[int, int] = (100, 9)
    train: lstm.TrainConfig = lstm.TrainConfig()
    tune_layer1_values: tuple[int, ...] = (20, 40, 60, 80, 100)
    tune_layer2_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9)
    tune_epoch_candidates: tuple[int, ...] = (25, 50, 75, 100, 125)
    dsp: DspSettings = DspSettings()
    ber: BerConfig = BerConfig()

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        _reject_unknown(
            doc,
            {"version", "seed", "out_dir", "grid", "split", "synth", "arch",
             "train", "tune", "dsp", "ber"},
            "experiment config",
        )
        version = doc.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValidationError(f"unsupported config version {version}")
        seed = int(doc.get("seed", 0))
        if not (0 <= seed < 2**64):
            raise ValidationError("seed must fit in 64 unsigned bits")

        out_dir = doc.get("out_dir", "run")
        if base_dir is not None and not os.path.isabs(out_dir):
            out_dir = str(base_dir / out_dir)

        grid_doc = dict(doc.get("grid", {}))
        _reject_unknown(grid_doc, {"f_start_hz", "f_stop_hz", "f_step_hz"}, "grid")
        grid = FrequencyGrid(
            f_start_hz=float(grid_doc.get("f_start_hz", 55e9)),
            f_stop_hz=float(grid_doc.get("f_stop_hz", 65e9)),
            f_step_hz=float(grid_doc.get("f_step_hz", 10e6)),
        )

        split_doc = dict(doc.get("split", {}))
        _reject_unknown(split_doc, {"train_distances_m", "test_distances_m"}, "split")
        train_d = tuple(
            float(d) for d in split_doc.get("train_distances_m", DEFAULT_TRAIN_DISTANCES_M)
        )
        test_d = tuple(
            float(d) for d in split_doc.get("test_distances_m", DEFAULT_TEST_DISTANCES_M)
        )

        synth_doc = dict(doc.get("synth", {}))
        synth_fields = {
            "pathloss_exponent", "ref_loss_db_at_1m", "rician_k_db_at_1m",
            "k_decay_db_per_m", "cluster_rate_per_ns", "ray_rate_per_ns",
            "cluster_decay_ns", "ray_decay_ns", "max_excess_delay_ns",
            "noise_floor_db", "rng_seed",
        }
        _reject_unknown(synth_doc, synth_fields, "synth")
        synth_doc.setdefault("rng_seed", derive_seed(seed, label_token("synth")))
        synth_params = synth.SynthParams(**synth_doc)

        arch_doc = dict(doc.get("arch", {}))
        _reject_unknown(arch_doc, {"layer1", "layer2"}, "arch")
        arch = (int(arch_doc.get("layer1", 100)), int(arch_doc.get("layer2", 9)))

        train_doc = dict(doc.get("train", {}))
        train_fields = {
            "epochs", "batch_size", "shuffle", "learning_rate", "adam_beta1",
            "adam_beta2", "adam_eps", "window_len", "rng_seed",
            "gradient_clip_norm", "activation",
        }
        _reject_unknown(train_doc, train_fields, "train")
        train_doc.setdefault("rng_seed", derive_seed(seed, label_token("train")))
        train_config = lstm.TrainConfig(**train_doc)

        tune_doc = dict(doc.get("tune", {}))
        _reject_unknown(
            tune_doc, {"layer1_values", "layer2_values", "epoch_candidates"}, "tune"
        )

        dsp_doc = dict(doc.get("dsp", {}))
        _reject_unknown(
            dsp_doc,
            {"window", "trend_bins", "tdl_bin_ns", "tdl_threshold_db", "floor_db", "phase"},
            "dsp",
        )
        dsp_settings = DspSettings(**dsp_doc)

        ber_doc = dict(doc.get("ber", {}))
        ber_fields = {
            "snr_db_points", "symbols_per_point", "symbol_rate_hz",
            "equalizer", "equalizer_taps", "rng_seed",
        }
        _reject_unknown(ber_doc, ber_fields, "ber")
        if "snr_db_points" in ber_doc:
            ber_doc["snr_db_points"] = tuple(float(s) for s in ber_doc["snr_db_points"])
        ber_doc.setdefault("rng_seed", derive_seed(seed, label_token("ber")))
        ber_config = BerConfig(**ber_doc)

        return cls(
            seed=seed,
            out_dir=out_dir,
            grid=grid,
            train_distances_m=train_d,
            test_distances_m=test_d,
            synth=synth_params,
            arch=arch,
            train=train_config,
            tune_layer1_values=tuple(
                int(v) for v in tune_doc.get("layer1_values", (20, 40, 60, 80, 100))
            ),
            tune_layer2_values=tuple(
                int(v) for v in tune_doc.get("layer2_values", (2, 3, 4, 5, 6, 7, 8, 9))
            ),
            tune_epoch_candidates=tuple(
                int(v) for v in tune_doc.get("epoch_candidates", (25, 50, 75, 100, 125))
            ),
            dsp=dsp_settings,
            ber=ber_config,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        doc = fileio.read_json(path)
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        """Fully resolved document (all defaults and seeds made explicit)."""
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "grid": {
                "f_start_hz": self.grid.f_start_hz,
                "f_stop_hz": self.grid.f_stop_hz,
                "f_step_hz": self.grid.f_step_hz,
            },
            "split": {
                "train_distances_m": list(self.train_distances_m),
                "test_distances_m": list(self.test_distances_m),
            },
            "synth": {
                "pathloss_exponent": self.synth.pathloss_exponent,
                "ref_loss_db_at_1m": self.synth.ref_loss_db_at_1m,
                "rician_k_db_at_1m": self.synth.rician_k_db_at_1m,
                "k_decay_db_per_m": self.synth.k_decay_db_per_m,
                "cluster_rate_per_ns": self.synth.cluster_rate_per_ns,
                "ray_rate_per_ns": self.synth.ray_rate_per_ns,
                "cluster_decay_ns": self.synth.cluster_decay_ns,
                "ray_decay_ns": self.synth.ray_decay_ns,
                "max_excess_delay_ns": self.synth.max_excess_delay_ns,
                "noise_floor_db": self.synth.noise_floor_db,
                "rng_seed": self.synth.rng_seed,
            },
            "arch": {"layer1": self.arch[0], "layer2": self.arch[1]},
            "train": {
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "shuffle": self.train.shuffle,
                "learning_rate": self.train.learning_rate,
                "adam_beta1": self.train.adam_beta1,
                "adam_beta2": self.train.adam_beta2,
                "adam_eps": self.train.adam_eps,
                "window_len": self.train.window_len,
                "rng_seed": self.train.rng_seed,
                "gradient_clip_norm": self.train.gradient_clip_norm,
                "activation": self.train.activation,
            },
            "tune": {
                "layer1_values": list(self.tune_layer1_values),
                "layer2_values": list(self.tune_layer2_values),
                "epoch_candidates": list(self.tune_epoch_candidates),
            },
            "dsp": {
                "window": self.dsp.window,
                "trend_bins": self.dsp.trend_bins,
                "tdl_bin_ns": self.dsp.tdl_bin_ns,
                "tdl_threshold_db": self.dsp.tdl_threshold_db,
                "floor_db": self.dsp.floor_db,
                "phase": self.dsp.phase,
            },
            "ber": {
                "snr_db_points": list(self.ber.snr_db_points),
                "symbols_per_point": self.ber.symbols_per_point,
                "symbol_rate_hz": self.ber.symbol_rate_hz,
                "equalizer": self.ber.equalizer,
                "equalizer_taps": self.ber.equalizer_taps,
                "rng_seed": self.ber.rng_seed,
            },
        }

    def config_hash(self) -> str:
        return _sha_text(_canonical(self.to_dict()))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _sha_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def distance_tag(distance_m: float) -> str:
    return f"{distance_m:g}".replace(".", "p").replace("-", "m")


def _stage_config(config: ExperimentConfig, stage: str) -> dict:
    doc = config.to_dict()
    if stage == "synth":
        return {"grid": doc["grid"], "split": doc["split"], "synth": doc["synth"]}
    if stage == "train":
        return {"train": doc["train"], "arch": doc["arch"]}
    if stage == "predict":
        return {}
    if stage == "pdp":
        d = doc["dsp"]
        return {k: d[k] for k in ("window", "trend_bins", "floor_db", "phase")}
    if stage == "tdl":
        d = doc["dsp"]
        return {k: d[k] for k in ("tdl_bin_ns", "tdl_threshold_db")}
    if stage == "ber":
        return {"ber": doc["ber"]}
    if stage == "evaluate":
        return {}
    raise ValidationError(f"unknown stage {stage!r}")


def plan_hashes(config: ExperimentConfig) -> dict[str, str]:
    """Content hash per stage, chaining upstream hashes."""
    hashes: dict[str, str] = {}
    for stage in STAGE_ORDER:
        payload = {
            "stage": stage,
            "config": _stage_config(config, stage),
            "deps": {dep: hashes[dep] for dep in STAGE_DEPS[stage]},
        }
        hashes[stage] = _sha_text(_canonical(payload))
    return hashes


def _stamp_path(out: Path, stage: str) -> Path:
    return out / "stamps" / f"{stage}.json"


def _write_stamp(out: Path, stage: str, stage_hash: str, outputs: list[str]) -> None:
    (out / "stamps").mkdir(parents=True, exist_ok=True)
    fileio.write_json(
        _stamp_path(out, stage),
        {
            "stage": stage,
            "hash": stage_hash,
            "outputs": {name: _sha_file(out / name) for name in sorted(outputs)},
        },
    )


def stage_is_fresh(out: Path, stage: str, stage_hash: str) -> bool:
    stamp_file = _stamp_path(out, stage)
    if not stamp_file.exists():
        return False
    try:
        stamp = fileio.read_json(stamp_file)
    except (OSError, json.JSONDecodeError):
        return False
    if stamp.get("hash") != stage_hash:
        return False
    for name, digest in stamp.get("outputs", {}).items():
        path = out / name
        if not path.exists() or _sha_file(path) != digest:
            return False
    return True


@contextmanager
def directory_lock(out: Path):
    """One process per pipeline directory."""
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StageError(
            f"{out} is locked by another run (delete {lock} if that run is gone)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


# ------------------------------------------------------------------ stages


def _read_dataset(out: Path, needed_by: str):
    for name in ("ctf.csv", "manifest.json"):
        if not (out / name).exists():
            raise StageError(
                f"{needed_by}: {name} not found in {out}; run the 'synth' stage first"
            )
    return fileio.read_dataset(out / "ctf.csv", out / "manifest.json")


def _read_predicted(out: Path, grid: FrequencyGrid, needed_by: str) -> dict[float, np.ndarray]:
    path = out / "predicted_ctf.csv"
    if not path.exists():
        raise StageError(
            f"{needed_by}: predicted_ctf.csv not found in {out}; "
            "run the 'predict' stage first"
        )
    groups = fileio.read_ctf_csv(path)
    predictions = {}
    for distance, (freqs, gains) in groups.items():
        if freqs.shape[0] != grid.n_points:
            raise StageError(
                f"{needed_by}: prediction at {distance} m has {freqs.shape[0]} points, "
                f"grid needs {grid.n_points}"
            )
        predictions[distance] = gains
    return predictions


def _stage_synth(config: ExperimentConfig, out: Path) -> list[str]:
    dataset = synth.generate_dataset(
        config.train_distances_m, config.test_distances_m, config.grid, config.synth
    )
    fileio.write_ctf_csv(out / "ctf.csv", dataset.records)
    fileio.write_dataset_manifest(out / "manifest.json", dataset, config.synth)
    return ["ctf.csv", "manifest.json"]


def _stage_train(config: ExperimentConfig, out: Path) -> list[str]:
    dataset, _ = _read_dataset(out, "train")
    params, report = lstm.train(dataset, config.arch, config.train)
    fileio.write_model_json(out / "model.json", params)
    fileio.write_loss_csv(out / "loss.csv", report)
    return ["model.json", "loss.csv"]


def _stage_predict(config: ExperimentConfig, out: Path) -> list[str]:
    dataset, _ = _read_dataset(out, "predict")
    model_path = out / "model.json"
    if not model_path.exists():
        raise StageError(f"predict: model.json not found in {out}; run 'train' first")
    params = fileio.read_model_json(model_path)
    records = [
        lstm.predict_ctf(params, d, dataset.grid)
        for d in sorted(dataset.test_distances_m)
    ]
    fileio.write_ctf_csv(out / "predicted_ctf.csv", records)
    return ["predicted_ctf.csv"]


def _complex_pair(
    record: CtfRecord,
    predicted_db: np.ndarray,
    config: ExperimentConfig,
    synth_params: synth.SynthParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Complex CTFs for the measured record and the predicted magnitude.

    phase "minimum": both sides get a minimum-phase response derived from
    their own magnitude.  phase "true": the synthesizer is deterministic, so
    the captured complex response is recovered exactly by regenerating the
    record; the predicted magnitude is paired with that captured phase, the
    analog of combining a magnitude forecast with the phase the instrument
    recorded at the same position.
    """
    if config.dsp.phase == "minimum":
        return (
            dsp.minimum_phase_reconstruct(record.gain_db, record.grid),
            dsp.minimum_phase_reconstruct(predicted_db, record.grid),
        )
    measured = synth.generate_ctf(
        record.distance_m, record.grid, synth_params
    ).complex_gain
    predicted = 10.0 ** (np.asarray(predicted_db, dtype=np.float64) / 20.0) * np.exp(
        1j * np.angle(measured)
    )
    return measured, predicted


def _stage_pdp(config: ExperimentConfig, out: Path) -> list[str]:
    dataset, synth_params = _read_dataset(out, "pdp")
    predictions = _read_predicted(out, dataset.grid, "pdp")
    window = dsp.WindowSpec(config.dsp.window)
    trend_spec = dsp.TrendSpec(config.dsp.trend_bins)
    outputs = []
    for distance in sorted(dataset.test_distances_m):
        tag = distance_tag(distance)
        if distance not in predictions:
            raise StageError(f"pdp: no prediction for test distance {distance} m")
        measured, predicted = _complex_pair(
            dataset.record_for(distance), predictions[distance], config, synth_params
        )
        for name, ctf in (("measured", measured), ("predicted", predicted)):
            cir = dsp.ctf_to_cir(ctf, dataset.grid, window)
            pdp = dsp.cir_to_pdp(cir, config.dsp.floor_db)
            trend = dsp.extract_trend(pdp, trend_spec)
            filename = f"pdp_{name}_{tag}.csv"
            fileio.write_pdp_csv(out / filename, pdp, trend)
            outputs.append(filename)
    return outputs


def _stage_tdl(config: ExperimentConfig, out: Path) -> list[str]:
    bin_s = config.dsp.tdl_bin_ns * 1e-9
    threshold = config.dsp.tdl_threshold_db
    outputs = []
    for distance in sorted(config.test_distances_m):
        tag = distance_tag(distance)
        sources = {}
        for name in ("measured", "predicted"):
            path = out / f"pdp_{name}_{tag}.csv"
            if not path.exists():
                raise StageError(f"tdl: {path.name} not found; run 'pdp' first")
            sources[name] = fileio.read_pdp_csv(path, config.dsp.floor_db)
        models = {
            "measured": dsp.extract_tdl(sources["measured"][0], bin_s, threshold),
            "trend": dsp.extract_tdl(sources["measured"][1], bin_s, threshold),
            "predicted": dsp.extract_tdl(sources["predicted"][0], bin_s, threshold),
        }
        for name, model in models.items():
            filename = f"tdl_{name}_{tag}.csv"
            fileio.write_tdl_csv(out / filename, model)
            outputs.append(filename)
    return outputs


def _stage_ber(config: ExperimentConfig, out: Path) -> list[str]:
    outputs = []
    for distance in sorted(config.test_distances_m):
        tag = distance_tag(distance)
        models = {}
        for name in ("trend", "predicted"):
            path = out / f"tdl_{name}_{tag}.csv"
            if not path.exists():
                raise StageError(f"ber: {path.name} not found; run 'tdl' first")
            models[name] = fileio.read_tdl_csv(path, config.dsp.tdl_threshold_db)
        per_distance = replace(
            config.ber,
            rng_seed=derive_seed(config.ber.rng_seed, float_token(distance)),
        )
        comparison = ber_compare(models["trend"], models["predicted"], per_distance)
        for name, curve in (("trend", comparison.curve_a), ("predicted", comparison.curve_b)):
            filename = f"ber_{name}_{tag}.csv"
            fileio.write_ber_csv(out / filename, curve)
            outputs.append(filename)
    return outputs


def _tap_table(model: TdlModel) -> dict[int, float]:
    return {round(d * 1e12): p for d, p in model.taps}


def _pair_metrics(reference: TdlModel, candidate: TdlModel) -> dict:
    """RMSE/R^2 over tap powers in bins both models kept, plus the
    union-normalized average tap error."""
    ref_taps = _tap_table(reference)
    cand_taps = _tap_table(candidate)
    shared = sorted(set(ref_taps) & set(cand_taps))
    ref_powers = [ref_taps[k] for k in shared]
    cand_powers = [cand_taps[k] for k in shared]
    rmse_db = metrics.rmse(ref_powers, cand_powers) if shared else None
    r_squared = None
    if len(shared) >= 2:
        try:
            r_squared = metrics.r_squared(ref_powers, cand_powers)
        except Exception:
            r_squared = None
    return {
        "rmse_db": rmse_db,
        "r_squared": r_squared,
        "average_tap_error": metrics.average_tap_error(reference, candidate),
        "shared_taps": len(shared),
    }


def _ber_gap(curve_a, curve_b) -> float | None:
    gap = None
    for pa, pb in zip(curve_a.points, curve_b.points):
        floor = 10.0 / pa.bits
        if pa.ber >= floor and pb.ber >= floor:
            g = abs(math.log10(pa.ber) - math.log10(pb.ber))
            gap = g if gap is None else max(gap, g)
    return gap


def run_evaluate(config: ExperimentConfig, out: Path) -> dict:
    """Consolidated report over all test distances; returns the report dict.

    Per distance: the three TDL models (measured, measured-trend, predicted)
    are compared pairwise with RMSE/R^2 over shared tap powers and the
    average tap error; CTF-domain RMSE/R^2 and the worst log10-BER gap are
    reported alongside.
    """
    dataset, _ = _read_dataset(out, "evaluate")
    predictions = _read_predicted(out, dataset.grid, "evaluate")
    per_distance: dict[str, dict] = {}
    outputs = []
    for distance in sorted(dataset.test_distances_m):
        tag = distance_tag(distance)
        models = {}
        for name in ("measured", "trend", "predicted"):
            path = out / f"tdl_{name}_{tag}.csv"
            if not path.exists():
                raise StageError(f"evaluate: {path.name} not found; run 'tdl' first")
            models[name] = fileio.read_tdl_csv(path, config.dsp.tdl_threshold_db)
        curves = {}
        for name in ("trend", "predicted"):
            path = out / f"ber_{name}_{tag}.csv"
            if not path.exists():
                raise StageError(f"evaluate: {path.name} not found; run 'ber' first")
            curves[name] = fileio.read_ber_csv(path)
        measured_gain = dataset.record_for(distance).gain_db
        predicted_gain = predictions[distance]

        compare_name = f"ctf_compare_{tag}.csv"
        handle, writer = fileio.open_csv_writer(out / compare_name)
        with handle:
            writer.writerow(["freq_hz", "measured_db", "predicted_db"])
            for f, m, p in zip(dataset.grid.frequencies_hz, measured_gain, predicted_gain):
                writer.writerow([fileio.fmt(f), fileio.fmt(m), fileio.fmt(p)])
        outputs.append(compare_name)

        per_distance[f"{distance:g}"] = {
            "distance_m": distance,
            "ctf": {
                "rmse_db": metrics.rmse(measured_gain, predicted_gain),
                "r_squared": metrics.r_squared(measured_gain, predicted_gain),
            },
            "tdl": {
                "measured_vs_trend": _pair_metrics(models["measured"], models["trend"]),
                "measured_vs_predicted": _pair_metrics(
                    models["measured"], models["predicted"]
                ),
                "trend_vs_predicted": _pair_metrics(models["trend"], models["predicted"]),
            },
            "tap_counts": {name: m.n_taps for name, m in models.items()},
            "rms_delay_spread_ns": {
                name: dsp.rms_delay_spread(m) * 1e9 for name, m in models.items()
            },
            "ber_max_log10_gap": _ber_gap(curves["trend"], curves["predicted"]),
        }

    report = {
        "format": fileio.REPORT_FORMAT,
        "version": fileio.FORMAT_VERSION,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "distances": per_distance,
    }
    fileio.write_json(out / "report.json", report)
    (out / "report.txt").write_text(render_report_text(report), encoding="utf-8")
    outputs.extend(["report.json", "report.txt"])
    return report


def render_report_text(report: dict) -> str:
    lines = []
    header = f"{'comparison':<24}"
    distances = list(report["distances"].items())
    for key, _ in distances:
        header += f"{key + ' m RMSE':>14}{key + ' m R2':>12}"
    lines.append(header)
    for row_key, row_name in (
        ("measured_vs_trend", "measured vs trend"),
        ("measured_vs_predicted", "measured vs predicted"),
        ("trend_vs_predicted", "trend vs predicted"),
    ):
        line = f"{row_name:<24}"
        for _, entry in distances:
            pair = entry["tdl"][row_key]
            rmse_txt = "n/a" if pair["rmse_db"] is None else f"{pair['rmse_db']:.2f}"
            r2_txt = "n/a" if pair["r_squared"] is None else f"{pair['r_squared']:.3f}"
            line += f"{rmse_txt:>14}{r2_txt:>12}"
        lines.append(line)
    lines.append("")
    for key, entry in distances:
        tap_err = entry["tdl"]["trend_vs_predicted"]["average_tap_error"]
        gap = entry["ber_max_log10_gap"]
        gap_txt = "n/a" if gap is None else f"{gap:.3f}"
        lines.append(
            f"d = {key} m: tap error (trend vs predicted) = {tap_err:.4f}, "
            f"max |log10 BER gap| = {gap_txt}"
        )
    return "\n".join(lines) + "\n"


def _stage_evaluate(config: ExperimentConfig, out: Path) -> list[str]:
    run_evaluate(config, out)
    outputs = ["report.json", "report.txt"]
    outputs.extend(
        f"ctf_compare_{distance_tag(d)}.csv" for d in sorted(config.test_distances_m)
    )
    return outputs


_STAGE_FUNCTIONS = {
    "synth": _stage_synth,
    "train": _stage_train,
    "predict": _stage_predict,
    "pdp": _stage_pdp,
    "tdl": _stage_tdl,
    "ber": _stage_ber,
    "evaluate": _stage_evaluate,
}


@dataclass(frozen=True)
class StageOutcome:
    stage: str
    skipped: bool
    outputs: tuple[str, ...]


def _execute_stage(
    config: ExperimentConfig, out: Path, stage: str, stage_hash: str
) -> StageOutcome:
    try:
        outputs = _STAGE_FUNCTIONS[stage](config, out)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(f"stage '{stage}' failed: {exc}") from exc
    _write_stamp(out, stage, stage_hash, outputs)
    return StageOutcome(stage=stage, skipped=False, outputs=tuple(outputs))


def run_pipeline(
    config: ExperimentConfig, out_dir=None, force: bool = False
) -> list[StageOutcome]:
    """All seven stages in order, skipping any whose stamp is current."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    hashes = plan_hashes(config)
    outcomes = []
    with directory_lock(out):
        for stage in STAGE_ORDER:
            if not force and stage_is_fresh(out, stage, hashes[stage]):
                stamp = fileio.read_json(_stamp_path(out, stage))
                outcomes.append(
                    StageOutcome(stage, True, tuple(sorted(stamp.get("outputs", {}))))
                )
                continue
            outcomes.append(_execute_stage(config, out, stage, hashes[stage]))
    return outcomes


def run_single_stage(
    config: ExperimentConfig, stage: str, out_dir=None, force: bool = False
) -> StageOutcome:
    """One stage on its own; upstream stages must already be current."""
    if stage not in STAGE_ORDER:
        raise ValidationError(f"unknown stage {stage!r}")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    hashes = plan_hashes(config)
    with directory_lock(out):
        for dep in STAGE_DEPS[stage]:
            if not stage_is_fresh(out, dep, hashes[dep]):
                raise StageError(
                    f"stage '{stage}' needs up-to-date '{dep}' outputs in {out}; "
                    f"run '{dep}' (or the full pipeline) first"
                )
        if not force and stage_is_fresh(out, stage, hashes[stage]):
            stamp = fileio.read_json(_stamp_path(out, stage))
            return StageOutcome(stage, True, tuple(sorted(stamp.get("outputs", {}))))
        return _execute_stage(config, out, stage, hashes[stage])
