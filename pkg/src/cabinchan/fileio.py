"""Serialization of every artifact the pipeline reads or writes.

All tabular data is plain CSV with fixed headers; floats are written with
repr-style shortest exact decimals so every file round-trips bit-for-bit.
Structured documents (dataset manifest, model file, experiment report) are
versioned JSON written canonically (sorted keys, fixed indentation, trailing
newline) so identical content yields identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .ber import BerCurve, BerPoint
from .errors import ValidationError
from .lstm import (
    GATE_ORDER,
    LstmLayerParams,
    ModelParams,
    Normalization,
    TrainReport,
)
from .synth import SynthParams
from .tuner import TuneResult
from .types import ChannelDataset, CtfRecord, FrequencyGrid, Pdp, TdlModel

DATASET_FORMAT = "cabinchan-dataset"
MODEL_FORMAT = "cabinchan-model"
REPORT_FORMAT = "cabinchan-report"
FORMAT_VERSION = 1


def fmt(x: float) -> str:
    """Shortest decimal that parses back to exactly the same float."""
    return repr(float(x))


def write_json(path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _check_header(path, row: list[str], expected: list[str]) -> None:
    if row != expected:
        raise ValidationError(
            f"{path}: expected header {','.join(expected)!r}, got {','.join(row)!r}"
        )


def open_csv_writer(path):
    handle = open(path, "w", encoding="utf-8", newline="")
    return handle, csv.writer(handle, lineterminator="\n")


# ---------------------------------------------------------------- CTF CSV

CTF_HEADER = ["distance_m", "freq_hz", "gain_db"]


def write_ctf_csv(path, records) -> None:
    """Rows sorted by (distance, frequency), one row per sample."""
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(CTF_HEADER)
        for rec in sorted(records, key=lambda r: r.distance_m):
            freqs = rec.grid.frequencies_hz
            for f, g in zip(freqs, rec.gain_db):
                writer.writerow([fmt(rec.distance_m), fmt(f), fmt(g)])


def read_ctf_csv(path) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Raw CSV content: distance -> (freqs_hz, gain_db), in file order."""
    groups: dict[float, tuple[list[float], list[float]]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        _check_header(path, next(reader, []), CTF_HEADER)
        for row in reader:
            if not row:
                continue
            d, f, g = (float(v) for v in row)
            freqs, gains = groups.setdefault(d, ([], []))
            freqs.append(f)
            gains.append(g)
    return {d: (np.array(f), np.array(g)) for d, (f, g) in groups.items()}


def write_dataset_manifest(path, dataset: ChannelDataset, params: SynthParams) -> None:
    write_json(
        path,
        {
            "format": DATASET_FORMAT,
            "version": FORMAT_VERSION,
            "grid": {
                "f_start_hz": dataset.grid.f_start_hz,
                "f_stop_hz": dataset.grid.f_stop_hz,
                "f_step_hz": dataset.grid.f_step_hz,
            },
            "train_distances_m": list(dataset.train_distances_m),
            "test_distances_m": list(dataset.test_distances_m),
            "synth_params": {
                "pathloss_exponent": params.pathloss_exponent,
                "ref_loss_db_at_1m": params.ref_loss_db_at_1m,
                "rician_k_db_at_1m": params.rician_k_db_at_1m,
                "k_decay_db_per_m": params.k_decay_db_per_m,
                "cluster_rate_per_ns": params.cluster_rate_per_ns,
                "ray_rate_per_ns": params.ray_rate_per_ns,
                "cluster_decay_ns": params.cluster_decay_ns,
                "ray_decay_ns": params.ray_decay_ns,
                "max_excess_delay_ns": params.max_excess_delay_ns,
                "noise_floor_db": params.noise_floor_db,
                "rng_seed": params.rng_seed,
            },
        },
    )


def read_dataset_manifest(path) -> tuple[FrequencyGrid, list[float], list[float], SynthParams]:
    doc = read_json(path)
    if doc.get("format") != DATASET_FORMAT or doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: not a version-{FORMAT_VERSION} dataset manifest")
    grid = FrequencyGrid(**doc["grid"])
    params = SynthParams(**doc["synth_params"])
    return grid, list(doc["train_distances_m"]), list(doc["test_distances_m"]), params


def read_dataset(csv_path, manifest_path) -> tuple[ChannelDataset, SynthParams]:
    """Reassemble a ChannelDataset (magnitude-only records) from disk."""
    grid, train, test, params = read_dataset_manifest(manifest_path)
    groups = read_ctf_csv(csv_path)
    records = []
    for distance in sorted(train + test):
        if distance not in groups:
            raise ValidationError(f"{csv_path}: no rows for distance {distance} m")
        freqs, gains = groups[distance]
        if freqs.shape[0] != grid.n_points:
            raise ValidationError(
                f"{csv_path}: distance {distance} m has {freqs.shape[0]} rows, "
                f"grid needs {grid.n_points}"
            )
        if np.max(np.abs(freqs - grid.frequencies_hz)) > 1e-3:
            raise ValidationError(
                f"{csv_path}: frequencies for distance {distance} m do not match "
                "the manifest grid"
            )
        records.append(CtfRecord(distance_m=distance, grid=grid, gain_db=gains))
    dataset = ChannelDataset(
        records=tuple(records),
        train_distances_m=tuple(train),
        test_distances_m=tuple(test),
    )
    return dataset, params


# ---------------------------------------------------------------- PDP CSV

PDP_HEADER = ["delay_ns", "power_db", "trend_db"]


def write_pdp_csv(path, pdp: Pdp, trend: Pdp) -> None:
    if trend.n_bins != pdp.n_bins:
        raise ValidationError("profile and trend must share the delay grid")
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(PDP_HEADER)
        delays_ns = pdp.delays_s * 1e9
        for d, p, t in zip(delays_ns, pdp.power_db, trend.power_db):
            writer.writerow([fmt(d), fmt(p), fmt(t)])


def read_pdp_csv(path, noise_floor_db: float) -> tuple[Pdp, Pdp]:
    delays, power, trend = [], [], []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        _check_header(path, next(reader, []), PDP_HEADER)
        for row in reader:
            if not row:
                continue
            delays.append(float(row[0]))
            power.append(float(row[1]))
            trend.append(float(row[2]))
    if len(delays) < 2:
        raise ValidationError(f"{path}: a PDP needs at least two delay bins")
    step_s = (delays[1] - delays[0]) * 1e-9
    return (
        Pdp(delay_step_s=step_s, power_db=np.array(power), noise_floor_db=noise_floor_db),
        Pdp(delay_step_s=step_s, power_db=np.array(trend), noise_floor_db=noise_floor_db),
    )


# ---------------------------------------------------------------- TDL CSV

TDL_HEADER = ["tap_index", "delay_ns", "power_db"]


def write_tdl_csv(path, tdl: TdlModel) -> None:
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(TDL_HEADER)
        for idx, (delay_s, power_db) in enumerate(tdl.taps):
            writer.writerow([str(idx), fmt(delay_s * 1e9), fmt(power_db)])


def read_tdl_csv(path, threshold_db: float = 25.0) -> TdlModel:
    """The CSV does not carry the extraction threshold; the model is rebuilt
    with the given threshold, widened if the stored taps exceed it."""
    taps = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        _check_header(path, next(reader, []), TDL_HEADER)
        for row in reader:
            if not row:
                continue
            taps.append((float(row[1]) * 1e-9, float(row[2])))
    if not taps:
        raise ValidationError(f"{path}: TDL file contains no taps")
    powers = [p for _, p in taps]
    spread = max(powers) - min(powers)
    return TdlModel(taps=tuple(taps), threshold_db=max(threshold_db, spread + 1e-9))


# ---------------------------------------------------------------- loss CSV

LOSS_HEADER = ["epoch", "loss_train", "loss_test"]


def write_loss_csv(path, report: TrainReport) -> None:
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(LOSS_HEADER)
        for epoch, (lt, lv) in enumerate(zip(report.loss_train, report.loss_test), start=1):
            writer.writerow([str(epoch), fmt(lt), fmt(lv)])


# ---------------------------------------------------------------- BER CSV

BER_HEADER = ["snr_db", "ber", "errors", "bits"]


def write_ber_csv(path, curve: BerCurve) -> None:
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(BER_HEADER)
        for p in curve.points:
            writer.writerow([fmt(p.snr_db), fmt(p.ber), str(p.errors), str(p.bits)])


def read_ber_csv(path) -> BerCurve:
    points = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        _check_header(path, next(reader, []), BER_HEADER)
        for row in reader:
            if not row:
                continue
            points.append(
                BerPoint(
                    snr_db=float(row[0]),
                    ber=float(row[1]),
                    errors=int(row[2]),
                    bits=int(row[3]),
                )
            )
    return BerCurve(points=tuple(points))


# ---------------------------------------------------------------- tune CSV

TUNE_HEADER = ["layer1", "layer2", "epochs", "loss_train", "loss_test", "score", "status"]


def write_tune_csv(path, result: TuneResult) -> None:
    handle, writer = open_csv_writer(path)
    with handle:
        writer.writerow(TUNE_HEADER)
        for rec in result.records:
            writer.writerow(
                [
                    str(rec.layer1),
                    str(rec.layer2),
                    str(rec.epochs),
                    fmt(rec.loss_train),
                    fmt(rec.loss_test),
                    fmt(rec.score),
                    rec.status,
                ]
            )


# ---------------------------------------------------------------- model file


def _tensor_entry(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "order": "row-major",
        "values": [float(v) for v in np.asarray(a, dtype=np.float64).ravel()],
    }


def _tensor_from_entry(entry: dict, name: str) -> np.ndarray:
    values = np.array(entry["values"], dtype=np.float64)
    shape = tuple(entry["shape"])
    if values.size != int(np.prod(shape)):
        raise ValidationError(f"model tensor {name}: {values.size} values for shape {shape}")
    return values.reshape(shape)


def write_model_json(path, params: ModelParams) -> None:
    tensors: dict[str, dict] = {}
    for layer_name, layer in (("layer1", params.layer1), ("layer2", params.layer2)):
        for gate in GATE_ORDER:
            w, u, b = layer.gate(gate)
            tensors[f"{layer_name}.w_{gate}"] = _tensor_entry(w)
            tensors[f"{layer_name}.u_{gate}"] = _tensor_entry(u)
            tensors[f"{layer_name}.b_{gate}"] = _tensor_entry(b)
    tensors["dense.w"] = _tensor_entry(params.dense_w)
    tensors["dense.b"] = _tensor_entry(params.dense_b)
    write_json(
        path,
        {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "architecture": {
                "input_size": params.input_size,
                "layer1_hidden": params.layer1.hidden_size,
                "layer2_hidden": params.layer2.hidden_size,
            },
            "activation": params.activation,
            "window_len": params.window_len,
            "normalization": {
                "f_min_hz": params.norm.f_min_hz,
                "f_max_hz": params.norm.f_max_hz,
                "d_min_m": params.norm.d_min_m,
                "d_max_m": params.norm.d_max_m,
                "target_mean_db": params.norm.target_mean_db,
                "target_std_db": params.norm.target_std_db,
            },
            "tensors": tensors,
        },
    )


def read_model_json(path) -> ModelParams:
    doc = read_json(path)
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: not a version-{FORMAT_VERSION} model file")
    tensors = doc["tensors"]

    def load(name: str) -> np.ndarray:
        if name not in tensors:
            raise ValidationError(f"{path}: missing tensor {name}")
        return _tensor_from_entry(tensors[name], name)

    def load_layer(layer_name: str) -> LstmLayerParams:
        w = np.vstack([load(f"{layer_name}.w_{gate}") for gate in GATE_ORDER])
        u = np.vstack([load(f"{layer_name}.u_{gate}") for gate in GATE_ORDER])
        b = np.concatenate([load(f"{layer_name}.b_{gate}") for gate in GATE_ORDER])
        return LstmLayerParams(w, u, b)

    params = ModelParams(
        layer1=load_layer("layer1"),
        layer2=load_layer("layer2"),
        dense_w=load("dense.w"),
        dense_b=load("dense.b"),
        norm=Normalization(**doc["normalization"]),
        window_len=int(doc["window_len"]),
        activation=doc["activation"],
    )
    arch = doc["architecture"]
    if (
        arch["input_size"] != params.input_size
        or arch["layer1_hidden"] != params.layer1.hidden_size
        or arch["layer2_hidden"] != params.layer2.hidden_size
    ):
        raise ValidationError(f"{path}: architecture block disagrees with tensors")
    return params
