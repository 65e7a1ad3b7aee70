"""Command-line front end.

Subcommands mirror the pipeline stages (`synth`, `train`, `predict`, `pdp`,
`tdl`, `ber`, `evaluate`), plus `tune` for the hyperparameter sweep and `run`
for the whole pipeline.  Every subcommand takes `--config <file>` (JSON,
versioned, defaults layered underneath), `--out <dir>`, and `--seed`;
stage-specific flags override the corresponding config entries.

Exit codes: 0 success, 1 invalid configuration or input, 2 stage failure,
3 threshold failure under `evaluate --strict`.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio, tuner
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    StageError,
    TrainingError,
    ValidationError,
)
from .experiment import (
    DEFAULT_MAX_TAP_ERROR,
    ExperimentConfig,
    run_pipeline,
    run_single_stage,
)
from .rng import derive_seed, label_token

USER_ERRORS = (ValidationError, ConfigurationError, DomainError, DimensionError)


def _comma_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _comma_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _set(doc: dict, section: str, key: str, value) -> None:
    if value is not None:
        doc.setdefault(section, {})[key] = value


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        path = Path(args.config)
        doc = json.loads(path.read_text(encoding="utf-8"))
        base_dir = path.parent
    else:
        doc, base_dir = {}, None
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed

    _set(doc, "train", "epochs", getattr(args, "epochs", None))
    _set(doc, "train", "batch_size", getattr(args, "batch_size", None))
    _set(doc, "train", "window_len", getattr(args, "window_len", None))
    _set(doc, "train", "learning_rate", getattr(args, "lr", None))
    if getattr(args, "shuffle", False):
        _set(doc, "train", "shuffle", True)

    _set(doc, "dsp", "window", getattr(args, "window", None))
    _set(doc, "dsp", "trend_bins", getattr(args, "trend_bins", None))
    _set(doc, "dsp", "floor_db", getattr(args, "floor_db", None))
    _set(doc, "dsp", "tdl_bin_ns", getattr(args, "tdl_bin_ns", None))
    _set(doc, "dsp", "tdl_threshold_db", getattr(args, "tdl_threshold_db", None))

    snr = getattr(args, "snr", None)
    if snr is not None:
        _set(doc, "ber", "snr_db_points", list(snr))
    _set(doc, "ber", "symbols_per_point", getattr(args, "bits", None))
    _set(doc, "ber", "equalizer", getattr(args, "equalizer", None))

    layer1 = getattr(args, "layer1", None)
    if layer1 is not None:
        _set(doc, "tune", "layer1_values", list(layer1))
    layer2 = getattr(args, "layer2", None)
    if layer2 is not None:
        _set(doc, "tune", "layer2_values", list(layer2))
    tune_epochs = getattr(args, "tune_epochs", None)
    if tune_epochs is not None:
        _set(doc, "tune", "epoch_candidates", list(tune_epochs))

    config = ExperimentConfig.from_dict(doc, base_dir=base_dir)
    if getattr(args, "out", None) is not None:
        config = replace(config, out_dir=args.out)
    return config


def _print_outcome(outcome) -> None:
    if outcome.skipped:
        print(f"{outcome.stage}: up to date, skipped")
    else:
        print(f"{outcome.stage}: wrote {', '.join(outcome.outputs)}")


def _stage_command(stage: str):
    def handler(args) -> int:
        config = _load_config(args)
        outcome = run_single_stage(config, stage, config.out_dir, force=args.force)
        _print_outcome(outcome)
        return 0

    return handler


def _cmd_run(args) -> int:
    config = _load_config(args)
    outcomes = run_pipeline(config, config.out_dir, force=args.force)
    for outcome in outcomes:
        _print_outcome(outcome)
    return 0


def _cmd_tune(args) -> int:
    config = _load_config(args)
    out = Path(config.out_dir)
    dataset, _ = fileio.read_dataset(out / "ctf.csv", out / "manifest.json")
    base = replace(
        config.train, rng_seed=derive_seed(config.seed, label_token("tune"))
    )
    grid = tuner.TuneGrid(
        layer1_values=config.tune_layer1_values,
        layer2_values=config.tune_layer2_values,
        epoch_candidates=config.tune_epoch_candidates,
        base_config=base,
    )
    result = tuner.tune(dataset, grid, jobs=args.jobs)
    fileio.write_tune_csv(out / "tune_results.csv", result)
    sel = result.selected
    print(
        f"selected layer1={sel.layer1} layer2={sel.layer2} epochs={sel.epochs} "
        f"(loss_train={sel.loss_train:.6g}, loss_test={sel.loss_test:.6g}, "
        f"score={sel.score:.6g})"
    )
    print(f"wrote {out / 'tune_results.csv'}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    outcome = run_single_stage(config, "evaluate", config.out_dir, force=args.force)
    _print_outcome(outcome)
    report = fileio.read_json(Path(config.out_dir) / "report.json")
    worst = max(
        entry["tdl"]["trend_vs_predicted"]["average_tap_error"]
        for entry in report["distances"].values()
    )
    print(f"worst tap error (trend vs predicted): {worst:.4f}")
    if args.strict and worst > args.max_tap_error:
        print(
            f"strict check failed: {worst:.4f} > limit {args.max_tap_error}",
            file=sys.stderr,
        )
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cabinchan",
        description="Synthetic mmWave channel pipeline: generate CTFs, train an "
        "LSTM gain predictor, derive PDP/TDL models, and simulate BER.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--out", help="pipeline output directory")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument(
        "--force", action="store_true", help="re-run even if outputs are current"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate the synthetic dataset") \
        .set_defaults(handler=_stage_command("synth"))

    p_train = sub.add_parser("train", parents=[common], help="train the LSTM model")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int, dest="batch_size")
    p_train.add_argument("--window-len", type=int, dest="window_len")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--shuffle", action="store_true")
    p_train.set_defaults(handler=_stage_command("train"))

    p_tune = sub.add_parser("tune", parents=[common], help="hyperparameter grid search")
    p_tune.add_argument("--layer1", type=_comma_ints, help="comma list, e.g. 20,60,100")
    p_tune.add_argument("--layer2", type=_comma_ints)
    p_tune.add_argument(
        "--epochs", type=_comma_ints, dest="tune_epochs", help="epoch candidates"
    )
    p_tune.add_argument("--jobs", type=int, default=1)
    p_tune.set_defaults(handler=_cmd_tune)

    sub.add_parser("predict", parents=[common], help="predict CTFs at test distances") \
        .set_defaults(handler=_stage_command("predict"))

    p_pdp = sub.add_parser("pdp", parents=[common], help="derive power delay profiles")
    p_pdp.add_argument("--window", choices=("rectangular", "hann"))
    p_pdp.add_argument("--trend-bins", type=int, dest="trend_bins")
    p_pdp.add_argument("--floor-db", type=float, dest="floor_db")
    p_pdp.set_defaults(handler=_stage_command("pdp"))

    p_tdl = sub.add_parser("tdl", parents=[common], help="extract TDL tap models")
    p_tdl.add_argument("--tdl-bin-ns", type=float, dest="tdl_bin_ns")
    p_tdl.add_argument("--tdl-threshold-db", type=float, dest="tdl_threshold_db")
    p_tdl.set_defaults(handler=_stage_command("tdl"))

    p_ber = sub.add_parser("ber", parents=[common], help="Monte Carlo BER simulation")
    p_ber.add_argument("--snr", type=_comma_floats, help="comma list of SNR dB points")
    p_ber.add_argument("--bits", type=int, help="symbols per SNR point")
    p_ber.add_argument(
        "--equalizer", choices=("none", "zero-forcing-linear", "mmse-linear")
    )
    p_ber.set_defaults(handler=_stage_command("ber"))

    p_eval = sub.add_parser("evaluate", parents=[common], help="write the report")
    p_eval.add_argument(
        "--strict", action="store_true",
        help="exit 3 if the tap error exceeds the limit",
    )
    p_eval.add_argument("--max-tap-error", type=float, default=DEFAULT_MAX_TAP_ERROR)
    p_eval.set_defaults(handler=_cmd_evaluate)

    sub.add_parser("run", parents=[common], help="run the full pipeline") \
        .set_defaults(handler=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StageError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
