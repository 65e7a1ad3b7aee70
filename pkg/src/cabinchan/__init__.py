"""Synthetic intra-vehicle mmWave channel toolkit.

Generate clustered-multipath channel transfer functions, train a from-scratch
two-layer LSTM to predict channel gain at unmeasured distances, derive power
delay profiles and tapped-delay-line models, and compare channels through
Monte Carlo BER simulation.
"""

from .ber import (
    BerComparison,
    BerConfig,
    BerCurve,
    BerPoint,
    awgn_bpsk_ber,
    ber_compare,
    simulate_ber,
    tdl_to_fir,
)
from .dsp import (
    TrendSpec,
    WindowSpec,
    cir_to_ctf,
    cir_to_pdp,
    ctf_to_cir,
    extract_tdl,
    extract_trend,
    minimum_phase_reconstruct,
    rms_delay_spread,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    StageError,
    TrainingError,
    ValidationError,
)
from .experiment import ExperimentConfig, run_evaluate, run_pipeline, run_single_stage
from .lstm import (
    LstmLayerParams,
    ModelParams,
    Normalization,
    TrainConfig,
    TrainReport,
    WindowSet,
    adam_step,
    backward,
    build_windows,
    forward,
    lstm_cell_step,
    predict_ctf,
    train,
)
from .metrics import average_tap_error, r_squared, rmse
from .rng import Xoshiro256StarStar, derive_seed, float_token, label_token
from .synth import SynthParams, generate_ctf, generate_dataset
from .tuner import TuneGrid, TuneRecord, TuneResult, tune
from .types import (
    ChannelDataset,
    Cir,
    CtfRecord,
    DEFAULT_TEST_DISTANCES_M,
    DEFAULT_TRAIN_DISTANCES_M,
    FrequencyGrid,
    Pdp,
    SPEED_OF_LIGHT_M_S,
    TdlModel,
    default_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BerComparison", "BerConfig", "BerCurve", "BerPoint", "ChannelDataset",
    "Cir", "ConfigurationError", "CtfRecord", "DEFAULT_TEST_DISTANCES_M",
    "DEFAULT_TRAIN_DISTANCES_M", "DimensionError", "DomainError",
    "ExperimentConfig", "FrequencyGrid", "LstmLayerParams", "ModelParams",
    "Normalization", "Pdp", "SPEED_OF_LIGHT_M_S", "StageError", "SynthParams",
    "TdlModel", "TrainConfig", "TrainReport", "TrainingError", "TrendSpec",
    "TuneGrid", "TuneRecord", "TuneResult", "ValidationError", "WindowSet",
    "WindowSpec", "Xoshiro256StarStar", "adam_step", "average_tap_error",
    "awgn_bpsk_ber", "backward", "ber_compare", "build_windows", "cir_to_ctf",
    "cir_to_pdp", "ctf_to_cir", "default_grid", "derive_seed", "extract_tdl",
    "extract_trend", "float_token", "forward", "generate_ctf",
    "generate_dataset", "label_token", "lstm_cell_step",
    "minimum_phase_reconstruct", "predict_ctf", "r_squared", "rmse",
    "rms_delay_spread", "run_evaluate", "run_pipeline", "run_single_stage",
    "simulate_ber", "tdl_to_fir", "train", "tune",
]
