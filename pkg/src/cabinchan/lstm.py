"""Two-layer LSTM regressor, written from scratch on numpy.

Architecture: layer 1 (hidden 100) unrolled over a sliding window of
(frequency, distance) steps and returning the full sequence, layer 2
(hidden 9) returning only its final step, then a 1-unit dense head.  Gates
use the logistic sigmoid; the cell candidate and the cell-output activation
use ReLU by default (tanh selectable via TrainConfig.activation).

Gradients are hand-derived backpropagation through time for exactly this
wiring; the optimizer is Adam with bias correction and global-norm gradient
clipping.  Every stochastic choice (initialization, optional shuffling) comes
from one xoshiro256** stream, so (seed, dataset, config) reproduces training
bit for bit.

Parameter tensors per layer are stored stacked: w is (4H x D), u is (4H x H),
b is (4H,), with rows grouped by gate in the order input, forget, candidate,
output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
import time

import numpy as np

from .errors import DimensionError, TrainingError, ValidationError
from .types import ChannelDataset, CtfRecord, FrequencyGrid
from .rng import Xoshiro256StarStar

ACTIVATIONS = ("relu", "tanh")

GATE_ORDER = ("input", "forget", "candidate", "output")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to stay overflow-free for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_deriv(pre: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        # Subgradient at exactly 0 is defined as 0.
        return (pre > 0.0).astype(np.float64)
    return 1.0 - out * out


@dataclass(frozen=True)
class LstmLayerParams:
    """Stacked gate tensors of one LSTM layer (gate row order i, f, g, o)."""

    w: np.ndarray
    u: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        u = np.asarray(self.u, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if w.ndim != 2 or u.ndim != 2 or b.ndim != 1:
            raise ValidationError("w and u must be matrices, b a vector")
        if w.shape[0] % 4 != 0:
            raise ValidationError("w must have 4*hidden rows")
        hidden = w.shape[0] // 4
        if u.shape != (4 * hidden, hidden) or b.shape != (4 * hidden,):
            raise ValidationError(
                f"inconsistent layer shapes: w {w.shape}, u {u.shape}, b {b.shape}"
            )
        for name, a in (("w", w), ("u", u), ("b", b)):
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"layer tensor {name} contains non-finite values")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", b)

    @property
    def hidden_size(self) -> int:
        return self.w.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.w.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(w, u, b) views of one gate, by name from GATE_ORDER."""
        idx = GATE_ORDER.index(name)
        h = self.hidden_size
        rows = slice(idx * h, (idx + 1) * h)
        return self.w[rows], self.u[rows], self.b[rows]


@dataclass(frozen=True)
class Normalization:
    """Affine input scaling and target standardization, learned on the train
    split and stored with the model so prediction is self-contained."""

    f_min_hz: float
    f_max_hz: float
    d_min_m: float
    d_max_m: float
    target_mean_db: float
    target_std_db: float

    def norm_frequency(self, f_hz) -> np.ndarray:
        span = self.f_max_hz - self.f_min_hz
        if span <= 0:
            return np.zeros_like(np.asarray(f_hz, dtype=np.float64))
        return (np.asarray(f_hz, dtype=np.float64) - self.f_min_hz) / span

    def norm_distance(self, d_m: float) -> float:
        span = self.d_max_m - self.d_min_m
        if span <= 0:
            return 0.0
        return (d_m - self.d_min_m) / span

    def standardize(self, gain_db) -> np.ndarray:
        return (np.asarray(gain_db, dtype=np.float64) - self.target_mean_db) / self.target_std_db

    def destandardize(self, y) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * self.target_std_db + self.target_mean_db


@dataclass(frozen=True)
class ModelParams:
    """Everything needed to predict: both layers, the dense head, the input
    and target normalization, the window length, and the activation kind."""

    layer1: LstmLayerParams
    layer2: LstmLayerParams
    dense_w: np.ndarray
    dense_b: np.ndarray
    norm: Normalization
    window_len: int
    activation: str = "relu"

    def __post_init__(self) -> None:
        dense_w = np.asarray(self.dense_w, dtype=np.float64)
        dense_b = np.asarray(self.dense_b, dtype=np.float64)
        if dense_w.shape != (1, self.layer2.hidden_size):
            raise ValidationError(
                f"dense_w shape {dense_w.shape} does not match hidden size "
                f"{self.layer2.hidden_size}"
            )
        if dense_b.shape != (1,):
            raise ValidationError(f"dense_b must have shape (1,), got {dense_b.shape}")
        if self.layer2.input_size != self.layer1.hidden_size:
            raise ValidationError("layer2 input size must equal layer1 hidden size")
        if self.window_len < 1:
            raise ValidationError("window_len must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}")
        if not (np.all(np.isfinite(dense_w)) and np.all(np.isfinite(dense_b))):
            raise ValidationError("dense tensors contain non-finite values")
        object.__setattr__(self, "dense_w", dense_w)
        object.__setattr__(self, "dense_b", dense_b)

    @property
    def input_size(self) -> int:
        return self.layer1.input_size


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 94
    batch_size: int = 20
    shuffle: bool = False
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    window_len: int = 32
    rng_seed: int = 0
    gradient_clip_norm: float = 5.0
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1 or self.window_len < 1:
            raise ValidationError("batch_size and window_len must be >= 1")
        if not (self.learning_rate > 0):
            raise ValidationError("learning_rate must be positive")
        for beta in (self.adam_beta1, self.adam_beta2):
            if not (0.0 < beta < 1.0):
                raise ValidationError("Adam betas must lie in (0, 1)")
        if not (self.adam_eps > 0):
            raise ValidationError("adam_eps must be positive")
        if not (self.gradient_clip_norm > 0):
            raise ValidationError(
                "gradient_clip_norm must be positive (use math.inf to disable)"
            )
        if not (0 <= self.rng_seed < 2**64):
            raise ValidationError("rng_seed must fit in 64 unsigned bits")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class TrainReport:
    loss_train: tuple[float, ...]
    loss_test: tuple[float, ...]
    params: ModelParams
    wall_time_s: float


@dataclass(frozen=True)
class WindowSet:
    """Supervised samples: one window per (record, frequency index)."""

    train_inputs: np.ndarray  # (N, window_len, 2)
    train_targets: np.ndarray  # (N,) standardized
    test_inputs: np.ndarray
    test_targets: np.ndarray
    norm: Normalization


def compute_normalization(dataset: ChannelDataset) -> Normalization:
    """Input extrema and target moments over the train split only."""
    train = dataset.train_records
    f_min = min(rec.grid.f_start_hz for rec in train)
    f_max = max(rec.grid.f_stop_hz for rec in train)
    gains = np.concatenate([rec.gain_db for rec in train])
    std = float(gains.std())
    return Normalization(
        f_min_hz=f_min,
        f_max_hz=f_max,
        d_min_m=min(dataset.train_distances_m),
        d_max_m=max(dataset.train_distances_m),
        target_mean_db=float(gains.mean()),
        target_std_db=std if std > 0 else 1.0,
    )


def windows_for_grid(
    grid: FrequencyGrid, distance_m: float, window_len: int, norm: Normalization
) -> np.ndarray:
    """Input windows (n_points, window_len, 2) for one distance on a grid.

    The window ending at index i covers indices i-window_len+1 .. i, with
    indices below 0 replaced by index 0 (left padding by repetition).
    """
    if window_len < 1:
        raise ValidationError("window_len must be >= 1")
    f_norm = norm.norm_frequency(grid.frequencies_hz)
    d_norm = norm.norm_distance(distance_m)
    n = grid.n_points
    idx = np.arange(n)[:, None] - (window_len - 1) + np.arange(window_len)[None, :]
    np.clip(idx, 0, None, out=idx)
    x = np.empty((n, window_len, 2), dtype=np.float64)
    x[:, :, 0] = f_norm[idx]
    x[:, :, 1] = d_norm
    return x


def build_windows(dataset: ChannelDataset, window_len: int) -> WindowSet:
    """Sliding-window samples for both splits, ordered by (distance, freq)."""
    norm = compute_normalization(dataset)

    def collect(records) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = [], []
        for rec in records:
            xs.append(windows_for_grid(rec.grid, rec.distance_m, window_len, norm))
            ys.append(norm.standardize(rec.gain_db))
        return np.concatenate(xs, axis=0), np.concatenate(ys)

    train_x, train_y = collect(dataset.train_records)
    test_x, test_y = collect(dataset.test_records)
    return WindowSet(train_x, train_y, test_x, test_y, norm)


def lstm_cell_step(
    params: LstmLayerParams,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    activation: str = "relu",
) -> tuple[np.ndarray, np.ndarray]:
    """One cell update: returns (h, c) for a single time step."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    hidden = params.hidden_size
    if x.shape != (params.input_size,) or h_prev.shape != (hidden,) or c_prev.shape != (hidden,):
        raise DimensionError("cell step received inconsistently shaped inputs")
    z = params.w @ x + params.u @ h_prev + params.b
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden : 2 * hidden])
    g = _act(z[2 * hidden : 3 * hidden], activation)
    o = _sigmoid(z[3 * hidden :])
    c = f * c_prev + i * g
    h = o * _act(c, activation)
    return h, c


def _layer_forward(
    layer: LstmLayerParams, x_seq: np.ndarray, activation: str, need_cache: bool
):
    batch, steps, _ = x_seq.shape
    hidden = layer.hidden_size
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    h_seq = np.empty((batch, steps, hidden))
    cache = [] if need_cache else None
    for t in range(steps):
        x_t = x_seq[:, t, :]
        z = x_t @ layer.w.T + h @ layer.u.T + layer.b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        zg = z[:, 2 * hidden : 3 * hidden]
        g = _act(zg, activation)
        o = _sigmoid(z[:, 3 * hidden :])
        c_new = f * c + i * g
        a = _act(c_new, activation)
        h_new = o * a
        if need_cache:
            cache.append((x_t, h, c, i, f, g, o, zg, c_new, a))
        h, c = h_new, c_new
        h_seq[:, t, :] = h
    return h_seq, cache


def _forward_batch(params: ModelParams, x: np.ndarray, need_cache: bool = False):
    if x.ndim != 3 or x.shape[2] != params.input_size:
        raise DimensionError(f"expected windows of shape (batch, steps, "
                             f"{params.input_size}), got {x.shape}")
    h1_seq, cache1 = _layer_forward(params.layer1, x, params.activation, need_cache)
    h2_seq, cache2 = _layer_forward(params.layer2, h1_seq, params.activation, need_cache)
    h_last = h2_seq[:, -1, :]
    y = h_last @ params.dense_w.T + params.dense_b
    return y[:, 0], (cache1, cache2, h_last)


def forward(params: ModelParams, window: np.ndarray) -> float:
    """Standardized scalar prediction for one input window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DimensionError("window must be (steps, input_size)")
    y, _ = _forward_batch(params, window[None, :, :])
    return float(y[0])


def _layer_backward(
    layer: LstmLayerParams, dh_seq: np.ndarray, cache: list, activation: str
):
    batch, steps, hidden = dh_seq.shape
    dw = np.zeros_like(layer.w)
    du = np.zeros_like(layer.u)
    db = np.zeros_like(layer.b)
    dx_seq = np.zeros((batch, steps, layer.input_size))
    dh_carry = np.zeros((batch, hidden))
    dc_carry = np.zeros((batch, hidden))
    for t in reversed(range(steps)):
        x_t, h_prev, c_prev, i, f, g, o, zg, c, a = cache[t]
        dh = dh_seq[:, t, :] + dh_carry
        do = dh * a
        dc = dh * o * _act_deriv(c, a, activation) + dc_carry
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * _act_deriv(zg, g, activation),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dw += dz.T @ x_t
        du += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx_seq[:, t, :] = dz @ layer.w
        dh_carry = dz @ layer.u
        dc_carry = dc * f
    return dx_seq, dw, du, db


def backward(
    params: ModelParams, windows: np.ndarray, targets: np.ndarray
) -> tuple[dict[str, np.ndarray], float]:
    """Batch MSE loss and its exact gradients for every parameter tensor.

    Loss = mean over the batch of (prediction - target)^2; the gradient keys
    are layer1.w/u/b, layer2.w/u/b, dense.w, dense.b.
    """
    windows = np.asarray(windows, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if windows.ndim != 3 or windows.shape[0] != targets.shape[0]:
        raise DimensionError("batch of windows and targets must align")
    if targets.shape[0] == 0:
        raise DimensionError("batch must be non-empty")
    batch = targets.shape[0]
    y, (cache1, cache2, h_last) = _forward_batch(params, windows, need_cache=True)
    resid = y - targets
    loss = float(np.mean(resid**2))
    dy = (2.0 / batch) * resid
    dense_dw = dy[None, :] @ h_last
    dense_db = np.array([dy.sum()])
    dh_last = dy[:, None] @ params.dense_w
    steps = windows.shape[1]
    dh2_seq = np.zeros((batch, steps, params.layer2.hidden_size))
    dh2_seq[:, -1, :] = dh_last
    dh1_seq, dw2, du2, db2 = _layer_backward(params.layer2, dh2_seq, cache2, params.activation)
    _, dw1, du1, db1 = _layer_backward(params.layer1, dh1_seq, cache1, params.activation)
    grads = {
        "layer1.w": dw1,
        "layer1.u": du1,
        "layer1.b": db1,
        "layer2.w": dw2,
        "layer2.u": du2,
        "layer2.b": db2,
        "dense.w": dense_dw,
        "dense.b": dense_db,
    }
    return grads, loss


def param_arrays(params: ModelParams) -> dict[str, np.ndarray]:
    return {
        "layer1.w": params.layer1.w,
        "layer1.u": params.layer1.u,
        "layer1.b": params.layer1.b,
        "layer2.w": params.layer2.w,
        "layer2.u": params.layer2.u,
        "layer2.b": params.layer2.b,
        "dense.w": params.dense_w,
        "dense.b": params.dense_b,
    }


def _params_from_arrays(template: ModelParams, arrays: dict[str, np.ndarray]) -> ModelParams:
    return replace(
        template,
        layer1=LstmLayerParams(arrays["layer1.w"], arrays["layer1.u"], arrays["layer1.b"]),
        layer2=LstmLayerParams(arrays["layer2.w"], arrays["layer2.u"], arrays["layer2.b"]),
        dense_w=arrays["dense.w"],
        dense_b=arrays["dense.b"],
    )


def clip_gradients(
    grads: dict[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Global-norm clipping over all tensors jointly; returns (grads, norm)."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if math.isfinite(max_norm) and total > max_norm and total > 0.0:
        factor = max_norm / total
        grads = {k: g * factor for k, g in grads.items()}
    return grads, total


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        arrays = param_arrays(params)
        return cls(
            m={k: np.zeros_like(a) for k, a in arrays.items()},
            v={k: np.zeros_like(a) for k, a in arrays.items()},
        )


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[ModelParams, AdamState]:
    """One Adam update (bias-corrected), clipping gradients first."""
    grads, _ = clip_gradients(grads, config.gradient_clip_norm)
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    arrays = param_arrays(params)
    updated = {}
    for key, p in arrays.items():
        g = grads[key]
        state.m[key] = b1 * state.m[key] + (1.0 - b1) * g
        state.v[key] = b2 * state.v[key] + (1.0 - b2) * g * g
        m_hat = state.m[key] / bc1
        v_hat = state.v[key] / bc2
        updated[key] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return _params_from_arrays(params, updated), state


def init_params(
    arch: tuple[int, int],
    norm: Normalization,
    config: TrainConfig,
    rng: Xoshiro256StarStar,
    input_size: int = 2,
) -> ModelParams:
    """Deterministic initialization from the given stream.

    Per layer, gates are drawn in order (input, forget, candidate, output);
    for each gate first w row-major, then u row-major, uniform in
    +-sqrt(6/(fan_in+fan_out)).  Biases start at zero except the forget gate
    at 1.  The dense head is drawn last.
    """

    def draw_matrix(rows: int, cols: int, fan_in: int, fan_out: int) -> np.ndarray:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return np.array(
            [rng.uniform(-limit, limit) for _ in range(rows * cols)], dtype=np.float64
        ).reshape(rows, cols)

    def build_layer(hidden: int, in_size: int) -> LstmLayerParams:
        w_blocks, u_blocks = [], []
        for _ in GATE_ORDER:
            w_blocks.append(draw_matrix(hidden, in_size, in_size, hidden))
            u_blocks.append(draw_matrix(hidden, hidden, hidden, hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # forget gate bias
        return LstmLayerParams(np.vstack(w_blocks), np.vstack(u_blocks), b)

    hidden1, hidden2 = arch
    if hidden1 < 1 or hidden2 < 1:
        raise ValidationError("hidden sizes must be >= 1")
    layer1 = build_layer(hidden1, input_size)
    layer2 = build_layer(hidden2, hidden1)
    dense_w = draw_matrix(1, hidden2, hidden2, 1)
    return ModelParams(
        layer1=layer1,
        layer2=layer2,
        dense_w=dense_w,
        dense_b=np.zeros(1),
        norm=norm,
        window_len=config.window_len,
        activation=config.activation,
    )


def evaluate_loss(params: ModelParams, inputs: np.ndarray, targets: np.ndarray,
                  chunk: int = 1024) -> float:
    """MSE over a sample set without touching parameters."""
    total = 0.0
    n = inputs.shape[0]
    for start in range(0, n, chunk):
        y, _ = _forward_batch(params, inputs[start : start + chunk])
        resid = y - targets[start : start + chunk]
        total += float(np.sum(resid**2))
    return total / n


def train(
    dataset: ChannelDataset,
    arch: tuple[int, int] = (100, 9),
    config: TrainConfig | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Full training loop; see TrainConfig for every knob.

    Per epoch: batches in fixed sample order (or shuffled when enabled),
    forward + BPTT + Adam per batch; loss_train is the mean of the batch
    losses, loss_test the MSE over the whole test split with no update.
    """
    if config is None:
        config = TrainConfig()
    started = time.perf_counter()
    rng = Xoshiro256StarStar(config.rng_seed)
    window_set = build_windows(dataset, config.window_len)
    params = init_params(arch, window_set.norm, config, rng)
    state = AdamState.zeros_like(params)
    n_train = window_set.train_inputs.shape[0]
    order = np.arange(n_train)
    loss_train_hist: list[float] = []
    loss_test_hist: list[float] = []
    for epoch in range(config.epochs):
        if config.shuffle:
            indices = list(range(n_train))
            rng.shuffle(indices)
            order = np.array(indices)
        batch_losses = []
        for start in range(0, n_train, config.batch_size):
            sel = order[start : start + config.batch_size]
            grads, loss = backward(
                params, window_set.train_inputs[sel], window_set.train_targets[sel]
            )
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // config.batch_size}"
                )
            params, state = adam_step(params, grads, state, config)
            batch_losses.append(loss)
        loss_train = float(np.mean(batch_losses))
        loss_test = evaluate_loss(params, window_set.test_inputs, window_set.test_targets)
        if not math.isfinite(loss_test):
            raise TrainingError(f"non-finite test loss at epoch {epoch}")
        loss_train_hist.append(loss_train)
        loss_test_hist.append(loss_test)
    for a in param_arrays(params).values():
        a.setflags(write=False)
    report = TrainReport(
        loss_train=tuple(loss_train_hist),
        loss_test=tuple(loss_test_hist),
        params=params,
        wall_time_s=time.perf_counter() - started,
    )
    return params, report


def predict_ctf(params: ModelParams, distance_m: float, grid: FrequencyGrid) -> CtfRecord:
    """Magnitude-only CTF prediction at any positive distance.

    Frequencies must lie inside the normalization range the model was trained
    on; distances may extrapolate (that is the use case).
    """
    norm = params.norm
    tol = 1e-6 * (norm.f_max_hz - norm.f_min_hz)
    if grid.f_start_hz < norm.f_min_hz - tol or grid.f_stop_hz > norm.f_max_hz + tol:
        raise ValidationError(
            f"grid {grid.f_start_hz / 1e9:.3f}-{grid.f_stop_hz / 1e9:.3f} GHz lies "
            f"outside the trained range {norm.f_min_hz / 1e9:.3f}-"
            f"{norm.f_max_hz / 1e9:.3f} GHz"
        )
    windows = windows_for_grid(grid, distance_m, params.window_len, norm)
    outputs = np.empty(grid.n_points)
    chunk = 1024
    for start in range(0, grid.n_points, chunk):
        y, _ = _forward_batch(params, windows[start : start + chunk])
        outputs[start : start + y.shape[0]] = y
    return CtfRecord(
        distance_m=distance_m, grid=grid, gain_db=norm.destandardize(outputs)
    )
