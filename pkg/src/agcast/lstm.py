"""From-scratch LSTM forecaster trained by backpropagation through time.

The memory cell follows the standard gate equations

    i_t = sigmoid(w_i [h_{t-1}, x_t] + b_i)
    f_t = sigmoid(w_f [h_{t-1}, x_t] + b_f)
    o_t = sigmoid(w_o [h_{t-1}, x_t] + b_o)
    c~_t = tanh(w_c [h_{t-1}, x_t] + b_c)
    c_t = f_t * c_{t-1} + i_t * c~_t
    h_t = o_t * tanh(c_t)

and a linear head maps the final hidden state to all horizon steps at once
(direct multi-step forecasting). Training minimizes mean squared error in
min-max-scaled space with Adam updates and per-parameter gradient clipping.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    InsufficientHistoryError,
    InvalidConfigError,
    NonFiniteLossError,
)
from .preprocess import ScalerParams, inverse_minmax, transform_minmax

GATES = ("i", "f", "o", "c")


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmCellParams:
    """Gate weights (hidden x (hidden + input)) and biases (hidden)."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_c: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[1] - self.w_i.shape[0]


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray


def cell_forward(params: LstmCellParams, x_t, prev: LstmState):
    """One step of the memory cell on 1-D vectors.

    Returns the next state and the gate activations
    {"i": i_t, "f": f_t, "o": o_t, "c_tilde": c~_t}.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim != 1 or x_t.shape[0] != params.input_size:
        raise DimensionMismatchError(
            f"expected input of length {params.input_size}, got shape {x_t.shape}"
        )
    if prev.h.shape[0] != params.hidden_size:
        raise DimensionMismatchError("previous state disagrees with hidden size")
    z = np.concatenate([prev.h, x_t])
    i = sigmoid(params.w_i @ z + params.b_i)
    f = sigmoid(params.w_f @ z + params.b_f)
    o = sigmoid(params.w_o @ z + params.b_o)
    c_tilde = np.tanh(params.w_c @ z + params.b_c)
    c = f * prev.c + i * c_tilde
    h = o * np.tanh(c)
    return LstmState(h=h, c=c), {"i": i, "f": f, "o": o, "c_tilde": c_tilde}


def init_parameters(hidden_size: int, input_size: int, output_size: int,
                    rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights; forget bias 1."""
    k_gate = 1.0 / np.sqrt(hidden_size + input_size)
    k_head = 1.0 / np.sqrt(hidden_size)
    params: dict[str, np.ndarray] = {}
    for g in GATES:
        params[f"w_{g}"] = rng.uniform(-k_gate, k_gate,
                                       (hidden_size, hidden_size + input_size))
    params["b_i"] = np.zeros(hidden_size)
    params["b_f"] = np.ones(hidden_size)
    params["b_o"] = np.zeros(hidden_size)
    params["b_c"] = np.zeros(hidden_size)
    params["w_head"] = rng.uniform(-k_head, k_head, (output_size, hidden_size))
    params["b_head"] = np.zeros(output_size)
    return params


def params_view(params: dict[str, np.ndarray]) -> LstmCellParams:
    return LstmCellParams(**{k: params[k] for k in
                             ("w_i", "w_f", "w_o", "w_c", "b_i", "b_f", "b_o", "b_c")})


def forward_batch(params: dict[str, np.ndarray], windows: np.ndarray):
    """Unroll the cell over (n, L, F) windows from a zero initial state.

    Returns (predictions (n, H_out), cache) where the cache holds per-step
    activations for the backward pass.
    """
    n, L, F = windows.shape
    H = params["w_i"].shape[0]
    h = np.zeros((n, H))
    c = np.zeros((n, H))
    steps = []
    for t in range(L):
        z = np.concatenate([h, windows[:, t, :]], axis=1)
        i = sigmoid(z @ params["w_i"].T + params["b_i"])
        f = sigmoid(z @ params["w_f"].T + params["b_f"])
        o = sigmoid(z @ params["w_o"].T + params["b_o"])
        c_tilde = np.tanh(z @ params["w_c"].T + params["b_c"])
        c_prev = c
        c = f * c_prev + i * c_tilde
        tanh_c = np.tanh(c)
        h = o * tanh_c
        steps.append({"z": z, "i": i, "f": f, "o": o, "c_tilde": c_tilde,
                      "c_prev": c_prev, "tanh_c": tanh_c})
    pred = h @ params["w_head"].T + params["b_head"]
    return pred, {"steps": steps, "h_last": h}


def backward_batch(params: dict[str, np.ndarray], cache, d_pred: np.ndarray
                   ) -> dict[str, np.ndarray]:
    """BPTT through every unrolled step; returns gradients keyed like params."""
    H = params["w_i"].shape[0]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["w_head"] = d_pred.T @ cache["h_last"]
    grads["b_head"] = d_pred.sum(axis=0)
    dh = d_pred @ params["w_head"]
    dc = np.zeros((d_pred.shape[0], H))
    for step in reversed(cache["steps"]):
        i, f, o = step["i"], step["f"], step["o"]
        c_tilde, tanh_c, z = step["c_tilde"], step["tanh_c"], step["z"]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        d_act = {
            "i": dc * c_tilde * i * (1.0 - i),
            "f": dc * step["c_prev"] * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "c": dc * i * (1.0 - c_tilde ** 2),
        }
        dz = np.zeros_like(z)
        for g in GATES:
            grads[f"w_{g}"] += d_act[g].T @ z
            grads[f"b_{g}"] += d_act[g].sum(axis=0)
            dz += d_act[g] @ params[f"w_{g}"]
        dh = dz[:, :H]
        dc = dc * f
    return grads


def mse_loss_and_grad(pred: np.ndarray, targets: np.ndarray):
    diff = pred - targets
    loss = float(np.mean(diff ** 2))
    return loss, 2.0 * diff / diff.size


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    """Scale each parameter's gradient to at most `max_norm` in L2 norm."""
    if max_norm is None or max_norm <= 0:
        return
    for g in grads.values():
        norm = float(np.linalg.norm(g))
        if norm > max_norm:
            g *= max_norm / norm


class AdamOptimizer:
    """Adam with bias correction, applied in a fixed parameter order."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for key in params:
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / b1t
            v_hat = self.v[key] / b2t
            params[key] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class ForecastResult:
    """One model variant's fitted history, future path, and test error."""

    variant: str
    history_fit: np.ndarray
    forecast: np.ndarray
    rmse_scaled: float


def write_variant_forecast_csv(path, months, results: list[ForecastResult]) -> None:
    """Long-format export: month,variant,predicted_production.

    `months` are the future months the forecasts cover; every result's
    forecast must have that length.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month", "variant", "predicted_production"])
        for result in results:
            if len(result.forecast) != len(months):
                raise DimensionMismatchError(
                    f"variant {result.variant!r} forecast length "
                    f"{len(result.forecast)} != {len(months)} months"
                )
            for m, value in zip(months, result.forecast):
                writer.writerow([m.isoformat(), result.variant,
                                 repr(float(value))])


class LstmForecaster(BaseEstimator):
    """Direct multi-step LSTM regressor over sliding windows.

    fit() takes raw-unit windows X of shape (n, lookback, n_features) and
    targets y of shape (n, horizon). Features and targets are min-max
    scaled internally (constant columns tolerated), so predictions come
    back in raw units. Deterministic for a fixed seed, config, and data.
    """

    def __init__(self, lookback: int = 60, horizon: int = 30,
                 hidden_size: int = 64, epochs: int = 150,
                 learning_rate: float = 1e-3, batch_size: int | None = None,
                 seed: int = 0, gradient_clip: float = 5.0):
        self.lookback = lookback
        self.horizon = horizon
        self.hidden_size = hidden_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.gradient_clip = gradient_clip

    # --- scaling helpers ---

    def _fit_scalers(self, X: np.ndarray, y: np.ndarray) -> None:
        scalers = []
        for j in range(X.shape[2]):
            lo = float(np.min(X[:, :, j]))
            hi = float(np.max(X[:, :, j]))
            if hi == lo:
                hi = lo + 1.0
            scalers.append(ScalerParams(lo, hi))
        self.feature_scalers_ = scalers
        lo, hi = float(np.min(y)), float(np.max(y))
        if hi == lo:
            hi = lo + 1.0
        self.target_scaler_ = ScalerParams(lo, hi)

    def _scale_windows(self, X: np.ndarray) -> np.ndarray:
        out = np.empty_like(X, dtype=np.float64)
        for j, p in enumerate(self.feature_scalers_):
            out[:, :, j] = transform_minmax(X[:, :, j], p)
        return out

    def _check_windows(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise DimensionMismatchError(f"windows must be 3-D, got shape {X.shape}")
        if X.shape[1] != self.lookback:
            raise DimensionMismatchError(
                f"windows have {X.shape[1]} steps, expected lookback {self.lookback}"
            )
        if hasattr(self, "n_features_in_") and X.shape[2] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted with {self.n_features_in_} features, got {X.shape[2]}"
            )
        return X

    # --- training ---

    def fit(self, X, y):
        if self.epochs < 0 or self.learning_rate < 0:
            raise InvalidConfigError("epochs and learning_rate must be non-negative")
        if self.lookback < 1 or self.horizon < 1 or self.hidden_size < 1:
            raise InvalidConfigError("lookback, horizon, hidden_size must be >= 1")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 3 or X.shape[0] == 0:
            raise EmptyDatasetError("need at least one training window")
        if X.shape[1] != self.lookback or y.shape != (X.shape[0], self.horizon):
            raise DimensionMismatchError(
                f"expected X (n, {self.lookback}, F) and y (n, {self.horizon}), "
                f"got {X.shape} and {y.shape}"
            )
        self.n_features_in_ = X.shape[2]
        self._fit_scalers(X, y)
        Xs = self._scale_windows(X)
        ys = transform_minmax(y, self.target_scaler_)

        rng = np.random.default_rng(self.seed)
        params = init_parameters(self.hidden_size, self.n_features_in_,
                                 self.horizon, rng)
        optimizer = AdamOptimizer(params, self.learning_rate)
        n = Xs.shape[0]
        batch = n if self.batch_size is None else min(self.batch_size, n)
        trace = []
        for _ in range(self.epochs):
            if batch >= n:
                order = np.arange(n)
            else:
                order = rng.permutation(n)
            epoch_loss = 0.0
            seen = 0
            for start in range(0, n, batch):
                rows = order[start:start + batch]
                pred, cache = forward_batch(params, Xs[rows])
                loss, d_pred = mse_loss_and_grad(pred, ys[rows])
                if not np.isfinite(loss):
                    raise NonFiniteLossError(f"training loss became {loss}")
                grads = backward_batch(params, cache, d_pred)
                clip_gradients(grads, self.gradient_clip)
                optimizer.step(params, grads)
                epoch_loss += loss * len(rows)
                seen += len(rows)
            trace.append(epoch_loss / seen)
        self.params_ = params
        self.loss_trace_ = trace
        return self

    # --- inference ---

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("forecaster is not fitted; call fit first")

    def predict_scaled(self, X) -> np.ndarray:
        """Predictions in the scaled [0, 1] target space."""
        self._check_fitted()
        X = self._check_windows(X)
        pred, _ = forward_batch(self.params_, self._scale_windows(X))
        return pred

    def predict(self, X) -> np.ndarray:
        """Predictions in raw target units, shape (n, horizon)."""
        return inverse_minmax(self.predict_scaled(X), self.target_scaler_)

    def rmse_scaled(self, X, y) -> float:
        """Root mean squared error against raw targets, in scaled space."""
        pred = self.predict_scaled(X)
        truth = transform_minmax(np.asarray(y, dtype=np.float64), self.target_scaler_)
        if pred.shape != truth.shape:
            raise DimensionMismatchError("targets disagree with prediction shape")
        return float(np.sqrt(np.mean((pred - truth) ** 2)))

    def forecast(self, tail) -> np.ndarray:
        """Forecast `horizon` steps from the last `lookback` rows of history."""
        self._check_fitted()
        tail = np.asarray(tail, dtype=np.float64)
        if tail.ndim != 2 or tail.shape[0] < self.lookback:
            raise InsufficientHistoryError(
                f"need the last {self.lookback} rows, got shape {tail.shape}"
            )
        window = tail[-self.lookback:]
        return self.predict(window[np.newaxis])[0]

    # --- persistence ---

    def to_json_dict(self) -> dict:
        self._check_fitted()
        return {
            "format": "lstm_forecaster",
            "version": 1,
            "params": self.get_params(),
            "n_features_in_": self.n_features_in_,
            "weights": {k: v.tolist() for k, v in self.params_.items()},
            "feature_scalers_": [[p.x_min, p.x_max] for p in self.feature_scalers_],
            "target_scaler_": [self.target_scaler_.x_min, self.target_scaler_.x_max],
            "loss_trace_": list(getattr(self, "loss_trace_", [])),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "LstmForecaster":
        if data.get("format") != "lstm_forecaster" or data.get("version") != 1:
            raise InvalidConfigError("unsupported forecaster payload")
        model = cls(**data["params"])
        model.n_features_in_ = int(data["n_features_in_"])
        model.params_ = {k: np.array(v) for k, v in data["weights"].items()}
        model.feature_scalers_ = [ScalerParams(a, b) for a, b in data["feature_scalers_"]]
        model.target_scaler_ = ScalerParams(*data["target_scaler_"])
        model.loss_trace_ = list(data["loss_trace_"])
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "LstmForecaster":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))
