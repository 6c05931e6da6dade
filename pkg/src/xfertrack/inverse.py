"""Offline inverse modules: exact model inversion and a learned MLP surrogate.

Both map (x(k), y_d(k+r)) to the input u(k) that would reproduce the desired
output r steps ahead on the system they were derived from.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .systems import EPS_GAIN, SimTrace

logger = logging.getLogger(__name__)

SERIAL_FORMAT = "xfertrack-mlp-v1"


class SingularInverse(ValueError):
    """The r-step input gain G(x) is too small to invert."""


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class InverseDataset:
    """Paired samples: inputs are [x(k), y(k+r)], labels are u(k)."""

    inputs: np.ndarray  # (N, n+1)
    labels: np.ndarray  # (N,)
    r: int

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels misaligned")

    def __len__(self):
        return self.labels.shape[0]


def build_inverse_dataset(traces, r: int, subsample: int = 1) -> InverseDataset:
    """Assemble inverse-training pairs from simulation traces.

    Each trace with T inputs contributes pairs for k = 0..T-r: the state
    x(k) and the measured output y(k+r) become the regressors, the applied
    input u(k) the label. Traces too short for one pair are skipped with a
    warning. An optional stride subsamples each trace's pairs.
    """
    if r < 1:
        raise ValueError("relative degree must be >= 1")
    xs, ys, us = [], [], []
    skipped = 0
    for trace in traces:
        T = trace.inputs.shape[0]
        m = T - r + 1
        if m <= 0:
            skipped += 1
            continue
        idx = np.arange(0, m, subsample)
        xs.append(trace.states[idx])
        ys.append(trace.outputs[idx + r])
        us.append(trace.inputs[idx])
    if skipped:
        logger.warning("build_inverse_dataset: skipped %d traces shorter than r+1", skipped)
    if not xs:
        raise ValueError("no trace long enough to contribute a sample")
    inputs = np.hstack([np.vstack(xs), np.concatenate(ys)[:, None]])
    return InverseDataset(inputs=inputs, labels=np.concatenate(us), r=r)


class AnalyticInverse:
    """Exact inverse u(k) = (y_d(k+r) - F(x)) / G(x) of a known system."""

    def __init__(self, system):
        self.system = system
        self.r = system.r
        self.n = system.n

    def reference(self, x, y_d_future: float) -> float:
        F, G = self.system.io_terms(x)
        if abs(G) < EPS_GAIN:
            raise SingularInverse(f"input gain {G} below {EPS_GAIN}")
        return (float(y_d_future) - F) / G


class MlpInverseModel:
    """Fully connected tanh network trained as an inverse module.

    Layers are (n+1) -> hidden... -> 1 with tanh activations on hidden
    layers and a linear output. Features and labels are z-scored with
    constants frozen from the training set.
    """

    def __init__(self, layer_sizes, weights, biases, in_mean, in_std, out_mean, out_std):
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.in_mean = np.asarray(in_mean, dtype=float)
        self.in_std = np.asarray(in_std, dtype=float)
        self.out_mean = float(out_mean)
        self.out_std = float(out_std)
        self.validation_rmse = None  # normalized units; set by train_mlp
        self.epochs_run = None
        self.n = self.layer_sizes[0] - 1
        self.r = None  # set by train_mlp from the dataset

    # -- inference ---------------------------------------------------------

    def normalize(self, X):
        return (X - self.in_mean) / self.in_std

    def forward(self, Xn: np.ndarray) -> np.ndarray:
        """Network output for already-normalized features (N, d) -> (N,)."""
        a = Xn
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if i == last else np.tanh(z)
        return a[:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = self.forward(self.normalize(np.atleast_2d(np.asarray(X, dtype=float))))
        return out * self.out_std + self.out_mean

    def reference(self, x, y_d_future: float) -> float:
        feat = np.concatenate([np.asarray(x, dtype=float), [float(y_d_future)]])
        return float(self.predict(feat[None, :])[0])

    # -- training ----------------------------------------------------------

    def loss_and_grads(self, Xn, yn):
        """Mean-squared-error loss and gradients on normalized data.

        Returns (loss, dWs, dbs). Kept explicit so the backward pass can be
        checked against finite differences.
        """
        acts = [Xn]
        zs = []
        a = Xn
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            zs.append(z)
            a = z if i == last else np.tanh(z)
            acts.append(a)
        pred = acts[-1][:, 0]
        err = pred - yn
        N = yn.shape[0]
        loss = float(np.mean(err ** 2))
        delta = (2.0 / N) * err[:, None]
        dWs = [None] * len(self.weights)
        dbs = [None] * len(self.biases)
        for i in range(last, -1, -1):
            dWs[i] = acts[i].T @ delta
            dbs[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return loss, dWs, dbs

    # -- serialization -----------------------------------------------------

    def save(self, path):
        payload = {
            "format": np.array(SERIAL_FORMAT),
            "layer_sizes": np.asarray(self.layer_sizes, dtype=np.int64),
            "activation": np.array("tanh"),
            "in_mean": self.in_mean, "in_std": self.in_std,
            "out_mean": np.float64(self.out_mean), "out_std": np.float64(self.out_std),
        }
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            payload[f"W{i}"] = W
            payload[f"b{i}"] = b
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> "MlpInverseModel":
        with np.load(path, allow_pickle=False) as data:
            fmt = str(data["format"])
            if fmt != SERIAL_FORMAT:
                raise ValueError(f"unsupported model format {fmt!r}")
            sizes = data["layer_sizes"].tolist()
            k = len(sizes) - 1
            weights = [data[f"W{i}"] for i in range(k)]
            biases = [data[f"b{i}"] for i in range(k)]
            return cls(sizes, weights, biases, data["in_mean"], data["in_std"],
                       float(data["out_mean"]), float(data["out_std"]))


@dataclass
class TrainingConfig:
    hidden: tuple = (20, 20)
    epochs: int = 2000
    batch_size: int = 64
    learning_rate: float = 1e-3
    val_fraction: float = 0.1
    patience: int = 50
    # relative improvement of best validation MSE below which an epoch
    # counts toward the plateau
    min_rel_improvement: float = 1e-3


def init_mlp(layer_sizes, rng) -> tuple:
    """Scaled-uniform fan-in init: W_ij ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        s = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-s, s, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return weights, biases


def train_mlp(dataset: InverseDataset, config: TrainingConfig | None = None,
              seed: int = 0) -> MlpInverseModel:
    """Train an MLP inverse on a dataset. Deterministic for a fixed seed.

    Adam updates over shuffled minibatches; early stop once the validation
    MSE plateaus; the best-validation weights are restored at the end.
    """
    cfg = config or TrainingConfig()
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)

    perm = rng.permutation(len(dataset))
    n_val = max(1, int(round(cfg.val_fraction * len(dataset))))
    if len(dataset) < 2:
        raise ValueError("need at least two samples to hold out validation data")
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    X_tr, y_tr = dataset.inputs[train_idx], dataset.labels[train_idx]
    X_va, y_va = dataset.inputs[val_idx], dataset.labels[val_idx]

    in_mean = X_tr.mean(axis=0)
    in_std = X_tr.std(axis=0)
    in_std[in_std < 1e-12] = 1.0
    out_mean = float(y_tr.mean())
    out_std = float(y_tr.std())
    if out_std < 1e-12:
        out_std = 1.0

    sizes = [dataset.inputs.shape[1], *cfg.hidden, 1]
    weights, biases = init_mlp(sizes, rng)
    model = MlpInverseModel(sizes, weights, biases, in_mean, in_std, out_mean, out_std)
    model.r = dataset.r

    Xn_tr = model.normalize(X_tr)
    yn_tr = (y_tr - out_mean) / out_std
    Xn_va = model.normalize(X_va)
    yn_va = (y_va - out_mean) / out_std

    # Adam state
    ms = [np.zeros_like(p) for p in model.weights + model.biases]
    vs = [np.zeros_like(p) for p in model.weights + model.biases]
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0

    best_val = np.inf
    best_params = None
    wait = 0
    n_train = len(train_idx)
    epochs_run = 0

    for epoch in range(cfg.epochs):
        epochs_run = epoch + 1
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            loss, dWs, dbs = model.loss_and_grads(Xn_tr[sel], yn_tr[sel])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            t += 1
            params = model.weights + model.biases
            grads = dWs + dbs
            for i, (p, g) in enumerate(zip(params, grads)):
                ms[i] = b1 * ms[i] + (1 - b1) * g
                vs[i] = b2 * vs[i] + (1 - b2) * g * g
                mhat = ms[i] / (1 - b1 ** t)
                vhat = vs[i] / (1 - b2 ** t)
                p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
        val_mse = float(np.mean((model.forward(Xn_va) - yn_va) ** 2))
        if not np.isfinite(val_mse):
            raise TrainingDiverged(epoch)
        if val_mse < best_val * (1.0 - cfg.min_rel_improvement) or best_params is None:
            wait = 0
        else:
            wait += 1
        if val_mse < best_val:
            best_val = val_mse
            best_params = ([W.copy() for W in model.weights],
                           [b.copy() for b in model.biases])
        if wait >= cfg.patience:
            break

    model.weights, model.biases = best_params
    model.validation_rmse = float(np.sqrt(best_val))
    model.epochs_run = epochs_run
    return model


def inverse_reference(model, x, y_d_future: float) -> float:
    """Dispatch to whichever inverse module is supplied."""
    return model.reference(x, y_d_future)


def affine_lstsq_inverse(dataset: InverseDataset):
    """Closed-form least-squares inverse on the same features as the MLP.

    Returns an object with the same .reference interface; fits
    u ~ [x, y] @ w + c exactly. Serves as an independent check when the
    true inverse is affine.
    """
    X = np.hstack([dataset.inputs, np.ones((len(dataset), 1))])
    coef, *_ = np.linalg.lstsq(X, dataset.labels, rcond=None)

    class _Affine:
        def __init__(self, coef, r):
            self.coef = coef
            self.r = r

        def reference(self, x, y_d_future):
            feat = np.concatenate([np.asarray(x, dtype=float), [float(y_d_future)], [1.0]])
            return float(feat @ self.coef)

    return _Affine(coef, dataset.r)
