"""Desk-scale single-client trainer for the generalized clipped-update loop.

Every round draws m index subsets of size s (by subsampling or
shuffling), runs an inner first-order algorithm on each subset to get a
partial update a_h, clips each a_h to norm C, sums them, adds
per-coordinate Gaussian noise of standard deviation 2*C*sigma (or
C*sigma under the alternative noise-scale flag) and applies
w <- w - eta * U_noised / m.  Models are linear or logistic regression
so gradients have closed forms and the sensitivity theorem
||U - U'|| <= 2kC can be exercised exactly with paired runs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .sampling import SamplerConfig

__all__ = [
    "TrainConfig",
    "Model",
    "RoundUpdate",
    "Metrics",
    "clip",
    "sample_epoch",
    "inner_algorithm",
    "train",
    "paired_update",
    "load_dataset_csv",
    "metrics_to_csv",
]

INNER_MODES = ("IC_grad", "BC_mean", "SGD_recursion")
NOISE_MODES = ("two_c", "one_c")


@dataclass(frozen=True)
class TrainConfig:
    """Run parameters; the epoch count lives on the sampler (sampler.E)."""

    sampler: SamplerConfig
    sigma: float
    clip_C: float
    eta0: float
    lr_decay: float = 0.9
    seed: int = 20240
    noise_scale_mode: str = "two_c"
    inner: str | None = None  # default chosen from the clipping mode
    loss_kind: str = "logistic"

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.clip_C <= 0.0:
            raise ValueError("clip_C must be positive")
        if self.eta0 <= 0.0:
            raise ValueError("eta0 must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.noise_scale_mode not in NOISE_MODES:
            raise ValueError(f"noise_scale_mode must be one of {NOISE_MODES}")
        if self.inner is not None and self.inner not in INNER_MODES:
            raise ValueError(f"inner must be one of {INNER_MODES}")
        if self.loss_kind not in ("squared", "logistic"):
            raise ValueError("loss_kind must be 'squared' or 'logistic'")

    @property
    def inner_mode(self) -> str:
        if self.inner is not None:
            return self.inner
        return "IC_grad" if self.sampler.clipping == "IC" else "BC_mean"

    @property
    def noise_std(self) -> float:
        factor = 2.0 if self.noise_scale_mode == "two_c" else 1.0
        return factor * self.clip_C * self.sigma


@dataclass
class Model:
    weights: np.ndarray
    loss_kind: str = "logistic"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = X @ self.weights
        if self.loss_kind == "logistic":
            return 1.0 / (1.0 + np.exp(-z))
        return z

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        if self.loss_kind == "logistic":
            z = X @ self.weights
            # log(1 + e^-z) stably, split by sign
            ls = np.logaddexp(0.0, -z)
            return float(np.mean(np.where(y > 0.5, ls, ls + z)))
        r = X @ self.weights - y
        return float(0.5 * np.mean(r * r))

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        """Classification accuracy; for squared loss, the negated loss so
        that 'accuracy decreased' means 'loss increased' for the schedule."""
        if self.loss_kind == "logistic":
            return float(np.mean((self.predict(X) > 0.5) == (y > 0.5)))
        return -self.loss(X, y)


@dataclass(frozen=True)
class RoundUpdate:
    U: np.ndarray
    U_noised: np.ndarray
    k_diff: int = 0


@dataclass(frozen=True)
class Metrics:
    epoch: np.ndarray
    loss: np.ndarray
    accuracy: np.ndarray
    eta: np.ndarray


def clip(x: np.ndarray, C: float) -> np.ndarray:
    """Norm clipping x / max{1, ||x||/C}; identity inside the ball."""
    if C <= 0.0:
        raise ValueError("clipping bound must be positive")
    norm = float(np.linalg.norm(x))
    return x / max(1.0, norm / C)


def _grad(loss_kind: str, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Mean gradient of the per-example loss over the rows of X."""
    if loss_kind == "logistic":
        p = 1.0 / (1.0 + np.exp(-(X @ w)))
        return (p - y) @ X / X.shape[0]
    return ((X @ w) - y) @ X / X.shape[0]


def sample_epoch(config: SamplerConfig, rng: np.random.Generator):
    """Index sets for one epoch: rounds of m subsets of size s.

    Shuffling partitions a fresh permutation into consecutive blocks, so
    each index appears exactly once per epoch; subsampling draws each
    round's m*s indices uniformly without replacement, independently
    across rounds.
    """
    N, s, m = config.N, config.s, config.m
    rounds = []
    if config.strategy == "SH":
        perm = rng.permutation(N)
        for b in range(config.rounds_per_epoch):
            block = perm[b * m * s : (b + 1) * m * s]
            rounds.append([block[h * s : (h + 1) * s] for h in range(m)])
    else:
        for _ in range(config.rounds_per_epoch):
            block = rng.choice(N, size=m * s, replace=False)
            rounds.append([block[h * s : (h + 1) * s] for h in range(m)])
    return rounds


def inner_algorithm(
    mode: str,
    w: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    eta: float,
    loss_kind: str,
) -> np.ndarray:
    """Partial update a_h computed from one subset.

    IC_grad: the single-example gradient (subset size 1).
    BC_mean: mean gradient of the subset, all at the same w.
    SGD_recursion: sum of gradients along the local recursion
    w_{j+1} = w_j - eta * grad(w_j, xi_j) started at w.
    """
    if mode == "IC_grad":
        if X.shape[0] != 1:
            raise ValueError("IC_grad expects singleton subsets")
        return _grad(loss_kind, w, X, y)
    if mode == "BC_mean":
        return _grad(loss_kind, w, X, y)
    if mode == "SGD_recursion":
        w_local = w.copy()
        acc = np.zeros_like(w)
        for j in range(X.shape[0]):
            gj = _grad(loss_kind, w_local, X[j : j + 1], y[j : j + 1])
            acc += gj
            w_local = w_local - eta * gj
        return acc
    raise ValueError(f"unknown inner mode {mode!r}")


def _round_update(config: TrainConfig, w, X, y, subsets, eta):
    U = np.zeros_like(w)
    for idx in subsets:
        a_h = inner_algorithm(
            config.inner_mode, w, X[idx], y[idx], eta, config.loss_kind
        )
        U += clip(a_h, config.clip_C)
    return U


def train(config: TrainConfig, dataset, eval_dataset=None):
    """Run the full training loop; returns (Model, Metrics).

    dataset is (X, y); metrics record per-epoch loss, accuracy and step
    size on the evaluation set (the training set when none is given).
    The step size is multiplied by lr_decay after any epoch whose
    accuracy decreased.
    """
    X, y = dataset
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != config.sampler.N:
        raise ValueError(
            f"dataset size {X.shape[0]} does not match sampler N={config.sampler.N}"
        )
    X_eval, y_eval = eval_dataset if eval_dataset is not None else (X, y)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(config.seed)))
    model = Model(np.zeros(X.shape[1]), loss_kind=config.loss_kind)
    eta = config.eta0
    m = config.sampler.m
    rows = []
    prev_acc = None
    for epoch in range(1, config.sampler.E + 1):
        for subsets in sample_epoch(config.sampler, rng):
            U = _round_update(config, model.weights, X, y, subsets, eta)
            noise = rng.normal(0.0, 1.0, size=U.shape) * config.noise_std
            model.weights = model.weights - eta * (U + noise) / m
            if not np.all(np.isfinite(model.weights)):
                raise FloatingPointError(
                    f"non-finite weights at epoch {epoch}; lower eta0 or clip_C "
                    f"(eta={eta:g}, C={config.clip_C:g})"
                )
        acc = model.accuracy(X_eval, y_eval)
        rows.append((epoch, model.loss(X_eval, y_eval), acc, eta))
        if prev_acc is not None and acc < prev_acc:
            eta *= config.lr_decay
        prev_acc = acc
    arr = np.asarray(rows, dtype=np.float64)
    metrics = Metrics(
        epoch=arr[:, 0].astype(int), loss=arr[:, 1], accuracy=arr[:, 2], eta=arr[:, 3]
    )
    return model, metrics


def paired_update(
    config: TrainConfig,
    data_d,
    data_dprime,
    shared_seed: int,
    round_index: int = 0,
    w: np.ndarray | None = None,
):
    """Pre-noise round updates for two data sets under shared randomness.

    The two data sets must have equal shape and agree outside the marked
    (differing) rows.  The shared seed fixes the sampled index sets, so
    subsets without marked indices contribute identical clipped terms and
    ||U - U'|| <= 2kC with k the number of subsets touching a marked row.
    Returns (U, U', k).
    """
    Xd, yd = data_d
    Xp, yp = data_dprime
    Xd = np.asarray(Xd, dtype=np.float64)
    Xp = np.asarray(Xp, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    yp = np.asarray(yp, dtype=np.float64)
    if Xd.shape != Xp.shape or yd.shape != yp.shape:
        raise ValueError("paired data sets must have identical shapes")
    marked = np.flatnonzero(np.any(Xd != Xp, axis=1) | (yd != yp))
    rng = np.random.Generator(np.random.Philox(key=np.uint64(shared_seed)))
    epoch = sample_epoch(config.sampler, rng)
    subsets = epoch[round_index]
    if w is None:
        w = np.zeros(Xd.shape[1])
    w = np.asarray(w, dtype=np.float64)
    U = _round_update(config, w, Xd, yd, subsets, config.eta0)
    Up = _round_update(config, w, Xp, yp, subsets, config.eta0)
    marked_set = set(marked.tolist())
    k = sum(1 for idx in subsets if marked_set.intersection(idx.tolist()))
    return U, Up, k


def load_dataset_csv(path):
    """CSV with a header row; the final column is the label."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"no data rows in {path}")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, :-1], arr[:, -1], header


def metrics_to_csv(metrics: Metrics) -> str:
    buf = io.StringIO()
    buf.write("epoch,loss,accuracy,eta\n")
    for e, l, a, t in zip(metrics.epoch, metrics.loss, metrics.accuracy, metrics.eta):
        buf.write(f"{int(e)},{l:.12g},{a:.12g},{t:.12g}\n")
    return buf.getvalue()
