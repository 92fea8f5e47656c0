"""Two small classifier heads over mention embeddings, trained from scratch.

Both nets are plain numpy with hand-derived gradients so training is exact,
deterministic, and checkable against finite differences:

  * ``ConcatMlpNet``  -- softmax over an MLP fed the concatenated A/B/pronoun
    embeddings (hidden sizes 512 and 32 by default).
  * ``PairScorerNet`` -- a shared scoring network applied once per candidate
    to [name_emb; pronoun_emb; name_emb*pronoun_emb; hand_features]; softmax
    over (score_A, score_B, 0) where the fixed 0 is the "neither" score.

Optimization is mini-batch gradient descent on mean cross-entropy. Parameters
initialize to seeded uniform values in [-r, r] with r = sqrt(6/(fan_in+fan_out));
biases start at zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_CLASSES = 3  # A, B, Neither


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    folds: int = 5
    n_seeds: int = 1
    layers: tuple[int, ...] = (-4,)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0 or self.batch_size <= 0:
            raise ValueError("learning_rate and batch_size must be positive, epochs >= 0")
        if self.folds < 2 or self.n_seeds < 1:
            raise ValueError("need folds >= 2 and n_seeds >= 1")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, (fan_in, fan_out))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    rows = np.arange(len(labels))
    with np.errstate(divide="ignore"):  # p=0 yields inf, caught by the trainer
        return float(-np.log(probs[rows, labels]).mean())


class ConcatMlpNet:
    """MLP softmax head over the concatenated (A, B, Pronoun) embedding vector."""

    kind = "concat_mlp"

    def __init__(self, input_dim: int, hidden_dims=(512, 32), seed: int = 0):
        self.input_dim = input_dim
        self.hidden_dims = tuple(hidden_dims)
        rng = np.random.default_rng(seed)
        dims = [input_dim, *self.hidden_dims, N_CLASSES]
        self.weights = [_glorot(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise ValueError(f"input dim {X.shape[1]} != net input dim {self.input_dim}")
        return X

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_input(X)
        act = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            act = np.maximum(act @ W + b, 0.0)
        logits = act @ self.weights[-1] + self.biases[-1]
        return softmax(logits)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_batch(x)[0]

    def loss_grads(self, inputs, labels: np.ndarray):
        (X,) = inputs
        X = self._check_input(X)
        labels = np.asarray(labels)
        n = len(labels)

        pre_acts = []
        act = X
        acts = [X]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = act @ W + b
            pre_acts.append(z)
            act = np.maximum(z, 0.0)
            acts.append(act)
        logits = act @ self.weights[-1] + self.biases[-1]
        probs = softmax(logits)
        loss = cross_entropy(probs, labels)

        delta = probs.copy()
        delta[np.arange(n), labels] -= 1.0
        delta /= n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre_acts[i - 1] > 0)
        return loss, (grads_w, grads_b)

    def sgd_step(self, grads, lr: float) -> None:
        grads_w, grads_b = grads
        for W, gW in zip(self.weights, grads_w):
            W -= lr * gW
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb

    # flat parameter view, used by the finite-difference check and checkpoints
    def params_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in (*self.weights, *self.biases)])

    def set_params_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for p in (*self.weights, *self.biases):
            p.flat[:] = vec[pos : pos + p.size]
            pos += p.size
        if pos != len(vec):
            raise ValueError(f"parameter vector length {len(vec)} != {pos}")

    def grads_vector(self, grads) -> np.ndarray:
        grads_w, grads_b = grads
        return np.concatenate([g.ravel() for g in (*grads_w, *grads_b)])

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConcatMlpNet":
        net = cls(data["input_dim"], tuple(data["hidden_dims"]), seed=0)
        net.weights = [np.asarray(W, dtype=np.float64) for W in data["weights"]]
        net.biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
        return net


class PairScorerNet:
    """Shared-weight per-candidate scorer with a constant 0 "neither" score.

    Swapping the A and B inputs swaps the first two output probabilities
    exactly, because both candidates run through the identical computation.
    """

    kind = "pair_scorer"

    def __init__(self, emb_dim: int, feat_dim: int, hidden_dim: int = 150, seed: int = 0):
        self.emb_dim = emb_dim
        self.feat_dim = feat_dim
        self.hidden_dim = hidden_dim
        self.input_dim = 3 * emb_dim + feat_dim
        rng = np.random.default_rng(seed)
        self.W1 = _glorot(rng, self.input_dim, hidden_dim)
        self.b1 = np.zeros(hidden_dim)
        self.w2 = _glorot(rng, hidden_dim, 1)[:, 0]
        self.b2 = np.zeros(1)

    def _candidate_input(self, E: np.ndarray, EP: np.ndarray, F: np.ndarray) -> np.ndarray:
        return np.concatenate([E, EP, E * EP, F], axis=1)

    def _score(self, U: np.ndarray):
        Z = U @ self.W1 + self.b1
        H = np.maximum(Z, 0.0)
        return Z, H, H @ self.w2 + self.b2[0]

    def _check_inputs(self, EA, EB, EP, FA, FB):
        arrs = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in (EA, EB, EP, FA, FB)]
        EA, EB, EP, FA, FB = arrs
        for name, arr, want in (("A", EA, self.emb_dim), ("B", EB, self.emb_dim),
                                ("P", EP, self.emb_dim), ("feat A", FA, self.feat_dim),
                                ("feat B", FB, self.feat_dim)):
            if arr.shape[1] != want:
                raise ValueError(f"{name} input dim {arr.shape[1]} != expected {want}")
        return EA, EB, EP, FA, FB

    def forward_batch(self, EA, EB, EP, FA, FB) -> np.ndarray:
        EA, EB, EP, FA, FB = self._check_inputs(EA, EB, EP, FA, FB)
        _, _, score_a = self._score(self._candidate_input(EA, EP, FA))
        _, _, score_b = self._score(self._candidate_input(EB, EP, FB))
        logits = np.stack([score_a, score_b, np.zeros_like(score_a)], axis=1)
        return softmax(logits)

    def forward(self, ea, eb, ep, fa, fb) -> np.ndarray:
        return self.forward_batch(ea, eb, ep, fa, fb)[0]

    def loss_grads(self, inputs, labels: np.ndarray):
        EA, EB, EP, FA, FB = self._check_inputs(*inputs)
        labels = np.asarray(labels)
        n = len(labels)

        UA = self._candidate_input(EA, EP, FA)
        UB = self._candidate_input(EB, EP, FB)
        ZA, HA, score_a = self._score(UA)
        ZB, HB, score_b = self._score(UB)
        logits = np.stack([score_a, score_b, np.zeros_like(score_a)], axis=1)
        probs = softmax(logits)
        loss = cross_entropy(probs, labels)

        delta = probs.copy()
        delta[np.arange(n), labels] -= 1.0
        delta /= n

        gW1 = np.zeros_like(self.W1)
        gb1 = np.zeros_like(self.b1)
        gw2 = np.zeros_like(self.w2)
        gb2 = np.zeros_like(self.b2)
        for ds, Z, H, U in ((delta[:, 0], ZA, HA, UA), (delta[:, 1], ZB, HB, UB)):
            gw2 += H.T @ ds
            gb2[0] += ds.sum()
            dz = (ds[:, None] * self.w2) * (Z > 0)
            gW1 += U.T @ dz
            gb1 += dz.sum(axis=0)
        return loss, (gW1, gb1, gw2, gb2)

    def sgd_step(self, grads, lr: float) -> None:
        gW1, gb1, gw2, gb2 = grads
        self.W1 -= lr * gW1
        self.b1 -= lr * gb1
        self.w2 -= lr * gw2
        self.b2 -= lr * gb2

    def params_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, self.b2])

    def set_params_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for p in (self.W1, self.b1, self.w2, self.b2):
            p.flat[:] = vec[pos : pos + p.size]
            pos += p.size
        if pos != len(vec):
            raise ValueError(f"parameter vector length {len(vec)} != {pos}")

    def grads_vector(self, grads) -> np.ndarray:
        gW1, gb1, gw2, gb2 = grads
        return np.concatenate([gW1.ravel(), gb1, gw2, gb2])

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": self.kind,
            "emb_dim": self.emb_dim,
            "feat_dim": self.feat_dim,
            "hidden_dim": self.hidden_dim,
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PairScorerNet":
        net = cls(data["emb_dim"], data["feat_dim"], data["hidden_dim"], seed=0)
        net.W1 = np.asarray(data["W1"], dtype=np.float64)
        net.b1 = np.asarray(data["b1"], dtype=np.float64)
        net.w2 = np.asarray(data["w2"], dtype=np.float64)
        net.b2 = np.asarray(data["b2"], dtype=np.float64)
        return net


@dataclass
class TrainResult:
    net: object
    loss_trace: list[float] = field(default_factory=list)


def train(net, inputs, labels, config: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent; deterministic for a fixed config seed.

    ``inputs`` is a tuple of arrays aligned on axis 0 (one array for
    ConcatMlpNet, five for PairScorerNet). Returns the trained net and the
    mean training loss per epoch. Zero epochs returns the net untouched.
    """
    inputs = tuple(np.asarray(a, dtype=np.float64) for a in inputs)
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= N_CLASSES:
        raise ValueError("labels must be in {0, 1, 2}")

    rng = np.random.default_rng(config.seed)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = tuple(a[idx] for a in inputs)
            loss, grads = net.loss_grads(batch, labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start} "
                    f"(lr={config.learning_rate})"
                )
            net.sgd_step(grads, config.learning_rate)
            loss_sum += loss * len(idx)
        trace.append(loss_sum / n)
    return TrainResult(net=net, loss_trace=trace)


def gradient_check(net, inputs, labels, step: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients."""
    inputs = tuple(np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in inputs)
    labels = np.asarray(labels)
    _, grads = net.loss_grads(inputs, labels)
    analytic = net.grads_vector(grads)

    theta = net.params_vector()
    numeric = np.zeros_like(analytic)
    for i in range(len(theta)):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        net.set_params_vector(bumped)
        plus, _ = net.loss_grads(inputs, labels)
        bumped[i] = theta[i] - step
        net.set_params_vector(bumped)
        minus, _ = net.loss_grads(inputs, labels)
        numeric[i] = (plus - minus) / (2 * step)
    net.set_params_vector(theta)

    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def seed_average(nets, inputs) -> np.ndarray:
    """Arithmetic mean of the probability outputs of several trained nets."""
    if not nets:
        raise ValueError("need at least one net")
    return np.mean([net.forward_batch(*inputs) for net in nets], axis=0)


def save_net(net, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()))


_KINDS = {ConcatMlpNet.kind: ConcatMlpNet, PairScorerNet.kind: PairScorerNet}


def load_net(path):
    data = json.loads(Path(path).read_text())
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"{path}: unknown checkpoint kind {kind!r}")
    return _KINDS[kind].from_dict(data)


def write_loss_trace_csv(path, rows) -> None:
    """rows: iterable of (model, fold, seed, epoch, loss)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["model", "fold", "seed", "epoch", "loss"])
        for row in rows:
            writer.writerow(row)
