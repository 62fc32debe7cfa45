"""From-scratch multilayer perceptron classifier.

Dense stack (input -> 128 -> 64 -> 32 -> 3) with ReLU hidden activations,
softmax output, sparse categorical cross-entropy, and Adam updates.
Training holds out the trailing fraction of a once-shuffled row order as
validation and records per-epoch accuracy/loss for both parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

N_CLASSES = 3


@dataclass
class MlpConfig:
    hidden: tuple = (128, 64, 32)
    epochs: int = 50
    batch_size: int = 32
    validation_split: float = 0.2
    seed: int = 42
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class MlpParams:
    weights: list  # per layer, (fan_in, fan_out)
    biases: list   # per layer, (fan_out,)

    def shapes(self):
        return [w.shape for w in self.weights]


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)


def init_params(input_dim: int, hidden=(128, 64, 32), n_classes: int = N_CLASSES,
                seed: int = 42) -> MlpParams:
    """He-scaled normal weights (std sqrt(2/fan_in)), zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(seed)
    widths = [input_dim, *hidden, n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(params: MlpParams, x: np.ndarray):
    """Probabilities plus the post-activation of every layer (for backprop)."""
    activations = [x]
    a = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = z if l == last else np.maximum(z, 0.0)
        activations.append(a)
    return softmax(a), activations


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities; accepts a single vector or a (n, d) matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    probs, _ = _forward_cache(params, np.atleast_2d(x))
    return probs[0] if single else probs


def loss_grad(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy of the true class and gradients for every layer."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValueError(f"labels must be in [0, {N_CLASSES}), got {y.min()}..{y.max()}")
    n = x.shape[0]
    probs, activations = _forward_cache(params, x)
    with np.errstate(divide="ignore"):  # log(0) -> inf signals divergence
        loss = float(-np.mean(np.log(probs[np.arange(n), y])))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * (activations[l] > 0)
    return loss, MlpParams(weights=grad_w, biases=grad_b)


@dataclass
class AdamState:
    m: list
    v: list


def adam_init(params: MlpParams) -> AdamState:
    zeros = lambda arrs: [np.zeros_like(a) for a in arrs]
    return AdamState(m=zeros(params.weights + params.biases),
                     v=zeros(params.weights + params.biases))


def adam_step_arrays(state: AdamState, tensors, gradients, t: int,
                     lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                     eps: float = 1e-8):
    """Bias-corrected Adam over parallel lists of arrays."""
    if t < 1:
        raise ValueError("step count t starts at 1")
    new_tensors, new_m, new_v = [], [], []
    for p, g, m, v in zip(tensors, gradients, state.m, state.v):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new_tensors.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_tensors, AdamState(m=new_m, v=new_v)


def adam_step(state: AdamState, params: MlpParams, grads: MlpParams, t: int,
              lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One bias-corrected Adam update; returns (params', state')."""
    tensors, new_state = adam_step_arrays(
        state, params.weights + params.biases, grads.weights + grads.biases,
        t, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    k = len(params.weights)
    return MlpParams(weights=tensors[:k], biases=tensors[k:]), new_state


def _accuracy_and_loss(params, x, y):
    probs = forward(params, x)
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(probs[np.arange(len(y)), y])))
    return acc, loss


def train(config: MlpConfig, x: np.ndarray, y: np.ndarray):
    """Minibatch Adam over shuffled batches; returns (params, history)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_val = int(round(config.validation_split * n))
    fit_idx = perm[: n - n_val]
    val_idx = perm[n - n_val:]

    params = init_params(x.shape[1], hidden=config.hidden, seed=config.seed)
    state = adam_init(params)
    history = TrainHistory()
    t = 0
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(fit_idx)
        for start in range(0, len(order), config.batch_size):
            batch = order[start: start + config.batch_size]
            t += 1
            loss, grads = loss_grad(params, x[batch], y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            params, state = adam_step(
                state, params, grads, t,
                lr=config.learning_rate, beta1=config.beta1,
                beta2=config.beta2, eps=config.eps)
        acc, loss = _accuracy_and_loss(params, x[fit_idx], y[fit_idx])
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        history.train_accuracy.append(acc)
        history.train_loss.append(loss)
        if n_val:
            vacc, vloss = _accuracy_and_loss(params, x[val_idx], y[val_idx])
            history.val_accuracy.append(vacc)
            history.val_loss.append(vloss)
    return params, history


def predict(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Most probable class per row; ties resolve to the lowest index."""
    return np.argmax(np.atleast_2d(forward(params, x)), axis=1)


def params_to_dict(params: MlpParams) -> dict:
    return {
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(doc: dict) -> MlpParams:
    return MlpParams(
        weights=[np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in doc["biases"]],
    )
