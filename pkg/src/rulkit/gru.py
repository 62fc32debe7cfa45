"""From-scratch stacked GRU classifier.

Each feature row is treated as a sequence of single-value steps. Two GRU
layers (the first feeding its full per-step state sequence to the second),
inverted dropout on each layer's output during training, then a small
ReLU dense layer and softmax head trained on one-hot labels with Adam and
global-norm gradient clipping.

Cell equations, with sigmoid gates and tanh candidate:

    z = sig(Wz x + Uz h + bz)
    r = sig(Wr x + Ur h + br)
    c = tanh(Wh x + Uh (r * h) + bh)
    h' = (1 - z) * h + z * c
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .mlp import AdamState, adam_step_arrays, softmax

N_CLASSES = 3


@dataclass
class GruConfig:
    units1: int = 64
    units2: int = 32
    dropout1: float = 0.2
    dropout2: float = 0.2
    dense_units: int = 16
    epochs: int = 50
    batch_size: int = 32
    seed: int = 42
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0

    def __post_init__(self):
        if not (0.0 <= self.dropout1 < 1.0 and 0.0 <= self.dropout2 < 1.0):
            raise ValueError("dropout rates must be in [0, 1)")


@dataclass
class GruLayerParams:
    wz: np.ndarray
    wr: np.ndarray
    wh: np.ndarray
    uz: np.ndarray
    ur: np.ndarray
    uh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray

    def tensors(self):
        return [self.wz, self.wr, self.wh, self.uz, self.ur, self.uh,
                self.bz, self.br, self.bh]


@dataclass
class GruParams:
    layer1: GruLayerParams
    layer2: GruLayerParams
    dense_w: np.ndarray
    dense_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    def tensors(self):
        return (self.layer1.tensors() + self.layer2.tensors()
                + [self.dense_w, self.dense_b, self.out_w, self.out_b])


def tensors_to_params(tensors) -> GruParams:
    return GruParams(
        layer1=GruLayerParams(*tensors[0:9]),
        layer2=GruLayerParams(*tensors[9:18]),
        dense_w=tensors[18], dense_b=tensors[19],
        out_w=tensors[20], out_b=tensors[21])


def reshape_to_sequence(matrix: np.ndarray) -> np.ndarray:
    """(n, d) feature matrix -> (n, d, 1) sequence batch, losslessly."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {matrix.shape}")
    return matrix.reshape(matrix.shape[0], matrix.shape[1], 1)


def one_hot(labels, n_classes: int = N_CLASSES) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must be in [0, {n_classes})")
    out = np.zeros((y.shape[0], n_classes))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def _uniform_layer(rng, in_dim, units) -> GruLayerParams:
    limit = 1.0 / np.sqrt(units)
    u = lambda shape: rng.uniform(-limit, limit, size=shape)
    return GruLayerParams(
        wz=u((in_dim, units)), wr=u((in_dim, units)), wh=u((in_dim, units)),
        uz=u((units, units)), ur=u((units, units)), uh=u((units, units)),
        bz=np.zeros(units), br=np.zeros(units), bh=np.zeros(units))


def init_params(config: GruConfig, input_dim_per_step: int = 1) -> GruParams:
    rng = np.random.default_rng(config.seed)
    layer1 = _uniform_layer(rng, input_dim_per_step, config.units1)
    layer2 = _uniform_layer(rng, config.units1, config.units2)
    lim_d = 1.0 / np.sqrt(config.units2)
    lim_o = 1.0 / np.sqrt(config.dense_units)
    return GruParams(
        layer1=layer1,
        layer2=layer2,
        dense_w=rng.uniform(-lim_d, lim_d, size=(config.units2, config.dense_units)),
        dense_b=np.zeros(config.dense_units),
        out_w=rng.uniform(-lim_o, lim_o, size=(config.dense_units, N_CLASSES)),
        out_b=np.zeros(N_CLASSES))


def sigmoid(x):
    with np.errstate(over="ignore"):  # exp overflow saturates to 0 correctly
        return 1.0 / (1.0 + np.exp(-x))


def gru_cell(layer: GruLayerParams, x_t: np.ndarray, h_prev: np.ndarray):
    """One step; returns (h_t, cache for backprop)."""
    z = sigmoid(x_t @ layer.wz + h_prev @ layer.uz + layer.bz)
    r = sigmoid(x_t @ layer.wr + h_prev @ layer.ur + layer.br)
    rh = r * h_prev
    c = np.tanh(x_t @ layer.wh + rh @ layer.uh + layer.bh)
    h = (1.0 - z) * h_prev + z * c
    return h, (x_t, h_prev, z, r, rh, c)


def _layer_forward(layer: GruLayerParams, seq: np.ndarray):
    """Run the cell over all steps; returns (states (n,T,units), caches)."""
    n, steps, _ = seq.shape
    units = layer.bz.shape[0]
    h = np.zeros((n, units))
    states = np.empty((n, steps, units))
    caches = []
    for t in range(steps):
        h, cache = gru_cell(layer, seq[:, t, :], h)
        states[:, t, :] = h
        caches.append(cache)
    return states, caches


def _layer_backward(layer: GruLayerParams, caches, d_states: np.ndarray):
    """BPTT through one layer given upstream gradients on every state."""
    n, steps, _ = d_states.shape
    grads = GruLayerParams(*[np.zeros_like(a) for a in layer.tensors()])
    d_input = np.empty((n, steps, layer.wz.shape[0]))
    carry = np.zeros((n, layer.bz.shape[0]))
    for t in range(steps - 1, -1, -1):
        x_t, h_prev, z, r, rh, c = caches[t]
        dh = d_states[:, t, :] + carry
        dz = dh * (c - h_prev)
        daz = dz * z * (1.0 - z)
        dc = dh * z
        dac = dc * (1.0 - c * c)
        d_rh = dac @ layer.uh.T
        dr = d_rh * h_prev
        dar = dr * r * (1.0 - r)
        carry = dh * (1.0 - z) + d_rh * r + daz @ layer.uz.T + dar @ layer.ur.T
        grads.wz += x_t.T @ daz
        grads.wr += x_t.T @ dar
        grads.wh += x_t.T @ dac
        grads.uz += h_prev.T @ daz
        grads.ur += h_prev.T @ dar
        grads.uh += rh.T @ dac
        grads.bz += daz.sum(axis=0)
        grads.br += dar.sum(axis=0)
        grads.bh += dac.sum(axis=0)
        d_input[:, t, :] = daz @ layer.wz.T + dar @ layer.wr.T + dac @ layer.wh.T
    return grads, d_input


def _forward_cache(params: GruParams, seq: np.ndarray, masks=None):
    """Full forward pass; masks = (mask1, mask2) inverted-dropout factors."""
    states1, caches1 = _layer_forward(params.layer1, seq)
    fed1 = states1 * masks[0] if masks else states1
    states2, caches2 = _layer_forward(params.layer2, fed1)
    h2 = states2[:, -1, :]
    fed2 = h2 * masks[1] if masks else h2
    dense_pre = fed2 @ params.dense_w + params.dense_b
    dense = np.maximum(dense_pre, 0.0)
    logits = dense @ params.out_w + params.out_b
    probs = softmax(logits)
    return probs, (caches1, caches2, fed1, fed2, dense, states2.shape)


def forward(params: GruParams, seq: np.ndarray) -> np.ndarray:
    """Class probabilities for a sequence batch (dropout disabled)."""
    seq = np.asarray(seq, dtype=np.float64)
    single = seq.ndim == 2
    if single:
        seq = seq[np.newaxis]
    probs, _ = _forward_cache(params, seq)
    return probs[0] if single else probs


def loss_grad(params: GruParams, seq: np.ndarray, y_onehot: np.ndarray, masks=None):
    """Categorical cross-entropy on one-hot labels and full BPTT gradients."""
    n = seq.shape[0]
    probs, cache = _forward_cache(params, seq, masks)
    caches1, caches2, fed1, fed2, dense, shape2 = cache
    true_class = np.argmax(y_onehot, axis=1)
    with np.errstate(divide="ignore"):  # log(0) -> inf signals divergence
        loss = float(-np.mean(np.log(probs[np.arange(n), true_class])))

    dlogits = (probs - y_onehot) / n
    g_out_w = dense.T @ dlogits
    g_out_b = dlogits.sum(axis=0)
    ddense = (dlogits @ params.out_w.T) * (dense > 0)
    g_dense_w = fed2.T @ ddense
    g_dense_b = ddense.sum(axis=0)
    dfed2 = ddense @ params.dense_w.T
    dh2 = dfed2 * masks[1] if masks else dfed2

    d_states2 = np.zeros(shape2)
    d_states2[:, -1, :] = dh2
    g_layer2, d_fed1 = _layer_backward(params.layer2, caches2, d_states2)
    d_states1 = d_fed1 * masks[0] if masks else d_fed1
    g_layer1, _ = _layer_backward(params.layer1, caches1, d_states1)

    grads = GruParams(layer1=g_layer1, layer2=g_layer2,
                      dense_w=g_dense_w, dense_b=g_dense_b,
                      out_w=g_out_w, out_b=g_out_b)
    return loss, grads


def clip_global_norm(tensors, max_norm: float):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in tensors))
    if total > max_norm and total > 0:
        scale = max_norm / total
        return [g * scale for g in tensors], total
    return tensors, total


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)


def _eval(params, seq, y, batch: int = 2048):
    probs = np.vstack([forward(params, seq[i: i + batch])
                       for i in range(0, seq.shape[0], batch)])
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(probs[np.arange(len(y)), y])))
    return acc, loss


def train(config: GruConfig, x: np.ndarray, y: np.ndarray,
          x_val=None, y_val=None):
    """Minibatch Adam with per-batch inverted-dropout masks.

    Returns (params, TrainHistory); validation metrics are recorded when a
    held-out set is supplied.
    """
    seq = reshape_to_sequence(x)
    y = np.asarray(y, dtype=np.int64)
    labels = one_hot(y)
    seq_val = reshape_to_sequence(x_val) if x_val is not None else None
    params = init_params(config, input_dim_per_step=1)
    state = AdamState(m=[np.zeros_like(a) for a in params.tensors()],
                      v=[np.zeros_like(a) for a in params.tensors()])
    history = TrainHistory()
    n = seq.shape[0]
    steps = seq.shape[1]
    t = 0
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start: start + config.batch_size]
            masks = None
            if config.dropout1 > 0 or config.dropout2 > 0:
                keep1, keep2 = 1.0 - config.dropout1, 1.0 - config.dropout2
                masks = (
                    (rng.random((len(batch), steps, config.units1)) < keep1) / keep1,
                    (rng.random((len(batch), config.units2)) < keep2) / keep2,
                )
            t += 1
            loss, grads = loss_grad(params, seq[batch], labels[batch], masks)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            clipped, _ = clip_global_norm(grads.tensors(), config.clip_norm)
            tensors, state = adam_step_arrays(
                state, params.tensors(), clipped, t,
                lr=config.learning_rate, beta1=config.beta1,
                beta2=config.beta2, eps=config.eps)
            params = tensors_to_params(tensors)
        acc, loss = _eval(params, seq, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        history.train_accuracy.append(acc)
        history.train_loss.append(loss)
        if seq_val is not None:
            vacc, vloss = _eval(params, seq_val, np.asarray(y_val, dtype=np.int64))
            history.val_accuracy.append(vacc)
            history.val_loss.append(vloss)
    return params, history


def predict(params: GruParams, x: np.ndarray) -> np.ndarray:
    """Argmax class per row, dropout disabled (deterministic)."""
    seq = reshape_to_sequence(np.atleast_2d(x))
    probs = np.vstack([forward(params, seq[i: i + 2048])
                       for i in range(0, seq.shape[0], 2048)])
    return np.argmax(probs, axis=1)


def params_to_dict(params: GruParams) -> dict:
    names = ["wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"]
    layer = lambda lp: {k: getattr(lp, k).tolist() for k in names}
    return {
        "layer1": layer(params.layer1),
        "layer2": layer(params.layer2),
        "dense_w": params.dense_w.tolist(),
        "dense_b": params.dense_b.tolist(),
        "out_w": params.out_w.tolist(),
        "out_b": params.out_b.tolist(),
    }


def params_from_dict(doc: dict) -> GruParams:
    names = ["wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"]
    layer = lambda d: GruLayerParams(*[np.asarray(d[k], dtype=np.float64) for k in names])
    return GruParams(
        layer1=layer(doc["layer1"]),
        layer2=layer(doc["layer2"]),
        dense_w=np.asarray(doc["dense_w"], dtype=np.float64),
        dense_b=np.asarray(doc["dense_b"], dtype=np.float64),
        out_w=np.asarray(doc["out_w"], dtype=np.float64),
        out_b=np.asarray(doc["out_b"], dtype=np.float64))
