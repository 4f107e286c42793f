"""Stacked scalar-input LSTM regressor with hand-written backpropagation through time.

Gate rows of each layer's weight matrix are ordered input, forget, output,
candidate, so the three sigmoid gates form one contiguous block. The last hidden state of the top layer is projected to a scalar.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(eq=False)
class LstmWeights:
    """``W[l]`` has shape (4H, in_l + H); ``b[l]`` has shape (4H,)."""

    W: list
    b: list
    w_out: np.ndarray
    b_out: float

    @property
    def hidden(self) -> int:
        return int(self.w_out.shape[0])

    @property
    def layers(self) -> int:
        return len(self.W)

    def flat(self) -> np.ndarray:
        return np.concatenate([*(w.ravel() for w in self.W), *(b.ravel() for b in self.b),
                               self.w_out.ravel(), [self.b_out]])

    def unflat(self, theta: np.ndarray) -> "LstmWeights":
        theta = np.asarray(theta, dtype=np.float64)
        pos = 0
        W, b = [], []
        for w in self.W:
            W.append(theta[pos: pos + w.size].reshape(w.shape))
            pos += w.size
        for bb in self.b:
            b.append(theta[pos: pos + bb.size].copy())
            pos += bb.size
        w_out = theta[pos: pos + self.w_out.size].copy()
        pos += self.w_out.size
        return LstmWeights([w.copy() for w in W], b, w_out, float(theta[pos]))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))

    def to_dict(self) -> dict:
        return {"W": [w.tolist() for w in self.W], "b": [b.tolist() for b in self.b],
                "w_out": self.w_out.tolist(), "b_out": self.b_out}

    @classmethod
    def from_dict(cls, d: dict) -> "LstmWeights":
        return cls([np.asarray(w, dtype=np.float64) for w in d["W"]],
                   [np.asarray(b, dtype=np.float64) for b in d["b"]],
                   np.asarray(d["w_out"], dtype=np.float64), float(d["b_out"]))


def init_weights(hidden: int = 6, layers: int = 2, input_size: int = 1,
                 rng: np.random.Generator | None = None) -> LstmWeights:
    """Uniform(-0.5, 0.5) / sqrt(fan_in) weights, forget-gate bias 1."""
    rng = np.random.default_rng() if rng is None else rng
    W, b = [], []
    for layer in range(layers):
        fan_in = (input_size if layer == 0 else hidden) + hidden
        W.append(rng.uniform(-0.5, 0.5, size=(4 * hidden, fan_in)) / np.sqrt(fan_in))
        bias = np.zeros(4 * hidden)
        bias[hidden: 2 * hidden] = 1.0
        b.append(bias)
    w_out = rng.uniform(-0.5, 0.5, size=hidden) / np.sqrt(hidden)
    return LstmWeights(W, b, w_out, 0.0)


def zero_weights(hidden: int = 6, layers: int = 2, input_size: int = 1) -> LstmWeights:
    W = [np.zeros((4 * hidden, (input_size if l == 0 else hidden) + hidden)) for l in range(layers)]
    return LstmWeights(W, [np.zeros(4 * hidden) for _ in range(layers)], np.zeros(hidden), 0.0)


def forward(w: LstmWeights, X: np.ndarray):
    """Batch forward pass. ``X`` has shape (batch, steps). Returns predictions and a cache."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    B, T = X.shape
    H = w.hidden
    # time-major buffers keep every per-step slice contiguous
    inputs = np.ascontiguousarray(X.T)[:, :, None]
    caches = []
    for layer in range(w.layers):
        Wl, bl = w.W[layer], w.b[layer]
        in_size = Wl.shape[1] - H
        Wh_T = Wl[:, in_size:].T.copy()
        acts = inputs @ Wl[:, :in_size].T + bl  # (T, B, 4H), overwritten with activations
        hs = np.empty((T + 1, B, H))
        cs = np.empty((T + 1, B, H))
        hs[0] = 0.0
        cs[0] = 0.0
        tcs = np.empty((T, B, H))
        for t in range(T):
            a = acts[t]
            a += hs[t] @ Wh_T
            np.tanh(a[:, 3 * H:], out=a[:, 3 * H:])
            a[:, :3 * H] = _sig(a[:, :3 * H])
            c = cs[t + 1]
            np.multiply(a[:, H:2 * H], cs[t], out=c)
            c += a[:, :H] * a[:, 3 * H:]
            np.tanh(c, out=tcs[t])
            np.multiply(a[:, 2 * H:3 * H], tcs[t], out=hs[t + 1])
        caches.append((inputs, hs, acts, cs, tcs))
        inputs = hs[1:]
    h_last = inputs[-1]
    out = h_last @ w.w_out + w.b_out
    return out, (caches, h_last, X.shape)


def backward(w: LstmWeights, cache, d_out: np.ndarray) -> LstmWeights:
    """Gradients of ``sum(d_out * out)`` with respect to every weight."""
    caches, h_last, (B, T) = cache
    H = w.hidden
    d_out = np.asarray(d_out, dtype=np.float64).reshape(B)
    gw_out = h_last.T @ d_out
    gb_out = float(d_out.sum())
    # gradient flowing into the current layer's hidden states from above
    dh_seq = np.zeros((T, B, H))
    dh_seq[-1] = np.outer(d_out, w.w_out)
    gW = [None] * w.layers
    gb = [None] * w.layers
    for layer in reversed(range(w.layers)):
        Wl = w.W[layer]
        in_size = Wl.shape[1] - H
        Wh = Wl[:, in_size:]
        inputs, hs, acts, cs, tcs = caches[layer]
        dz = np.empty((T, B, 4 * H))
        dh_next = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t in reversed(range(T)):
            a = acts[t]
            i, f, o, g = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
            tc = tcs[t]
            dh = dh_seq[t] + dh_next
            dc += dh * o * (1.0 - tc * tc)
            d = dz[t]
            d[:, :H] = dc * g * i * (1.0 - i)
            d[:, H:2 * H] = dc * cs[t] * f * (1.0 - f)
            d[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            d[:, 3 * H:] = dc * i * (1.0 - g * g)
            dh_next = d @ Wh
            dc *= f
        dz2 = dz.reshape(T * B, 4 * H)
        dW = np.empty_like(Wl)
        dW[:, :in_size] = dz2.T @ inputs.reshape(T * B, in_size)
        dW[:, in_size:] = dz2.T @ hs[:-1].reshape(T * B, H)
        gW[layer], gb[layer] = dW, dz2.sum(axis=0)
        dh_seq = dz @ Wl[:, :in_size]
    return LstmWeights(gW, gb, gw_out, gb_out)


def lstm_forward(w: LstmWeights, window) -> float:
    """Scalar prediction for one (already normalized) input window."""
    if not w.is_finite():
        raise ValueError("LSTM weights contain non-finite values")
    out, _ = forward(w, np.asarray(window, dtype=np.float64)[None, :])
    return float(out[0])


def mse_loss_grad(w: LstmWeights, X, y) -> tuple[float, LstmWeights]:
    """Mean squared error over the batch and its gradient."""
    y = np.asarray(y, dtype=np.float64).ravel()
    out, cache = forward(w, X)
    err = out - y
    loss = float(np.mean(err * err))
    return loss, backward(w, cache, 2.0 * err / y.size)


@dataclass
class Adam:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_lstm(w: LstmWeights, X, y, epochs: int = 200, lr: float = 1e-2) -> tuple[LstmWeights, list]:
    """Full-batch Adam on mean squared error. Returns the final weights and per-epoch loss.

    A step that would raise the loss is discarded and the step size halved (it
    recovers by 10% per accepted step, up to ``lr``), so the loss history is
    non-increasing. Each epoch costs one forward/backward pass either way.
    """
    opt = Adam(lr=lr)
    theta = w.flat()
    loss, grad = mse_loss_grad(w, X, y)
    losses = [loss]
    for _ in range(epochs):
        cand_theta = opt.step(theta, grad.flat())
        cand = w.unflat(cand_theta)
        c_loss, c_grad = mse_loss_grad(cand, X, y)
        if np.isfinite(c_loss) and c_loss <= loss:
            w, theta, loss, grad = cand, cand_theta, c_loss, c_grad
            opt.lr = min(lr, opt.lr * 1.1)
        else:
            opt.lr *= 0.5
        losses.append(loss)
    return w, losses
