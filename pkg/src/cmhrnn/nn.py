"""Dense-layer, LSTM and cross-entropy primitives with hand-written gradients (float64)."""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    # split by sign so large magnitudes neither overflow nor lose precision
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def log_softmax(z, axis=-1):
    m = z.max(axis=axis, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=axis, keepdims=True))


def softmax(z, axis=-1):
    return np.exp(log_softmax(z, axis))


def cross_entropy(logits, target, mask):
    """Summed masked CE and its gradient w.r.t. the logits (unnormalized)."""
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    total = -(picked * mask).sum()
    grad = np.exp(logp)
    np.put_along_axis(grad, target[..., None], np.take_along_axis(grad, target[..., None], -1) - 1, -1)
    grad *= mask[..., None]
    return total, grad


def lstm_forward(xs, Wx, Wh, b, h0, c0):
    """Run one LSTM layer over ``xs`` of shape ``(B, S, In)``.

    Gate layout in the 4H axis is input, forget, output, candidate.
    """
    B, S, _ = xs.shape
    H = Wh.shape[0]
    pre_x = xs @ Wx + b
    hs = np.empty((B, S, H))
    cs = np.empty((B, S, H))
    gates = np.empty((B, S, 4 * H))
    h, c = h0, c0
    for s in range(S):
        a = pre_x[:, s] + h @ Wh
        ifo = sigmoid(a[:, : 3 * H])
        g = np.tanh(a[:, 3 * H :])
        c = ifo[:, H : 2 * H] * c + ifo[:, :H] * g
        h = ifo[:, 2 * H : 3 * H] * np.tanh(c)
        gates[:, s, : 3 * H] = ifo
        gates[:, s, 3 * H :] = g
        hs[:, s] = h
        cs[:, s] = c
    cache = (xs, Wx, Wh, h0, c0, hs, cs, gates)
    return hs, (h, c), cache


def lstm_step(x, Wx, Wh, b, h, c):
    H = Wh.shape[0]
    a = x @ Wx + b + h @ Wh
    ifo = sigmoid(a[..., : 3 * H])
    g = np.tanh(a[..., 3 * H :])
    c = ifo[..., H : 2 * H] * c + ifo[..., :H] * g
    h = ifo[..., 2 * H : 3 * H] * np.tanh(c)
    return h, c


def lstm_backward(dhs, cache):
    """BPTT through one layer. Initial state is treated as a constant."""
    xs, Wx, Wh, h0, c0, hs, cs, gates = cache
    B, S, H = hs.shape
    da_all = np.empty((B, S, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dWh = np.zeros_like(Wh)
    for s in reversed(range(S)):
        i = gates[:, s, :H]
        f = gates[:, s, H : 2 * H]
        o = gates[:, s, 2 * H : 3 * H]
        g = gates[:, s, 3 * H :]
        c = cs[:, s]
        c_prev = cs[:, s - 1] if s > 0 else c0
        h_prev = hs[:, s - 1] if s > 0 else h0
        tc = np.tanh(c)
        dh = dhs[:, s] + dh_next
        dc = dc_next + dh * o * (1 - tc * tc)
        da = da_all[:, s]
        da[:, :H] = dc * g * i * (1 - i)
        da[:, H : 2 * H] = dc * c_prev * f * (1 - f)
        da[:, 2 * H : 3 * H] = dh * tc * o * (1 - o)
        da[:, 3 * H :] = dc * i * (1 - g * g)
        dWh += h_prev.T @ da
        dh_next = da @ Wh.T
        dc_next = dc * f
    flat_da = da_all.reshape(B * S, 4 * H)
    dWx = xs.reshape(B * S, -1).T @ flat_da
    db = flat_da.sum(axis=0)
    dxs = da_all @ Wx.T
    return dxs, dWx, dWh, db
