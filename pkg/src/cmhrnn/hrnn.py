"""Hierarchical multi-tier recurrent network over event vectors.

Tiers are numbered from the bottom: tier 1 is the convolutional sliding-window
tier that predicts events, tiers 2 and 3 are LSTM tiers reading non-overlapping
frames. Upper tier ``k`` at step ``s`` reads frame ``s - 1`` (events
``[(s-1)*FS^k, s*FS^k)``; zeros for ``s = 0``) and its output conditions the
predictions of targets ``[s*FS^k, (s+1)*FS^k)``. The bottom tier predicts
target ``t`` from the window of events ``[t - FS^1, t)``, so every prediction
depends on past events only.

Parameters live in a flat ``dict[str, np.ndarray]`` whose keys and shapes are
fixed by :func:`param_shapes`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import nn
from .codec import (EVENT_DIM, N_BAR, N_DURATION, N_PITCH, MusicEvent,
                    acc_one_hot, compute_accumulated_time, encode_events, event_targets)

ACC_DIM = N_DURATION
PITCH_HIDDEN = N_PITCH
DURATION_HIDDEN = N_DURATION


class ConfigError(ValueError):
    pass


class InsufficientLengthError(ValueError):
    pass


@dataclass(frozen=True)
class TierConfig:
    frame_sizes: tuple[int, ...] = (2, 2, 16)  # (FS^1, FS^2[, FS^3]), bottom first
    hidden: int = 256
    lstm_layers: int = 2
    residual: bool = True
    use_acc_t: bool = True
    alphas: tuple[float, float, float] = (0.4, 0.3, 0.3)

    def __post_init__(self):
        object.__setattr__(self, "frame_sizes", tuple(int(f) for f in self.frame_sizes))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    @property
    def n_tiers(self) -> int:
        return len(self.frame_sizes)

    def fs(self, k: int) -> int:
        return self.frame_sizes[k - 1]

    @property
    def top_fs(self) -> int:
        return self.frame_sizes[-1]

    @property
    def upper_tiers(self) -> list[int]:
        """Upper tier numbers, top tier first."""
        return list(range(self.n_tiers, 1, -1))

    @property
    def bottom_width(self) -> int:
        return self.hidden + (ACC_DIM if self.use_acc_t else 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frame_sizes"] = list(self.frame_sizes)
        d["alphas"] = list(self.alphas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TierConfig":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def validate_config(cfg: TierConfig) -> TierConfig:
    fs = cfg.frame_sizes
    if cfg.n_tiers not in (2, 3):
        raise ConfigError(f"tier count must be 2 or 3, got {cfg.n_tiers}")
    if any(f < 1 for f in fs):
        raise ConfigError(f"frame sizes must be positive: {fs}")
    if fs[0] != fs[1]:
        raise ConfigError(f"FS^1 must equal FS^2, got {fs[0]} and {fs[1]}")
    for k in range(1, cfg.n_tiers - 1):
        if fs[k + 1] % fs[k]:
            raise ConfigError(f"FS^{k + 2}={fs[k + 1]} is not a multiple of FS^{k + 1}={fs[k]}")
        if fs[k + 1] <= fs[k]:
            raise ConfigError(f"FS^{k + 2}={fs[k + 1]} must exceed FS^{k + 1}={fs[k]}")
    if cfg.hidden < 1 or cfg.lstm_layers < 1:
        raise ConfigError("hidden size and LSTM depth must be positive")
    if len(cfg.alphas) != 3 or any(a < 0 for a in cfg.alphas):
        raise ConfigError(f"need three non-negative loss weights, got {cfg.alphas}")
    return cfg


def upsample_links(cfg: TierConfig) -> list[tuple[int, int, int]]:
    """``(source tier, destination tier, projections per source step)``."""
    if cfg.n_tiers == 2:
        return [(2, 1, cfg.fs(2))]
    links = [(3, 2, cfg.fs(3) // cfg.fs(2)), (2, 1, cfg.fs(2))]
    if cfg.residual:
        links.append((3, 1, cfg.fs(3)))
    return links


def param_shapes(cfg: TierConfig) -> dict[str, tuple[int, ...]]:
    H, D = cfg.hidden, EVENT_DIM
    shapes: dict[str, tuple[int, ...]] = {}
    for k in cfg.upper_tiers:
        shapes[f"tier{k}.W_f"] = (cfg.fs(k) * D, H)
        shapes[f"tier{k}.b_f"] = (H,)
        if k != cfg.n_tiers:
            shapes[f"tier{k}.W_oi"] = (H, H)
        for layer in range(cfg.lstm_layers):
            shapes[f"tier{k}.lstm{layer}.Wx"] = (H, 4 * H)
            shapes[f"tier{k}.lstm{layer}.Wh"] = (H, 4 * H)
            shapes[f"tier{k}.lstm{layer}.b"] = (4 * H,)
    for src, dst, r in upsample_links(cfg):
        shapes[f"up{src}{dst}.W"] = (r, H, H)
        shapes[f"up{src}{dst}.b"] = (r, H)
    shapes["bottom.W_i"] = (cfg.fs(1) * D, H)
    shapes["bottom.b_i"] = (H,)
    O = cfg.bottom_width
    shapes["pitch1.W"] = (O, PITCH_HIDDEN)
    shapes["pitch1.b"] = (PITCH_HIDDEN,)
    shapes["pitch2.W"] = (PITCH_HIDDEN, N_PITCH)
    shapes["pitch2.b"] = (N_PITCH,)
    shapes["dur1.W"] = (O, DURATION_HIDDEN)
    shapes["dur1.b"] = (DURATION_HIDDEN,)
    shapes["dur2.W"] = (DURATION_HIDDEN, N_DURATION)
    shapes["dur2.b"] = (N_DURATION,)
    shapes["bar.W"] = (N_DURATION, N_BAR)
    shapes["bar.b"] = (N_BAR,)
    return shapes


def init_params(cfg: TierConfig, seed: int | np.random.Generator = 0) -> dict[str, np.ndarray]:
    """Glorot-uniform matrices, zero biases, forget-gate bias 1."""
    validate_config(cfg)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    H = cfg.hidden
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b") or name.endswith(".b_f") or name.endswith(".b_i"):
            p = np.zeros(shape)
            if ".lstm" in name:
                p[H : 2 * H] = 1.0
        elif len(shape) == 3:
            p = nn.glorot(rng, shape, shape[1], shape[2])
        else:
            p = nn.glorot(rng, shape, shape[0], shape[1])
        params[name] = p
    return params


# ---------------------------------------------------------------------------
# framing


def frame_events(events: Sequence, k: int, fs: int) -> list[tuple]:
    """Group events into frames: non-overlapping for ``k > 1``, stride-1 windows for ``k = 1``."""
    n = len(events)
    if n < fs:
        raise InsufficientLengthError(f"tier {k} needs at least {fs} events, got {n}")
    if k == 1:
        return [tuple(events[i : i + fs]) for i in range(n - fs + 1)]
    return [tuple(events[i * fs : (i + 1) * fs]) for i in range(n // fs)]


# ---------------------------------------------------------------------------
# state and outputs


@dataclass
class ForwardState:
    """Per-tier LSTM ``(h, c)`` pairs, one per layer."""

    lstm: dict[int, list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=dict)

    @classmethod
    def zeros(cls, cfg: TierConfig, batch: int) -> "ForwardState":
        H = cfg.hidden
        return cls({k: [(np.zeros((batch, H)), np.zeros((batch, H))) for _ in range(cfg.lstm_layers)]
                    for k in cfg.upper_tiers})


@dataclass
class EventLogits:
    pitch: np.ndarray
    duration: np.ndarray
    bar: np.ndarray


@dataclass
class LossResult:
    total: float
    pitch: float
    duration: float
    bar: float
    count: int
    grads: EventLogits | None = None


@dataclass
class Batch:
    x: np.ndarray        # (B, N, EVENT_DIM)
    acc: np.ndarray      # (B, N, ACC_DIM), acc_t after each event
    targets: np.ndarray  # (B, N, 3) pitch / duration / bar class indices
    mask: np.ndarray     # (B, N) 1.0 where the target is trained on

    @property
    def length(self) -> int:
        return self.x.shape[1]


def make_batch(sequences: Sequence[Sequence[MusicEvent]], cfg: TierConfig,
               pickups: Sequence[int] | None = None) -> Batch:
    """Encode and right-pad sequences to a common length that is a multiple of the top frame size.

    The first ``FS^1`` events of each sequence are context and carry no loss.
    """
    pickups = pickups or [0] * len(sequences)
    P = cfg.top_fs
    n = max(len(s) for s in sequences)
    n = -(-n // P) * P
    B = len(sequences)
    x = np.zeros((B, n, EVENT_DIM))
    acc = np.zeros((B, n, ACC_DIM))
    tg = np.zeros((B, n, 3), dtype=np.int64)
    mask = np.zeros((B, n))
    for b, (seq, pu) in enumerate(zip(sequences, pickups)):
        m = len(seq)
        x[b, :m] = encode_events(seq)
        acc[b, :m] = acc_one_hot(compute_accumulated_time(seq, pu))
        tg[b, :m] = event_targets(seq)
        mask[b, cfg.fs(1) : m] = 1.0
    return Batch(x, acc, tg, mask)


# ---------------------------------------------------------------------------
# forward


def _upsample(o, W, b):
    B, S, H = o.shape
    r = W.shape[0]
    return (np.einsum("bsh,rhk->bsrk", o, W) + b).reshape(B, S * r, W.shape[2])


def _upsample_backward(du, o, W):
    B, S, H = o.shape
    r = W.shape[0]
    du = du.reshape(B, S, r, -1)
    dW = np.einsum("bsh,bsrk->rhk", o, du)
    db = du.sum(axis=(0, 1))
    do = np.einsum("bsrk,rhk->bsh", du, W)
    return do, dW, db


def upsample(o: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Apply ``r`` learned projections to each upper-tier output: ``(B, S, H) -> (B, S*r, H)``."""
    return _upsample(np.asarray(o), W, b)


def tier_forward(params, cfg: TierConfig, k: int, frames, conditioning=None, state=None):
    """One upper tier: frame embedding (+ injected conditioning) into a stacked LSTM.

    ``frames`` is ``(B, S, FS^k * EVENT_DIM)``; ``conditioning`` is the upsampled
    output of tier ``k + 1`` aligned to the ``S`` steps, required exactly when
    ``k`` is a middle tier. Returns ``(outputs, state, cache)``.
    """
    if k == 1 or k > cfg.n_tiers:
        raise ConfigError(f"tier {k} is not an upper tier")
    top = k == cfg.n_tiers
    if top and conditioning is not None:
        raise ValueError("the top tier takes no conditioning input")
    if not top and conditioning is None:
        raise ValueError(f"tier {k} requires conditioning from tier {k + 1}")
    B, S, _ = frames.shape
    if frames.shape[2] != cfg.fs(k) * EVENT_DIM:
        raise ValueError(f"tier {k} frames have width {frames.shape[2]}, expected {cfg.fs(k) * EVENT_DIM}")
    inp = frames @ params[f"tier{k}.W_f"] + params[f"tier{k}.b_f"]
    if not top:
        if conditioning.shape != (B, S, cfg.hidden):
            raise ValueError(f"conditioning shape {conditioning.shape} != {(B, S, cfg.hidden)}")
        inp = inp + conditioning @ params[f"tier{k}.W_oi"]
    init = (state or ForwardState.zeros(cfg, B)).lstm[k]
    h = inp
    caches, final = [], []
    for layer in range(cfg.lstm_layers):
        p = f"tier{k}.lstm{layer}"
        h, hc, cache = nn.lstm_forward(h, params[p + ".Wx"], params[p + ".Wh"], params[p + ".b"], *init[layer])
        caches.append(cache)
        final.append(hc)
    return h, final, (frames, conditioning, caches)


def _tier_backward(params, cfg, k, do, cache, grads):
    frames, conditioning, caches = cache
    dh = do
    for layer in reversed(range(cfg.lstm_layers)):
        p = f"tier{k}.lstm{layer}"
        dh, dWx, dWh, db = nn.lstm_backward(dh, caches[layer])
        grads[p + ".Wx"] += dWx
        grads[p + ".Wh"] += dWh
        grads[p + ".b"] += db
    B, S, _ = frames.shape
    grads[f"tier{k}.W_f"] += frames.reshape(B * S, -1).T @ dh.reshape(B * S, -1)
    grads[f"tier{k}.b_f"] += dh.sum(axis=(0, 1))
    if conditioning is None:
        return None
    H = cfg.hidden
    grads[f"tier{k}.W_oi"] += conditioning.reshape(-1, H).T @ dh.reshape(-1, H)
    return dh @ params[f"tier{k}.W_oi"].T


def bottom_forward(params, cfg: TierConfig, x_ext, conditionings, acc_in):
    """Sliding-window map plus summed conditioning, concatenated with acc_t.

    ``x_ext`` is ``(B, FS^1 + T, D)``; the window for local target ``t`` is
    ``x_ext[:, t : t + FS^1]``. Each conditioning array must be ``(B, T, H)``.
    """
    F = cfg.fs(1)
    B, L, D = x_ext.shape
    T = L - F
    Wi = params["bottom.W_i"].reshape(F, D, cfg.hidden)
    z = np.broadcast_to(params["bottom.b_i"], (B, T, cfg.hidden)).copy()
    for f in range(F):
        z += x_ext[:, f : f + T] @ Wi[f]
    for c in conditionings:
        if c.shape != z.shape:
            raise ValueError(f"conditioning shape {c.shape} misaligned with bottom tier {z.shape}")
        z += c
    if cfg.use_acc_t:
        return np.concatenate([z, acc_in], axis=-1)
    return z


def predict(params, o1):
    """Predictive heads: pitch and duration from ``o1``, bar from the duration logits."""
    hp = o1 @ params["pitch1.W"] + params["pitch1.b"]
    ap = np.maximum(hp, 0.0)
    p = ap @ params["pitch2.W"] + params["pitch2.b"]
    hd = o1 @ params["dur1.W"] + params["dur1.b"]
    ad = np.maximum(hd, 0.0)
    d = ad @ params["dur2.W"] + params["dur2.b"]
    bar = d @ params["bar.W"] + params["bar.b"]
    return EventLogits(p, d, bar), (o1, hp, ap, hd, ad, d)


def _predict_backward(params, dl: EventLogits, cache, grads):
    o1, hp, ap, hd, ad, d = cache
    W = o1.shape[-1]

    def acc(name, a, g):
        grads[name + ".W"] += a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        grads[name + ".b"] += g.reshape(-1, g.shape[-1]).sum(axis=0)

    acc("bar", d, dl.bar)
    dd = dl.duration + dl.bar @ params["bar.W"].T
    acc("dur2", ad, dd)
    dhd = (dd @ params["dur2.W"].T) * (hd > 0)
    acc("dur1", o1, dhd)
    acc("pitch2", ap, dl.pitch)
    dhp = (dl.pitch @ params["pitch2.W"].T) * (hp > 0)
    acc("pitch1", o1, dhp)
    do1 = dhd @ params["dur1.W"].T + dhp @ params["pitch1.W"].T
    assert do1.shape[-1] == W
    return do1


def _extended(a, start, stop, pad):
    """``a[:, start - pad : stop]`` with zero rows where the index is negative."""
    B, N, D = a.shape
    out = np.zeros((B, pad + stop - start, D))
    lo = start - pad
    src_lo = max(lo, 0)
    out[:, src_lo - lo :] = a[:, src_lo:stop]
    return out


def forward(params, cfg: TierConfig, x, acc, start: int = 0, stop: int | None = None,
            state: ForwardState | None = None):
    """Teacher-forced logits for targets ``[start, stop)``.

    ``x`` and ``acc`` hold the whole (padded) sequence; ``start`` and the chunk
    length must be multiples of the top frame size. Returns
    ``(EventLogits, cache, final_state)``.
    """
    B, N, _ = x.shape
    stop = N if stop is None else stop
    P = cfg.top_fs
    T = stop - start
    if start % P or T % P or T <= 0 or stop > N:
        raise ValueError(f"chunk [{start}, {stop}) must be aligned to the top frame size {P}")
    state = state or ForwardState.zeros(cfg, B)
    x_ext = _extended(x, start, stop, P)
    acc_in = _extended(acc, start, stop, 1)[:, :T]

    outs, caches, new_state = {}, {}, ForwardState({})
    for k in cfg.upper_tiers:
        fs = cfg.fs(k)
        frames = x_ext[:, P - fs : P + T - fs].reshape(B, T // fs, fs * EVENT_DIM)
        cond = None
        if k != cfg.n_tiers:
            cond = _upsample(outs[k + 1], params[f"up{k + 1}{k}.W"], params[f"up{k + 1}{k}.b"])
        o, final, cache = tier_forward(params, cfg, k, frames, cond, state)
        outs[k], caches[k] = o, cache
        new_state.lstm[k] = final

    conds = [_upsample(outs[src], params[f"up{src}1.W"], params[f"up{src}1.b"])
             for src, dst, _ in upsample_links(cfg) if dst == 1]
    F = cfg.fs(1)
    o1 = bottom_forward(params, cfg, x_ext[:, P - F : P + T], conds, acc_in)
    logits, pcache = predict(params, o1)
    cache = {"x_ext": x_ext, "outs": outs, "tiers": caches, "predict": pcache, "P": P, "T": T}
    return logits, cache, new_state


def backward(params, cfg: TierConfig, cache, dlogits: EventLogits) -> dict[str, np.ndarray]:
    """Exact gradients of a scalar whose logit gradients are ``dlogits``."""
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    do1 = _predict_backward(params, dlogits, cache["predict"], grads)
    H, F, P, T = cfg.hidden, cfg.fs(1), cache["P"], cache["T"]
    dz = do1[..., :H]
    x_ext = cache["x_ext"]
    xw = x_ext[:, P - F : P + T]
    B = x_ext.shape[0]
    Wi_grad = grads["bottom.W_i"].reshape(F, EVENT_DIM, H)
    flat_dz = dz.reshape(B * T, H)
    for f in range(F):
        Wi_grad[f] += xw[:, f : f + T].reshape(B * T, -1).T @ flat_dz
    grads["bottom.b_i"] += flat_dz.sum(axis=0)

    outs = cache["outs"]
    douts = {k: np.zeros_like(o) for k, o in outs.items()}
    for src, dst, _ in upsample_links(cfg):
        if dst == 1:
            do, dW, db = _upsample_backward(dz, outs[src], params[f"up{src}1.W"])
            douts[src] += do
            grads[f"up{src}1.W"] += dW
            grads[f"up{src}1.b"] += db
    for k in reversed(cfg.upper_tiers):  # bottom-most upper tier first
        dcond = _tier_backward(params, cfg, k, douts[k], cache["tiers"][k], grads)
        if dcond is not None:
            do, dW, db = _upsample_backward(dcond, outs[k + 1], params[f"up{k + 1}{k}.W"])
            douts[k + 1] += do
            grads[f"up{k + 1}{k}.W"] += dW
            grads[f"up{k + 1}{k}.b"] += db
    return grads


def loss(logits: EventLogits, targets, mask=None, alphas=(0.4, 0.3, 0.3), with_grads: bool = True) -> LossResult:
    """Weighted sum of per-head cross entropies, averaged over the masked targets."""
    targets = np.asarray(targets)
    if mask is None:
        mask = np.ones(targets.shape[:-1])
    n = float(mask.sum())
    denom = max(n, 1.0)
    a1, a2, a3 = alphas
    cp, gp = nn.cross_entropy(logits.pitch, targets[..., 0], mask)
    cd, gd = nn.cross_entropy(logits.duration, targets[..., 1], mask)
    cb, gb = nn.cross_entropy(logits.bar, targets[..., 2], mask)
    cp, cd, cb = cp / denom, cd / denom, cb / denom
    grads = None
    if with_grads:
        grads = EventLogits(gp * (a1 / denom), gd * (a2 / denom), gb * (a3 / denom))
    return LossResult(a1 * cp + a2 * cd + a3 * cb, cp, cd, cb, int(n), grads)


def loss_and_grads(params, cfg: TierConfig, batch: Batch, start: int = 0, stop: int | None = None,
                   state: ForwardState | None = None):
    stop = batch.length if stop is None else stop
    logits, cache, new_state = forward(params, cfg, batch.x, batch.acc, start, stop, state)
    res = loss(logits, batch.targets[:, start:stop], batch.mask[:, start:stop], cfg.alphas)
    grads = backward(params, cfg, cache, res.grads)
    return res, grads, new_state


def evaluate(params, cfg: TierConfig, batch: Batch) -> LossResult:
    logits, _, _ = forward(params, cfg, batch.x, batch.acc)
    return loss(logits, batch.targets, batch.mask, cfg.alphas, with_grads=False)


# ---------------------------------------------------------------------------
# incremental decoding


class Decoder:
    """Step-by-step evaluation of the same network for autoregressive sampling.

    Push events one at a time; :meth:`next_logits` returns the prediction for the
    event that would follow the pushed ones.
    """

    def __init__(self, params, cfg: TierConfig):
        self.params, self.cfg = params, cfg
        self.x: list[np.ndarray] = []
        self.acc: list[np.ndarray] = []
        self.state = ForwardState.zeros(cfg, 1)
        self.outputs: dict[int, list[np.ndarray]] = {k: [] for k in cfg.upper_tiers}

    def push(self, x_vec: np.ndarray, acc_vec: np.ndarray):
        self.x.append(np.asarray(x_vec, dtype=float))
        self.acc.append(np.asarray(acc_vec, dtype=float))

    def _frame(self, lo: int, hi: int) -> np.ndarray:
        rows = [self.x[i] if i >= 0 else np.zeros(EVENT_DIM) for i in range(lo, hi)]
        return np.concatenate(rows)[None, :]

    def _tier_step(self, k: int, s: int):
        p, cfg = self.params, self.cfg
        fs = cfg.fs(k)
        inp = self._frame((s - 1) * fs, s * fs) @ p[f"tier{k}.W_f"] + p[f"tier{k}.b_f"]
        if k != cfg.n_tiers:
            r = cfg.fs(k + 1) // fs
            j = s % r
            up = self.outputs[k + 1][s // r] @ p[f"up{k + 1}{k}.W"][j] + p[f"up{k + 1}{k}.b"][j]
            inp = inp + up @ p[f"tier{k}.W_oi"]
        h = inp
        new = []
        for layer, (h0, c0) in enumerate(self.state.lstm[k]):
            pre = f"tier{k}.lstm{layer}"
            h, c = nn.lstm_step(h, p[pre + ".Wx"], p[pre + ".Wh"], p[pre + ".b"], h0, c0)
            new.append((h, c))
        self.state.lstm[k] = new
        self.outputs[k].append(h)

    def next_logits(self) -> EventLogits:
        p, cfg = self.params, self.cfg
        t = len(self.x)
        for k in cfg.upper_tiers:
            while len(self.outputs[k]) <= t // cfg.fs(k):
                self._tier_step(k, len(self.outputs[k]))
        F = cfg.fs(1)
        window = self._frame(t - F, t).reshape(1, F, EVENT_DIM)
        Wi = p["bottom.W_i"].reshape(F, EVENT_DIM, cfg.hidden)
        z = p["bottom.b_i"][None, :].copy()
        for f in range(F):
            z = z + window[:, f] @ Wi[f]
        for src, dst, r in upsample_links(cfg):
            if dst == 1:
                j = t % r
                z = z + self.outputs[src][t // r] @ p[f"up{src}1.W"][j] + p[f"up{src}1.b"][j]
        if cfg.use_acc_t:
            a = self.acc[t - 1] if t > 0 else np.zeros(ACC_DIM)
            z = np.concatenate([z, a[None, :]], axis=-1)
        logits, _ = predict(p, z)
        return EventLogits(logits.pitch[0], logits.duration[0], logits.bar[0])
