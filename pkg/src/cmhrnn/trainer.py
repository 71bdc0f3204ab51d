"""Dataset preparation, teacher-forced mini-batch training and resumable train state."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import hrnn
from .codec import LeadSheet, MeterError, concatenate, parse_lead_sheet, transpose_to_c
from .hrnn import Batch, TierConfig

log = logging.getLogger(__name__)

SPLIT_RATIOS = (0.8, 0.1, 0.1)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int


def split_dataset(corpus: Sequence, seed: int = 0) -> DatasetSplit:
    """Shuffle with ``seed`` and cut 0.8 / 0.1 / 0.1."""
    n = len(corpus)
    if n == 0:
        raise ValueError("cannot split an empty corpus")
    if n < 10:
        log.warning("corpus has only %d items; the split is degenerate", n)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(SPLIT_RATIOS[0] * n))
    n_val = int(SPLIT_RATIOS[1] * n)
    items = [corpus[i] for i in order]
    return DatasetSplit(items[:n_train], items[n_train : n_train + n_val], items[n_train + n_val :], seed)


def preprocess_corpus(documents: Sequence[dict]) -> list[LeadSheet]:
    """Parse, drop non-4/4 songs, merge the sections of each song in listed order, transpose to C.

    Sections are grouped by their ``song`` field (falling back to ``title``).
    """
    songs: dict[str, list[LeadSheet]] = {}
    skipped = set()
    for doc in documents:
        song = doc.get("song") or doc.get("title", "")
        if song in skipped:
            continue
        try:
            ls = parse_lead_sheet(doc)
        except MeterError as exc:
            log.info("skipping %r: %s", song, exc)
            skipped.add(song)
            songs.pop(song, None)
            continue
        songs.setdefault(song, []).append(ls)
    out = []
    for song, sections in songs.items():
        merged = concatenate(sections, title=song)
        out.append(transpose_to_c(merged))
    return out


# ---------------------------------------------------------------------------


@dataclass
class TrainHyper:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    bptt: int = 64
    patience: int = 10
    seed: int = 0


class Adam:
    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class EpochRecord:
    epoch: int
    train_total: float
    train_pitch: float
    train_duration: float
    train_bar: float
    val_total: float | None
    val_pitch: float | None
    val_duration: float | None
    val_bar: float | None
    seconds: float


@dataclass
class TrainReport:
    fingerprint: str
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float | None = None
    stopped_early: bool = False

    @property
    def wall_clock(self) -> float:
        return sum(r.seconds for r in self.records)

    def jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "fingerprint": self.fingerprint,
            "epochs": len(self.records),
            "best_epoch": self.best_epoch,
            "best_val_total": self.best_val,
            "stopped_early": self.stopped_early,
            "final": asdict(last) if last else None,
            "wall_clock_seconds": self.wall_clock,
        }

    def without_timing(self) -> list[dict]:
        return [{k: v for k, v in asdict(r).items() if k != "seconds"} for r in self.records]


def fingerprint(cfg: TierConfig, hyper: TrainHyper) -> str:
    blob = json.dumps({"config": cfg.to_dict(), "hyper": asdict(hyper)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_sequence(item) -> tuple:
    if isinstance(item, LeadSheet):
        return item.events, item.pickup
    return tuple(item), 0


def batches(items: Sequence, cfg: TierConfig, batch_size: int, order=None) -> list[Batch]:
    order = range(len(items)) if order is None else order
    order = list(order)
    out = []
    for i in range(0, len(order), batch_size):
        seqs = [_as_sequence(items[j]) for j in order[i : i + batch_size]]
        out.append(hrnn.make_batch([s for s, _ in seqs], cfg, [p for _, p in seqs]))
    return out


def evaluate_items(params, cfg: TierConfig, items: Sequence, batch_size: int = 16) -> hrnn.LossResult:
    """Per-head mean CE over every trained target in ``items``."""
    sums = np.zeros(3)
    count = 0
    for b in batches(items, cfg, batch_size):
        r = hrnn.evaluate(params, cfg, b)
        sums += np.array([r.pitch, r.duration, r.bar]) * r.count
        count += r.count
    cp, cd, cb = sums / max(count, 1)
    a1, a2, a3 = cfg.alphas
    return hrnn.LossResult(a1 * cp + a2 * cd + a3 * cb, cp, cd, cb, count)


class Trainer:
    """Resumable training loop; all randomness derives from ``hyper.seed`` and the epoch index."""

    def __init__(self, cfg: TierConfig, params: dict, split: DatasetSplit, hyper: TrainHyper | None = None):
        self.cfg = hrnn.validate_config(cfg)
        self.hyper = hyper or TrainHyper()
        self.split = split
        self.params = {k: v.copy() for k, v in params.items()}
        self.best_params = {k: v.copy() for k, v in params.items()}
        self.opt = Adam(self.params, self.hyper.beta1, self.hyper.beta2, self.hyper.eps)
        self.epoch = 0
        self.bad_epochs = 0
        self.report = TrainReport(fingerprint(self.cfg, self.hyper))
        P = self.cfg.top_fs
        self.chunk = max(P, -(-self.hyper.bptt // P) * P)
        self._val_batches = None

    @property
    def finished(self) -> bool:
        return self.report.stopped_early or self.epoch >= self.hyper.epochs

    def _train_epoch(self) -> hrnn.LossResult:
        h = self.hyper
        order = np.random.default_rng([h.seed, self.epoch]).permutation(len(self.split.train))
        sums = np.zeros(4)
        count = 0
        for batch in batches(self.split.train, self.cfg, h.batch_size, order):
            state = None
            for start in range(0, batch.length, self.chunk):
                stop = min(start + self.chunk, batch.length)
                if not batch.mask[:, start:stop].any():
                    # still advance the recurrent state over context-only chunks
                    _, _, state = hrnn.forward(self.params, self.cfg, batch.x, batch.acc, start, stop, state)
                    continue
                res, grads, state = hrnn.loss_and_grads(self.params, self.cfg, batch, start, stop, state)
                if not np.isfinite(res.total):
                    raise TrainingDiverged(f"non-finite loss at epoch {self.epoch}, chunk {start}: {res}")
                clip_gradients(grads, h.clip_norm)
                self.opt.step(self.params, grads, h.learning_rate)
                sums += np.array([res.total, res.pitch, res.duration, res.bar]) * res.count
                count += res.count
        t, p, d, b = sums / max(count, 1)
        return hrnn.LossResult(t, p, d, b, count)

    def run(self, epochs: int | None = None) -> TrainReport:
        """Train for ``epochs`` more epochs (default: until ``hyper.epochs`` or early stop)."""
        target = self.hyper.epochs if epochs is None else min(self.epoch + epochs, self.hyper.epochs)
        while self.epoch < target and not self.report.stopped_early:
            t0 = time.perf_counter()
            tr = self._train_epoch()
            if self.split.validation:
                va = evaluate_items(self.params, self.cfg, self.split.validation, self.hyper.batch_size)
                vals = (va.total, va.pitch, va.duration, va.bar)
            else:
                va, vals = None, (None,) * 4
            rec = EpochRecord(self.epoch, tr.total, tr.pitch, tr.duration, tr.bar, *vals,
                              seconds=time.perf_counter() - t0)
            self.report.records.append(rec)
            score = va.total if va is not None else tr.total
            if self.report.best_val is None or score < self.report.best_val:
                self.report.best_val = score
                self.report.best_epoch = self.epoch
                self.best_params = {k: v.copy() for k, v in self.params.items()}
                self.bad_epochs = 0
            else:
                self.bad_epochs += 1
                if va is not None and self.bad_epochs >= self.hyper.patience:
                    self.report.stopped_early = True
            log.info("epoch %d train %.4f val %s", self.epoch, tr.total,
                     "-" if va is None else f"{va.total:.4f}")
            self.epoch += 1
        return self.report

    # --- resumable state -------------------------------------------------

    def save_state(self, path) -> Path:
        path = Path(path)
        arrays = {}
        for k in self.params:
            arrays["p/" + k] = self.params[k]
            arrays["best/" + k] = self.best_params[k]
            arrays["m/" + k] = self.opt.m[k]
            arrays["v/" + k] = self.opt.v[k]
        meta = {
            "config": self.cfg.to_dict(), "hyper": asdict(self.hyper), "epoch": self.epoch,
            "adam_t": self.opt.t, "bad_epochs": self.bad_epochs,
            "report": {"fingerprint": self.report.fingerprint, "best_epoch": self.report.best_epoch,
                       "best_val": self.report.best_val, "stopped_early": self.report.stopped_early,
                       "records": [asdict(r) for r in self.report.records]},
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path

    @classmethod
    def load_state(cls, path, split: DatasetSplit) -> "Trainer":
        with np.load(path) as z:
            meta = json.loads(z["meta"].tobytes())
            cfg = TierConfig.from_dict(meta["config"])
            hyper = TrainHyper(**meta["hyper"])
            names = [k[2:] for k in z.files if k.startswith("p/")]
            self = cls(cfg, {k: z["p/" + k] for k in names}, split, hyper)
            self.best_params = {k: z["best/" + k].copy() for k in names}
            self.opt.m = {k: z["m/" + k].copy() for k in names}
            self.opt.v = {k: z["v/" + k].copy() for k in names}
        self.opt.t = meta["adam_t"]
        self.epoch = meta["epoch"]
        self.bad_epochs = meta["bad_epochs"]
        r = meta["report"]
        self.report = TrainReport(r["fingerprint"], [EpochRecord(**x) for x in r["records"]],
                                  r["best_epoch"], r["best_val"], r["stopped_early"])
        return self


def train(cfg: TierConfig, params: dict, split: DatasetSplit, hyper: TrainHyper | None = None):
    """Train to completion; returns the best-validation parameters and the report."""
    trainer = Trainer(cfg, params, split, hyper)
    report = trainer.run()
    return trainer.best_params, report

