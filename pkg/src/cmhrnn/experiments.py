"""Desk-scale experiments on the synthetic corpus, shared by scripts/ and the acceptance tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import hrnn
from .generator import SamplingConfig, generate
from .hrnn import TierConfig
from .metrics import successful_bar_ratio
from .synthetic import synthetic_corpus
from .trainer import DatasetSplit, Trainer, TrainHyper, split_dataset

GREEDY = SamplingConfig(temp_pitch=1e-6, temp_duration=1e-6, temp_bar=1e-6, seed=0)


@dataclass
class MemorizationResult:
    loss_curve: list[float]
    first_below: int | None  # first epoch whose training loss is under the threshold
    exact: list[bool]        # per fragment: greedy regeneration equals the fragment
    sbr: list[float]
    seconds: float

    @property
    def passed(self) -> bool:
        return self.first_below is not None and all(self.exact) and all(s == 1.0 for s in self.sbr)


def memorize(n_fragments: int = 2, seed: int = 0, cfg: TierConfig | None = None, max_epochs: int = 500,
             threshold: float = 0.1, stop_at: float = 0.01, learning_rate: float = 3e-3,
             seed_events: int = 16) -> MemorizationResult:
    """Overfit a few 8-bar fragments, then regenerate each from its seed events and chords.

    Training runs until the loss drops below ``stop_at`` or ``max_epochs`` pass;
    ``first_below`` records when it first crossed ``threshold``.
    """
    t0 = time.perf_counter()
    cfg = cfg or TierConfig(frame_sizes=(2, 2, 16), hidden=64, lstm_layers=2)
    frags = synthetic_corpus(n_fragments, seed=seed)
    split = DatasetSplit(list(frags), [], [], seed)
    hyper = TrainHyper(epochs=max_epochs, batch_size=n_fragments, learning_rate=learning_rate, seed=seed)
    trainer = Trainer(cfg, hrnn.init_params(cfg, seed), split, hyper)
    curve, first = [], None
    while trainer.epoch < max_epochs:
        trainer.run(1)
        loss = trainer.report.records[-1].train_total
        curve.append(loss)
        if first is None and loss < threshold:
            first = trainer.epoch - 1
        if loss < stop_at:
            break
    exact, sbr = [], []
    for ls in frags:
        out = generate(trainer.params, cfg, ls.timeline, ls.events[:seed_events], GREEDY)
        exact.append(out.events == ls.events)
        sbr.append(successful_bar_ratio(out.events, out.pickup))
    return MemorizationResult(curve, first, exact, sbr, time.perf_counter() - t0)


@dataclass
class AccTimeResult:
    seeds: list[int]
    bar_ce_on: list[float] = field(default_factory=list)
    bar_ce_off: list[float] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(a < b for a, b in zip(self.bar_ce_on, self.bar_ce_off))


def acc_time_effect(n_fragments: int = 100, seeds=(0, 1, 2), epochs: int = 8, hidden: int = 32,
                    frame_sizes=(2, 2, 16), learning_rate: float = 3e-3, batch_size: int = 8) -> AccTimeResult:
    """Final validation bar-head CE with acc_t on and off, same data, init seed and schedule."""
    t0 = time.perf_counter()
    res = AccTimeResult(list(seeds))
    for seed in seeds:
        split = split_dataset(synthetic_corpus(n_fragments, seed=seed), seed=seed)
        for use_acc in (True, False):
            cfg = TierConfig(frame_sizes=tuple(frame_sizes), hidden=hidden, lstm_layers=1, use_acc_t=use_acc)
            hyper = TrainHyper(epochs=epochs, batch_size=batch_size, learning_rate=learning_rate,
                               patience=epochs, seed=seed)
            trainer = Trainer(cfg, hrnn.init_params(cfg, seed), split, hyper)
            trainer.run()
            ce = trainer.report.records[-1].val_bar
            (res.bar_ce_on if use_acc else res.bar_ce_off).append(ce)
    res.seconds = time.perf_counter() - t0
    return res
