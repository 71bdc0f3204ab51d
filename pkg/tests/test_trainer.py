import logging

import numpy as np
import pytest

from cmhrnn import hrnn
from cmhrnn.codec import Key, to_document
from cmhrnn.hrnn import TierConfig
from cmhrnn.synthetic import synthetic_corpus
from cmhrnn.trainer import (Adam, Trainer, TrainHyper, TrainingDiverged, clip_gradients, evaluate_items,
                            fingerprint, preprocess_corpus, split_dataset, train)

from .leadsheets import simple_doc

CFG = TierConfig(frame_sizes=(2, 2, 4), hidden=8, lstm_layers=1)


def test_split_sizes_full_corpus():
    s = split_dataset(list(range(5507)), seed=0)
    assert (len(s.train), len(s.validation), len(s.test)) == (4406, 550, 551)
    assert sorted(s.train + s.validation + s.test) == list(range(5507))


def test_split_deterministic_and_seed_sensitive():
    a, b = split_dataset(list(range(50)), 3), split_dataset(list(range(50)), 3)
    assert a.train == b.train and a.test == b.test
    assert split_dataset(list(range(50)), 4).train != a.train


def test_split_edge_cases(caplog):
    with pytest.raises(ValueError):
        split_dataset([])
    with caplog.at_level(logging.WARNING):
        split_dataset([1, 2, 3])
    assert "degenerate" in caplog.text


def test_preprocess_merges_sections_and_filters_meter():
    docs = [
        simple_doc([(62, 0, 16)], key=("D", "major"), song="s", title="verse"),
        simple_doc([(64, 0, 16)], key=("D", "major"), song="s", title="chorus"),
        simple_doc([(60, 0, 12)], meter="3/4", song="w"),
        simple_doc([(67, 0, 16)], song="u"),
    ]
    out = preprocess_corpus(docs)
    assert [ls.title for ls in out] == ["s", "u"]
    assert [e.pitch for e in out[0].events] == [60, 62]
    assert out[0].key == Key(0, "major")


def test_adam_matches_closed_form():
    p = {"w": np.array([1.0, -2.0])}
    g = {"w": np.array([0.5, -0.1])}
    opt = Adam(p)
    opt.step(p, g, lr=0.1)
    # first step: m_hat = g, v_hat = g^2, so the update is lr * sign(g) up to eps
    assert np.allclose(p["w"], [1.0 - 0.1, -2.0 + 0.1], atol=1e-6)


def test_clip_gradients():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_gradients(g, 1.0) == 5.0
    assert np.isclose(np.sqrt(g["a"][0] ** 2 + g["b"][0] ** 2), 1.0)
    g2 = {"a": np.array([0.3])}
    clip_gradients(g2, 1.0)
    assert g2["a"][0] == 0.3


def _split(n=10, seed=0):
    return split_dataset(synthetic_corpus(n, seed=seed), seed=seed)


def test_training_reduces_loss_and_is_reproducible():
    hyper = TrainHyper(epochs=4, batch_size=4, learning_rate=3e-3, seed=1)
    split = _split()
    p1, r1 = train(CFG, hrnn.init_params(CFG, 1), split, hyper)
    p2, r2 = train(CFG, hrnn.init_params(CFG, 1), split, hyper)
    assert r1.without_timing() == r2.without_timing()
    assert all(np.array_equal(p1[k], p2[k]) for k in p1)
    assert r1.records[-1].train_total < r1.records[0].train_total
    assert r1.fingerprint == fingerprint(CFG, hyper)
    assert len(r1.jsonl().splitlines()) == 4


def test_resume_is_bit_identical(tmp_path):
    hyper = TrainHyper(epochs=4, batch_size=4, learning_rate=3e-3, seed=2)
    split = _split()
    straight = Trainer(CFG, hrnn.init_params(CFG, 0), split, hyper)
    straight.run()
    first = Trainer(CFG, hrnn.init_params(CFG, 0), split, hyper)
    first.run(2)
    path = first.save_state(tmp_path / "state.npz")
    resumed = Trainer.load_state(path, split)
    resumed.run()
    assert resumed.epoch == 4
    assert all(np.array_equal(resumed.params[k], straight.params[k]) for k in straight.params)
    assert resumed.report.without_timing() == straight.report.without_timing()


def test_early_stopping():
    hyper = TrainHyper(epochs=20, batch_size=4, learning_rate=0.0, patience=2, seed=0)
    _, report = train(CFG, hrnn.init_params(CFG, 0), _split(), hyper)
    assert report.stopped_early and len(report.records) == 3 and report.best_epoch == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    hyper = TrainHyper(epochs=3, batch_size=4, learning_rate=1e300, clip_norm=0, seed=0)
    with pytest.raises(TrainingDiverged):
        train(CFG, hrnn.init_params(CFG, 0), _split(), hyper)


def test_evaluate_items_matches_head_mean():
    items = synthetic_corpus(3, seed=9)
    params = hrnn.init_params(CFG, 0)
    r = evaluate_items(params, CFG, items, batch_size=2)
    assert np.isclose(r.total, 0.4 * r.pitch + 0.3 * r.duration + 0.3 * r.bar)
    assert r.count == sum(len(ls.events) - 2 for ls in items)
    # untrained logits are near uniform
    assert abs(r.pitch - np.log(130)) < 1.0


def test_preprocess_accepts_serialised_synthetic():
    docs = [to_document(ls) for ls in synthetic_corpus(3)]
    assert len(preprocess_corpus(docs)) == 3
