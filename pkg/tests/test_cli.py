import json

import pytest

from cmhrnn import cli
from cmhrnn.checkpoint import load_params
from cmhrnn.codec import to_document
from cmhrnn.metrics import melody_to_point_set
from cmhrnn.codec import parse_lead_sheet
from cmhrnn.synthetic import synthetic_corpus

from .leadsheets import simple_doc
from .oracles import brute_compression_ratio

SMALL = ["--hidden", "8", "--layers", "1", "--epochs", "2", "--batch-size", "4"]


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def lead_dir(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    for i, ls in enumerate(synthetic_corpus(6, seed=2)):
        _write(d / f"s{i}.json", to_document(ls))
    return d


@pytest.fixture
def corpus(tmp_path, lead_dir):
    out = tmp_path / "corpus.jsonl"
    assert cli.main(["ingest", str(lead_dir), str(out)]) == 0
    return out


def _strip_timing(path):
    return [{k: v for k, v in json.loads(line).items() if k != "seconds"} for line in path.read_text().splitlines()]


def test_show_config_defaults(capsys):
    assert cli.main(["show-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["model"]["frame_sizes"] == [2, 2, 16] and cfg["model"]["hidden"] == 256
    assert cfg["sampling"]["temp_pitch"] == 0.7 and cfg["train"]["learning_rate"] == 1e-3


def test_config_precedence(tmp_path, capsys):
    conf = _write(tmp_path / "c.json", {"model": {"hidden": 32}, "train": {"learning_rate": 0.01}})
    assert cli.main(["show-config", "--config", str(conf), "--hidden", "16"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["model"]["hidden"] == 16 and cfg["train"]["learning_rate"] == 0.01


def test_unknown_config_key_is_usage_error(tmp_path):
    conf = _write(tmp_path / "c.json", {"model": {"hiden": 32}})
    assert cli.main(["show-config", "--config", str(conf)]) == 1


def test_usage_errors():
    assert cli.main([]) == 1
    assert cli.main(["bogus"]) == 1
    assert cli.main(["show-config", "--frame-sizes", "3,3,16"]) == 1


def test_ingest_filters_meter_and_is_idempotent(tmp_path, lead_dir):
    _write(lead_dir / "waltz.json", simple_doc([(60, 0, 12)], meter="3/4", title="waltz"))
    (lead_dir / "broken.json").write_text("{nope")
    out = tmp_path / "c.jsonl"
    assert cli.main(["ingest", str(lead_dir), str(out)]) == 0
    first = out.read_bytes()
    items = [json.loads(line) for line in first.decode().splitlines()]
    assert len(items) == 6 and all(d["meter"] == "4/4" for d in items)
    assert all("provenance" in d for d in items)
    rejects = json.loads((tmp_path / "c.rejects.json").read_text())
    assert {r["file"] for r in rejects} == {"waltz.json", "broken.json"}
    assert cli.main(["ingest", str(lead_dir), str(out)]) == 0
    assert out.read_bytes() == first
    manifest = json.loads((tmp_path / "c.manifest.json").read_text())
    assert manifest["command"] == "ingest" and manifest["config_fingerprint"]
    assert {"tool_version", "started", "finished", "inputs", "outputs", "seeds"} <= set(manifest)


def test_ingest_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["ingest", str(empty), str(tmp_path / "x.jsonl")]) == 2
    only_bad = tmp_path / "bad"
    only_bad.mkdir()
    _write(only_bad / "w.json", simple_doc([(60, 0, 12)], meter="3/4"))
    assert cli.main(["ingest", str(only_bad), str(tmp_path / "y.jsonl")]) == 2


def test_train_missing_corpus(tmp_path):
    assert cli.main(["train", str(tmp_path / "nope.jsonl"), str(tmp_path / "run")] + SMALL) == 2


def test_train_tiers_and_seed_reproducibility(tmp_path, corpus):
    runs = {}
    for name, tiers in (("a", "3"), ("b", "3"), ("c", "2")):
        out = tmp_path / name
        assert cli.main(["train", str(corpus), str(out), "--tiers", tiers, "--seed", "5"] + SMALL) == 0
        runs[name] = out
    assert load_params(runs["a"] / "model.ckpt")[0].frame_sizes == (2, 2, 16)
    assert load_params(runs["c"] / "model.ckpt")[0].frame_sizes == (16, 16)
    assert _strip_timing(runs["a"] / "train_report.jsonl") == _strip_timing(runs["b"] / "train_report.jsonl")
    assert (runs["a"] / "model.ckpt").read_bytes() == (runs["b"] / "model.ckpt").read_bytes()
    manifest = json.loads((runs["a"] / "manifest.json").read_text())
    assert manifest["seeds"]["train"] == 5


@pytest.fixture
def trained(tmp_path, corpus):
    out = tmp_path / "run"
    assert cli.main(["train", str(corpus), str(out), "--frame-sizes", "2,2,4"] + SMALL) == 0
    return out / "model.ckpt"


def test_generate_defaults_determinism_and_outputs(tmp_path, trained, lead_dir):
    chords = lead_dir / "s0.json"
    a, b = tmp_path / "g" / "a", tmp_path / "g" / "b"
    assert cli.main(["generate", str(trained), str(chords), str(a), "--rng-seed", "9"]) == 0
    assert cli.main(["generate", str(trained), str(chords), str(b), "--rng-seed", "9"]) == 0
    assert a.with_suffix(".json").read_text() == b.with_suffix(".json").read_text()
    assert a.with_suffix(".mid").stat().st_size > 0
    manifest = json.loads(a.with_suffix(".manifest.json").read_text())
    s = manifest["config"]["sampling"]
    assert (s["temp_pitch"], s["temp_duration"], s["temp_bar"], s["seed"]) == (0.7, 0.2, 0.1, 9)
    doc = json.loads(a.with_suffix(".json").read_text())
    assert "bar_mismatches" in doc["generation"]


def test_generate_rejects_zero_temperature(tmp_path, trained, lead_dir):
    assert cli.main(["generate", str(trained), str(lead_dir / "s0.json"), str(tmp_path / "x"),
                     "--temp-pitch", "0"]) == 1


def test_generate_data_errors(tmp_path, trained, lead_dir):
    assert cli.main(["generate", str(tmp_path / "missing.ckpt"), str(lead_dir / "s0.json"), str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage" * 20)
    assert cli.main(["generate", str(bad), str(lead_dir / "s0.json"), str(tmp_path / "x")]) == 2
    assert cli.main(["generate", str(trained), str(lead_dir / "s0.json"), str(tmp_path / "x"),
                     "--seed-events", "500"]) == 2


def test_evaluate_single_piece_and_crafted_cpr(tmp_path, capsys):
    d = tmp_path / "mel"
    d.mkdir()
    notes = [(p, s + o, 1) for o in (0, 4, 8) for p, s in ((60, 0), (62, 1), (64, 2), (65, 3))]
    doc = simple_doc(notes + [("rest", 12, 20)], title="crafted")
    _write(d / "crafted.json", doc)
    assert cli.main(["evaluate", str(d), str(tmp_path / "ev")]) == 0
    lines = (tmp_path / "ev.tsv").read_text().splitlines()
    assert len(lines) == 4 and lines[1].split("\t")[0] == "crafted"
    expected = brute_compression_ratio(melody_to_point_set(parse_lead_sheet(doc)))
    assert float(lines[1].split("\t")[2]) == pytest.approx(expected, abs=1e-4)
    summary = json.loads((tmp_path / "ev.summary.json").read_text())
    assert summary["pieces"] == 1 and summary["columns"]["CPR"]["mean"] == pytest.approx(expected)


def test_evaluate_reads_sampled_bar_flags(tmp_path, trained, lead_dir):
    gen = tmp_path / "gen"
    assert cli.main(["generate", str(trained), str(lead_dir / "s1.json"), str(gen / "p"), "--rng-seed", "1",
                     "--temp-duration", "1.0", "--temp-bar", "1.0"]) == 0
    assert cli.main(["evaluate", str(gen), str(tmp_path / "ev")]) == 0
    rows = (tmp_path / "ev.tsv").read_text().splitlines()
    assert len(rows) == 4  # the manifest next to the lead sheet is not treated as a piece


def test_evaluate_empty_dir(tmp_path):
    (tmp_path / "none").mkdir()
    assert cli.main(["evaluate", str(tmp_path / "none"), str(tmp_path / "ev")]) == 2


def test_internal_error_exit_code(monkeypatch, tmp_path):
    def boom(args, argv):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "cmd_show_config", boom)
    assert cli.main(["show-config"]) == 3
