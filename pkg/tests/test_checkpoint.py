import struct

import numpy as np
import pytest

from cmhrnn import hrnn
from cmhrnn.checkpoint import (MAGIC, CheckpointError, ChecksumError, VersionError, dumps_params, load_params,
                               loads_params, save_params)
from cmhrnn.hrnn import TierConfig

CFG = TierConfig(frame_sizes=(2, 2, 4), hidden=6, lstm_layers=2)


def test_bit_exact_roundtrip(tmp_path):
    params = hrnn.init_params(CFG, seed=3)
    path = save_params(tmp_path / "m.ckpt", CFG, params, {"note": "x"})
    cfg, loaded, meta = load_params(path)
    assert cfg == CFG and meta == {"note": "x"}
    assert set(loaded) == set(params)
    for k in params:
        assert loaded[k].tobytes() == params[k].tobytes()


def test_serialization_is_deterministic():
    params = hrnn.init_params(CFG, seed=1)
    assert dumps_params(CFG, params) == dumps_params(CFG, {k: params[k] for k in reversed(list(params))})


def test_corruption_detected():
    blob = bytearray(dumps_params(CFG, hrnn.init_params(CFG, seed=0)))
    blob[len(blob) // 2] ^= 0x01
    with pytest.raises(ChecksumError):
        loads_params(bytes(blob))


def test_version_checked():
    blob = bytearray(dumps_params(CFG, hrnn.init_params(CFG, seed=0)))
    blob[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", 99)
    with pytest.raises(VersionError):
        loads_params(bytes(blob))


def test_bad_magic_and_mismatched_params():
    with pytest.raises(CheckpointError):
        loads_params(b"not a checkpoint at all, definitely not" * 2)
    params = hrnn.init_params(CFG, seed=0)
    params.pop(next(iter(params)))
    with pytest.raises(CheckpointError):
        dumps_params(CFG, params)


def test_values_are_finite_after_load():
    _, loaded, _ = loads_params(dumps_params(CFG, hrnn.init_params(CFG, seed=5)))
    assert all(np.isfinite(v).all() for v in loaded.values())
