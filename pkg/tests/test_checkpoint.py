import struct

import numpy as np
import pytest

from thermaug import checkpoint
from thermaug.errors import CheckpointError


def test_round_trip(tmp_path, rng):
    arrays = {"w": rng.normal(size=(3, 4)), "b": np.arange(5.0), "s": np.array(2.5)}
    path = tmp_path / "c.ckpt"
    checkpoint.save(path, "demo", {"hidden": 4}, arrays)
    meta, back = checkpoint.load(path, "demo")
    assert meta == {"hidden": 4}
    assert list(back) == ["w", "b", "s"]
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    assert checkpoint.read_kind(path) == "demo"


def test_layout(tmp_path):
    path = tmp_path / "c.ckpt"
    checkpoint.save(path, "demo", {}, {"a": np.array([1.0, -2.0])})
    raw = path.read_bytes()
    assert raw[:8] == b"THAUGCK1"
    (n,) = struct.unpack("<I", raw[8:12])
    assert np.array_equal(np.frombuffer(raw[12 + n :], dtype="<f8"), [1.0, -2.0])


def test_rejects_bad_files(tmp_path):
    path = tmp_path / "c.ckpt"
    checkpoint.save(path, "demo", {}, {"a": np.ones(4)})
    raw = path.read_bytes()
    with pytest.raises(CheckpointError):
        checkpoint.load(path, "other")
    (tmp_path / "t.ckpt").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        checkpoint.load(tmp_path / "t.ckpt")
    (tmp_path / "x.ckpt").write_bytes(raw + b"\0")
    with pytest.raises(CheckpointError):
        checkpoint.load(tmp_path / "x.ckpt")
    (tmp_path / "m.ckpt").write_bytes(b"NOTACKPT" + raw[8:])
    with pytest.raises(CheckpointError):
        checkpoint.read_kind(tmp_path / "m.ckpt")
