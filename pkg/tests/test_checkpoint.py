import numpy as np
import pytest

from d4x import checkpoint
from d4x.tensor import Tensor


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    tensors = {
        "a.weight": Tensor(rng.normal(size=(3, 4))),
        "b.bias": Tensor(rng.normal(size=7)),
        "scalarish": Tensor(np.array(1.2345678901234567)),
    }
    path = tmp_path / "ck.bin"
    checkpoint.save_tensors(str(path), tensors)
    loaded = checkpoint.load_tensors(str(path))
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert loaded[name].data.shape == tensors[name].data.shape
        assert np.array_equal(loaded[name].data, tensors[name].data)


def test_save_is_deterministic(tmp_path):
    tensors = {"x": Tensor(np.arange(6.0).reshape(2, 3)), "y": Tensor([1.0])}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    checkpoint.save_tensors(str(p1), tensors)
    checkpoint.save_tensors(str(p2), tensors)
    assert p1.read_bytes() == p2.read_bytes()


def test_magic_and_header(tmp_path):
    path = tmp_path / "ck.bin"
    checkpoint.save_tensors(str(path), {"t": Tensor([1.0])})
    raw = path.read_bytes()
    assert raw[:4] == b"D4CK"
    assert int.from_bytes(raw[4:8], "little") == 1  # version
    assert int.from_bytes(raw[8:12], "little") == 1  # tensor count


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load_tensors(str(path))
