import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from portanet.errors import FormatError, ShapeError
from portanet.snapshot import decode, encode, read_tensors, snapshot_load, snapshot_save, write_tensors

from test_net import tiny, tiny_batch


def test_round_trip_is_bitwise(tmp_path, rng):
    net = tiny(seed=4)
    path = tmp_path / "n.pnsn"
    snapshot_save(net, path)
    other = tiny(seed=9)
    snapshot_load(other, path)
    for a, b in zip(net.learnables, other.learnables):
        assert a.data.array.tobytes() == b.data.array.tobytes()
    x, y = tiny_batch(rng)
    assert net.forward(x, y)[0] == other.forward(x, y)[0]


def test_layout():
    buf = encode([np.array([[1.0, 2.0]], np.float32)])
    assert buf[:4] == b"PNSN"
    assert struct.unpack("<5I", buf[4:24]) == (1, 1, 2, 1, 2)
    assert np.frombuffer(buf[24:], "<f4").tolist() == [1.0, 2.0]


def test_special_values_survive():
    a = np.array([np.nan, -0.0, np.inf, 1e-45], np.float32)
    (b,) = decode(encode([a]))
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("cut", [3, 10, 20, 27])
def test_truncated(cut):
    buf = encode([np.ones((2, 2), np.float32)])
    with pytest.raises(FormatError):
        decode(buf[:cut])


def test_corrupt_headers():
    buf = bytearray(encode([np.ones(3, np.float32)]))
    with pytest.raises(FormatError):
        decode(b"XXXX" + bytes(buf[4:]))
    bad_version = buf[:4] + struct.pack("<I", 2) + buf[8:]
    with pytest.raises(FormatError):
        decode(bytes(bad_version))
    bad_rank = buf[:12] + struct.pack("<I", 9) + buf[16:]
    with pytest.raises(FormatError):
        decode(bytes(bad_rank))
    with pytest.raises(FormatError):
        decode(bytes(buf) + b"\0")


def test_truncated_file_and_mismatched_net(tmp_path):
    net = tiny()
    path = tmp_path / "n.pnsn"
    snapshot_save(net, path)
    path.write_bytes(path.read_bytes()[:-2])
    with pytest.raises(FormatError):
        snapshot_load(net, path)
    write_tensors(path, [b.data.array.T.copy() if b.data.ndim == 2 else b.data.array
                         for b in net.learnables])
    with pytest.raises(ShapeError):
        snapshot_load(net, path)
    write_tensors(path, [b.data.array for b in net.learnables][:-1])
    with pytest.raises(ShapeError):
        snapshot_load(net, path)


@settings(max_examples=50, deadline=None)
@given(st.lists(arrays(np.float32, st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)),
                max_size=4))
def test_encode_decode_property(tensors):
    out = decode(encode(tensors))
    assert [a.shape for a in out] == [a.shape for a in tensors]
    assert all(a.tobytes() == b.tobytes() for a, b in zip(out, tensors))


def test_file_helpers(tmp_path):
    write_tensors(tmp_path / "m", [np.arange(6, dtype=np.float32).reshape(2, 3)])
    (m,) = read_tensors(tmp_path / "m")
    assert m.dtype == np.float32 and m.shape == (2, 3)
