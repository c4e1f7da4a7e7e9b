import struct

import numpy as np
import pytest

from fqmps.checkpoint import (
    MAGIC,
    CheckpointError,
    checkpoint_info,
    load_state,
    save_state,
)
from fqmps.mpo import ModelParams
from fqmps.mps import inner, mps_from_dense, product_state


@pytest.fixture
def sample_state(rng):
    vec = rng.standard_normal(5**3) + 1j * rng.standard_normal(5**3)
    return mps_from_dense(vec / np.linalg.norm(vec), [5] * 3)


def test_roundtrip_is_bit_exact(tmp_path, sample_state):
    p = ModelParams(t=1.0, v=0.5, sites=9, particles=3, q_max=5)
    path = tmp_path / "state.ckpt"
    save_state(path, sample_state, p, extra={"kind": "test", "time": 1.5})
    loaded, params, extra = load_state(path)
    for a, b in zip(sample_state.tensors, loaded.tensors):
        assert np.array_equal(a, b)
    assert loaded.center == sample_state.center
    assert loaded.norm_log == sample_state.norm_log
    assert params == p
    assert extra == {"kind": "test", "time": 1.5}
    assert abs(inner(sample_state, loaded) - 1.0) < 1e-12


def test_real_tensors_roundtrip(tmp_path):
    state = product_state([1, 2, 2], 4, dtype=np.float64)
    path = tmp_path / "real.ckpt"
    save_state(path, state)
    loaded, params, _ = load_state(path)
    assert params is None
    for a, b in zip(state.tensors, loaded.tensors):
        assert np.array_equal(a, b)
        assert b.dtype == np.float64


def test_single_byte_corruption_detected(tmp_path, sample_state):
    path = tmp_path / "state.ckpt"
    save_state(path, sample_state)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x01
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="checksum"):
        load_state(path)


def test_truncated_file_detected(tmp_path, sample_state):
    path = tmp_path / "state.ckpt"
    save_state(path, sample_state)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 17])
    with pytest.raises(CheckpointError):
        load_state(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"NOTASTATE" * 4)
    with pytest.raises(CheckpointError, match="not a state checkpoint"):
        load_state(path)


def test_version_mismatch_reported(tmp_path, sample_state):
    path = tmp_path / "state.ckpt"
    save_state(path, sample_state)
    blob = bytearray(path.read_bytes())
    # bump the version field and fix up the checksum
    off = len(MAGIC)
    blob[off:off + 4] = struct.pack("<I", 2)
    import zlib

    payload = bytes(blob[off:-4])
    blob[-4:] = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="migration"):
        load_state(path)


def test_info_summary(tmp_path, sample_state):
    p = ModelParams(t=1.0, v=0.0, sites=9, particles=3, q_max=5)
    path = tmp_path / "state.ckpt"
    save_state(path, sample_state, p)
    info = checkpoint_info(path)
    assert info["n_sites"] == 3
    assert info["phys_dims"] == [5, 5, 5]
    assert info["model"]["sites"] == 9
