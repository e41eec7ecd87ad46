import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from p2pnet.datasynth import GeneratorSpec, generate
from p2pnet.formats import (
    FORMAT_VERSION,
    CheckpointError,
    PointSetFormatError,
    checkpoint_bytes,
    checkpoint_from_bytes,
    load_checkpoint,
    load_dataset,
    read_points,
    save_checkpoint,
    save_dataset,
    write_points,
)
from p2pnet.layers import desk_preset
from p2pnet.trainer import TrainConfig, train


@pytest.fixture(scope="module")
def checkpoint():
    ds = generate(GeneratorSpec("line_disk", count=2, points_per_set=32, seed=0))
    return train(ds, desk_preset(2, n_points=32), TrainConfig(epochs=1, seed=2))


def test_ply_roundtrip_bit_exact(tmp_path, rng):
    pts = rng.normal(size=(3, 3))
    write_points(tmp_path / "a.ply", pts)
    back = read_points(tmp_path / "a.ply")
    np.testing.assert_array_equal(back, pts.astype(np.float32).astype(np.float64))
    pts2 = rng.normal(size=(5, 2))
    write_points(tmp_path / "b.ply", pts2)
    assert read_points(tmp_path / "b.ply").shape == (5, 2)


@given(arrays(np.float32, (7, 3), elements=st.floats(-1e6, 1e6, width=32)))
def test_ply_roundtrip_property(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("ply") / "p.ply"
    write_points(path, pts)
    np.testing.assert_array_equal(read_points(path), pts.astype(np.float64))


def test_ply_reads_extra_properties(tmp_path):
    header = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty uchar flag\nproperty double y\nproperty double z\nend_header\n"
    body = struct.pack("<dBdd", 1, 7, 2, 3) + struct.pack("<dBdd", 4, 0, 5, 6)
    (tmp_path / "e.ply").write_bytes(header + body)
    np.testing.assert_array_equal(read_points(tmp_path / "e.ply"), [[1, 2, 3], [4, 5, 6]])


def test_ply_rejects_ascii(tmp_path):
    (tmp_path / "a.ply").write_bytes(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n")
    with pytest.raises(PointSetFormatError):
        read_points(tmp_path / "a.ply")


def test_xyz_rules(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("0 0\n1 2\n3.5 -1\n")
    assert read_points(p).shape == (3, 2)
    p.write_text("0 0 0\n1 1 1\n2 2 2\n3 3 3\n4 x 4\n")
    with pytest.raises(PointSetFormatError, match=":5:"):
        read_points(p)
    p.write_text("0 0 0\n1 1\n")
    with pytest.raises(PointSetFormatError, match="mixed"):
        read_points(p)
    with pytest.raises(PointSetFormatError):
        read_points(tmp_path / "a.obj")


def test_xyz_nine_significant_digits(tmp_path):
    write_points(tmp_path / "a.xyz", np.array([[1 / 3, 2.0]]))
    assert (tmp_path / "a.xyz").read_text() == "0.333333333 2\n"


def test_checkpoint_roundtrip(tmp_path, checkpoint):
    save_checkpoint(tmp_path / "c.p2p", checkpoint)
    back = load_checkpoint(tmp_path / "c.p2p")
    assert back.cfg_xy == checkpoint.cfg_xy and back.seed == 2 and back.epoch == 1
    for k, v in checkpoint.params_xy.items():
        np.testing.assert_array_equal(back.params_xy[k], v.astype(np.float32))
        assert np.all(np.abs(back.params_xy[k] - v) <= 2.0**-23 * np.abs(v))
    assert back.adam.step == checkpoint.adam.step
    # a loaded checkpoint re-serializes to the same bytes
    assert checkpoint_bytes(back) == (tmp_path / "c.p2p").read_bytes()
    lean = checkpoint_from_bytes(checkpoint_bytes(checkpoint, include_optimizer=False))
    assert lean.adam is None


def test_checkpoint_detects_every_single_byte_flip(checkpoint):
    buf = checkpoint_bytes(checkpoint, include_optimizer=False)
    for pos in range(0, len(buf), max(1, len(buf) // 400)):
        bad = bytearray(buf)
        bad[pos] ^= 0x10
        with pytest.raises(CheckpointError):
            checkpoint_from_bytes(bytes(bad))


def test_checkpoint_version_mismatch(checkpoint):
    buf = bytearray(checkpoint_bytes(checkpoint)[:-4])
    buf[4:6] = struct.pack("<H", FORMAT_VERSION + 1)
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with pytest.raises(CheckpointError, match="version"):
        checkpoint_from_bytes(bytes(buf))


def test_dataset_directory_roundtrip(tmp_path):
    ds = generate(GeneratorSpec("line_bars", count=3, points_per_set=20, seed=1))
    save_dataset(tmp_path / "d", ds, {"kind": "line_bars"})
    assert (tmp_path / "d" / "pairs" / "0002_y.xyz").exists()
    back = load_dataset(tmp_path / "d")
    assert back.labels == ("line", "bars") and len(back) == 3
    assert back.meta[1] == ds.meta[1]
    assert back.norms[0] == ds.norms[0]
    np.testing.assert_allclose(back.pairs[2][1], ds.pairs[2][1], rtol=1e-8, atol=1e-9)
