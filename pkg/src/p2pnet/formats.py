"""File formats: point sets (.xyz text, .ply binary), checkpoints and dataset directories.

Compute is float64; checkpoints and PLY files store float32, so a save/load
roundtrip quantizes to single precision (relative error at most 2**-24).
"""

from __future__ import annotations

import configparser
import json
import re
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .datasynth import Normalization, PairedDataset
from .layers import LayerSpec, NetworkConfig
from .trainer import AdamState, Checkpoint


class PointSetFormatError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


# --- point sets ----------------------------------------------------------------


def read_xyz(path) -> np.ndarray:
    """Whitespace-separated 2 or 3 columns per line; blank lines and ``#`` comments are skipped."""
    rows, ncol = [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            try:
                vals = [float(t) for t in tokens]
            except ValueError:
                bad = next(t for t in tokens if not _is_float(t))
                raise PointSetFormatError(f"{path}:{lineno}: not a number: {bad!r}") from None
            if len(vals) not in (2, 3):
                raise PointSetFormatError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(vals)}")
            if ncol is None:
                ncol = len(vals)
            elif len(vals) != ncol:
                raise PointSetFormatError(f"{path}:{lineno}: mixed column counts ({ncol} then {len(vals)})")
            rows.append(vals)
    if not rows:
        raise PointSetFormatError(f"{path}: no points")
    return np.array(rows, dtype=np.float64)


def _is_float(t: str) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def write_xyz(path, pts: np.ndarray) -> None:
    pts = _check_points(pts)
    lines = [" ".join(f"{v:.9g}" for v in row) for row in pts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def write_ply(path, pts: np.ndarray) -> None:
    """Binary little-endian float x, y, z; 2-D sets get z = 0 and a ``dim 2`` comment."""
    pts = _check_points(pts)
    n, dim = pts.shape
    xyz = np.zeros((n, 3), dtype="<f4")
    xyz[:, :dim] = pts
    header = ["ply", "format binary_little_endian 1.0"]
    if dim == 2:
        header.append("comment dim 2")
    header += [f"element vertex {n}", "property float x", "property float y", "property float z", "end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(xyz.tobytes())


def read_ply(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise PointSetFormatError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len("end_header\n") :]
    dim, fmt, n, props, element = 3, None, None, [], None
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[:2] == ["comment", "dim"]:
            dim = int(parts[2])
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n = int(parts[2])
            elif n is None:
                raise PointSetFormatError(f"{path}: vertex element must come first")
        elif parts[0] == "property" and element == "vertex":
            if parts[1] == "list" or parts[1] not in _PLY_TYPES:
                raise PointSetFormatError(f"{path}: unsupported vertex property {line!r}")
            props.append((parts[2], "<" + _PLY_TYPES[parts[1]]))
    if fmt != "binary_little_endian":
        raise PointSetFormatError(f"{path}: only binary_little_endian PLY is supported, got {fmt}")
    names = [p[0] for p in props]
    if n is None or any(c not in names for c in "xyz"[:dim]):
        raise PointSetFormatError(f"{path}: missing vertex element or coordinates")
    dtype = np.dtype(props)
    if len(body) < n * dtype.itemsize:
        raise PointSetFormatError(f"{path}: truncated vertex data")
    rec = np.frombuffer(body, dtype=dtype, count=n)
    return np.stack([rec[c].astype(np.float64) for c in "xyz"[:dim]], axis=1)


def _check_points(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise PointSetFormatError(f"point sets must be (n, 2) or (n, 3), got {pts.shape}")
    return pts


def read_points(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".xyz":
        return read_xyz(path)
    if suffix == ".ply":
        return read_ply(path)
    raise PointSetFormatError(f"{path}: unknown point set extension {suffix!r} (use .xyz or .ply)")


def write_points(path, pts) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".xyz":
        return write_xyz(path, pts)
    if suffix == ".ply":
        return write_ply(path, pts)
    raise PointSetFormatError(f"{path}: unknown point set extension {suffix!r} (use .xyz or .ply)")


# --- checkpoints ---------------------------------------------------------------

MAGIC = b"P2PD"
FORMAT_VERSION = 1


def config_to_dict(cfg: NetworkConfig) -> dict:
    return asdict(cfg)


def config_from_dict(d: dict) -> NetworkConfig:
    d = dict(d)
    for key in ("sa_layers", "fp_layers", "fc_head"):
        d[key] = tuple(LayerSpec(**{**s, "widths": tuple(s["widths"])}) for s in d[key])
    return NetworkConfig(**d)


def _pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    out = [struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        key = name.encode("utf-8")
        out.append(struct.pack("<H", len(key)) + key)
        out.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.astype("<f4").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint payload is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def arrays(self) -> dict[str, np.ndarray]:
        (count,) = self.unpack("<I")
        out = {}
        for _ in range(count):
            (klen,) = self.unpack("<H")
            name = self.take(klen).decode("utf-8")
            (ndim,) = self.unpack("<B")
            shape = self.unpack(f"<{ndim}I")
            size = int(np.prod(shape, dtype=np.int64))
            out[name] = np.frombuffer(self.take(4 * size), dtype="<f4").reshape(shape).astype(np.float64)
        return out


def checkpoint_bytes(ck: Checkpoint, include_optimizer: bool = True) -> bytes:
    """Header (magic, u16 version, u8 dim), u32 payload length, payload, CRC32 over everything before it."""
    echo = json.dumps(
        {"xy": config_to_dict(ck.cfg_xy), "yx": config_to_dict(ck.cfg_yx), "seed": ck.seed, "epoch": ck.epoch},
        sort_keys=True,
    ).encode("utf-8")
    parts = [struct.pack("<I", len(echo)), echo, _pack_arrays(ck.params_xy), _pack_arrays(ck.params_yx)]
    adam = ck.adam if include_optimizer else None
    if adam is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<BIddd", 1, adam.step, adam.beta1, adam.beta2, adam.eps))
        parts += [_pack_arrays(adam.m), _pack_arrays(adam.v)]
    payload = b"".join(parts)
    head = MAGIC + struct.pack("<HBI", FORMAT_VERSION, ck.dim, len(payload)) + payload
    return head + struct.pack("<I", zlib.crc32(head))


def checkpoint_from_bytes(buf: bytes, source: str = "<bytes>") -> Checkpoint:
    if len(buf) < 15 or buf[:4] != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic)")
    (crc,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) != crc:
        raise CheckpointError(f"{source}: CRC mismatch, file is corrupted")
    version, dim, length = struct.unpack("<HBI", buf[4:11])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source}: checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    if length != len(buf) - 15:
        raise CheckpointError(f"{source}: payload length mismatch")
    r = _Reader(buf[11:-4])
    (elen,) = r.unpack("<I")
    echo = json.loads(r.take(elen).decode("utf-8"))
    cfg_xy, cfg_yx = config_from_dict(echo["xy"]), config_from_dict(echo["yx"])
    if cfg_xy.dim != dim:
        raise CheckpointError(f"{source}: header dim {dim} disagrees with the stored config")
    params_xy, params_yx = r.arrays(), r.arrays()
    (has_adam,) = r.unpack("<B")
    adam = None
    if has_adam:
        step, b1, b2, eps = r.unpack("<Iddd")
        adam = AdamState(m=r.arrays(), v=r.arrays(), step=step, beta1=b1, beta2=b2, eps=eps)
    return Checkpoint(cfg_xy, cfg_yx, params_xy, params_yx, seed=echo["seed"], epoch=echo["epoch"], adam=adam)


def save_checkpoint(path, ck: Checkpoint, include_optimizer: bool = True) -> None:
    Path(path).write_bytes(checkpoint_bytes(ck, include_optimizer))


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes(), str(path))


# --- dataset directories -------------------------------------------------------

_PAIR_SECTION = re.compile(r"pair\.(\d+)$")


def save_dataset(root, ds: PairedDataset, spec: dict | None = None) -> None:
    """``pairs/NNNN_x.xyz``, ``pairs/NNNN_y.xyz`` and ``manifest.cfg``."""
    root = Path(root)
    (root / "pairs").mkdir(parents=True, exist_ok=True)
    man = configparser.ConfigParser(interpolation=None)
    man["dataset"] = {"labels": f"{ds.labels[0]} {ds.labels[1]}", "count": str(len(ds)), "dim": str(ds.dim)}
    if spec:
        man["generator"] = {k: json.dumps(v, sort_keys=True) for k, v in spec.items()}
    for i, ((x, y), norm) in enumerate(zip(ds.pairs, ds.norms)):
        write_xyz(root / "pairs" / f"{i:04d}_x.xyz", x)
        write_xyz(root / "pairs" / f"{i:04d}_y.xyz", y)
        sec = {"scale": repr(float(norm.scale)), "offset": " ".join(repr(float(v)) for v in norm.offset)}
        if ds.meta:
            sec["meta"] = json.dumps(ds.meta[i], sort_keys=True)
        man[f"pair.{i:04d}"] = sec
    with open(root / "manifest.cfg", "w", encoding="utf-8") as fh:
        man.write(fh)


def load_dataset(root) -> PairedDataset:
    root = Path(root)
    man = configparser.ConfigParser(interpolation=None)
    if not man.read(root / "manifest.cfg", encoding="utf-8"):
        raise PointSetFormatError(f"{root}: missing manifest.cfg")
    labels = tuple(man["dataset"].get("labels", "x y").split())
    pairs, norms, meta = [], [], []
    for sec in man.sections():
        m = _PAIR_SECTION.match(sec)
        if not m:
            continue
        tag = m.group(1)
        x = read_xyz(root / "pairs" / f"{tag}_x.xyz")
        y = read_xyz(root / "pairs" / f"{tag}_y.xyz")
        pairs.append((x, y))
        offset = tuple(float(v) for v in man[sec]["offset"].split())
        norms.append(Normalization(float(man[sec]["scale"]), offset))
        if "meta" in man[sec]:
            meta.append(json.loads(man[sec]["meta"]))
    if not pairs:
        raise PointSetFormatError(f"{root}: manifest lists no pairs")
    return PairedDataset(pairs, norms, labels, meta if len(meta) == len(pairs) else [])
