"""Dataset ingestion, model/code persistence and synthetic clusters.

Binary layouts (all little-endian):

features  ``b"PHSH"``, u16 version=1, u64 n, u64 d, n*d float32 row-major
codes     ``b"PHCD"``, u16 version=1, u64 n, u64 m, n*ceil(m/64) u64 words
model     ``b"PHMD"``, u16 version=1, u32 header length, UTF-8 JSON header,
          then the float64 arrays listed in the header, in order
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .codes import CodeMatrix
from .encode import HashModel
from .kernel import KernelMap
from .pairwise import LabelData

FEATURE_MAGIC = b"PHSH"
CODES_MAGIC = b"PHCD"
MODEL_MAGIC = b"PHMD"
VERSION = 1

_DIMS = struct.Struct("<4sHQQ")
_MODEL_HEAD = struct.Struct("<4sHI")


class FormatError(ValueError):
    """Malformed input file."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class CSVParseError(FormatError):
    pass


class LabelParseError(FormatError):
    pass


def _read_dims(buf: bytes, magic: bytes, what: str):
    if len(buf) < _DIMS.size:
        raise TruncatedError(f"{what} file shorter than its header")
    tag, version, n, k = _DIMS.unpack_from(buf)
    if tag != magic:
        raise BadMagicError(f"bad {what} magic {tag!r}, expected {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported {what} version {version}")
    return n, k


# -- features ---------------------------------------------------------------

def save_features(path, x) -> None:
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    with open(path, "wb") as f:
        f.write(_DIMS.pack(FEATURE_MAGIC, VERSION, n, d))
        f.write(x.astype("<f4").tobytes())


def load_features(path, format: str | None = None) -> np.ndarray:
    """Load a feature matrix from the binary container or a CSV file.

    ``format`` is ``"bin"`` or ``"csv"``; by default it is inferred from the
    file suffix (``.csv`` means CSV).
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "bin"
    if format == "csv":
        return _load_csv(path)
    if format != "bin":
        raise ValueError(f"unknown feature format {format!r}")
    buf = path.read_bytes()
    n, d = _read_dims(buf, FEATURE_MAGIC, "feature")
    need = _DIMS.size + 4 * n * d
    if len(buf) < need:
        raise TruncatedError(f"feature file holds {len(buf)} bytes, header promises {need}")
    x = np.frombuffer(buf, dtype="<f4", count=n * d, offset=_DIMS.size)
    return x.astype(np.float64).reshape(n, d)


def _load_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise CSVParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        return np.zeros((0, 0))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise CSVParseError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


# -- labels -----------------------------------------------------------------

def load_labels(path) -> LabelData:
    """One line per item, non-negative integer labels separated by spaces."""
    sets = []
    with open(path) as f:
        text = f.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        tokens = line.split()
        if not tokens:
            raise LabelParseError(f"{path}:{lineno}: empty label line")
        try:
            labels = [int(t) for t in tokens]
        except ValueError:
            raise LabelParseError(f"{path}:{lineno}: non-integer label in {line!r}") from None
        if any(l < 0 for l in labels):
            raise LabelParseError(f"{path}:{lineno}: negative label")
        sets.append(labels)
    return LabelData.from_sets(sets)


def save_labels(path, labels: LabelData) -> None:
    with open(path, "w") as f:
        for s in labels.sets:
            f.write(" ".join(str(l) for l in sorted(s)) + "\n")


# -- codes ------------------------------------------------------------------

def save_codes(path, h: CodeMatrix) -> None:
    with open(path, "wb") as f:
        f.write(_DIMS.pack(CODES_MAGIC, VERSION, h.n, h.m))
        f.write(h.packed.astype("<u8").tobytes())


def load_codes(path) -> CodeMatrix:
    buf = Path(path).read_bytes()
    n, m = _read_dims(buf, CODES_MAGIC, "codes")
    words = -(-m // 64)
    need = _DIMS.size + 8 * n * words
    if len(buf) < need:
        raise TruncatedError(f"codes file holds {len(buf)} bytes, header promises {need}")
    packed = np.frombuffer(buf, dtype="<u8", count=n * words, offset=_DIMS.size)
    return CodeMatrix.from_packed(packed.reshape(n, words).astype(np.uint64), m)


# -- models -----------------------------------------------------------------

def save_model(model: HashModel, path) -> None:
    arrays = {"A": model.A}
    header = {
        "algo": model.algo,
        "mode": model.mode,
        "lambda": model.lambda_,
        "beta": model.beta,
        "config": model.config,
        "kernel": None,
    }
    if model.kernel is not None:
        arrays["kernel_anchors"] = model.kernel.anchors
        arrays["kernel_mean"] = model.kernel.mean[None, :]
        header["kernel"] = {"bandwidth": model.kernel.bandwidth}
    header["arrays"] = [[name, list(a.shape)] for name, a in arrays.items()]
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MODEL_HEAD.pack(MODEL_MAGIC, VERSION, len(blob)))
        f.write(blob)
        for a in arrays.values():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> HashModel:
    buf = Path(path).read_bytes()
    if len(buf) < _MODEL_HEAD.size:
        raise TruncatedError("model file shorter than its header")
    tag, version, hlen = _MODEL_HEAD.unpack_from(buf)
    if tag != MODEL_MAGIC:
        raise BadMagicError(f"bad model magic {tag!r}")
    if version != VERSION:
        raise VersionError(f"unsupported model version {version}")
    start = _MODEL_HEAD.size
    try:
        header = json.loads(buf[start:start + hlen].decode())
        specs = [(name, tuple(shape)) for name, shape in header["arrays"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupted model header: {exc}") from None
    offset = start + hlen
    arrays = {}
    for name, shape in specs:
        count = int(np.prod(shape))
        if len(buf) < offset + 8 * count:
            raise TruncatedError(f"model array {name!r} is truncated")
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    kernel = None
    if header.get("kernel") is not None:
        kernel = KernelMap(arrays["kernel_anchors"], float(header["kernel"]["bandwidth"]),
                           arrays["kernel_mean"][0])
    return HashModel(A=arrays["A"], kernel=kernel, lambda_=header["lambda"], beta=header["beta"],
                     mode=header["mode"], algo=header["algo"], config=header.get("config", {}))


# -- synthetic data ---------------------------------------------------------

def synth_clusters(n: int, d: int, classes: int, spread: float, seed: int):
    """Gaussian blobs around unit-norm random class centers.

    Labels are balanced (``i % classes``) and shuffled.

    Returns:
        ``(features, labels)`` as an n x d array and :class:`LabelData`.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    y = rng.permutation(np.arange(n) % classes)
    x = centers[y] + spread * rng.standard_normal((n, d))
    return x, LabelData.from_single(y)
