"""Binary carrier for pre-extracted feature datasets.

Layout, all little-endian:

    offset 0   magic "FEAT"
    offset 4   version byte 0x01
    offset 5   n  (u32)
    offset 9   d  (u32)
    offset 13  c  (u32)
    offset 17  n * d features, IEEE-754 binary32, row-major
    then       n labels, u32

Total length is exactly 17 + 4*n*d + 4*n bytes. Any writer in any
ecosystem that follows this layout interoperates with load_features.
"""

import struct
from pathlib import Path

import numpy as np

from .data import FeatureDataset
from .errors import FormatError

MAGIC = b"FEAT"
VERSION = 1
HEADER_LEN = 17


def load_features(path) -> FeatureDataset:
    """Parse a feature file, validating structure and labels."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_LEN:
        raise FormatError(f"{path}: truncated header, file is {len(raw)} bytes (need {HEADER_LEN})")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic at byte offset 0: {raw[:4]!r}")
    if raw[4] != VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]} at byte offset 4")
    n, d, c = struct.unpack_from("<III", raw, 5)
    expected = HEADER_LEN + 4 * n * d + 4 * n
    if len(raw) != expected:
        raise FormatError(
            f"{path}: length {len(raw)} does not match header (n={n}, d={d}): expected {expected}"
        )
    features = np.frombuffer(raw, dtype="<f4", count=n * d, offset=HEADER_LEN)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=HEADER_LEN + 4 * n * d)
    bad = np.flatnonzero(labels >= c)
    if bad.size:
        i = int(bad[0])
        offset = HEADER_LEN + 4 * n * d + 4 * i
        raise FormatError(
            f"{path}: label {int(labels[i])} >= c={c} at byte offset {offset} (row {i})"
        )
    try:
        return FeatureDataset(
            features=features.reshape(n, d).astype(np.float64),
            labels=labels.astype(np.int64),
            num_classes=int(c),
            name=path.stem,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_features(ds: FeatureDataset, path) -> None:
    """Write a dataset in the binary layout (features cast to binary32)."""
    path = Path(path)
    header = MAGIC + bytes([VERSION]) + struct.pack("<III", ds.n, ds.dim, ds.num_classes)
    body = ds.features.astype("<f4").tobytes(order="C") + ds.labels.astype("<u4").tobytes()
    path.write_bytes(header + body)
