"""
Versioned binary container for named float64 tensors.

Layout (little-endian):
    magic b"GCCK" | u32 version | u32 tensor count
    per tensor: u32 name length | UTF-8 name | u32 rank | u64 dims[rank] | f8 payload
"""
import logging
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from glycocc.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"GCCK"
VERSION = 1


def write_tensors(stream: BinaryIO, tensors: Dict[str, np.ndarray]) -> None:
    stream.write(MAGIC)
    stream.write(struct.pack("<II", VERSION, len(tensors)))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        data = np.asarray(array, dtype="<f8")
        stream.write(struct.pack("<I", len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack("<I", data.ndim))
        stream.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        stream.write(data.tobytes(order="C"))


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    chunk = stream.read(size)
    if len(chunk) != size:
        raise CheckpointError("Truncated checkpoint")
    return chunk


def read_tensors(stream: BinaryIO) -> Dict[str, np.ndarray]:
    if _read_exact(stream, 4) != MAGIC:
        raise CheckpointError("Not a glycocc checkpoint (bad magic)")
    version, count = struct.unpack("<II", _read_exact(stream, 8))
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (length,) = struct.unpack("<I", _read_exact(stream, 4))
        name = _read_exact(stream, length).decode("utf-8")
        (rank,) = struct.unpack("<I", _read_exact(stream, 4))
        dims = struct.unpack(f"<{rank}Q", _read_exact(stream, 8 * rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = _read_exact(stream, 8 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    return tensors


def save_checkpoint(path: Union[str, Path], tensors: Dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        write_tensors(f, tensors)
    logger.info("Saved %d tensors to %s", len(tensors), path)


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    try:
        with open(path, "rb") as f:
            tensors = read_tensors(f)
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    logger.info("Loaded %d tensors from %s", len(tensors), path)
    return tensors
