"""Binary container used for DMD models, reduced models and surrogates.

Layout (all integers little-endian)::

    bytes 0..7    magic b"ROMOPT01"
    bytes 8..15   uint64 header length H
    next H bytes  UTF-8 JSON header
    payload       concatenated little-endian float64 blocks

The header carries an ``"arrays"`` list; each entry is
``{"name", "shape", "complex", "offset", "count"}`` where ``offset`` and
``count`` are measured in float64 words from the start of the payload.
Complex arrays are stored as interleaved (re, im) pairs, real arrays in
C (row-major) order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ROMOPT01"


class ContainerError(ValueError):
    """Raised when a container file is malformed."""


def dumps(header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    entries = []
    blocks = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        is_complex = np.iscomplexobj(arr)
        if is_complex:
            flat = np.ascontiguousarray(arr, dtype="<c16").view("<f8").ravel()
        else:
            flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "complex": bool(is_complex),
                "offset": offset,
                "count": int(flat.size),
            }
        )
        blocks.append(flat.tobytes())
        offset += flat.size
    head = dict(header)
    head["arrays"] = entries
    raw = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(raw)) + raw + b"".join(blocks)


def loads(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(data) < 16 or data[:8] != MAGIC:
        raise ContainerError("not a romopt container (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if 16 + hlen > len(data):
        raise ContainerError("truncated container header")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"corrupt container header: {exc}") from exc
    if (len(data) - 16 - hlen) % 8:
        raise ContainerError("payload is not a whole number of float64 words")
    payload = np.frombuffer(data, dtype="<f8", offset=16 + hlen)
    arrays = {}
    for entry in header.pop("arrays", []):
        lo, n = entry["offset"], entry["count"]
        if lo + n > payload.size:
            raise ContainerError(f"array {entry['name']!r} runs past end of file")
        block = payload[lo : lo + n].astype(np.float64)
        if entry["complex"]:
            block = block.view(np.complex128)
        arrays[entry["name"]] = block.reshape(entry["shape"])
    return header, arrays


def write(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(header, arrays))


def read(path) -> tuple[dict, dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())
