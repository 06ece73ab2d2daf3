"""Versioned binary container for model index files.

Every artifact (tries, subword model, reranker) is stored in the same
envelope: magic, format version, a kind tag, a small JSON metadata header,
then named binary sections.  Serialisation is fully deterministic: the same
inputs produce byte-identical files, so builds can be compared with a plain
checksum.  Nothing time- or host-dependent goes in here.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

MAGIC = b"GHST"
VERSION = 1

_DTYPE_CODES = {
    b"i": "<i4",
    b"q": "<i8",
    b"d": "<f8",
}
_CODE_FOR_KIND = {"i": b"i", "l": b"q", "f": b"d"}


class ContainerFormatError(ValueError):
    """Raised when a file is not a readable index container."""


def _code_for_array(arr: np.ndarray) -> bytes:
    if arr.dtype.kind == "f":
        return b"d"
    if arr.dtype.kind == "i":
        return b"i" if arr.dtype.itemsize <= 4 else b"q"
    raise TypeError(f"unsupported section dtype {arr.dtype}")


def write_container(path: str, kind: str, meta: dict, sections: dict) -> None:
    """Write ``sections`` (numpy arrays, str, or bytes values) under ``kind``.

    Section order follows dict insertion order and is part of the byte
    layout, so callers should build the dict the same way every time.
    The file is written to a sibling temp path and renamed into place, so
    an interrupted write never leaves a truncated index behind.
    """
    meta_blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    kind_blob = kind.encode("ascii")
    tmp_path = f"{path}.tmp.{os.getpid()}"
    with open(tmp_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HB", VERSION, len(kind_blob)))
        fh.write(kind_blob)
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        fh.write(struct.pack("<I", len(sections)))
        for name, value in sections.items():
            name_blob = name.encode("ascii")
            if isinstance(value, str):
                code, payload = b"S", value.encode("utf-8")
            elif isinstance(value, bytes):
                code, payload = b"B", value
            else:
                arr = np.ascontiguousarray(value)
                code = _code_for_array(arr)
                payload = arr.astype(_DTYPE_CODES[code], copy=False).tobytes()
            fh.write(struct.pack("<B", len(name_blob)))
            fh.write(name_blob)
            fh.write(code)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)
    os.replace(tmp_path, path)


def read_container(path: str, expect_kind: str | None = None) -> tuple[str, dict, dict]:
    """Read a container back as ``(kind, meta, sections)``.

    Array sections come back as numpy arrays, ``S`` sections as str, ``B`` as
    bytes.  ``expect_kind`` turns a wrong-artifact mixup into a clear error.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ContainerFormatError(f"{path}: not a ghostline index file (bad magic)")
    pos = 4
    version, kind_len = struct.unpack_from("<HB", blob, pos)
    pos += 3
    if version != VERSION:
        raise ContainerFormatError(
            f"{path}: container version {version} not supported (reader is version {VERSION})"
        )
    kind = blob[pos : pos + kind_len].decode("ascii")
    pos += kind_len
    if expect_kind is not None and kind != expect_kind:
        raise ContainerFormatError(f"{path}: expected a {expect_kind!r} index, found {kind!r}")
    (meta_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    meta = json.loads(blob[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (n_sections,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    sections: dict = {}
    for _ in range(n_sections):
        (name_len,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        name = blob[pos : pos + name_len].decode("ascii")
        pos += name_len
        code = blob[pos : pos + 1]
        pos += 1
        (payload_len,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        payload = blob[pos : pos + payload_len]
        pos += payload_len
        if code == b"S":
            sections[name] = payload.decode("utf-8")
        elif code == b"B":
            sections[name] = bytes(payload)
        elif code in _DTYPE_CODES:
            sections[name] = np.frombuffer(payload, dtype=_DTYPE_CODES[code]).copy()
        else:
            raise ContainerFormatError(f"{path}: unknown section type {code!r}")
    return kind, meta, sections


def encode_string_list(strings: list[str]) -> tuple[bytes, np.ndarray]:
    """Pack a list of strings as (utf-8 blob, end-offset array)."""
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.cumsum([len(e) for e in encoded], dtype=np.int64)
    return b"".join(encoded), offsets


def decode_string_list(blob: bytes, offsets: np.ndarray) -> list[str]:
    out = []
    start = 0
    for end in offsets.tolist():
        out.append(blob[start:end].decode("utf-8"))
        start = end
    return out
