"""Binary embedding archive I/O (format "VXA1").

Layout, all integers little-endian:

    bytes 0-3   magic  b"VXA1"
    u32         version (currently 1)
    u8          modality     0 = audio, 1 = text
    u32         dimension    D
    u32         record count N
    N records, each:
        u16 + bytes   speaker id (UTF-8, length-prefixed)
        u16 + bytes   utterance id (UTF-8, length-prefixed)
        u8            augmentation  0 original, 1 time_mask, 2 freq_mask, 3 speed
        D x f32       embedding coordinates

Strings are length-prefixed rather than null-terminated so ids may contain
arbitrary UTF-8. Duplicate (speaker, utterance, augmentation) keys are a
hard error on read: silently keeping one copy would corrupt enrollment
averaging downstream.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .data import Augmentation, EmbeddingRecord, EmbeddingSet, Modality
from .errors import ArchiveCorruptionError, ArchiveFormatError, ShapeError

MAGIC = b"VXA1"
VERSION = 1

_HEADER = struct.Struct("<4sIBII")


def write_embedding_archive(embeddings: EmbeddingSet, path: str | Path) -> None:
    """Serialize a set to `path`; output is byte-deterministic and the
    file appears atomically (written to a sibling temp file, then renamed)."""
    parts = [_HEADER.pack(MAGIC, VERSION, embeddings.modality.wire_tag,
                          embeddings.dimension, len(embeddings))]
    for rec in embeddings:
        sid = rec.speaker_id.encode("utf-8")
        uid = rec.utterance_id.encode("utf-8")
        if len(sid) > 0xFFFF or len(uid) > 0xFFFF:
            raise ArchiveFormatError(
                f"identifier too long to serialize: {rec.speaker_id!r}/"
                f"{rec.utterance_id!r}")
        parts.append(struct.pack("<H", len(sid)))
        parts.append(sid)
        parts.append(struct.pack("<H", len(uid)))
        parts.append(uid)
        parts.append(struct.pack("<B", rec.augmentation.wire_tag))
        parts.append(rec.vector.astype("<f4", copy=False).tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    try:
        tmp.write_bytes(b"".join(parts))
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def read_embedding_archive(path: str | Path) -> EmbeddingSet:
    """Parse a VXA1 file; round-trips write_embedding_archive bit-for-bit."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ArchiveFormatError(f"{path}: too short for a VXA1 header")
    magic, version, mod_tag, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ArchiveFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ArchiveFormatError(f"{path}: unsupported version {version}")
    try:
        modality = Modality.from_wire_tag(mod_tag)
    except ValueError as exc:
        raise ArchiveFormatError(f"{path}: {exc}") from None

    out = EmbeddingSet(dimension=dim, modality=modality)
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for i in range(count):
        sid, offset = _read_string(data, offset, path, i)
        uid, offset = _read_string(data, offset, path, i)
        if offset + 1 > len(data):
            raise ArchiveCorruptionError(f"{path}: record {i} truncated")
        (aug_tag,) = struct.unpack_from("<B", data, offset)
        offset += 1
        try:
            augmentation = Augmentation.from_wire_tag(aug_tag)
        except ValueError as exc:
            raise ArchiveCorruptionError(f"{path}: record {i}: {exc}") from None
        if offset + vec_bytes > len(data):
            raise ArchiveCorruptionError(f"{path}: record {i} vector truncated")
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        try:
            record = EmbeddingRecord(sid, uid, modality, augmentation, vector)
        except ShapeError as exc:
            raise ArchiveCorruptionError(f"{path}: record {i}: {exc}") from None
        out.add(record)
    if offset != len(data):
        raise ArchiveCorruptionError(
            f"{path}: {len(data) - offset} trailing bytes after {count} records"
        )
    return out


def _read_string(data: bytes, offset: int, path, rec_idx: int) -> tuple[str, int]:
    if offset + 2 > len(data):
        raise ArchiveCorruptionError(f"{path}: record {rec_idx} truncated")
    (length,) = struct.unpack_from("<H", data, offset)
    offset += 2
    if offset + length > len(data):
        raise ArchiveCorruptionError(f"{path}: record {rec_idx} string truncated")
    try:
        text = data[offset:offset + length].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ArchiveCorruptionError(f"{path}: record {rec_idx}: {exc}") from None
    return text, offset + length
