"""Binary archive format: round-trip identity, byte determinism, and
rejection of every corruption mode the reader guards against."""
import struct

import numpy as np
import pytest

from voxfuse.archive import (
    MAGIC, read_embedding_archive, write_embedding_archive,
)
from voxfuse.data import Augmentation, EmbeddingRecord, EmbeddingSet, Modality
from voxfuse.errors import (
    ArchiveCorruptionError, ArchiveFormatError, DuplicateKeyError, ShapeError,
)

HEADER_SIZE = 17


def make_set(rng: np.random.Generator, dim: int = 5, count: int = 4,
             modality: Modality = Modality.AUDIO) -> EmbeddingSet:
    augs = list(Augmentation)
    out = EmbeddingSet(dim, modality)
    for i in range(count):
        out.add(EmbeddingRecord(
            speaker_id=f"spk{i % 3}",
            utterance_id=f"utt{i:03d}",
            modality=modality,
            augmentation=augs[i % len(augs)],
            vector=rng.standard_normal(dim).astype(np.float32)))
    return out


@pytest.mark.parametrize("count", [0, 1, 4, 37])
@pytest.mark.parametrize("modality", [Modality.AUDIO, Modality.TEXT])
def test_round_trip_identity(tmp_path, count, modality):
    rng = np.random.default_rng(count)
    original = make_set(rng, dim=7, count=count, modality=modality)
    path = tmp_path / "a.vxa"
    write_embedding_archive(original, path)
    loaded = read_embedding_archive(path)
    assert loaded == original
    assert loaded.dimension == 7
    assert loaded.modality is modality


def test_round_trip_is_byte_identical(tmp_path):
    rng = np.random.default_rng(11)
    original = make_set(rng, dim=9, count=12)
    first = tmp_path / "first.vxa"
    second = tmp_path / "second.vxa"
    write_embedding_archive(original, first)
    write_embedding_archive(read_embedding_archive(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_write_is_deterministic(tmp_path):
    rng = np.random.default_rng(2)
    emb = make_set(rng, count=6)
    a, b = tmp_path / "a.vxa", tmp_path / "b.vxa"
    write_embedding_archive(emb, a)
    write_embedding_archive(emb, b)
    assert a.read_bytes() == b.read_bytes()
    # no temp files left behind
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.vxa", "b.vxa"]


def test_unicode_identifiers_survive(tmp_path):
    emb = EmbeddingSet(3, Modality.TEXT)
    emb.add(EmbeddingRecord("sprecher-éè", "utt-中文",
                            Modality.TEXT, Augmentation.ORIGINAL,
                            np.ones(3, dtype=np.float32)))
    path = tmp_path / "u.vxa"
    write_embedding_archive(emb, path)
    loaded = read_embedding_archive(path)
    rec = loaded.records[0]
    assert rec.speaker_id == "sprecher-éè"
    assert rec.utterance_id == "utt-中文"


def test_header_layout(tmp_path):
    emb = make_set(np.random.default_rng(0), dim=5, count=2)
    path = tmp_path / "h.vxa"
    write_embedding_archive(emb, path)
    data = path.read_bytes()
    magic, version, mod_tag, dim, count = struct.unpack_from("<4sIBII", data, 0)
    assert magic == MAGIC == b"VXA1"
    assert version == 1
    assert mod_tag == 0
    assert dim == 5
    assert count == 2


def test_identifier_too_long_rejected(tmp_path):
    emb = EmbeddingSet(2, Modality.AUDIO)
    emb.add(EmbeddingRecord("s" * 70000, "u", Modality.AUDIO,
                            Augmentation.ORIGINAL,
                            np.zeros(2, dtype=np.float32)))
    with pytest.raises(ArchiveFormatError, match="identifier too long"):
        write_embedding_archive(emb, tmp_path / "x.vxa")
    assert not (tmp_path / "x.vxa").exists()


def write_valid(tmp_path, count=3):
    path = tmp_path / "base.vxa"
    write_embedding_archive(make_set(np.random.default_rng(5), count=count), path)
    return path


def rewrite(tmp_path, data: bytes):
    path = tmp_path / "mut.vxa"
    path.write_bytes(data)
    return path


def test_rejects_short_file(tmp_path):
    path = rewrite(tmp_path, b"VXA1\x01")
    with pytest.raises(ArchiveFormatError, match="too short"):
        read_embedding_archive(path)


def test_rejects_bad_magic(tmp_path):
    data = bytearray(write_valid(tmp_path).read_bytes())
    data[:4] = b"NOPE"
    with pytest.raises(ArchiveFormatError, match="bad magic"):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_rejects_unknown_version(tmp_path):
    data = bytearray(write_valid(tmp_path).read_bytes())
    data[4] = 9
    with pytest.raises(ArchiveFormatError, match="unsupported version"):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_rejects_unknown_modality_tag(tmp_path):
    data = bytearray(write_valid(tmp_path).read_bytes())
    data[8] = 7
    with pytest.raises(ArchiveFormatError, match="unknown modality tag"):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_rejects_truncated_record(tmp_path):
    data = write_valid(tmp_path).read_bytes()
    with pytest.raises(ArchiveCorruptionError, match="truncated"):
        read_embedding_archive(rewrite(tmp_path, data[:-3]))


def test_rejects_truncation_inside_string(tmp_path):
    data = write_valid(tmp_path).read_bytes()
    # cut mid-way through the first record's speaker id
    with pytest.raises(ArchiveCorruptionError, match="truncated"):
        read_embedding_archive(rewrite(tmp_path, data[:HEADER_SIZE + 3]))


def test_rejects_trailing_bytes(tmp_path):
    data = write_valid(tmp_path).read_bytes()
    with pytest.raises(ArchiveCorruptionError, match="trailing bytes"):
        read_embedding_archive(rewrite(tmp_path, data + b"\x00\x01"))


def test_rejects_unknown_augmentation_tag(tmp_path):
    path = write_valid(tmp_path, count=1)
    data = bytearray(path.read_bytes())
    # record 0: u16+sid ("spk0"), u16+uid ("utt000"), then the aug byte
    aug_offset = HEADER_SIZE + 2 + 4 + 2 + 6
    assert data[aug_offset] == 0
    data[aug_offset] = 250
    with pytest.raises(ArchiveCorruptionError, match="unknown augmentation tag"):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_rejects_duplicate_keys(tmp_path):
    path = write_valid(tmp_path, count=1)
    data = path.read_bytes()
    header = bytearray(data[:HEADER_SIZE])
    record = data[HEADER_SIZE:]
    struct.pack_into("<I", header, 13, 2)  # claim two records, repeat one
    with pytest.raises(DuplicateKeyError):
        read_embedding_archive(rewrite(tmp_path, bytes(header) + record * 2))


def test_rejects_non_finite_vector(tmp_path):
    path = write_valid(tmp_path, count=1)
    data = bytearray(path.read_bytes())
    nan = struct.pack("<f", float("nan"))
    data[-4:] = nan
    with pytest.raises(ArchiveCorruptionError, match="non-finite"):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_rejects_invalid_utf8(tmp_path):
    path = write_valid(tmp_path, count=1)
    data = bytearray(path.read_bytes())
    data[HEADER_SIZE + 2] = 0xFF  # first byte of the speaker id
    with pytest.raises(ArchiveCorruptionError):
        read_embedding_archive(rewrite(tmp_path, bytes(data)))


def test_non_finite_record_rejected_at_construction():
    with pytest.raises(ShapeError, match="non-finite"):
        EmbeddingRecord("s", "u", Modality.AUDIO, Augmentation.ORIGINAL,
                        np.array([1.0, np.nan], dtype=np.float32))
