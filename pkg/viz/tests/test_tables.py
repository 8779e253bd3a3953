"""Format readers against files written by hand to the documented layouts."""

import struct

import numpy as np
import pytest

from melviz.tables import read_artists, read_embeddings, read_mel_cache


def write_embeddings(path, rows, width=4):
    header = ["track_id", "artist", "clip_index"] + [f"e{i}" for i in range(width)]
    lines = ["\t".join(header)]
    for track_id, artist, clip_index, vector in rows:
        values = "\t".join(repr(float(v)) for v in vector)
        lines.append(f"{track_id}\t{artist}\t{clip_index}\t{values}")
    path.write_text("\n".join(lines) + "\n")


class TestEmbeddings:
    def test_parses_rows(self, tmp_path):
        path = tmp_path / "emb.tsv"
        write_embeddings(path, [(7, "ada", 0, [1, 2, 3, 4]), (7, "ada", 1, [5, 6, 7, 8]),
                                (9, "bix", 0, [0, 0, 1, 1])])
        table = read_embeddings(path)
        assert len(table) == 3
        assert table.vectors.shape == (3, 4)
        assert table.artists == ["ada", "ada", "bix"]
        assert table.artist_names == ["ada", "bix"]
        np.testing.assert_array_equal(table.track_ids, [7, 7, 9])

    def test_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "emb.tsv"
        path.write_text("track_id\tartist\tclip_index\te0\te1\n1\tada\t0\t0.5\n")
        with pytest.raises(ValueError, match="row 2"):
            read_embeddings(path)

    def test_rejects_other_tables(self, tmp_path):
        path = tmp_path / "x.tsv"
        path.write_text("a\tb\tc\n")
        with pytest.raises(ValueError, match="not an embeddings"):
            read_embeddings(path)

    def test_rejects_empty_table(self, tmp_path):
        path = tmp_path / "emb.tsv"
        write_embeddings(path, [])
        with pytest.raises(ValueError, match="no rows"):
            read_embeddings(path)


def write_cache(path, values, track_id=0):
    values = np.asarray(values, dtype="<f4")
    header = b"MELS" + struct.pack("<BIII", 1, values.shape[0], values.shape[1], track_id)
    path.write_bytes(header + values.tobytes())


class TestMelCache:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "3.mels"
        values = np.arange(12, dtype=np.float32).reshape(3, 4)
        write_cache(path, values, track_id=3)
        got, track_id = read_mel_cache(path)
        assert track_id == 3
        np.testing.assert_array_equal(got, values)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.mels"
        path.write_bytes(b"JUNK" + bytes(20))
        with pytest.raises(ValueError, match="not a mel cache"):
            read_mel_cache(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "x.mels"
        write_cache(path, np.zeros((4, 4), dtype=np.float32))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_mel_cache(path)


class TestManifest:
    def test_reads_artist_column(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("track_id\tartist\talbum\ttitle\tpath\n"
                        "0\tada\talbum_0\tsong_00\t/x/0.wav\n"
                        "1\tbix\talbum_0\tsong_00\t/x/1.wav\n")
        assert read_artists(path) == {0: "ada", 1: "bix"}

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("nope\n")
        with pytest.raises(ValueError, match="not a manifest"):
            read_artists(path)
