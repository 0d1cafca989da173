"""Ingest parsing, error line numbers, and the leave-one-out split."""

import pytest

from bridgerec.data import Dataset, ingest, split, write_dataset
from bridgerec.errors import ContractError, IngestError


def write(tmp_path, text, name="data.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestIngest:
    def test_round_trip(self, tmp_path):
        uids = [3, 7, 11]
        seqs = [[0, 1, 2, 3], [5, 6, 7], [2, 2, 9, 1, 0]]
        p = tmp_path / "rt.txt"
        write_dataset(p, uids, seqs)
        ds = ingest(p)
        assert ds.user_ids == uids
        assert ds.sequences == seqs
        assert ds.num_items == 10  # max id 9
        assert ds.dropped == 0

    def test_short_lines_dropped_and_counted(self, tmp_path):
        p = write(tmp_path, "0 1 2 3\n1 4\n2 5 6\n3 7 8 9\n")
        ds = ingest(p)
        assert ds.num_users == 2
        assert ds.dropped == 2
        assert ds.user_ids == [0, 3]

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        p = write(tmp_path, "# header\n\n0 1 2 3\n   \n# tail\n1 4 5 6\n")
        ds = ingest(p)
        assert ds.num_users == 2
        assert ds.dropped == 0

    def test_non_integer_field_reports_line(self, tmp_path):
        p = write(tmp_path, "0 1 2 3\n1 4 x 6\n")
        with pytest.raises(IngestError, match=r":2:"):
            ingest(p)

    def test_negative_item_reports_line(self, tmp_path):
        p = write(tmp_path, "0 1 2 3\n1 4 -5 6\n2 7 8 9\n")
        with pytest.raises(IngestError, match=r":2:.*negative"):
            ingest(p)

    def test_duplicate_user_id_rejected(self, tmp_path):
        p = write(tmp_path, "0 1 2 3\n0 4 5 6\n")
        with pytest.raises(IngestError, match="duplicate user id 0"):
            ingest(p)

    def test_all_short_is_an_error(self, tmp_path):
        p = write(tmp_path, "0 1 2\n1 3\n")
        with pytest.raises(IngestError, match="no usable sequences"):
            ingest(p)

    def test_vocab_is_max_plus_one(self, tmp_path):
        p = write(tmp_path, "0 0 41 3\n")
        assert ingest(p).num_items == 42


class TestSplit:
    def test_reconstructs_sequences(self):
        seqs = [[0, 1, 2, 3, 4], [9, 8, 7]]
        ds = Dataset.from_sequences([0, 1], seqs)
        sv = split(ds)
        for i, seq in enumerate(seqs):
            assert sv.train[i] + [sv.valid[i], sv.test[i]] == seq

    def test_lengths(self):
        ds = Dataset.from_sequences([0], [[5, 6, 7]])
        sv = split(ds)
        assert sv.train == [[5]]
        assert sv.valid == [6]
        assert sv.test == [7]

    def test_too_short_raises(self):
        ds = Dataset.from_sequences([0], [[1, 2]])
        with pytest.raises(ContractError):
            split(ds)


class TestFromSequences:
    def test_vocab_inferred(self):
        ds = Dataset.from_sequences([0, 1], [[0, 3], [2, 2]])
        assert ds.num_items == 4

    def test_vocab_explicit(self):
        ds = Dataset.from_sequences([0], [[0, 1]], num_items=100)
        assert ds.num_items == 100
