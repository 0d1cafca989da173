"""Dataset ingestion and the leave-one-out split.

Line format: one user per line, ``user_id item_1 item_2 ...`` in chronological
order. Sequences shorter than 3 are dropped (and counted) so that the split
always has a nonempty train prefix, a validation target and a test target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError, IngestError


@dataclass
class Dataset:
    user_ids: list[int]
    sequences: list[list[int]]
    num_items: int
    dropped: int = 0  # lines removed at ingest for being shorter than 3

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @classmethod
    def from_sequences(cls, user_ids, sequences, num_items: int | None = None) -> "Dataset":
        """Build directly from in-memory sequences (vocab inferred if omitted)."""
        if num_items is None:
            num_items = 1 + max((max(s) for s in sequences if s), default=-1)
        return cls(user_ids=list(user_ids), sequences=[list(s) for s in sequences],
                   num_items=num_items)


@dataclass
class SplitView:
    train: list[list[int]] = field(default_factory=list)
    valid: list[int] = field(default_factory=list)
    test: list[int] = field(default_factory=list)


def ingest(path) -> Dataset:
    user_ids: list[int] = []
    sequences: list[list[int]] = []
    seen: set[int] = set()
    dropped = 0
    max_item = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                fields = [int(p) for p in parts]
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-integer field") from None
            uid, items = fields[0], fields[1:]
            if any(i < 0 for i in items):
                raise IngestError(f"{path}:{lineno}: negative item id")
            if uid in seen:
                raise IngestError(f"{path}:{lineno}: duplicate user id {uid}")
            seen.add(uid)
            if len(items) < 3:
                dropped += 1
                continue
            user_ids.append(uid)
            sequences.append(items)
            max_item = max(max_item, max(items))
    if not sequences:
        raise IngestError(f"{path}: no usable sequences (need length >= 3)")
    return Dataset(user_ids=user_ids, sequences=sequences,
                   num_items=max_item + 1, dropped=dropped)


def write_dataset(path, user_ids, sequences):
    with open(path, "w") as fh:
        for uid, seq in zip(user_ids, sequences):
            fh.write(f"{uid} " + " ".join(str(i) for i in seq) + "\n")


def split(dataset: Dataset) -> SplitView:
    """Per user: last item is test, second-to-last is validation."""
    sv = SplitView()
    for seq in dataset.sequences:
        if len(seq) < 3:
            raise ContractError("sequences must have length >= 3 for the split")
        sv.train.append(seq[:-2])
        sv.valid.append(seq[-2])
        sv.test.append(seq[-1])
    return sv
