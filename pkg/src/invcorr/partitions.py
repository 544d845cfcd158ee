"""Set partitions of ``{1..d}``, Bell numbers and clique partition points."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .errors import DimensionError, ValidationError

DEFAULT_CAP = 12


@dataclass(frozen=True)
class SetPartition:
    """A partition of ``{1..d}`` into nonempty blocks of 1-based indices.

    Blocks are canonicalized on construction: each block sorted ascending and
    blocks ordered by their smallest element.
    """

    d: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(i) for i in b)) for b in self.blocks),
                              key=lambda b: b[0] if b else 0))
        problems = []
        if self.d < 1:
            problems.append(f"d must be positive, got {self.d}")
        if any(len(b) == 0 for b in blocks):
            problems.append("blocks must be nonempty")
        flat = [i for b in blocks for i in b]
        if len(flat) != len(set(flat)):
            problems.append("blocks must be pairwise disjoint")
        if set(flat) != set(range(1, self.d + 1)):
            problems.append(f"union of blocks must be exactly {{1..{self.d}}}")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, labels) -> "SetPartition":
        """Build from a sequence of block labels, one per element."""
        groups = {}
        for i, lab in enumerate(labels, start=1):
            groups.setdefault(int(lab), []).append(i)
        return cls(len(labels), tuple(groups.values()))

    def labels(self) -> np.ndarray:
        """Restricted growth string: 0-based block label of each element."""
        out = np.empty(self.d, dtype=np.int64)
        for k, block in enumerate(self.blocks):
            out[[i - 1 for i in block]] = k
        return out

    @property
    def k(self) -> int:
        return len(self.blocks)

    def to_dict(self) -> dict:
        return {"d": self.d, "blocks": [list(b) for b in self.blocks]}

    @classmethod
    def from_dict(cls, obj) -> "SetPartition":
        blocks = obj["blocks"]
        d = obj.get("d", sum(len(b) for b in blocks))
        return cls(int(d), tuple(tuple(b) for b in blocks))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def _check_dimension(d, cap, lower=1):
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise DimensionError(f"dimension must be an integer, got {d!r}")
    if d < lower:
        raise DimensionError(f"dimension must be at least {lower}, got {d}")
    if d > cap:
        raise DimensionError(
            f"dimension {d} exceeds the cap {cap} (Bell({d}) = {bell_number(d)} partitions); "
            "raise cap explicitly to proceed"
        )


@lru_cache(maxsize=None)
def bell_number(d: int) -> int:
    """Number of set partitions of ``{1..d}``, via the Bell triangle."""
    if d < 0:
        raise DimensionError(f"d must be nonnegative, got {d}")
    if d == 0:
        return 1
    row = [1]
    for _ in range(d - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def partition_labels(d: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Restricted growth strings of all partitions of ``{1..d}``.

    Returns a ``Bell(d) x d`` int8 array in lexicographic order. This order is
    the column order of the membership LP.
    """
    _check_dimension(d, cap)
    table = kernels.rgs_table(int(d), bell_number(int(d)))
    table.setflags(write=False)
    return table


def enumerate_partitions(d: int, cap: int = DEFAULT_CAP) -> list:
    """All set partitions of ``{1..d}`` in restricted-growth-string lexicographic order.

    >>> [str(p) for p in enumerate_partitions(3)]
    ['{{1,2,3}}', '{{1,2},{3}}', '{{1,3},{2}}', '{{1},{2,3}}', '{{1},{2},{3}}']
    """
    return [SetPartition.from_labels(row) for row in partition_labels(d, cap)]


def clique_point(partition: SetPartition) -> np.ndarray:
    """0/1 matrix with entry (i, j) = 1 iff i and j share a block."""
    lab = partition.labels()
    return (lab[:, None] == lab[None, :]).astype(np.int8)


def partition_of_vector(y) -> SetPartition:
    """Group indices by exact equality of their values."""
    y = list(y)
    if not y:
        raise ValidationError("vector must be nonempty")
    first_seen = {}
    labels = [first_seen.setdefault(v, len(first_seen)) for v in y]
    return SetPartition.from_labels(labels)
