"""The three-point assessment scale shared by every scoring path."""
from __future__ import annotations

import enum


class Rank(enum.IntEnum):
    POOR = 1
    FAIR = 2
    GREAT = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


def rank_to_class(r: Rank) -> int:
    """0-based class index (Poor=0) for confusion matrices and model heads."""
    return int(r) - 1


def class_to_rank(c: int) -> Rank:
    return Rank(c + 1)
