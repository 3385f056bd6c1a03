"""Against-reference baseline: rank a break pattern by similarity to a template.

Similarity is the positionwise exact-match rate over break positions; the
score is mapped to ranks with thresholds [0, 0.3) Poor, [0.3, 0.7) Fair,
[0.7, 1.0] Great.
"""
from __future__ import annotations

from .alignment import TokenSequence
from .exceptions import DataError
from .ranks import Rank


def _check_same_words(test: TokenSequence, ref: TokenSequence) -> None:
    if test.words != ref.words:
        raise DataError(
            f"word sequences differ between test {test.id!r} and reference {ref.id!r}"
        )


def break_similarity(test: TokenSequence, ref: TokenSequence) -> float:
    """Fraction of break positions with identical break class; 1.0 when there are none."""
    _check_same_words(test, ref)
    if not test.breaks:
        return 1.0
    same = sum(a == b for a, b in zip(test.breaks, ref.breaks))
    return same / len(test.breaks)


def rank_from_similarity(score: float) -> Rank:
    if not 0.0 <= score <= 1.0:
        raise DataError(f"similarity score out of [0,1]: {score}")
    if score < 0.3:
        return Rank.POOR
    if score < 0.7:
        return Rank.FAIR
    return Rank.GREAT


def fine_rank_against_reference(test: TokenSequence, ref: TokenSequence) -> list[Rank]:
    """Per-position ranks: exact class Great, adjacent class Fair, else Poor."""
    _check_same_words(test, ref)
    out = []
    for a, b in zip(test.breaks, ref.breaks):
        dist = abs(int(a) - int(b))
        out.append(Rank.GREAT if dist == 0 else Rank.FAIR if dist == 1 else Rank.POOR)
    return out


def best_of_references(test: TokenSequence, refs: list[TokenSequence]) -> float:
    """Maximum similarity over the available reference renditions."""
    if not refs:
        raise DataError(f"no references supplied for {test.id!r}")
    return max(break_similarity(test, ref) for ref in refs)
