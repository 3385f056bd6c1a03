"""Whole-word vocabulary and sequence encoding.

Reserved ids are fixed: PAD=0, UNK=1, CLS=2, SEP=3, BR0..BR3=4..7.
Word ids start at 8, assigned by descending frequency (ties lexicographic).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .alignment import BreakClass, TokenSequence
from .exceptions import DataError, ParseError

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3
BR_BASE_ID = 4  # BR0..BR3 occupy 4..7
FIRST_WORD_ID = 8

RESERVED_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "br0", "br1", "br2", "br3")


def break_id(cls: BreakClass) -> int:
    return BR_BASE_ID + int(cls)


def is_break_id(token_id: int) -> bool:
    return BR_BASE_ID <= token_id < BR_BASE_ID + 4


@dataclass(frozen=True)
class Vocabulary:
    word_to_id: dict[str, int]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = list(self.word_to_id.values())
        if len(set(ids)) != len(ids):
            raise DataError("vocabulary mapping is not injective")
        if any(i < FIRST_WORD_ID for i in ids):
            raise DataError("word ids must start at 8 (reserved range collision)")

    @property
    def size(self) -> int:
        return FIRST_WORD_ID + len(self.word_to_id)

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word, UNK_ID)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def to_lines(self) -> list[str]:
        """Serialize as `<id>\\t<token>\\t<count>` lines, reserved tokens first."""
        lines = [f"{i}\t{tok}\t0" for i, tok in enumerate(RESERVED_TOKENS)]
        for word, idx in sorted(self.word_to_id.items(), key=lambda kv: kv[1]):
            lines.append(f"{idx}\t{word}\t{self.counts.get(word, 0)}")
        return lines

    @classmethod
    def from_lines(cls, lines) -> "Vocabulary":
        word_to_id: dict[str, int] = {}
        counts: dict[str, int] = {}
        for line_no, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError("expected `id<TAB>token<TAB>count`", line=line_no)
            try:
                idx, count = int(fields[0]), int(fields[2])
            except ValueError:
                raise ParseError(f"non-integer id/count in {line!r}", line=line_no) from None
            tok = fields[1]
            if idx < FIRST_WORD_ID:
                if idx >= len(RESERVED_TOKENS) or RESERVED_TOKENS[idx] != tok:
                    raise ParseError(f"reserved id {idx} must be {RESERVED_TOKENS[idx]!r}", line=line_no)
                continue
            word_to_id[tok] = idx
            counts[tok] = count
        return cls(word_to_id=word_to_id, counts=counts)


def build_vocab(corpus: list[TokenSequence], min_count: int = 1) -> Vocabulary:
    """Count words over the corpus; keep those with frequency >= min_count."""
    if min_count < 1:
        raise DataError(f"min_count must be >= 1, got {min_count}")
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    freq = Counter()
    for seq in corpus:
        freq.update(seq.words)
    kept = sorted(
        (w for w, c in freq.items() if c >= min_count),
        key=lambda w: (-freq[w], w),
    )
    word_to_id = {w: FIRST_WORD_ID + i for i, w in enumerate(kept)}
    return Vocabulary(word_to_id=word_to_id, counts={w: freq[w] for w in kept})


def encode(
    seq: TokenSequence, vocab: Vocabulary, max_len: int = 128
) -> tuple[list[int], list[bool]]:
    """Encode to `[CLS] w0 b0 w1 ...` ids, truncated to max_len.

    Returns (ids, break_mask); the mask is True exactly at break positions.
    """
    if max_len < 2:
        raise DataError(f"max_len must be >= 2, got {max_len}")
    ids = [CLS_ID, vocab.id_of(seq.words[0])]
    mask = [False, False]
    for br, word in zip(seq.breaks, seq.words[1:]):
        ids.append(break_id(br))
        mask.append(True)
        ids.append(vocab.id_of(word))
        mask.append(False)
    return ids[:max_len], mask[:max_len]
