"""Forced-alignment ingestion: CTM/TSV parsing, inter-word gaps, break quantization.

A break class is assigned to every inter-word gap by duration:

    br0  (0, 10ms]    no break (0 s maps here too)
    br1  (10, 50ms]   slight / optional break
    br2  (50, 200ms]  break
    br3  (200ms, inf) long break
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass

from .exceptions import DataError, ParseError


class BreakClass(enum.IntEnum):
    BR0 = 0
    BR1 = 1
    BR2 = 2
    BR3 = 3

    @property
    def token(self) -> str:
        return f"br{int(self)}"

    @classmethod
    def from_token(cls, tok: str) -> "BreakClass":
        m = re.fullmatch(r"br([0-3])", tok)
        if m is None:
            raise DataError(f"not a break token: {tok!r}")
        return cls(int(m.group(1)))


# Upper-inclusive duration bounds, in seconds.
_QUANT_BOUNDS = (0.010, 0.050, 0.200)


def quantize(gap: float) -> BreakClass:
    """Map a non-negative inter-word gap in seconds to its break class."""
    if gap < 0:
        raise DataError(f"negative gap: {gap}")
    for cls, bound in zip(BreakClass, _QUANT_BOUNDS):
        if gap <= bound:
            return cls
    return BreakClass.BR3


@dataclass(frozen=True)
class AlignedWord:
    surface: str
    start: float
    end: float

    def __post_init__(self):
        if not self.surface or any(c.isspace() for c in self.surface):
            raise DataError(f"bad word surface: {self.surface!r}")
        if self.start < 0 or self.end < self.start:
            raise DataError(
                f"bad word times for {self.surface!r}: start={self.start} end={self.end}"
            )


@dataclass(frozen=True)
class AlignedUtterance:
    id: str
    words: tuple[AlignedWord, ...]

    def __post_init__(self):
        if not self.words:
            raise DataError(f"utterance {self.id!r} has no words")
        starts = [w.start for w in self.words]
        if any(b < a for a, b in zip(starts, starts[1:])):
            raise DataError(f"utterance {self.id!r} has non-monotone word starts")


@dataclass(frozen=True)
class TokenSequence:
    """Words alternating with break classes: w0 b0 w1 ... b_{n-2} w_{n-1}."""

    id: str
    words: tuple[str, ...]
    breaks: tuple[BreakClass, ...]

    def __post_init__(self):
        if not self.words:
            raise DataError(f"token sequence {self.id!r} is empty")
        if len(self.breaks) != len(self.words) - 1:
            raise DataError(
                f"token sequence {self.id!r}: {len(self.words)} words need "
                f"{len(self.words) - 1} breaks, got {len(self.breaks)}"
            )

    def items(self) -> list[str]:
        """The flat alternating token list (break classes as br0..br3 text)."""
        out = [self.words[0]]
        for br, w in zip(self.breaks, self.words[1:]):
            out.append(br.token)
            out.append(w)
        return out


def inter_word_gaps(utt: AlignedUtterance) -> list[float]:
    """Silence between consecutive words; overlaps clamp to 0."""
    return [
        max(0.0, b.start - a.end) for a, b in zip(utt.words, utt.words[1:])
    ]


_WORD_KEEP = re.compile(r"[^a-z0-9']+")


def normalize_word(surface: str) -> str:
    """Lowercase and strip punctuation; may return '' for pure punctuation."""
    return _WORD_KEEP.sub("", surface.lower())


def build_sequence(utt: AlignedUtterance) -> TokenSequence:
    """Tokenize an aligned utterance into a word/break sequence.

    Pure-punctuation words are dropped; the gap then spans from the previous
    kept word's end to the next kept word's start.
    """
    kept = [
        (normalize_word(w.surface), w)
        for w in utt.words
        if normalize_word(w.surface)
    ]
    if not kept:
        raise DataError(f"utterance {utt.id!r} has no words after normalization")
    words = tuple(surf for surf, _ in kept)
    aligned = [w for _, w in kept]
    breaks = tuple(
        quantize(max(0.0, b.start - a.end)) for a, b in zip(aligned, aligned[1:])
    )
    return TokenSequence(id=utt.id, words=words, breaks=breaks)


def _parse_rows(rows, source: str) -> list[AlignedUtterance]:
    """Group (line_no, utt_id, word, start, end) rows into utterances."""
    utts: list[AlignedUtterance] = []
    seen: set[str] = set()
    cur_id = None
    cur_words: list[AlignedWord] = []

    def flush():
        if cur_id is not None:
            utts.append(AlignedUtterance(id=cur_id, words=tuple(cur_words)))
            seen.add(cur_id)

    for line_no, utt_id, surface, start, end in rows:
        if utt_id != cur_id:
            flush()
            if utt_id in seen:
                raise ParseError(
                    f"utterance {utt_id!r} reappears non-contiguously in {source}",
                    line=line_no,
                )
            cur_id, cur_words = utt_id, []
        if cur_words and start < cur_words[-1].start:
            raise ParseError(
                f"non-monotone start times in utterance {utt_id!r}", line=line_no
            )
        try:
            cur_words.append(AlignedWord(surface=surface, start=start, end=end))
        except DataError as e:
            raise ParseError(str(e), line=line_no) from e
    flush()
    return utts


def _num(text: str, what: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric {what}: {text!r}", line=line_no) from None


def parse_ctm(stream) -> list[AlignedUtterance]:
    """Parse Kaldi-style CTM lines: `<utt-id> <channel> <start-sec> <dur-sec> <word>`.

    Blank lines and lines starting with `#` or `;;` are skipped. Lines of one
    utterance must be contiguous; utterances come out in first-appearance order.
    """
    rows = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ParseError(
                f"expected 5 fields, got {len(fields)}: {line!r}", line=line_no
            )
        utt_id, _channel, start_s, dur_s, word = fields
        start = _num(start_s, "start time", line_no)
        dur = _num(dur_s, "duration", line_no)
        if dur < 0:
            raise ParseError(f"negative duration {dur}", line=line_no)
        rows.append((line_no, utt_id, word, start, start + dur))
    return _parse_rows(rows, "CTM input")


def parse_tsv(stream) -> list[AlignedUtterance]:
    """Parse the 4-column TSV fallback: `<utt-id>\\t<word>\\t<start-sec>\\t<end-sec>`."""
    rows = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(
                f"expected 4 tab-separated fields, got {len(fields)}", line=line_no
            )
        utt_id, word, start_s, end_s = fields
        start = _num(start_s, "start time", line_no)
        end = _num(end_s, "end time", line_no)
        if end < start:
            raise ParseError(f"end {end} before start {start}", line=line_no)
        rows.append((line_no, utt_id, word, start, end))
    return _parse_rows(rows, "TSV input")


def serialize_ctm(utts: list[AlignedUtterance]) -> str:
    """Inverse of parse_ctm on valid utterances (channel fixed to 1)."""
    lines = []
    for utt in utts:
        for w in utt.words:
            lines.append(f"{utt.id} 1 {w.start:.6f} {w.end - w.start:.6f} {w.surface}")
    return "\n".join(lines) + ("\n" if lines else "")


def sequence_to_json(seq: TokenSequence) -> str:
    return json.dumps(
        {"id": seq.id, "words": list(seq.words), "breaks": [int(b) for b in seq.breaks]},
        sort_keys=True,
        separators=(",", ":"),
    )


def sequence_from_json(line: str) -> TokenSequence:
    try:
        obj = json.loads(line)
        return TokenSequence(
            id=obj["id"],
            words=tuple(obj["words"]),
            breaks=tuple(BreakClass(b) for b in obj["breaks"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad token-sequence record: {e}") from e


def read_sequences(stream) -> list[TokenSequence]:
    out = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            out.append(sequence_from_json(line))
        except ParseError as e:
            raise ParseError(str(e), line=line_no) from e
    return out
