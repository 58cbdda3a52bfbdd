"""Greedy subword tokenization with label propagation and recombination.

Words are lower-cased, split by longest-match-first against a piece
inventory (continuations carry a "##" prefix), wrapped with a leading [CLS],
and padded with [PAD]. Each word's label is copied to all of its pieces, but
only the first piece of each word is marked active; predictions are folded
back to word level by reading the tag at that active piece.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus

PAD_PIECE = "[PAD]"
UNK_PIECE = "[UNK]"
CLS_PIECE = "[CLS]"
MASK_PIECE = "[MASK]"
SPECIAL_PIECES = (PAD_PIECE, UNK_PIECE, CLS_PIECE, MASK_PIECE)


class TokenizerError(ValueError):
    """Encoding length overflow or a prediction/encoding misalignment."""


@dataclass
class WordPieceVocab:
    pieces: dict[str, int]
    id_to_piece: list[str]

    @property
    def pad_id(self) -> int:
        return self.pieces[PAD_PIECE]

    @property
    def unk_id(self) -> int:
        return self.pieces[UNK_PIECE]

    @property
    def cls_id(self) -> int:
        return self.pieces[CLS_PIECE]

    def __len__(self) -> int:
        return len(self.id_to_piece)


@dataclass
class SubwordEncoding:
    """Subword ids plus the alignment back to source words.

    word_index is -1 at special/pad positions; active is True exactly at the
    first piece of each word; length counts [CLS] plus all word pieces.
    """

    ids: list[int]
    word_index: list[int]
    active: list[bool]
    length: int


def build_wordpiece_vocab(corpus: Corpus, min_count: int = 1) -> WordPieceVocab:
    """Derive a piece inventory from a corpus.

    Specials come first, then every character seen in the raw text (and its
    "##" continuation form, guaranteeing totality up to [UNK]), then whole
    lower-cased words meeting ``min_count``, ordered by descending frequency
    with lexicographic ties.
    """
    chars: set[str] = set()
    word_counts: Counter[str] = Counter()
    for sentence in corpus:
        for tok in sentence.tokens:
            chars.update(tok.word)
            word_counts[tok.word.lower()] += 1
    pieces: list[str] = list(SPECIAL_PIECES)
    for c in sorted(chars):
        pieces.append(c)
    for c in sorted(chars):
        pieces.append("##" + c)
    seen = set(pieces)
    words = [w for w, n in word_counts.items() if n >= min_count and w not in seen]
    words.sort(key=lambda w: (-word_counts[w], w))
    pieces.extend(words)
    return WordPieceVocab(pieces={p: i for i, p in enumerate(pieces)}, id_to_piece=pieces)


def save_wordpiece_vocab(vocab: WordPieceVocab, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(vocab.id_to_piece) + "\n")


def load_wordpiece_vocab(path) -> WordPieceVocab:
    pieces = open(path, encoding="utf-8").read().splitlines()
    if pieces[: len(SPECIAL_PIECES)] != list(SPECIAL_PIECES):
        raise TokenizerError(f"piece file {path} must start with {', '.join(SPECIAL_PIECES)}")
    return WordPieceVocab(pieces={p: i for i, p in enumerate(pieces)}, id_to_piece=pieces)


def wordpiece_tokenize(word: str, vocab: WordPieceVocab) -> list[int]:
    """Longest-match-first split; the whole word becomes [UNK] if any step fails."""
    if not word:
        raise TokenizerError("cannot tokenize an empty word")
    ids: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            if piece in vocab.pieces:
                match = vocab.pieces[piece]
                break
            end -= 1
        if match is None:
            return [vocab.unk_id]
        ids.append(match)
        start = end
    return ids


def encode_sentence(words: list[str], vocab: WordPieceVocab, maxlen: int,
                    labels: list[str] | None = None, truncate: bool = False,
                    ) -> tuple[SubwordEncoding, list[str | None] | None]:
    """Expand words to pieces with [CLS] first and [PAD] to ``maxlen``.

    Words are lower-cased before matching. When labels are given, each piece
    carries its word's label (None at special/pad positions) and the
    returned encoding marks only the first piece of each word active.
    """
    if not words:
        raise TokenizerError("cannot encode an empty sentence")
    if labels is not None and len(labels) != len(words):
        raise TokenizerError(f"{len(labels)} labels for {len(words)} words")

    ids = [vocab.cls_id]
    word_index = [-1]
    active = [False]
    piece_labels: list[str | None] = [None]
    for w, word in enumerate(words):
        for k, pid in enumerate(wordpiece_tokenize(word.lower(), vocab)):
            ids.append(pid)
            word_index.append(w)
            active.append(k == 0)
            piece_labels.append(labels[w] if labels is not None else None)

    if len(ids) > maxlen:
        if not truncate:
            raise TokenizerError(
                f"length error: {len(ids)} pieces exceed maxlen {maxlen}"
            )
        ids = ids[:maxlen]
        word_index = word_index[:maxlen]
        active = active[:maxlen]
        piece_labels = piece_labels[:maxlen]
    length = len(ids)
    while len(ids) < maxlen:
        ids.append(vocab.pad_id)
        word_index.append(-1)
        active.append(False)
        piece_labels.append(None)

    encoding = SubwordEncoding(ids=ids, word_index=word_index, active=active, length=length)
    return encoding, (piece_labels if labels is not None else None)


def recombine_predictions(encoding: SubwordEncoding, subword_tags: list[str]) -> list[str]:
    """One tag per source word: the tag at the word's first (active) piece."""
    if len(subword_tags) != len(encoding.ids):
        raise TokenizerError(
            f"alignment error: {len(subword_tags)} tags for {len(encoding.ids)} pieces"
        )
    out: list[str] = []
    for pos, is_active in enumerate(encoding.active):
        if is_active:
            out.append(subword_tags[pos])
    return out


def piece_string(vocab: WordPieceVocab, pid: int) -> str:
    return vocab.id_to_piece[pid]
