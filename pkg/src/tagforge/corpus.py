"""Dataset ingestion, tag-scheme hygiene, vocabularies, splitting and batching.

Loads the Kaggle/GMB four-column CSV (sentence marker, word, POS, tag) and
CoNLL-style files, validates/repairs BIO tags, optionally collapses BIO tags
to entity labels, and turns sentences into padded integer batches.
"""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_IDX = 0
UNK_IDX = 1
IGNORE_LABEL = -1


class CorpusError(ValueError):
    """Malformed input data or an unusable corpus operation."""


@dataclass(frozen=True)
class Token:
    word: str
    pos: str
    ner: str


@dataclass(frozen=True)
class Sentence:
    id: int
    tokens: tuple[Token, ...]

    def words(self) -> list[str]:
        return [t.word for t in self.tokens]

    def pos_tags(self) -> list[str]:
        return [t.pos for t in self.tokens]

    def ner_tags(self) -> list[str]:
        return [t.ner for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


Corpus = list[Sentence]


@dataclass
class Vocab:
    token_to_idx: dict[str, int]
    idx_to_token: list[str]
    tag_to_idx: dict[str, int]
    idx_to_tag: list[str]
    pad_idx: int = PAD_IDX
    unk_idx: int = UNK_IDX

    def encode_word(self, word: str) -> int:
        return self.token_to_idx.get(word, self.unk_idx)

    def encode_tag(self, tag: str) -> int:
        try:
            return self.tag_to_idx[tag]
        except KeyError:
            raise CorpusError(f"unknown tag {tag!r}") from None

    @property
    def num_words(self) -> int:
        return len(self.idx_to_token)

    @property
    def num_tags(self) -> int:
        return len(self.idx_to_tag)


@dataclass
class Batch:
    input_ids: np.ndarray  # [batch, maxlen] int64, pad_idx beyond length
    label_ids: np.ndarray  # [batch, maxlen] int64, -1 beyond length
    lengths: np.ndarray    # [batch] true lengths


_HEADER_COLUMNS = ("sentence marker", "word", "POS", "tag")


def _read_text(path) -> str:
    raw = open(path, "rb").read()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        # the published Kaggle file is Latin-1 encoded
        return raw.decode("latin-1")


def load_gmb_csv(path) -> Corpus:
    """Read the four-column CSV, grouping rows into sentences.

    The sentence marker appears only on each sentence's first row and is
    forward-filled. Tries UTF-8 first and falls back to Latin-1.
    """
    text = _read_text(path)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError(f"empty corpus: {path} has no rows") from None
    if len(header) < 4:
        missing = _HEADER_COLUMNS[len(header)]
        raise CorpusError(f"schema error: missing column {missing!r} in header {header}")

    sentences: Corpus = []
    current: list[Token] = []
    current_id = -1
    next_id = 0
    saw_data = False
    for row in reader:
        lineno = reader.line_num
        if not row or all(cell == "" for cell in row):
            continue
        saw_data = True
        if len(row) < 4:
            raise CorpusError(f"malformed row at line {lineno}: expected 4 columns, got {row}")
        marker, word, pos, tag = row[0], row[1], row[2], row[3]
        if marker.strip():
            if current:
                sentences.append(Sentence(id=current_id, tokens=tuple(current)))
                current = []
            digits = re.search(r"\d+", marker)
            current_id = int(digits.group()) if digits else next_id
            next_id = max(next_id, current_id) + 1
        elif current_id < 0:
            raise CorpusError(f"malformed row at line {lineno}: first data row has no sentence marker")
        if word == "":
            raise CorpusError(f"malformed row at line {lineno}: empty word")
        current.append(Token(word=word, pos=pos, ner=tag))
    if current:
        sentences.append(Sentence(id=current_id, tokens=tuple(current)))
    if not saw_data or not sentences:
        raise CorpusError(f"empty corpus: {path} contains no sentences")
    return sentences


def load_conll(path) -> Corpus:
    """Read 'word POS tag' lines, blank line between sentences."""
    text = _read_text(path)
    sentences: Corpus = []
    current: list[Token] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip()
        if not line:
            if current:
                sentences.append(Sentence(id=len(sentences), tokens=tuple(current)))
                current = []
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CorpusError(f"malformed row at line {lineno}: expected 'word POS tag', got {line!r}")
        current.append(Token(word=parts[0], pos=parts[1], ner=parts[2]))
    if current:
        sentences.append(Sentence(id=len(sentences), tokens=tuple(current)))
    if not sentences:
        raise CorpusError(f"empty corpus: {path} contains no sentences")
    return sentences


def write_conll(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sentence in corpus:
            for tok in sentence.tokens:
                fh.write(f"{tok.word} {tok.pos} {tok.ner}\n")
            fh.write("\n")


@dataclass(frozen=True)
class BioViolation:
    sentence_id: int
    position: int
    reason: str


def _bio_parts(tag: str) -> tuple[str, str] | None:
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return tag[0], tag[2:]
    return None


def validate_bio(corpus: Corpus) -> list[BioViolation]:
    """Report every I-tag that does not continue a same-entity B/I tag."""
    violations = []
    for sentence in corpus:
        prev_entity = None
        for pos, tok in enumerate(sentence.tokens):
            parts = _bio_parts(tok.ner)
            if parts is None:
                prev_entity = None
                continue
            prefix, entity = parts
            if prefix == "I" and prev_entity != entity:
                if prev_entity is None:
                    reason = f"I-{entity} follows no entity"
                else:
                    reason = f"I-{entity} follows {prev_entity}"
                violations.append(BioViolation(sentence.id, pos, reason))
            prev_entity = entity
    return violations


def repair_bio(corpus: Corpus) -> Corpus:
    """Rewrite each dangling I-tag to the corresponding B-tag."""
    repaired: Corpus = []
    for sentence in corpus:
        prev_entity = None
        tokens = []
        for tok in sentence.tokens:
            parts = _bio_parts(tok.ner)
            if parts is None:
                prev_entity = None
                tokens.append(tok)
                continue
            prefix, entity = parts
            if prefix == "I" and prev_entity != entity:
                tok = Token(word=tok.word, pos=tok.pos, ner=f"B-{entity}")
            prev_entity = entity
            tokens.append(tok)
        repaired.append(Sentence(id=sentence.id, tokens=tuple(tokens)))
    return repaired


def map_entities(corpus: Corpus, keep: set[str]) -> Corpus:
    """Collapse B-x/I-x to the entity name X, dropping entities outside ``keep``.

    Already-collapsed labels pass through, which makes the operation
    idempotent. Tags that are neither O, BIO, nor a known collapsed label
    raise a mapping error.
    """
    keep = {k.upper() for k in keep}
    mapped: Corpus = []
    for sentence in corpus:
        tokens = []
        for tok in sentence.tokens:
            tag = tok.ner
            if tag == "O":
                new = "O"
            else:
                parts = _bio_parts(tag)
                if parts is not None:
                    entity = parts[1].upper()
                elif tag.isupper() and tag.isalpha():
                    entity = tag
                else:
                    raise CorpusError(f"mapping error: unrecognized tag {tag!r}")
                new = entity if entity in keep else "O"
            tokens.append(Token(word=tok.word, pos=tok.pos, ner=new))
        mapped.append(Sentence(id=sentence.id, tokens=tuple(tokens)))
    return mapped


def build_vocab(corpus: Corpus, min_count: int = 1) -> Vocab:
    """Index words by descending frequency (lexicographic ties) and tags sorted.

    PAD and UNK occupy indices 0 and 1; words under ``min_count`` fall back
    to UNK.
    """
    if not corpus:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    word_counts: Counter[str] = Counter()
    tags: set[str] = set()
    for sentence in corpus:
        for tok in sentence.tokens:
            word_counts[tok.word] += 1
            tags.add(tok.ner)
    kept = [w for w, c in word_counts.items() if c >= min_count]
    kept.sort(key=lambda w: (-word_counts[w], w))
    idx_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    token_to_idx = {w: i for i, w in enumerate(idx_to_token)}
    idx_to_tag = sorted(tags)
    tag_to_idx = {t: i for i, t in enumerate(idx_to_tag)}
    return Vocab(token_to_idx=token_to_idx, idx_to_token=idx_to_token,
                 tag_to_idx=tag_to_idx, idx_to_tag=idx_to_tag)


def split(corpus: Corpus, ratio: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic shuffled split; train gets floor(ratio * N) sentences."""
    if not 0.0 < ratio < 1.0:
        raise CorpusError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(corpus)
    if n < 2:
        raise CorpusError(f"cannot split a corpus of {n} sentence(s)")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(ratio * n)
    train = [corpus[i] for i in order[:cut]]
    valid = [corpus[i] for i in order[cut:]]
    return train, valid


def pad_batch(sentences: list[Sentence], vocab: Vocab, maxlen: int,
              truncate: bool = False) -> Batch:
    """Pad word/tag ids to ``maxlen``; inputs with pad_idx, labels with -1."""
    batch = len(sentences)
    input_ids = np.full((batch, maxlen), vocab.pad_idx, dtype=np.int64)
    label_ids = np.full((batch, maxlen), IGNORE_LABEL, dtype=np.int64)
    lengths = np.zeros(batch, dtype=np.int64)
    for i, sentence in enumerate(sentences):
        n = len(sentence.tokens)
        if n > maxlen:
            if not truncate:
                raise CorpusError(
                    f"length error: sentence {sentence.id} has {n} tokens, maxlen is {maxlen}"
                )
            n = maxlen
        lengths[i] = n
        for j, tok in enumerate(sentence.tokens[:n]):
            input_ids[i, j] = vocab.encode_word(tok.word)
            label_ids[i, j] = vocab.encode_tag(tok.ner)
    return Batch(input_ids=input_ids, label_ids=label_ids, lengths=lengths)


def label_histogram(corpus: Corpus) -> dict[str, int]:
    counts: Counter[str] = Counter()
    for sentence in corpus:
        for tok in sentence.tokens:
            counts[tok.ner] += 1
    return dict(sorted(counts.items()))


def save_vocab(vocab: Vocab, words_path, tags_path) -> None:
    """One token per line, line number = id, for words and tags separately."""
    with open(words_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(vocab.idx_to_token) + "\n")
    with open(tags_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(vocab.idx_to_tag) + "\n")


def load_vocab(words_path, tags_path) -> Vocab:
    words = open(words_path, encoding="utf-8").read().splitlines()
    tags = open(tags_path, encoding="utf-8").read().splitlines()
    if not words or words[0] != PAD_TOKEN or len(words) < 2 or words[1] != UNK_TOKEN:
        raise CorpusError(f"vocab file {words_path} does not start with {PAD_TOKEN}, {UNK_TOKEN}")
    return Vocab(
        token_to_idx={w: i for i, w in enumerate(words)},
        idx_to_token=words,
        tag_to_idx={t: i for i, t in enumerate(tags)},
        idx_to_tag=tags,
    )
