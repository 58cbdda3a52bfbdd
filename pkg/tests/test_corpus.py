"""Loading, BIO hygiene, entity mapping, vocabularies, splitting, batching."""

import numpy as np
import pytest

from tagforge import corpus as cp


def write_csv(tmp_path, rows, header="Sentence #,Word,POS,Tag", encoding="utf-8"):
    path = tmp_path / "data.csv"
    body = header + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    path.write_bytes(body.encode(encoding))
    return path


def sent(tags, words=None, pos=None, sid=0):
    words = words or [f"w{i}" for i in range(len(tags))]
    pos = pos or ["NN"] * len(tags)
    toks = tuple(cp.Token(word=w, pos=p, ner=t) for w, p, t in zip(words, pos, tags))
    return cp.Sentence(id=sid, tokens=toks)


class TestGmbLoader:
    def test_marker_forward_fill_groups_rows(self, tmp_path):
        path = write_csv(tmp_path, [
            ("Sentence: 1", "Alice", "NNP", "B-per"),
            ("", "went", "VBD", "O"),
        ])
        sentences = cp.load_gmb_csv(path)
        assert len(sentences) == 1
        assert len(sentences[0].tokens) == 2
        assert sentences[0].tokens[0].word == "Alice"
        assert sentences[0].tokens[1].ner == "O"

    def test_two_markers_five_rows(self, tmp_path):
        path = write_csv(tmp_path, [
            ("Sentence: 1", "a", "DT", "O"),
            ("", "b", "NN", "O"),
            ("", "c", "NN", "O"),
            ("Sentence: 2", "d", "NN", "O"),
            ("", "e", "NN", "O"),
        ])
        sentences = cp.load_gmb_csv(path)
        assert len(sentences) == 2
        assert sum(len(s) for s in sentences) == 5

    def test_row_count_conservation(self, tmp_path):
        rows = [("Sentence: 1", "a", "DT", "O")] + [("", f"w{i}", "NN", "O") for i in range(7)]
        rows += [("Sentence: 2", "x", "NN", "O"), ("", "y", "NN", "O")]
        path = write_csv(tmp_path, rows)
        sentences = cp.load_gmb_csv(path)
        assert sum(len(s) for s in sentences) == len(rows)

    def test_latin1_fallback(self, tmp_path):
        path = write_csv(tmp_path, [
            ("Sentence: 1", "café", "NN", "O"),
        ], encoding="latin-1")
        sentences = cp.load_gmb_csv(path)
        assert sentences[0].tokens[0].word == "café"

    def test_missing_column_schema_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("Sentence #,Word,POS\n")
        with pytest.raises(cp.CorpusError, match="tag"):
            cp.load_gmb_csv(path)

    def test_empty_file_error(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(cp.CorpusError, match="empty"):
            cp.load_gmb_csv(path)

    def test_header_only_error(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text("Sentence #,Word,POS,Tag\n")
        with pytest.raises(cp.CorpusError, match="empty"):
            cp.load_gmb_csv(path)

    def test_empty_word_names_line(self, tmp_path):
        path = write_csv(tmp_path, [
            ("Sentence: 1", "ok", "NN", "O"),
            ("", "", "NN", "O"),
        ])
        with pytest.raises(cp.CorpusError, match="line 3"):
            cp.load_gmb_csv(path)

    def test_quoted_comma_word(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text('Sentence #,Word,POS,Tag\n"Sentence: 1",",",",",O\n')
        sentences = cp.load_gmb_csv(path)
        assert sentences[0].tokens[0].word == ","


class TestConllRoundTrip:
    def test_write_then_load(self, tmp_path):
        original = [sent(["B-per", "O"], words=["Ann", "ran"], pos=["NNP", "VBD"], sid=3)]
        path = tmp_path / "snap.txt"
        cp.write_conll(original, path)
        loaded = cp.load_conll(path)
        assert loaded[0].words() == ["Ann", "ran"]
        assert loaded[0].pos_tags() == ["NNP", "VBD"]
        assert loaded[0].ner_tags() == ["B-per", "O"]


class TestBio:
    def test_orphan_i_after_o(self):
        c = [sent(["O", "I-geo"])]
        violations = cp.validate_bio(c)
        assert [(v.sentence_id, v.position) for v in violations] == [(0, 1)]
        repaired = cp.repair_bio(c)
        assert repaired[0].ner_tags() == ["O", "B-geo"]

    def test_valid_continuation(self):
        assert cp.validate_bio([sent(["B-per", "I-per"])]) == []

    def test_entity_switch(self):
        c = [sent(["B-per", "I-geo"])]
        assert len(cp.validate_bio(c)) == 1
        assert cp.repair_bio(c)[0].ner_tags() == ["B-per", "B-geo"]

    def test_repair_leaves_valid_corpus_clean(self):
        c = [sent(["O", "I-geo", "I-geo", "B-per", "I-geo"])]
        repaired = cp.repair_bio(c)
        assert cp.validate_bio(repaired) == []


class TestMapEntities:
    def test_keep_per_gpe(self):
        c = [sent(["B-per", "I-per", "O", "B-geo"])]
        mapped = cp.map_entities(c, {"PER", "GPE"})
        assert mapped[0].ner_tags() == ["PER", "PER", "O", "O"]

    def test_gpe_collapses(self):
        mapped = cp.map_entities([sent(["B-gpe"])], {"PER", "GPE"})
        assert mapped[0].ner_tags() == ["GPE"]

    def test_empty_keep_maps_everything_to_o(self):
        mapped = cp.map_entities([sent(["B-per", "O", "I-tim"])], set())
        assert mapped[0].ner_tags() == ["O", "O", "O"]

    def test_idempotent(self):
        c = [sent(["B-per", "I-per", "O", "B-geo", "B-gpe"])]
        once = cp.map_entities(c, {"PER", "GPE"})
        twice = cp.map_entities(once, {"PER", "GPE"})
        assert [s.ner_tags() for s in once] == [s.ner_tags() for s in twice]

    def test_unknown_tag_errors(self):
        with pytest.raises(cp.CorpusError, match="Bogus"):
            cp.map_entities([sent(["Bogus"])], {"PER"})


class TestVocab:
    def test_min_count_threshold(self):
        c = [sent(["O"] * 4, words=["a", "a", "a", "b"])]
        vocab = cp.build_vocab(c, min_count=2)
        assert vocab.token_to_idx[cp.PAD_TOKEN] == 0
        assert vocab.token_to_idx[cp.UNK_TOKEN] == 1
        assert vocab.token_to_idx["a"] == 2
        assert "b" not in vocab.token_to_idx
        assert vocab.encode_word("b") == vocab.unk_idx

    def test_frequency_then_lexicographic(self):
        c = [sent(["O"] * 5, words=["z", "z", "m", "a", "a"])]
        vocab = cp.build_vocab(c)
        # a and z both occur twice: lexicographic tie-break puts a first
        assert vocab.idx_to_token[2:] == ["a", "z", "m"]

    def test_all_tags_present_once(self):
        c = [sent(["B-per", "O", "B-per", "I-per"])]
        vocab = cp.build_vocab(c)
        assert sorted(vocab.tag_to_idx) == ["B-per", "I-per", "O"]
        assert len(set(vocab.tag_to_idx.values())) == 3

    def test_round_trip_inverse(self):
        c = [sent(["O"] * 3, words=["x", "y", "x"])]
        vocab = cp.build_vocab(c)
        for w, i in vocab.token_to_idx.items():
            assert vocab.idx_to_token[i] == w

    def test_save_load(self, tmp_path):
        c = [sent(["B-per", "O"], words=["Ann", "ran"])]
        vocab = cp.build_vocab(c)
        cp.save_vocab(vocab, tmp_path / "vocab.txt", tmp_path / "tags.txt")
        loaded = cp.load_vocab(tmp_path / "vocab.txt", tmp_path / "tags.txt")
        assert loaded.token_to_idx == vocab.token_to_idx
        assert loaded.idx_to_tag == vocab.idx_to_tag


class TestSplit:
    def corpus(self, n):
        return [sent(["O", "O"], sid=i) for i in range(n)]

    def test_ratio_sizes(self):
        train, valid = cp.split(self.corpus(10), 0.8, seed=1)
        assert len(train) == 8 and len(valid) == 2

    def test_deterministic(self):
        c = self.corpus(20)
        a = cp.split(c, 0.8, seed=7)
        b = cp.split(c, 0.8, seed=7)
        assert [s.id for s in a[0]] == [s.id for s in b[0]]
        assert [s.id for s in a[1]] == [s.id for s in b[1]]

    def test_union_is_input_multiset(self):
        c = self.corpus(13)
        train, valid = cp.split(c, 0.6, seed=3)
        assert sorted(s.id for s in train + valid) == list(range(13))

    def test_tiny_corpus_errors(self):
        with pytest.raises(cp.CorpusError):
            cp.split(self.corpus(1), 0.8, seed=0)


class TestPadBatch:
    def test_padding_positions(self):
        c = [sent(["O"] * 3), sent(["O"] * 5, sid=1)]
        vocab = cp.build_vocab(c)
        batch = cp.pad_batch(c, vocab, maxlen=5)
        assert batch.input_ids.shape == (2, 5)
        np.testing.assert_array_equal(batch.input_ids[0, 3:], vocab.pad_idx)
        np.testing.assert_array_equal(batch.label_ids[0, 3:], -1)
        assert list(batch.lengths) == [3, 5]

    def test_no_padding_when_exact(self):
        c = [sent(["O"] * 4), sent(["O"] * 4, sid=1)]
        vocab = cp.build_vocab(c)
        batch = cp.pad_batch(c, vocab, maxlen=4)
        assert (batch.label_ids >= 0).all()

    def test_masks_complementary(self):
        c = [sent(["O"] * 2), sent(["O"] * 6, sid=1)]
        vocab = cp.build_vocab(c)
        batch = cp.pad_batch(c, vocab, maxlen=6)
        for i, n in enumerate(batch.lengths):
            for p in range(6):
                is_pad_input = batch.input_ids[i, p] == vocab.pad_idx
                is_pad_label = batch.label_ids[i, p] == -1
                beyond = p >= n
                # words may legitimately map to pad only if vocab assigns them there; it never does
                assert is_pad_label == beyond
                assert is_pad_input == beyond

    def test_too_long_without_truncation(self):
        c = [sent(["O"] * 7, sid=42)]
        vocab = cp.build_vocab(c)
        with pytest.raises(cp.CorpusError, match="42"):
            cp.pad_batch(c, vocab, maxlen=5)
        batch = cp.pad_batch(c, vocab, maxlen=5, truncate=True)
        assert batch.lengths[0] == 5
