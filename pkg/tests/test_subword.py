"""Subword vocabulary, greedy tokenization, and first-subtoken alignment."""

from __future__ import annotations

import pytest

from traffictag.corpus import Corpus, CorpusError, GeneratorConfig, Tweet, generate_synthetic
from traffictag.subword import (
    CLS,
    SEP,
    SPECIALS,
    UNK,
    SubwordVocab,
    align,
    build_vocab,
    encode,
    tokenize,
)


def tiny_corpus(*token_lists):
    tweets = tuple(
        Tweet(f"t{i}", " ".join(toks), tuple(toks), "non_traffic")
        for i, toks in enumerate(token_lists)
    )
    return Corpus("tiny", tweets)


def vocab_from_pieces(*pieces):
    return SubwordVocab(SPECIALS + tuple(pieces))


class TestBuildVocab:
    def test_frequent_pieces_kept(self):
        corpus = tiny_corpus(["file", "filevorming"] * 5)
        vocab = build_vocab(corpus, max_size=200)
        assert "file" in vocab.pieces
        assert "##vorming" in vocab.pieces

    def test_max_size_below_char_inventory(self):
        corpus = tiny_corpus(["abcdefgh"])
        with pytest.raises(CorpusError):
            build_vocab(corpus, max_size=10)

    def test_deterministic(self):
        corpus = generate_synthetic(GeneratorConfig(size=60), seed=4)
        assert build_vocab(corpus, 300).pieces == build_vocab(corpus, 300).pieces

    def test_every_char_in_both_forms(self):
        corpus = tiny_corpus(["file", "e40"])
        vocab = build_vocab(corpus, max_size=100)
        for ch in "file40":
            assert ch in vocab.pieces
            assert f"##{ch}" in vocab.pieces


class TestTokenize:
    def test_greedy_longest_match(self):
        vocab = vocab_from_pieces(
            "traf", "##fic", *"traffic", *(f"##{c}" for c in "traffic")
        )
        assert tokenize("traffic", vocab) == ["traf", "##fic"]

    def test_whole_token_single_piece(self):
        vocab = vocab_from_pieces("file", *"file", *(f"##{c}" for c in "file"))
        assert tokenize("file", vocab) == ["file"]

    def test_unknown_character(self):
        vocab = vocab_from_pieces(*"abc", *(f"##{c}" for c in "abc"))
        assert tokenize("axz", vocab) == [UNK]

    def test_char_fallback(self):
        vocab = vocab_from_pieces(*"abc", *(f"##{c}" for c in "abc"))
        assert tokenize("cab", vocab) == ["c", "##a", "##b"]

    def test_empty_token_rejected(self):
        with pytest.raises(CorpusError):
            tokenize("", vocab_from_pieces("a", "##a"))


class TestAlign:
    def test_unsplit_tokens(self):
        vocab = vocab_from_pieces(
            "file", "op", "e40", *"filope40", *(f"##{c}" for c in "filope40")
        )
        subtokens, first = align(["file", "op", "e40"], vocab)
        assert subtokens == [CLS, "file", "op", "e40", SEP]
        assert first == [1, 2, 3]

    def test_split_token_alignment(self):
        vocab = vocab_from_pieces(
            "traf", "##fic", "jam",
            *"traficjam", *(f"##{c}" for c in "traficjam"),
        )
        subtokens, first = align(["traffic", "jam"], vocab)
        assert subtokens == [CLS, "traf", "##fic", "jam", SEP]
        assert first == [1, 3]

    def test_empty_tokens_rejected(self):
        with pytest.raises(CorpusError):
            align([], vocab_from_pieces("a", "##a"))

    def test_alignment_properties_on_corpus(self):
        corpus = generate_synthetic(GeneratorConfig(size=80), seed=6)
        vocab = build_vocab(corpus, 250)
        for tweet in corpus:
            subtokens, first = align(tweet.tokens, vocab)
            assert len(first) == len(tweet.tokens)
            assert all(a < b for a, b in zip(first, first[1:]))
            assert 1 <= first[0] and first[-1] < len(subtokens) - 1

    def test_detokenization_property(self):
        corpus = generate_synthetic(GeneratorConfig(size=80), seed=8)
        vocab = build_vocab(corpus, 400)
        for tweet in corpus:
            for token in tweet.tokens:
                pieces = tokenize(token, vocab)
                if UNK in pieces:
                    continue
                assert "".join(p.removeprefix("##") for p in pieces) == token


class TestSerialization:
    def test_save_load_round_trip(self, tmp_path):
        corpus = generate_synthetic(GeneratorConfig(size=40), seed=3)
        vocab = build_vocab(corpus, 300)
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        assert SubwordVocab.load(path).pieces == vocab.pieces
        assert path.read_text(encoding="utf-8").startswith("[PAD]\n[UNK]\n[CLS]\n[SEP]\n")

    def test_encode_maps_unknown_to_unk_id(self):
        vocab = vocab_from_pieces(*"ab", *(f"##{c}" for c in "ab"))
        ids, first = encode(["ab", "zz"], vocab)
        assert ids[first[1]] == vocab.piece_id(UNK)
