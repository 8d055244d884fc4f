import numpy as np
import pytest

from src.detectors.semantic import cosine
from src.models.errors import ParameterError
from src.providers.builtin import (
    BuiltinEmbeddingProvider,
    builtin_embed,
    char_ngrams,
    fnv1a_64,
    normalize_text,
)


def test_fnv1a_known_values():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C


def test_normalize_collapses_whitespace_and_case():
    assert normalize_text("Stock\tAgent \n CALL") == "stock agent call"
    # edge whitespace collapses but stays part of the text
    assert normalize_text("  Stock\tAgent \n CALL ") == " stock agent call "


def test_edge_whitespace_contributes_grams():
    padded = builtin_embed("  price of aapl")
    assert not np.array_equal(padded.values, builtin_embed("price of aapl").values)
    assert np.array_equal(padded.values, builtin_embed(" PRICE of AAPL").values)


def test_char_ngrams_short_text_is_one_gram():
    assert char_ngrams("") == []
    assert char_ngrams("ab") == ["ab"]
    assert char_ngrams("abcd") == ["abc", "bcd"]


def test_embedding_is_unit_length_and_deterministic():
    first = builtin_embed("AAPL closed at 189.20")
    second = builtin_embed("AAPL closed at 189.20")

    assert first.dimension == 256
    assert np.linalg.norm(first.values) == pytest.approx(1.0)
    assert np.array_equal(first.values, second.values)


def test_case_and_spacing_do_not_change_the_vector():
    assert cosine(builtin_embed("Price  of AAPL"), builtin_embed("price of aapl")) == pytest.approx(1.0)


def test_blank_text_is_zero_vector():
    assert builtin_embed("").is_zero
    assert builtin_embed("   ").is_zero
    assert builtin_embed(" \t\n").is_zero


def test_related_texts_score_higher_than_unrelated():
    base = builtin_embed("stock agent fetched the AAPL price")
    near = builtin_embed("stock agent fetched the AAPL price again")
    far = builtin_embed("quarterly inventory write-downs hit margins")
    assert cosine(base, near) > cosine(base, far)


def test_dimension_bounds():
    assert builtin_embed("text", 16).dimension == 16
    with pytest.raises(ParameterError):
        builtin_embed("text", 8)
    with pytest.raises(ParameterError):
        BuiltinEmbeddingProvider(dimension=4)


def test_provider_embeds_in_order(builtin_provider):
    vectors = builtin_provider.embed_many(["one", "two", "one"])
    assert len(vectors) == 3
    assert np.array_equal(vectors[0].values, vectors[2].values)
    assert np.array_equal(builtin_provider.embed("two").values, vectors[1].values)
    assert builtin_provider.describe() == {"provider": "builtin", "dimension": 256}
