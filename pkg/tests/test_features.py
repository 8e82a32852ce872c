import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptmcat.errors import EmptyCorpus
from ptmcat.features import (
    DocVector,
    FeatureSpace,
    add_ngrams,
    fit,
    preprocess,
    stopwords,
    transform,
    transform_all,
)

CARD_500 = (
    "# DistilRoBERTa-base fine-tuned for NER\n\n"
    "This model is a **fine-tuned** version of distilroberta-base on the CoNLL-2003 "
    "dataset. It achieves F1=0.93 (micro) & accuracy of 98.7% on the eval split; "
    "see the results. Training used 3 epochs, lr 5e-5, batch_size 32, and AdamW!\n"
    "- Intended uses: token-classification, entity tagging, PII redaction.\n"
    "- Limitations: it wasn't trained on tweets or code (e.g. Python/Java)."
    " A_B underscores_split tokens; x y z single letters vanish. Model v2.1.0 "
    "> quoted block | table | cell |"
)


def _reference_tokens(text):
    """Walk the text one character at a time, emitting alphanumeric runs."""
    stop = stopwords()
    out, cur = [], []
    for ch in text.lower() + " ":
        if ch.isalnum():
            cur.append(ch)
            continue
        if cur:
            tok = "".join(cur)
            if len(tok) >= 2 and tok not in stop:
                out.append(tok)
            cur = []
    return out


def test_stopwords_snapshot():
    sw = stopwords()
    assert 300 <= len(sw) <= 330
    assert {"the", "and", "of", "is"} <= sw


def test_examples():
    assert preprocess("The BERT Model!") == ["bert", "model"]
    assert preprocess("---\nlicense: mit\n---\nbody text here") == preprocess("body text here")
    assert preprocess("---\nlicense: mit\n---\nbody text here") == ["body", "text"]
    assert preprocess("") == [] and preprocess(None) == []


def test_code_fences_and_urls_removed():
    text = "Intro words\n```python\nimport torch\nmodel = load()\n```\nSee https://hf.co/x?y=1 tail"
    assert preprocess(text) == ["intro", "words", "tail"]


def test_500_char_card_matches_reference_tokenizer():
    assert 450 <= len(CARD_500) <= 550
    assert preprocess(CARD_500) == _reference_tokens(CARD_500)


def test_token_invariants_on_card():
    sw = stopwords()
    for tok in preprocess(CARD_500):
        assert len(tok) >= 2 and tok.isalnum() and tok == tok.lower() and tok not in sw


def test_stemming_flag():
    plain = preprocess("running models trained")
    stemmed = preprocess("running models trained", stem=True)
    assert plain == ["running", "models", "trained"]
    assert stemmed == ["run", "model", "train"]


def test_ngrams():
    assert add_ngrams(["a1", "b1", "c1"], 2) == ["a1", "b1", "c1", "a1 b1", "b1 c1"]
    assert add_ngrams(["a1"], 3) == ["a1"]


def test_idf_examples():
    docs = [["common", "rare"], ["common"], ["common"]]
    space = fit(docs, min_df=1)
    assert space.idf[space.vocabulary["common"]] == 1.0
    assert space.idf[space.vocabulary["rare"]] == pytest.approx(math.log(2) + 1, abs=1e-12)
    assert space.idf[space.vocabulary["rare"]] == pytest.approx(1.6931, abs=1e-4)
    assert "rare" not in fit(docs, min_df=2).vocabulary


def test_fit_empty():
    with pytest.raises(EmptyCorpus):
        fit([])


def test_first_seen_order():
    space = fit([["zeta", "alpha"], ["alpha", "zeta", "mid"], ["mid"]])
    assert space.terms == ("zeta", "alpha", "mid")


def test_transform_examples():
    space = fit([["aa", "bb"], ["aa", "bb", "cc"], ["cc", "aa"]], min_df=1)
    one = transform(space, ["bb"])
    assert one.indices == (space.vocabulary["bb"],) and one.weights == (1.0,)
    assert transform(space, ["zz", "yy"]) == DocVector()


def test_two_token_hand_evaluation():
    # N=3: df(aa)=3 -> idf 1.0; df(bb)=2 -> idf ln(4/3)+1
    space = fit([["aa", "bb"], ["aa", "bb"], ["aa"]], min_df=1)
    vec = transform(space, ["aa", "aa", "aa", "bb", "oov"])
    raw_aa = (1 + math.log(3)) * 1.0
    raw_bb = 1.0 * (math.log(4 / 3) + 1)
    norm = math.sqrt(raw_aa**2 + raw_bb**2)
    assert vec.indices == (0, 1)
    assert vec.weights[0] == pytest.approx(raw_aa / norm, abs=1e-12)
    assert vec.weights[1] == pytest.approx(raw_bb / norm, abs=1e-12)


def test_matches_sklearn_tfidf():
    sk = pytest.importorskip("sklearn.feature_extraction.text")
    from _corpus import noisy_corpus

    docs = [preprocess(r.card_data) for r in noisy_corpus(n_docs=80, seed=5)]
    space = fit(docs, min_df=2)
    vec = sk.TfidfVectorizer(analyzer=lambda d: d, min_df=2, sublinear_tf=True, smooth_idf=True, norm="l2")
    ref = vec.fit_transform(docs).toarray()
    assert set(vec.vocabulary_) == set(space.vocabulary)
    perm = [vec.vocabulary_[t] for t in space.terms]
    np.testing.assert_allclose(np.array(space.idf), vec.idf_[perm], atol=1e-12)
    ours = np.zeros((len(docs), len(space)))
    for r, dv in enumerate(transform_all(space, docs)):
        for i, w in dv.items():
            ours[r, i] = w
    np.testing.assert_allclose(ours, ref[:, perm], atol=1e-12)


def test_transform_does_not_mutate_space():
    space = fit([["aa", "bb"], ["aa", "bb"]])
    before = space.to_dict()
    transform(space, ["aa", "new", "new"])
    assert space.to_dict() == before


def test_space_round_trip(tmp_path):
    space = fit([["aa", "bb", "cc"], ["bb", "cc"], ["cc", "aa"]])
    space.save(tmp_path / "fs.json")
    back = FeatureSpace.load(tmp_path / "fs.json")
    assert back == space and back.terms == space.terms


def test_space_validation():
    with pytest.raises(ValueError):
        FeatureSpace({"a": 0, "b": 2}, (1.0, 1.0), 2)
    with pytest.raises(ValueError):
        FeatureSpace({"a": 0}, (1.0, 1.0), 2)


_words = st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta", "omega", "kappa", "zz"]), max_size=15)


@settings(max_examples=200, deadline=None)
@given(st.lists(_words, min_size=1, max_size=12), _words)
def test_vector_invariants(docs, query):
    space = fit(docs, min_df=1)
    assert sorted(space.vocabulary.values()) == list(range(len(space)))
    assert all(v > 0 for v in space.idf)
    vec = transform(space, query)
    assert list(vec.indices) == sorted(set(vec.indices))
    assert all(w > 0 for w in vec.weights)
    if any(t in space.vocabulary for t in query):
        assert abs(vec.norm() - 1) < 1e-9
    else:
        assert len(vec) == 0


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_preprocess_idempotent(text):
    tokens = preprocess(text)
    assert preprocess(text) == tokens
    assert preprocess(" ".join(tokens)) == tokens
