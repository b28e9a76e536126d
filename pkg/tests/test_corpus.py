import json

import numpy as np
import pytest

from tntopic.corpus import (OOV, Corpus, CorpusError, EdgeList, Tweet, generate_synthetic,
                            load_corpus, load_edges, planted_spec, save_corpus, save_edges,
                            split_train_test)


def write_jsonl(path, recs):
    with open(path, "w") as fh:
        for r in recs:
            fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")


def rec(i, author, words, tags):
    return {"id": i, "author": author, "text-tokens": words, "hashtags": tags}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "c.jsonl"
    write_jsonl(p, [rec("1", "a", ["Hello", "world"], ["#World"]),
                    rec("2", "a", ["hello", "rare"], []),
                    rec("3", "b", ["world"], ["#fun"]),
                    rec("4", "c", ["solo"], [])])
    return p


def test_load_shares_vocabulary_between_words_and_tags(small):
    c = load_corpus(small, min_author_tweets=1)
    assert c.vocab == sorted(c.vocab)
    w = c.word_index
    d0 = c.documents[0]
    assert d0.hashtags == [w["world"]]
    assert w["world"] in d0.words
    assert c.n_authors == 3 and len(c) == 4


def test_author_and_token_filters(small):
    c = load_corpus(small, min_author_tweets=2, min_token_count=2)
    assert c.authors == ["a"]
    assert c.vocab[0] == OOV
    assert "rare" not in c.vocab
    assert c.documents[1].words[1] == 0


def test_malformed_records(tmp_path):
    p = tmp_path / "m.jsonl"
    good = [rec(str(i), "a", ["x"], []) for i in range(200)]
    write_jsonl(p, good + ["{broken"])
    assert len(load_corpus(p, 1)) == 200
    write_jsonl(p, good[:10] + ["{broken", '{"id": 1}'])
    with pytest.raises(CorpusError, match="malformed"):
        load_corpus(p, 1)


def test_empty_after_filtering(small):
    with pytest.raises(CorpusError):
        load_corpus(small, min_author_tweets=100)


def test_test_side_uses_training_tables(small, tmp_path):
    train = load_corpus(small, 1)
    p = tmp_path / "t.jsonl"
    write_jsonl(p, [rec("9", "a", ["hello", "unseen"], []), rec("8", "zz", ["hello"], [])])
    t = load_corpus(p, 0, vocab=train.vocab, authors=train.authors)
    assert t.vocab == train.vocab and len(t) == 1
    assert t.documents[0].words == [train.word_index["hello"]]


def test_save_load_round_trip(small, tmp_path):
    c = load_corpus(small, 1)
    out = tmp_path / "o.jsonl"
    save_corpus(c, out)
    assert load_corpus(out, 1) == c


def test_corpus_validates_indices():
    with pytest.raises(CorpusError):
        Corpus([Tweet("x", 0, [5], [])], ["a"], ["w"])


def test_edges(small, tmp_path):
    c = load_corpus(small, 1)
    p = tmp_path / "e.csv"
    p.write_text("b,a\na,b\na,ghost\nc,c\n")
    e = load_edges(p, c)
    assert e.as_set() == {(0, 1)}
    save_edges(e, c, tmp_path / "e2.csv")
    assert load_edges(tmp_path / "e2.csv", c).as_set() == {(0, 1)}
    with pytest.raises(CorpusError):
        EdgeList(np.array([[1, 1]]))
    p.write_text("a;b\n")
    with pytest.raises(CorpusError):
        load_edges(p, c)


def test_split_is_seeded_and_keeps_authors():
    rng = np.random.default_rng(0)
    corpus, _, _ = generate_synthetic(6, 4, 3, 1, 2, 10, rng)
    tr1, te1 = split_train_test(corpus, 0.75, seed=3)
    tr2, te2 = split_train_test(corpus, 0.75, seed=3)
    assert tr1 == tr2 and te1 == te2
    assert len(tr1) + len(te1) == len(corpus)
    assert set(tr1.doc_author) == set(range(6))
    ids = {d.id for d in tr1.documents} & {d.id for d in te1.documents}
    assert not ids
    with pytest.raises(ValueError):
        split_train_test(corpus, 1.0)


def test_synthetic_generation():
    rng = np.random.default_rng(1)
    corpus, edges, truth = generate_synthetic(12, 3, 5, 2, 3, 30, rng, spec=planted_spec())
    assert len(corpus) == 36 and corpus.vocab_size == 30
    assert all(len(d.words) == 5 and len(d.hashtags) == 2 for d in corpus.documents)
    assert truth.doc_labels.shape == (36,) and truth.communities.shape == (12,)
    same = truth.communities[edges.pairs[:, 0]] == truth.communities[edges.pairs[:, 1]]
    assert same.mean() > 0.5
    with pytest.raises(ValueError):
        generate_synthetic(0)


def test_planted_spec_groups():
    spec = planted_spec()
    assert spec.node("mu0").group == "global" and spec.node("nu").group == "author"
    w = {(e.child, e.parent): e.weight for e in spec.edges}
    assert w[("theta_p", "nu")] == 10.0
