import math

import numpy as np
import pytest
from sklearn.metrics import normalized_mutual_info_score, roc_auc_score

from tntopic.corpus import generate_synthetic, planted_spec
from tntopic.engine import Schedule, build_chain, run
from tntopic.evaluation import (EvalReport, UnsupportedOperation, author_topics,
                                bernoulli_baseline_ll, cluster_metrics, format_labels,
                                format_table1, format_table4, heldout_network_ll, label_topics,
                                link_auc, perplexity, pmi_coherence, recommend_authors,
                                table1_csv, table4, table4_csv, top_words)
from tntopic.gp import GpState, PairSet, all_pairs
from tntopic.sampler import Document, TopicModel
from tntopic.tn import TnConfig, build_tn_graph


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(0)
    corpus, edges, truth = generate_synthetic(12, 4, 5, 2, 2, 25, rng, spec=planted_spec())
    allp = all_pairs(12)
    link = edges.as_set()
    x = np.array([1 if tuple(p) in link else 0 for p in allp.tolist()])
    st = build_chain(build_tn_graph(TnConfig()), corpus.documents, 12, 25, 0, PairSet(allp, x))
    run(st, Schedule(total_iterations=12, text_only_burnin=6))
    return st, corpus


def test_cluster_metrics_against_sklearn():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.integers(4, size=30)
        b = rng.integers(3, size=30)
        _, nmi = cluster_metrics(a, b)
        assert nmi == pytest.approx(normalized_mutual_info_score(b, a), abs=1e-12)
    assert cluster_metrics([0, 0, 1, 1], [5, 5, 7, 7]) == (1.0, 1.0)
    assert cluster_metrics([0, 0, 0], [1, 1, 1]) == (1.0, 1.0)
    pur, _ = cluster_metrics([0, 0, 0, 0], [1, 1, 2, 2])
    assert pur == 0.5
    with pytest.raises(ValueError):
        cluster_metrics([0], [0, 1])


def test_link_auc_against_sklearn():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = rng.normal(size=40).round(1)
        y = rng.integers(2, size=40)
        assert link_auc(s, y) == pytest.approx(roc_auc_score(y, s), abs=1e-12)
    with pytest.raises(ValueError):
        link_auc([0.1, 0.2], [1, 1])


def test_pmi_hand_computed():
    docs = [[0, 1], [0, 1], [0, 2], [3]]
    # P(0)=3/4, P(1)=2/4, P(0,1)=2/4
    expect = math.log((2 + 0.01) / 4) - math.log(3 / 4) - math.log(2 / 4)
    assert pmi_coherence([[0, 1]], docs) == pytest.approx(expect, abs=1e-12)
    assert math.isnan(pmi_coherence([[0]], docs))


def test_bernoulli_baseline():
    assert bernoulli_baseline_ll([1, 0], [1, 1, 0]) == pytest.approx(3 * math.log(0.5))


def test_uniform_model_perplexity_is_vocab_size():
    V = 37
    m = TopicModel(build_tn_graph(TnConfig()), [], 2, V, np.random.default_rng(0))
    docs = [Document(0, [1, 2, 3, 4], [5]), Document(1, [6, 7], [])]
    res = perplexity(m, docs, fold_in_sweeps=5, rng=np.random.default_rng(0), detail=True)
    assert res.perplexity == pytest.approx(V, abs=1e-9)
    assert res.n_tokens == 3


def test_perplexity_of_trained_model(trained):
    st, corpus = trained
    docs = corpus.documents[:6]
    res = perplexity(st.model, docs, fold_in_sweeps=6, rng=np.random.default_rng(1), detail=True)
    assert 1.0 < res.perplexity < corpus.vocab_size
    assert res.n_tokens == sum(len(d.words) - math.ceil(len(d.words) / 2) for d in docs)
    before = st.model.state_arrays()["z"].copy()
    perplexity(st.model, docs, fold_in_sweeps=2, rng=np.random.default_rng(1))
    assert np.array_equal(before, st.model.state_arrays()["z"])
    with pytest.raises(ValueError):
        perplexity(st.model, [])


def test_network_ll_zero_function():
    gp = GpState(PairSet(all_pairs(3), [1, 0, 1]))
    gp.refresh(np.eye(3) + 0.1)
    assert heldout_network_ll(gp, all_pairs(3), [1, 0, 0]) == pytest.approx(3 * math.log(0.5),
                                                                              abs=1e-15)


def test_labels_and_author_topics(trained):
    st, corpus = trained
    labels = label_topics(st.model, 3, 5, corpus.vocab)
    assert len(labels) == st.model.num_topics()
    for lb in labels:
        assert len(lb.tags) <= 3 and len(lb.words) == 5
    assert "#" in format_labels(labels)
    summary = author_topics(st.model, 0, labels)
    assert sum(w for _, w, _ in summary) == pytest.approx(1.0)
    with pytest.raises(KeyError):
        author_topics(st.model, 99)
    assert len(top_words(st.model, 4)) == st.model.num_topics()


def test_labels_unsupported_without_hashtags():
    m = TopicModel(build_tn_graph(TnConfig().ablate("hashtag")), [Document(0, [1], [])], 1, 3,
                   np.random.default_rng(0))
    with pytest.raises(UnsupportedOperation, match="No Hashtag"):
        label_topics(m)


def test_recommendation(trained):
    st, corpus = trained
    new = [d for d in corpus.documents if d.author == 0]
    rec = recommend_authors(st, new, "cosine", top_k=3, fold_in_sweeps=4,
                            rng=np.random.default_rng(0))
    assert sorted(rec.ranking.tolist()) == list(range(12))
    assert len(rec.recommended) == 3
    assert set(rec.recommended).isdisjoint(rec.not_recommended)
    tab = table4({"TN": [rec]})
    assert set(tab) == {("TN", "recommended"), ("TN", "not_recommended")}
    assert "Not-recommended" in format_table4(tab)
    assert table4_csv(tab).startswith("model,side,1st,2nd,3rd")
    orig = recommend_authors(st, new, "original", fold_in_sweeps=4, refit_steps=50,
                             rng=np.random.default_rng(0))
    assert np.all(np.isfinite(orig.scores))


def test_report_tables_mark_missing_fields():
    rep = EvalReport()
    rep.add(perplexity=10.0, pmi=None)
    rep.add(perplexity=12.0)
    assert rep.perplexity == (11.0, pytest.approx(math.sqrt(2)))
    assert rep.network_ll is None
    text = format_table1([("No Network", rep)])
    assert "N/A" in text
    csv = table1_csv([("No Network", rep)])
    assert csv.splitlines()[1].startswith("No Network,11.0,")
