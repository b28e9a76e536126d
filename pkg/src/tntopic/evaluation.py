"""Held-out perplexity, network likelihood, clustering and coherence metrics,
topic labels, author summaries and author recommendation."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .gp import GpState, author_embeddings, mh_sweep_f, network_loglik


class UnsupportedOperation(RuntimeError):
    pass


# -------------------------------------------------------------- perplexity
def fold_in(model, documents, sweeps=50, rng=None, fraction=0.5, n_new_authors=0,
            hold_out=True, callback=None):
    """Copy ``model``, freeze it and Gibbs-sample the document-level state of ``documents``.

    All hashtags and the first ``ceil(fraction * n_words)`` words of each
    document are seated; the remaining words are returned as held-out
    ``(doc index, word)`` pairs (document index in the copied model).
    ``callback(model, sweep, held)`` runs after every fold-in sweep.
    """
    m = copy.deepcopy(model)
    if rng is not None:
        m.rng = rng
    m.freeze_existing()
    first_doc = m.n_docs
    m.add_documents(documents, n_new_authors)
    seat, held = [], []
    words_stream = m.stream_names.index("words") if "words" in m.stream_names else -1
    for d_off in range(len(documents)):
        doc = first_doc + d_off
        idx = m.doc_tokens[doc]
        widx = [i for i in idx if m.tok_stream[i] == words_stream]
        keep = math.ceil(fraction * len(widx)) if hold_out else len(widx)
        held_here = set(widx[keep:])
        for i in idx:
            if i in held_here:
                held.append((doc, int(m.tok_word[i])))
            else:
                seat.append(int(i))
    seat = np.array(seat, dtype=np.int64)
    if m.num_topics() == 0:
        # nothing learned yet: every predictive is the root base already
        if callback is not None:
            callback(m, max(sweeps, 1), held)
        return m, held
    m.initialize(seat)
    for it in range(1, sweeps + 1):
        m.sweep(tokens=seat, compute_ll=False)
        if callback is not None:
            callback(m, it, held)
    if sweeps == 0 and callback is not None:
        callback(m, 1, held)
    return m, held


def word_predictive(model, doc, word):
    """Probability of ``word`` in document ``doc`` under the word stream."""
    s = model.stream_names.index("words")
    tvec, tnew = model._topic_pred(model.tleaf[s], int(doc), {})[:2]
    vvec, vnew = model._vocab_pred(model.vleaf[s], int(word), {})[:2]
    tvec = np.broadcast_to(tvec, (model.n_slots,))
    return float(np.dot(tvec, vvec) + tnew * vnew)


@dataclass
class PerplexityResult:
    perplexity: float
    log_prob: float
    n_tokens: int
    excluded_docs: int
    samples: int
    note: str = "words only; hashtags are conditioned on, not scored"


def perplexity(model, test_docs, fold_in_fraction=0.5, fold_in_sweeps=50, rng=None,
               detail=False, average_from=None):
    """Document-completion perplexity over held-out word tokens.

    The held-out predictive of each token is averaged over the fold-in states
    from sweep ``average_from`` (default: the second half) to the last.
    """
    if not test_docs:
        raise ValueError("empty test set")
    if average_from is None:
        average_from = fold_in_sweeps // 2 + 1
    average_from = min(max(average_from, 1), max(fold_in_sweeps, 1))
    acc = {"p": 0.0, "n": 0}

    def collect(m, it, held):
        if it >= average_from:
            acc["p"] = acc["p"] + np.array([word_predictive(m, d, w) for d, w in held])
            acc["n"] += 1

    _, held = fold_in(model, test_docs, fold_in_sweeps, rng, fold_in_fraction, callback=collect)
    excluded = len(test_docs) - len({d for d, _ in held})
    n = len(held)
    if n == 0:
        res = PerplexityResult(float("nan"), 0.0, 0, excluded, 0)
    else:
        logp = float(np.sum(np.log(acc["p"] / acc["n"])))
        res = PerplexityResult(math.exp(-logp / n), logp, n, excluded, acc["n"])
    return res if detail else res.perplexity


# ------------------------------------------------------------ network eval
def heldout_network_ll(gp: GpState, pairs, x, embeddings=None):
    """Score held-out pairs with the GP conditional mean of the posterior-mean ``f``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return 0.0
    f_star = gp.conditional_mean(pairs, embeddings)
    return network_loglik(f_star, np.asarray(x))


def link_auc(scores, labels):
    """Area under the ROC curve via the rank-sum statistic (ties count one half)."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    r = rankdata(scores)
    return float((r[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def bernoulli_baseline_ll(x_train, x_test):
    """Log-likelihood of ``x_test`` under a constant link rate fitted on ``x_train``."""
    p = float(np.clip(np.mean(x_train), 1e-12, 1 - 1e-12))
    x = np.asarray(x_test)
    return float(np.sum(np.where(x > 0, math.log(p), math.log1p(-p))))


# -------------------------------------------------------- clustering/PMI
def _contingency(pred, truth):
    _, p = np.unique(np.asarray(pred), return_inverse=True)
    _, t = np.unique(np.asarray(truth), return_inverse=True)
    c = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(c, (p, t), 1)
    return c


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def cluster_metrics(pred, truth):
    """Purity and NMI (mutual information over the arithmetic mean of entropies)."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if len(pred) != len(truth):
        raise ValueError("label vectors differ in length")
    if len(pred) == 0:
        raise ValueError("no items to score")
    c = _contingency(pred, truth)
    n = c.sum()
    purity = float(c.max(axis=1).sum() / n)
    hp, ht = _entropy(c.sum(axis=1)), _entropy(c.sum(axis=0))
    if hp == 0.0 and ht == 0.0:
        return purity, 1.0
    nz = c > 0
    outer = np.outer(c.sum(axis=1), c.sum(axis=0))
    mi = float(np.sum(c[nz] / n * np.log(c[nz] * n / outer[nz])))
    nmi = mi / ((hp + ht) / 2.0)
    return purity, float(min(max(nmi, 0.0), 1.0))


def pmi_coherence(topics, reference_docs, top_n=10, eps=0.01):
    """Mean pairwise PMI of each topic's top words, averaged over topics.

    Probabilities are document frequencies in ``reference_docs`` (iterables of
    token ids); joint counts get ``eps`` added so unseen pairs stay finite.
    """
    sets = [set(d) for d in reference_docs]
    D = len(sets)
    if D == 0:
        raise ValueError("empty reference corpus")
    df = {}
    for s in sets:
        for w in s:
            df[w] = df.get(w, 0) + 1
    scores = []
    for words in topics:
        words = list(words)[:top_n]
        if len(words) < 2:
            continue
        vals = []
        for a in range(len(words)):
            for b in range(a + 1, len(words)):
                wi, wj = words[a], words[b]
                ci, cj = df.get(wi, 0), df.get(wj, 0)
                if ci == 0 or cj == 0:
                    continue
                cij = sum(1 for s in sets if wi in s and wj in s)
                vals.append(math.log((cij + eps) / D) - math.log(ci / D) - math.log(cj / D))
        if vals:
            scores.append(float(np.mean(vals)))
    return float(np.mean(scores)) if scores else float("nan")


def doc_topic_argmax(model, docs=None):
    s = model.graph.topic_leaf["words"]
    docs = range(model.n_docs) if docs is None else docs
    live = np.flatnonzero(model.live_topics())
    return np.array([live[np.argmax(model.topic_predictive(s, m)[:-1][live])] for m in docs])


def top_words(model, top_n=10, stream="words"):
    vleaf = model.graph.vocab_leaf[stream]
    out = []
    for k in np.flatnonzero(model.live_topics()):
        p = model.vocab_distribution(vleaf, k)
        out.append([int(w) for w in np.argsort(-p, kind="stable")[:top_n]])
    return out


# --------------------------------------------------------- topic labeling
@dataclass
class TopicLabel:
    topic: int
    tags: list
    words: list
    weight: float = 0.0


def label_topics(model, top_k_tags=3, top_k_words=7, vocab=None):
    """Hashtag labels and top words for every live topic.

    Tags are the symbols seated as hashtags in the topic, ranked by the
    topic's hashtag predictive; words are ranked by the word predictive.
    """
    if "hashtags" not in model.graph.vocab_leaf:
        raise UnsupportedOperation("topic labeling needs hashtag nodes; this model was "
                                   "trained with the 'No Hashtag' ablation")
    gid, wid = model.graph.vocab_leaf["hashtags"], model.graph.vocab_leaf["words"]
    gamma = model.groups[gid]
    name = (lambda w: vocab[w]) if vocab is not None else int
    root = model.topic_root.n[0]
    total = max(root[:model.n_slots].sum(), 1)
    out = []
    for k in np.flatnonzero(model.live_topics()):
        pt = model.vocab_distribution(gid, k)
        seen = np.flatnonzero(gamma.n[k] > 0)
        tags = seen[np.argsort(-pt[seen], kind="stable")][:top_k_tags]
        pw = model.vocab_distribution(wid, k)
        words = np.argsort(-pw, kind="stable")[:top_k_words]
        out.append(TopicLabel(int(k), [name(t) for t in tags], [name(w) for w in words],
                              float(root[k] / total)))
    return out


def format_labels(labels):
    lines = []
    for lb in labels:
        lines.append(f"topic {lb.topic}")
        lines.append("  tags : " + " ".join("#" + str(t) for t in lb.tags))
        lines.append("  words: " + " ".join(str(w) for w in lb.words))
    return "\n".join(lines)


def author_topics(model, author, labels=None, node="nu"):
    """Author topic weights (normalized counts over live topics), largest first."""
    if node not in model.groups:
        raise UnsupportedOperation("model has no author nodes")
    if not 0 <= author < model.n_authors:
        raise KeyError(f"unknown author {author}")
    live = np.flatnonzero(model.live_topics())
    counts = model.groups[node].n[author, live].astype(float)
    if counts.sum() > 0:
        w = counts / counts.sum()
    else:
        p = model.topic_predictive(node, author)[:-1][live]
        w = p / p.sum()
    by_topic = {lb.topic: lb for lb in labels} if labels else {}
    order = np.argsort(-w, kind="stable")
    return [(int(live[i]), float(w[i]), by_topic.get(int(live[i])))
            for i in order if w[i] > 0]


# ------------------------------------------------------ recommendation
@dataclass
class Recommendation:
    ranking: np.ndarray         # training authors, best first
    scores: np.ndarray          # link score per training author
    cosines: np.ndarray         # cosine of author embeddings per training author
    embedding: np.ndarray       # new author's embedding
    top_k: int = 3

    @property
    def recommended(self):
        return self.ranking[:self.top_k]

    @property
    def not_recommended(self):
        return self.ranking[::-1][:self.top_k]

    def cosine_at(self, which):
        idx = self.recommended if which == "recommended" else self.not_recommended
        return self.cosines[idx]


def cosine_similarity(E, x):
    E = np.atleast_2d(E)
    return (E @ x) / (np.linalg.norm(E, axis=1) * np.linalg.norm(x))


def refit_f(gp: GpState, kernel, embeddings, rng, steps=2000, eps=0.2, burn=None):
    """Posterior mean of ``f`` under another kernel at fixed embeddings (pCN)."""
    other = GpState(gp.pairs, kernel, gp.params)
    other.refresh(embeddings)
    burn = steps // 2 if burn is None else burn
    for it in range(steps):
        mh_sweep_f(other, eps=eps, rng=rng, n_steps=1)
        if it >= burn:
            other.accumulate()
    return other


def recommend_authors(state, new_docs, kernel="cosine", top_k=3, fold_in_sweeps=50, rng=None,
                      refit_steps=2000, gp_override=None):
    """Rank training authors for a new author by the GP conditional mean link score.

    ``new_docs`` are the new author's documents (their ``author`` field is
    ignored).  Returns a :class:`Recommendation`.
    """
    model, gp = state.model, state.gp
    if gp is None or gp.embeddings is None:
        raise UnsupportedOperation("recommendation needs a trained network model")
    if sum(len(d.words) + len(d.hashtags) for d in new_docs) == 0:
        raise ValueError("new author has no tokens")
    rng = np.random.default_rng(0) if rng is None else rng
    A = model.n_authors
    docs = [type(d)(**{**d.__dict__, "author": A}) for d in new_docs]
    m, _ = fold_in(model, docs, fold_in_sweeps, rng, hold_out=False, n_new_authors=1)
    live = np.flatnonzero(model.live_topics())
    E_train = gp.embeddings
    new = author_embeddings(m.groups["nu"].n[A:A + 1, live], 0.5)[0]
    E = np.vstack([E_train, new])
    if gp_override is not None:
        g = gp_override
    elif kernel == gp.kernel:
        g = gp
    else:
        g = refit_f(gp, kernel, E_train, rng, steps=refit_steps)
    pairs = np.stack([np.arange(A), np.full(A, A)], axis=1)
    scores = g.conditional_mean(pairs, E)
    ranking = np.argsort(-scores, kind="stable")
    cos = cosine_similarity(E_train, new)
    return Recommendation(ranking, scores, cos, new, top_k)


RANK_NAMES = ("1st", "2nd", "3rd")


def table4(results):
    """Mean cosine per kernel row, recommended/not-recommended and rank.

    ``results`` maps a row name (``Original``/``TN``) to a list of
    :class:`Recommendation`.  Returns ``{(row, side): [c1, c2, c3]}``.
    """
    out = {}
    for row, recs in results.items():
        for side in ("recommended", "not_recommended"):
            vals = np.array([r.cosine_at(side)[:3] for r in recs])
            out[(row, side)] = vals.mean(axis=0).tolist()
    return out


def format_table4(table):
    head = f"{'Model':<10}{'Rank':<18}" + "".join(f"{r:>8}" for r in RANK_NAMES)
    lines = [head]
    for (row, side), vals in table.items():
        label = "Recommended" if side == "recommended" else "Not-recommended"
        lines.append(f"{row:<10}{label:<18}" + "".join(f"{v:>8.2f}" for v in vals))
    return "\n".join(lines)


def table4_csv(table):
    lines = ["model,side," + ",".join(RANK_NAMES)]
    for (row, side), vals in table.items():
        lines.append(f"{row},{side}," + ",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- reports
@dataclass
class EvalReport:
    runs: list = field(default_factory=list)    # dicts of per-run metrics

    def add(self, **metrics):
        self.runs.append(metrics)

    def _values(self, key):
        return [r[key] for r in self.runs if r.get(key) is not None]

    def summary(self, key):
        """``(mean, sd)`` over runs, or ``None`` when no run reports ``key``."""
        v = self._values(key)
        if not v:
            return None
        sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        return float(np.mean(v)), sd

    @property
    def perplexity(self):
        return self.summary("perplexity")

    @property
    def network_ll(self):
        return self.summary("network_ll")

    @property
    def purity(self):
        return self.summary("purity")

    @property
    def nmi(self):
        return self.summary("nmi")

    @property
    def pmi(self):
        return self.summary("pmi")


REPORT_FIELDS = ("perplexity", "network_ll", "purity", "nmi", "pmi")


def format_table1(rows):
    """Text table of ``(name, EvalReport)`` rows; missing fields print as N/A."""
    lines = [f"{'Model':<20}" + "".join(f"{f:>22}" for f in REPORT_FIELDS)]
    for name, rep in rows:
        cells = []
        for f in REPORT_FIELDS:
            s = rep.summary(f)
            cells.append(f"{'N/A':>22}" if s is None else f"{s[0]:>13.3f} ± {s[1]:<6.3f}")
        lines.append(f"{name:<20}" + "".join(cells))
    return "\n".join(lines)


def table1_csv(rows):
    cols = ["model"]
    for f in REPORT_FIELDS:
        cols += [f, f + "_sd"]
    lines = [",".join(cols)]
    for name, rep in rows:
        cells = [name]
        for f in REPORT_FIELDS:
            s = rep.summary(f)
            cells += ["", ""] if s is None else [repr(s[0]), repr(s[1])]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
