"""Corpus ingestion, shared word/hashtag vocabulary, splits and synthetic data."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import GraphSpec, HyperGroup
from .sampler import forward_generate
from .tn import TnConfig, build_tn_graph

logger = logging.getLogger(__name__)

OOV = "<oov>"


class CorpusError(ValueError):
    """Raised for unusable input data."""


@dataclass
class Tweet:
    id: str
    author: int
    words: list
    hashtags: list


@dataclass
class Corpus:
    documents: list
    authors: list               # author id strings, index = author number
    vocab: list                 # token strings, index = vocabulary id
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        V, A = len(self.vocab), len(self.authors)
        for d in self.documents:
            if not 0 <= d.author < A:
                raise CorpusError(f"document {d.id}: unknown author {d.author}")
            for w in list(d.words) + list(d.hashtags):
                if not 0 <= w < V:
                    raise CorpusError(f"document {d.id}: token {w} outside vocabulary")

    @property
    def n_authors(self):
        return len(self.authors)

    @property
    def vocab_size(self):
        return len(self.vocab)

    @property
    def doc_author(self):
        return np.array([d.author for d in self.documents], dtype=np.int64)

    @property
    def word_index(self):
        return {w: i for i, w in enumerate(self.vocab)}

    @property
    def author_index(self):
        return {a: i for i, a in enumerate(self.authors)}

    def __len__(self):
        return len(self.documents)

    def subset(self, indices):
        return Corpus([self.documents[i] for i in indices], self.authors, self.vocab)

    def n_tokens(self, stream="words"):
        return sum(len(getattr(d, stream)) for d in self.documents)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.authors == other.authors and self.vocab == other.vocab
                and len(self.documents) == len(other.documents)
                and all(a.id == b.id and a.author == b.author and list(a.words) == list(b.words)
                        and list(a.hashtags) == list(b.hashtags)
                        for a, b in zip(self.documents, other.documents)))


def _clean(tok, strip_hash):
    if not isinstance(tok, str):
        raise TypeError("token is not a string")
    tok = tok.lower()
    if strip_hash:
        tok = tok.lstrip("#")
    return tok


def _parse(line):
    rec = json.loads(line)
    if not isinstance(rec, dict):
        raise TypeError("record is not an object")
    doc_id, author = rec["id"], rec["author"]
    words, tags = rec["text-tokens"], rec["hashtags"]
    if not isinstance(words, list) or not isinstance(tags, list):
        raise TypeError("token fields must be lists")
    words = [t for t in (_clean(w, False) for w in words) if t]
    tags = [t for t in (_clean(h, True) for h in tags) if t]
    return str(doc_id), str(author), words, tags


def load_corpus(path, min_author_tweets=100, min_token_count=1, vocab=None, authors=None,
                max_malformed=0.01):
    """Read line-delimited JSON records into a :class:`Corpus`.

    Hashtags lose their ``#`` and share the vocabulary entry of the bare word.
    With ``vocab``/``authors`` given (e.g. the training tables) tokens outside
    the vocabulary go to the out-of-vocabulary sink (or are dropped when the
    vocabulary has none) and documents of unknown authors are skipped.
    """
    records, malformed, total = [], 0, 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            total += 1
            try:
                records.append(_parse(line))
            except (ValueError, KeyError, TypeError):
                malformed += 1
    if total and malformed / total > max_malformed:
        raise CorpusError(f"{malformed} of {total} records malformed (limit "
                          f"{max_malformed:.0%})")
    if malformed:
        logger.warning("skipped %d malformed records", malformed)

    if authors is None:
        per_author = {}
        for _, a, _, _ in records:
            per_author[a] = per_author.get(a, 0) + 1
        keep = [a for a in per_author if per_author[a] >= min_author_tweets]
        author_ids = list(dict.fromkeys(keep))
    else:
        author_ids = list(authors)
    aidx = {a: i for i, a in enumerate(author_ids)}
    records = [r for r in records if r[1] in aidx]

    if vocab is None:
        counts = {}
        for _, _, ws, ts in records:
            for t in ws + ts:
                counts[t] = counts.get(t, 0) + 1
        kept = sorted(t for t, c in counts.items() if c >= min_token_count and t != OOV)
        sink = len(kept) < len(counts)
        vocab = ([OOV] if sink else []) + kept
    vocab = list(vocab)
    widx = {w: i for i, w in enumerate(vocab)}
    sink_id = widx.get(OOV)

    def index(toks):
        out = []
        for t in toks:
            i = widx.get(t, sink_id)
            if i is not None:
                out.append(i)
        return out

    docs = [Tweet(d, aidx[a], index(ws), index(ts)) for d, a, ws, ts in records]
    if not docs:
        raise CorpusError(f"no documents left in {path}")
    return Corpus(docs, author_ids, vocab, {"malformed": malformed, "records": total})


def save_corpus(corpus: Corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in corpus.documents:
            rec = {"id": d.id, "author": corpus.authors[d.author],
                   "text-tokens": [corpus.vocab[w] for w in d.words],
                   "hashtags": ["#" + corpus.vocab[h] for h in d.hashtags]}
            fh.write(json.dumps(rec) + "\n")


# ------------------------------------------------------------------ edges
@dataclass
class EdgeList:
    pairs: np.ndarray           # (E, 2) author indices with i < j

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(p[:, 0] == p[:, 1]):
            raise CorpusError("self-loop in edge list")
        p = np.sort(p, axis=1)
        self.pairs = np.unique(p, axis=0) if len(p) else p

    def __len__(self):
        return len(self.pairs)

    def as_set(self):
        return set(map(tuple, self.pairs.tolist()))


def load_edges(path, corpus: Corpus):
    """Undirected ``a,b`` author-id lines; unknown endpoints and self-loops are skipped."""
    aidx = corpus.author_index
    pairs, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise CorpusError(f"bad edge line {line!r}")
            if parts[0] not in aidx or parts[1] not in aidx or parts[0] == parts[1]:
                skipped += 1
                continue
            pairs.append((aidx[parts[0]], aidx[parts[1]]))
    if skipped:
        logger.info("skipped %d edges with unknown endpoints or self-loops", skipped)
    return EdgeList(np.array(pairs, dtype=np.int64).reshape(-1, 2))


def save_edges(edges: EdgeList, corpus: Corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in edges.pairs.tolist():
            fh.write(f"{corpus.authors[i]},{corpus.authors[j]}\n")


# ------------------------------------------------------------------ splits
def split_train_test(corpus: Corpus, ratio=0.9, seed=0):
    """Random document split that keeps at least one document per author in train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(corpus)
    perm = rng.permutation(n)
    n_train = int(round(ratio * n))
    train = np.zeros(n, dtype=bool)
    train[perm[:n_train]] = True
    author = corpus.doc_author
    for a in np.unique(author):
        mine = perm[author[perm] == a]
        if not train[mine].any():
            train[mine[0]] = True
    return corpus.subset(np.flatnonzero(train)), corpus.subset(np.flatnonzero(~train))


# --------------------------------------------------------------- synthetic
@dataclass
class SyntheticTruth:
    doc_labels: np.ndarray      # argmax topic of each document's word distribution
    communities: np.ndarray     # dominant author topic
    model: object               # forward model with all latent counts


def planted_spec(author_weight=10.0, global_concentration=10.0, author_concentration=0.1,
                 vocab_concentration=3.0, vocab_discount=0.3, config: TnConfig | None = None):
    """TN graph tuned for generation with a strong author signal.

    The global node is nearly flat over topics, author nodes are peaked and
    documents lean on their author rather than on the miscellaneous node.
    """
    config = config or TnConfig()
    config = replace(config, lambdas={**config.lambdas, "theta_p<-nu": author_weight})
    spec = build_tn_graph(config)
    prior = spec.hyper_groups["topic"].prior
    spec.hyper_groups["global"] = HyperGroup(0.0, global_concentration, prior)
    spec.hyper_groups["author"] = HyperGroup(0.0, author_concentration, prior)
    spec.hyper_groups["vocab"].concentration = vocab_concentration
    if vocab_discount is not None:
        spec.hyper_groups["vocab"].discount = vocab_discount
    for nd in spec.nodes:
        if nd.id == "mu0":
            nd.group = "global"
        elif nd.id == "nu":
            nd.group = "author"
    return spec


def generate_synthetic(n_authors=40, docs_per_author=5, words_per_doc=10, hashtags_per_doc=2,
                       n_topics=2, vocab_size=50, rng=None, p_in=0.8, p_out=0.1,
                       config: TnConfig | None = None, spec: GraphSpec | None = None):
    """Forward-sample a TN corpus with a planted follower network.

    Authors in the same community (their dominant topic) link with
    probability ``p_in``, others with ``p_out``.  ``spec`` overrides the
    generating graph (default: the TN graph of ``config``).
    Returns ``(corpus, edges, truth)``.
    """
    for v in (n_authors, docs_per_author, words_per_doc, n_topics, vocab_size):
        if v < 1:
            raise ValueError("synthetic sizes must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    if spec is None:
        spec = build_tn_graph(config or TnConfig())
    shape = [(a, words_per_doc, hashtags_per_doc)
             for a in range(n_authors) for _ in range(docs_per_author)]
    model, docs = forward_generate(spec, n_topics, shape, vocab_size, rng, n_authors)
    theta = model.graph.topic_leaf["words"]
    labels = np.array([int(np.argmax(model.topic_predictive(theta, m)[:n_topics]))
                       for m in range(len(docs))], dtype=np.int64)
    nu = model.groups["nu"].n[:n_authors, :n_topics]
    comm = np.argmax(nu, axis=1).astype(np.int64)
    links = []
    for i in range(n_authors):
        for j in range(i + 1, n_authors):
            if rng.random() < (p_in if comm[i] == comm[j] else p_out):
                links.append((i, j))
    vocab = [f"w{v:03d}" for v in range(vocab_size)]
    authors = [f"u{a:03d}" for a in range(n_authors)]
    tweets = [Tweet(f"d{m:05d}", d.author, list(d.words), list(d.hashtags))
              for m, d in enumerate(docs)]
    corpus = Corpus(tweets, authors, vocab)
    edges = EdgeList(np.array(links, dtype=np.int64).reshape(-1, 2))
    return corpus, edges, SyntheticTruth(labels, comm, model)
