"""Fit the full model to a planted corpus and look at what it recovers."""
import numpy as np

from tntopic.corpus import generate_synthetic, planted_spec, split_train_test
from tntopic.engine import Schedule, build_chain, run
from tntopic.evaluation import (author_topics, cluster_metrics, doc_topic_argmax,
                                format_labels, label_topics, perplexity)
from tntopic.tn import TnConfig, build_tn_graph

rng = np.random.default_rng(1)
corpus, edges, truth = generate_synthetic(n_authors=30, docs_per_author=10, words_per_doc=6,
                                          hashtags_per_doc=2, n_topics=3, vocab_size=120,
                                          rng=rng, spec=planted_spec())
train, test = split_train_test(corpus, 0.9, seed=1)
print(f"{len(train)} training / {len(test)} test tweets, {len(edges)} follower links")

# Text-only chain: the network is switched off so this runs in a few seconds.
state = build_chain(build_tn_graph(TnConfig()), train.documents, corpus.n_authors,
                    corpus.vocab_size, seed=1, network=False)
_, trace = run(state, Schedule(total_iterations=60, text_only_burnin=60),
               progress=lambda r: r["iter"] % 20 == 0 and print(
                   f"  iter {r['iter']:3d}  log-lik {r['text_ll']:.1f}  topics {r['topics']}"))

model = state.model
labels = label_topics(model, 3, 6, corpus.vocab)
print()
print(format_labels(labels))

# Planted labels of the training documents against the fitted argmax topic.
ids = {d.id: i for i, d in enumerate(corpus.documents)}
gold = truth.doc_labels[[ids[d.id] for d in train.documents]]
pur, nmi = cluster_metrics(doc_topic_argmax(model), gold)
print(f"\npurity {pur:.3f}  NMI {nmi:.3f}")
print(f"held-out perplexity {perplexity(model, test.documents, rng=rng):.1f} "
      f"(vocabulary size {corpus.vocab_size})")

print("\nauthor 0 topic mix:")
for k, w, lb in author_topics(model, 0, labels)[:3]:
    print(f"  topic {k}: {w:.2f}  {' '.join('#' + t for t in lb.tags) if lb else ''}")
