"""Joint text and network model: link prediction and author recommendation."""
import numpy as np

from tntopic.corpus import generate_synthetic, planted_spec
from tntopic.engine import Schedule, build_chain, run
from tntopic.evaluation import (bernoulli_baseline_ll, heldout_network_ll, link_auc,
                                recommend_authors)
from tntopic.gp import PairSet, all_pairs
from tntopic.tn import TnConfig, build_tn_graph

A, NEW = 30, 1
rng = np.random.default_rng(2)
corpus, edges, truth = generate_synthetic(A + NEW, 8, 4, 2, 2, 150, rng, spec=planted_spec())
print("community sizes:", np.bincount(truth.communities[:A]))

# Every pair among the training authors, 20% of them held out.
pairs = all_pairs(A)
links = edges.as_set()
x = np.array([1 if tuple(p) in links else 0 for p in pairs.tolist()])
perm = rng.permutation(len(pairs))
held, kept = np.sort(perm[:len(pairs) // 5]), np.sort(perm[len(pairs) // 5:])

train_docs = [d for d in corpus.documents if d.author < A]
state = build_chain(build_tn_graph(TnConfig()), train_docs, A, corpus.vocab_size, seed=2,
                    pairs=PairSet(pairs[kept], x[kept]))
run(state, Schedule(total_iterations=60, text_only_burnin=40))

score = state.gp.conditional_mean(pairs[held])
print(f"held-out link AUC {link_auc(score, x[held]):.3f}")
print(f"held-out network log-lik {heldout_network_ll(state.gp, pairs[held], x[held]):.1f} "
      f"vs constant-rate baseline {bernoulli_baseline_ll(x[kept], x[held]):.1f}")

# A new author: fold in their tweets, then rank the training authors.
new_docs = [d for d in corpus.documents if d.author == A]
for kernel in ("cosine", "original"):
    rec = recommend_authors(state, new_docs, kernel, top_k=3, fold_in_sweeps=30,
                            rng=np.random.default_rng(0), refit_steps=500)
    same = truth.communities[rec.recommended] == truth.communities[A]
    print(f"{kernel:>8}: recommend {rec.recommended.tolist()} "
          f"(same community {same.sum()}/3), cosines {np.round(rec.cosine_at('recommended'), 2)}")
