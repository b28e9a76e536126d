"""Joint-distribution check: forward draws versus sampler draws.

A sampler that never closes tables (the mutated one) drifts towards too many
root tables, which the z-scores expose.
"""
import numpy as np

from tntopic.engine import geweke_compare
from tntopic.tn import TnConfig, build_tn_graph

spec = build_tn_graph(TnConfig())
sizes = [(0, 3, 1), (1, 3, 1), (0, 2, 0)]      # (author, words, hashtags) per document

for mutate in (False, True):
    res = geweke_compare(spec, sizes, 2000, np.random.default_rng(0), truncation=3,
                         vocab_size=5, mutate=mutate)
    print("mutated sampler" if mutate else "correct sampler")
    print(res.format())
    print()
