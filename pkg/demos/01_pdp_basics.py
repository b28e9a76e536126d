"""Single-node behaviour: power-law table growth and exact table removal."""
import numpy as np

from tntopic.pdp import NodeState, PdpHyper, predictive, simulate_table_growth, \
    table_removal_prob

rng = np.random.default_rng(0)

# Number of tables after n customers at a root with a diffuse base.
# With discount a > 0 the count grows like n**a; with a = 0 it grows like log n.
ns = np.array([100, 300, 1000, 3000, 10000])
for a in (0.0, 0.3, 0.7):
    T = simulate_table_growth(PdpHyper(a, 1.0), ns, 300, rng).mean(axis=1)
    slope = np.polyfit(np.log(ns), np.log(T), 1)[0]
    print(f"discount {a:.1f}: mean tables {np.round(T, 1)}  log-log slope {slope:.2f}")

# Removing a customer from n customers on t tables closes a table with
# probability S(n-1, t-1) / S(n, t), not t / n.
print()
for n, t in [(4, 2), (10, 3), (10, 9)]:
    print(f"n={n:2d} t={t}: close prob {table_removal_prob(n, t, 0.5):.4f}  (t/n = {t / n:.4f})")

# Predictive of a node with 3 customers of topic 0 on 2 tables, one of topic 1,
# under a base that puts mass 0.5/0.3 on the two topics and 0.2 on a new one.
node = NodeState(PdpHyper(0.5, 1.0), np.array([3, 1]), np.array([2, 1]))
print()
print("predictive (topic 0, topic 1, new):", np.round(predictive(node, [0.5, 0.3, 0.2]), 4))
