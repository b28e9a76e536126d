"""Independent reference computations used by the tests.

Nothing here calls into the Stirling-number machinery: seating arrangements
are enumerated explicitly with the sequential Chinese-restaurant rule.
"""
import itertools

import numpy as np


def _join(tables, k, j):
    new = list(tables)
    dish = list(new[k])
    dish[j] += 1
    new[k] = tuple(sorted(dish))
    return tuple(new)


def _open(tables, k):
    new = list(tables)
    new[k] = tuple(sorted(new[k] + (1,)))
    return tuple(new)


def _size(tables):
    return sum(sum(d) for d in tables), sum(len(d) for d in tables)


def _root_moves(root, k, a0, b0, K):
    """Ways a new root customer of dish ``k`` can sit, as ``(weight, new_root)``."""
    N, T = _size(root)
    out = []
    for j, m in enumerate(root[k]):
        out.append(((m - a0) / (b0 + N), _join(root, k, j)))
    out.append(((b0 + a0 * T) / (b0 + N) / K, _open(root, k)))
    return out


def enumerate_two_level(counts, child, root, K):
    """Exact distribution over explicit seatings of a child node under a root node.

    The child holds ``counts[k]`` customers of dish ``k``; each new child table
    sends one customer to the root, whose base is uniform over ``K`` dishes.
    ``child``/``root`` are ``(discount, concentration)``.  Returns a dict
    ``{(child_tables, root_tables): joint probability}`` where tables are per
    dish tuples of sorted table sizes.
    """
    a, b = child
    a0, b0 = root
    empty = tuple(() for _ in range(K))
    states = {(empty, empty): 1.0}
    seq = [k for k, c in enumerate(counts) for _ in range(c)]
    for k in seq:
        nxt = {}
        for (ch, rt), w in states.items():
            N, T = _size(ch)
            for j, m in enumerate(ch[k]):
                key = (_join(ch, k, j), rt)
                nxt[key] = nxt.get(key, 0.0) + w * (m - a) / (b + N)
            p_new = (b + a * T) / (b + N)
            for wr, rt2 in _root_moves(rt, k, a0, b0, K):
                key = (_open(ch, k), rt2)
                nxt[key] = nxt.get(key, 0.0) + w * p_new * wr
        states = nxt
    return states


def next_dish_two_level(states, child, root, K):
    """Predictive of the next child customer's dish, averaged over ``states``."""
    a, b = child
    a0, b0 = root
    total = sum(states.values())
    out = np.zeros(K)
    for (ch, rt), w in states.items():
        N, T = _size(ch)
        Nr, Tr = _size(rt)
        for k in range(K):
            pr = sum(m - a0 for m in rt[k]) / (b0 + Nr) + (b0 + a0 * Tr) / (b0 + Nr) / K
            pc = sum(m - a for m in ch[k]) / (b + N) + (b + a * T) / (b + N) * pr
            out[k] += w * pc
    return out / total


def enumerate_single(counts, hyper, base):
    """Exact joint of dish counts and per-dish table counts at one node with fixed base."""
    a, b = hyper
    K = len(counts)
    states = {tuple(() for _ in range(K)): 1.0}
    for k in (k for k, c in enumerate(counts) for _ in range(c)):
        nxt = {}
        for ch, w in states.items():
            N, T = _size(ch)
            for j, m in enumerate(ch[k]):
                key = _join(ch, k, j)
                nxt[key] = nxt.get(key, 0.0) + w * (m - a) / (b + N)
            key = _open(ch, k)
            nxt[key] = nxt.get(key, 0.0) + w * (b + a * T) / (b + N) * base[k]
        states = nxt
    by_t = {}
    for ch, w in states.items():
        t = tuple(len(d) for d in ch)
        by_t[t] = by_t.get(t, 0.0) + w
    return by_t


def count_vectors(max_customers, K):
    """All dish-count vectors with at most ``max_customers`` customers in total."""
    for n in itertools.product(range(max_customers + 1), repeat=K):
        if 0 < sum(n) <= max_customers:
            yield n
