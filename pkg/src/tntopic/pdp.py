"""Single Poisson-Dirichlet (Pitman-Yor) node in table-multiplicity form.

A node keeps, per topic ``k``, the number of customers ``n_k`` and the number
of tables ``t_k``.  Seating arrangements are never stored explicitly; the
add/remove moves below are exact for the count representation:

* adding a customer of topic ``k`` opens a table with weight
  ``(b + a*T) * base(k)`` versus ``n_k - a*t_k`` for joining one;
* removing a customer of topic ``k`` closes a table with probability
  ``S(n_k - 1, t_k - 1) / S(n_k, t_k)`` where ``S`` is the generalized
  Stirling number of the discount ``a``.  This is the exact reversal of the
  forward step, marginalized over arrangements with the given counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

__all__ = [
    "PdpHyper",
    "ConcentrationPrior",
    "NodeState",
    "TableDelta",
    "StirlingTable",
    "stirling",
    "predictive",
    "add_customer",
    "remove_customer",
    "table_removal_prob",
    "seating_log_likelihood",
    "concentration_log_likelihood",
    "sample_concentration",
    "simulate_table_growth",
]


@dataclass
class PdpHyper:
    """Discount ``a`` in [0, 1) and concentration ``b`` > -a."""

    discount: float
    concentration: float

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if not self.concentration + self.discount > 0.0:
            raise ValueError(
                f"concentration must exceed -discount, got b={self.concentration}, "
                f"a={self.discount}"
            )


@dataclass(frozen=True)
class ConcentrationPrior:
    shape: float = 0.1
    rate: float = 0.1

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("gamma prior needs shape > 0 and rate > 0")

    def logpdf(self, b):
        b = np.asarray(b, dtype=float)
        return (self.shape * math.log(self.rate) - math.lgamma(self.shape)
                + (self.shape - 1.0) * np.log(b) - self.rate * b)


@dataclass(frozen=True)
class TableDelta:
    topic: int
    created_table: bool = False
    removed_table: bool = False

    def __post_init__(self):
        if self.created_table and self.removed_table:
            raise ValueError("a delta cannot both create and remove a table")


class StirlingTable:
    """Lazily grown table of log generalized Stirling numbers ``log S(n, t; a)``.

    Uses the recurrence ``S(n+1, t) = S(n, t-1) + (n - a t) S(n, t)`` with
    ``S(0, 0) = 1``.  Entries with ``t > n`` or ``t = 0 < n`` are ``-inf``.
    """

    def __init__(self, discount: float, size: int = 64):
        self.discount = float(discount)
        self._table = np.full((1, 1), -np.inf)
        self._table[0, 0] = 0.0
        self._grow(size)

    @property
    def size(self) -> int:
        return self._table.shape[0]

    def _grow(self, size: int):
        old = self._table
        n_old = old.shape[0]
        if size <= n_old:
            return
        new = np.full((size, size), -np.inf)
        new[:n_old, :n_old] = old
        a = self.discount
        t = np.arange(size, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for n in range(n_old - 1, size - 1):
                prev = new[n]
                coef = n - a * t
                stay = np.where(coef > 0, np.log(np.where(coef > 0, coef, 1.0)) + prev, -np.inf)
                shift = np.concatenate(([-np.inf], prev[:-1]))
                new[n + 1] = np.logaddexp(shift, stay)
        self._table = new

    def ensure(self, n: int):
        if n >= self.size:
            self._grow(max(2 * self.size, n + 1))

    def log(self, n, t):
        """Vectorized lookup of ``log S(n, t)``."""
        n = np.asarray(n, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if n.size:
            self.ensure(int(n.max()))
        return self._table[n, t]

    def removal_prob(self, n: int, t: int) -> float:
        """Probability that removing one of ``n`` customers on ``t`` tables closes a table."""
        if n <= 1:
            return 1.0
        if t <= 1:
            return 0.0
        self.ensure(n)
        tab = self._table
        return math.exp(tab[n - 1, t - 1] - tab[n, t])


_STIRLING_CACHE: dict[float, StirlingTable] = {}


def stirling(discount: float) -> StirlingTable:
    """Shared Stirling table for a discount value (memoized per process)."""
    key = float(discount)
    tab = _STIRLING_CACHE.get(key)
    if tab is None:
        tab = _STIRLING_CACHE[key] = StirlingTable(key)
    return tab


@dataclass
class NodeState:
    """Customer/table counts of one PDP node over a fixed topic range."""

    hyper: PdpHyper
    customer_count: np.ndarray = field(default=None)
    table_count: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.customer_count is None:
            self.customer_count = np.zeros(0, dtype=np.int64)
        if self.table_count is None:
            self.table_count = np.zeros_like(self.customer_count)
        self.customer_count = np.asarray(self.customer_count, dtype=np.int64).copy()
        self.table_count = np.asarray(self.table_count, dtype=np.int64).copy()
        if self.customer_count.shape != self.table_count.shape:
            raise ValueError("customer and table counts must have equal shape")

    @classmethod
    def empty(cls, hyper: PdpHyper, n_topics: int) -> "NodeState":
        return cls(hyper, np.zeros(n_topics, dtype=np.int64))

    @property
    def n_topics(self) -> int:
        return self.customer_count.shape[0]

    @property
    def total_customers(self) -> int:
        return int(self.customer_count.sum())

    @property
    def total_tables(self) -> int:
        return int(self.table_count.sum())

    def check(self):
        n, t = self.customer_count, self.table_count
        if np.any(t > n) or np.any((n > 0) != (t > 0)) or np.any(n < 0):
            raise AssertionError(f"seating invariant violated: n={n}, t={t}")

    def copy(self) -> "NodeState":
        return NodeState(PdpHyper(self.hyper.discount, self.hyper.concentration),
                         self.customer_count, self.table_count)


def predictive(node: NodeState, parent_probs) -> np.ndarray:
    """Predictive distribution of the next customer's topic.

    ``parent_probs`` is the base distribution over the node's topics plus one
    trailing "new topic" entry; the result has the same layout.
    """
    q = np.asarray(parent_probs, dtype=float)
    K = node.n_topics
    if q.shape != (K + 1,):
        raise ValueError(f"parent_probs has length {q.shape[0] if q.ndim else 0}, "
                         f"expected {K + 1} (topics + new)")
    a, b = node.hyper.discount, node.hyper.concentration
    n, t = node.customer_count, node.table_count
    N, T = n.sum(), t.sum()
    if N == 0:
        return q.copy()
    out = (b + a * T) * q
    out[:K] += n - a * t
    return out / (N + b)


def add_customer(node: NodeState, topic: int, parent_new_topic_prob: float, rng) -> TableDelta:
    """Seat one customer of ``topic``; ``parent_new_topic_prob`` is the base mass of ``topic``."""
    a, b = node.hyper.discount, node.hyper.concentration
    n, t = node.customer_count, node.table_count
    nk = n[topic]
    if nk == 0:
        created = True
    else:
        w_new = (b + a * t.sum()) * parent_new_topic_prob
        w_old = nk - a * t[topic]
        created = rng.random() * (w_new + w_old) < w_new
    n[topic] += 1
    if created:
        t[topic] += 1
    return TableDelta(topic, created_table=bool(created))


def table_removal_prob(n_k: int, t_k: int, discount: float) -> float:
    """Exact probability that removing a customer from ``(n_k, t_k)`` closes a table."""
    return stirling(discount).removal_prob(int(n_k), int(t_k))


def remove_customer(node: NodeState, topic: int, rng) -> TableDelta:
    n, t = node.customer_count, node.table_count
    nk, tk = int(n[topic]), int(t[topic])
    if nk < 1:
        raise RuntimeError(f"cannot remove a customer from empty topic {topic}")
    p = table_removal_prob(nk, tk, node.hyper.discount)
    removed = p >= 1.0 or (p > 0.0 and rng.random() < p)
    n[topic] -= 1
    if removed:
        t[topic] -= 1
    return TableDelta(topic, removed_table=bool(removed))


def _log_rising(b, a, T):
    """log of prod_{i<T} (b + a i), vectorized over T (b scalar)."""
    T = np.asarray(T, dtype=float)
    if a == 0.0:
        return T * math.log(b)
    return T * math.log(a) + gammaln(b / a + T) - gammaln(b / a)


def concentration_log_likelihood(b: float, discount: float, N, T) -> float:
    """Part of the seating likelihood that depends on the concentration ``b``."""
    N = np.asarray(N, dtype=float)
    T = np.asarray(T, dtype=float)
    if N.size == 0:
        return 0.0
    return float(np.sum(_log_rising(b, discount, T) - (gammaln(b + N) - gammaln(b))))


def seating_log_likelihood(node: NodeState) -> float:
    """Log probability of the node's counts under the CRP, excluding base terms."""
    a, b = node.hyper.discount, node.hyper.concentration
    n, t = node.customer_count, node.table_count
    live = n > 0
    ll = concentration_log_likelihood(b, a, n.sum(), t.sum())
    return ll + float(stirling(a).log(n[live], t[live]).sum())


def _slice_log_b(logpost, x0, rng, width=1.0, max_steps=50):
    """One univariate slice-sampling update (stepping out + shrinkage)."""
    f0 = logpost(x0)
    level = f0 + math.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    steps = max_steps
    while steps > 0 and logpost(left) > level:
        left -= width
        steps -= 1
    steps = max_steps
    while steps > 0 and logpost(right) > level:
        right += width
        steps -= 1
    while True:
        x1 = left + (right - left) * rng.random()
        if logpost(x1) > level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1


def sample_concentration(nodes, prior: ConcentrationPrior, rng, n_iter: int = 1,
                         counts=None) -> float:
    """Slice-sample the shared concentration of ``nodes`` on the log scale.

    ``counts`` may supply ``(discount, b, N, T)`` arrays directly instead of node
    objects (used by the graph sampler, whose nodes live in dense arrays).
    """
    if counts is None:
        nodes = list(nodes)
        if not nodes:
            return float(rng.gamma(prior.shape, 1.0 / prior.rate))
        a = nodes[0].hyper.discount
        b = nodes[0].hyper.concentration
        N = np.array([nd.total_customers for nd in nodes], dtype=float)
        T = np.array([nd.total_tables for nd in nodes], dtype=float)
    else:
        a, b, N, T = counts
        N = np.asarray(N, dtype=float)
        T = np.asarray(T, dtype=float)
        if N.size == 0:
            return float(rng.gamma(prior.shape, 1.0 / prior.rate))
    keep = N > 0
    N, T = N[keep], T[keep]

    def logpost(x):
        if x > 700.0:
            return -np.inf
        bb = math.exp(x)
        if not bb > 0.0:
            return -np.inf
        return concentration_log_likelihood(bb, a, N, T) + float(prior.logpdf(bb)) + x

    x = math.log(b) if b > 0 else math.log(prior.shape / prior.rate)
    for _ in range(n_iter):
        x = _slice_log_b(logpost, x, rng)
    new_b = math.exp(x)
    if counts is None:
        for nd in nodes:
            nd.hyper.concentration = new_b
    return new_b


def simulate_table_growth(hyper: PdpHyper, checkpoints, replicates: int, rng) -> np.ndarray:
    """Table counts of a root node with a diffuse base after ``n`` customers.

    With a diffuse base each new table carries a new topic, so the table count
    is a Markov chain: customer ``N+1`` opens a table with probability
    ``(b + a T) / (N + b)``.  All replicates advance together.  Returns an array
    of shape ``(len(checkpoints), replicates)``.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    a, b = hyper.discount, hyper.concentration
    T = np.zeros(replicates)
    out = np.empty((len(checkpoints), replicates))
    j = 0
    for N in range(checkpoints[-1]):
        p_new = 1.0 if N == 0 else (b + a * T) / (N + b)
        T += rng.random(replicates) < p_new
        while j < len(checkpoints) and checkpoints[j] == N + 1:
            out[j] = T
            j += 1
    return out
