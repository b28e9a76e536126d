"""Gaussian-process random-function model of the follower network.

Latent link values ``f`` live on unordered author pairs and have prior
``N(0, K + sigma^2 I)`` where ``K`` is a pair kernel over author topic
embeddings.  Links are Bernoulli with logistic probability ``sigmoid(f)``.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import expit, log_expit

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class NumericalError(RuntimeError):
    pass


class StaleGramError(RuntimeError):
    pass


@dataclass
class KernelParams:
    signal: float = 1.0
    lengthscale: float = 1.0
    noise: float = 1.0
    jitter: float = 1e-6

    def __post_init__(self):
        if self.signal <= 0 or self.lengthscale <= 0 or self.noise < 0 or self.jitter <= 0:
            raise ValueError(f"invalid kernel parameters {self}")


# ------------------------------------------------------------------ kernels
def _cos(x, y):
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("cosine similarity of a zero-norm vector")
    return float(np.dot(x, y) / (nx * ny))


def cosine_kernel(pair_a, pair_b, params=KernelParams()) -> float:
    """Symmetrized product of cosine similarities between two author pairs."""
    u, v = (np.asarray(x, float) for x in pair_a)
    up, vp = (np.asarray(x, float) for x in pair_b)
    if not (u.shape == v.shape == up.shape == vp.shape):
        raise ValueError("embedding dimensions differ")
    return params.signal ** 2 * (_cos(u, up) * _cos(v, vp) + _cos(u, vp) * _cos(v, up)) / 2.0


def original_kernel(pair_a, pair_b, params=KernelParams()) -> float:
    """Symmetrized squared-exponential kernel over concatenated pair inputs."""
    u, v = (np.asarray(x, float) for x in pair_a)
    up, vp = (np.asarray(x, float) for x in pair_b)
    if not (u.shape == v.shape == up.shape == vp.shape):
        raise ValueError("embedding dimensions differ")
    l2 = 2.0 * params.lengthscale ** 2
    same = np.sum((u - up) ** 2) + np.sum((v - vp) ** 2)
    swap = np.sum((u - vp) ** 2) + np.sum((v - up) ** 2)
    return params.signal ** 2 * (math.exp(-same / l2) + math.exp(-swap / l2)) / 2.0


def _unit_rows(E):
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cosine similarity of a zero-norm vector")
    return E / norms


def kernel_matrix(kind, E, pairs_a, pairs_b, params=KernelParams()):
    """Kernel between two lists of author pairs given the embedding matrix ``E``."""
    E = np.asarray(E, float)
    pa = np.asarray(pairs_a, dtype=np.int64).reshape(-1, 2)
    pb = np.asarray(pairs_b, dtype=np.int64).reshape(-1, 2)
    s2 = params.signal ** 2
    if kind == "cosine":
        U = _unit_rows(E)
        C = U @ U.T
        return s2 * (C[np.ix_(pa[:, 0], pb[:, 0])] * C[np.ix_(pa[:, 1], pb[:, 1])]
                     + C[np.ix_(pa[:, 0], pb[:, 1])] * C[np.ix_(pa[:, 1], pb[:, 0])]) / 2.0
    if kind == "original":
        sq = np.sum(E ** 2, axis=1)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * E @ E.T, 0.0)
        l2 = 2.0 * params.lengthscale ** 2
        same = D[np.ix_(pa[:, 0], pb[:, 0])] + D[np.ix_(pa[:, 1], pb[:, 1])]
        swap = D[np.ix_(pa[:, 0], pb[:, 1])] + D[np.ix_(pa[:, 1], pb[:, 0])]
        return s2 * (np.exp(-same / l2) + np.exp(-swap / l2)) / 2.0
    raise ValueError(f"unknown kernel {kind!r}")


def cosine_features(E, pairs, params=KernelParams()):
    """Explicit features with ``Phi @ Phi.T`` equal to the cosine pair kernel."""
    U = _unit_rows(np.asarray(E, float))
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a, b = U[pairs[:, 0]], U[pairs[:, 1]]
    outer = a[:, :, None] * b[:, None, :]
    phi = (outer + outer.transpose(0, 2, 1)) * (params.signal / 2.0)
    return phi.reshape(len(pairs), -1)


def gram(pairs, embeddings, kernel="cosine", params=KernelParams()):
    """Lower Cholesky factor of ``K + (sigma^2 + jitter) I`` with jitter escalation."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("empty pair set")
    K = kernel_matrix(kernel, embeddings, pairs, pairs, params)
    return factorize(K, params)


def factorize(K, params):
    jitter = params.jitter
    base = params.noise ** 2
    eye = np.eye(K.shape[0])
    while True:
        try:
            return cholesky(K + (base + jitter) * eye, lower=True)
        except np.linalg.LinAlgError:
            if jitter >= 1e-2:
                break
            jitter = min(jitter * 10.0, 1e-2)
    lam = np.linalg.eigvalsh((K + K.T) / 2.0).min()
    raise NumericalError(f"Gram matrix not positive definite (min eigenvalue {lam:.3e})")


def gaussian_logpdf_chol(f, L):
    """``log N(f; 0, L L^T)`` for a lower Cholesky factor ``L``."""
    alpha = solve_triangular(L, f, lower=True)
    return float(-0.5 * alpha @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(f) * LOG_2PI)


def network_loglik(f, x) -> float:
    """Bernoulli-logistic log-likelihood of link indicators ``x`` given ``f``."""
    f = np.asarray(f, float)
    x = np.asarray(x)
    if f.shape != x.shape:
        raise ValueError("f and x lengths differ")
    return float(np.sum(np.where(x > 0, log_expit(f), log_expit(-f))))


# ----------------------------------------------------------------- pair sets
@dataclass
class PairSet:
    pairs: np.ndarray       # (P, 2) with i < j
    x: np.ndarray           # (P,) link indicators

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.x = np.asarray(self.x, dtype=np.int8)
        if np.any(self.pairs[:, 0] >= self.pairs[:, 1]):
            raise ValueError("pairs must be ordered with i < j")
        keys = set(map(tuple, self.pairs.tolist()))
        if len(keys) != len(self.pairs):
            raise ValueError("duplicate pairs")

    def __len__(self):
        return len(self.pairs)

    def involving(self, author):
        return np.flatnonzero((self.pairs[:, 0] == author) | (self.pairs[:, 1] == author))


def all_pairs(n_authors):
    i, j = np.triu_indices(n_authors, k=1)
    return np.stack([i, j], axis=1)


def build_pairset(edges, n_authors, rng, nonlink_ratio=1.0, full=False, exclude=()):
    """All observed links plus ``nonlink_ratio`` times as many sampled non-links."""
    excl = {tuple(sorted(map(int, p))) for p in exclude}
    links = sorted({tuple(sorted(map(int, e))) for e in edges} - excl)
    link_set = set(links)
    cands = [tuple(p) for p in all_pairs(n_authors).tolist()
             if tuple(p) not in link_set and tuple(p) not in excl]
    if full:
        non = cands
    else:
        k = min(len(cands), int(round(nonlink_ratio * len(links))))
        pick = np.sort(rng.choice(len(cands), size=k, replace=False)) if k else []
        non = [cands[i] for i in pick]
    pairs = sorted(links + list(non))
    x = [1 if p in link_set else 0 for p in pairs]
    return PairSet(np.array(pairs, dtype=np.int64).reshape(-1, 2), np.array(x))


def author_embeddings(nu_counts, smoothing=0.5):
    """Smoothed, normalized topic counts per author (rows sum to one)."""
    c = np.asarray(nu_counts, float) + smoothing
    return c / c.sum(axis=1, keepdims=True)


# ------------------------------------------------------------------ GP state
@dataclass
class GpState:
    pairs: PairSet
    kernel: str = "cosine"
    params: KernelParams = field(default_factory=KernelParams)
    f: np.ndarray = None
    chol: np.ndarray = None
    fingerprint: str = ""
    embeddings: np.ndarray = None
    f_sum: np.ndarray = None
    f_count: int = 0

    def __post_init__(self):
        if self.f is None:
            self.f = np.zeros(len(self.pairs))
        if self.f_sum is None:
            self.f_sum = np.zeros(len(self.pairs))

    @staticmethod
    def fingerprint_of(embeddings):
        return hashlib.sha1(np.ascontiguousarray(embeddings, dtype=float).tobytes()
                            + str(np.shape(embeddings)).encode()).hexdigest()

    def refresh(self, embeddings):
        """Rebuild the Gram factor if the embeddings changed."""
        fp = self.fingerprint_of(embeddings)
        if fp != self.fingerprint or self.chol is None:
            self.chol = gram(self.pairs.pairs, embeddings, self.kernel, self.params)
            self.embeddings = np.array(embeddings, float)
            self.fingerprint = fp
        return self.chol

    def log_prior(self, f=None):
        return gaussian_logpdf_chol(self.f if f is None else f, self.chol)

    def loglik(self):
        return network_loglik(self.f, self.pairs.x)

    def accumulate(self):
        self.f_sum += self.f
        self.f_count += 1

    @property
    def f_mean(self):
        return self.f_sum / self.f_count if self.f_count else self.f.copy()

    def conditional_mean(self, new_pairs, embeddings=None, f=None):
        """GP conditional mean of ``f`` on new pairs given training values."""
        E = self.embeddings if embeddings is None else embeddings
        f = self.f_mean if f is None else f
        new_pairs = np.asarray(new_pairs, dtype=np.int64).reshape(-1, 2)
        if len(new_pairs) == 0:
            return np.zeros(0)
        train = self.pairs.pairs
        if embeddings is None or np.shares_memory(E, self.embeddings) or (
                E.shape == self.embeddings.shape and np.array_equal(E[:len(self.embeddings)],
                                                                    self.embeddings)):
            L = self.chol
        else:
            L = gram(train, E, self.kernel, self.params)
        Ks = kernel_matrix(self.kernel, E, new_pairs, train, self.params)
        return Ks @ cho_solve((L, True), f)


def mh_sweep_f(state: GpState, x=None, eps=0.2, rng=None, n_steps=20, embeddings=None,
               loglik=None):
    """Preconditioned Crank-Nicolson MH updates of ``f``; returns acceptance rate.

    ``loglik`` overrides the Bernoulli likelihood (used for prior-invariance checks).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("step size must lie in (0, 1)")
    if state.chol is None:
        raise StaleGramError("Gram factor has not been built")
    if embeddings is not None and state.fingerprint_of(embeddings) != state.fingerprint:
        raise StaleGramError("Gram factor is stale for the supplied embeddings")
    x = state.pairs.x if x is None else x
    if loglik is None:
        def loglik(f):
            return network_loglik(f, x)
    rho = math.sqrt(1.0 - eps * eps)
    L = state.chol
    cur = loglik(state.f)
    accepted = 0
    for _ in range(n_steps):
        g = L @ rng.standard_normal(L.shape[0])
        prop = rho * state.f + eps * g
        new = loglik(prop)
        if new >= cur or rng.random() < math.exp(new - cur):
            state.f, cur = prop, new
            accepted += 1
    return accepted / n_steps if n_steps else 0.0


def nu_move_log_ratio(state: GpState, author, old_embedding, new_embedding, embeddings=None):
    """Change in ``log N(f; 0, K + sigma^2 I)`` when one author's embedding moves.

    Uses the low-rank cosine feature map when possible; on factorization
    failure the move is reported as impossible (``-inf``).
    """
    E = np.array(state.embeddings if embeddings is None else embeddings, float)
    old = np.asarray(old_embedding, float)
    new = np.asarray(new_embedding, float)
    if np.array_equal(old, new):
        return 0.0
    idx = state.pairs.involving(author)
    if idx.size == 0:
        return 0.0
    E_old, E_new = E.copy(), E.copy()
    E_old[author] = old
    E_new[author] = new
    f = state.f
    try:
        if state.kernel == "cosine":
            return (_lowrank_logpdf(f, cosine_features(E_new, state.pairs.pairs, state.params),
                                    state.params)
                    - _lowrank_logpdf(f, cosine_features(E_old, state.pairs.pairs, state.params),
                                      state.params))
        L_new = gram(state.pairs.pairs, E_new, state.kernel, state.params)
        L_old = gram(state.pairs.pairs, E_old, state.kernel, state.params)
    except NumericalError as exc:
        logger.warning("rejecting author move: %s", exc)
        return -np.inf
    return gaussian_logpdf_chol(f, L_new) - gaussian_logpdf_chol(f, L_old)


def _lowrank_terms(G, h, ff, P, d):
    M = G + d * np.eye(G.shape[0])
    try:
        Lm = cholesky(M, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("low-rank system not positive definite") from None
    a = solve_triangular(Lm, h, lower=True)
    quad = (ff - a @ a) / d
    logdet = P * math.log(d) + 2.0 * np.log(np.diag(Lm)).sum() - G.shape[0] * math.log(d)
    return -0.5 * quad - 0.5 * logdet - 0.5 * P * LOG_2PI


def _lowrank_logpdf(f, Phi, params):
    d = params.noise ** 2 + params.jitter
    return _lowrank_terms(Phi.T @ Phi, Phi.T @ f, float(f @ f), len(f), d)


class NetworkCoupling:
    """Acceptance term tying author topic counts to the GP prior on ``f``.

    Passed to :meth:`TopicModel.sweep`; moves that change the customer counts
    of the coupled node (``nu``) are accepted with the ratio of GP prior
    densities before and after the move.
    """

    def __init__(self, gp: GpState, node_id="nu", smoothing=0.5):
        self.gp = gp
        self.node_id = node_id
        self.smoothing = smoothing
        self._pending = None
        self.lowrank = gp.kernel == "cosine"

    def embeddings(self, model):
        g = model.groups[self.node_id]
        live = model.live_topics() if model.finite_topics is None else slice(None)
        counts = g.n[:model.n_authors, :model.n_slots][:, live]
        return author_embeddings(counts, self.smoothing)

    def touches(self, *paths):
        nid = self.node_id
        for path in paths:
            for entry in path:
                if entry[0].id == nid:
                    return True
        return False

    def _full(self, E):
        f = self.gp.f
        if self.lowrank:
            Phi = cosine_features(E, self.gp.pairs.pairs, self.gp.params)
            d = self.gp.params.noise ** 2 + self.gp.params.jitter
            G, h = Phi.T @ Phi, Phi.T @ f
            return {"E": E, "Phi": Phi, "G": G, "h": h,
                    "logp": _lowrank_terms(G, h, float(f @ f), len(f), d)}
        L = gram(self.gp.pairs.pairs, E, self.gp.kernel, self.gp.params)
        return {"E": E, "logp": gaussian_logpdf_chol(f, L)}

    def begin_sweep(self, model):
        self.cur = self._full(self.embeddings(model))
        self._pending = None

    def propose(self, model):
        E = self.embeddings(model)
        cur = self.cur
        if E.shape == cur["E"].shape:
            changed = np.flatnonzero(np.any(E != cur["E"], axis=1))
            if changed.size == 0:
                self._pending = None
                return 0.0
        else:
            changed = None
        try:
            if changed is None or not self.lowrank:
                new = self._full(E)
            else:
                pairs = self.gp.pairs.pairs
                rows = np.flatnonzero(np.isin(pairs[:, 0], changed) | np.isin(pairs[:, 1], changed))
                Phi = cur["Phi"].copy()
                old_rows = Phi[rows]
                new_rows = cosine_features(E, pairs[rows], self.gp.params)
                Phi[rows] = new_rows
                f = self.gp.f
                G = cur["G"] - old_rows.T @ old_rows + new_rows.T @ new_rows
                h = cur["h"] + (new_rows - old_rows).T @ f[rows]
                d = self.gp.params.noise ** 2 + self.gp.params.jitter
                new = {"E": E, "Phi": Phi, "G": G, "h": h,
                       "logp": _lowrank_terms(G, h, float(f @ f), len(f), d)}
        except NumericalError as exc:
            logger.warning("rejecting author move: %s", exc)
            self._pending = None
            return -np.inf
        self._pending = new
        return new["logp"] - cur["logp"]

    def accept(self):
        if self._pending is not None:
            self.cur = self._pending
            self._pending = None
