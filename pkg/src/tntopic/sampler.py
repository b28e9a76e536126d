"""Collapsed Gibbs sampling over a compiled network of PDP nodes.

Every node family of the graph is stored as one :class:`NodeGroup` holding
dense count arrays: topic-side families are ``(instances, topic slots)`` and
vocabulary-side families are ``(topic slots, vocabulary)``.  A token is
resampled by removing its customer from both chains (topic side and
vocabulary side), scoring every topic by the product of the two recursive
predictives, and reseating along freshly sampled table paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .graph import CompiledGraph, GraphSpec, validate
from .pdp import PdpHyper, concentration_log_likelihood, sample_concentration, stirling

SCAN_STREAMS = ("hashtags", "words")


class StateError(RuntimeError):
    """Count bookkeeping found in an inconsistent state."""


class NodeGroup:
    """All instances of one node family in dense arrays."""

    def __init__(self, node_id, plate, domain, hyper, n_inst, n_dish):
        self.id = node_id
        self.plate = plate
        self.domain = domain
        self.hyper = hyper
        self.n = np.zeros((n_inst, n_dish), dtype=np.int64)
        self.t = np.zeros((n_inst, n_dish), dtype=np.int64)
        self.N = np.zeros(n_inst, dtype=np.int64)
        self.T = np.zeros(n_inst, dtype=np.int64)
        self.tp = None          # per-parent table attribution for mixture nodes
        self.parents = []       # list of (parent group, weight, instance map or None)
        self.frozen_upto = 0    # instances below this index are read-only
        # global and per-author topic nodes change rarely; their predictives are cached
        self.upper = domain == "topic" and plate in ("none", "author")

    def set_parents(self, parents):
        self.parents = parents
        if len(parents) > 1 and (self.tp is None or self.tp.shape[:2] != self.n.shape):
            self.tp = np.zeros(self.n.shape + (len(parents),), dtype=np.int64)

    @property
    def stirling(self):
        return stirling(self.hyper.discount)

    def grow_dish(self, size):
        pad = size - self.n.shape[1]
        self.n = np.pad(self.n, ((0, 0), (0, pad)))
        self.t = np.pad(self.t, ((0, 0), (0, pad)))
        if self.tp is not None:
            self.tp = np.pad(self.tp, ((0, 0), (0, pad), (0, 0)))

    def grow_inst(self, size):
        pad = size - self.n.shape[0]
        self.n = np.pad(self.n, ((0, pad), (0, 0)))
        self.t = np.pad(self.t, ((0, pad), (0, 0)))
        self.N = np.pad(self.N, (0, pad))
        self.T = np.pad(self.T, (0, pad))
        if self.tp is not None:
            self.tp = np.pad(self.tp, ((0, pad), (0, 0), (0, 0)))


@dataclass
class SweepStats:
    log_likelihood: float
    topics: int
    tables_created: int
    tables_removed: int
    coupled_moves: int = 0
    coupled_rejected: int = 0


@dataclass
class Document:
    author: int
    words: list
    hashtags: list


class TopicModel:
    """Collapsed state of a PDP network over a tokenized corpus.

    Parameters
    ----------
    graph : CompiledGraph or GraphSpec
    documents : list of Document
        ``author`` indexes the author plate; tokens are vocabulary indices.
    n_authors, vocab_size : int
    rng : numpy Generator
    mutate_no_table_removal : bool
        Test-only sampler mutation: tables are closed only when forced.
    """

    def __init__(self, graph, documents, n_authors, vocab_size, rng,
                 mutate_no_table_removal=False, capacity=16):
        if isinstance(graph, GraphSpec):
            graph = validate(graph)
        self.graph = graph
        self.rng = rng
        self.V = int(vocab_size)
        self.n_authors = int(n_authors)
        self.mutant = mutate_no_table_removal
        spec = graph.spec
        self.finite_topics = None if spec.topic_base is None else int(spec.topic_base)
        if self.finite_topics is not None:
            self.cap = self.n_slots = self.finite_topics
        else:
            self.cap, self.n_slots = max(int(capacity), 1), 0

        self.hypers = {name: PdpHyper(g.discount, g.concentration)
                       for name, g in spec.hyper_groups.items()}
        self.priors = {name: g.prior for name, g in spec.hyper_groups.items()}

        self.doc_author = np.array([d.author for d in documents], dtype=np.int64)
        self.n_docs = len(documents)
        self.groups = {}
        for nid in graph.order:
            nd = graph.node(nid)
            if nd.domain == "vocab":
                shape = (self.cap, self.V)
            else:
                shape = (self._plate_size(nd.plate), self.cap)
            self.groups[nid] = NodeGroup(nid, nd.plate, nd.domain, self.hypers[nd.group], *shape)
        self._wire()

        self.stream_names = [s for s in SCAN_STREAMS if s in graph.topic_leaf]
        self.tleaf = [self.groups[graph.topic_leaf[s]] for s in self.stream_names]
        self.vleaf = [self.groups[graph.vocab_leaf[s]] for s in self.stream_names]
        self.topic_root = self.groups[graph.topic_root]

        self.tok_doc = np.zeros(0, dtype=np.int64)
        self.tok_word = np.zeros(0, dtype=np.int64)
        self.tok_stream = np.zeros(0, dtype=np.int64)
        self.z = np.zeros(0, dtype=np.int64)
        self.seated = np.zeros(0, dtype=bool)
        self.doc_tokens = []
        self._append_tokens(documents, 0)
        self.created = self.removed = 0
        self.coupled_moves = self.coupled_rejected = 0
        self.new_topics = True
        self.cache_predictives = True
        self._ucache = None

    # ------------------------------------------------------------------ setup
    def _plate_size(self, plate):
        return {"none": 1, "author": self.n_authors, "document": self.n_docs}[plate]

    def _instance_map(self, child_plate, parent_plate):
        if child_plate == "topic":
            return None
        if parent_plate == "none":
            return np.zeros(self._plate_size(child_plate), dtype=np.int64)
        if child_plate == parent_plate:
            return np.arange(self._plate_size(child_plate), dtype=np.int64)
        if child_plate == "document" and parent_plate == "author":
            return self.doc_author.copy()
        raise ValueError(f"no instance map from {child_plate} to {parent_plate}")

    def _wire(self):
        for nid in self.graph.order:
            g = self.groups[nid]
            ps = []
            for pid, w in self.graph.parents[nid]:
                pg = self.groups[pid]
                ps.append((pg, w, self._instance_map(g.plate, pg.plate)))
            g.set_parents(ps)

    def _append_tokens(self, documents, doc_offset):
        docs, words, streams = [], [], []
        start = self.tok_doc.shape[0]
        for m, d in enumerate(documents):
            idx = []
            for s in self.stream_names:
                toks = d.hashtags if s == "hashtags" else d.words
                si = self.stream_names.index(s)
                for w in toks:
                    w = int(w)
                    if not 0 <= w < self.V:
                        raise ValueError(f"token {w} outside vocabulary of size {self.V}")
                    idx.append(start + len(docs))
                    docs.append(doc_offset + m)
                    words.append(w)
                    streams.append(si)
            self.doc_tokens.append(np.array(idx, dtype=np.int64))
        self.tok_doc = np.concatenate([self.tok_doc, np.array(docs, dtype=np.int64)])
        self.tok_word = np.concatenate([self.tok_word, np.array(words, dtype=np.int64)])
        self.tok_stream = np.concatenate([self.tok_stream, np.array(streams, dtype=np.int64)])
        self.z = np.concatenate([self.z, np.full(len(docs), -1, dtype=np.int64)])
        self.seated = np.concatenate([self.seated, np.zeros(len(docs), dtype=bool)])

    def add_documents(self, documents, n_new_authors=0):
        """Append documents (and authors) after construction, e.g. for fold-in."""
        self.n_authors += n_new_authors
        old_docs = self.n_docs
        self.doc_author = np.concatenate(
            [self.doc_author, np.array([d.author for d in documents], dtype=np.int64)])
        self.n_docs += len(documents)
        for g in self.groups.values():
            if g.domain == "topic" and g.plate in ("author", "document"):
                g.grow_inst(self._plate_size(g.plate))
        self._wire()
        first = self.tok_doc.shape[0]
        self._append_tokens(documents, old_docs)
        return np.arange(first, self.tok_doc.shape[0])

    def freeze_existing(self):
        """Make every current node instance read-only (global and trained state)."""
        for g in self.groups.values():
            g.frozen_upto = np.iinfo(np.int64).max if g.domain == "vocab" else g.n.shape[0]
        # the topic root is frozen, so fresh topics could never become live
        self.new_topics = False

    @property
    def n_tokens(self):
        return self.tok_doc.shape[0]

    # ------------------------------------------------------------- topic slots
    def _alloc_slot(self):
        if self._ucache:
            self._ucache.clear()
        k = self.n_slots
        self.n_slots += 1
        if self.n_slots > self.cap:
            self.cap *= 2
            for g in self.groups.values():
                if g.domain == "topic":
                    g.grow_dish(self.cap)
                else:
                    g.grow_inst(self.cap)
        return k

    def live_topics(self):
        """Boolean mask over slots of topics currently holding customers."""
        return self.topic_root.n[0, :self.n_slots] > 0

    def compact(self):
        """Renumber topics so live topics occupy slots ``0..K-1``."""
        if self.finite_topics is not None or not self.new_topics:
            return np.arange(self.n_slots)
        live = np.flatnonzero(self.live_topics())
        if live.size == self.n_slots:
            return live
        remap = np.full(self.n_slots, -1, dtype=np.int64)
        remap[live] = np.arange(live.size)
        k = live.size
        for g in self.groups.values():
            if g.domain == "topic":
                g.n[:, :k] = g.n[:, live]
                g.t[:, :k] = g.t[:, live]
                g.n[:, k:] = 0
                g.t[:, k:] = 0
                if g.tp is not None:
                    g.tp[:, :k] = g.tp[:, live]
                    g.tp[:, k:] = 0
            else:
                for arr in (g.n, g.t):
                    arr[:k] = arr[live]
                    arr[k:] = 0
                g.N[:k] = g.N[live]
                g.T[:k] = g.T[live]
                g.N[k:] = 0
                g.T[k:] = 0
                if g.tp is not None:
                    g.tp[:k] = g.tp[live]
                    g.tp[k:] = 0
        seated = self.seated
        self.z[seated] = remap[self.z[seated]]
        self.n_slots = k
        return live

    # ------------------------------------------------------------ predictives
    def _root_base(self):
        ns = self.n_slots
        if self.finite_topics is not None:
            return np.full(ns, 1.0 / self.finite_topics), 0.0
        return np.zeros(ns), 1.0

    def _topic_pred(self, g, inst, memo):
        key = (g.id, inst)
        hit = memo.get(key)
        if hit is not None:
            return hit
        uc = self._ucache if g.upper else None
        if uc is not None:
            hit = uc.get(key)
            if hit is not None:
                memo[key] = hit
                return hit
        if not g.parents:
            base_vec, base_new = self._root_base()
        else:
            base_vec, base_new = 0.0, 0.0
            for pg, w, pmap in g.parents:
                pv, pn = self._topic_pred(pg, int(pmap[inst]), memo)[:2]
                base_vec = base_vec + w * pv
                base_new += w * pn
        N = g.N[inst]
        if N == 0:
            vec, new = base_vec, base_new
        else:
            a, b = g.hyper.discount, g.hyper.concentration
            ns = self.n_slots
            c = b + a * g.T[inst]
            vec = (g.n[inst, :ns] - a * g.t[inst, :ns] + c * base_vec) / (N + b)
            new = c * base_new / (N + b)
        out = (vec, new, base_vec, base_new)
        memo[key] = out
        if uc is not None:
            uc[key] = out
        return out

    def topic_predictive(self, node_id, instance):
        """Predictive over topic slots plus a trailing new-topic entry."""
        g = self.groups[node_id]
        if g.domain != "topic":
            raise ValueError(f"{node_id!r} is not a topic-side node")
        if not 0 <= instance < g.n.shape[0]:
            raise IndexError(f"instance {instance} out of range for {node_id!r}")
        vec, new = self._topic_pred(g, int(instance), {})[:2]
        return np.append(np.broadcast_to(vec, (self.n_slots,)), new)

    def _vocab_pred(self, g, w, memo):
        """Probability of symbol ``w`` under ``g`` for every topic slot."""
        hit = memo.get(g.id)
        if hit is not None:
            return hit
        ns = self.n_slots
        if not g.parents:
            base_vec = np.full(ns, 1.0 / self.V)
            base_new = 1.0 / self.V
        else:
            base_vec, base_new = 0.0, 0.0
            for pg, wt, _ in g.parents:
                pv, pn = self._vocab_pred(pg, w, memo)[:2]
                base_vec = base_vec + wt * pv
                base_new += wt * pn
        a, b = g.hyper.discount, g.hyper.concentration
        N = g.N[:ns]
        occupied = N > 0
        denom = np.where(occupied, N + b, 1.0)
        vec = np.where(occupied,
                       (g.n[:ns, w] - a * g.t[:ns, w] + (b + a * g.T[:ns]) * base_vec) / denom,
                       base_vec)
        out = (vec, base_new, base_vec, base_new)
        memo[g.id] = out
        return out

    def vocab_distribution(self, node_id, topic):
        """Full predictive over the vocabulary for one topic slot."""
        return self._vocab_dist(self.groups[node_id], int(topic), {})

    def _vocab_dist(self, g, k, memo):
        hit = memo.get(g.id)
        if hit is not None:
            return hit
        if not g.parents:
            base = np.full(self.V, 1.0 / self.V)
        else:
            base = 0.0
            for pg, wt, _ in g.parents:
                base = base + wt * self._vocab_dist(pg, k, memo)
        N = g.N[k] if k < self.n_slots else 0
        if N == 0:
            out = base
        else:
            a, b = g.hyper.discount, g.hyper.concentration
            out = (g.n[k] - a * g.t[k] + (b + a * g.T[k]) * base) / (N + b)
        memo[g.id] = out
        return out

    # ------------------------------------------------------- seating cascades
    def _remove(self, g, inst, k, path):
        rng = self.rng
        while True:
            if inst < g.frozen_upto:
                return
            nk = g.n[inst, k]
            tk = g.t[inst, k]
            if nk <= 0:
                raise StateError(f"remove from empty dish {k} at {g.id}[{inst}]")
            if nk == 1:
                removed = True
            elif self.mutant:
                removed = tk >= nk
            elif tk == 1:
                removed = False
            else:
                removed = rng.random() < g.stirling.removal_prob(int(nk), int(tk))
            g.n[inst, k] = nk - 1
            g.N[inst] -= 1
            if g.upper and self._ucache:
                self._ucache.clear()
            if not removed:
                path.append((g, inst, k, False, -1))
                return
            g.t[inst, k] = tk - 1
            g.T[inst] -= 1
            self.removed += 1
            if not g.parents:
                path.append((g, inst, k, True, -1))
                return
            j = 0
            if g.tp is not None:
                counts = g.tp[inst, k]
                u = rng.random() * tk
                acc = 0
                for j in range(counts.shape[0]):
                    acc += counts[j]
                    if u < acc:
                        break
                counts[j] -= 1
            path.append((g, inst, k, True, j))
            pg, _, pmap = g.parents[j]
            if pmap is not None:
                inst = int(pmap[inst])
            g = pg

    def _add(self, g, inst, k, is_new, base_of, path):
        """Seat a customer of dish ``k``; ``base_of(group, inst)`` gives (vec, new)."""
        rng = self.rng
        while True:
            if inst < g.frozen_upto:
                return
            nk = g.n[inst, k]
            a = g.hyper.discount
            if nk == 0:
                create = True
            else:
                bv, bn = base_of(g, inst)[2:]
                base_k = bn if is_new else bv[k if g.domain == "topic" else inst]
                w_new = (g.hyper.concentration + a * g.T[inst]) * base_k
                w_old = nk - a * g.t[inst, k]
                create = rng.random() * (w_new + w_old) < w_new
            g.n[inst, k] = nk + 1
            g.N[inst] += 1
            if g.upper and self._ucache:
                self._ucache.clear()
            if not create:
                path.append((g, inst, k, False, -1))
                return
            g.t[inst, k] += 1
            g.T[inst] += 1
            self.created += 1
            if not g.parents:
                path.append((g, inst, k, True, -1))
                return
            j = 0
            if len(g.parents) > 1:
                ws = []
                for pg, wt, pmap in g.parents:
                    pinst = inst if pmap is None else int(pmap[inst])
                    pv, pn = base_of(pg, pinst)[:2]
                    ws.append(wt * (pn if is_new else pv[k if g.domain == "topic" else inst]))
                u = rng.random() * sum(ws)
                acc = 0.0
                for j, wj in enumerate(ws):
                    acc += wj
                    if u < acc:
                        break
                g.tp[inst, k, j] += 1
            path.append((g, inst, k, True, j))
            pg, _, pmap = g.parents[j]
            if pmap is not None:
                inst = int(pmap[inst])
            g = pg

    @staticmethod
    def _undo_add(path):
        for g, inst, k, created, j in reversed(path):
            g.n[inst, k] -= 1
            g.N[inst] -= 1
            if created:
                g.t[inst, k] -= 1
                g.T[inst] -= 1
                if j >= 0 and g.tp is not None:
                    g.tp[inst, k, j] -= 1

    @staticmethod
    def _redo_remove(path):
        for g, inst, k, removed, j in path:
            g.n[inst, k] += 1
            g.N[inst] += 1
            if removed:
                g.t[inst, k] += 1
                g.T[inst] += 1
                if j >= 0 and g.tp is not None:
                    g.tp[inst, k, j] += 1

    # ---------------------------------------------------------- token moves
    def _score(self, i, tmemo, vmemo):
        s = self.tok_stream[i]
        tvec, tnew = self._topic_pred(self.tleaf[s], int(self.tok_doc[i]), tmemo)[:2]
        vvec, vnew = self._vocab_pred(self.vleaf[s], int(self.tok_word[i]), vmemo)[:2]
        if not self.new_topics:
            tnew = 0.0
        return tvec * vvec, tnew * vnew

    def _draw(self, p, pnew):
        cum = np.cumsum(p)
        psum = cum[-1] if cum.shape[0] else 0.0
        u = self.rng.random() * (psum + pnew)
        if u < psum or pnew <= 0.0:
            k = int(np.searchsorted(cum, u, side="right"))
            return min(k, cum.shape[0] - 1), False
        return -1, True

    def _seat(self, i, tmemo, vmemo, k, is_new):
        s = self.tok_stream[i]
        inst = int(self.tok_doc[i])
        w = int(self.tok_word[i])
        if is_new:
            k = self._alloc_slot()
        t_path, v_path = [], []
        self._add(self.tleaf[s], inst, k, is_new,
                  lambda g, j: self._topic_pred(g, j, tmemo), t_path)
        self._add(self.vleaf[s], k, w, is_new,
                  lambda g, j: self._vocab_pred(g, w, vmemo), v_path)
        self.z[i] = k
        self.seated[i] = True
        return k, t_path, v_path

    def seat_token(self, i):
        """Seat an unseated token from its conditional given the current state."""
        tmemo, vmemo = {}, {}
        p, pnew = self._score(i, tmemo, vmemo)
        k, is_new = self._draw(p, pnew)
        return self._seat(i, tmemo, vmemo, k, is_new)[0]

    def unseat_token(self, i):
        s = self.tok_stream[i]
        k = int(self.z[i])
        t_path, v_path = [], []
        self._remove(self.tleaf[s], int(self.tok_doc[i]), k, t_path)
        self._remove(self.vleaf[s], k, int(self.tok_word[i]), v_path)
        self.seated[i] = False
        return t_path, v_path

    def conditional(self, i):
        """Normalized Gibbs conditional of an *unseated* token (slots + new)."""
        p, pnew = self._score(i, {}, {})
        out = np.append(p, pnew)
        return out / out.sum()

    def resample_token(self, i, coupling=None):
        """One collapsed Gibbs move for token ``i``; returns its new topic.

        ``coupling`` (optional) has ``touches(paths)``, ``propose(model)`` and
        ``accept()``; when the move touches coupled nodes it is accepted with
        probability ``min(1, exp(propose(model)))`` and otherwise undone exactly.
        """
        old_k = int(self.z[i])
        old_slots = self.n_slots
        rt, rv = self.unseat_token(i)
        tmemo, vmemo = {}, {}
        p, pnew = self._score(i, tmemo, vmemo)
        k, is_new = self._draw(p, pnew)
        k, at, av = self._seat(i, tmemo, vmemo, k, is_new)
        if coupling is not None and coupling.touches(rt, at):
            self.coupled_moves += 1
            log_ratio = coupling.propose(self)
            if log_ratio >= 0.0 or self.rng.random() < math.exp(log_ratio):
                coupling.accept()
            else:
                self.coupled_rejected += 1
                self._undo_add(av)
                self._undo_add(at)
                self._redo_remove(rt)
                self._redo_remove(rv)
                if self._ucache:
                    self._ucache.clear()
                self.z[i] = old_k
                self.n_slots = old_slots
                return old_k
        return k

    def initialize(self, tokens=None):
        """Seat tokens sequentially (scan order) from their running conditionals."""
        tokens = self.scan_order() if tokens is None else tokens
        for i in tokens:
            if not self.seated[i]:
                self.seat_token(int(i))

    def scan_order(self, docs=None):
        docs = range(self.n_docs) if docs is None else docs
        parts = [self.doc_tokens[m] for m in docs]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def sweep(self, coupling=None, tokens=None, compute_ll=True):
        """Resample every token once in scan order; compacts topics afterwards."""
        self.created = self.removed = 0
        self.coupled_moves = self.coupled_rejected = 0
        tokens = self.scan_order() if tokens is None else tokens
        if coupling is not None:
            coupling.begin_sweep(self)
        self._ucache = {} if self.cache_predictives else None
        try:
            for i in tokens:
                self.resample_token(int(i), coupling)
        finally:
            self._ucache = None
        self.compact()
        ll = self.log_likelihood() if compute_ll else float("nan")
        return SweepStats(ll, self.num_topics(), self.created, self.removed,
                          self.coupled_moves, self.coupled_rejected)

    def num_topics(self):
        return int(self.live_topics().sum())

    # ------------------------------------------------------------ likelihood
    def log_likelihood(self):
        """Collapsed joint log probability of all seatings and observed symbols."""
        ns = self.n_slots
        ll = 0.0
        for g in self.groups.values():
            a, b = g.hyper.discount, g.hyper.concentration
            if g.domain == "topic":
                n, t, N, T = g.n[:, :ns], g.t[:, :ns], g.N, g.T
                tp = None if g.tp is None else g.tp[:, :ns]
            else:
                n, t, N, T = g.n[:ns], g.t[:ns], g.N[:ns], g.T[:ns]
                tp = None if g.tp is None else g.tp[:ns]
            occ = N > 0
            if not occ.any():
                continue
            ll += concentration_log_likelihood(b, a, N[occ], T[occ])
            live = n > 0
            ll += float(g.stirling.log(n[live], t[live]).sum())
            if tp is not None:
                ws = np.array([w for _, w, _ in g.parents])
                ll += float(np.sum(gammaln(t + 1)) - np.sum(gammaln(tp + 1))
                            + np.sum(tp * np.log(ws)))
            if not g.parents:
                if g.domain == "vocab":
                    ll -= float(T.sum()) * math.log(self.V)
                elif self.finite_topics is not None:
                    ll -= float(T.sum()) * math.log(self.finite_topics)
        return ll

    # --------------------------------------------------------- hyperparameters
    def resample_concentrations(self, n_iter=1):
        out = {}
        for name, hyper in self.hypers.items():
            Ns, Ts = [], []
            for g in self.groups.values():
                if g.hyper is not hyper:
                    continue
                if g.domain == "topic":
                    Ns.append(g.N)
                    Ts.append(g.T)
                else:
                    Ns.append(g.N[:self.n_slots])
                    Ts.append(g.T[:self.n_slots])
            N = np.concatenate(Ns) if Ns else np.zeros(0)
            T = np.concatenate(Ts) if Ts else np.zeros(0)
            hyper.concentration = sample_concentration(
                None, self.priors[name], self.rng, n_iter=n_iter,
                counts=(hyper.discount, hyper.concentration, N, T))
            out[name] = hyper.concentration
        return out

    # ---------------------------------------------------------------- checks
    def check_consistency(self):
        """Verify seating invariants and cross-level customer/table agreement."""
        ns = self.n_slots
        expect = {gid: np.zeros_like(g.n) for gid, g in self.groups.items()}
        for i in np.flatnonzero(self.seated):
            s = self.tok_stream[i]
            expect[self.tleaf[s].id][self.tok_doc[i], self.z[i]] += 1
            expect[self.vleaf[s].id][self.z[i], self.tok_word[i]] += 1
        for nid in reversed(self.graph.order):
            g = self.groups[nid]
            if np.any(g.t > g.n) or np.any((g.n > 0) != (g.t > 0)):
                raise StateError(f"seating invariant broken at {nid}")
            if not np.array_equal(g.N, g.n.sum(1)) or not np.array_equal(g.T, g.t.sum(1)):
                raise StateError(f"totals out of sync at {nid}")
            if g.tp is not None and not np.array_equal(g.tp.sum(-1), g.t):
                raise StateError(f"parent attribution out of sync at {nid}")
            for j, (pg, _, pmap) in enumerate(g.parents):
                tabs = g.t if g.tp is None else g.tp[..., j]
                if pmap is None:
                    expect[pg.id] += tabs
                else:
                    np.add.at(expect[pg.id], pmap, tabs)
        for nid, g in self.groups.items():
            if g.frozen_upto:
                continue
            if not np.array_equal(expect[nid], g.n):
                raise StateError(f"cross-level count mismatch at {nid}")
        if self.finite_topics is None and np.any(self.topic_root.n[:, ns:] != 0):
            raise StateError("customers beyond the active topic range")
        return True

    # ----------------------------------------------------------- persistence
    def state_arrays(self):
        arrs = {
            "tok_doc": self.tok_doc, "tok_word": self.tok_word,
            "tok_stream": self.tok_stream, "z": self.z, "seated": self.seated,
            "doc_author": self.doc_author,
        }
        for gid, g in self.groups.items():
            for f in ("n", "t", "N", "T"):
                arrs[f"g.{gid}.{f}"] = getattr(g, f)
            if g.tp is not None:
                arrs[f"g.{gid}.tp"] = g.tp
        return arrs

    def state_meta(self):
        return {
            "graph": self.graph.spec.to_dict(),
            "V": self.V,
            "n_authors": self.n_authors,
            "n_docs": self.n_docs,
            "n_slots": self.n_slots,
            "cap": self.cap,
            "stream_names": self.stream_names,
            "concentrations": {k: h.concentration for k, h in self.hypers.items()},
            "mutant": self.mutant,
            "new_topics": self.new_topics,
            "doc_lengths": [int(len(d)) for d in self.doc_tokens],
        }

    @classmethod
    def from_state(cls, meta, arrs, rng):
        spec = GraphSpec.from_dict(meta["graph"])
        self = cls.__new__(cls)
        graph = validate(spec)
        self.graph = graph
        self.rng = rng
        self.V = meta["V"]
        self.n_authors = meta["n_authors"]
        self.n_docs = meta["n_docs"]
        self.mutant = meta["mutant"]
        self.finite_topics = None if spec.topic_base is None else int(spec.topic_base)
        self.cap = meta["cap"]
        self.n_slots = meta["n_slots"]
        self.hypers = {name: PdpHyper(g.discount, meta["concentrations"][name])
                       for name, g in spec.hyper_groups.items()}
        self.priors = {name: g.prior for name, g in spec.hyper_groups.items()}
        self.doc_author = np.array(arrs["doc_author"], dtype=np.int64)
        self.groups = {}
        for nid in graph.order:
            nd = graph.node(nid)
            g = NodeGroup(nid, nd.plate, nd.domain, self.hypers[nd.group], 0, 0)
            for f in ("n", "t", "N", "T"):
                setattr(g, f, np.array(arrs[f"g.{nid}.{f}"], dtype=np.int64))
            self.groups[nid] = g
        self._wire()
        for nid, g in self.groups.items():
            if f"g.{nid}.tp" in arrs:
                g.tp = np.array(arrs[f"g.{nid}.tp"], dtype=np.int64)
        self.stream_names = list(meta["stream_names"])
        self.tleaf = [self.groups[graph.topic_leaf[s]] for s in self.stream_names]
        self.vleaf = [self.groups[graph.vocab_leaf[s]] for s in self.stream_names]
        self.topic_root = self.groups[graph.topic_root]
        for f in ("tok_doc", "tok_word", "tok_stream", "z"):
            setattr(self, f, np.array(arrs[f], dtype=np.int64))
        self.seated = np.array(arrs["seated"], dtype=bool)
        bounds = np.cumsum([0] + meta["doc_lengths"])
        order = np.arange(self.tok_doc.shape[0])
        self.doc_tokens = [order[bounds[m]:bounds[m + 1]] for m in range(self.n_docs)]
        self.created = self.removed = 0
        self.coupled_moves = self.coupled_rejected = 0
        self.new_topics = bool(meta.get("new_topics", True))
        self.cache_predictives = True
        self._ucache = None
        return self


def forward_generate(spec, truncation, documents_shape, vocab_size, rng, n_authors=None):
    """Ancestral sample of a corpus from the collapsed model with ``truncation`` topics.

    ``documents_shape`` is a list of ``(author, n_words, n_hashtags)``.  The
    topic root gets a uniform base over ``truncation`` topics and tokens are
    generated one at a time from the exact sequential predictive, so the result
    is a draw from the same joint distribution the Gibbs sampler targets.
    Returns ``(model, documents)`` where ``model`` holds all latent counts and
    ``model.z`` the topic of every token.
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    spec = GraphSpec.from_dict(spec.to_dict())
    spec.topic_base = int(truncation)
    graph = validate(spec)
    docs = [Document(int(a), [0] * int(nw), [0] * int(nh)) for a, nw, nh in documents_shape]
    if n_authors is None:
        n_authors = max((d.author for d in docs), default=-1) + 1
    model = TopicModel(graph, docs, n_authors, vocab_size, rng)
    for i in model.scan_order():
        generate_token(model, int(i))
    for m, d in enumerate(docs):
        idx = model.doc_tokens[m]
        for s, name in enumerate(model.stream_names):
            toks = [int(model.tok_word[i]) for i in idx if model.tok_stream[i] == s]
            if name == "words":
                d.words = toks
            else:
                d.hashtags = toks
    return model, docs


def generate_token(model, i):
    """Sample topic then symbol for token ``i`` from the sequential predictive and seat it."""
    s = model.tok_stream[i]
    inst = int(model.tok_doc[i])
    tmemo = {}
    tvec, tnew = model._topic_pred(model.tleaf[s], inst, tmemo)[:2]
    k, is_new = model._draw(np.asarray(np.broadcast_to(tvec, (model.n_slots,))), tnew)
    slot = model.n_slots if is_new else k
    dist = model._vocab_dist(model.vleaf[s], slot, {})
    cum = np.cumsum(dist)
    w = int(np.searchsorted(cum, model.rng.random() * cum[-1], side="right"))
    model.tok_word[i] = min(w, model.V - 1)
    model._seat(i, tmemo, {}, k, is_new)
    return k


def regenerate_symbols(model):
    """Redraw every symbol given the topic assignments (vocabulary side only)."""
    for g in model.groups.values():
        if g.domain == "vocab":
            g.n[:] = 0
            g.t[:] = 0
            g.N[:] = 0
            g.T[:] = 0
            if g.tp is not None:
                g.tp[:] = 0
    for i in model.scan_order():
        i = int(i)
        s = model.tok_stream[i]
        k = int(model.z[i])
        dist = model._vocab_dist(model.vleaf[s], k, {})
        cum = np.cumsum(dist)
        w = int(np.searchsorted(cum, model.rng.random() * cum[-1], side="right"))
        w = min(w, model.V - 1)
        model.tok_word[i] = w
        vmemo = {}
        model._vocab_pred(model.vleaf[s], w, vmemo)
        model._add(model.vleaf[s], k, w, False,
                   lambda g, j: model._vocab_pred(g, w, vmemo), [])
