"""Declarative description of a network of PDP nodes and its validation.

A graph is written at the *template* level: one entry per node family, each
living on a plate (``none``, ``author``, ``document`` or ``topic``).  Nodes on
the ``topic`` plate are distributions over the vocabulary, one instance per
topic; every other node is a distribution over topics.  Each observation
stream (``words``/``hashtags``) names a topic-side leaf that supplies its
topic and a vocabulary-side leaf that supplies its symbol.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .pdp import ConcentrationPrior

PLATES = ("none", "author", "document", "topic")
STREAMS = ("words", "hashtags")

# child plate -> parent plates it may point at
_PLATE_PARENTS = {
    "none": {"none"},
    "author": {"none", "author"},
    "document": {"none", "author", "document"},
    "topic": {"topic"},
}


class GraphValidationError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid graph:\n  " + "\n  ".join(self.errors))


@dataclass
class HyperGroup:
    discount: float
    concentration: float = 0.5
    prior: ConcentrationPrior = field(default_factory=ConcentrationPrior)


@dataclass
class NodeSpec:
    id: str
    role: str = ""
    group: str = "topic"
    plate: str = "none"

    @property
    def domain(self) -> str:
        return "vocab" if self.plate == "topic" else "topic"


@dataclass
class EdgeSpec:
    child: str
    parent: str
    weight: float = 1.0


@dataclass
class LeafSpec:
    node: str
    stream: str


@dataclass
class GraphSpec:
    nodes: list
    edges: list
    leaves: list
    hyper_groups: dict
    # None: unbounded topic space; an int K: uniform base over K topics.
    topic_base: int | None = None
    name: str = ""

    def node(self, node_id: str) -> NodeSpec:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)

    def parents(self, node_id: str) -> list:
        return [e for e in self.edges if e.child == node_id]

    @property
    def streams(self) -> list:
        out = []
        for lf in self.leaves:
            if lf.stream not in out:
                out.append(lf.stream)
        return out

    def to_dict(self) -> dict:
        groups = {}
        for name, g in self.hyper_groups.items():
            groups[name] = {
                "discount": g.discount,
                "concentration": g.concentration,
                "prior": {"shape": g.prior.shape, "rate": g.prior.rate},
            }
        return {
            "name": self.name,
            "topic_base": self.topic_base,
            "nodes": [asdict(n) for n in self.nodes],
            "edges": [asdict(e) for e in self.edges],
            "leaves": [asdict(lf) for lf in self.leaves],
            "hyper_groups": groups,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        groups = {}
        for name, g in d.get("hyper_groups", {}).items():
            prior = g.get("prior", {})
            groups[name] = HyperGroup(
                float(g["discount"]), float(g.get("concentration", 0.5)),
                ConcentrationPrior(float(prior.get("shape", 0.1)), float(prior.get("rate", 0.1))),
            )
        return cls(
            nodes=[NodeSpec(**n) for n in d.get("nodes", [])],
            edges=[EdgeSpec(**e) for e in d.get("edges", [])],
            leaves=[LeafSpec(**lf) for lf in d.get("leaves", [])],
            hyper_groups=groups,
            topic_base=d.get("topic_base"),
            name=d.get("name", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "GraphSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class CompiledGraph:
    spec: GraphSpec
    order: list                     # template ids, parents before children
    parents: dict                   # id -> list of (parent id, normalized weight)
    children: dict                  # id -> list of child ids
    topic_leaf: dict                # stream -> topic-side leaf id
    vocab_leaf: dict                # stream -> vocabulary-side leaf id
    topic_root: str
    chains: dict                    # leaf id -> ancestor ids in topo order

    @property
    def streams(self) -> list:
        return list(self.topic_leaf)

    def node(self, node_id: str) -> NodeSpec:
        return self.spec.node(node_id)

    def plate_sizes(self, n_authors: int, n_documents: int, n_topics: int) -> dict:
        sizes = {"none": 1, "author": n_authors, "document": n_documents, "topic": n_topics}
        return {nid: sizes[self.node(nid).plate] for nid in self.order}

    def node_count(self, n_authors: int, n_documents: int, n_topics: int) -> int:
        return sum(self.plate_sizes(n_authors, n_documents, n_topics).values())


def _topo_order(ids, edges):
    """Kahn's algorithm; returns (order, nodes left on a cycle)."""
    indeg = {i: 0 for i in ids}
    kids = {i: [] for i in ids}
    for e in edges:
        indeg[e.child] += 1
        kids[e.parent].append(e.child)
    ready = [i for i in ids if indeg[i] == 0]
    order = []
    while ready:
        cur = ready.pop(0)
        order.append(cur)
        for c in kids[cur]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return order, [i for i in ids if indeg[i] > 0]


def validate(spec: GraphSpec) -> CompiledGraph:
    """Check every structural rule and compile; raises with the full error list."""
    errors = []
    ids = [n.id for n in spec.nodes]
    seen = set()
    for nid in ids:
        if nid in seen:
            errors.append(f"duplicate node id {nid!r}")
        seen.add(nid)
    by_id = {n.id: n for n in spec.nodes}
    for n in spec.nodes:
        if n.plate not in PLATES:
            errors.append(f"node {n.id!r}: unknown plate {n.plate!r}")
        if n.group not in spec.hyper_groups:
            errors.append(f"node {n.id!r}: unknown hyper group {n.group!r}")
    for name, g in spec.hyper_groups.items():
        if not 0.0 <= g.discount < 1.0 or not g.concentration + g.discount > 0:
            errors.append(f"hyper group {name!r}: invalid (discount={g.discount}, "
                          f"concentration={g.concentration})")

    good_edges = []
    pairs = set()
    for e in spec.edges:
        bad = False
        for end in (e.child, e.parent):
            if end not in by_id:
                errors.append(f"edge {e.child}->{e.parent}: unknown node {end!r}")
                bad = True
        if not (np.isfinite(e.weight) and e.weight > 0):
            errors.append(f"edge {e.child}->{e.parent}: mixture weight must be positive "
                          f"and finite, got {e.weight}")
            bad = True
        if (e.child, e.parent) in pairs:
            errors.append(f"edge {e.child}->{e.parent}: duplicated")
            bad = True
        pairs.add((e.child, e.parent))
        if bad:
            continue
        cp, pp = by_id[e.child].plate, by_id[e.parent].plate
        if cp in _PLATE_PARENTS and pp not in _PLATE_PARENTS[cp]:
            errors.append(f"edge {e.child}->{e.parent}: plate {cp!r} cannot draw from "
                          f"plate {pp!r}")
            continue
        good_edges.append(e)

    order, cyclic = _topo_order(ids if len(seen) == len(ids) else list(by_id), good_edges)
    if cyclic:
        errors.append("cycle detected among nodes " + ", ".join(sorted(cyclic)))

    parents = {i: [] for i in by_id}
    children = {i: [] for i in by_id}
    for e in good_edges:
        parents[e.child].append(e)
        children[e.parent].append(e.child)

    topic_leaf, vocab_leaf = {}, {}
    for lf in spec.leaves:
        if lf.node not in by_id:
            errors.append(f"leaf {lf.node!r}: unknown node")
            continue
        if lf.stream not in STREAMS:
            errors.append(f"leaf {lf.node!r}: missing or unknown observation stream "
                          f"{lf.stream!r}")
            continue
        node = by_id[lf.node]
        target = vocab_leaf if node.domain == "vocab" else topic_leaf
        if lf.stream in target:
            errors.append(f"stream {lf.stream!r}: more than one {node.domain}-side leaf")
        target[lf.stream] = lf.node
        if node.domain == "topic" and node.plate != "document":
            errors.append(f"leaf {lf.node!r}: topic-side leaves must be per-document")
    for s in set(topic_leaf) | set(vocab_leaf):
        if s not in topic_leaf:
            errors.append(f"stream {s!r}: no topic-side leaf")
        if s not in vocab_leaf:
            errors.append(f"stream {s!r}: no vocabulary-side leaf")
    if not spec.leaves:
        errors.append("graph has no leaves")

    chains = {}
    roots_used = set()
    topic_roots = set()
    if not cyclic:
        pos = {nid: i for i, nid in enumerate(order)}
        for leaf in set(topic_leaf.values()) | set(vocab_leaf.values()):
            anc, stack = set(), [leaf]
            while stack:
                cur = stack.pop()
                if cur in anc:
                    continue
                anc.add(cur)
                stack.extend(e.parent for e in parents[cur])
            roots = [a for a in anc if not parents[a]]
            if len(roots) != 1:
                errors.append(f"leaf {leaf!r}: ancestry reaches {len(roots)} roots "
                              f"({', '.join(sorted(roots))}), expected exactly one")
            roots_used.update(roots)
            if by_id[leaf].domain == "topic":
                topic_roots.update(roots)
            chains[leaf] = sorted(anc, key=pos.get)
        reachable = set().union(*chains.values()) if chains else set()
        for nid in ids:
            if nid not in reachable:
                errors.append(f"orphan node {nid!r}: not an ancestor of any leaf")
        for r in roots_used:
            if by_id[r].plate not in ("none", "topic"):
                errors.append(f"root {r!r} must be global or per-topic")
    if len(topic_roots) > 1:
        errors.append("topic-side leaves must share one root, found "
                      + ", ".join(sorted(topic_roots)))
    if spec.topic_base is not None and int(spec.topic_base) < 1:
        errors.append(f"topic_base must be >= 1 or null, got {spec.topic_base}")

    if errors:
        raise GraphValidationError(errors)

    norm_parents = {}
    for nid in order:
        es = parents[nid]
        tot = sum(e.weight for e in es)
        norm_parents[nid] = [(e.parent, e.weight / tot) for e in es]
    return CompiledGraph(
        spec=spec,
        order=order,
        parents=norm_parents,
        children=children,
        topic_leaf=topic_leaf,
        vocab_leaf=vocab_leaf,
        topic_root=next(iter(topic_roots)),
        chains=chains,
    )
