"""Graph builders for the Twitter-Network model, its baselines and ablations."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .graph import EdgeSpec, GraphSpec, HyperGroup, LeafSpec, NodeSpec, validate
from .pdp import ConcentrationPrior

ROLES = {
    "mu0": "μ0 global topic distribution",
    "nu": "ν author topic distribution",
    "mu1": "μ1 miscellaneous topic distribution",
    "theta_p": "θ' document base topic distribution",
    "eta": "η document hashtag topic distribution",
    "theta": "θ document word topic distribution",
    "psi": "ψ topic word distribution",
    "gamma": "γ topic hashtag distribution",
}

ABLATIONS = ("author", "hashtag", "mu1", "word_tag_link", "power_law", "network")

ABLATION_ROWS = (
    ("No Author", "author"),
    ("No Hashtag", "hashtag"),
    ("No μ1 node", "mu1"),
    ("No Word-tag link", "word_tag_link"),
    ("No Power-law", "power_law"),
    ("No Network", "network"),
    ("Full TN", None),
)


@dataclass
class TnConfig:
    discount_topic: float = 0.5
    discount_vocab: float = 0.7
    concentration_init: float = 0.5
    concentration_prior: ConcentrationPrior = field(default_factory=ConcentrationPrior)
    # mixture weight per edge, keyed "child<-parent"; missing edges weigh 1
    lambdas: dict = field(default_factory=dict)
    use_author: bool = True
    use_hashtag: bool = True
    use_mu1: bool = True
    use_word_tag_link: bool = True
    use_power_law: bool = True
    use_network: bool = True

    def ablate(self, *names) -> "TnConfig":
        unknown = set(names) - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablation(s): {', '.join(sorted(unknown))}")
        return replace(self, **{f"use_{n}": False for n in names})

    def discounts(self):
        if not self.use_power_law:
            return 0.0, 0.0
        return self.discount_topic, self.discount_vocab


@dataclass
class ModelMeta:
    n_authors: int
    doc_author: np.ndarray
    vocab_size: int

    def check(self):
        da = np.asarray(self.doc_author)
        if da.size and (da.min() < 0 or da.max() >= self.n_authors):
            raise ValueError("document mapped to an unknown author")
        if self.vocab_size < 1:
            raise ValueError("vocabulary is empty")


def _groups(config):
    a_t, a_v = config.discounts()
    return {
        "topic": HyperGroup(a_t, config.concentration_init, config.concentration_prior),
        "vocab": HyperGroup(a_v, config.concentration_init, config.concentration_prior),
    }


def _edge(config, child, parent):
    return EdgeSpec(child, parent, float(config.lambdas.get(f"{child}<-{parent}", 1.0)))


def build_tn_graph(config: TnConfig, meta: ModelMeta | None = None) -> GraphSpec:
    """Wire the Twitter-Network graph with the ablation flags of ``config`` applied."""
    if meta is not None:
        meta.check()
    if not config.use_author and not config.use_mu1:
        raise ValueError("removing both the author nodes and μ1 leaves θ' without a parent")
    ids = ["mu0"]
    edges = []
    if config.use_author:
        ids.append("nu")
        edges.append(_edge(config, "nu", "mu0"))
    if config.use_mu1:
        ids.append("mu1")
        edges.append(_edge(config, "mu1", "mu0"))
    ids.append("theta_p")
    if config.use_author:
        edges.append(_edge(config, "theta_p", "nu"))
    if config.use_mu1:
        edges.append(_edge(config, "theta_p", "mu1"))
    if config.use_hashtag:
        ids.append("eta")
        edges.append(_edge(config, "eta", "theta_p"))
    ids.append("theta")
    edges.append(_edge(config, "theta", "theta_p"))
    if config.use_hashtag and config.use_word_tag_link:
        edges.append(_edge(config, "theta", "eta"))
    ids.append("psi")
    leaves = [LeafSpec("theta", "words"), LeafSpec("psi", "words")]
    if config.use_hashtag:
        ids.append("gamma")
        edges.append(_edge(config, "gamma", "psi"))
        leaves += [LeafSpec("eta", "hashtags"), LeafSpec("gamma", "hashtags")]
    plates = {"mu0": "none", "mu1": "none", "nu": "author", "theta_p": "document",
              "eta": "document", "theta": "document", "psi": "topic", "gamma": "topic"}
    nodes = [NodeSpec(i, ROLES[i], "vocab" if plates[i] == "topic" else "topic", plates[i])
             for i in ids]
    spec = GraphSpec(nodes, edges, leaves, _groups(config), name="tn")
    validate(spec)
    return spec


def build_baseline(kind: str, meta: ModelMeta | None = None,
                   config: TnConfig | None = None) -> GraphSpec:
    """HDP-LDA (``hdp_lda``) or the nonparametric author-topic model (``npatm``)."""
    config = config or TnConfig()
    if meta is not None:
        meta.check()
    kind = kind.replace("-", "_")
    if kind == "hdp_lda":
        ids = ["mu0", "theta", "psi"]
        edges = [EdgeSpec("theta", "mu0")]
    elif kind == "npatm":
        ids = ["mu0", "nu", "theta", "psi"]
        edges = [EdgeSpec("nu", "mu0"), EdgeSpec("theta", "nu")]
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    plates = {"mu0": "none", "nu": "author", "theta": "document", "psi": "topic"}
    nodes = [NodeSpec(i, ROLES[i], "vocab" if plates[i] == "topic" else "topic", plates[i])
             for i in ids]
    leaves = [LeafSpec("theta", "words"), LeafSpec("psi", "words")]
    spec = GraphSpec(nodes, edges, leaves, _groups(config), name=kind)
    validate(spec)
    return spec


def build_model_graph(kind: str, config: TnConfig, meta: ModelMeta | None = None) -> GraphSpec:
    kind = kind.replace("-", "_")
    if kind == "tn":
        return build_tn_graph(config, meta)
    return build_baseline(kind, meta, config)


def ablation_suite(config: TnConfig, meta: ModelMeta | None = None):
    """Six single-ablation variants plus the full model as ``(name, spec, run_network)``, Full TN last."""
    out = []
    for name, flag in ABLATION_ROWS:
        cfg = config if flag is None else config.ablate(flag)
        spec = build_tn_graph(cfg, meta)
        spec.name = name
        run_network = cfg.use_network and cfg.use_author
        out.append((name, spec, run_network))
    return out
