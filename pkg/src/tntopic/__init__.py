"""Nonparametric topic models of tweets with hashtags, authors and a follower network."""
from .corpus import Corpus, CorpusError, EdgeList, Tweet, generate_synthetic, load_corpus, \
    load_edges, planted_spec, split_train_test
from .engine import ChainState, Schedule, Trace, build_chain, geweke_compare, load_snapshot, \
    run, save_snapshot
from .evaluation import (cluster_metrics, label_topics, perplexity, pmi_coherence,
                         recommend_authors)
from .gp import GpState, KernelParams, NetworkCoupling, PairSet, build_pairset
from .graph import GraphSpec, GraphValidationError, validate
from .pdp import ConcentrationPrior, PdpHyper, stirling
from .sampler import Document, TopicModel
from .tn import TnConfig, ablation_suite, build_baseline, build_model_graph, build_tn_graph

__version__ = "0.1.0"
