"""Command-line entry point: ``tntopic {train,eval,label,recommend,synth,geweke}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (including a failed Geweke check).

Custom graphs
-------------
``train --graph FILE`` (or the ``graph`` config key) trains a user-defined
PDP network instead of a built-in model.  The file is a JSON object::

    {
      "name": "my_model",                   # optional, used as the report row
      "topic_base": null,                   # null: unbounded topics; int K: uniform over K
      "nodes": [{"id": "mu0", "plate": "none", "group": "topic", "role": ""}, ...],
      "edges": [{"child": "theta", "parent": "mu0", "weight": 1.0}, ...],
      "leaves": [{"node": "theta", "stream": "words"},
                 {"node": "psi", "stream": "words"}, ...],
      "hyper_groups": {"topic": {"discount": 0.5, "concentration": 0.5,
                                 "prior": {"shape": 0.1, "rate": 0.1}}, ...}
    }

``plate`` is one of ``none``, ``author``, ``document``, ``topic``; nodes on the
``topic`` plate are distributions over the vocabulary, all others over topics.
An edge's ``weight`` is the mixing weight of that parent in the child's base
(weights of one child are normalized).  Each stream (``words``/``hashtags``)
needs one topic-side and one vocabulary-side leaf.  Every node's ``group``
must name an entry of ``hyper_groups``.  A graph with an author-plate node
``nu`` is coupled to the citation network when an edge list is given.
``GraphSpec.dumps()`` writes this format for the built-in models.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .corpus import (Corpus, CorpusError, EdgeList, generate_synthetic, load_corpus, load_edges,
                     planted_spec, save_corpus, save_edges, split_train_test)
from .engine import (Schedule, SnapshotError, Trace, build_chain, geweke_compare, load_snapshot,
                     run, save_snapshot)
from .evaluation import (EvalReport, UnsupportedOperation, cluster_metrics, doc_topic_argmax,
                         format_labels, format_table1, format_table4, heldout_network_ll,
                         label_topics, perplexity, pmi_coherence, recommend_authors, table1_csv,
                         table4, table4_csv, top_words)
from .gp import KernelParams, NumericalError, PairSet, build_pairset
from .graph import GraphSpec, GraphValidationError
from .graph import validate as validate_graph
from .pdp import ConcentrationPrior
from .tn import ABLATION_ROWS, ABLATIONS, TnConfig, ablation_suite, build_model_graph

logger = logging.getLogger("tntopic")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config
@dataclass
class TnSection:
    discount_topic: float = 0.5
    discount_vocab: float = 0.7
    concentration_init: float = 0.5
    prior_shape: float = 0.1
    prior_rate: float = 0.1
    lambdas: dict = field(default_factory=dict)

    def to_config(self):
        return TnConfig(self.discount_topic, self.discount_vocab, self.concentration_init,
                        ConcentrationPrior(self.prior_shape, self.prior_rate), dict(self.lambdas))


@dataclass
class GpSection:
    kernel: str = "cosine"
    signal: float = 1.0
    lengthscale: float = 1.0
    noise: float = 1.0
    jitter: float = 1e-6
    nonlink_ratio: float = 1.0
    full_pairing: bool = False

    def params(self):
        return KernelParams(self.signal, self.lengthscale, self.noise, self.jitter)


@dataclass
class DataSection:
    corpus: str = ""
    edges: str = ""
    labels: str = ""
    min_author_tweets: int = 100
    min_token_count: int = 1


@dataclass
class EvalSection:
    train_ratio: float = 0.9
    fold_in_fraction: float = 0.5
    fold_in_sweeps: int = 50
    heldout_pair_fraction: float = 0.1
    pmi_top_n: int = 10


@dataclass
class ScheduleSection:
    total_iterations: int = 2000
    text_only_burnin: int = 1000
    hyper_resample_every: int = 1
    gp_inner_steps: int = 20
    gp_step: float = 0.2
    snapshot_every: int = 100


@dataclass
class RunConfig:
    model: str = "tn"
    ablate: list = field(default_factory=list)
    tn: TnSection = field(default_factory=TnSection)
    gp: GpSection = field(default_factory=GpSection)
    data: DataSection = field(default_factory=DataSection)
    eval: EvalSection = field(default_factory=EvalSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    output: str = "runs"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = 1
    timing: bool = False
    graph: str = ""

    def validate(self):
        if self.model.replace("-", "_") not in ("tn", "hdp_lda", "npatm"):
            raise ConfigError(f"model: unknown model kind {self.model!r}")
        bad = [a for a in self.ablate if a not in ABLATIONS and a not in ("all", "none")]
        if bad:
            raise ConfigError(f"ablate: unknown ablation(s) {', '.join(bad)}")
        if self.ablate and self.model != "tn":
            raise ConfigError("ablate: ablations apply to the tn model only")
        if self.graph:
            if self.ablate:
                raise ConfigError("graph: ablations cannot be combined with a custom graph")
            self.load_graph()
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if self.gp.kernel not in ("cosine", "original"):
            raise ConfigError(f"gp.kernel: unknown kernel {self.gp.kernel!r}")
        if not 0.0 < self.eval.train_ratio < 1.0:
            raise ConfigError("eval.train_ratio: must lie in (0, 1)")
        if not 0.0 <= self.eval.heldout_pair_fraction < 1.0:
            raise ConfigError("eval.heldout_pair_fraction: must lie in [0, 1)")
        for key in ("corpus", "edges", "labels"):
            path = getattr(self.data, key)
            if path and not os.path.exists(path):
                raise ConfigError(f"data.{key}: file {path!r} does not exist")
        if not self.data.corpus:
            raise ConfigError("data.corpus: a corpus path is required")
        try:
            self.schedule_obj(0)
            self.gp.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def load_graph(self) -> GraphSpec:
        try:
            with open(self.graph) as fh:
                spec = GraphSpec.loads(fh.read())
            validate_graph(spec)
        except OSError as exc:
            raise ConfigError(f"graph: cannot read {self.graph!r} ({exc.strerror})") from None
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"graph: {exc}") from None
        return spec

    def schedule_obj(self, seed):
        return Schedule(**asdict(self.schedule), seed=seed)


_SECTIONS = {"tn": TnSection, "gp": GpSection, "data": DataSection, "eval": EvalSection,
             "schedule": ScheduleSection}


def config_from_dict(d) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    for key, val in d.items():
        if key not in names:
            raise ConfigError(f"{key}: unknown configuration key")
        if key in _SECTIONS:
            if not isinstance(val, dict):
                raise ConfigError(f"{key}: expected a table of settings")
            cls = _SECTIONS[key]
            sub = {f.name for f in fields(cls)}
            for k in val:
                if k not in sub:
                    raise ConfigError(f"{key}.{k}: unknown configuration key")
            setattr(cfg, key, replace(getattr(cfg, key), **val))
        else:
            setattr(cfg, key, val)
    if isinstance(cfg.ablate, str):
        cfg.ablate = [cfg.ablate]
    return cfg


# ------------------------------------------------------------------- train
def _variants(cfg: RunConfig, tn_cfg: TnConfig):
    abl = [a for a in cfg.ablate if a != "none"]
    if cfg.graph:
        spec = cfg.load_graph()
        coupled = any(n.id == "nu" and n.plate == "author" for n in spec.nodes)
        return [(spec.name or "Custom", spec, coupled)]
    if cfg.model != "tn":
        return [(cfg.model, build_model_graph(cfg.model, tn_cfg), False)]
    if "all" in abl:
        return ablation_suite(tn_cfg)
    if not abl:
        return [("Full TN", build_model_graph("tn", tn_cfg), tn_cfg.use_network)]
    c = tn_cfg.ablate(*abl)
    names = dict((flag, name) for name, flag in ABLATION_ROWS)
    name = " + ".join(names[a] for a in abl)
    return [(name, build_model_graph("tn", c), c.use_network and c.use_author)]


def _slug(name):
    return "".join(ch if ch.isalnum() else "_" for ch in name.lower()).strip("_")


def _network_split(edges: EdgeList, n_authors, gcfg: GpSection, fraction, seed):
    rng = np.random.default_rng(seed)
    ps = build_pairset(edges.pairs, n_authors, rng, gcfg.nonlink_ratio, gcfg.full_pairing)
    n = len(ps)
    perm = rng.permutation(n)
    n_held = int(round(fraction * n))
    held = np.sort(perm[:n_held])
    train = np.sort(perm[n_held:])
    return PairSet(ps.pairs[train], ps.x[train]), PairSet(ps.pairs[held], ps.x[held])


def _load_labels(path):
    if not path:
        return None
    with open(path) as fh:
        return json.load(fh).get("doc_labels")


def _evaluate(state, train: Corpus, test: Corpus, held: PairSet | None, labels, cfg: RunConfig,
              seed):
    out = {}
    rng = np.random.default_rng(seed + 7919)
    out["perplexity"] = perplexity(state.model, test.documents, cfg.eval.fold_in_fraction,
                                   cfg.eval.fold_in_sweeps, rng)
    if state.network and held is not None and len(held):
        out["network_ll"] = heldout_network_ll(state.gp, held.pairs, held.x)
    if labels:
        pred = doc_topic_argmax(state.model)
        keep = [i for i, d in enumerate(train.documents) if d.id in labels]
        if keep:
            pur, nmi = cluster_metrics(pred[keep], [labels[train.documents[i].id] for i in keep])
            out["purity"], out["nmi"] = pur, nmi
    tops = top_words(state.model, cfg.eval.pmi_top_n)
    out["pmi"] = pmi_coherence(tops, [d.words for d in train.documents], cfg.eval.pmi_top_n)
    if isinstance(out["pmi"], float) and math.isnan(out["pmi"]):
        out["pmi"] = None
    return out


def _train_one(job):
    cfg, name, spec, run_network, seed, corpus, edges, labels = job
    out = cfg.output
    train, test = split_train_test(corpus, cfg.eval.train_ratio, seed)
    pairs = held = None
    if run_network and edges is not None and len(edges):
        pairs, held = _network_split(edges, corpus.n_authors, cfg.gp,
                                     cfg.eval.heldout_pair_fraction, seed)
    meta = {"variant": name, "vocab": corpus.vocab, "authors": corpus.authors, "seed": seed,
            "train_ids": [d.id for d in train.documents]}
    state = build_chain(spec, train.documents, corpus.n_authors, corpus.vocab_size, seed,
                        pairs, cfg.gp.kernel, cfg.gp.params(), network=run_network, meta=meta)
    slug = f"{_slug(name)}_seed{seed}"
    trace = Trace(cfg.timing)
    status = "ok"
    try:
        run(state, cfg.schedule_obj(seed), trace)
    except NumericalError:
        status = "failed"
        raise
    finally:
        trace.write(os.path.join(out, f"trace_{slug}.csv"))
        if status != "ok":
            with open(os.path.join(out, f"PARTIAL_{slug}"), "w") as fh:
                fh.write("run aborted; outputs for this seed are incomplete\n")
    save_snapshot(state, os.path.join(out, f"{slug}.tnsnap"))
    save_corpus(test, os.path.join(out, f"test_{slug}.jsonl"))
    if held is not None:
        _write_pairs(held, corpus, os.path.join(out, f"heldout_pairs_{slug}.csv"))
    metrics = _evaluate(state, train, test, held, labels, cfg, seed)
    with open(os.path.join(out, f"eval_{slug}.json"), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    return name, seed, metrics


def _write_pairs(ps: PairSet, corpus, path):
    with open(path, "w") as fh:
        for (i, j), x in zip(ps.pairs.tolist(), ps.x.tolist()):
            fh.write(f"{corpus.authors[i]},{corpus.authors[j]},{int(x)}\n")


def _read_pairs(path, authors):
    aidx = {a: i for i, a in enumerate(authors)}
    pairs, xs = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 3:
                continue
            if parts[0] not in aidx or parts[1] not in aidx:
                raise CorpusError(f"unknown author in held-out pair {line.strip()!r}")
            i, j = sorted((aidx[parts[0]], aidx[parts[1]]))
            pairs.append((i, j))
            xs.append(int(parts[2]))
    return PairSet(np.array(pairs, dtype=np.int64).reshape(-1, 2), np.array(xs))


def cmd_train(cfg: RunConfig):
    cfg.validate()
    os.makedirs(cfg.output, exist_ok=True)
    corpus = load_corpus(cfg.data.corpus, cfg.data.min_author_tweets, cfg.data.min_token_count)
    edges = load_edges(cfg.data.edges, corpus) if cfg.data.edges else None
    labels = _load_labels(cfg.data.labels)
    tn_cfg = cfg.tn.to_config()
    jobs = [(cfg, name, spec, run_net, int(seed), corpus, edges, labels)
            for name, spec, run_net in _variants(cfg, tn_cfg) for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    rows = {}
    for name, _, metrics in results:
        rows.setdefault(name, EvalReport()).add(**metrics)
    table = list(rows.items())
    with open(os.path.join(cfg.output, "report.csv"), "w") as fh:
        fh.write(table1_csv(table))
    text = format_table1(table) + "\n\nperplexity counts word tokens only\n"
    with open(os.path.join(cfg.output, "report.txt"), "w") as fh:
        fh.write(text)
    print(text)
    return EXIT_OK


# --------------------------------------------------------- other commands
def cmd_eval(args):
    state = load_snapshot(args.snapshot)
    meta = state.meta
    test = load_corpus(args.test, 0, vocab=meta["vocab"], authors=meta["authors"])
    out = {}
    res = perplexity(state.model, test.documents, args.fold_in_fraction, args.fold_in_sweeps,
                     np.random.default_rng(args.seed), detail=True)
    out["perplexity"] = res.perplexity
    out["heldout_tokens"] = res.n_tokens
    out["excluded_docs"] = res.excluded_docs
    if args.heldout:
        if not state.network:
            raise UnsupportedOperation("snapshot has no network model (No Network variant)")
        held = _read_pairs(args.heldout, meta["authors"])
        out["network_ll"] = heldout_network_ll(state.gp, held.pairs, held.x)
    _write_out(args.out, "eval.json", json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_label(args):
    state = load_snapshot(args.snapshot)
    try:
        labels = label_topics(state.model, args.top_tags, args.top_words, state.meta.get("vocab"))
    except UnsupportedOperation as exc:
        variant = state.meta.get("variant", "")
        raise UnsupportedOperation(f"{exc} (snapshot variant: {variant})") from None
    _write_out(args.out, "labels.txt", format_labels(labels) + "\n")
    rows = ["topic,weight,tags,words"]
    for lb in labels:
        rows.append(f"{lb.topic},{lb.weight!r},{' '.join(map(str, lb.tags))},"
                    f"{' '.join(map(str, lb.words))}")
    _write_out(args.out, "labels.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_recommend(args):
    state = load_snapshot(args.snapshot)
    meta = state.meta
    raw = load_corpus(args.corpus, 0, vocab=meta["vocab"])
    known = set(meta["authors"])
    groups = {}
    for d in raw.documents:
        name = raw.authors[d.author]
        if name in known:
            continue
        groups.setdefault(name, []).append(d)
    if not groups:
        raise CorpusError("no documents by new authors in the recommendation corpus")
    kernels = ["original", "cosine"] if args.kernel == "both" else [args.kernel]
    results, lines = {}, []
    for kern in kernels:
        row = "TN" if kern == "cosine" else "Original"
        recs = []
        for j, (name, docs) in enumerate(sorted(groups.items())):
            rec = recommend_authors(state, docs, kern, args.top_k, args.fold_in_sweeps,
                                    np.random.default_rng(args.seed + j))
            recs.append(rec)
            best = ", ".join(meta["authors"][i] for i in rec.recommended)
            worst = ", ".join(meta["authors"][i] for i in rec.not_recommended)
            lines.append(f"[{row}] {name}: recommended {best}; not recommended {worst}")
        results[row] = recs
    tab = table4(results)
    _write_out(args.out, "recommend.txt", format_table4(tab) + "\n\n" + "\n".join(lines) + "\n")
    _write_out(args.out, "recommend.csv", table4_csv(tab))
    return EXIT_OK


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    spec = planted_spec() if args.planted else None
    corpus, edges, truth = generate_synthetic(args.authors, args.docs_per_author, args.words,
                                              args.hashtags, args.topics, args.vocab, rng,
                                              spec=spec)
    os.makedirs(args.out, exist_ok=True)
    save_corpus(corpus, os.path.join(args.out, "corpus.jsonl"))
    save_edges(edges, corpus, os.path.join(args.out, "edges.csv"))
    labels = {"doc_labels": {d.id: int(l) for d, l in zip(corpus.documents, truth.doc_labels)},
              "communities": {corpus.authors[a]: int(c) for a, c in enumerate(truth.communities)}}
    _write_out(args.out, "labels.json", json.dumps(labels, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _parse_sizes(text):
    out = []
    for part in text.split(","):
        a, w, h = (int(v) for v in part.split(":"))
        out.append((a, w, h))
    return out


def cmd_geweke(args):
    cfg = TnConfig()
    spec = build_model_graph(args.model, cfg)
    sizes = _parse_sizes(args.sizes)
    res = geweke_compare(spec, sizes, args.rounds, np.random.default_rng(args.seed),
                         args.truncation, args.vocab, mutate=args.mutate)
    text = res.format()
    print(text)
    _write_out(args.out, "geweke.txt", text + "\n")
    if res.max_abs_z() >= args.threshold:
        print(f"Geweke check failed: max |z| = {res.max_abs_z():.2f} >= {args.threshold}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _write_out(out, name, text):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w") as fh:
        fh.write(text)


# ------------------------------------------------------------------ parser
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="tntopic", description="Twitter-Network topic model toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train models over seeds and write a comparison report")
    t.add_argument("--config", help="JSON configuration file")
    t.add_argument("--model", choices=["tn", "hdp-lda", "npatm"])
    t.add_argument("--graph", help="JSON file describing a custom PDP network")
    t.add_argument("--ablate", help="comma-separated ablations, 'none' or 'all'")
    t.add_argument("--corpus")
    t.add_argument("--edges")
    t.add_argument("--labels", help="JSON with doc_labels for purity/NMI")
    t.add_argument("--out")
    t.add_argument("--seeds", help="comma-separated seeds")
    t.add_argument("--iterations", type=int)
    t.add_argument("--burnin", type=int)
    t.add_argument("--kernel", choices=["cosine", "original"])
    t.add_argument("--min-author-tweets", type=int)
    t.add_argument("--min-token-count", type=int)
    t.add_argument("--fold-in-sweeps", type=int)
    t.add_argument("--workers", type=int)
    t.add_argument("--timing", action="store_true", help="record wall time per iteration")

    e = sub.add_parser("eval", help="perplexity and held-out network likelihood of a snapshot")
    e.add_argument("--snapshot", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--heldout", help="held-out pairs file written by train")
    e.add_argument("--fold-in-fraction", type=float, default=0.5)
    e.add_argument("--fold-in-sweeps", type=int, default=50)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=".")

    lb = sub.add_parser("label", help="label topics with hashtags")
    lb.add_argument("--snapshot", required=True)
    lb.add_argument("--top-tags", type=int, default=3)
    lb.add_argument("--top-words", type=int, default=7)
    lb.add_argument("--out", default=".")

    r = sub.add_parser("recommend", help="recommend training authors for new authors")
    r.add_argument("--snapshot", required=True)
    r.add_argument("--corpus", required=True, help="documents of the new authors")
    r.add_argument("--kernel", choices=["cosine", "original", "both"], default="both")
    r.add_argument("--top-k", type=int, default=3)
    r.add_argument("--fold-in-sweeps", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=".")

    s = sub.add_parser("synth", help="generate a synthetic corpus with a planted network")
    s.add_argument("--authors", type=int, default=40)
    s.add_argument("--docs-per-author", type=int, default=5)
    s.add_argument("--words", type=int, default=10)
    s.add_argument("--hashtags", type=int, default=2)
    s.add_argument("--topics", type=int, default=2)
    s.add_argument("--vocab", type=int, default=50)
    s.add_argument("--planted", action="store_true", help="strong author signal design")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    g = sub.add_parser("geweke", help="joint-distribution check of the Gibbs sampler")
    g.add_argument("--model", choices=["tn", "hdp-lda", "npatm"], default="tn")
    g.add_argument("--sizes", default="0:3:1,1:3:1,0:2:0",
                   help="documents as author:words:hashtags, comma separated")
    g.add_argument("--rounds", type=int, default=10000)
    g.add_argument("--truncation", type=int, default=3)
    g.add_argument("--vocab", type=int, default=5)
    g.add_argument("--threshold", type=float, default=4.0)
    g.add_argument("--mutate", action="store_true", help="disable table removal (must fail)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".")
    return p


def _train_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = config_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: not valid JSON ({exc})") from None
    if args.model:
        cfg.model = args.model
    if args.graph:
        cfg.graph = args.graph
    if args.ablate:
        cfg.ablate = [a.strip() for a in args.ablate.split(",") if a.strip()]
    if args.corpus:
        cfg.data.corpus = args.corpus
    if args.edges:
        cfg.data.edges = args.edges
    if args.labels:
        cfg.data.labels = args.labels
    if args.out:
        cfg.output = args.out
    if args.seeds:
        try:
            cfg.seeds = [int(s) for s in args.seeds.split(",")]
        except ValueError:
            raise ConfigError("seeds: expected comma-separated integers") from None
    if args.iterations is not None:
        cfg.schedule.total_iterations = args.iterations
    if args.burnin is not None:
        cfg.schedule.text_only_burnin = args.burnin
    if args.kernel:
        cfg.gp.kernel = args.kernel
    if args.min_author_tweets is not None:
        cfg.data.min_author_tweets = args.min_author_tweets
    if args.min_token_count is not None:
        cfg.data.min_token_count = args.min_token_count
    if args.fold_in_sweeps is not None:
        cfg.eval.fold_in_sweeps = args.fold_in_sweeps
    if args.workers is not None:
        cfg.workers = args.workers
    if args.timing:
        cfg.timing = True
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            return cmd_train(_train_config(args))
        return {"eval": cmd_eval, "label": cmd_label, "recommend": cmd_recommend,
                "synth": cmd_synth, "geweke": cmd_geweke}[args.command](args)
    except (ConfigError, GraphValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, SnapshotError, UnsupportedOperation, FileNotFoundError,
            KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
