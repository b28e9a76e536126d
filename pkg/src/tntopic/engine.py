"""Alternating MCMC driver, Geweke harness and chain snapshots."""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import os
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .gp import GpState, KernelParams, NetworkCoupling, PairSet, mh_sweep_f
from .sampler import TopicModel, forward_generate, regenerate_symbols

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "text_ll", "net_ll", "topics", "beta_topic", "beta_vocab",
                 "gp_accept", "ms")

SNAPSHOT_MAGIC = b"TNSNAP\x00"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass
class Schedule:
    total_iterations: int = 2000
    text_only_burnin: int = 1000
    hyper_resample_every: int = 1
    gp_inner_steps: int = 20
    gp_step: float = 0.2
    snapshot_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.total_iterations < 0 or self.text_only_burnin < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.text_only_burnin > self.total_iterations:
            raise ValueError("text_only_burnin exceeds total_iterations")
        for name in ("hyper_resample_every", "gp_inner_steps", "snapshot_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.gp_step < 1.0:
            raise ValueError("gp_step must lie in (0, 1)")


@dataclass
class ChainState:
    """Everything needed to continue a chain: text model, GP, counters and rng."""
    model: TopicModel
    rng: np.random.Generator
    gp: GpState | None = None
    network: bool = False
    iteration: int = 0
    gp_started: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model.rng = self.rng
        if self.network and (self.gp is None or len(self.gp.pairs) == 0):
            raise ValueError("network phase needs a non-empty pair set")

    @property
    def coupling(self):
        if self.gp is None:
            return None
        if getattr(self, "_coupling", None) is None or self._coupling.gp is not self.gp:
            self._coupling = NetworkCoupling(self.gp)
        return self._coupling

    def embeddings(self):
        return self.coupling.embeddings(self.model)

    def check(self):
        return self.model.check_consistency()


def build_chain(spec, documents, n_authors, vocab_size, seed=0, pairs: PairSet | None = None,
                kernel="cosine", params: KernelParams | None = None, network=True,
                initialize=True, meta=None):
    """Construct and (optionally) initialize a chain for ``documents``."""
    rng = np.random.default_rng(seed)
    model = TopicModel(spec, documents, n_authors, vocab_size, rng)
    if initialize:
        model.initialize()
        model.compact()
    gp = None
    if pairs is not None and len(pairs):
        gp = GpState(pairs, kernel, params or KernelParams())
    return ChainState(model, rng, gp, network=bool(network and gp is not None), meta=meta or {})


# ------------------------------------------------------------------- trace
class Trace:
    def __init__(self, timing=False):
        self.records = []
        self.timing = timing

    def __len__(self):
        return len(self.records)

    def append(self, rec):
        self.records.append(rec)

    def column(self, name):
        return [r[name] for r in self.records]

    @staticmethod
    def _fmt(v):
        if v is None:
            return ""
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))

    def to_csv(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for r in self.records:
            lines.append(",".join(self._fmt(r.get(c)) for c in TRACE_COLUMNS))
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def run(state: ChainState, schedule: Schedule, trace: Trace | None = None, snapshot_dir=None,
        check_every=0, timing=False, progress=None):
    """Advance ``state`` to ``schedule.total_iterations``.

    Iterations up to ``text_only_burnin`` run text sweeps and hyperparameter
    updates only; afterwards, when the network is enabled, each iteration
    runs a coupled text sweep, pCN updates of ``f`` and hyperparameter updates.
    """
    trace = trace if trace is not None else Trace(timing)
    model = state.model
    for it in range(state.iteration + 1, schedule.total_iterations + 1):
        t0 = time.perf_counter()
        gp_phase = state.network and it > schedule.text_only_burnin
        if gp_phase and not state.gp_started:
            state.gp.f = np.zeros(len(state.gp.pairs))
            state.gp.refresh(state.embeddings())
            state.gp_started = True
        stats = model.sweep(state.coupling if gp_phase else None, compute_ll=False)
        net_ll = accept = None
        if gp_phase:
            state.gp.refresh(state.embeddings())
            accept = mh_sweep_f(state.gp, eps=schedule.gp_step, rng=state.rng,
                                n_steps=schedule.gp_inner_steps)
            state.gp.accumulate()
            net_ll = state.gp.loglik()
        if it % schedule.hyper_resample_every == 0:
            model.resample_concentrations()
        state.iteration = it
        if check_every and it % check_every == 0:
            state.check()
        rec = {
            "iter": it,
            "text_ll": model.log_likelihood(),
            "net_ll": net_ll,
            "topics": stats.topics,
            "beta_topic": model.hypers["topic"].concentration if "topic" in model.hypers else None,
            "beta_vocab": model.hypers["vocab"].concentration if "vocab" in model.hypers else None,
            "gp_accept": accept,
            "ms": (time.perf_counter() - t0) * 1e3 if (timing or trace.timing) else None,
        }
        trace.append(rec)
        if progress is not None:
            progress(rec)
        if snapshot_dir is not None and it % schedule.snapshot_every == 0:
            save_snapshot(state, os.path.join(snapshot_dir, f"snapshot_{it:06d}.tnsnap"))
    return state, trace


# ---------------------------------------------------------------- geweke
@dataclass
class GewekeResult:
    z: dict
    forward_mean: dict
    chain_mean: dict
    forward_se: dict
    chain_se: dict

    def max_abs_z(self):
        return max(abs(v) for v in self.z.values())

    def format(self):
        lines = [f"{'statistic':<14}{'forward':>12}{'chain':>12}{'z':>9}"]
        for k in self.z:
            lines.append(f"{k:<14}{self.forward_mean[k]:>12.5f}{self.chain_mean[k]:>12.5f}"
                         f"{self.z[k]:>9.3f}")
        return "\n".join(lines)


GEWEKE_STATS = ("live_topics", "root_tables", "topic1_share")


def _geweke_stats(model):
    z = model.z[model.seated]
    return (float(model.num_topics()), float(model.topic_root.T[0]),
            float(np.mean(z == 0)) if z.size else 0.0)


def _batch_se(x, n_batches=50):
    x = np.asarray(x, float)
    n = len(x) // n_batches
    if n < 2:
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    means = x[: n * n_batches].reshape(n_batches, n).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def geweke_compare(spec, sizes, iterations, rng, truncation=3, vocab_size=5, n_forward=None,
                   mutate=False, n_authors=None):
    """Compare forward draws with successive-conditional draws of the same joint.

    ``sizes`` is a list of ``(author, n_words, n_hashtags)`` per document.
    Returns z-scores for the live topic count, root table count and the share
    of tokens on the first topic.
    """
    n_forward = iterations if n_forward is None else n_forward
    fwd = np.empty((n_forward, len(GEWEKE_STATS)))
    for r in range(n_forward):
        model, _ = forward_generate(spec, truncation, sizes, vocab_size, rng, n_authors)
        fwd[r] = _geweke_stats(model)
    model, _ = forward_generate(spec, truncation, sizes, vocab_size, rng, n_authors)
    model.mutant = mutate
    chain = np.empty((iterations, len(GEWEKE_STATS)))
    for r in range(iterations):
        model.sweep(compute_ll=False)
        regenerate_symbols(model)
        chain[r] = _geweke_stats(model)
    z, fm, cm, fs, cs = {}, {}, {}, {}, {}
    for j, name in enumerate(GEWEKE_STATS):
        fm[name] = float(fwd[:, j].mean())
        cm[name] = float(chain[:, j].mean())
        fs[name] = float(fwd[:, j].std(ddof=1) / math.sqrt(n_forward)) if n_forward > 1 else 0.0
        cs[name] = _batch_se(chain[:, j])
        se = math.hypot(fs[name], cs[name])
        if se == 0.0:
            z[name] = 0.0 if fm[name] == cm[name] else math.copysign(math.inf, fm[name] - cm[name])
        else:
            z[name] = (fm[name] - cm[name]) / se
    return GewekeResult(z, fm, cm, fs, cs)


# -------------------------------------------------------------- snapshots
def snapshot_save(state: ChainState) -> bytes:
    arrs = {f"m.{k}": np.asarray(v) for k, v in state.model.state_arrays().items()}
    header = {
        "model": state.model.state_meta(),
        "iteration": state.iteration,
        "network": state.network,
        "gp_started": state.gp_started,
        "rng": state.rng.bit_generator.state,
        "rng_kind": type(state.rng.bit_generator).__name__,
        "meta": state.meta,
        "gp": None,
    }
    gp = state.gp
    if gp is not None:
        header["gp"] = {"kernel": gp.kernel, "params": asdict(gp.params), "f_count": gp.f_count}
        arrs.update({"gp.pairs": gp.pairs.pairs, "gp.x": gp.pairs.x, "gp.f": gp.f,
                     "gp.f_sum": gp.f_sum})
    buf = io.BytesIO()
    np.savez(buf, **arrs)
    payload = buf.getvalue()
    header["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    header["payload_size"] = len(payload)
    hbytes = json.dumps(header, sort_keys=True).encode()
    return (SNAPSHOT_MAGIC + struct.pack("<II", SNAPSHOT_VERSION, len(hbytes)) + hbytes
            + payload)


def snapshot_load(blob: bytes) -> ChainState:
    m = len(SNAPSHOT_MAGIC)
    if len(blob) < m + 8 or blob[:m] != SNAPSHOT_MAGIC:
        raise SnapshotError("not a chain snapshot")
    version, hlen = struct.unpack("<II", blob[m:m + 8])
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"snapshot version {version} is not supported "
                            f"(expected {SNAPSHOT_VERSION})")
    try:
        header = json.loads(blob[m + 8:m + 8 + hlen])
    except ValueError:
        raise SnapshotError("snapshot header is corrupt (checksum failure)") from None
    payload = blob[m + 8 + hlen:]
    if (len(payload) != header.get("payload_size")
            or hashlib.sha256(payload).hexdigest() != header.get("payload_sha256")):
        raise SnapshotError("snapshot checksum failure")
    with np.load(io.BytesIO(payload)) as npz:
        arrs = {k: npz[k] for k in npz.files}
    bitgen = getattr(np.random, header["rng_kind"])()
    bitgen.state = header["rng"]
    rng = np.random.Generator(bitgen)
    model = TopicModel.from_state(header["model"],
                                  {k[2:]: v for k, v in arrs.items() if k.startswith("m.")}, rng)
    gp = None
    if header["gp"] is not None:
        h = header["gp"]
        gp = GpState(PairSet(arrs["gp.pairs"], arrs["gp.x"]), h["kernel"],
                     KernelParams(**h["params"]), f=np.array(arrs["gp.f"]),
                     f_sum=np.array(arrs["gp.f_sum"]), f_count=int(h["f_count"]))
    state = ChainState(model, rng, gp, network=header["network"], iteration=header["iteration"],
                       gp_started=header["gp_started"], meta=header["meta"])
    if gp is not None and state.gp_started:
        gp.refresh(state.embeddings())
    return state


def save_snapshot(state, path):
    blob = snapshot_save(state)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_snapshot(path):
    with open(path, "rb") as fh:
        return snapshot_load(fh.read())
