"""Acceptance checks, one test per criterion.

Each test prints a single ``[Cn] ... PASS|FAIL`` line with the measured
values and the pinned tolerance, then asserts.  Run alone with
``pytest tests/test_acceptance.py -v`` (about 12 minutes on one core) or as a
script: ``python3 tests/test_acceptance.py``.
"""
import itertools
import math
import os
import sys
import time

import numpy as np
import pytest
from scipy.stats import multivariate_normal

sys.path.insert(0, os.path.dirname(__file__))

from oracles import count_vectors, enumerate_single, enumerate_two_level, next_dish_two_level
from tntopic.cli import main as cli_main
from tntopic.corpus import generate_synthetic, planted_spec, split_train_test
from tntopic.engine import Schedule, build_chain, geweke_compare, run
from tntopic.evaluation import (cluster_metrics, link_auc, perplexity, recommend_authors,
                                table4)
from tntopic.gp import (GpState, KernelParams, PairSet, all_pairs, build_pairset,
                        cosine_kernel, kernel_matrix, mh_sweep_f, network_loglik,
                        nu_move_log_ratio, original_kernel)
from tntopic.pdp import (NodeState, PdpHyper, predictive, seating_log_likelihood,
                         simulate_table_growth, table_removal_prob)
from tntopic.sampler import Document, TopicModel
from tntopic.tn import TnConfig, build_tn_graph

RESULTS = {}


def verdict(tag, ok, detail):
    line = f"[{tag}] {detail}  {'PASS' if ok else 'FAIL'}"
    RESULTS[tag] = (ok, line)
    print(line)
    return ok


# ---------------------------------------------------------------- C1
def _mult_two_level(counts, child, root, K):
    n = np.array(counts)
    Z, pred = 0.0, np.zeros(K)
    for t in itertools.product(*[range(1, c + 1) if c else (0,) for c in counts]):
        t = np.array(t)
        for s in itertools.product(*[range(1, x + 1) if x else (0,) for x in t]):
            s = np.array(s)
            cn, rn = NodeState(PdpHyper(*child), n, t), NodeState(PdpHyper(*root), t, s)
            w = math.exp(seating_log_likelihood(cn) + seating_log_likelihood(rn)
                         + s.sum() * math.log(1.0 / K))
            Z += w
            pred += w * predictive(cn, predictive(rn, np.r_[np.full(K, 1.0 / K), 0.0]))[:K]
    return Z, pred / Z


def _gibbs_stationarity_error(n, hyper, base):
    """Max violation of pi P = pi for the remove/add move of every dish."""
    a, b = hyper
    states = list(itertools.product(*[range(1, c + 1) if c else (0,) for c in n]))
    exact = enumerate_single(n, hyper, base)
    z = sum(exact.values())
    pi = np.array([exact[s] / z for s in states])
    idx = {s: i for i, s in enumerate(states)}
    err = 0.0
    for k in range(len(n)):
        if n[k] == 0:
            continue
        P = np.zeros((len(states), len(states)))
        for s in states:
            t = np.array(s)
            p = table_removal_prob(n[k], t[k], a)
            for closed, w in ((1, p), (0, 1 - p)):
                if w == 0:
                    continue
                tm = t.copy()
                tm[k] -= closed
                nk = n[k] - 1
                if nk == 0:
                    opts = [(1, 1.0)]
                else:
                    wn = (b + a * tm.sum()) * base[k]
                    wo = nk - a * tm[k]
                    opts = [(1, wn / (wn + wo)), (0, wo / (wn + wo))]
                for opened, q in opts:
                    t2 = tm.copy()
                    t2[k] += opened
                    P[idx[s], idx[tuple(t2)]] += w * q
        err = max(err, float(np.abs(pi @ P - pi).max()))
    return err


def test_c1_pdp_enumeration_oracle():
    t0 = time.perf_counter()
    err_pred = err_gibbs = 0.0
    hypers = list(itertools.product((0.0, 0.5), (0.5, 1.0)))
    n_cfg = 0
    for K in (1, 2, 3):
        base = np.full(K, 1.0 / K)
        for counts in count_vectors(6, K):
            for child in hypers:
                for root in hypers:
                    states = enumerate_two_level(counts, child, root, K)
                    Z = sum(states.values())
                    p = next_dish_two_level(states, child, root, K)
                    Zm, pm = _mult_two_level(counts, child, root, K)
                    err_pred = max(err_pred, abs(Z - Zm) / Z, float(np.abs(p - pm).max()))
                    n_cfg += 1
                err_gibbs = max(err_gibbs, _gibbs_stationarity_error(counts, child, base))
    dt = time.perf_counter() - t0
    ok = err_pred < 1e-9 and err_gibbs < 1e-9 and dt < 60
    verdict("C1", ok, f"PDP enumeration: {n_cfg} configs, predictive err {err_pred:.1e}, "
                      f"Gibbs stationarity err {err_gibbs:.1e} (tol 1e-9), {dt:.1f}s (<60s)")
    assert ok


# ---------------------------------------------------------------- C2
def test_c2_geweke():
    t0 = time.perf_counter()
    spec = build_tn_graph(TnConfig())
    sizes = [(0, 3, 1), (1, 3, 1), (0, 2, 0)]
    good = geweke_compare(spec, sizes, 10_000, np.random.default_rng(0), truncation=3,
                          vocab_size=5)
    bad = geweke_compare(spec, sizes, 10_000, np.random.default_rng(1), truncation=3,
                         vocab_size=5, mutate=True)
    dt = time.perf_counter() - t0
    ok = good.max_abs_z() < 3 and bad.max_abs_z() > 5 and dt < 300
    zs = ", ".join(f"{k}={v:+.2f}" for k, v in good.z.items())
    verdict("C2", ok, f"Geweke K=3 V=5 3 docs 1e4 rounds: correct max|z|={good.max_abs_z():.2f} "
                      f"(<3) [{zs}]; mutant max|z|={bad.max_abs_z():.1f} (>5), {dt:.0f}s (<300s)")
    assert ok


# ---------------------------------------------------------------- C3
def test_c3_power_law_exponent():
    t0 = time.perf_counter()
    ns = np.array([100, 215, 464, 1000, 2154, 4642, 10000])
    T = simulate_table_growth(PdpHyper(0.7, 1.0), ns, 1000, np.random.default_rng(0))
    slope = float(np.polyfit(np.log(ns), np.log(T.mean(axis=1)), 1)[0])
    dt = time.perf_counter() - t0
    ok = 0.6 <= slope <= 0.8 and dt < 120
    verdict("C3", ok, f"table growth exponent at discount 0.7: {slope:.3f} (in [0.6, 0.8]), "
                      f"{dt:.1f}s (<120s)")
    assert ok


# ---------------------------------------------------------------- C4
def test_c4_kernel_validity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    min_eig = np.inf
    sym_ok = True
    params = KernelParams(1.0, 0.8)
    for _ in range(200):
        A = int(rng.integers(3, 12))
        E = rng.dirichlet(np.full(int(rng.integers(2, 6)), 0.5), size=A)
        pairs = all_pairs(A)
        K = kernel_matrix("cosine", E, pairs, pairs, params)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(K).min()))
        for kind, fn in (("cosine", cosine_kernel), ("original", original_kernel)):
            M = kernel_matrix(kind, E, pairs, pairs, params)
            sym_ok &= bool(np.array_equal(M, M.T))
            flipped = pairs[:, ::-1]
            sym_ok &= bool(np.array_equal(kernel_matrix(kind, E, flipped, pairs, params), M))
            sym_ok &= bool(np.array_equal(kernel_matrix(kind, E, pairs, flipped, params), M))
            u, v, up, vp = (E[i] for i in rng.integers(A, size=4))
            k = fn((u, v), (up, vp), params)
            sym_ok &= (fn((v, u), (up, vp), params) == k and fn((u, v), (vp, up), params) == k
                       and fn((up, vp), (u, v), params) == k)
    dt = time.perf_counter() - t0
    ok = min_eig >= -1e-8 and sym_ok and dt < 60
    verdict("C4", ok, f"kernel validity over 200 embedding sets: cosine min eigenvalue "
                      f"{min_eig:.2e} (>= -1e-8), symmetry identities exact: {sym_ok}, "
                      f"{dt:.1f}s (<60s)")
    assert ok


# ---------------------------------------------------------------- C5
def _batch_se(x, n_batches=100):
    n = len(x) // n_batches
    means = x[: n * n_batches].reshape(n_batches, n, *x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(n_batches)


def test_c5_pcn_prior_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    pairs = all_pairs(4)[:5]
    gp = GpState(PairSet(pairs, np.zeros(5)), "cosine", KernelParams(1.0, 1.0, 0.5))
    gp.refresh(rng.dirichlet(np.ones(3), size=4))
    L = gp.chol
    C = L @ L.T
    gp.f = L @ rng.standard_normal(5)
    n = 100_000
    draws = np.empty((n, 5))
    for s in range(n):
        mh_sweep_f(gp, eps=0.2, rng=rng, n_steps=20, loglik=lambda f: 0.0)
        draws[s] = gp.f
    iu = np.triu_indices(5)
    prods = (draws[:, :, None] * draws[:, None, :])[:, iu[0], iu[1]]
    z_mean = draws.mean(0) / _batch_se(draws)
    z_cov = (prods.mean(0) - C[iu]) / _batch_se(prods)
    worst = float(max(np.abs(z_mean).max(), np.abs(z_cov).max()))
    dt = time.perf_counter() - t0
    ok = worst < 3 and dt < 120
    verdict("C5", ok, f"pCN prior invariance, 5 pairs, 1e5 sweeps: max |z| over means and "
                      f"second moments {worst:.2f} (<3 SE), {dt:.0f}s (<120s)")
    assert ok


# ---------------------------------------------------------------- C6
def test_c6_coupling_ratio_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    err, anti = 0.0, True
    pairs = all_pairs(3)
    for kind in ("cosine", "original"):
        for _ in range(100):
            params = KernelParams(rng.uniform(0.5, 2), rng.uniform(0.3, 2), rng.uniform(0.1, 1))
            E = rng.dirichlet(np.ones(3), size=3)
            gp = GpState(PairSet(pairs, rng.integers(2, size=3)), kind, params,
                         f=rng.normal(size=3))
            gp.refresh(E)
            a = int(rng.integers(3))
            new = rng.dirichlet(np.ones(3))
            E2 = E.copy()
            E2[a] = new

            def dense(EE):
                fn = cosine_kernel if kind == "cosine" else original_kernel
                K = np.array([[fn((EE[p[0]], EE[p[1]]), (EE[q[0]], EE[q[1]]), params)
                               for q in pairs] for p in pairs])
                C = K + (params.noise ** 2 + params.jitter) * np.eye(3)
                return multivariate_normal(np.zeros(3), C).logpdf(gp.f)

            r = nu_move_log_ratio(gp, a, E[a], new)
            err = max(err, abs(r - (dense(E2) - dense(E))))
            anti &= nu_move_log_ratio(gp, a, new, E[a], E2) == -r
    dt = time.perf_counter() - t0
    ok = err < 1e-8 and anti and dt < 10
    verdict("C6", ok, f"coupling ratio vs dense recomputation on 3-author toys: max err "
                      f"{err:.1e} (<1e-8), antisymmetry exact: {anti}, {dt:.1f}s (<10s)")
    assert ok


# ---------------------------------------------------------------- C7
def test_c7_perplexity_direction():
    t0 = time.perf_counter()
    V, A = 200, 40
    rows = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        corpus, edges, _ = generate_synthetic(A, 12, 4, 2, 4, V, rng, spec=planted_spec())
        train, test = split_train_test(corpus, 0.8, seed)
        pairs = build_pairset(edges.pairs, A, np.random.default_rng(seed))
        res = {}
        for name, flag in (("full", None), ("no_author", "author"), ("no_hashtag", "hashtag")):
            cfg = TnConfig() if flag is None else TnConfig().ablate(flag)
            st = build_chain(build_tn_graph(cfg), train.documents, A, V, seed, pairs,
                             network=cfg.use_author and cfg.use_network)
            run(st, Schedule(total_iterations=150, text_only_burnin=100))
            res[name] = perplexity(st.model, test.documents, rng=np.random.default_rng(seed))
        rows.append(res)
    dt = time.perf_counter() - t0
    wins_a = sum(r["full"] < r["no_author"] for r in rows)
    wins_h = sum(r["full"] < r["no_hashtag"] for r in rows)
    means = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
    ok = wins_a >= 4 and wins_h >= 4 and dt < 900
    verdict("C7", ok, f"held-out perplexity over 5 seeds: Full {means['full']:.1f}, No-Author "
                      f"{means['no_author']:.1f}, No-Hashtag {means['no_hashtag']:.1f}; "
                      f"Full better in {wins_a}/5 and {wins_h}/5 paired seeds (>=4/5 each), "
                      f"{dt:.0f}s (<900s)")
    assert ok


# ---------------------------------------------------------------- C8
def test_c8_recommendation_direction():
    t0 = time.perf_counter()
    V, A, NEW = 200, 40, 5
    gaps = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        corpus, edges, _ = generate_synthetic(A + NEW, 8, 4, 2, 4, V, rng, spec=planted_spec())
        train_docs = [d for d in corpus.documents if d.author < A]
        new_docs = [[d for d in corpus.documents if d.author == a] for a in range(A, A + NEW)]
        link = edges.as_set()
        allp = all_pairs(A)
        x = np.array([1 if tuple(p) in link else 0 for p in allp.tolist()])
        st = build_chain(build_tn_graph(TnConfig()), train_docs, A, V, seed, PairSet(allp, x))
        run(st, Schedule(total_iterations=80, text_only_burnin=50))
        g = {}
        for kern in ("cosine", "original"):
            recs = [recommend_authors(st, nd, kernel=kern, rng=np.random.default_rng(seed + 10 * j))
                    for j, nd in enumerate(new_docs)]
            tab = table4({kern: recs})
            g[kern] = float(np.mean(tab[(kern, "recommended")])
                            - np.mean(tab[(kern, "not_recommended")]))
        gaps.append(g)
    dt = time.perf_counter() - t0
    cos_ok = sum(g["cosine"] >= 0.2 for g in gaps)
    smaller = sum(g["original"] < g["cosine"] for g in gaps)
    ok = cos_ok >= 4 and smaller >= 3 and dt < 600
    detail = "; ".join(f"s{i} cos {g['cosine']:.3f} orig {g['original']:.3f}"
                       for i, g in enumerate(gaps))
    verdict("C8", ok, f"recommendation cosine gap (top-3 minus bottom-3): [{detail}]; cosine gap "
                      f">=0.2 in {cos_ok}/5 (>=4/5), original gap smaller in {smaller}/5 "
                      f"(>=3/5), {dt:.0f}s (<600s)")
    assert ok


# ---------------------------------------------------------------- C9
def test_c9_link_prediction_auc():
    t0 = time.perf_counter()
    V, A = 200, 40
    aucs = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        corpus, edges, _ = generate_synthetic(A, 8, 4, 2, 2, V, rng, spec=planted_spec())
        allp = all_pairs(A)
        link = edges.as_set()
        x = np.array([1 if tuple(p) in link else 0 for p in allp.tolist()])
        perm = rng.permutation(len(allp))
        nh = len(allp) // 5
        ho, tr = np.sort(perm[:nh]), np.sort(perm[nh:])
        st = build_chain(build_tn_graph(TnConfig()), corpus.documents, A, V, seed,
                         PairSet(allp[tr], x[tr]))
        run(st, Schedule(total_iterations=80, text_only_burnin=50))
        aucs.append(link_auc(st.gp.conditional_mean(allp[ho]), x[ho]))
    dt = time.perf_counter() - t0
    ok = min(aucs) > 0.8 and dt < 300
    verdict("C9", ok, f"held-out link AUC on planted two-community graphs: "
                      f"{', '.join(f'{a:.3f}' for a in aucs)} (each >0.8), {dt:.0f}s (<300s)")
    assert ok


# ---------------------------------------------------------------- C10
def test_c10_metric_sanity():
    t0 = time.perf_counter()
    V = 50
    m = TopicModel(build_tn_graph(TnConfig()), [], 2, V, np.random.default_rng(0))
    docs = [Document(0, [1, 2, 3, 4, 5, 6], [7]), Document(1, [8, 9, 10], [])]
    ppl = perplexity(m, docs, fold_in_sweeps=3, rng=np.random.default_rng(0))
    labels = np.array([0, 0, 1, 1, 2, 2, 2])
    pur, nmi = cluster_metrics(labels + 5, labels)
    x = np.array([1, 0, 0, 1, 1, 0, 1, 0, 1])
    ll = network_loglik(np.zeros(len(x)), x)
    dt = time.perf_counter() - t0
    ok = (abs(ppl - V) <= 1e-9 * V and pur == 1.0 and nmi == 1.0
          and ll == len(x) * math.log(0.5) and dt < 1)
    verdict("C10", ok, f"metric sanity: uniform perplexity {ppl!r} (= V={V}), purity {pur}, "
                       f"NMI {nmi} (= 1), zero-f network LL {ll!r} (= N ln 0.5 = "
                       f"{len(x) * math.log(0.5)!r}), {dt:.3f}s (<1s)")
    assert ok


# ---------------------------------------------------------------- C11
def test_c11_reproducibility(tmp_path):
    data = tmp_path / "data"
    assert cli_main(["synth", "--authors", "10", "--docs-per-author", "5", "--words", "5",
                     "--topics", "2", "--vocab", "30", "--planted", "--out", str(data)]) == 0
    outs = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        code = cli_main(["train", "--corpus", str(data / "corpus.jsonl"), "--edges",
                         str(data / "edges.csv"), "--labels", str(data / "labels.json"),
                         "--min-author-tweets", "1", "--seeds", "0,1", "--iterations", "12",
                         "--burnin", "6", "--fold-in-sweeps", "4", "--out", str(out)])
        assert code == 0
        outs.append(out)
    names = sorted(f for f in os.listdir(outs[0]) if f.endswith((".csv", ".txt", ".json")))
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in names)
    same &= sorted(os.listdir(outs[0])) == sorted(os.listdir(outs[1]))
    ok = same and any(f.startswith("trace_") for f in names) and "report.csv" in names
    verdict("C11", ok, f"two identical train runs: {len(names)} trace/report/eval files "
                       f"byte-identical: {same}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
