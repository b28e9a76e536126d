import numpy as np
import pytest

from tntopic.corpus import generate_synthetic, planted_spec
from tntopic.engine import (GEWEKE_STATS, TRACE_COLUMNS, SNAPSHOT_MAGIC, Schedule, SnapshotError,
                            Trace, build_chain, geweke_compare, load_snapshot, run,
                            save_snapshot, snapshot_load, snapshot_save)
from tntopic.gp import build_pairset
from tntopic.tn import TnConfig, build_baseline, build_tn_graph


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    corpus, edges, truth = generate_synthetic(10, 3, 4, 1, 2, 20, rng, spec=planted_spec())
    pairs = build_pairset(edges.pairs, 10, np.random.default_rng(0))
    return corpus, pairs


def chain(data, seed=0, network=True):
    corpus, pairs = data
    return build_chain(build_tn_graph(TnConfig()), corpus.documents, 10, 20, seed, pairs,
                       network=network)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(total_iterations=5, text_only_burnin=6)
    with pytest.raises(ValueError):
        Schedule(gp_step=1.0)
    with pytest.raises(ValueError):
        Schedule(hyper_resample_every=0)


def test_run_phases_and_trace(data):
    st = chain(data)
    _, tr = run(st, Schedule(total_iterations=6, text_only_burnin=3))
    assert len(tr) == 6
    assert tr.column("net_ll")[:3] == [None] * 3
    assert all(v is not None for v in tr.column("net_ll")[3:])
    assert all(0.0 <= v <= 1.0 for v in tr.column("gp_accept")[3:])
    csv = tr.to_csv().splitlines()
    assert csv[0] == ",".join(TRACE_COLUMNS)
    assert csv[1].endswith(",")             # wall time left blank without timing
    assert st.gp.f_count == 3
    st.check()


def test_no_network_chain_never_touches_gp(data):
    st = chain(data, network=False)
    _, tr = run(st, Schedule(total_iterations=3, text_only_burnin=0))
    assert tr.column("net_ll") == [None] * 3
    assert st.gp.f_count == 0


def test_timing_column(data):
    st = chain(data)
    _, tr = run(st, Schedule(total_iterations=2, text_only_burnin=2), Trace(timing=True))
    assert all(v > 0 for v in tr.column("ms"))


def test_same_seed_same_trace(data):
    a = run(chain(data, 3), Schedule(total_iterations=5, text_only_burnin=2))[1].to_csv()
    b = run(chain(data, 3), Schedule(total_iterations=5, text_only_burnin=2))[1].to_csv()
    assert a == b
    c = run(chain(data, 4), Schedule(total_iterations=5, text_only_burnin=2))[1].to_csv()
    assert a != c


def test_snapshot_resume_is_bit_identical(data, tmp_path):
    sched = Schedule(total_iterations=6, text_only_burnin=2)
    full = run(chain(data, 1), sched)[1].to_csv().splitlines()
    st = chain(data, 1)
    part = run(st, Schedule(total_iterations=4, text_only_burnin=2))[1]
    path = tmp_path / "s.tnsnap"
    save_snapshot(st, str(path))
    back = load_snapshot(str(path))
    assert back.iteration == 4
    rest = run(back, sched)[1]
    assert part.to_csv().splitlines() + rest.to_csv().splitlines()[1:] == full


def test_snapshot_rejects_corruption_and_version(data):
    blob = bytearray(snapshot_save(chain(data)))
    bad = bytes(blob[:-5] + bytes([blob[-5] ^ 0xFF]) + blob[-4:])
    with pytest.raises(SnapshotError, match="checksum"):
        snapshot_load(bad)
    m = len(SNAPSHOT_MAGIC)
    wrong = bytes(blob[:m]) + (99).to_bytes(4, "little") + bytes(blob[m + 4:])
    with pytest.raises(SnapshotError, match="version"):
        snapshot_load(wrong)
    with pytest.raises(SnapshotError):
        snapshot_load(b"garbage")


def test_periodic_snapshots(data, tmp_path):
    st = chain(data)
    run(st, Schedule(total_iterations=4, text_only_burnin=2, snapshot_every=2),
        snapshot_dir=str(tmp_path))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["snapshot_000002.tnsnap",
                                                         "snapshot_000004.tnsnap"]


def test_geweke_flags_mutated_sampler():
    spec = build_baseline("hdp_lda")
    sizes = [(0, 3, 0), (0, 2, 0)]
    ok = geweke_compare(spec, sizes, 1500, np.random.default_rng(0), truncation=2)
    bad = geweke_compare(spec, sizes, 1500, np.random.default_rng(0), truncation=2, mutate=True)
    assert set(ok.z) == set(GEWEKE_STATS)
    assert ok.max_abs_z() < 4
    assert bad.max_abs_z() > ok.max_abs_z()
    assert "root_tables" in ok.format()
