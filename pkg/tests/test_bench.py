import pytest

from ehrshare.bench import OPERATIONS, OpStats, format_size, parse_size, run_bench


@pytest.mark.parametrize("text,n", [("1KB", 1024), ("100kb", 102400), ("1MB", 1 << 20), ("10M", 10 << 20), ("512", 512), ("1.5KB", 1536)])
def test_parse_size(text, n):
    assert parse_size(text) == n


def test_format_size():
    assert [format_size(n) for n in (1024, 1 << 20, 1000)] == ["1KB", "1MB", "1000B"]


def test_stats_nearest_rank():
    st = OpStats.of([i / 1000 for i in range(1, 101)])
    assert st.p95_ms == pytest.approx(95.0)
    assert st.mean_ms == pytest.approx(50.5)
    assert st.trials == 100
    single = OpStats.of([0.002])
    assert single.mean_ms == single.p95_ms == single.median_ms == pytest.approx(2.0)


def test_run_bench_shape():
    rep = run_bench([16, 2048], trials=3, warmup=0)
    assert set(rep.stats) == {(op, s) for op in OPERATIONS for s in (16, 2048)}
    assert rep.overhead == {16: 30, 2048: 30}
    assert all(st.trials == 3 and st.mean_ms > 0 for st in rep.stats.values())
    d = rep.to_dict()
    assert d["latencyMs"]["sign"]["2048"]["mean"] >= 0
    assert "overhead" in rep.table()


@pytest.mark.parametrize("sizes,trials", [([1024], 0), ([], 5)])
def test_run_bench_rejects(sizes, trials):
    with pytest.raises(ValueError):
        run_bench(sizes, trials)
