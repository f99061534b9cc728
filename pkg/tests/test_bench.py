import pytest

from semax import bench
from semax.bench import (BenchRecord, bar_at, from_csv, from_json,
                         parse_degrees, parse_elements, run_sweep,
                         series_by_degree, to_csv, to_json)
from semax.perfmodel import flops_per_dof


def test_parse_degrees():
    assert parse_degrees("7") == [7]
    assert parse_degrees("1,3,5") == [1, 3, 5]
    assert parse_degrees("1..4") == [1, 2, 3, 4]
    assert parse_degrees("1..3,7") == [1, 2, 3, 7]
    for bad in ("", "0", "-1", "a"):
        with pytest.raises(ValueError):
            parse_degrees(bad)


def test_parse_elements():
    assert parse_elements("512") == [512]
    assert parse_elements("1,8") == [1, 8]
    assert parse_elements("1..4096:x8") == [1, 8, 64, 512, 4096]
    assert parse_elements("2..20:x3") == [2, 6, 18]
    for bad in ("", "0", "1..8", "1..8:y2", "1..8:x1"):
        with pytest.raises(ValueError):
            parse_elements(bad)


def test_run_sweep_validation():
    with pytest.raises(ValueError):
        run_sweep("ref", [3], [4], reps=2)
    with pytest.raises(ValueError):
        run_sweep("ref", [0], [4], reps=3)
    with pytest.raises(ValueError):
        run_sweep("ref", [3], [0], reps=3)


def sweep():
    return run_sweep("ref", [2, 3], [2, 4], reps=3, backend="numpy", seed=7)


def test_sweep_internal_consistency():
    records = sweep()
    assert len(records) == 4
    for r in records:
        assert r.kernel == "ref" and r.backend == "numpy"
        assert r.reps == 3 and r.threads == 1
        dofs = r.elements * (r.degree + 1) ** 3
        assert r.flops == flops_per_dof(r.degree) * dofs
        assert r.gflops == pytest.approx(r.flops / r.seconds_median / 1e9,
                                         rel=1e-3)
        assert r.dofs_per_s == pytest.approx(r.gflops * 1e9
                                             / flops_per_dof(r.degree),
                                             rel=1e-3)
        assert r.effective_gbs == pytest.approx(64 * dofs
                                                / r.seconds_median / 1e9,
                                                rel=1e-3)
        assert r.seconds_min <= r.seconds_median
        assert r.checksum > 0.0


def test_sweep_checksum_reproducible():
    a = sweep()
    b = sweep()
    for ra, rb in zip(a, b):
        assert ra.checksum == rb.checksum


def test_checksum_mismatch_detected(monkeypatch):
    flips = iter([1.0, 2.0, 3.0, 4.0])

    def unstable(*args, **kwargs):
        import numpy as np
        from semax.kernels import ElementField
        return ElementField(degree=2, elements=1,
                            values=np.full(27, next(flips)))

    monkeypatch.setattr(bench, "ax_apply", unstable)
    with pytest.raises(RuntimeError, match="nondeterministic"):
        bench._bench_one(bench.KernelVariant("reference"), 2, 1, 3,
                         "numpy", 0)


def test_oom_skipped(monkeypatch):
    calls = []
    real = bench._bench_one

    def flaky(variant, degree, elements, reps, backend, seed):
        calls.append((degree, elements))
        if elements == 4:
            raise MemoryError("synthetic")
        return real(variant, degree, elements, reps, backend, seed)

    monkeypatch.setattr(bench, "_bench_one", flaky)
    records = run_sweep("ref", [2], [2, 4, 8], reps=3, backend="numpy")
    assert [(r.degree, r.elements) for r in records] == [(2, 2), (2, 8)]
    assert (2, 4) in calls


def test_json_round_trip():
    records = sweep()
    again = from_json(to_json(records))
    assert again == records


def test_csv_round_trip():
    records = sweep()
    text = to_csv(records)
    header = text.splitlines()[0].split(",")
    assert header[:4] == ["kernel", "backend", "threads", "degree"]
    again = from_csv(text)
    assert again == records
    # repr-level float equality, not approximate
    assert again[0].seconds_median == records[0].seconds_median
    assert isinstance(again[0], BenchRecord)


def test_series_and_bar():
    records = run_sweep("ref", [2, 3], [4, 2], reps=3, backend="numpy")
    series = series_by_degree(records)
    assert sorted(series) == [2, 3]
    assert [e for e, _ in series[2]] == [2, 4]   # sorted by element count
    rows = bar_at(records, 4)
    assert [(d, k) for d, k, _ in rows] == [(2, "ref"), (3, "ref")]
    assert bar_at(records, 999) == []
