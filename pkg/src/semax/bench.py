"""Timed kernel sweeps over degrees and element counts.

Only the operator application is timed; mesh construction, metric
factors and field allocation happen outside the clock.  FLOPs come from
the analytic counters, never from timing, and every record carries a
checksum of the output field so a dead-code-eliminated kernel cannot
produce a plausible-looking row.  Absolute numbers are machine-dependent
records, useful for comparing variants and backends on one host, not for
reproducing any published hardware figure.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .basis import build_basis
from .geometry import build_box_mesh, build_geom_factors
from .kernels import (ElementField, KernelVariant, OpCounters, active_backend,
                      ax_apply, ax_traffic, parse_variant)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRecord:
    kernel: str
    backend: str
    threads: int
    degree: int
    elements: int
    reps: int
    seconds_median: float
    seconds_min: float
    flops: int                # one application, analytic count
    gflops: float             # flops / seconds_median
    dofs_per_s: float
    effective_gbs: float      # idealized traffic / seconds_median
    checksum: float           # sum |w|, identical across reps


def _thread_count(backend_name: str) -> int:
    if backend_name == "numba":
        try:
            from numba import get_num_threads
            return int(get_num_threads())
        except ImportError:
            pass
    return 1


def parse_degrees(text: str) -> list[int]:
    """Degree axis: '7', '1,3,5' or an inclusive range '1..15'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or any(d < 1 for d in out):
        raise ValueError(f"bad degree spec {text!r}")
    return out


def parse_elements(text: str) -> list[int]:
    """Element axis: '512', '1,8,64' or a geometric span '1..4096:x8'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            span, _, step = part.partition(":")
            lo, hi = (int(v) for v in span.split("..", 1))
            if not step.startswith("x") or int(step[1:]) < 2:
                raise ValueError(
                    f"element range needs a ':xK' growth factor, got {part!r}")
            k = int(step[1:])
            e = lo
            while e <= hi:
                out.append(e)
                e *= k
        elif part:
            out.append(int(part))
    if not out or any(e < 1 for e in out):
        raise ValueError(f"bad element spec {text!r}")
    return out


def _bench_one(variant: KernelVariant, degree: int, elements: int, reps: int,
               backend: str | None, seed: int) -> BenchRecord:
    basis = build_basis(degree)
    mesh = build_box_mesh((elements, 1, 1))
    geom = build_geom_factors(mesh, basis)
    rng = np.random.default_rng(seed + 1009 * degree + elements)
    u = ElementField(degree=degree, elements=elements,
                     values=rng.standard_normal(elements * basis.n_points ** 3))

    ax_apply(variant, u, geom, basis, backend=backend)  # warm-up, untimed
    times = []
    checksum = None
    for _ in range(reps):
        t0 = time.perf_counter()
        w = ax_apply(variant, u, geom, basis, backend=backend)
        times.append(time.perf_counter() - t0)
        c = float(np.sum(np.abs(w.values)))
        if checksum is None:
            checksum = c
        elif c != checksum:
            raise RuntimeError(
                f"nondeterministic output: checksum {c!r} != {checksum!r} "
                f"for {variant.label()} N={degree} E={elements}")

    counters = OpCounters()
    counters.charge(degree, elements)
    med = statistics.median(times)
    dofs = elements * (degree + 1) ** 3
    loads, writes = ax_traffic(degree, elements)
    name = active_backend(backend)
    return BenchRecord(kernel=variant.label(), backend=name,
                       threads=_thread_count(name), degree=degree,
                       elements=elements, reps=reps,
                       seconds_median=med, seconds_min=min(times),
                       flops=counters.flops,
                       gflops=counters.flops / med / 1e9,
                       dofs_per_s=dofs / med,
                       effective_gbs=(loads + writes) / med / 1e9,
                       checksum=checksum)


def run_sweep(kernel, degrees, element_counts, reps: int,
              backend: str | None = None, seed: int = 0) -> list[BenchRecord]:
    """Benchmark one variant across the (degree, elements) grid.

    A configuration that runs out of memory is logged and skipped; the
    rest of the sweep continues.
    """
    if reps < 3:
        raise ValueError(f"need at least 3 repetitions, got {reps}")
    if any(d < 1 for d in degrees) or any(e < 1 for e in element_counts):
        raise ValueError("degrees and element counts must all be >= 1")
    variant = kernel if isinstance(kernel, KernelVariant) else parse_variant(kernel)
    records = []
    for degree in degrees:
        for elements in element_counts:
            try:
                records.append(_bench_one(variant, degree, elements, reps,
                                          backend, seed))
            except MemoryError:
                log.warning("out of memory at N=%d E=%d, skipping",
                            degree, elements)
    return records


_FIELDS = {f.name: f.type for f in dataclasses.fields(BenchRecord)}


def to_json(records) -> str:
    return json.dumps({"records": [dataclasses.asdict(r) for r in records]},
                      indent=2)


def from_json(text: str) -> list[BenchRecord]:
    return [BenchRecord(**row) for row in json.loads(text)["records"]]


def to_csv(records) -> str:
    # repr-style float formatting keeps the round-trip lossless.
    buf = io.StringIO()
    buf.write(",".join(_FIELDS) + "\n")
    for r in records:
        row = dataclasses.asdict(r)
        buf.write(",".join(str(row[name]) for name in _FIELDS) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> list[BenchRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    records = []
    for ln in lines[1:]:
        raw = dict(zip(header, ln.split(",")))
        kwargs = {}
        for name, typ in _FIELDS.items():
            caster = {"int": int, "float": float, "str": str}[str(typ)]
            kwargs[name] = caster(raw[name])
        records.append(BenchRecord(**kwargs))
    return records


def series_by_degree(records) -> dict[int, list[tuple[int, float]]]:
    """Per-degree (elements, GFLOP/s) series, sorted by element count."""
    out: dict[int, list[tuple[int, float]]] = {}
    for r in records:
        out.setdefault(r.degree, []).append((r.elements, r.gflops))
    for series in out.values():
        series.sort()
    return out


def bar_at(records, elements: int) -> list[tuple[int, str, float]]:
    """(degree, kernel, GFLOP/s) rows at one element count."""
    rows = [(r.degree, r.kernel, r.gflops) for r in records
            if r.elements == elements]
    rows.sort()
    return rows
