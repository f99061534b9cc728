"""Analytical hardware projection for the matrix-free operator.

Given a device description (clock, external bandwidth, optional resource
budget) the model predicts how many DOFs per cycle a pipelined datapath
can sustain and converts that into GFLOP/s.  The chain is

    per-DOF cost  C(N) = (6(N+1)+6 adds, 6(N+1)+9 mults)
    per-DOF traffic    = (56, 8) bytes  ->  intensity I(N) = (12(N+1)+15)/64
    bandwidth limit    T_B = B/64 DOF/s
    resource limit     T_R = min over kinds of avail(kind) / per-DOF use
    T = min(T_R, T_B/f), optionally floored to the largest power of two
        dividing N+1 (arbitration-free unrolling)
    P_max = (12(N+1)+15) * T * f

Device files are TOML.  Resource cost constants per add/mult are not
derivable from first principles, so files ship editable placeholders and
may instead pin a per-degree throughput override, which wins over the
resource computation.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

_DOUBLE = 8
_STREAMS_IN = 7   # six factors + the field itself (fully reused in-element)
_STREAMS_OUT = 1


class DeviceFileError(ValueError):
    """Malformed or inconsistent device description file."""


class InfeasibleConfigError(RuntimeError):
    """Configuration cannot run: bandwidth-starved or out of resources."""


@dataclass(frozen=True)
class ResourceCost:
    """DSP and ALM consumption of one arithmetic unit."""

    dsp: float = 0.0
    alm: float = 0.0


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    freq_mhz: float
    bandwidth_gbs: float
    alm_total: int = 0
    dsp_total: int = 0
    bram_total: int = 0
    r_add: ResourceCost = ResourceCost()
    r_mult: ResourceCost = ResourceCost()
    r_base: tuple[float, float, float] = (0.0, 0.0, 0.0)  # (dsp, alm, bram)
    r_base_by_degree: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    bram_per_element: dict[int, float] = field(default_factory=dict)
    throughput_override: dict[int, float] = field(default_factory=dict)
    override_bound: str | None = None
    freq_by_degree: dict[int, float] = field(default_factory=dict)
    unroll_constraint: bool = True

    def freq_hz(self, degree: int) -> float:
        return self.freq_by_degree.get(degree, self.freq_mhz) * 1e6

    def base_usage(self, degree: int) -> tuple[float, float, float]:
        return self.r_base_by_degree.get(degree, self.r_base)


@dataclass(frozen=True)
class ModelReport:
    """One device at one degree: every intermediate the model produces."""

    device: str
    degree: int
    cost: tuple[int, int]
    traffic: tuple[int, int]
    intensity: float
    freq_mhz: float
    bandwidth_dofs: float            # T_B, DOF/s
    resource_dofs_per_cycle: float   # unconstrained T_R, may be inf
    t_max: float                     # final DOFs/cycle after all limits
    p_max_gflops: float
    bound: str
    roofline_gflops: float


def cost(degree: int) -> tuple[int, int]:
    """Per-DOF (adds, mults) of one operator application."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    n = degree + 1
    return 6 * n + 6, 6 * n + 9


def flops_per_dof(degree: int) -> int:
    a, m = cost(degree)
    return a + m


def traffic_per_dof() -> tuple[int, int]:
    """(load, store) bytes per DOF under full intra-element reuse."""
    return _STREAMS_IN * _DOUBLE, _STREAMS_OUT * _DOUBLE


def intensity(degree: int) -> float:
    """FLOP per byte of idealized external traffic."""
    loads, writes = traffic_per_dof()
    return flops_per_dof(degree) / (loads + writes)


def bandwidth_throughput(bytes_per_s: float) -> float:
    """DOF/s the external memory can feed: one DOF moves 64 bytes."""
    if bytes_per_s <= 0:
        raise ValueError(f"bandwidth must be positive, got {bytes_per_s}")
    loads, writes = traffic_per_dof()
    return bytes_per_s / (loads + writes)


def resource_throughput(device: DeviceSpec, degree: int) -> float:
    """Unconstrained DOFs/cycle the arithmetic budget supports.

    A per-degree override in the device file wins outright.  Otherwise
    each resource kind r admits (total_r - base_r) / per-DOF-use_r and the
    scarcest kind decides; kinds the datapath does not consume are
    unlimited, so a device without cost constants returns +inf and the
    caller caps by bandwidth.
    """
    if degree in device.throughput_override:
        return device.throughput_override[degree]
    base_dsp, base_alm, base_bram = device.base_usage(degree)
    for label, used, total in (("dsp", base_dsp, device.dsp_total),
                               ("alm", base_alm, device.alm_total),
                               ("bram", base_bram, device.bram_total)):
        if used > total:
            raise InfeasibleConfigError(
                f"{device.name}: insufficient base resources at N={degree} "
                f"({label} base {used} > total {total})")
    adds, mults = cost(degree)
    best = math.inf
    for total, base, per_add, per_mult in (
            (device.dsp_total, base_dsp, device.r_add.dsp, device.r_mult.dsp),
            (device.alm_total, base_alm, device.r_add.alm, device.r_mult.alm)):
        per_dof = adds * per_add + mults * per_mult
        if per_dof > 0:
            best = min(best, (total - base) / per_dof)
    return best


def constrain_throughput(t_raw: float, degree: int) -> int:
    """Largest power of two <= t_raw that divides N+1.

    Raises InfeasibleConfigError for t_raw < 1: the datapath cannot even
    sustain one DOF per cycle, so no arbitration-free unrolling exists.
    """
    if t_raw < 1.0:
        raise InfeasibleConfigError(
            f"bandwidth-starved configuration: raw throughput {t_raw:.4g} "
            f"DOFs/cycle at N={degree} is below 1")
    n = degree + 1
    best = 1
    t = 2
    while t <= t_raw:
        if n % t == 0:
            best = t
        t *= 2
    return best


def _check_bram(device: DeviceSpec, degree: int) -> None:
    need = device.bram_per_element.get(degree)
    if need is None or device.bram_total <= 0:
        return
    base_bram = device.base_usage(degree)[2]
    if base_bram + need > device.bram_total:
        raise InfeasibleConfigError(
            f"{device.name}: insufficient BRAM at N={degree} "
            f"({base_bram} base + {need} per element > {device.bram_total})")


def _scarcest(device: DeviceSpec, degree: int) -> str:
    if device.override_bound is not None:
        return device.override_bound
    adds, mults = cost(degree)
    base_dsp, base_alm, _ = device.base_usage(degree)
    ratios = {}
    for label, total, base, per_add, per_mult in (
            ("dsp", device.dsp_total, base_dsp,
             device.r_add.dsp, device.r_mult.dsp),
            ("logic", device.alm_total, base_alm,
             device.r_add.alm, device.r_mult.alm)):
        per_dof = adds * per_add + mults * per_mult
        if per_dof > 0:
            ratios[label] = (total - base) / per_dof
    if not ratios:
        return "logic"
    return min(ratios, key=ratios.get)


def peak_performance(device: DeviceSpec, degree: int) -> ModelReport:
    """Full model evaluation for one device at one degree."""
    c = cost(degree)
    inten = intensity(degree)
    f = device.freq_hz(degree)
    t_b = bandwidth_throughput(device.bandwidth_gbs * 1e9)
    t_band_cycles = t_b / f
    t_res = resource_throughput(device, degree)
    _check_bram(device, degree)
    t_cont = min(t_res, t_band_cycles)
    if device.unroll_constraint:
        t_max = float(constrain_throughput(t_cont, degree))
    else:
        t_max = t_cont
    p_max = flops_per_dof(degree) * t_max * f / 1e9
    roofline = inten * device.bandwidth_gbs
    # Strictly less: a tie goes to the resource narrative.
    bound = "bandwidth" if t_band_cycles < t_res else _scarcest(device, degree)
    return ModelReport(device=device.name, degree=degree, cost=c,
                       traffic=traffic_per_dof(), intensity=inten,
                       freq_mhz=f / 1e6, bandwidth_dofs=t_b,
                       resource_dofs_per_cycle=t_res, t_max=t_max,
                       p_max_gflops=p_max, bound=bound,
                       roofline_gflops=roofline)


def padding_gain(degree: int, t2: int, p: int) -> float:
    """Effective DOFs/cycle when padding N+1 points up to N+1+p.

    t2 is the throughput achieved at the padded size; the cubed ratio
    discounts it by the fraction of padded work that is useful.
    """
    n = degree + 1
    if t2 < 1 or int(t2) != t2:
        raise ValueError(f"padded throughput must be a positive integer, got {t2}")
    if p < 1:
        raise ValueError(f"padding must be >= 1, got {p}")
    if (n + p) % t2:
        raise ValueError(f"padded point count {n + p} not divisible by T={t2}")
    return t2 * (n / (n + p)) ** 3


def model_error(predicted_t: float, measured_dofs_per_cycle: float) -> float:
    """Signed percent by which the prediction overshoots the measurement."""
    if predicted_t <= 0:
        raise ValueError(f"predicted throughput must be positive, got {predicted_t}")
    return 100.0 * (predicted_t - measured_dofs_per_cycle) / predicted_t


def _int_keyed(table, caster=float):
    out = {}
    for key, val in table.items():
        try:
            out[int(key)] = caster(val)
        except (TypeError, ValueError) as exc:
            raise DeviceFileError(f"bad per-degree entry {key!r} = {val!r}") from exc
    return out


def _parse_device(data: dict, name_hint: str) -> DeviceSpec:
    try:
        freq = float(data["freq_mhz"])
        bw = float(data["bandwidth_gbs"])
    except KeyError as exc:
        raise DeviceFileError(f"device file missing required key {exc}") from exc
    if freq <= 0 or bw <= 0:
        raise DeviceFileError(
            f"frequency and bandwidth must be positive (got {freq}, {bw})")

    def res_cost(key):
        tbl = data.get(key, {})
        return ResourceCost(dsp=float(tbl.get("dsp", 0.0)),
                            alm=float(tbl.get("alm", 0.0)))

    totals = {k: int(data.get(k, 0)) for k in
              ("alm_total", "dsp_total", "bram_total")}
    if any(v < 0 for v in totals.values()):
        raise DeviceFileError(f"resource totals must be non-negative: {totals}")

    base_tbl = dict(data.get("r_base", {}))
    by_degree_raw = base_tbl.pop("by_degree", {})
    r_base = (float(base_tbl.get("dsp", 0.0)), float(base_tbl.get("alm", 0.0)),
              float(base_tbl.get("bram", 0.0)))
    r_base_by_degree = {
        int(k): (float(v.get("dsp", 0.0)), float(v.get("alm", 0.0)),
                 float(v.get("bram", 0.0)))
        for k, v in by_degree_raw.items()}

    return DeviceSpec(
        name=str(data.get("name", name_hint)),
        freq_mhz=freq,
        bandwidth_gbs=bw,
        r_add=res_cost("r_add"),
        r_mult=res_cost("r_mult"),
        r_base=r_base,
        r_base_by_degree=r_base_by_degree,
        bram_per_element=_int_keyed(data.get("bram_per_element", {})),
        throughput_override=_int_keyed(data.get("throughput_override", {})),
        override_bound=data.get("override_bound"),
        freq_by_degree=_int_keyed(data.get("freq_mhz_by_degree", {})),
        unroll_constraint=bool(data.get("unroll_constraint", True)),
        **totals)


def device_dir():
    return resources.files(__package__) / "devices"


def list_devices() -> list[str]:
    names = [entry.name[:-5] for entry in device_dir().iterdir()
             if entry.name.endswith(".toml")]
    return sorted(names)


def load_device(path_or_name: str) -> DeviceSpec:
    """Load a device file from a path or a shipped device name."""
    if os.path.exists(path_or_name):
        with open(path_or_name, "rb") as fh:
            data = tomllib.load(fh)
        hint = os.path.splitext(os.path.basename(path_or_name))[0]
        return _parse_device(data, hint)
    entry = device_dir() / f"{path_or_name}.toml"
    if not entry.is_file():
        raise DeviceFileError(
            f"no such device file or shipped device {path_or_name!r}; "
            f"shipped: {', '.join(list_devices())}")
    data = tomllib.loads(entry.read_text())
    return _parse_device(data, path_or_name)


def load_measured(name: str = "stratix10") -> list[dict]:
    """Rows of the shipped measured-reference CSV for a device, if any."""
    entry = device_dir() / f"{name}_measured.csv"
    if not entry.is_file():
        raise DeviceFileError(f"no measured-reference data for {name!r}")
    rows = []
    with entry.open() as fh:
        for row in csv.DictReader(fh):
            rows.append({k: (int(v) if k == "degree" else float(v))
                         for k, v in row.items()})
    return rows
