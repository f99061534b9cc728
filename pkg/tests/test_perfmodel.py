import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semax.perfmodel import (DeviceFileError, DeviceSpec,
                             InfeasibleConfigError, ResourceCost,
                             bandwidth_throughput, constrain_throughput, cost,
                             flops_per_dof, intensity, list_devices,
                             load_device, load_measured, model_error,
                             padding_gain, peak_performance, traffic_per_dof)


def bw_only(bandwidth_gbs, freq_mhz=300.0, unroll=True):
    return DeviceSpec(name="t", freq_mhz=freq_mhz,
                      bandwidth_gbs=bandwidth_gbs, unroll_constraint=unroll)


def test_cost_examples():
    assert cost(1) == (18, 21)
    assert cost(7) == (54, 57)
    assert cost(15) == (102, 105)
    assert flops_per_dof(7) == 111
    assert flops_per_dof(15) == 207
    with pytest.raises(ValueError):
        cost(0)


def test_traffic_and_intensity():
    assert traffic_per_dof() == (56, 8)
    assert intensity(7) == 111 / 64
    assert intensity(15) == 207 / 64
    assert intensity(1) == 39 / 64


def test_bandwidth_throughput():
    assert bandwidth_throughput(76.8e9) == pytest.approx(1.2e9)
    assert bandwidth_throughput(64.0) == 1.0
    with pytest.raises(ValueError):
        bandwidth_throughput(0.0)


def test_constrain_examples():
    assert constrain_throughput(5.5, 7) == 4
    assert constrain_throughput(2.9, 7) == 2
    assert constrain_throughput(7.9, 15) == 4
    assert constrain_throughput(16.0, 15) == 16
    assert constrain_throughput(10.0, 2) == 1   # 3 points, nothing divides
    with pytest.raises(InfeasibleConfigError):
        constrain_throughput(0.97, 7)


@settings(max_examples=300)
@given(t_raw=st.floats(min_value=1.0, max_value=1e7),
       degree=st.integers(min_value=1, max_value=31))
def test_constrain_properties(t_raw, degree):
    t = constrain_throughput(t_raw, degree)
    n = degree + 1
    assert t >= 1
    assert t & (t - 1) == 0          # power of two
    assert n % t == 0
    assert t <= t_raw
    # maximality: no admissible larger power of two exists
    q = t * 2
    while q <= t_raw:
        assert n % q != 0
        q *= 2


@given(t_raw=st.floats(max_value=0.9999999,
                       allow_nan=False, allow_infinity=False))
def test_constrain_rejects_below_one(t_raw):
    with pytest.raises(InfeasibleConfigError):
        constrain_throughput(t_raw, 7)


def test_padding_gain_examples():
    assert padding_gain(8, 2, 1) == pytest.approx(1.458)
    assert padding_gain(9, 4, 2) == pytest.approx(2.3148148148, rel=1e-9)


def test_padding_gain_validation():
    with pytest.raises(ValueError):
        padding_gain(8, 0, 1)
    with pytest.raises(ValueError):
        padding_gain(8, 2.5, 1)
    with pytest.raises(ValueError):
        padding_gain(8, 2, 0)
    with pytest.raises(ValueError):
        padding_gain(8, 4, 1)   # 10 points not divisible by 4


@settings(max_examples=300)
@given(st.data())
def test_padding_gain_properties(data):
    degree = data.draw(st.integers(min_value=1, max_value=31))
    p = data.draw(st.integers(min_value=1, max_value=8))
    n2 = degree + 1 + p
    divisors = [q for q in range(1, n2 + 1) if n2 % q == 0]
    t2 = data.draw(st.sampled_from(divisors))
    gain = padding_gain(degree, t2, p)
    assert 0.0 < gain < t2          # strictly: padded work is partly wasted
    assert gain == t2 * ((degree + 1) / n2) ** 3


def test_bandwidth_bound_device():
    # 19.2 GB/s at 300 MHz feeds exactly one DOF per cycle
    dev = bw_only(19.2)
    rpt = peak_performance(dev, 7)
    assert rpt.t_max == 1.0
    assert rpt.bound == "bandwidth"
    assert rpt.p_max_gflops == pytest.approx(111 * 1 * 300e6 / 1e9)
    assert rpt.resource_dofs_per_cycle == np.inf
    # without the unroll floor the fractional rate survives
    frac = peak_performance(bw_only(30.0, unroll=False), 7)
    assert frac.t_max == pytest.approx(30.0 / 64.0 * 1e9 / 300e6)


def test_starved_device_infeasible():
    with pytest.raises(InfeasibleConfigError):
        peak_performance(bw_only(10.0), 7)   # 0.52 DOFs/cycle
    # the same bandwidth is representable once the floor is off
    rpt = peak_performance(bw_only(10.0, unroll=False), 7)
    assert 0.0 < rpt.t_max < 1.0


def test_resource_limited_device():
    dev = DeviceSpec(name="r", freq_mhz=300.0, bandwidth_gbs=1e6,
                     alm_total=100000, dsp_total=1000,
                     r_add=ResourceCost(dsp=1.0, alm=300.0),
                     r_mult=ResourceCost(dsp=2.0, alm=500.0),
                     r_base=(100.0, 10000.0, 0.0))
    rpt = peak_performance(dev, 7)
    t_dsp = (1000 - 100) / (54 * 1 + 57 * 2)
    t_alm = (100000 - 10000) / (54 * 300 + 57 * 500)
    assert rpt.resource_dofs_per_cycle == pytest.approx(min(t_dsp, t_alm))
    assert rpt.t_max == 2.0
    assert rpt.bound == ("dsp" if t_dsp < t_alm else "logic")


def test_throughput_override_wins():
    dev = DeviceSpec(name="o", freq_mhz=300.0, bandwidth_gbs=1e6,
                     dsp_total=1, r_add=ResourceCost(dsp=100.0),
                     throughput_override={7: 8.0},
                     override_bound="dsp", unroll_constraint=False)
    rpt = peak_performance(dev, 7)
    assert rpt.t_max == 8.0
    assert rpt.bound == "dsp"
    # degrees without an override fall back to the resource computation
    assert peak_performance(dev, 3).t_max < 0.01
    floored = dataclasses.replace(dev, unroll_constraint=True)
    with pytest.raises(InfeasibleConfigError):
        peak_performance(floored, 3)


def test_insufficient_base_resources():
    dev = DeviceSpec(name="b", freq_mhz=300.0, bandwidth_gbs=100.0,
                     dsp_total=10, r_add=ResourceCost(dsp=0.1),
                     r_base=(50.0, 0.0, 0.0))
    with pytest.raises(InfeasibleConfigError, match="base"):
        peak_performance(dev, 7)


def test_bram_feasibility_gate():
    dev = DeviceSpec(name="m", freq_mhz=300.0, bandwidth_gbs=100.0,
                     bram_total=100, r_base=(0.0, 0.0, 40.0),
                     bram_per_element={7: 70.0, 3: 10.0})
    with pytest.raises(InfeasibleConfigError, match="BRAM"):
        peak_performance(dev, 7)
    assert peak_performance(dev, 3).t_max >= 1   # 40 + 10 fits
    assert peak_performance(dev, 5).t_max >= 1   # no entry, no gate


def test_monotone_in_bandwidth():
    prev = 0.0
    for bw in (20.0, 40.0, 80.0, 160.0, 320.0):
        p = peak_performance(bw_only(bw), 7).p_max_gflops
        assert p >= prev
        prev = p


def test_peak_never_exceeds_roofline():
    for name in list_devices():
        dev = load_device(name)
        for degree in range(1, 16):
            try:
                rpt = peak_performance(dev, degree)
            except InfeasibleConfigError:
                continue
            assert rpt.p_max_gflops <= rpt.roofline_gflops * (1 + 1e-12), \
                (name, degree)


def test_all_shipped_devices_load():
    names = list_devices()
    assert len(names) == 13
    assert "stratix10" in names and "hypothetical" in names
    for name in names:
        dev = load_device(name)
        assert dev.freq_mhz > 0 and dev.bandwidth_gbs > 0


def test_stratix10_fields():
    dev = load_device("stratix10")
    assert dev.bandwidth_gbs == 76.8
    assert dev.freq_hz(7) == 274e6      # per-degree table
    assert dev.freq_hz(2) == 300e6      # fallback clock
    assert dev.unroll_constraint
    assert dev.bram_per_element[15] == 128


def test_load_device_path_and_errors(tmp_path):
    f = tmp_path / "dev.toml"
    f.write_text('freq_mhz = 250\nbandwidth_gbs = 100\n')
    dev = load_device(str(f))
    assert dev.name == "dev" and dev.freq_mhz == 250
    with pytest.raises(DeviceFileError, match="shipped"):
        load_device("no_such_device")
    f.write_text('bandwidth_gbs = 100\n')
    with pytest.raises(DeviceFileError, match="missing"):
        load_device(str(f))
    f.write_text('freq_mhz = -1\nbandwidth_gbs = 100\n')
    with pytest.raises(DeviceFileError):
        load_device(str(f))
    f.write_text('freq_mhz = 250\nbandwidth_gbs = 100\n'
                 '[throughput_override]\nseven = 8\n')
    with pytest.raises(DeviceFileError, match="per-degree"):
        load_device(str(f))


def test_measured_reference_rows():
    rows = load_measured("stratix10")
    assert [r["degree"] for r in rows] == [1, 3, 5, 7, 9, 11, 13, 15]
    for r in rows:
        assert isinstance(r["degree"], int)
        assert r["freq_mhz"] > 0 and r["gflops"] > 0
        assert 0 < r["dofs_per_cycle"] <= 4
    with pytest.raises(DeviceFileError):
        load_measured("hypothetical")


def test_model_error():
    assert model_error(2.0, 1.9) == pytest.approx(5.0)
    assert model_error(4.0, 4.0) == 0.0
    assert model_error(2.0, 2.2) == pytest.approx(-10.0)
    with pytest.raises(ValueError):
        model_error(0.0, 1.0)


def test_report_is_complete():
    rpt = peak_performance(load_device("stratix10"), 7)
    as_dict = dataclasses.asdict(rpt)
    assert as_dict["device"].startswith("stratix10")
    assert as_dict["cost"] == (54, 57)
    assert as_dict["traffic"] == (56, 8)
    assert all(v is not None for v in as_dict.values())
