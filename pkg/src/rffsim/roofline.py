"""Roofline latency model for the identification pipeline.

Each code block is charged max(flops/peak, bytes/bandwidth) and labeled
compute- or memory-bound; the air-interface budget adds frame alignment
(half a TTI) and one TTI of transmission on top of the terminal and
base-station processing blocks.  A profiler measures the implemented
pipeline's FLOP/byte totals under the fixed counting rules of
`flops.OpCounter`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cnn as cnn_mod
from . import extractor as ext
from . import impairments as imp
from . import link as link_mod
from .flops import OpCounter

# reference machine of the latency tables
PEAK_FLOPS = 403.2e9
MEM_BANDWIDTH = 17.06e9

# published workload table for the two pipeline blocks
UE_WORKLOAD_FLOPS = 7.34e5
UE_WORKLOAD_BYTES = 5.91e5
BS_WORKLOAD_FLOPS = 1.37e6
BS_WORKLOAD_BYTES = 1.39e6
REPORTED_T_RFFI_S = 81.04e-6

BASE_SCS_HZ = 15e3
SUPPORTED_SCS_HZ = (15e3, 30e3, 60e3, 120e3)


@dataclass(frozen=True)
class RooflineParams:
    """Machine envelope: peak compute rate and memory bandwidth."""

    peak_flops: float = PEAK_FLOPS
    mem_bandwidth: float = MEM_BANDWIDTH

    def __post_init__(self):
        if self.peak_flops <= 0 or self.mem_bandwidth <= 0:
            raise ValueError("peak FLOP rate and bandwidth must be positive")


@dataclass(frozen=True)
class WorkloadProfile:
    """FLOP and memory-traffic totals of one code block."""

    name: str
    flops: float
    bytes: float

    def __post_init__(self):
        if self.flops < 0 or self.bytes < 0:
            raise ValueError("workload totals must be non-negative")


@dataclass(frozen=True)
class LatencyBreakdown:
    """Air-interface latency components, all in seconds."""

    t_ue: float
    t_f: float
    t_tti: float
    t_rffi: float

    @property
    def t_air(self) -> float:
        return self.t_ue + self.t_f + self.t_tti + self.t_rffi

    def as_dict(self) -> dict:
        return {"t_ue": self.t_ue, "t_f": self.t_f, "t_tti": self.t_tti,
                "t_rffi": self.t_rffi, "t_air": self.t_air}


def block_time(w: WorkloadProfile, p: RooflineParams) -> tuple[float, str]:
    """Roofline time of one block and whether compute or memory binds it.

    The block takes max(flops/peak, bytes/bandwidth) seconds; an exact
    tie is labeled compute-bound by convention.
    """
    t_compute = w.flops / p.peak_flops
    t_memory = w.bytes / p.mem_bandwidth
    if t_memory > t_compute:
        return t_memory, "memory"
    return t_compute, "compute"


def tti_duration(scs_hz: float) -> float:
    """Slot duration 1 ms / 2^mu for numerology mu = log2(scs / 15 kHz)."""
    if scs_hz not in SUPPORTED_SCS_HZ:
        raise ValueError(f"unsupported subcarrier spacing {scs_hz}, "
                         f"expected one of {SUPPORTED_SCS_HZ}")
    mu = round(math.log2(scs_hz / BASE_SCS_HZ))
    return 1e-3 / 2 ** mu


def air_latency(
    ue: WorkloadProfile,
    bs: WorkloadProfile,
    scs_hz: float,
    p: RooflineParams,
    t_rffi_override: float | None = None,
) -> tuple[LatencyBreakdown, dict]:
    """Total air-interface latency budget and the per-block bound kinds.

    Frame alignment costs half a TTI (expected wait to the next slot
    boundary) and the transmission itself one TTI.  The override slot
    replaces the computed base-station time with an externally reported
    figure while keeping everything else identical.
    """
    t_ue, ue_bound = block_time(ue, p)
    t_bs, bs_bound = block_time(bs, p)
    if t_rffi_override is not None:
        if t_rffi_override < 0:
            raise ValueError("override time must be non-negative")
        t_bs = t_rffi_override
    t_tti = tti_duration(scs_hz)
    breakdown = LatencyBreakdown(t_ue=t_ue, t_f=t_tti / 2.0, t_tti=t_tti,
                                 t_rffi=t_bs)
    return breakdown, {"ue": ue_bound, "bs": bs_bound}


def reference_workloads() -> tuple[WorkloadProfile, WorkloadProfile]:
    """The published per-block workload totals."""
    return (
        WorkloadProfile("ue", UE_WORKLOAD_FLOPS, UE_WORKLOAD_BYTES),
        WorkloadProfile("bs", BS_WORKLOAD_FLOPS, BS_WORKLOAD_BYTES),
    )


def latency_report(
    ue: WorkloadProfile | None = None,
    bs: WorkloadProfile | None = None,
    scs_hz: float = 60e3,
    params: RooflineParams | None = None,
    t_rffi_override: float | None = None,
) -> dict:
    """JSON-ready latency summary with the reference table as default."""
    ref_ue, ref_bs = reference_workloads()
    ue = ue or ref_ue
    bs = bs or ref_bs
    params = params or RooflineParams()
    breakdown, bounds = air_latency(ue, bs, scs_hz, params, t_rffi_override)
    report = breakdown.as_dict()
    report["bound_kinds"] = bounds
    report["params"] = {"peak_flops": params.peak_flops,
                        "mem_bandwidth": params.mem_bandwidth,
                        "scs_hz": scs_hz}
    return report


def _count_ue_block(counter: OpCounter, config: link_mod.LinkConfig) -> None:
    """Charge pilot generation plus the transmit chain under the fixed rules."""
    K = config.n_subcarriers
    n = config.fft_size
    # pilot draw: one table lookup per subcarrier
    counter.write(K, counter.COMPLEX_BYTES)
    # IFFT onto the FFT grid, then the peak back-off scaling
    counter.read(K, counter.COMPLEX_BYTES)
    counter.fft(n)
    counter.write(n, counter.COMPLEX_BYTES)
    counter.cabs(n)
    counter.cmul(n)
    # IQ image mixing: mu*x + nu*conj(x)
    counter.read(n, counter.COMPLEX_BYTES)
    counter.cmul(2 * n)
    counter.cadd(n)
    counter.write(n, counter.COMPLEX_BYTES)
    # memory-polynomial amplifier: one |x|^(2k) weighted tap per (m, k)
    depth, order = imp.PA_MEMORY_DEPTH, imp.PA_NONLINEAR_ORDER
    counter.read(n, counter.COMPLEX_BYTES)
    counter.cabs(n)
    for _ in range(depth):
        for _ in range(order):
            counter.rmul(n)            # envelope power update
            counter.cmul(2 * n)        # coefficient and envelope weighting
            counter.cadd(n)
    counter.write(n, counter.COMPLEX_BYTES)
    # oscillator rotation e^{j(2 pi cfo t + cpo)}
    counter.cexp(n)
    counter.cmul(n)
    counter.write(n, counter.COMPLEX_BYTES)


def _count_bs_front(counter: OpCounter, config: link_mod.LinkConfig) -> None:
    """Charge capture FFTs and least-squares estimation for two antennas."""
    K = config.n_subcarriers
    n = config.fft_size
    for _ in range(2):
        counter.read(n, counter.COMPLEX_BYTES)
        counter.fft(n)
        counter.write(K, counter.COMPLEX_BYTES)
        counter.cdiv(K)                # LS division by the pilot
        counter.write(K, counter.COMPLEX_BYTES)


def _count_predict(counter: OpCounter, spec: cnn_mod.CnnSpec) -> None:
    """Charge one CNN forward pass (real multiply-adds, batch of one)."""
    rows, cols = spec.rows, spec.cols
    f1, f2 = spec.conv_filters

    def conv(h, w, c_in, c_out):
        macs = h * w * c_out * c_in * 9
        counter.rmul(macs)
        counter.radd(macs)
        counter.read(h * w * c_in + c_out * c_in * 9, counter.REAL_BYTES)
        counter.write(h * w * c_out, counter.REAL_BYTES)

    def bn_relu_pool(h, w, c):
        counter.rmul(2 * h * w * c)    # normalize and scale
        counter.radd(2 * h * w * c)    # shift and ReLU threshold test
        counter.radd(h * w * c * 3 // 4)  # pairwise max reductions
        counter.read(h * w * c, counter.REAL_BYTES)
        counter.write(h * w * c // 4, counter.REAL_BYTES)

    conv(rows, cols, 1, f1)
    bn_relu_pool(rows, cols, f1)
    conv(rows // 2, cols // 2, f1, f2)
    bn_relu_pool(rows // 2, cols // 2, f2)
    flat = spec.flat_len
    counter.rmul(flat * spec.n_classes)
    counter.radd(flat * spec.n_classes)
    counter.read(flat + flat * spec.n_classes, counter.REAL_BYTES)
    counter.write(spec.n_classes, counter.REAL_BYTES)


def profile_pipeline(
    config: link_mod.LinkConfig | None = None,
    subband: ext.SubbandConfig | None = None,
    n_classes: int = 10,
    seed: int = 0,
) -> tuple[WorkloadProfile, WorkloadProfile]:
    """Measure FLOP/byte totals of the terminal and base-station blocks.

    The terminal block covers pilot generation and the transmit chain;
    the base-station block covers capture FFTs, least-squares
    estimation, fingerprint extraction (instrumented directly), vector
    packing, and one classifier forward pass.
    """
    config = config or link_mod.LinkConfig()
    subband = subband or ext.SubbandConfig(normalization_mode="oracle-cfr-mean")
    ue_counter = OpCounter()
    _count_ue_block(ue_counter, config)

    bs_counter = OpCounter()
    _count_bs_front(bs_counter, config)
    # extraction cost measured on a representative simulated frame
    rng = np.random.default_rng(seed)
    pilot = link_mod.generate_pilot(config, seed)
    profile = imp.sample_profile(seed, imp.load_base_pa_coeffs())
    from . import channel as chan
    spec = chan.load_preset("tdl20")
    cap = link_mod.simulate_frame(
        pilot, profile, link_mod.DEFAULT_RX_PROFILES, spec,
        (int(rng.integers(2**31)), int(rng.integers(2**31))),
        (int(rng.integers(2**31)), int(rng.integers(2**31))),
        config, snr_db=20.0)
    est = link_mod.estimate_channels(cap, pilot)
    cal = ext.CalibrationR.from_rx_profiles(*link_mod.DEFAULT_RX_PROFILES,
                                            n_subcarriers=config.n_subcarriers)
    oracle = (cap.metadata["h1"], cap.metadata["h2"])
    feature = ext.extract_lldr(est, cal, subband, oracle_cfrs=oracle,
                               counter=bs_counter)
    ext.feature_to_vector(feature, counter=bs_counter)
    _count_predict(bs_counter, cnn_mod.CnnSpec(n_classes=n_classes,
                                               input_len=2 * config.n_subcarriers))
    return (
        WorkloadProfile("ue", ue_counter.flops, ue_counter.bytes),
        WorkloadProfile("bs", bs_counter.flops, bs_counter.bytes),
    )
