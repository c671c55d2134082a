"""Single-input two-antenna OFDM pilot link.

One frame sends one QPSK pilot symbol (optionally a second symbol through
the same channel realization) from one device to a two-antenna receiver:
time-domain transmit impairment chain, per-antenna multipath CFR, fixed
per-antenna receive response, AWGN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from . import impairments as imp


@dataclass(frozen=True)
class LinkConfig:
    """Numerology of the simulated link."""

    carrier_freq_hz: float = 10e9
    subcarrier_spacing_hz: float = 60e3
    bandwidth_hz: float = 10e6
    n_subcarriers: int = 160
    fft_size: int = 256

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_subcarriers > self.fft_size:
            raise ValueError("n_subcarriers must lie in [1, fft_size]")
        for width in (4, 8, 16, 32):
            if self.n_subcarriers % width:
                raise ValueError(
                    f"n_subcarriers must be divisible by {width}, got {self.n_subcarriers}"
                )
        if self.subcarrier_spacing_hz <= 0 or self.fft_size < 1:
            raise ValueError("invalid numerology")

    @property
    def fs_hz(self) -> float:
        return self.fft_size * self.subcarrier_spacing_hz


# Fixed, deliberately asymmetric receive pair used by all experiments; the
# relative response r = R2/R1 is what the extractor compensates.
DEFAULT_RX_PROFILES = (
    imp.RxAntennaProfile(antenna_id=0, iq_gain_db=-0.8, iq_phase_deg=-3.5),
    imp.RxAntennaProfile(antenna_id=1, iq_gain_db=0.8, iq_phase_deg=3.5),
)

QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def generate_pilot(config: LinkConfig, seed: int) -> np.ndarray:
    """Draw a unit-modulus QPSK pilot over the used subcarriers."""
    rng = np.random.default_rng(seed)
    return QPSK_POINTS[rng.integers(0, 4, size=config.n_subcarriers)]


@dataclass
class RxCapture:
    """Frequency-domain captures of one frame at both receive antennas."""

    y1: np.ndarray
    y2: np.ndarray
    snr_db: float
    y1_sym2: np.ndarray | None = None
    y2_sym2: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ChannelEstimate:
    """Least-squares channel estimates Z_i(k) = Y_i(k) / X(k)."""

    z1: np.ndarray
    z2: np.ndarray
    snr_db: float


def simulate_frame(
    pilot: np.ndarray,
    tx_profile: imp.ImpairmentProfile,
    rx_profiles: tuple[imp.RxAntennaProfile, imp.RxAntennaProfile],
    channel_spec: chan.TdlChannelSpec,
    channel_seeds: tuple[int, int],
    noise_seeds: tuple[int, int],
    config: LinkConfig,
    snr_db: float,
    pilot_sym2: np.ndarray | None = None,
    noise_seeds_sym2: tuple[int, int] | None = None,
) -> RxCapture:
    """Simulate one pilot frame through impairments, channel and noise.

    Per antenna i the capture is Y_i(k) = S(k) * H_i(k) * R_i(k) + N_i(k),
    where S is the transmit-chain output spectrum for the pilot.  The two
    antennas see independent channel realizations and independent noise.
    When pilot_sym2 is given, a second symbol passes through the same
    channel realizations with fresh noise.
    """
    K = config.n_subcarriers
    if len(pilot) != K:
        raise ValueError("pilot length must equal n_subcarriers")
    s = imp.tx_spectrum(pilot, tx_profile, config)
    h = [
        chan.cfr(chan.realize(channel_spec, cs), channel_spec, K,
                 config.subcarrier_spacing_hz).h
        for cs in channel_seeds
    ]
    r = [imp.rx_response(p, K) for p in rx_profiles]
    clean = [s * h[i] * r[i] for i in range(2)]
    # One fixed noise variance for both antennas, referenced to the nominal
    # received power: channel presets carry unit ensemble power, so the
    # reference is E|s*r|^2 rather than the realized frame power and a
    # faded realization lands below the configured SNR.  The K occupied
    # bins spread over fft_size time samples, so the per-bin noise sits
    # K/fft_size below bin power.
    occupancy = K / config.fft_size
    signal_power = occupancy * float(
        np.mean([np.mean(np.abs(s * ri) ** 2) for ri in r]))
    y1, y2 = (chan.awgn(clean[i], snr_db, signal_power, noise_seeds[i]) for i in range(2))
    capture = RxCapture(
        y1=y1, y2=y2, snr_db=snr_db,
        metadata={"device_id": tx_profile.device_id, "h1": h[0], "h2": h[1]},
    )
    if pilot_sym2 is not None:
        if noise_seeds_sym2 is None:
            raise ValueError("second pilot symbol requires its own noise seeds")
        s2 = imp.tx_spectrum(pilot_sym2, tx_profile, config)
        clean2 = [s2 * h[i] * r[i] for i in range(2)]
        power2 = occupancy * float(
            np.mean([np.mean(np.abs(s2 * ri) ** 2) for ri in r]))
        capture.y1_sym2 = chan.awgn(clean2[0], snr_db, power2, noise_seeds_sym2[0])
        capture.y2_sym2 = chan.awgn(clean2[1], snr_db, power2, noise_seeds_sym2[1])
    return capture


def estimate_channels(capture: RxCapture, pilot: np.ndarray) -> ChannelEstimate:
    """Least-squares estimates from both antennas of one symbol."""
    pilot = np.asarray(pilot, dtype=complex)
    if np.any(pilot == 0):
        raise ValueError("pilot must not contain zero entries")
    if len(pilot) != len(capture.y1):
        raise ValueError("pilot/capture length mismatch")
    return ChannelEstimate(z1=capture.y1 / pilot, z2=capture.y2 / pilot, snr_db=capture.snr_db)


def estimate_channels_sym2(capture: RxCapture, pilot_sym2: np.ndarray) -> ChannelEstimate:
    """Least-squares estimates of the optional second symbol."""
    if capture.y1_sym2 is None or capture.y2_sym2 is None:
        raise ValueError("capture carries no second symbol")
    pilot_sym2 = np.asarray(pilot_sym2, dtype=complex)
    if np.any(pilot_sym2 == 0):
        raise ValueError("pilot must not contain zero entries")
    return ChannelEstimate(
        z1=capture.y1_sym2 / pilot_sym2,
        z2=capture.y2_sym2 / pilot_sym2,
        snr_db=capture.snr_db,
    )
