"""Tapped-delay-line multipath channel with Rayleigh taps, plus AWGN.

Presets tdl4/tdl20/tdl24 spread their taps uniformly over a shared
300 ns delay span with exponentially decaying average power (2.5 dB per
tap, unit total), stored as packaged text tables of `delay_s gain_db`
rows.  Fewer taps over the same span means a sparser, more frequency-
selective response; denser profiles average out to a smoother one.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

PRESET_NAMES = ("tdl4", "tdl20", "tdl24")


@dataclass(frozen=True)
class TdlChannelSpec:
    """Average power-delay profile of a tapped-delay-line channel."""

    path_delays_s: np.ndarray
    avg_path_gains_db: np.ndarray

    def __post_init__(self):
        delays = np.asarray(self.path_delays_s, dtype=float)
        gains = np.asarray(self.avg_path_gains_db, dtype=float)
        if delays.ndim != 1 or delays.shape != gains.shape or len(delays) < 1:
            raise ValueError("delays and gains must be equal-length 1-d arrays")
        if np.any(delays < 0) or not np.all(np.isfinite(delays)):
            raise ValueError("path delays must be finite and non-negative")
        if np.any(np.diff(delays) < 0):
            raise ValueError("path delays must be sorted ascending")
        object.__setattr__(self, "path_delays_s", delays)
        object.__setattr__(self, "avg_path_gains_db", gains)

    @property
    def num_paths(self) -> int:
        return len(self.path_delays_s)


@dataclass(frozen=True)
class ChannelRealization:
    """One random draw of complex tap gains for a TdlChannelSpec."""

    tap_gains: np.ndarray


@dataclass(frozen=True)
class Cfr:
    """Channel frequency response sampled on the used subcarriers."""

    h: np.ndarray
    subcarrier_spacing_hz: float


def load_preset(name: str) -> TdlChannelSpec:
    """Load a built-in power-delay profile by name ('tdl4', 'tdl20', 'tdl24')."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown channel preset {name!r}, expected one of {PRESET_NAMES}")
    text = (importlib.resources.files("rffsim.data") / f"{name}.txt").read_text()
    delays, gains = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        d, g = line.split()
        delays.append(float(d))
        gains.append(float(g))
    return TdlChannelSpec(np.array(delays), np.array(gains))


def realize(spec: TdlChannelSpec, seed: int) -> ChannelRealization:
    """Draw complex Gaussian tap gains a_i with E|a_i|^2 = 10^(gain_db/10).

    A gain of -inf dB yields an exactly-zero tap.
    """
    rng = np.random.default_rng(seed)
    sigma = 10.0 ** (spec.avg_path_gains_db / 20.0)
    g = rng.standard_normal(spec.num_paths) + 1j * rng.standard_normal(spec.num_paths)
    return ChannelRealization(tap_gains=sigma * g / np.sqrt(2.0))


def cfr(
    realization: ChannelRealization,
    spec: TdlChannelSpec,
    n_subcarriers: int,
    subcarrier_spacing_hz: float,
) -> Cfr:
    """Evaluate H(k) = sum_i a_i * exp(-j*2*pi*k*df*tau_i) for k = 0..K-1."""
    k = np.arange(n_subcarriers)
    phases = np.exp(
        -2j * np.pi * subcarrier_spacing_hz * np.outer(k, spec.path_delays_s)
    )
    return Cfr(h=phases @ realization.tap_gains, subcarrier_spacing_hz=subcarrier_spacing_hz)


def awgn(x: np.ndarray, snr_db: float, signal_power: float, seed: int) -> np.ndarray:
    """Add circular complex Gaussian noise at the requested SNR.

    Parameters
    ----------
    x : ndarray
        Complex samples.
    snr_db : float
        Target SNR in dB; np.inf disables noise and returns a copy.
    signal_power : float
        Reference signal power; the noise variance is
        signal_power * 10^(-snr_db/10).
    seed : int
        Seed for the noise draw.
    """
    x = np.asarray(x, dtype=complex)
    if signal_power <= 0 or not np.isfinite(signal_power):
        raise ValueError(f"signal_power must be positive and finite, got {signal_power}")
    if np.isinf(snr_db):
        return x.copy()
    var = signal_power * 10.0 ** (-snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + np.sqrt(var / 2.0) * noise
