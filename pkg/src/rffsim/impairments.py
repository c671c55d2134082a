"""Transmitter and receiver hardware impairment models.

Each simulated device carries a fixed set of RF non-idealities (IQ imbalance,
carrier/common phase offset, a memory-polynomial power amplifier) that act as
its radio-frequency fingerprint.  Receive antennas carry an IQ-imbalance
profile that reduces to a per-subcarrier multiplicative response.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

PA_MEMORY_DEPTH = 5
PA_NONLINEAR_ORDER = 5

# Transmit operating point: waveform peak driven into the PA.  6 dB of
# back-off keeps third-order products mild enough that the fingerprint
# stays pilot-stable (tolerances recorded in the oracle tests).
PA_BACKOFF_PEAK = 0.5

IQ_GAIN_RANGE_DB = 1.0
IQ_PHASE_RANGE_DEG = 5.0
DEFAULT_CFO_RANGE_HZ = 200.0
DEFAULT_PA_PERTURB_FRAC = 0.05


@dataclass(frozen=True)
class RxAntennaProfile:
    """IQ-imbalance parameters of one receive antenna."""

    antenna_id: int
    iq_gain_db: float
    iq_phase_deg: float


@dataclass
class ImpairmentProfile:
    """Fixed hardware signature of one transmitting device.

    pa_coeffs is a (5, 5) complex array; pa_coeffs[m, k-1] multiplies
    x[n-m] * |x[n-m]|^(k-1).
    """

    device_id: int
    iq_gain_db: float
    iq_phase_deg: float
    cfo_hz: float
    cpo_rad: float
    pa_coeffs: np.ndarray = field(repr=False)


def load_base_pa_coeffs(path=None) -> np.ndarray:
    """Load the shared base PA coefficient set from its versioned text file.

    Parameters
    ----------
    path : str or Path, optional
        Alternative coefficient file.  Defaults to the packaged set.

    Returns
    -------
    ndarray
        Complex array of shape (5, 5), indexed [memory_lag, order-1].
    """
    if path is None:
        ref = importlib.resources.files("rffsim.data") / "pa_base_coeffs.txt"
        text = ref.read_text()
    else:
        with open(path) as f:
            text = f.read()
    coeffs = np.zeros((PA_MEMORY_DEPTH, PA_NONLINEAR_ORDER), dtype=complex)
    seen = np.zeros_like(coeffs, dtype=bool)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m_s, k_s, re_s, im_s = line.split()
        m, k = int(m_s), int(k_s)
        if not (0 <= m < PA_MEMORY_DEPTH and 1 <= k <= PA_NONLINEAR_ORDER):
            raise ValueError(f"PA coefficient index out of range: m={m} k={k}")
        coeffs[m, k - 1] = float(re_s) + 1j * float(im_s)
        seen[m, k - 1] = True
    if not seen.any():
        raise ValueError("PA coefficient file contains no entries")
    if coeffs[0, 0] == 0:
        raise ValueError("base PA set must have a nonzero linear term a[0][0]")
    return coeffs


def iq_mixing_coeffs(gain_db: float, phase_deg: float) -> tuple[complex, complex]:
    """Direct/image mixing coefficients (mu, nu) of an IQ-imbalanced chain."""
    g = 10.0 ** (gain_db / 20.0)
    beta = np.deg2rad(phase_deg)
    rot = g * np.exp(1j * beta)
    return (1.0 + rot) / 2.0, (1.0 - rot) / 2.0


def apply_iq_imbalance(x: np.ndarray, gain_db: float, phase_deg: float) -> np.ndarray:
    """Apply an IQ gain/phase imbalance to complex baseband samples.

    Parameters
    ----------
    x : ndarray
        Complex baseband samples.
    gain_db : float
        Amplitude imbalance between the I and Q rails, in dB.
    phase_deg : float
        Quadrature phase error, in degrees.

    Returns
    -------
    ndarray
        y[n] = mu * x[n] + nu * conj(x[n]).  Identity when both
        parameters are zero; purely real inputs pass unchanged since
        mu + nu == 1.
    """
    x = np.asarray(x, dtype=complex)
    mu, nu = iq_mixing_coeffs(gain_db, phase_deg)
    return mu * x + nu * np.conj(x)


def apply_pa(x: np.ndarray, pa_coeffs: np.ndarray) -> np.ndarray:
    """Run samples through a memory-polynomial power amplifier.

    Parameters
    ----------
    x : ndarray
        Complex input samples.
    pa_coeffs : ndarray
        (5, 5) complex coefficient array, [memory_lag, order-1].

    Returns
    -------
    ndarray
        y[n] = sum_m sum_k pa_coeffs[m, k-1] * x[n-m] * |x[n-m]|^(k-1),
        with x[n] = 0 for n < 0.  Same length as the input.
    """
    x = np.asarray(x, dtype=complex)
    coeffs = np.asarray(pa_coeffs, dtype=complex)
    if coeffs.shape != (PA_MEMORY_DEPTH, PA_NONLINEAR_ORDER):
        raise ValueError(f"pa_coeffs must have shape (5, 5), got {coeffs.shape}")
    y = np.zeros_like(x)
    for m in range(PA_MEMORY_DEPTH):
        if not coeffs[m].any():
            continue
        xm = np.zeros_like(x)
        if m < len(x):
            xm[m:] = x[: len(x) - m]
        mag = np.abs(xm)
        basis = xm.copy()
        for j in range(PA_NONLINEAR_ORDER):
            if j > 0:
                basis = basis * mag
            if coeffs[m, j] != 0:
                y += coeffs[m, j] * basis
    return y


def apply_cfo_cpo(x: np.ndarray, cfo_hz: float, cpo_rad: float, fs_hz: float) -> np.ndarray:
    """Apply carrier frequency offset and common phase offset.

    y[n] = x[n] * exp(j * (2*pi*cfo_hz*n/fs_hz + cpo_rad)) for n = 0..N-1.
    """
    if fs_hz <= 0:
        raise ValueError(f"sample rate must be positive, got {fs_hz}")
    x = np.asarray(x, dtype=complex)
    n = np.arange(len(x))
    return x * np.exp(1j * (2.0 * np.pi * cfo_hz * n / fs_hz + cpo_rad))


def sample_profile(
    seed: int,
    base_pa: np.ndarray,
    device_id: int = 0,
    cfo_range_hz: float = DEFAULT_CFO_RANGE_HZ,
    pa_perturb_frac: float = DEFAULT_PA_PERTURB_FRAC,
) -> ImpairmentProfile:
    """Draw a random device profile, deterministic per seed.

    IQ gain is uniform on [-1, 1] dB, IQ phase uniform on [-5, 5] degrees,
    CFO uniform on +-cfo_range_hz, CPO uniform on [-pi, pi).  The PA set
    perturbs the real and imaginary part of every base coefficient
    independently within +-pa_perturb_frac relative.
    """
    rng = np.random.default_rng(seed)
    gain = rng.uniform(-IQ_GAIN_RANGE_DB, IQ_GAIN_RANGE_DB)
    phase = rng.uniform(-IQ_PHASE_RANGE_DEG, IQ_PHASE_RANGE_DEG)
    cfo = rng.uniform(-cfo_range_hz, cfo_range_hz)
    cpo = rng.uniform(-np.pi, np.pi)
    shape = (PA_MEMORY_DEPTH, PA_NONLINEAR_ORDER)
    re_fac = 1.0 + rng.uniform(-pa_perturb_frac, pa_perturb_frac, size=shape)
    im_fac = 1.0 + rng.uniform(-pa_perturb_frac, pa_perturb_frac, size=shape)
    base = np.asarray(base_pa, dtype=complex)
    pa = base.real * re_fac + 1j * base.imag * im_fac
    return ImpairmentProfile(
        device_id=device_id,
        iq_gain_db=gain,
        iq_phase_deg=phase,
        cfo_hz=cfo,
        cpo_rad=cpo,
        pa_coeffs=pa,
    )


def rx_response(profile: RxAntennaProfile, n_subcarriers: int) -> np.ndarray:
    """Per-subcarrier multiplicative response R(k) of a receive antenna.

    A receive chain's amplitude and phase mismatch acts as one complex
    gain on the already-mixed passband signal, so the response to a
    frequency-flat probe is R(k) = g * exp(j*beta), constant over k and
    equal to 1 for a zero-impairment profile.
    """
    g = 10.0 ** (profile.iq_gain_db / 20.0)
    beta = np.deg2rad(profile.iq_phase_deg)
    return np.full(n_subcarriers, g * np.exp(1j * beta), dtype=complex)


# --- transmit chain -------------------------------------------------------

def modulate_pilot(pilot: np.ndarray, config) -> tuple[np.ndarray, float]:
    """OFDM-modulate a frequency-domain pilot onto the low fft bins.

    Subcarrier k occupies fft bin k.  The time waveform is scaled so its
    peak magnitude equals the configured PA back-off (never above 1);
    the scale is returned so demodulation can undo it.
    """
    pilot = np.asarray(pilot, dtype=complex)
    if len(pilot) > config.fft_size:
        raise ValueError("pilot longer than fft size")
    grid = np.zeros(config.fft_size, dtype=complex)
    grid[: len(pilot)] = pilot
    x = np.fft.ifft(grid)
    peak = np.abs(x).max()
    if peak == 0:
        raise ValueError("pilot modulates to an all-zero waveform")
    scale = PA_BACKOFF_PEAK / peak
    return x * scale, scale


def demodulate(y: np.ndarray, scale: float, config) -> np.ndarray:
    """Recover the used-subcarrier spectrum from a time-domain symbol."""
    return np.fft.fft(np.asarray(y, dtype=complex))[: config.n_subcarriers] / scale


def tx_spectrum(pilot: np.ndarray, profile: ImpairmentProfile, config) -> np.ndarray:
    """Spectrum of one pilot symbol after the full transmit impairment chain.

    Chain order: IQ imbalance, PA, CFO/CPO, all on the time-domain
    waveform.  `config` needs fft_size, fs_hz and n_subcarriers.
    """
    x, scale = modulate_pilot(pilot, config)
    y = apply_iq_imbalance(x, profile.iq_gain_db, profile.iq_phase_deg)
    y = apply_pa(y, profile.pa_coeffs)
    y = apply_cfo_cpo(y, profile.cfo_hz, profile.cpo_rad, config.fs_hz)
    return demodulate(y, scale, config)


def oracle_tx_response(pilot: np.ndarray, profile: ImpairmentProfile, config) -> np.ndarray:
    """Ground-truth per-subcarrier transmit fingerprint T(k).

    Sends the pilot through the device's transmit chain with a flat unit
    channel, unit receive response and zero noise, then LS-estimates:
    T(k) = Y(k) / X(k).  Deterministic; an all-identity profile yields
    T(k) == 1 to numerical precision.
    """
    pilot = np.asarray(pilot, dtype=complex)
    if len(pilot) != config.n_subcarriers:
        raise ValueError("pilot length must equal the subcarrier count")
    if np.any(pilot == 0):
        raise ValueError("pilot must not contain zero entries")
    return tx_spectrum(pilot, profile, config) / pilot
