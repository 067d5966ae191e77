"""Constant-modulus DPSK/MSK baseband waveforms and passband utilities.

Waveforms are built from random binary chip sequences.  The DPSK variant
shapes the in-phase and quadrature branches with rectified cosine/sine
envelopes (the in-phase chip stream is delayed by half a chip), which keeps
the complex envelope at exactly unit modulus while making the phase
continuous across chip boundaries.  The MSK variant is a pure phase signal
whose per-chip phase ramp direction follows the chip stream, with the phase
origin of each chip chosen so the total phase is continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

DPSK = "dpsk"
MSK = "msk"

_SEED_T = "int | Sequence[int]"


@dataclass
class ModulationParams:
    """Chip timing and sampling grid shared by all waveforms of an alphabet.

    Parameters
    ----------
    n_chips : int
        Number of binary chips per pulse.
    chip_duration : float
        Chip interval in seconds.
    sample_rate : float
        Baseband sampling rate in Hz.  ``sample_rate * chip_duration`` must
        be a positive integer (whole samples per chip).
    baseband_freq : float, optional
        Shaping frequency in Hz.  Defaults to ``1 / (2 * chip_duration)``
        and must equal it to within 1e-12 relative.
    carrier_freq : float, optional
        Carrier frequency in Hz, only needed for passband conversion.
    """

    n_chips: int
    chip_duration: float
    sample_rate: float
    baseband_freq: float | None = None
    carrier_freq: float | None = None

    def __post_init__(self):
        if self.n_chips < 1:
            raise ValueError(f"n_chips must be >= 1, got {self.n_chips}")
        if self.chip_duration <= 0 or self.sample_rate <= 0:
            raise ValueError("chip_duration and sample_rate must be positive")
        nominal = 1.0 / (2.0 * self.chip_duration)
        if self.baseband_freq is None:
            self.baseband_freq = nominal
        elif abs(self.baseband_freq - nominal) > 1e-12 * nominal:
            raise ValueError(
                f"baseband_freq {self.baseband_freq} != 1/(2*chip_duration) = {nominal}"
            )
        spc = self.sample_rate * self.chip_duration
        if abs(spc - round(spc)) > 1e-9 or round(spc) < 1:
            raise ValueError(
                f"sample_rate * chip_duration = {spc} is not a positive integer"
            )

    @property
    def samples_per_chip(self) -> int:
        return int(round(self.sample_rate * self.chip_duration))

    @property
    def n_samples(self) -> int:
        return self.n_chips * self.samples_per_chip

    @property
    def pulse_duration(self) -> float:
        return self.n_chips * self.chip_duration

    def to_dict(self) -> dict:
        return {
            "n_chips": self.n_chips,
            "chip_duration": self.chip_duration,
            "sample_rate": self.sample_rate,
            "baseband_freq": self.baseband_freq,
            "carrier_freq": self.carrier_freq,
        }


@dataclass
class ChipSequence:
    """Binary chips in {-1, +1} together with the seed that produced them."""

    chips: np.ndarray
    seed: object = None

    def __post_init__(self):
        self.chips = np.asarray(self.chips, dtype=np.int64)
        if self.chips.ndim != 1 or self.chips.size == 0:
            raise ValueError("chips must be a nonempty 1-D vector")
        if not np.all(np.abs(self.chips) == 1):
            raise ValueError("every chip must be exactly -1 or +1")

    def __len__(self) -> int:
        return self.chips.size


@dataclass
class BasebandWaveform:
    """One complex baseband pulse sampled on the modulation grid."""

    samples: np.ndarray
    params: ModulationParams
    kind: str
    chips: ChipSequence | None = None
    theta0: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValueError("samples must be a 1-D complex vector")
        if self.samples.size != self.params.n_samples:
            raise ValueError(
                f"sample count {self.samples.size} != n_chips * samples_per_chip "
                f"= {self.params.n_samples}"
            )
        dev = np.max(np.abs(np.abs(self.samples) - 1.0))
        if dev > 1e-6:
            raise ValueError(f"waveform is not constant modulus (max |.|-1 = {dev:.3g})")

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class WaveformAlphabet:
    """K constant-modulus pulses sharing one sampling grid; K symbols."""

    waveforms: list

    def __post_init__(self):
        k = len(self.waveforms)
        if k < 1 or (k & (k - 1)) != 0:
            raise ValueError(f"alphabet size must be a power of two, got {k}")
        first = self.waveforms[0]
        for wf in self.waveforms[1:]:
            if len(wf) != len(first) or wf.params.to_dict() != first.params.to_dict():
                raise ValueError("all alphabet waveforms must share length and params")

    @property
    def size(self) -> int:
        return len(self.waveforms)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.size))

    @property
    def pulse_len(self) -> int:
        return len(self.waveforms[0])

    @property
    def params(self) -> ModulationParams:
        return self.waveforms[0].params

    def sample_matrix(self) -> np.ndarray:
        """Stack the K pulses into a (K, L) complex array."""
        return np.stack([wf.samples for wf in self.waveforms])

    def __iter__(self):
        return iter(self.waveforms)

    def __getitem__(self, k):
        return self.waveforms[k]


def generate_chip_sequence(n: int, seed) -> ChipSequence:
    """Draw ``n`` chips in {-1, +1} as signs of i.i.d. Gaussian variates.

    Deterministic for a fixed seed; ``seed`` may be an int or a sequence of
    ints (used to derive per-waveform substreams).
    """
    if n < 1:
        raise ValueError(f"chip count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal(n)
    chips = np.where(draws >= 0.0, 1, -1)
    return ChipSequence(chips=chips, seed=seed)


def _chip_levels(chips: ChipSequence) -> np.ndarray:
    # exp(j*pi*(x+1)/2) for x in {-1,+1} is real-valued: -1 -> +1, +1 -> -1.
    return -chips.chips.astype(np.float64)


def _delayed_chip_index(p: np.ndarray, spc: int, n_chips: int) -> np.ndarray:
    # Chip index of the half-chip-delayed stream at sample p: floor((p - spc/2)/spc).
    # Works for any integer samples-per-chip (no fractional-delay interpolation:
    # the chip stream is piecewise constant).  Samples before the first chip
    # boundary hold the value of chip 0.
    idx = (2 * p - spc) // (2 * spc)
    return np.clip(idx, 0, n_chips - 1)


def synth_dpsk(chips: ChipSequence, params: ModulationParams) -> BasebandWaveform:
    """Synthesize a DPSK pulse from a chip sequence.

    The real part carries the half-chip-delayed chip stream under a
    rectified-cosine envelope, the imaginary part the undelayed stream under
    a rectified-sine envelope, so that the modulus is exactly 1 everywhere.

    Parameters
    ----------
    chips : ChipSequence
        Exactly ``params.n_chips`` binary chips.
    params : ModulationParams
        Timing/sampling grid.

    Returns
    -------
    BasebandWaveform
        Complex pulse of length ``n_chips * samples_per_chip``.
    """
    if len(chips) != params.n_chips:
        raise ValueError(f"chip count {len(chips)} != params.n_chips {params.n_chips}")
    spc = params.samples_per_chip
    n = params.n_samples
    p = np.arange(n)
    levels = _chip_levels(chips)
    arg = np.pi * p / spc  # 2*pi*f_b*t on the sample grid
    cos_env = np.abs(np.cos(arg))
    sin_env = np.abs(np.sin(arg))
    s_delayed = levels[_delayed_chip_index(p, spc, params.n_chips)]
    s_direct = levels[p // spc]
    samples = s_delayed * cos_env + 1j * s_direct * sin_env
    return BasebandWaveform(samples=samples, params=params, kind=DPSK, chips=chips)


def synth_msk(chips: ChipSequence, params: ModulationParams,
              theta0: float = 0.0) -> BasebandWaveform:
    """Synthesize an MSK pulse: e^{-j(theta_o + s_d(t) pi f_b t)}.

    ``theta_o`` is re-anchored at every chip boundary so the total phase is
    continuous; ``theta0`` sets the phase origin of the first chip.
    """
    if len(chips) != params.n_chips:
        raise ValueError(f"chip count {len(chips)} != params.n_chips {params.n_chips}")
    if not np.isfinite(theta0):
        raise ValueError("theta0 must be finite")
    spc = params.samples_per_chip
    fb = params.baseband_freq
    tau = params.chip_duration
    levels = _chip_levels(chips)
    # theta_o[c+1] = theta_o[c] + (s[c] - s[c+1]) * pi * f_b * (c+1)*tau
    n_chips = params.n_chips
    bounds = np.arange(1, n_chips) * tau
    increments = (levels[:-1] - levels[1:]) * np.pi * fb * bounds
    theta_o = theta0 + np.concatenate([[0.0], np.cumsum(increments)])
    p = np.arange(params.n_samples)
    c = p // spc
    t = p / params.sample_rate
    phase = theta_o[c] + levels[c] * np.pi * fb * t
    samples = np.exp(-1j * phase)
    return BasebandWaveform(samples=samples, params=params, kind=MSK,
                            chips=chips, theta0=theta0)


def make_alphabet(size: int, params: ModulationParams, kind: str = DPSK,
                  seed=0, theta0: float = 0.0) -> WaveformAlphabet:
    """Build K pulses from K independent chip streams derived from ``seed``.

    Chip streams are drawn from substreams ``(seed, k)``; duplicate streams
    (astronomically unlikely) are redrawn deterministically so the alphabet
    is always pairwise distinct.
    """
    waveforms = []
    seen = set()
    for k in range(size):
        retry = 0
        while True:
            chips = generate_chip_sequence(params.n_chips, seed=(seed, k, retry))
            key = chips.chips.tobytes()
            if key not in seen:
                seen.add(key)
                break
            retry += 1
        if kind == DPSK:
            waveforms.append(synth_dpsk(chips, params))
        elif kind == MSK:
            waveforms.append(synth_msk(chips, params, theta0=theta0))
        else:
            raise ValueError(f"unknown waveform kind {kind!r}")
    return WaveformAlphabet(waveforms=waveforms)


def to_passband(wf: BasebandWaveform, carrier_freq: float,
                pass_rate: float) -> np.ndarray:
    """Upconvert a baseband pulse: Re(psi(t) e^{j 2 pi f_c t}) on the passband grid.

    ``pass_rate`` must be an integer multiple of the baseband rate (the
    complex envelope is upsampled by sample-and-hold) and must satisfy
    ``pass_rate > 2 * (carrier_freq + baseband_freq)``.
    """
    if carrier_freq <= 0:
        raise ValueError("carrier_freq must be positive")
    if pass_rate <= 2.0 * (carrier_freq + wf.params.baseband_freq):
        raise ValueError(
            f"pass_rate {pass_rate} undersamples the carrier: need "
            f"> 2*(f_c + f_b) = {2.0 * (carrier_freq + wf.params.baseband_freq)}"
        )
    ratio = pass_rate / wf.params.sample_rate
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ValueError(
            f"pass_rate must be an integer multiple of sample_rate, ratio={ratio}"
        )
    r = int(round(ratio))
    envelope = np.repeat(wf.samples, r)
    t = np.arange(envelope.size) / pass_rate
    return (envelope * np.exp(2j * np.pi * carrier_freq * t)).real


def passband_envelope_phase_form(wf: BasebandWaveform, carrier_freq: float,
                                 pass_rate: float) -> np.ndarray:
    """Equivalent passband signal via |psi(t)| cos(2 pi f_c t + arg psi(t))."""
    ratio = pass_rate / wf.params.sample_rate
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ValueError("pass_rate must be an integer multiple of sample_rate")
    r = int(round(ratio))
    envelope = np.repeat(wf.samples, r)
    t = np.arange(envelope.size) / pass_rate
    return np.abs(envelope) * np.cos(2.0 * np.pi * carrier_freq * t
                                     + np.angle(envelope))


def demodulate_iq(passband: np.ndarray, carrier_freq: float,
                  pass_rate: float) -> np.ndarray:
    """Recover I(t) + jQ(t) by mixing with cos/-sin and low-pass filtering.

    The low-pass is a centered moving average over one carrier period, which
    nulls the double-frequency mixing products exactly when the carrier
    period is a whole number of passband samples.  Edge samples (half a
    window at each end) are transient.
    """
    passband = np.asarray(passband, dtype=np.float64)
    if carrier_freq <= 0:
        raise ValueError("carrier_freq must be positive")
    if pass_rate <= 2.0 * carrier_freq:
        raise ValueError(
            f"pass_rate {pass_rate} undersamples the carrier {carrier_freq}"
        )
    window = max(int(round(pass_rate / carrier_freq)), 1)
    t = np.arange(passband.size) / pass_rate
    i_mix = 2.0 * passband * np.cos(2.0 * np.pi * carrier_freq * t)
    q_mix = -2.0 * passband * np.sin(2.0 * np.pi * carrier_freq * t)
    kernel = np.full(window, 1.0 / window)
    i_branch = np.convolve(i_mix, kernel, mode="same")
    q_branch = np.convolve(q_mix, kernel, mode="same")
    return i_branch + 1j * q_branch


def decimate_to_baseband(demodulated: np.ndarray, wf_len: int,
                         upsample: int) -> np.ndarray:
    """Pick hold-interval centers of a demodulated passband signal.

    Companion to :func:`to_passband` / :func:`demodulate_iq` round trips:
    sampling mid-hold keeps the moving-average window inside one held
    baseband sample.
    """
    idx = np.arange(wf_len) * upsample + upsample // 2
    return demodulated[idx]


def cross_correlation_peak(a: np.ndarray, b: np.ndarray) -> float:
    """Peak of |cross-correlation| over all lags, normalized to [0, 1]."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    xc = np.correlate(a, b, mode="full")
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(np.max(np.abs(xc)) / denom)
