"""Convolution matrices and the stacked objective/constraint block system.

The per-waveform receive filter acts by convolution, so filter design is
linear algebra on tall Toeplitz (linear convolution) or square circulant
(circular convolution) matrices.  For a K-waveform alphabet the individual
systems are stacked into one block-diagonal objective matrix plus a banded
difference matrix whose nullspace is exactly the set of filter banks with
identical per-waveform outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError
from .waveform import BasebandWaveform, WaveformAlphabet

LINEAR = "linear"
CIRCULAR = "circular"


def _as_samples(wf) -> np.ndarray:
    if isinstance(wf, BasebandWaveform):
        return wf.samples
    arr = np.asarray(wf, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("waveform must be a nonempty 1-D vector")
    return arr


@dataclass
class LinearConvMatrix:
    """Tall Toeplitz matrix: multiplying by h performs linear convolution.

    ``entries`` has shape (L + L_f - 1, L_f); column c is the waveform
    shifted down by c, i.e. entries[r, c] = x[r - c] for 0 <= r - c < L.
    """

    entries: np.ndarray
    source: object
    L: int
    L_f: int


@dataclass
class CircularConvMatrix:
    """Square circulant of order L + L_f - 1 built from the padded waveform.

    entries[r, c] = z[(r - c) mod n] with z the waveform zero-padded to
    n = L + L_f - 1; multiplication performs length-n circular convolution.
    """

    entries: np.ndarray
    source: object
    L: int
    L_f: int


def build_linear_conv(wf, L_f: int, source=None) -> LinearConvMatrix:
    """Build the (L + L_f - 1) x L_f linear convolution matrix of a waveform."""
    if L_f < 1:
        raise ValueError(f"filter length must be >= 1, got {L_f}")
    x = _as_samples(wf)
    L = x.size
    entries = np.zeros((L + L_f - 1, L_f), dtype=np.complex128)
    for c in range(L_f):
        entries[c:c + L, c] = x
    return LinearConvMatrix(entries=entries, source=source, L=L, L_f=L_f)


def build_circular_conv(wf, L_f: int, source=None) -> CircularConvMatrix:
    """Build the order-(L + L_f - 1) circulant whose first column is the padded waveform."""
    if L_f < 1:
        raise ValueError(f"filter length must be >= 1, got {L_f}")
    x = _as_samples(wf)
    L = x.size
    n = L + L_f - 1
    z = np.zeros(n, dtype=np.complex128)
    z[:L] = x
    return CircularConvMatrix(entries=scipy.linalg.circulant(z), source=source,
                              L=L, L_f=L_f)


@dataclass
class Feasibility:
    """Outcome of the stacked-system dimension check."""

    feasible: bool
    at_lower_bound: bool
    message: str


def check_feasibility(K: int, L: int, L_f: int) -> Feasibility:
    """Check (K-1)(L + L_f - 1) <= K*L_f <= K(L + L_f - 1).

    The upper bound keeps the block-diagonal Gram matrix nonsingular; the
    lower bound keeps the constraint Gram full rank.  The lower bound is
    vacuous for K = 1.  Total function: never raises.
    """
    if K < 1 or L < 1 or L_f < 1:
        return Feasibility(False, False, f"K={K}, L={L}, L_f={L_f} must all be >= 1")
    n_out = L + L_f - 1
    upper_ok = K * L_f <= K * n_out  # always true for L >= 1
    lower_lhs = (K - 1) * n_out
    lower_rhs = K * L_f
    lower_ok = K == 1 or lower_lhs <= lower_rhs
    at_bound = K > 1 and lower_lhs == lower_rhs
    if not lower_ok:
        return Feasibility(
            False, False,
            f"(K-1)(L+L_f-1) = {lower_lhs} > K*L_f = {lower_rhs}: constraint "
            f"system is rank deficient (K={K}, L={L}, L_f={L_f})",
        )
    if not upper_ok:
        return Feasibility(
            False, False,
            f"K*L_f = {K * L_f} > K(L+L_f-1) = {K * n_out} (K={K}, L={L}, L_f={L_f})",
        )
    msg = "feasible"
    if at_bound:
        msg = (f"feasible with equality on the lower bound "
               f"({lower_lhs} = {lower_rhs}): only the zero bank satisfies "
               f"the coherency constraints")
    return Feasibility(True, at_bound, msg)


def default_filter_length(K: int, L: int) -> int:
    """Default filter length K*(L-1): satisfies the lower bound with margin L-1."""
    return max(K * (L - 1), 1)


def default_peak_index(L: int, L_f: int) -> int:
    """Centered desired-response peak."""
    return (L + L_f - 1) // 2


@dataclass
class BlockSystem:
    """Stacked objective X h = e and coherency constraint Xtil h = 0.

    X is block-diagonal with the K per-waveform convolution matrices; Xtil
    has K-1 block rows with the pattern [Psi_k, -Psi_{k+1}] on consecutive
    block columns, so Xtil h = 0 iff all per-waveform outputs agree.  e
    stacks K copies of the unit impulse at ``peak_index``.
    """

    X: np.ndarray
    Xtil: np.ndarray
    e: np.ndarray
    flavor: str
    K: int
    L: int
    L_f: int
    peak_index: int

    @property
    def n_out(self) -> int:
        """Rows per block (= output length of one filtered waveform)."""
        return self.L + self.L_f - 1

    @property
    def block_width(self) -> int:
        """Columns per block (= taps per filter)."""
        return self.L_f if self.flavor == LINEAR else self.n_out

    def split(self, h: np.ndarray) -> np.ndarray:
        """Reshape a stacked solution into (K, taps)."""
        return np.asarray(h).reshape(self.K, self.block_width)

    def impulse(self) -> np.ndarray:
        e_k = np.zeros(self.n_out, dtype=np.complex128)
        e_k[self.peak_index] = 1.0
        return e_k


def _waveform_vectors(waveforms) -> list:
    """Normalize an alphabet or a plain sequence of vectors to sample arrays."""
    if isinstance(waveforms, WaveformAlphabet):
        waveforms = list(waveforms)
    vectors = [_as_samples(wf) for wf in waveforms]
    if not vectors:
        raise ValueError("need at least one waveform")
    if len({v.size for v in vectors}) != 1:
        raise ValueError("all waveforms must share one length")
    return vectors


def assemble_block_system(waveforms, L_f: int,
                          peak_index: int | None = None,
                          flavor: str = LINEAR) -> BlockSystem:
    """Stack per-waveform convolution matrices into the block system.

    ``waveforms`` may be a :class:`WaveformAlphabet` or any sequence of
    equal-length complex vectors.  For the linear flavor the dimension
    bounds of :func:`check_feasibility` must hold (raises
    :class:`DimensionError` otherwise); the circular flavor is square and
    needs no bound.
    """
    if flavor not in (LINEAR, CIRCULAR):
        raise ValueError(f"unknown flavor {flavor!r}")
    vectors = _waveform_vectors(waveforms)
    K = len(vectors)
    L = vectors[0].size
    n_out = L + L_f - 1
    if flavor == LINEAR:
        feas = check_feasibility(K, L, L_f)
        if not feas.feasible:
            raise DimensionError(feas.message)
    if peak_index is None:
        peak_index = default_peak_index(L, L_f)
    if not 0 <= peak_index < n_out:
        raise ValueError(f"peak_index {peak_index} outside [0, {n_out})")

    if flavor == LINEAR:
        blocks = [build_linear_conv(v, L_f, source=k).entries
                  for k, v in enumerate(vectors)]
    else:
        blocks = [build_circular_conv(v, L_f, source=k).entries
                  for k, v in enumerate(vectors)]
    width = blocks[0].shape[1]

    X = np.zeros((K * n_out, K * width), dtype=np.complex128)
    for k in range(K):
        X[k * n_out:(k + 1) * n_out, k * width:(k + 1) * width] = blocks[k]

    Xtil = np.zeros(((K - 1) * n_out, K * width), dtype=np.complex128)
    for k in range(K - 1):
        rows = slice(k * n_out, (k + 1) * n_out)
        Xtil[rows, k * width:(k + 1) * width] = blocks[k]
        Xtil[rows, (k + 1) * width:(k + 2) * width] = -blocks[k + 1]

    e_k = np.zeros(n_out, dtype=np.complex128)
    e_k[peak_index] = 1.0
    e = np.tile(e_k, K)
    return BlockSystem(X=X, Xtil=Xtil, e=e, flavor=flavor, K=K, L=L, L_f=L_f,
                       peak_index=peak_index)
