"""Closed-form coherent receive-filter design and scoring.

The coherent designs minimize the stacked least-squares impulse-shaping
objective subject to the hard constraint that every per-waveform output is
identical.  Eliminating the Lagrange multiplier gives the closed form

    h = G^-1 X^H e - G^-1 Xtil^H D^-1 Xtil G^-1 X^H e,
    G = X^H X,   D = Xtil G^-1 Xtil^H,

implemented with Cholesky factorizations of G and D (no explicit inverses)
plus one iterative-refinement pass on the multiplier.  An independent
nullspace-projection solver (:func:`solve_constrained_ls_oracle`) provides a
cross-check path that never touches the closed form.

Two baselines without the coherency constraint are included for comparison:
independent per-waveform least squares, and a quadratic-coherency-penalty
variant minimized by block-coordinate descent.  Neither reproduces any
specific external algorithm; comparison outputs are labeled "baseline".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .convmat import (
    BlockSystem,
    CIRCULAR,
    LINEAR,
    assemble_block_system,
    build_linear_conv,
    check_feasibility,
    default_filter_length,
    default_peak_index,
)
from .errors import ConditioningError, DimensionError, InfeasibleError
from .waveform import WaveformAlphabet

logger = logging.getLogger(__name__)

COHERENT_LINEAR = "coherent-linear"
COHERENT_CIRCULAR = "coherent-circular"
BASELINE_LS = "baseline-LS"
BASELINE_PENALIZED = "baseline-penalized"

#: Reciprocal-condition threshold below which solves are refused.
RCOND_LIMIT = 1e-12

#: Floor for sidelobe levels of (numerically) sidelobe-free responses.
PSL_FLOOR_DB = -300.0


@dataclass
class FilterBank:
    """K receive filters plus how they were designed.

    ``filters`` has shape (K, taps): taps = L_f for linear-convolution
    designs and L + L_f - 1 for circular ones.
    """

    filters: np.ndarray
    flavor: str
    peak_index: int
    design: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.complex128)
        if self.filters.ndim != 2:
            raise ValueError("filters must be a (K, taps) array")

    @property
    def size(self) -> int:
        return self.filters.shape[0]

    @property
    def taps(self) -> int:
        return self.filters.shape[1]


@dataclass
class DesignReport:
    """Scalar quality metrics of a designed bank."""

    coherence_error: float
    psl_db: list
    isl_db: list
    objective_residual: float
    constraint_residual: float
    condition_numbers: dict | None = None

    def to_dict(self) -> dict:
        return {
            "coherence_error": self.coherence_error,
            "psl_db": list(self.psl_db),
            "isl_db": list(self.isl_db),
            "objective_residual": self.objective_residual,
            "constraint_residual": self.constraint_residual,
            "condition_numbers": self.condition_numbers,
        }


def _cholesky_with_rcond(a: np.ndarray, what: str):
    """Cholesky-factor a Hermitian matrix and estimate its condition number.

    Returns (factorization, condition_estimate).  Raises ConditioningError
    if the matrix is not positive definite or its 1-norm condition estimate
    exceeds 1/RCOND_LIMIT.
    """
    a = 0.5 * (a + a.conj().T)
    anorm = float(np.max(np.sum(np.abs(a), axis=0))) if a.size else 0.0
    try:
        cho = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ConditioningError(f"{what} is not positive definite: {exc}") from exc
    rcond, info = lapack.zpocon(cho[0], anorm, uplo="L")
    if info != 0:
        raise ConditioningError(f"condition estimation failed for {what} (info={info})")
    cond = np.inf if rcond == 0.0 else 1.0 / rcond
    if rcond < RCOND_LIMIT:
        raise ConditioningError(
            f"{what} is numerically singular: condition estimate {cond:.3e} "
            f"exceeds {1.0 / RCOND_LIMIT:.1e}"
        )
    return cho, cond


def solve_coherent(system: BlockSystem) -> tuple[np.ndarray, dict]:
    """Solve min ||X h - e||^2 subject to Xtil h = 0 by Lagrange elimination.

    With G = X^H X = L L^H the closed form h = G^-1 (X^H e - Xtil^H lambda),
    lambda = D^-1 Xtil G^-1 X^H e, is evaluated through the factor
    W = L^-1 Xtil^H:  D = W^H W, c = L^-1 X^H e, and

        lambda = argmin ||W lambda - c||,    h = L^-H (c - W lambda),

    so the constraint residual Xtil h = W^H (c - W lambda) vanishes by the
    least-squares normal equations.  When D is positive definite the
    multiplier comes from its Cholesky factorization (plus one refinement
    pass); when the stacked constraints are linearly dependent (structured
    alphabets make Xtil rank deficient while staying consistent) the
    minimum-norm multiplier is taken from a rank-revealing SVD of W instead.

    Returns the stacked solution and a dict with condition estimates of the
    Gram matrix and of the constraint Gram D (the kept spectrum on the
    rank-deficient path).

    Raises ConditioningError if G is numerically singular or the computed
    solution fails to satisfy the constraints to 1e-8 * ||e||.
    """
    X, Xtil, e = system.X, system.Xtil, system.e
    gram = X.conj().T @ X
    cho_g, cond_g = _cholesky_with_rcond(gram, "X^H X")
    lower = cho_g[0]
    c = scipy.linalg.solve_triangular(lower, X.conj().T @ e, lower=True,
                                      check_finite=False)
    info = {"cond_gram": cond_g, "cond_constraint_gram": None,
            "constraint_rank": None}

    def back_substitute(vec):
        return scipy.linalg.solve_triangular(lower, vec, lower=True,
                                             trans="C", check_finite=False)

    if Xtil.shape[0] == 0:
        return back_substitute(c), info

    w = scipy.linalg.solve_triangular(lower, Xtil.conj().T, lower=True,
                                      check_finite=False)
    d = w.conj().T @ w
    try:
        cho_d, cond_d = _cholesky_with_rcond(d, "constraint Gram D")
        lam = scipy.linalg.cho_solve(cho_d, w.conj().T @ c, check_finite=False)
        # One refinement pass on the multiplier tightens the residual.
        lam += scipy.linalg.cho_solve(cho_d, w.conj().T @ (c - w @ lam),
                                      check_finite=False)
        residual = c - w @ lam
        info["constraint_rank"] = Xtil.shape[0]
    except ConditioningError:
        # Dependent (but consistent) constraints: the minimum-norm
        # multiplier makes c - W lam the projection of c onto the
        # orthogonal complement of range(W), which is computed directly
        # from a rank-revealing SVD of W instead of amplifying through the
        # nearly singular D.
        try:
            u, sv, _ = scipy.linalg.svd(w, full_matrices=False,
                                        check_finite=False)
        except scipy.linalg.LinAlgError:
            u, sv, _ = scipy.linalg.svd(w, full_matrices=False,
                                        check_finite=False,
                                        lapack_driver="gesvd")
        rank = int(np.sum(sv > sv[0] * 1e-8)) if sv.size else 0
        q = u[:, :rank]
        residual = c - q @ (q.conj().T @ c)
        cond_d = float((sv[0] / sv[rank - 1]) ** 2) if rank else np.inf
        info["constraint_rank"] = rank
    info["cond_constraint_gram"] = cond_d

    h = back_substitute(residual)
    violation = np.linalg.norm(Xtil @ h)
    limit = 1e-8 * np.linalg.norm(e)
    if violation > limit:
        raise ConditioningError(
            f"constrained solve left ||Xtil h|| = {violation:.3e} > {limit:.3e} "
            f"(cond(X^H X) ~ {cond_g:.2e}, cond(D) ~ {cond_d:.2e})"
        )
    return h, info


def _resolve_dims(alphabet: WaveformAlphabet, L_f, peak_index):
    K = alphabet.size
    L = alphabet.pulse_len
    if L_f is None:
        L_f = default_filter_length(K, L)
    if peak_index is None:
        peak_index = default_peak_index(L, L_f)
    return K, L, int(L_f), int(peak_index)


def _warn_if_at_bound(K: int, L: int, L_f: int) -> None:
    feas = check_feasibility(K, L, L_f)
    if not feas.feasible:
        raise DimensionError(feas.message)
    if feas.at_lower_bound:
        logger.warning(
            "filter length sits exactly on the feasibility bound: %s", feas.message
        )


def design_coherent_linear(alphabet: WaveformAlphabet, L_f: int | None = None,
                           peak_index: int | None = None) -> FilterBank:
    """Design the coherent bank on the linear-convolution model.

    Parameters
    ----------
    alphabet : WaveformAlphabet
        The K transmit pulses.
    L_f : int, optional
        Filter length; defaults to K*(L-1).
    peak_index : int, optional
        Desired-response peak position; defaults to the centered index.

    Returns
    -------
    FilterBank
        K length-L_f filters whose per-waveform outputs are identical.

    Raises
    ------
    DimensionError
        If (K-1)(L+L_f-1) > K*L_f (constraint Gram rank deficient).
    ConditioningError
        If the Gram matrix or D is numerically singular.
    """
    K, L, L_f, peak_index = _resolve_dims(alphabet, L_f, peak_index)
    _warn_if_at_bound(K, L, L_f)
    system = assemble_block_system(alphabet, L_f, peak_index, flavor=LINEAR)
    h, info = solve_coherent(system)
    meta = {"L": L, "L_f": L_f, **info}
    return FilterBank(filters=system.split(h), flavor=LINEAR,
                      peak_index=peak_index, design=COHERENT_LINEAR, meta=meta)


def _check_circulant_spectra(alphabet: WaveformAlphabet, L_f: int) -> None:
    n = alphabet.pulse_len + L_f - 1
    for k, wf in enumerate(alphabet):
        spec = np.fft.fft(wf.samples, n)
        mags = np.abs(spec)
        worst = int(np.argmin(mags))
        if mags[worst] == 0.0 or mags.max() / mags[worst] > 1.0 / RCOND_LIMIT:
            raise ConditioningError(
                f"circulant block of waveform {k} is numerically singular: "
                f"spectral bin {worst} has magnitude {mags[worst]:.3e}"
            )


def design_coherent_circular(alphabet: WaveformAlphabet, L_f: int | None = None,
                             peak_index: int | None = None) -> FilterBank:
    """Design the coherent bank on the circular-convolution model.

    The blocks are square circulants, so the stacked system is square and
    the dimension bound of the linear model does not apply; each waveform's
    zero-padded spectrum must simply be free of (numerically) zero bins.
    Beware that DPSK pulses carry structural spectral nulls for some chip
    draws: at DC when the chips sum to zero, and at Nyquist (hit whenever
    L + L_f - 1 is even) for odd chip counts.  Such combinations are
    refused with a ConditioningError naming the offending waveform and
    bin; pick another chip seed or filter length.

    Returns K filters of length L + L_f - 1 whose circular-convolution
    outputs are identical across waveforms.
    """
    K, L, L_f, peak_index = _resolve_dims(alphabet, L_f, peak_index)
    _check_circulant_spectra(alphabet, L_f)
    system = assemble_block_system(alphabet, L_f, peak_index, flavor=CIRCULAR)
    h, info = solve_coherent(system)
    meta = {"L": L, "L_f": L_f, **info}
    return FilterBank(filters=system.split(h), flavor=CIRCULAR,
                      peak_index=peak_index, design=COHERENT_CIRCULAR, meta=meta)


def design_uncoherent_ls_baseline(alphabet: WaveformAlphabet,
                                  L_f: int | None = None,
                                  peak_index: int | None = None) -> FilterBank:
    """Independent per-waveform least-squares filters (no coherency constraint).

    Baseline for comparison: each h_k solves min ||Psi_k h - e_k||^2 on the
    linear-convolution model, so outputs generally differ across waveforms.
    """
    K, L, L_f, peak_index = _resolve_dims(alphabet, L_f, peak_index)
    n_out = L + L_f - 1
    if not 0 <= peak_index < n_out:
        raise ValueError(f"peak_index {peak_index} outside [0, {n_out})")
    e_k = np.zeros(n_out, dtype=np.complex128)
    e_k[peak_index] = 1.0
    filters = np.zeros((K, L_f), dtype=np.complex128)
    conds = []
    for k, wf in enumerate(alphabet):
        a = build_linear_conv(wf, L_f, source=k).entries
        cho, cond = _cholesky_with_rcond(a.conj().T @ a, f"Psi_{k}^H Psi_{k}")
        filters[k] = scipy.linalg.cho_solve(cho, a.conj().T @ e_k, check_finite=False)
        conds.append(cond)
    meta = {"L": L, "L_f": L_f, "cond_gram": max(conds),
            "cond_constraint_gram": None}
    return FilterBank(filters=filters, flavor=LINEAR, peak_index=peak_index,
                      design=BASELINE_LS, meta=meta)


def design_penalized_iterative_baseline(alphabet: WaveformAlphabet,
                                        L_f: int | None = None,
                                        peak_index: int | None = None,
                                        mu: float = 1.0,
                                        iters: int = 50) -> FilterBank:
    """Quadratic-coherency-penalty baseline minimized by block-coordinate descent.

    Minimizes sum_k ||Psi_k h_k - e_k||^2 + mu * sum_k ||Psi_k h_k -
    Psi_{k+1} h_{k+1}||^2 by exact per-block updates, so the objective is
    non-increasing across iterations; mu = 0 reproduces the independent LS
    baseline and mu -> inf approaches the hard-constrained solution.  The
    per-iteration objective is recorded in ``meta['objective_history']``.
    """
    if mu < 0:
        raise ValueError(f"penalty weight must be >= 0, got {mu}")
    if iters < 1:
        raise ValueError(f"iteration count must be >= 1, got {iters}")
    K, L, L_f, peak_index = _resolve_dims(alphabet, L_f, peak_index)
    n_out = L + L_f - 1
    if not 0 <= peak_index < n_out:
        raise ValueError(f"peak_index {peak_index} outside [0, {n_out})")
    e_k = np.zeros(n_out, dtype=np.complex128)
    e_k[peak_index] = 1.0

    mats = [build_linear_conv(wf, L_f, source=k).entries
            for k, wf in enumerate(alphabet)]
    chos = []
    for k, a in enumerate(mats):
        cho, _ = _cholesky_with_rcond(a.conj().T @ a, f"Psi_{k}^H Psi_{k}")
        chos.append(cho)

    # Start from the unconstrained per-block solution.
    filters = np.zeros((K, L_f), dtype=np.complex128)
    outputs = np.zeros((K, n_out), dtype=np.complex128)
    for k, a in enumerate(mats):
        filters[k] = scipy.linalg.cho_solve(chos[k], a.conj().T @ e_k,
                                            check_finite=False)
        outputs[k] = a @ filters[k]

    def objective() -> float:
        fit = float(np.sum(np.abs(outputs - e_k) ** 2))
        pen = float(np.sum(np.abs(np.diff(outputs, axis=0)) ** 2))
        return fit + mu * pen

    history = [objective()]
    for _ in range(iters):
        for k, a in enumerate(mats):
            neighbors = [j for j in (k - 1, k + 1) if 0 <= j < K]
            target = e_k + mu * outputs[neighbors].sum(axis=0)
            scale = 1.0 + mu * len(neighbors)
            rhs = a.conj().T @ target
            filters[k] = scipy.linalg.cho_solve(chos[k], rhs,
                                                check_finite=False) / scale
            outputs[k] = a @ filters[k]
        history.append(objective())

    meta = {"L": L, "L_f": L_f, "mu": mu, "iters": iters,
            "objective_history": history}
    return FilterBank(filters=filters, flavor=LINEAR, peak_index=peak_index,
                      design=BASELINE_PENALIZED, meta=meta)


def solve_constrained_ls_oracle(X: np.ndarray, Xtil: np.ndarray,
                                e: np.ndarray) -> np.ndarray:
    """Independent verification path: nullspace projection.

    Computes an orthonormal basis Z of null(Xtil) via SVD, solves
    min ||X Z w - e||^2, and returns h = Z w.  Shares no code with
    :func:`solve_coherent`.
    """
    X = np.asarray(X)
    Xtil = np.asarray(Xtil)
    e = np.asarray(e)
    n = X.shape[1]
    if Xtil.shape[0] == 0:
        z = np.eye(n, dtype=X.dtype)
    else:
        z = scipy.linalg.null_space(Xtil)
    if z.shape[1] == 0:
        raise InfeasibleError(
            "constraint matrix has an empty nullspace: only h = 0 is feasible"
        )
    w, *_ = scipy.linalg.lstsq(X @ z, e, check_finite=False, lapack_driver="gelsd")
    return z @ w


def filter_outputs(bank: FilterBank, alphabet: WaveformAlphabet) -> np.ndarray:
    """Per-waveform responses Psi_k h_k in the bank's native convolution model.

    Returns a (K, L + L_f - 1) array: linear convolution of waveform k with
    filter k for linear-flavor banks, length-(L + L_f - 1) circular
    convolution of the zero-padded waveform for circular-flavor banks.
    """
    if bank.size != alphabet.size:
        raise ValueError(f"bank has {bank.size} filters, alphabet {alphabet.size}")
    if bank.flavor == LINEAR:
        return np.stack([np.convolve(wf.samples, h)
                         for wf, h in zip(alphabet, bank.filters)])
    n = bank.taps
    if n < alphabet.pulse_len:
        raise ValueError("circular bank taps shorter than the waveform")
    specs = np.fft.fft(alphabet.sample_matrix(), n, axis=1)
    return np.fft.ifft(specs * np.fft.fft(bank.filters, axis=1), axis=1)


def coherence_error(outputs: np.ndarray, reference: int = 0) -> float:
    """max_k ||y_k - y_ref|| / ||y_ref|| over the per-waveform outputs."""
    ref = outputs[reference]
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        denom = np.finfo(float).tiny
    diffs = np.linalg.norm(outputs - ref, axis=1)
    return float(np.max(diffs) / denom)


def _sidelobe_levels(response: np.ndarray, peak_index: int) -> tuple[float, float]:
    mag = np.abs(response)
    main = mag[peak_index]
    guard_lo = max(peak_index - 1, 0)
    guard_hi = min(peak_index + 2, mag.size)
    side = np.concatenate([mag[:guard_lo], mag[guard_hi:]])
    if side.size == 0 or main == 0.0:
        return PSL_FLOOR_DB, PSL_FLOOR_DB
    peak_ratio = float(np.max(side) / main)
    energy_ratio = float(np.sum(side ** 2) / main ** 2)
    psl = 20.0 * np.log10(peak_ratio) if peak_ratio > 1e-15 else PSL_FLOOR_DB
    isl = 10.0 * np.log10(energy_ratio) if energy_ratio > 1e-30 else PSL_FLOOR_DB
    return max(psl, PSL_FLOOR_DB), max(isl, PSL_FLOOR_DB)


def evaluate_filterbank(bank: FilterBank, alphabet: WaveformAlphabet,
                        compute_condition: bool = True) -> DesignReport:
    """Score a bank: coherence, sidelobe levels, residuals, conditioning.

    PSL/ISL are reported per filter in dB below the mainlobe, excluding a
    one-sample guard on each side of the peak; exactly sidelobe-free
    responses are floored at -300 dB.  Condition numbers of the stacked
    Gram matrix and the constraint Gram are estimated only when
    ``compute_condition`` is set (they require a full factorization).
    """
    outputs = filter_outputs(bank, alphabet)
    coh = coherence_error(outputs)
    levels = [_sidelobe_levels(y, bank.peak_index) for y in outputs]
    psl_db = [lv[0] for lv in levels]
    isl_db = [lv[1] for lv in levels]

    e_k = np.zeros(outputs.shape[1], dtype=np.complex128)
    e_k[bank.peak_index] = 1.0
    objective_residual = float(np.linalg.norm(outputs - e_k))
    constraint_residual = float(np.linalg.norm(np.diff(outputs, axis=0)))

    condition_numbers = None
    if compute_condition:
        L_f = bank.meta.get("L_f", bank.taps)
        system = assemble_block_system(alphabet, L_f, bank.peak_index,
                                       flavor=bank.flavor)
        gram = system.X.conj().T @ system.X
        try:
            cho_g, cond_g = _cholesky_with_rcond(gram, "X^H X")
            if system.Xtil.shape[0]:
                b = scipy.linalg.cho_solve(cho_g, system.Xtil.conj().T,
                                           check_finite=False)
                _, cond_d = _cholesky_with_rcond(system.Xtil @ b,
                                                 "constraint Gram D")
            else:
                cond_d = None
        except ConditioningError:
            cond_g, cond_d = np.inf, np.inf
        condition_numbers = {"gram": cond_g, "constraint_gram": cond_d}

    return DesignReport(coherence_error=coh, psl_db=psl_db, isl_db=isl_db,
                        objective_residual=objective_residual,
                        constraint_residual=constraint_residual,
                        condition_numbers=condition_numbers)


def nullspace_gradient_norm(system: BlockSystem, h: np.ndarray) -> float:
    """Norm of the objective gradient projected onto null(Xtil).

    Stationarity check for constrained minimizers: X^H (X h - e) must be
    orthogonal to the feasible subspace.
    """
    if system.Xtil.shape[0] == 0:
        z = np.eye(system.X.shape[1], dtype=complex)
    else:
        z = scipy.linalg.null_space(system.Xtil)
    grad = system.X.conj().T @ (system.X @ h - system.e)
    return float(np.linalg.norm(z.conj().T @ grad))
