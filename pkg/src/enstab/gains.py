"""Feedback-gain synthesis for diagonal ensembles with a rank-one input.

The central formula places the closed-loop spectrum at prescribed values
``lambda_1..lambda_N``:

    k_n = -((a_n - lambda_n)/b_n) * prod_{m != n} (1 - lambda_m/a_n)
                                                / (1 - a_m/a_n)

evaluated here with products truncated at ``M >= N``.  At ``M = N`` this is
exactly the finite Ackermann gain; growing ``M`` approximates the full
sequence.  Two specializations matter:

* the mirror gain (targets ``-a_n``) factors as ``k_n = -a_n pi_n / b_n``
  through the normalizer ``pi_n = 2 * prod_{m != n} (1 + a_m/a_n)/(1 - a_m/a_n)``;
* the coupling-ratio matrix ``phi_ij = |b_i/b_j| / (1 + a_i/a_j)`` carries the
  decay structure that feasibility certificates test.

All products are accumulated as log magnitude plus phase, in ascending ``m``,
so factors spanning hundreds of orders of magnitude neither overflow nor
underflow; an entry whose running log magnitude passes 700 is reported as
diverged (data, not an exception) since divergence of the gain is an
informative verdict about the ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .ensemble import (
    GeometricFamily,
    MaterializedEnsemble,
    PowerFamily,
    TargetSpectrum,
    materialize,
)

__all__ = [
    "GainVector",
    "DivergedEntry",
    "PiSequence",
    "PhiMatrix",
    "ConvergencePoint",
    "ackermann_finite",
    "ackermann_oracle",
    "gain_infinite",
    "pi_sequence",
    "gain_mirror",
    "phi_matrix",
    "convergence_diagnostic",
    "default_products",
]

# exp(700) is near the float64 overflow threshold; a running log magnitude
# beyond this means the entry cannot be represented
_LOG_OVERFLOW = 700.0

_ORACLE_MAX_N = 8


@dataclass(frozen=True)
class DivergedEntry:
    """Entry ``n`` whose partial product overflowed at factor index ``at_m``."""

    n: int
    at_m: int


@dataclass(frozen=True)
class GainVector:
    """Synthesized feedback gain at truncation ``n_entries`` x products ``m_products``.

    ``per_entry_tail`` estimates the relative error from the neglected
    product tail (first-order log bound, an estimate rather than a certified
    enclosure).  Diverged entries hold NaN and are listed in ``diverged``.
    """

    entries: np.ndarray
    per_entry_tail: np.ndarray
    mode: str
    n_entries: int
    m_products: int
    diverged: Tuple[DivergedEntry, ...] = ()

    _MODES = ("finite_ackermann", "truncated_infinite", "mirror_via_pi")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ValueError(f"unknown gain mode {self.mode!r}")
        if self.m_products < self.n_entries:
            raise ValueError("product truncation must cover all gain entries")

    @property
    def diverged_indices(self) -> Tuple[int, ...]:
        return tuple(d.n for d in self.diverged)

    @property
    def ok(self) -> bool:
        return not self.diverged


@dataclass(frozen=True)
class PiSequence:
    """Mirror-gain normalizer values ``pi_1..pi_N`` at product truncation M.

    Signs alternate as ``(-1)^(n-1)`` for a strictly decreasing positive
    decay sequence, and ``|pi_n|`` only grows as M increases.
    """

    values: np.ndarray
    n_entries: int
    m_products: int
    diverged: Tuple[DivergedEntry, ...] = ()


@dataclass(frozen=True)
class PhiMatrix:
    """Coupling-ratio matrix ``phi_ij = |b_i/b_j| / (1 + a_i/a_j)``; the
    diagonal is identically 1/2 and all entries are positive."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _log_factors(num: np.ndarray, den: np.ndarray, skip: int):
    """Per-factor log magnitudes and phases of ``num/den`` with index ``skip``
    removed.  Returns (logmag, phase, has_zero)."""
    num = np.array(num, dtype=np.complex128)
    den = np.array(den, dtype=np.complex128)
    num[skip] = 1.0
    den[skip] = 1.0
    if np.any(den == 0.0):
        first = int(np.argmax(den == 0.0)) + 1
        raise ValueError(f"vanishing denominator factor at m = {first} (duplicate decay rate)")
    has_zero = bool(np.any(num == 0.0))
    with np.errstate(divide="ignore"):
        logmag = np.log(np.abs(num)) - np.log(np.abs(den))
    phase = np.angle(num) - np.angle(den)
    return logmag, phase, has_zero


def _product_entries(
    a: np.ndarray,
    lam: np.ndarray,
    prefactors: np.ndarray,
    n_entries: int,
    mirror_pi: bool = False,
):
    """Shared product engine for gains and the pi sequence.

    For entry ``n`` the factors are ``(1 - lam_m/a_n)/(1 - a_m/a_n)`` (or
    ``(1 + a_m/a_n)/(1 - a_m/a_n)`` when ``mirror_pi``), accumulated over
    ascending ``m``; the running log magnitude, including the prefactor, is
    guarded against overflow.
    """
    m_products = len(a)
    entries = np.zeros(n_entries, dtype=np.complex128)
    diverged = []
    for i in range(n_entries):
        pref = complex(prefactors[i])
        if pref == 0.0:
            continue  # exact zero, e.g. targets equal to open-loop poles
        ratios = a / a[i]
        num = (1.0 + ratios) if mirror_pi else (1.0 - lam / a[i])
        logmag, phase, has_zero = _log_factors(num, 1.0 - ratios, skip=i)
        if has_zero:
            continue  # a vanishing numerator factor kills the whole product
        running = math.log(abs(pref)) + np.cumsum(logmag)
        over = running > _LOG_OVERFLOW
        if np.any(over):
            diverged.append(DivergedEntry(n=i + 1, at_m=int(np.argmax(over)) + 1))
            entries[i] = complex(np.nan, np.nan)
            continue
        total_phase = math.atan2(pref.imag, pref.real) + float(np.sum(phase))
        entries[i] = math.exp(float(running[-1])) * complex(
            math.cos(total_phase), math.sin(total_phase)
        )
    return entries, tuple(diverged), m_products


def ackermann_finite(
    a: Sequence[float], b: Sequence[complex], lam: Sequence[complex]
) -> GainVector:
    """Finite-dimensional placement gain via the explicit product form.

    Purely algebraic: targets may lie anywhere in the complex plane.  The
    closed-loop matrix ``Diag(a) + b k^T`` then has characteristic polynomial
    ``prod (z - lambda_n)``.  Entries are exactly zero wherever
    ``lambda_n = a_n``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    if not (a.shape == b.shape == lam.shape) or a.ndim != 1:
        raise ValueError("a, b and targets must be 1-d arrays of the same length")
    if np.any(b == 0.0):
        raise ValueError("couplings must be nonzero")
    n = len(a)
    pref = -(a - lam) / b
    entries, diverged, _ = _product_entries(a, lam, pref, n)
    return GainVector(
        entries=_freeze(entries),
        per_entry_tail=_freeze(np.zeros(n)),
        mode="finite_ackermann",
        n_entries=n,
        m_products=n,
        diverged=diverged,
    )


def ackermann_oracle(
    a: Sequence[float], b: Sequence[complex], lam: Sequence[complex]
) -> Tuple[GainVector, float]:
    """Placement gain via explicit controllability-matrix inversion.

    Independent cross-check path: builds the Vandermonde matrix ``V`` of the
    decay rates, inverts it through the structured factorization
    ``V^-1 = L V^T D^-1`` (``L`` the anti-triangular matrix of characteristic
    polynomial coefficients, ``D`` the node-separation products), and applies

        k = -e_N (B V)^-1 q(Diag(a)),   q(z) = prod (z - lambda_n).

    Returns the gain and the max-norm residual of ``V V^-1 - I``.  Refuses
    more than 8 states; Vandermonde conditioning degrades quickly beyond.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    n = len(a)
    if n > _ORACLE_MAX_N:
        raise ValueError(f"oracle limited to {_ORACLE_MAX_N} states (conditioning), got {n}")
    if len(set(a.tolist())) != n:
        raise ValueError("decay rates must be pairwise distinct")
    vander = a[:, None] ** np.arange(n)[None, :]
    # char poly of Diag(a): z^n + c_{n-1} z^(n-1) + ... + c_0
    coeffs_desc = np.poly(a)
    coeffs_asc = coeffs_desc[::-1]  # c_0, ..., c_{n-1}, 1
    anti = np.zeros((n, n))
    for i in range(n):
        for j in range(n - i):
            anti[i, j] = coeffs_asc[i + j + 1]
    sep = np.array([np.prod(np.delete(a[i] - a, i)) for i in range(n)])
    v_inv = anti @ vander.T @ np.diag(1.0 / sep)
    residual = float(np.max(np.abs(vander @ v_inv - np.eye(n))))
    q_at_a = np.array([np.prod(a[i] - lam) for i in range(n)])
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    entries = -(e_last @ v_inv @ np.diag(1.0 / b) @ np.diag(q_at_a))
    gain = GainVector(
        entries=_freeze(np.asarray(entries, dtype=np.complex128)),
        per_entry_tail=_freeze(np.zeros(n)),
        mode="finite_ackermann",
        n_entries=n,
        m_products=n,
    )
    return gain, residual


def _tail_estimates(
    ens: MaterializedEnsemble,
    targets: Optional[TargetSpectrum],
    a: np.ndarray,
    n_entries: int,
    m_products: int,
) -> np.ndarray:
    """First-order relative-error estimate of the neglected product tail.

    ``|ln prod_{m>M}| <= sum_{m>M} (a_m + |lambda_m|) / (a_n - a_{M+1})``,
    converted from log scale to a relative value error.  An estimate only;
    the exact tail has no computable certificate.
    """
    tail_a = ens.tail_abs_sum_a(m_products)
    tail_l = targets.tail_abs_sum(ens, m_products) if targets is not None else tail_a
    total = tail_a + tail_l
    if total == 0.0:
        return np.zeros(n_entries)
    if not math.isfinite(total):
        return np.full(n_entries, math.inf)
    next_a = 0.0
    if m_products < ens.spec.a.max_length():
        next_a = float(np.real(ens.spec.a.value_at(m_products + 1)))
    floor = a[:n_entries] - next_a
    with np.errstate(over="ignore"):
        return np.expm1(np.minimum(total / floor, _LOG_OVERFLOW))


def gain_infinite(
    ens: MaterializedEnsemble,
    targets: TargetSpectrum,
    m_products: int,
    n_entries: Optional[int] = None,
) -> GainVector:
    """Placement gain with products truncated at ``m_products >= n``.

    Coincides entrywise with `ackermann_finite` at ``m_products = n``.  Tail
    estimates use the generating families' analytic tails; explicit families
    are treated as genuinely finite.
    """
    n = n_entries if n_entries is not None else ens.n
    if m_products < n:
        raise ValueError(f"product truncation {m_products} must be >= entry count {n}")
    ext = ens.extend(m_products)
    a = ext.a[:m_products]
    lam = targets.materialize(ext, m_products)
    pref = -(a[:n] - lam[:n]) / ext.b[:n]
    entries, diverged, _ = _product_entries(a, lam, pref, n)
    return GainVector(
        entries=_freeze(entries),
        per_entry_tail=_freeze(_tail_estimates(ext, targets, a, n, m_products)),
        mode="truncated_infinite",
        n_entries=n,
        m_products=m_products,
        diverged=diverged,
    )


def default_products(ens: MaterializedEnsemble) -> int:
    """Default product truncation: 32N for geometric decay (capped at the
    underflow horizon), N^2 for power-law decay, N for explicit data."""
    fam = ens.spec.a
    if isinstance(fam, GeometricFamily):
        return max(ens.n, min(32 * ens.n, fam.max_length()))
    if isinstance(fam, PowerFamily):
        return max(ens.n, ens.n * ens.n)
    return ens.n


def pi_sequence(
    ens: MaterializedEnsemble, m_products: int, n_entries: Optional[int] = None
) -> PiSequence:
    """Normalizer sequence ``pi_n = 2 prod_{m != n} (1 + a_m/a_n)/(1 - a_m/a_n)``.

    At ``m_products = n`` the values satisfy, exactly, the partial-fraction
    identity ``sum_i a_i pi_i / (a_i + a_j) = 1`` for every ``j <= n``.
    """
    n = n_entries if n_entries is not None else ens.n
    if m_products < n:
        raise ValueError(f"product truncation {m_products} must be >= entry count {n}")
    ext = ens.extend(m_products)
    a = ext.a[:m_products]
    pref = np.full(n, 2.0, dtype=np.complex128)
    entries, diverged, _ = _product_entries(a, np.zeros_like(a), pref, n, mirror_pi=True)
    return PiSequence(
        values=_freeze(np.real(entries)),
        n_entries=n,
        m_products=m_products,
        diverged=diverged,
    )


def gain_mirror(
    ens: MaterializedEnsemble, m_products: int, n_entries: Optional[int] = None
) -> GainVector:
    """Mirror gain ``k_n = -a_n pi_n / b_n`` (targets ``lambda_n = -a_n``)."""
    n = n_entries if n_entries is not None else ens.n
    pis = pi_sequence(ens, m_products, n)
    ext = ens.extend(m_products)
    entries = -ext.a[:n] * pis.values / ext.b[:n]
    tails = _tail_estimates(ext, TargetSpectrum.mirror(), ext.a[:m_products], n, m_products)
    return GainVector(
        entries=_freeze(np.asarray(entries, dtype=np.complex128)),
        per_entry_tail=_freeze(tails),
        mode="mirror_via_pi",
        n_entries=n,
        m_products=m_products,
        diverged=pis.diverged,
    )


def phi_matrix(ens: MaterializedEnsemble) -> PhiMatrix:
    """Coupling-ratio matrix over the truncation window."""
    a = ens.a[: ens.n]
    b = ens.b[: ens.n]
    phi = np.abs(b[:, None] / b[None, :]) / (1.0 + a[:, None] / a[None, :])
    return PhiMatrix(values=_freeze(phi))


@dataclass(frozen=True)
class ConvergencePoint:
    """Deviation of the width-``n`` gain from the high-truncation proxy,
    with the per-entry shrink ratios ``r`` (all of modulus < 1 for targets
    in the closed left half-plane)."""

    n: int
    deviation_l1: float
    r: np.ndarray


def convergence_diagnostic(
    ens: MaterializedEnsemble,
    targets: TargetSpectrum,
    n_list: Sequence[int],
    m_products: int,
) -> Tuple[ConvergencePoint, ...]:
    """Quantify how fast finite-width gains approach the truncated limit.

    For each ``N`` in ``n_list`` the finite gain ``k(.;N)`` (zero-padded) is
    compared in l1 against the gain computed at ``m_products``, and the exact
    ratios ``r_n(N) = prod_{m=N+1}^{M} (1 - a_m/a_n)/(1 - lambda_m/a_n)``
    are reported.
    """
    n_list = sorted(int(v) for v in n_list)
    if not n_list or n_list[0] < 1:
        raise ValueError("n_list must contain positive widths")
    if n_list[-1] > m_products:
        raise ValueError("all widths must be <= the product truncation")
    width = n_list[-1]
    proxy_spec = replace(ens.spec, n=width) if ens.n != width else ens.spec
    proxy_ens = materialize(proxy_spec, length=m_products)
    proxy = gain_infinite(proxy_ens, targets, m_products).entries
    ext = ens.extend(m_products)
    a = ext.a[:m_products]
    lam = targets.materialize(ext, m_products)
    out = []
    for n_width in n_list:
        fin = ackermann_finite(a[:n_width], ext.b[:n_width], lam[:n_width]).entries
        padded = np.zeros(width, dtype=np.complex128)
        padded[:n_width] = fin
        deviation = float(np.sum(np.abs(padded - proxy)))
        ratios = np.empty(n_width, dtype=np.complex128)
        for i in range(n_width):
            num = 1.0 - a[n_width:] / a[i]
            den = 1.0 - lam[n_width:] / a[i]
            logmag = float(np.sum(np.log(np.abs(num)) - np.log(np.abs(den))))
            phase = float(np.sum(np.angle(num) - np.angle(den)))
            ratios[i] = math.exp(logmag) * complex(math.cos(phase), math.sin(phase))
        out.append(ConvergencePoint(n=n_width, deviation_l1=deviation, r=_freeze(ratios)))
    return tuple(out)
