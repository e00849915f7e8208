"""Threshold functions and growth diagnostics for gain boundedness.

Two scalar functions of a decay exponent ``d > 1``:

* ``zeta(d) = d - 2d * sum_{m>=1} 1/(m^2 d^2 - 1)`` -- the critical quantity
  separating divergent from summable gains; ``zeta(2) = 0``, strictly
  increasing, ``-inf`` as ``d -> 1+`` and ``zeta(d)/d -> 1``.
* ``xi(d)  = d + 2d * sum_{m>=1} (-1)^(m-1)/(m^2 d^2 - 1)`` -- the alternating
  companion controlling target-size corrections; ``xi(2) = pi``.

Both are summed with rigorous truncation control: ``zeta`` brackets its
positive tail between two integral comparisons and adds the midpoint, ``xi``
uses the alternating-series remainder.  The per-index diagnostics

* ``alpha_n = (1/n) * sum_{m != n} ln|1 - a_m/a_n|``
* ``beta_n  = (1/n) * sum_{m}      ln|1 - lambda_m/a_n|``

are exposed for numerical insight (``ln|k_n| = n*(beta_n - alpha_n) +
ln|a_n/b_n|``); they are diagnostics, not feasibility gates, because their
limit statements are not decidable at finite ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensemble import (
    ExplicitFamily,
    MaterializedEnsemble,
    PowerFamily,
    TargetSpectrum,
)

__all__ = ["SeriesValue", "DiagnosticSequence", "zeta", "xi", "alpha", "beta"]

_MIN_D_GAP = 1e-6
_MAX_TERMS = 200_000_000
_CHUNK = 1 << 22


@dataclass(frozen=True)
class SeriesValue:
    """A summed series value with a rigorous truncation-error bound."""

    value: float
    tail_bound: float
    terms_used: int


def _check_d_tol(d: float, tol: float) -> None:
    if not (d > 1.0 + _MIN_D_GAP):
        raise ValueError(f"series diverges as d -> 1+; need d > 1 + {_MIN_D_GAP}, got {d}")
    if not (tol > 0.0 and math.isfinite(tol)):
        raise ValueError(f"tolerance must be a positive finite real, got {tol}")


def _term_sum(d: float, m_count: int, alternating: bool) -> float:
    """Sum ``f(m) = [(-1)^(m-1)] / (m^2 d^2 - 1)`` for ``m = 1..m_count``."""
    total = 0.0
    start = 1
    while start <= m_count:
        stop = min(start + _CHUNK - 1, m_count)
        m = np.arange(start, stop + 1, dtype=np.float64)
        t = 1.0 / ((m * d) ** 2 - 1.0)
        if alternating:
            t[(start % 2)::2] *= -1.0  # sign (-1)^(m-1), m global index
        total += float(np.sum(t))
        start = stop + 1
    return total


def zeta(d: float, tol: float = 1e-10) -> SeriesValue:
    """Evaluate ``zeta(d)`` to within ``tol``.

    The positive tail ``sum_{m>M} 1/(m^2 d^2 - 1)`` is bracketed by the
    integral comparisons ``int_{M+1}^inf <= tail <= int_M^inf`` with
    ``int_M^inf dx/(x^2 d^2 - 1) = ln((Md+1)/(Md-1)) / (2d)``; the midpoint of
    the bracket is added to the partial sum and the half-width (times the
    ``2d`` prefactor) is reported as ``tail_bound``.
    """
    _check_d_tol(d, tol)
    # d * f(M) <= tol guarantees the bracket half-width is within tolerance
    m_count = max(64, math.ceil(math.sqrt(d / tol + 1.0) / d))
    if m_count > _MAX_TERMS:
        raise ValueError(f"tolerance {tol} would need {m_count} terms; not attainable")
    s = _term_sum(d, m_count, alternating=False)
    int_m = math.log((m_count * d + 1.0) / (m_count * d - 1.0)) / (2.0 * d)
    int_m1 = math.log(((m_count + 1) * d + 1.0) / ((m_count + 1) * d - 1.0)) / (2.0 * d)
    s += 0.5 * (int_m + int_m1)
    tail_bound = d * (int_m - int_m1)
    return SeriesValue(value=d - 2.0 * d * s, tail_bound=tail_bound, terms_used=m_count)


def xi(d: float, tol: float = 1e-9) -> SeriesValue:
    """Evaluate ``xi(d)`` to within ``tol``.

    Alternating series with terms strictly decreasing in magnitude, so the
    truncation error is bounded by the first omitted term; ``tail_bound`` is
    that term times the ``2d`` prefactor.
    """
    _check_d_tol(d, tol)
    m_count = max(64, math.ceil(math.sqrt(2.0 / (d * tol))))
    if m_count > _MAX_TERMS:
        raise ValueError(f"tolerance {tol} would need {m_count} terms; not attainable")
    s = _term_sum(d, m_count, alternating=True)
    tail_bound = 2.0 * d / (((m_count + 1) * d) ** 2 - 1.0)
    return SeriesValue(value=d + 2.0 * d * s, tail_bound=tail_bound, terms_used=m_count)


@dataclass(frozen=True)
class DiagnosticSequence:
    """One diagnostic value ``alpha_n`` or ``beta_n`` at inner truncation M."""

    kind: str
    n: int
    value: float
    inner_truncation: int


def _default_inner_truncation(ens: MaterializedEnsemble, n: int) -> int:
    fam = ens.spec.a
    if isinstance(fam, PowerFamily):
        # summand decays like (m/n)^-d; this keeps the neglected tail tiny
        return max(100 * n, 10_000)
    if isinstance(fam, ExplicitFamily):
        return len(fam.entries)
    # geometric decay: contributions beyond n + 64 are below double precision
    return min(n + 64, fam.max_length())


def alpha(ens: MaterializedEnsemble, n: int, m_inner: Optional[int] = None) -> DiagnosticSequence:
    """``alpha_n`` summed over ``m <= m_inner``, ``m != n`` (1-based ``n``)."""
    if n < 1:
        raise ValueError(f"index must be >= 1, got {n}")
    m_cap = m_inner if m_inner is not None else _default_inner_truncation(ens, n)
    if n > m_cap:
        raise ValueError(f"index n = {n} exceeds inner truncation M = {m_cap}")
    ext = ens.extend(m_cap)
    a = ext.a[:m_cap]
    ratios = a / a[n - 1]
    terms = np.log(np.abs(1.0 - ratios))
    terms[n - 1] = 0.0  # m = n excluded
    return DiagnosticSequence("alpha", n, float(np.sum(terms)) / n, m_cap)


def beta(
    ens: MaterializedEnsemble,
    targets: TargetSpectrum,
    n: int,
    m_inner: Optional[int] = None,
) -> DiagnosticSequence:
    """``beta_n`` summed over all ``m <= m_inner`` (the ``m = n`` term stays).

    Nonnegative whenever every target has nonpositive real part, since then
    ``|1 - lambda_m/a_n| >= 1`` term by term.
    """
    if n < 1:
        raise ValueError(f"index must be >= 1, got {n}")
    m_cap = m_inner if m_inner is not None else _default_inner_truncation(ens, n)
    if n > m_cap:
        raise ValueError(f"index n = {n} exceeds inner truncation M = {m_cap}")
    ext = ens.extend(m_cap)
    lam = targets.materialize(ext, m_cap)
    terms = np.log(np.abs(1.0 - lam / ext.a[n - 1]))
    return DiagnosticSequence("beta", n, float(np.sum(terms)) / n, m_cap)
