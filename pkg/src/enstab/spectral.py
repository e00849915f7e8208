"""Verification of placed spectra without a general-purpose eigensolver.

Everything here leans on structure the closed loop is known to have:

* the resolvent perturbation function ``h(z) = 1 + sum_n k_n b_n/(a_n - z)``
  is rational, with a simple pole at every open-loop rate ``a_n`` (when
  ``k_n b_n != 0``) and a zero at every placed eigenvalue, so winding numbers
  of ``h`` around a contour count zeros minus poles enclosed;
* closed-loop eigenvectors are explicit, ``v = (b_n/(a_n - lambda))``, so
  placements are checked by direct residuals;
* the mirror-gain closed loop is diagonalized by the involution
  ``P_ij = a_j pi_j / (a_i + a_j)`` with ``P^2 = I`` (exact at matching
  truncation), conjugating the coupling-normalized generator to ``-Diag(a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .ensemble import MaterializedEnsemble, TargetSpectrum
from .errors import NonNormalizableError, PoleProximityError, WindingError
from .gains import GainVector, PiSequence, ackermann_finite

__all__ = [
    "ClosedLoopOperator",
    "Contour",
    "WindingResult",
    "CauchyOperator",
    "TransformedGenerator",
    "ModeCheck",
    "SpectrumVerification",
    "closed_loop_operator",
    "h_eval",
    "winding",
    "eigvec_residual",
    "build_cauchy",
    "transformed_generator",
    "diagonalization_residual",
    "verify_truncated_spectrum",
]

_POLE_GUARD = 1e-12
_RANK_ONE_TOL = 1e-12
_MIN_SAMPLES = 256
_MAX_SAMPLES = 1 << 16
_SNAP_TOL = 0.1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClosedLoopOperator:
    """Dense closed-loop matrix ``Diag(a) + b k^T`` with its ingredients.

    ``rank_one_residual`` measures how far ``T - Diag(a)`` is from the
    rank-one outer product it is constructed as (relative, from 2x2 minors
    against the pivot row/column decomposition).
    """

    matrix: np.ndarray
    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    rank_one_residual: float


def closed_loop_operator(
    a: Sequence[float], b: Sequence[complex], k: Sequence[complex]
) -> ClosedLoopOperator:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    k = np.asarray(k, dtype=np.complex128)
    matrix = np.diag(a).astype(np.complex128) + np.outer(b, k)
    rest = matrix - np.diag(a)
    scale = float(np.max(np.abs(rest))) if rest.size else 0.0
    if scale == 0.0:
        residual = 0.0
    else:
        piv = np.unravel_index(int(np.argmax(np.abs(rest))), rest.shape)
        recon = np.outer(rest[:, piv[1]], rest[piv[0], :]) / rest[piv]
        residual = float(np.max(np.abs(rest - recon))) / scale
    if residual > _RANK_ONE_TOL:
        raise ValueError(f"perturbation is not numerically rank one (residual {residual:.3e})")
    return ClosedLoopOperator(
        matrix=_freeze(matrix),
        a=_freeze(a.copy()),
        b=_freeze(b.copy()),
        k=_freeze(k.copy()),
        rank_one_residual=residual,
    )


def h_eval(
    a: Sequence[float], b: Sequence[complex], k: Sequence[complex], z: complex
) -> complex:
    """Evaluate ``h(z) = 1 + sum_n k_n b_n / (a_n - z)`` on the truncation.

    Refuses points within ``1e-12 * a_n`` of any pole.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    k = np.asarray(k, dtype=np.complex128)
    z = complex(z)
    dist = np.abs(a - z)
    guard = _POLE_GUARD * a
    if np.any(dist <= guard):
        n = int(np.argmax(dist <= guard)) + 1
        raise PoleProximityError(f"z = {z} is within guard distance of pole a_{n}")
    return complex(1.0 + np.sum(k * b / (a - z)))


@dataclass(frozen=True)
class Contour:
    """Circular contour for winding evaluation."""

    center: complex
    radius: float
    samples: int = _MIN_SAMPLES

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.samples < _MIN_SAMPLES:
            raise ValueError(f"need at least {_MIN_SAMPLES} samples, got {self.samples}")


@dataclass(frozen=True)
class WindingResult:
    contour: Contour
    winding: int
    min_abs_h: float
    samples_used: int


def _winding_estimate(a, b, k, contour: Contour, samples: int):
    theta = 2.0 * np.pi * np.arange(samples + 1) / samples
    zs = contour.center + contour.radius * np.exp(1j * theta)
    dist = np.abs(a[:, None] - zs[None, :])
    if np.any(dist <= _POLE_GUARD * a[:, None]):
        raise PoleProximityError("contour sample hit an open-loop pole")
    vals = 1.0 + np.sum((k * b)[:, None] / (a[:, None] - zs[None, :]), axis=0)
    min_abs = float(np.min(np.abs(vals)))
    if min_abs == 0.0:
        raise WindingError("h vanishes on the contour; move or shrink it")
    steps = np.angle(vals[1:] / vals[:-1])
    return float(np.sum(steps)) / (2.0 * np.pi), min_abs


def winding(
    a: Sequence[float],
    b: Sequence[complex],
    k: Sequence[complex],
    contour: Contour,
) -> WindingResult:
    """Winding number of ``h`` along the contour: zeros minus poles enclosed.

    Uniform sampling with argument accumulation; the sample count doubles
    until two successive estimates agree and snap to the same integer
    (distance < 0.1), up to 2^16 samples, else a `WindingError` carries the
    minimum ``|h|`` seen as a diagnostic.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    k = np.asarray(k, dtype=np.complex128)
    ring_dist = np.abs(np.abs(a - contour.center) - contour.radius)
    if np.any(ring_dist <= 1e-9 * max(contour.radius, float(np.max(a)))):
        raise PoleProximityError("contour passes too close to an open-loop pole")
    samples = max(_MIN_SAMPLES, contour.samples)
    prev: Optional[float] = None
    min_abs = math.inf
    while samples <= _MAX_SAMPLES:
        est, mn = _winding_estimate(a, b, k, contour, samples)
        min_abs = min(min_abs, mn)
        snapped = round(est)
        if abs(est - snapped) < _SNAP_TOL and prev is not None and round(prev) == snapped:
            return WindingResult(
                contour=contour, winding=int(snapped), min_abs_h=min_abs, samples_used=samples
            )
        prev = est
        samples *= 2
    raise WindingError(
        f"winding did not stabilize to an integer by {_MAX_SAMPLES} samples "
        f"(last estimate {prev}, min |h| = {min_abs:.3e})"
    )


def eigvec_residual(
    a: Sequence[float],
    b: Sequence[complex],
    k: Sequence[complex],
    lam: complex,
) -> float:
    """Relative residual ``||T v - lambda v||_inf / ||v||_inf`` of the
    closed-form eigenvector candidate at ``lambda``.

    Away from the open-loop rates the candidate is ``v = (b_n/(a_n -
    lambda))``, normalized so ``k v = 1``.  If ``lambda`` coincides with some
    ``a_n`` (within guard), the basis vector ``e_n`` is used instead, which
    is exact precisely when that mode is untouched (``k_n = 0``).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.complex128)
    k = np.asarray(k, dtype=np.complex128)
    lam = complex(lam)
    dist = np.abs(a - lam)
    near = dist <= _POLE_GUARD * a
    if np.any(near):
        idx = int(np.argmax(near))
        v = np.zeros(len(a), dtype=np.complex128)
        v[idx] = 1.0
    else:
        v = b / (a - lam)
        kv = complex(np.sum(k * v))
        if abs(kv) < 1e-12:
            raise NonNormalizableError(
                f"candidate eigenvector at {lam} has |k v| = {abs(kv):.3e}; cannot normalize"
            )
        v = v / kv
    t_v = a * v + b * complex(np.sum(k * v))
    return float(np.max(np.abs(t_v - lam * v)) / np.max(np.abs(v)))


@dataclass(frozen=True)
class CauchyOperator:
    """Involution ``P_ij = a_j pi_j / (a_i + a_j)`` built from a pi sequence
    at product truncation exactly N, where ``P^2 = I`` holds identically."""

    matrix: np.ndarray
    pi: PiSequence
    involution_residual: float

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def row_sum_residual(self) -> float:
        """Max deviation of the row sums from 1 (the partial-fraction
        identity ``sum_i a_i pi_i/(a_i + a_j) = 1`` read as ``P 1 = 1``)."""
        ones = np.ones(self.n)
        return float(np.max(np.abs(self.matrix @ ones - ones)))


def build_cauchy(ens: MaterializedEnsemble, pi: PiSequence) -> CauchyOperator:
    """Assemble the involution; requires ``pi`` at product truncation N.

    The self-inverse identity is exact only for the self-consistent finite
    normalizer; a ``pi`` computed at larger M would break it.
    """
    n = ens.n
    if pi.n_entries != n or pi.m_products != n:
        raise ValueError(
            f"pi must be computed at truncation exactly {n}; "
            f"got entries {pi.n_entries}, products {pi.m_products}"
        )
    a = ens.a[:n]
    weighted = a * pi.values
    matrix = weighted[None, :] / (a[:, None] + a[None, :])
    residual = float(np.max(np.abs(matrix @ matrix - np.eye(n))))
    return CauchyOperator(matrix=_freeze(matrix), pi=pi, involution_residual=residual)


@dataclass(frozen=True)
class TransformedGenerator:
    """Coupling-normalized generator ``Diag(a) + 1 ktilde^T``, ``ktilde = k b``.

    Conjugate to the closed loop by ``Diag(b)``: identical spectrum, and in
    the mirror regime diagonalized by the Cauchy involution to ``-Diag(a)``.
    """

    matrix: np.ndarray
    a: np.ndarray
    b: np.ndarray
    k_tilde: np.ndarray

    def conjugation_residual(self) -> float:
        """Relative residual of ``matrix = B^-1 (Diag(a) + b k^T) B``."""
        t_closed = np.diag(self.a).astype(np.complex128) + np.outer(
            self.b, self.k_tilde / self.b
        )
        conj = np.diag(1.0 / self.b) @ t_closed @ np.diag(self.b)
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return float(np.max(np.abs(conj - self.matrix))) / scale


def transformed_generator(ens: MaterializedEnsemble, gain: GainVector) -> TransformedGenerator:
    n = ens.n
    if gain.n_entries != n:
        raise ValueError(f"gain has {gain.n_entries} entries, ensemble truncation is {n}")
    if gain.diverged:
        raise ValueError("cannot build a generator from a diverged gain")
    a = ens.a[:n]
    b = ens.b[:n]
    k_tilde = gain.entries * b
    matrix = np.diag(a).astype(np.complex128) + np.outer(np.ones(n), k_tilde)
    return TransformedGenerator(
        matrix=_freeze(matrix), a=_freeze(a.copy()), b=_freeze(b.copy()), k_tilde=_freeze(k_tilde)
    )


def diagonalization_residual(
    cauchy: CauchyOperator, ens: MaterializedEnsemble, gain: GainVector
) -> float:
    """Max-norm of ``P Ttilde P + Diag(a)``: zero when the mirror gain at
    product truncation N is conjugated to the decoupled decay generator."""
    gen = transformed_generator(ens, gain)
    p = cauchy.matrix
    return float(np.max(np.abs(p @ gen.matrix @ p + np.diag(ens.a[: ens.n]))))


@dataclass(frozen=True)
class ModeCheck:
    n: int
    kind: str  # placed | open_loop
    value: complex
    residual: float
    winding: Optional[int]
    ok: bool


@dataclass(frozen=True)
class SpectrumVerification:
    modes: Tuple[ModeCheck, ...]
    max_residual: float
    passed: bool


def verify_truncated_spectrum(
    ens: MaterializedEnsemble,
    targets: TargetSpectrum,
    n_gain: int,
    residual_tol: float = 1e-8,
    winding_checks: bool = True,
) -> SpectrumVerification:
    """Verify the spectrum of the width-``n_gain`` placement inside a larger
    truncation: placed values for ``n <= n_gain``, untouched open-loop rates
    beyond.

    The width-``n_gain`` gain is zero-padded to the full truncation, so the
    closed loop is block lower triangular; each placed eigenvalue gets a
    residual check and (optionally) a +1 winding, each untouched rate a
    residual check against its basis vector.
    """
    n = ens.n
    if not (0 <= n_gain <= n):
        raise ValueError(f"gain width must lie in [0, {n}], got {n_gain}")
    a = ens.a[:n]
    b = ens.b[:n]
    lam = targets.materialize(ens, n)[:n_gain]
    k = np.zeros(n, dtype=np.complex128)
    if n_gain > 0:
        k[:n_gain] = ackermann_finite(a[:n_gain], b[:n_gain], lam).entries
    spectrum = np.concatenate([lam, a[n_gain:].astype(np.complex128)])
    checks = []
    if winding_checks and n_gain > 0:
        pts = np.concatenate([spectrum, a.astype(np.complex128)])
        sep = np.min(
            np.abs(pts[:, None] - pts[None, :]) + np.diag(np.full(len(pts), np.inf))
        )
        radius = max(sep / 4.0, 1e-13)
    for i in range(n):
        value = complex(spectrum[i])
        kind = "placed" if i < n_gain else "open_loop"
        residual = eigvec_residual(a, b, k, value)
        wind: Optional[int] = None
        if winding_checks and kind == "placed":
            wind = winding(a, b, k, Contour(center=value, radius=radius)).winding
        ok = residual <= residual_tol and (wind is None or wind == 1)
        checks.append(
            ModeCheck(n=i + 1, kind=kind, value=value, residual=residual, winding=wind, ok=ok)
        )
    max_residual = max(c.residual for c in checks) if checks else 0.0
    return SpectrumVerification(
        modes=tuple(checks),
        max_residual=max_residual,
        passed=all(c.ok for c in checks),
    )
