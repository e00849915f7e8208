"""Ensembles of scalar systems driven by one shared input.

An ensemble is the data ``x_n' = a_n x_n + b_n u`` for ``n = 1..N`` together
with a sequence-space tag that fixes which norm trajectories are measured in.
Decay rates ``a_n`` are positive reals, strictly decreasing; couplings ``b_n``
are nonzero (complex allowed in explicit mode).  Everything downstream works
on a finite truncation of length ``N`` but family-generated ensembles can be
re-materialized to any longer window when products or diagnostics need it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "SpaceTag",
    "GeometricFamily",
    "PowerFamily",
    "ExplicitFamily",
    "Family",
    "EnsembleSpec",
    "MaterializedEnsemble",
    "TargetSpectrum",
    "Violation",
    "ValidationReport",
    "materialize",
    "validate_necessary",
    "norm",
]

# Values below this are treated as unrepresentable when extending a family;
# keeps divisions by a_n away from the subnormal range.
_UNDERFLOW_FLOOR = 1e-300

_MAX_MATERIALIZED = 50_000_000


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpaceTag:
    """Sequence-space tag: ``lp`` with exponent ``p``, or a sup-norm space.

    ``l_infinity``, ``c`` (convergent sequences) and ``c_zero`` (null
    sequences) all carry the sup norm; they differ only in which asymptotic
    statements hold, which is irrelevant on a finite truncation.
    """

    kind: str
    p: Optional[float] = None

    _KINDS = ("lp", "l_infinity", "c", "c_zero")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind == "lp":
            if self.p is None or not math.isfinite(self.p) or self.p < 1.0:
                raise ValueError(f"lp space needs a finite exponent p >= 1, got {self.p!r}")
        elif self.p is not None:
            raise ValueError(f"space kind {self.kind!r} does not take an exponent")

    @classmethod
    def lp(cls, p: float) -> "SpaceTag":
        return cls("lp", float(p))

    @classmethod
    def l1(cls) -> "SpaceTag":
        return cls("lp", 1.0)

    @classmethod
    def l2(cls) -> "SpaceTag":
        return cls("lp", 2.0)

    @classmethod
    def linf(cls) -> "SpaceTag":
        return cls("l_infinity")

    @classmethod
    def parse(cls, text: str) -> "SpaceTag":
        """Parse ``"l1"``, ``"l2"``, ``"lp:2.5"``, ``"linf"``, ``"c"``, ``"c0"``."""
        t = text.strip().lower()
        if t in ("linf", "l_infinity", "loo"):
            return cls("l_infinity")
        if t == "c":
            return cls("c")
        if t in ("c0", "c_zero"):
            return cls("c_zero")
        if t.startswith("lp:"):
            return cls.lp(float(t[3:]))
        if t.startswith("l"):
            return cls.lp(float(t[1:]))
        raise ValueError(f"cannot parse space tag {text!r}")

    def describe(self) -> str:
        if self.kind == "lp":
            p = self.p
            return f"lp:{p:g}"
        return {"l_infinity": "linf", "c": "c", "c_zero": "c0"}[self.kind]


@dataclass(frozen=True)
class GeometricFamily:
    """Entries ``scale * ratio**n`` for ``n = 1, 2, ...``."""

    ratio: float
    scale: float = 1.0

    def values(self, length: int) -> np.ndarray:
        if length > self.max_length():
            raise ValueError(
                f"geometric family underflows past index {self.max_length()}; "
                f"requested {length}"
            )
        return self.scale * self.ratio ** np.arange(1, length + 1, dtype=np.float64)

    def value_at(self, n: int) -> float:
        return self.scale * self.ratio**n

    def tail_abs_sum(self, m: int) -> float:
        """Sum of ``|entries|`` for indices beyond ``m`` (closed form)."""
        r = abs(self.ratio)
        if r >= 1.0:
            return math.inf
        return abs(self.scale) * r ** (m + 1) / (1.0 - r)

    def max_length(self) -> int:
        r = abs(self.ratio)
        if r >= 1.0:
            return _MAX_MATERIALIZED
        n = int(math.floor(math.log(_UNDERFLOW_FLOOR / abs(self.scale)) / math.log(r)))
        return min(max(n, 1), _MAX_MATERIALIZED)


@dataclass(frozen=True)
class PowerFamily:
    """Entries ``scale * n**(-exponent)`` for ``n = 1, 2, ...``."""

    exponent: float
    scale: float = 1.0

    def values(self, length: int) -> np.ndarray:
        if length > _MAX_MATERIALIZED:
            raise ValueError(f"refusing to materialize {length} power-family entries")
        n = np.arange(1, length + 1, dtype=np.float64)
        return self.scale * n ** (-self.exponent)

    def value_at(self, n: int) -> float:
        return self.scale * float(n) ** (-self.exponent)

    def tail_abs_sum(self, m: int) -> float:
        # integral comparison: sum_{n>m} n^-d <= m^(1-d)/(d-1) for d > 1
        d = self.exponent
        if d <= 1.0:
            return math.inf
        return abs(self.scale) * float(m) ** (1.0 - d) / (d - 1.0)

    def max_length(self) -> int:
        return _MAX_MATERIALIZED


@dataclass(frozen=True)
class ExplicitFamily:
    """A fixed, finite list of entries; cannot be extended past its length."""

    entries: tuple

    def values(self, length: int) -> np.ndarray:
        if length > len(self.entries):
            raise ValueError(
                f"explicit family has {len(self.entries)} entries; cannot extend to {length}"
            )
        return np.asarray(self.entries[:length], dtype=np.complex128)

    def value_at(self, n: int) -> complex:
        return self.entries[n - 1]

    def tail_abs_sum(self, m: int) -> float:
        return float(np.sum(np.abs(np.asarray(self.entries[m:], dtype=np.complex128))))

    def max_length(self) -> int:
        return len(self.entries)


Family = Union[GeometricFamily, PowerFamily, ExplicitFamily]


@dataclass(frozen=True)
class EnsembleSpec:
    """Generator description for a finite ensemble truncation.

    The decay family ``a`` must produce positive, strictly decreasing values:
    geometric ratio in (0, 1), power exponent > 1, or an explicit positive
    decreasing list of length exactly ``n``.  The coupling family ``b`` only
    needs nonzero values; complex couplings are supported in explicit mode.
    """

    a: Family
    b: Family
    n: int
    space: SpaceTag = field(default_factory=SpaceTag.l2)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"truncation length must be >= 1, got {self.n}")
        a = self.a
        if isinstance(a, GeometricFamily):
            if not (0.0 < a.ratio < 1.0):
                raise ValueError(f"decay ratio must lie in (0, 1), got {a.ratio}")
            if a.scale <= 0.0:
                raise ValueError(f"decay scale must be positive, got {a.scale}")
        elif isinstance(a, PowerFamily):
            if a.exponent <= 1.0:
                raise ValueError(f"decay exponent must exceed 1, got {a.exponent}")
            if a.scale <= 0.0:
                raise ValueError(f"decay scale must be positive, got {a.scale}")
        elif isinstance(a, ExplicitFamily):
            if len(a.entries) != self.n:
                raise ValueError(
                    f"explicit decay list has length {len(a.entries)}, expected {self.n}"
                )
            if any(complex(v).imag != 0.0 for v in a.entries):
                raise ValueError("decay rates must be real")
        b = self.b
        if isinstance(b, GeometricFamily):
            if b.ratio <= 0.0 or b.scale == 0.0:
                raise ValueError("coupling family needs ratio > 0 and nonzero scale")
        elif isinstance(b, PowerFamily):
            if b.scale == 0.0 or not math.isfinite(b.exponent):
                raise ValueError("coupling family needs finite exponent and nonzero scale")
        elif isinstance(b, ExplicitFamily):
            if len(b.entries) != self.n:
                raise ValueError(
                    f"explicit coupling list has length {len(b.entries)}, expected {self.n}"
                )

    @classmethod
    def from_pairs(cls, pairs: Sequence, space: Optional[SpaceTag] = None) -> "EnsembleSpec":
        """Build an explicit spec from ``[(a_1, b_1), ..., (a_N, b_N)]``."""
        a_vals = tuple(float(p[0]) for p in pairs)
        b_vals = tuple(complex(p[1]) for p in pairs)
        return cls(
            a=ExplicitFamily(a_vals),
            b=ExplicitFamily(b_vals),
            n=len(pairs),
            space=space or SpaceTag.l2(),
        )


@dataclass(frozen=True)
class MaterializedEnsemble:
    """Arrays ``a[1..L]``, ``b[1..L]`` (L >= N) plus the generating spec.

    ``n`` is the truncation every synthesized object refers to; indices past
    ``n`` exist only to feed products and diagnostic sums.
    """

    spec: EnsembleSpec
    a: np.ndarray
    b: np.ndarray
    n: int
    space: SpaceTag

    def __len__(self) -> int:
        return int(self.a.shape[0])

    def extend(self, length: int) -> "MaterializedEnsemble":
        """Return an ensemble whose arrays cover at least ``length`` indices."""
        if length <= len(self):
            return self
        return materialize(self.spec, length=length)

    def tail_abs_sum_a(self, m: int) -> float:
        if m >= self.spec.a.max_length():
            return 0.0
        return float(self.spec.a.tail_abs_sum(m))


def materialize(spec: EnsembleSpec, length: Optional[int] = None) -> MaterializedEnsemble:
    """Evaluate the families into arrays of length ``max(spec.n, length)``."""
    lng = max(spec.n, length or 0)
    a = np.asarray(np.real(spec.a.values(lng)), dtype=np.float64)
    b = np.asarray(spec.b.values(lng), dtype=np.complex128)
    return MaterializedEnsemble(
        spec=spec,
        a=_freeze(a),
        b=_freeze(b),
        n=spec.n,
        space=spec.space,
    )


@dataclass(frozen=True)
class Violation:
    code: str
    index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the structural checks needed for any pole placement.

    codes: ``nonpositive_a``, ``duplicate_a``, ``not_decreasing``, ``zero_b``.
    """

    passed: bool
    violations: tuple

    def __post_init__(self):
        if self.passed != (len(self.violations) == 0):
            raise ValueError("passed flag inconsistent with violation list")


def validate_necessary(ens: MaterializedEnsemble) -> ValidationReport:
    """Check positivity, strict decrease (hence distinctness) of ``a`` and
    nonvanishing of ``b`` over the full materialized window."""
    violations = []
    a, b = ens.a, ens.b
    for i in range(len(a)):
        idx = i + 1
        if not np.isfinite(a[i]) or a[i] <= 0.0:
            violations.append(
                Violation("nonpositive_a", idx, f"a_{idx} = {a[i]!r} is not a positive real")
            )
        elif i > 0:
            if a[i] == a[i - 1]:
                violations.append(
                    Violation("duplicate_a", idx, f"a_{idx} repeats a_{idx - 1} = {a[i]!r}")
                )
            elif a[i] > a[i - 1]:
                violations.append(
                    Violation("not_decreasing", idx, f"a_{idx} = {a[i]!r} exceeds a_{idx - 1}")
                )
    for i in range(len(b)):
        if b[i] == 0.0:
            violations.append(Violation("zero_b", i + 1, f"b_{i + 1} = 0"))
    violations.sort(key=lambda v: (v.index, v.code))
    return ValidationReport(passed=not violations, violations=tuple(violations))


def norm(x: np.ndarray, space: SpaceTag) -> float:
    """Norm of a finite truncated representative in the tagged space.

    ``lp`` is the usual p-norm (computed scaled to avoid overflow for large
    p); ``l_infinity``, ``c`` and ``c_zero`` all return the max modulus.
    """
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    mags = np.abs(x)
    top = float(np.max(mags))
    if space.kind != "lp":
        return top
    if top == 0.0:
        return 0.0
    p = float(space.p)
    if p == 1.0:
        return float(np.sum(mags))
    return top * float(np.sum((mags / top) ** p)) ** (1.0 / p)


@dataclass(frozen=True)
class TargetSpectrum:
    """Requested closed-loop poles, all with nonpositive real part.

    The essential spectral point 0 is implicit and never stored.  Modes:

    * ``mirror`` -- reflect the open-loop poles, ``lambda_n = -a_n``;
    * ``zero`` -- place everything at the origin, ``lambda_n = 0``;
    * ``uniform_shift`` -- constant ``lambda_n = shift`` with ``shift <= 0``;
    * ``explicit`` -- a fixed complex list.
    """

    mode: str
    shift: Optional[float] = None
    entries: Optional[tuple] = None

    _MODES = ("mirror", "zero", "uniform_shift", "explicit")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ValueError(f"unknown target mode {self.mode!r}")
        if self.mode == "uniform_shift":
            if self.shift is None or not math.isfinite(self.shift) or self.shift > 0.0:
                raise ValueError(f"uniform shift must be a finite value <= 0, got {self.shift!r}")
        elif self.shift is not None:
            raise ValueError(f"mode {self.mode!r} does not take a shift")
        if self.mode == "explicit":
            if not self.entries:
                raise ValueError("explicit targets need at least one value")
            vals = np.asarray(self.entries, dtype=np.complex128)
            if not np.all(np.isfinite(vals.real) & np.isfinite(vals.imag)):
                raise ValueError("explicit targets must be finite")
            if np.any(vals.real > 0.0):
                bad = int(np.argmax(vals.real > 0.0)) + 1
                raise ValueError(
                    f"target {bad} has positive real part; all targets must satisfy re <= 0"
                )
        elif self.entries is not None:
            raise ValueError(f"mode {self.mode!r} does not take explicit entries")

    @classmethod
    def mirror(cls) -> "TargetSpectrum":
        return cls("mirror")

    @classmethod
    def zero(cls) -> "TargetSpectrum":
        return cls("zero")

    @classmethod
    def uniform_shift(cls, shift: float) -> "TargetSpectrum":
        return cls("uniform_shift", shift=float(shift))

    @classmethod
    def explicit(cls, values: Sequence[complex]) -> "TargetSpectrum":
        return cls("explicit", entries=tuple(complex(v) for v in values))

    def materialize(self, ens: MaterializedEnsemble, length: Optional[int] = None) -> np.ndarray:
        """Concrete ``lambda_1..lambda_L`` (default ``L = ens.n``)."""
        lng = length or ens.n
        if self.mode == "mirror":
            return _freeze(-np.asarray(ens.extend(lng).a[:lng], dtype=np.complex128))
        if self.mode == "zero":
            return _freeze(np.zeros(lng, dtype=np.complex128))
        if self.mode == "uniform_shift":
            return _freeze(np.full(lng, complex(self.shift), dtype=np.complex128))
        if lng > len(self.entries):
            raise ValueError(
                f"explicit targets have {len(self.entries)} values; cannot extend to {lng}"
            )
        return _freeze(np.asarray(self.entries[:lng], dtype=np.complex128))

    def tail_abs_sum(self, ens: MaterializedEnsemble, m: int) -> float:
        """Upper estimate of ``sum_{n>m} |lambda_n|`` for tail reporting."""
        if self.mode == "mirror":
            return ens.tail_abs_sum_a(m)
        if self.mode == "zero":
            return 0.0
        if self.mode == "uniform_shift":
            return math.inf if self.shift != 0.0 else 0.0
        return float(np.sum(np.abs(np.asarray(self.entries[m:], dtype=np.complex128))))
