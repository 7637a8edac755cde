"""Period-2 Anderson-Bernoulli model: closed-form gaps and almost-sure spectrum.

Even sites carry ``lambda0 * B(p0) + c0``, odd sites ``lambda1 * B(p1) + c1``
with B(p) a Bernoulli variable.  After canonicalization (c0 = 0, all
amplitudes and c1 nonnegative) the energy E lies in a spectral gap exactly
when the four two-step products A_1 = AC, A_2 = AD, A_3 = BC, A_4 = BD are
all hyperbolic; the gaps are then explicit in the parameters.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .mat2 import Mat2, is_hyperbolic, mul, transfer_matrix

log = logging.getLogger(__name__)

INF = math.inf
EMPTY_TOL = 1e-12
TIE_TOL = 1e-9

__all__ = [
    "ModelParams",
    "CanonicalParams",
    "SpectrumResult",
    "OrderingCase",
    "OrderingTieWarning",
    "canonicalize",
    "quad_products",
    "quad_traces",
    "uh_at_energy",
    "uh_mask",
    "ordering_case",
    "gap_intervals",
    "gap_membership",
    "scenario_label",
    "complement",
    "spectrum",
]


class OrderingTieWarning(UserWarning):
    """Adjacent ordering cases disagree at a tie (should never happen)."""


@dataclass(frozen=True)
class ModelParams:
    lambda0: float
    lambda1: float
    c0: float = 0.0
    c1: float = 0.0
    p0: float = 0.5
    p1: float = 0.5

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "c0", "c1", "p0", "p1"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidArgumentError(f"{name} must be a finite real, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("p0", "p1"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise InvalidArgumentError(f"{name} must lie strictly between 0 and 1, got {p!r}")

    def support(self, parity: int) -> tuple[float, float]:
        """The two potential values (B = 0, B = 1) at sites of the given parity."""
        if parity % 2 == 0:
            return (self.c0, self.c0 + self.lambda0)
        return (self.c1, self.c1 + self.lambda1)

    def shifted(self, c: float) -> ModelParams:
        return ModelParams(self.lambda0, self.lambda1, self.c0 + c, self.c1 + c, self.p0, self.p1)

    def parity_swapped(self) -> ModelParams:
        return ModelParams(self.lambda1, self.lambda0, self.c1, self.c0, self.p1, self.p0)


@dataclass(frozen=True)
class CanonicalParams:
    lambda0: float
    lambda1: float
    c1: float
    shift: float = 0.0
    parity_swapped: bool = False

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "c1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidArgumentError(f"canonical {name} must be finite and >= 0, got {v!r}")

    @property
    def even_values(self) -> tuple[float, float]:
        return (0.0, self.lambda0)

    @property
    def odd_values(self) -> tuple[float, float]:
        return (self.c1, self.c1 + self.lambda1)


def canonicalize(p: ModelParams) -> CanonicalParams:
    """Normal form with c0 = 0 and nonnegative amplitudes.

    The spectrum of the original model is the spectrum of the result
    translated by ``shift``.  Swapping the roles of the two parities is an
    index shift of the potential, which does not change the spectrum.
    """
    even = sorted(p.support(0))
    odd = sorted(p.support(1))
    swapped = even[0] > odd[0]
    if swapped:
        even, odd = odd, even
    shift = even[0]
    return CanonicalParams(
        lambda0=even[1] - even[0],
        lambda1=odd[1] - odd[0],
        c1=odd[0] - shift,
        shift=shift,
        parity_swapped=swapped,
    )


# --------------------------------------------------------------------------
# The four two-step transfer products
# --------------------------------------------------------------------------

_PAIR_INDEX = ((0, 0), (0, 1), (1, 0), (1, 1))  # A_1..A_4 -> (even choice, odd choice)


def quad_products(cp: CanonicalParams, E: float) -> tuple[Mat2, Mat2, Mat2, Mat2]:
    """(A_1, A_2, A_3, A_4) = (AC, AD, BC, BD)."""
    even = [transfer_matrix(E, v) for v in cp.even_values]
    odd = [transfer_matrix(E, v) for v in cp.odd_values]
    return tuple(mul(even[i], odd[j]) for i, j in _PAIR_INDEX)


def quad_traces(cp: CanonicalParams, E) -> np.ndarray:
    """Traces of A_1..A_4 on an array of energies, shape ``E.shape + (4,)``.

    Built from explicit 2x2 products rather than the trace polynomial.
    """
    E = np.asarray(E, dtype=float)
    one = np.ones_like(E)
    zero = np.zeros_like(E)

    def T(v):
        return np.stack([np.stack([E - v, -one], -1), np.stack([one, zero], -1)], -2)

    even = [T(v) for v in cp.even_values]
    odd = [T(v) for v in cp.odd_values]
    prods = [even[i] @ odd[j] for i, j in _PAIR_INDEX]
    return np.stack([np.trace(P, axis1=-2, axis2=-1) for P in prods], -1)


def uh_at_energy(cp: CanonicalParams, E: float, tol: float = 0.0) -> bool:
    """True iff all four two-step products are hyperbolic (E is outside the spectrum)."""
    return all(is_hyperbolic(M, tol) for M in quad_products(cp, E))


def uh_mask(cp: CanonicalParams, E, tol: float = 0.0) -> np.ndarray:
    return (np.abs(quad_traces(cp, E)) > 2.0 + tol).all(axis=-1)


# --------------------------------------------------------------------------
# Orderings and closed-form gaps
# --------------------------------------------------------------------------

class OrderingCase(enum.Enum):
    ORDER1 = 1  # lambda0 <= c1
    ORDER2 = 2  # c1 < lambda0 < c1 + lambda1
    ORDER3 = 3  # c1 + lambda1 <= lambda0


def _is_tie(a: float, b: float) -> bool:
    return abs(a - b) <= EMPTY_TOL * max(1.0, abs(a), abs(b))


def ordering_case(cp: CanonicalParams) -> OrderingCase:
    l0, top = cp.lambda0, cp.c1 + cp.lambda1
    if l0 <= cp.c1 or _is_tie(l0, cp.c1):
        return OrderingCase.ORDER1
    if l0 >= top or _is_tie(l0, top):
        return OrderingCase.ORDER3
    return OrderingCase.ORDER2


def _lower_edge(a: float, b: float) -> float:
    """Smaller root of (E - a)(E - b) = 4."""
    return 0.5 * (a + b - math.sqrt((a - b) ** 2 + 16.0))


def _upper_edge(a: float, b: float) -> float:
    """Larger root of (E - a)(E - b) = 4."""
    return 0.5 * (a + b + math.sqrt((a - b) ** 2 + 16.0))


def _raw_gaps(cp: CanonicalParams, case: OrderingCase) -> list[tuple[float, float]]:
    l0, l1, c1 = cp.lambda0, cp.lambda1, cp.c1
    top = c1 + l1
    first = [(-INF, _lower_edge(0.0, c1)), (0.0, _lower_edge(l0, c1))]
    last = (_upper_edge(l0, top), INF)
    if case is OrderingCase.ORDER1:
        middle = [(l0, c1), (_upper_edge(l0, c1), top)]
    elif case is OrderingCase.ORDER2:
        middle = [(_upper_edge(0.0, c1), _lower_edge(l0, top)), (_upper_edge(l0, c1), top)]
    else:
        middle = [(_upper_edge(0.0, c1), _lower_edge(l0, top)), (_upper_edge(0.0, top), l0)]
    return first + middle + [last]


def _clean(intervals) -> list[tuple[float, float]]:
    kept = sorted((lo, hi) for lo, hi in intervals if lo < hi - EMPTY_TOL)
    merged: list[tuple[float, float]] = []
    for lo, hi in kept:
        if merged and lo <= merged[-1][1]:
            log.info("merging overlapping gaps %r and %r", merged[-1], (lo, hi))
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def gap_intervals(cp: CanonicalParams) -> list[tuple[float, float]]:
    """Open spectral gaps of the canonical model, sorted, disjoint, nonempty."""
    case = ordering_case(cp)
    gaps = _clean(_raw_gaps(cp, case))
    neighbour = None
    if case is OrderingCase.ORDER1 and _is_tie(cp.lambda0, cp.c1):
        neighbour = OrderingCase.ORDER2
    elif case is OrderingCase.ORDER3 and _is_tie(cp.lambda0, cp.c1 + cp.lambda1):
        neighbour = OrderingCase.ORDER2
    if neighbour is not None:
        other = _clean(_raw_gaps(cp, neighbour))
        agree = len(other) == len(gaps) and all(
            _close(a, b) for g, h in zip(gaps, other) for a, b in zip(g, h)
        )
        if not agree:
            warnings.warn(
                f"ordering tie at {cp}: {case.name} gaps {gaps} vs {neighbour.name} gaps {other}",
                OrderingTieWarning,
                stacklevel=2,
            )
    return gaps


def _close(a: float, b: float, tol: float = TIE_TOL) -> bool:
    return a == b or abs(a - b) <= tol


def gap_membership(gaps, E) -> np.ndarray:
    """Boolean mask: which energies lie in one of the (open) gaps."""
    E = np.asarray(E, dtype=float)
    out = np.zeros(E.shape, dtype=bool)
    for lo, hi in gaps:
        out |= (E > lo) & (E < hi)
    return out


SCENARIOS = "abcde"


def scenario_label(cp: CanonicalParams, E: float) -> str | None:
    """Letter a..e of the gap holding E, counted from the bottom in the
    ordering's gap list (empty gaps keep their letter); None inside a band."""
    for label, (lo, hi) in zip(SCENARIOS, _raw_gaps(cp, ordering_case(cp))):
        if lo < E < hi:
            return label
    return None


# --------------------------------------------------------------------------
# Spectrum
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumResult:
    bands: tuple[tuple[float, float], ...]
    gaps: tuple[tuple[float, float], ...] = field(default=())

    def contains(self, E: float) -> bool:
        return any(lo <= E <= hi for lo, hi in self.bands)

    def distance(self, E: float) -> float:
        """Distance from E to the nearest band."""
        return min(max(lo - E, E - hi, 0.0) for lo, hi in self.bands)

    def to_dict(self) -> dict:
        return {
            "bands": [[lo, hi] for lo, hi in self.bands],
            "gaps": [[_enc(lo), _enc(hi)] for lo, hi in self.gaps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SpectrumResult:
        return cls(
            bands=tuple((float(lo), float(hi)) for lo, hi in d["bands"]),
            gaps=tuple((_dec(lo), _dec(hi)) for lo, hi in d.get("gaps", [])),
        )


def _enc(x: float):
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return x


def _dec(x) -> float:
    return float(x)


def complement(gaps) -> list[tuple[float, float]]:
    """Closed bands between consecutive open gaps (the first and last gap are unbounded)."""
    bands = []
    edge = -INF
    for lo, hi in gaps:
        if lo > edge:
            bands.append((edge, lo))
        edge = max(edge, hi)
    if edge < INF:
        bands.append((edge, INF))
    return bands


def spectrum(p: ModelParams) -> SpectrumResult:
    """Almost-sure spectrum in the original energy coordinates."""
    if not isinstance(p, ModelParams):
        raise InvalidArgumentError(f"expected ModelParams, got {type(p).__name__}")
    cp = canonicalize(p)
    gaps = gap_intervals(cp)
    bands = complement(gaps)
    s = cp.shift
    return SpectrumResult(
        bands=tuple((lo + s, hi + s) for lo, hi in bands),
        gaps=tuple((lo + s, hi + s) for lo, hi in gaps),
    )
