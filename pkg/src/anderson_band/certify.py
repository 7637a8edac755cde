"""Certification of uniform hyperbolicity for finite families of SL(2, R) matrices.

A finite family is uniformly hyperbolic (UH) iff it admits an invariant
multicone.  UH is an open condition, so it can be certified with finite work
by exhibiting a cone mapped strictly inside itself; non-UH is witnessed by a
product whose trace has absolute value <= 2.  ``certify_family`` combines
both into a semi-decision with an explicit budget and an honest
``UNDETERMINED`` outcome.

Words are tuples of member indices; the word ``(w0, w1, ..., wk)`` stands for
the matrix product ``M[w0] @ M[w1] @ ... @ M[wk]``.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import bandmodel
from .errors import (
    BudgetError,
    ConstructionError,
    InvalidArgumentError,
    InvariantViolation,
    NotHyperbolicError,
)
from .mat2 import Mat2, eigen_directions, is_hyperbolic, transfer_matrix
from .projline import (
    PI,
    Arc,
    Cone,
    ProjPoint,
    act,
    image_clearance,
    padded_cone,
    proj_distance,
    separating_arc,
)

MAX_PRODUCTS = 10**6
MAX_PERIOD = 20
MAX_SCAN_PERIOD = 12

__all__ = [
    "MatrixFamily",
    "Verdict",
    "CertReport",
    "BoundaryDiagnostics",
    "product_family",
    "principal_cone",
    "certify_family",
    "min_growth_rate",
    "coincidence_check",
    "boundary_diagnostics",
    "scan_energies",
    "iter_words",
    "word_product",
]


@dataclass(frozen=True)
class MatrixFamily:
    members: tuple[Mat2, ...]
    period: int = 1

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise InvalidArgumentError("a matrix family needs at least one member")
        if self.period < 1:
            raise InvalidArgumentError("period must be positive")

    def __len__(self) -> int:
        return len(self.members)

    def as_array(self) -> np.ndarray:
        return np.array([m.rows() for m in self.members], dtype=float)

    def deduplicated(self, atol: float = 1e-12) -> MatrixFamily:
        return MatrixFamily(_dedupe(self.members, atol), self.period)

    @classmethod
    def from_quad(cls, cp: bandmodel.CanonicalParams, E: float) -> MatrixFamily:
        """The four two-step products A_1..A_4 of the period-2 model."""
        return cls(bandmodel.quad_products(cp, E), period=2)


def _dedupe(members: Sequence[Mat2], atol: float) -> tuple[Mat2, ...]:
    kept: list[Mat2] = []
    for m in members:
        if not any(m.allclose(k, atol) for k in kept):
            kept.append(m)
    return tuple(kept)


def product_family(distributions: Sequence[tuple[float, float]], E: float) -> MatrixFamily:
    """Distinct m-step transfer products over all Bernoulli outcomes.

    ``distributions[n] = (lambda_n, c_n)`` means site n (mod m) carries
    ``lambda_n * x_n + c_n`` with x_n in {0, 1}.  Each member is the
    transfer product A(m-1) ... A(1) A(0); bit strings are enumerated in
    lexicographic order of (x_0, ..., x_{m-1}) and the first occurrence of
    every distinct matrix is kept.
    """
    m = len(distributions)
    if m < 1:
        raise InvalidArgumentError("need at least one distribution")
    if m > MAX_PERIOD:
        raise BudgetError(f"period {m} exceeds {MAX_PERIOD} (2^m products)")
    members: list[Mat2] = []
    for bits in itertools.product((0, 1), repeat=m):
        P = None
        for n, x in enumerate(bits):
            lam, c = distributions[n]
            T = transfer_matrix(E, lam * x + c)
            P = T if P is None else T @ P
        members.append(P)
    return MatrixFamily(_dedupe(members, 1e-12), period=m)


# --------------------------------------------------------------------------
# Word enumeration (breadth first, prefix products reused level to level)
# --------------------------------------------------------------------------

def _word_count(n: int, max_len: int) -> int:
    return sum(n**k for k in range(1, max_len + 1))


def _check_budget(n: int, max_len: int, max_products: int) -> int:
    if max_len < 1:
        raise InvalidArgumentError("word length budget must be >= 1")
    total = _word_count(n, max_len)
    if total > max_products:
        raise BudgetError(
            f"{n} members up to length {max_len} need {total} products (> {max_products})"
        )
    return total


def iter_words(mats: np.ndarray, max_len: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, products)`` for k = 1..max_len; products has shape (n**k, 2, 2).

    Row j of level k is the word whose base-n digits (most significant first)
    are the member indices.
    """
    level = mats
    for k in range(1, max_len + 1):
        if k > 1:
            level = (level[:, None, :, :] @ mats[None, :, :, :]).reshape(-1, 2, 2)
        yield k, level


def _word_at(index: int, n: int, k: int) -> tuple[int, ...]:
    digits = []
    for _ in range(k):
        index, d = divmod(index, n)
        digits.append(d)
    return tuple(reversed(digits))


def word_product(f: MatrixFamily, word: Sequence[int]) -> Mat2:
    P = Mat2(1.0, 0.0, 0.0, 1.0)
    for i in word:
        P = P @ f.members[i]
    return P


def _norms(P: np.ndarray) -> np.ndarray:
    a, b, c, d = P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1]
    return 0.5 * (np.hypot(a + d, b - c) + np.hypot(a - d, b + c))


def _eig_angles(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles of unstable and stable directions for hyperbolic products (vectorized)."""
    a, b, c, d = P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1]
    tau = a + d
    r = 0.5 * (tau + np.copysign(np.sqrt(tau * tau - 4.0), tau))
    out = []
    for lam in (r, 1.0 / r):
        # same row choice as mat2: the longer of the two rows of P - lam I
        x2, y2, x1, y1 = lam - d, c, b, lam - a
        second = np.hypot(x2, y2) >= np.hypot(x1, y1)
        x = np.where(second, x2, x1)
        y = np.where(second, y2, y1)
        out.append(np.arctan2(x, y) % PI)
    return out[0], out[1]


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

class Verdict(str, enum.Enum):
    CERTIFIED_UH = "CertifiedUH"
    CERTIFIED_NOT_UH = "CertifiedNotUH"
    UNDETERMINED = "Undetermined"


def _point_to_json(p: ProjPoint) -> list[float]:
    return [p.x, p.y]


def _cone_to_json(c: Cone) -> list:
    return [{"lo": _point_to_json(a.lo), "hi": _point_to_json(a.hi)} for a in c.arcs]


def _cone_from_json(arcs: list) -> Cone:
    return Cone(
        tuple(Arc(ProjPoint(*map(float, a["lo"])), ProjPoint(*map(float, a["hi"]))) for a in arcs)
    )


@dataclass(frozen=True)
class CertReport:
    verdict: Verdict
    cone: Optional[Cone] = None
    margin: Optional[float] = None
    witness_word: Optional[tuple[int, ...]] = None
    growth_rate: Optional[float] = None
    budget_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        if self.witness_word is not None:
            object.__setattr__(self, "witness_word", tuple(int(i) for i in self.witness_word))
        if self.verdict is Verdict.CERTIFIED_UH and (self.cone is None or not (self.margin or 0) > 0):
            raise InvalidArgumentError("CertifiedUH needs a cone and a positive margin")
        if self.verdict is Verdict.CERTIFIED_NOT_UH and self.witness_word is None:
            raise InvalidArgumentError("CertifiedNotUH needs a witness word")

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "cone": None if self.cone is None else _cone_to_json(self.cone),
            "margin": self.margin,
            "witness_word": None if self.witness_word is None else list(self.witness_word),
            "growth_rate": self.growth_rate,
            "budget_used": self.budget_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CertReport:
        return cls(
            verdict=Verdict(d["verdict"]),
            cone=None if d.get("cone") is None else _cone_from_json(d["cone"]),
            margin=d.get("margin"),
            witness_word=None if d.get("witness_word") is None else tuple(d["witness_word"]),
            growth_rate=d.get("growth_rate"),
            budget_used=int(d.get("budget_used", 0)),
        )


@dataclass(frozen=True)
class BoundaryDiagnostics:
    parabolic_words: list[tuple[int, ...]] = field(default_factory=list)
    identity_words: list[tuple[int, ...]] = field(default_factory=list)
    heteroclinic_triples: list[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]] = field(
        default_factory=list
    )

    def to_dict(self) -> dict:
        return {
            "parabolic_words": [list(w) for w in self.parabolic_words],
            "identity_words": [list(w) for w in self.identity_words],
            "heteroclinic_triples": [[list(w) for w in t] for t in self.heteroclinic_triples],
        }


# --------------------------------------------------------------------------
# Cones for the period-2 model
# --------------------------------------------------------------------------

def principal_cone(cp: bandmodel.CanonicalParams, E: float, pad: float = 0.5) -> Cone:
    """Single-arc cone holding u_1..u_4 and excluding s_1..s_4.

    The tightest arc around the unstable directions is padded on each side
    by ``pad`` times its distance to the nearest stable direction.
    """
    mats = bandmodel.quad_products(cp, E)
    for i, M in enumerate(mats, 1):
        if not is_hyperbolic(M):
            raise NotHyperbolicError(f"A_{i} is not hyperbolic at E={E!r}")
    dirs = [eigen_directions(M) for M in mats]
    return padded_cone([u for u, _ in dirs], [s for _, s in dirs], pad)


def _family_clearance(mats: Sequence[Mat2], cone: Cone) -> float:
    return min(image_clearance(M, cone) for M in mats)


def _refine(mats: Sequence[Mat2], cone: Cone, stable: np.ndarray, pad: float) -> Cone:
    """Padded hull of the images of ``cone`` under all members."""
    pts = []
    for M in mats:
        for a in cone.arcs:
            pts += [act(M, a.lo), act(M, a.hi)]
    return padded_cone(pts, stable, pad)


def certify_family(
    f: MatrixFamily,
    cone_hint: Optional[Cone] = None,
    budget_len: int = 6,
    *,
    trace_tol: float = 0.0,
    min_margin: float = 1e-6,
    max_refinements: int = 50,
    pad: float = 0.5,
    max_products: int = MAX_PRODUCTS,
) -> CertReport:
    """Classify a family as CertifiedUH / CertifiedNotUH / Undetermined.

    1. Every word up to ``budget_len`` is checked for |tr| <= 2 + trace_tol;
       the first such word (shortest, then lexicographic) is the witness.
    2. Otherwise a single-arc cone is sought: the hint first, then the
       padded arc around the unstable directions of words up to length 3.
       Each candidate is refined up to ``max_refinements`` times by taking
       the padded hull of its images; a cone mapped inside itself by every
       member with clearance >= ``min_margin`` certifies UH.
    """
    fam = f.deduplicated()
    arr = fam.as_array()
    n = len(fam)
    _check_budget(n, budget_len, max_products)

    growth = math.inf
    used = 0
    short_u: list[np.ndarray] = []
    short_s: list[np.ndarray] = []
    for k, P in iter_words(arr, budget_len):
        used += P.shape[0]
        tr = np.abs(P[:, 0, 0] + P[:, 1, 1])
        growth = min(growth, float(np.min(_norms(P) ** (1.0 / k))))
        bad = np.nonzero(tr <= 2.0 + trace_tol)[0]
        if bad.size:
            return CertReport(
                Verdict.CERTIFIED_NOT_UH,
                witness_word=_word_at(int(bad[0]), n, k),
                growth_rate=growth,
                budget_used=used,
            )
        if k <= 3:
            u, s = _eig_angles(P)
            short_u.append(u)
            short_s.append(s)

    unstable = np.concatenate(short_u)
    stable = np.concatenate(short_s)
    candidates: list[Cone] = []
    if cone_hint is not None:
        candidates.append(cone_hint)
    try:
        candidates.append(padded_cone(unstable, stable, pad))
    except ConstructionError:
        pass

    best_margin = -math.inf
    for cone in candidates:
        for _ in range(max_refinements + 1):
            margin = _family_clearance(fam.members, cone)
            best_margin = max(best_margin, margin)
            if margin >= min_margin:
                return CertReport(
                    Verdict.CERTIFIED_UH,
                    cone=cone,
                    margin=margin,
                    growth_rate=growth,
                    budget_used=used,
                )
            try:
                cone = _refine(fam.members, cone, stable, pad)
            except (ConstructionError, InvalidArgumentError):
                break
    return CertReport(
        Verdict.UNDETERMINED,
        margin=best_margin if math.isfinite(best_margin) else None,
        growth_rate=growth,
        budget_used=used,
    )


def min_growth_rate(f: MatrixFamily, max_len: int, *, max_products: int = MAX_PRODUCTS) -> float:
    """min over words w with 1 <= |w| <= max_len of ||w||^(1/|w|) (operator norm)."""
    fam = f.deduplicated()
    _check_budget(len(fam), max_len, max_products)
    best = math.inf
    for k, P in iter_words(fam.as_array(), max_len):
        best = min(best, float(np.min(_norms(P) ** (1.0 / k))))
    return best


# --------------------------------------------------------------------------
# Eigenvector coincidences among A_1..A_4
# --------------------------------------------------------------------------

ALLOWED_COINCIDENCES = frozenset({(1, 4), (2, 3)})


def coincidence_check(cp: bandmodel.CanonicalParams, E: float, tol: float = 1e-9) -> list[tuple[int, int, str]]:
    """Pairs (i, j, kind) of A_1..A_4 sharing an eigendirection at energy E.

    ``kind`` names the directions compared, e.g. ``"u"`` (both unstable),
    ``"s"``, ``"u-s"`` (unstable of A_i, stable of A_j) or ``"s-u"``.
    Pairs of identical matrices are skipped.  Raises InvariantViolation if a
    coincidence shows up outside the pairs (1, 4) and (2, 3).
    """
    mats = bandmodel.quad_products(cp, E)
    for i, M in enumerate(mats, 1):
        if not is_hyperbolic(M):
            raise NotHyperbolicError(f"A_{i} is not hyperbolic at E={E!r}")
    dirs = [eigen_directions(M) for M in mats]
    found = []
    for i, j in itertools.combinations(range(4), 2):
        if mats[i].allclose(mats[j], 1e-12):
            continue
        (ui, si), (uj, sj) = dirs[i], dirs[j]
        for kind, p, q in (("u", ui, uj), ("s", si, sj), ("u-s", ui, sj), ("s-u", si, uj)):
            if proj_distance(p, q) <= tol:
                found.append((i + 1, j + 1, kind))
    for i, j, kind in found:
        if (i, j) not in ALLOWED_COINCIDENCES:
            raise InvariantViolation(f"A_{i} and A_{j} share an eigendirection ({kind}) at E={E!r}, {cp}")
    return found


# --------------------------------------------------------------------------
# Boundary-of-UH diagnostics
# --------------------------------------------------------------------------

def boundary_diagnostics(
    f: MatrixFamily,
    max_len: int,
    *,
    tol: float = 1e-8,
    triple_len: int = 4,
    max_products: int = MAX_PRODUCTS,
    max_triples: int = 1000,
) -> BoundaryDiagnostics:
    """Words that are parabolic or the identity, and heteroclinic triples.

    A triple (I, J, K) means M_I u(M_J) = s(M_K) projectively; I may be the
    empty word.  Triples are searched among words of length <= triple_len.
    """
    fam = f.deduplicated()
    n = len(fam)
    _check_budget(n, max_len, max_products)
    parabolic, identity = [], []
    short_words: list[tuple[int, ...]] = [()]
    short_P = [np.eye(2)[None]]
    eye = np.eye(2)
    for k, P in iter_words(fam.as_array(), max_len):
        tr = np.abs(P[:, 0, 0] + P[:, 1, 1])
        for idx in np.nonzero(np.abs(tr - 2.0) <= tol)[0]:
            parabolic.append(_word_at(int(idx), n, k))
        for idx in np.nonzero((np.abs(P - eye) <= tol).all(axis=(1, 2)))[0]:
            identity.append(_word_at(int(idx), n, k))
        if k <= min(max_len, triple_len):
            short_words += [_word_at(i, n, k) for i in range(P.shape[0])]
            short_P.append(P)
    allP = np.concatenate(short_P)
    triples = _heteroclinic(allP, short_words, tol, max_triples)
    return BoundaryDiagnostics(parabolic, identity, triples)


def _heteroclinic(allP: np.ndarray, words, tol: float, limit: int):
    tr = np.abs(allP[:, 0, 0] + allP[:, 1, 1])
    hyp = np.nonzero(tr > 2.0 + tol)[0]
    if hyp.size == 0:
        return []
    u_ang, s_ang = _eig_angles(allP[hyp])
    ux, uy = np.sin(u_ang), np.cos(u_ang)
    # image of every u(J) under every I (including the empty word at index 0)
    ix = allP[:, 0, 0][:, None] * ux[None, :] + allP[:, 0, 1][:, None] * uy[None, :]
    iy = allP[:, 1, 0][:, None] * ux[None, :] + allP[:, 1, 1][:, None] * uy[None, :]
    img = np.arctan2(ix, iy) % PI
    order = np.argsort(s_ang)
    s_sorted = s_ang[order]
    # nearest stable direction on the circle via searchsorted with wraparound
    pos = np.searchsorted(s_sorted, img)
    triples = []
    for shift in (-1, 0):
        cand = (pos + shift) % s_sorted.size
        d = np.abs(img - s_sorted[cand]) % PI
        d = np.minimum(d, PI - d)
        for a, b in zip(*np.nonzero(d <= tol)):
            t = (words[a], words[hyp[b]], words[hyp[order[cand[a, b]]]])
            if t not in triples:
                triples.append(t)
            if len(triples) >= limit:
                return triples
    return triples


# --------------------------------------------------------------------------
# Energy scans
# --------------------------------------------------------------------------

def default_workers() -> int:
    env = os.environ.get("ANDERSON_BAND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidArgumentError(f"ANDERSON_BAND_THREADS must be an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


def scan_energies(
    distributions: Sequence[tuple[float, float]],
    grid: tuple[float, float, int],
    budget_len: int = 6,
    *,
    workers: Optional[int] = None,
    max_products: int = MAX_PRODUCTS,
) -> list[tuple[float, CertReport]]:
    """Certify the m-step product family at every energy of a uniform grid."""
    e_lo, e_hi, n_points = grid
    n_points = int(n_points)
    if n_points < 2 or not e_lo < e_hi:
        raise InvalidArgumentError(f"bad grid {grid!r}")
    if len(distributions) > MAX_SCAN_PERIOD:
        raise BudgetError(f"period {len(distributions)} exceeds {MAX_SCAN_PERIOD}")
    energies = np.linspace(e_lo, e_hi, n_points)

    def one(E):
        fam = product_family(distributions, float(E))
        return float(E), certify_family(fam, None, budget_len, max_products=max_products)

    workers = workers or default_workers()
    if workers <= 1:
        return [one(E) for E in energies]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, energies))
