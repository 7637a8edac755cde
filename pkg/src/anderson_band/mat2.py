"""Arithmetic for real 2x2 unimodular matrices.

Transfer matrices of the discrete Schrodinger equation, their products,
hyperbolicity, the signed spectral radius and the stable/unstable
eigendirections on the projective line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRowError,
    InvalidArgumentError,
    NotHyperbolicError,
    SingularPointError,
)
from .projline import ProjPoint

__all__ = [
    "Mat2",
    "IDENTITY",
    "transfer_matrix",
    "mul",
    "is_hyperbolic",
    "is_unimodular",
    "signed_spectral_radius",
    "eigen_directions",
    "eigen_slopes",
    "operator_norm",
    "eigvec_partials",
    "EIGVEC_IDS",
    "PARAM_IDS",
]


@dataclass(frozen=True, slots=True)
class Mat2:
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_rows(cls, rows) -> Mat2:
        (a11, a12), (a21, a22) = rows
        return cls(float(a11), float(a12), float(a21), float(a22))

    @classmethod
    def diag(cls, d1: float, d2: float) -> Mat2:
        return cls(float(d1), 0.0, 0.0, float(d2))

    def rows(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.a11, self.a12), (self.a21, self.a22))

    def to_array(self) -> np.ndarray:
        return np.array(self.rows(), dtype=float)

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def inv(self) -> Mat2:
        """Inverse, assuming unit determinant (adjugate)."""
        return Mat2(self.a22, -self.a12, -self.a21, self.a11)

    def __matmul__(self, other: Mat2) -> Mat2:
        return mul(self, other)

    def allclose(self, other: Mat2, atol: float = 1e-12) -> bool:
        return (
            abs(self.a11 - other.a11) <= atol
            and abs(self.a12 - other.a12) <= atol
            and abs(self.a21 - other.a21) <= atol
            and abs(self.a22 - other.a22) <= atol
        )


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


def transfer_matrix(E: float, v: float) -> Mat2:
    """One-site transfer matrix [[E - v, -1], [1, 0]]."""
    if not (math.isfinite(E) and math.isfinite(v)):
        raise InvalidArgumentError(f"transfer_matrix needs finite inputs, got E={E!r}, v={v!r}")
    return Mat2(float(E) - float(v), -1.0, 1.0, 0.0)


def mul(L: Mat2, R: Mat2) -> Mat2:
    return Mat2(
        L.a11 * R.a11 + L.a12 * R.a21,
        L.a11 * R.a12 + L.a12 * R.a22,
        L.a21 * R.a11 + L.a22 * R.a21,
        L.a21 * R.a12 + L.a22 * R.a22,
    )


def is_unimodular(M: Mat2, rtol: float = 1e-12) -> bool:
    # Scale by the entry magnitudes: cancellation in a11*a22 - a12*a21 grows with them.
    scale = max(1.0, abs(M.a11 * M.a22), abs(M.a12 * M.a21))
    return abs(M.det - 1.0) <= rtol * scale


def is_hyperbolic(M: Mat2, tol: float = 0.0) -> bool:
    return abs(M.trace) > 2.0 + tol


def operator_norm(M: Mat2) -> float:
    """Largest singular value, closed form for 2x2."""
    p = math.hypot(M.a11 + M.a22, M.a12 - M.a21)
    q = math.hypot(M.a11 - M.a22, M.a12 + M.a21)
    return 0.5 * (p + q)


def signed_spectral_radius(M: Mat2) -> float:
    """Dominant eigenvalue of a hyperbolic unimodular matrix, signed like the trace."""
    tau = M.trace
    if not abs(tau) > 2.0:
        raise NotHyperbolicError(f"|trace| = {abs(tau)!r} <= 2")
    return 0.5 * (tau + math.copysign(math.sqrt(tau * tau - 4.0), tau))


def _eigvec(M: Mat2, lam: float) -> tuple[float, float]:
    # Rows of M - lam*I give [lam - a22; a21] (second) and [a12; lam - a11] (first).
    # Both span the same line; the longer one carries less cancellation error.
    scale = max(abs(M.a11), abs(M.a12), abs(M.a21), abs(M.a22), abs(lam), 1.0)
    x2, y2 = lam - M.a22, M.a21
    x1, y1 = M.a12, lam - M.a11
    n2, n1 = math.hypot(x2, y2), math.hypot(x1, y1)
    if max(n1, n2) <= 1e-12 * scale:
        raise DegenerateRowError("both rows of M - r I vanish")
    return (x2, y2) if n2 >= n1 else (x1, y1)


def eigen_directions(M: Mat2) -> tuple[ProjPoint, ProjPoint]:
    """Unstable and stable eigendirections ``(u, s)`` of a hyperbolic matrix."""
    r = signed_spectral_radius(M)
    u = ProjPoint.from_vector(*_eigvec(M, r))
    s = ProjPoint.from_vector(*_eigvec(M, 1.0 / r))
    return u, s


def eigen_slopes(M: Mat2) -> tuple[float, float]:
    """Slopes x/y of the unstable and stable directions (``inf`` for [1; 0])."""
    u, s = eigen_directions(M)
    return u.slope, s.slope


# --------------------------------------------------------------------------
# Parameter derivatives of the eigendirections of the four two-step products
# --------------------------------------------------------------------------

EIGVEC_IDS = ("u1", "u2", "u3", "u4", "s1", "s2", "s3", "s4")
PARAM_IDS = ("lambda0", "lambda1")

# A_i = T(even) T(odd): even potential is 0 or lambda0, odd is c1 or c1 + lambda1.
_EVEN_USES_LAMBDA0 = {1: False, 2: False, 3: True, 4: True}
_ODD_USES_LAMBDA1 = {1: False, 2: True, 3: False, 4: True}


def eigvec_partials(which: str, wrt: str, E: float, params) -> float:
    """Partial derivative of an eigendirection slope of A_1..A_4 w.r.t. an amplitude.

    ``which`` is one of ``u1..u4, s1..s4``; ``wrt`` is ``lambda0`` or
    ``lambda1``. ``params`` needs ``lambda0``, ``lambda1`` and ``c1``
    attributes (canonical coordinates). Slopes are u = (1 + r)/a21 and
    s = (1 + 1/r)/a21 with a21 = E - (odd potential). The derivative is
    taken at the supplied parameters; set the amplitude to zero to get the
    perturbative sign used when comparing curves.
    """
    if which not in EIGVEC_IDS:
        raise InvalidArgumentError(f"unknown eigenvector id {which!r}")
    if wrt not in PARAM_IDS:
        raise InvalidArgumentError(f"unknown parameter id {wrt!r}")
    kind, idx = which[0], int(which[1])
    lam0, lam1, c1 = float(params.lambda0), float(params.lambda1), float(params.c1)

    even = lam0 if _EVEN_USES_LAMBDA0[idx] else 0.0
    odd = c1 + lam1 if _ODD_USES_LAMBDA1[idx] else c1
    a21 = E - odd
    if abs(a21) < 1e-12:
        raise SingularPointError(f"E = {E!r} coincides with odd potential value {odd!r}")

    if wrt == "lambda0":
        if not _EVEN_USES_LAMBDA0[idx]:
            return 0.0
        dtau = -(E - odd)
        da21 = 0.0
    else:
        if not _ODD_USES_LAMBDA1[idx]:
            return 0.0
        dtau = -(E - even)
        da21 = -1.0

    tau = (E - even) * (E - odd) - 2.0
    if not abs(tau) > 2.0:
        raise NotHyperbolicError(f"A_{idx} is not hyperbolic at E={E!r}")
    root = math.copysign(math.sqrt(tau * tau - 4.0), tau)
    r = 0.5 * (tau + root)
    dr = r / root * dtau

    if kind == "u":
        return dr / a21 - (1.0 + r) * da21 / (a21 * a21)
    return -dr / (r * r * a21) - (1.0 + 1.0 / r) * da21 / (a21 * a21)
