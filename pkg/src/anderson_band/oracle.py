"""Independent checks of the predicted spectrum.

Random potentials are sampled site by site, finite boxes of the operator
(H phi)(n) = phi(n+1) + phi(n-1) + V(n) phi(n) with Dirichlet boundary are
diagonalized by Sturm-sequence bisection, and Lyapunov exponents are
estimated from long random transfer-matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .bandmodel import ModelParams, SpectrumResult
from .errors import InvalidArgumentError

__all__ = [
    "PotentialSample",
    "EigenList",
    "sample_potential",
    "sturm_count",
    "finite_volume_eigenvalues",
    "containment_report",
    "lyapunov_estimate",
]

RENORM_EVERY = 32


@dataclass(frozen=True)
class PotentialSample:
    values: np.ndarray
    seed: int
    params: ModelParams

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EigenList:
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def _uniforms(seed: int, n: int) -> np.ndarray:
    # Philox is counter based: draw i depends only on (seed, i), so a box of
    # size N is always a prefix of a larger box with the same seed.
    if not 0 <= seed < 2**64:
        raise InvalidArgumentError(f"seed must fit in 64 unsigned bits, got {seed!r}")
    return np.random.Generator(np.random.Philox(key=seed)).random(n)


def sample_potential(p: ModelParams, N: int, seed: int) -> PotentialSample:
    """V(n) = lambda_{n mod 2} * B(p_{n mod 2}) + c_{n mod 2} for n = 0..N-1."""
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    u = _uniforms(int(seed), N)
    even = np.arange(N) % 2 == 0
    prob = np.where(even, p.p0, p.p1)
    lam = np.where(even, p.lambda0, p.lambda1)
    c = np.where(even, p.c0, p.c1)
    values = c + lam * (u < prob)
    return PotentialSample(values=values, seed=int(seed), params=p)


@numba.njit(cache=True, nogil=True)
def _count_below(d, e2, x):
    count = 0
    q = d[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        if q == 0.0:
            # a zero pivot is read as x approached from below, matching the strict count
            q = 1e-300
        q = (d[i] - x) - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@numba.njit(cache=True, nogil=True)
def _count_below_many(d, e2, xs):
    # Same recurrence as _count_below for many shifts at once. The shifts are
    # independent, so the inner loop pipelines instead of waiting on divisions.
    m = xs.shape[0]
    q = np.empty(m)
    cnt = np.zeros(m, dtype=np.int64)
    for j in range(m):
        q[j] = d[0] - xs[j]
        if q[j] < 0.0:
            cnt[j] += 1
    for i in range(1, d.shape[0]):
        di = d[i]
        ei = e2[i - 1]
        for j in range(m):
            qj = q[j]
            if qj == 0.0:
                qj = 1e-300
            qj = (di - xs[j]) - ei / qj
            q[j] = qj
            if qj < 0.0:
                cnt[j] += 1
    return cnt


@numba.njit(cache=True, nogil=True)
def _bisect_all(d, e2, lo0, hi0, tol):
    # Level-synchronous bisection: every round halves all live intervals, and
    # an interval stays live only while it holds at least one eigenvalue.
    n = d.shape[0]
    out = np.empty(n)
    a = np.array([lo0])
    b = np.array([hi0])
    ca = np.array([0], dtype=np.int64)
    cb = np.array([n], dtype=np.int64)
    while a.shape[0] > 0:
        mid = 0.5 * (a + b)
        cm = _count_below_many(d, e2, mid)
        m = a.shape[0]
        na = np.empty(2 * m)
        nb = np.empty(2 * m)
        nca = np.empty(2 * m, dtype=np.int64)
        ncb = np.empty(2 * m, dtype=np.int64)
        k = 0
        for j in range(m):
            for lo, hi, clo, chi in ((a[j], mid[j], ca[j], cm[j]), (mid[j], b[j], cm[j], cb[j])):
                if chi <= clo:
                    continue
                if hi - lo <= tol:
                    for r in range(clo, chi):
                        out[r] = 0.5 * (lo + hi)
                else:
                    na[k], nb[k], nca[k], ncb[k] = lo, hi, clo, chi
                    k += 1
        a, b, ca, cb = na[:k], nb[:k], nca[:k], ncb[:k]
    return out


def sturm_count(diag: Sequence[float], x: float, off: Sequence[float] | None = None) -> int:
    """Number of eigenvalues strictly below ``x`` (off-diagonal defaults to ones)."""
    d = np.asarray(diag, dtype=float)
    e = np.ones(max(d.size - 1, 0)) if off is None else np.asarray(off, dtype=float)
    return int(_count_below(d, e * e, float(x)))


def finite_volume_eigenvalues(s: PotentialSample, tol: float = 1e-10) -> EigenList:
    """Dirichlet box eigenvalues, each located by bisection to absolute ``tol``."""
    d = np.ascontiguousarray(s.values, dtype=float)
    n = d.size
    if n < 1:
        raise InvalidArgumentError("empty sample")
    e2 = np.ones(max(n - 1, 0))
    radius = 2.0 if n > 2 else float(n - 1)
    lo0 = float(d.min()) - radius - tol
    hi0 = float(d.max()) + radius + tol
    return EigenList(_bisect_all(d, e2, lo0, hi0, tol))


def containment_report(eigs: EigenList, spec: SpectrumResult, dilation: float = 0.1):
    """Eigenvalues farther than ``dilation`` from every band, and eigenvalue counts per band."""
    if dilation < 0:
        raise InvalidArgumentError("dilation must be >= 0")
    vals = np.asarray(eigs.values, dtype=float)
    dist = np.full(vals.shape, np.inf)
    coverage = []
    for lo, hi in spec.bands:
        dist = np.minimum(dist, np.maximum.reduce([lo - vals, vals - hi, np.zeros_like(vals)]))
        coverage.append(int(((vals >= lo) & (vals <= hi)).sum()))
    violations = [float(v) for v in vals[dist > dilation]]
    return violations, coverage


def lyapunov_estimate(p: ModelParams, E: float, steps: int, seed: int) -> float:
    """(1/steps) log ||A_E(steps-1) ... A_E(0)|| along one sampled potential."""
    if steps < 100:
        raise InvalidArgumentError("steps must be >= 100")
    V = sample_potential(p, steps, seed).values
    a11, a12, a21, a22 = 1.0, 0.0, 0.0, 1.0
    log_norm = 0.0
    for n in range(steps):
        t = E - V[n]
        # left-multiply by [[t, -1], [1, 0]]
        a11, a12, a21, a22 = t * a11 - a21, t * a12 - a22, a11, a12
        if (n + 1) % RENORM_EVERY == 0 or n == steps - 1:
            norm = _opnorm(a11, a12, a21, a22)
            log_norm += math.log(norm)
            a11, a12, a21, a22 = a11 / norm, a12 / norm, a21 / norm, a22 / norm
    return log_norm / steps


def _opnorm(a, b, c, d) -> float:
    return 0.5 * (math.hypot(a + d, b - c) + math.hypot(a - d, b + c))
