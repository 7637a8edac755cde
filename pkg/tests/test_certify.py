import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from anderson_band import bandmodel, certify
from anderson_band.bandmodel import CanonicalParams, gap_intervals, quad_products, uh_at_energy
from anderson_band.certify import (
    CertReport,
    MatrixFamily,
    Verdict,
    boundary_diagnostics,
    certify_family,
    coincidence_check,
    iter_words,
    min_growth_rate,
    principal_cone,
    product_family,
    scan_energies,
    word_product,
)
from anderson_band.errors import BudgetError, InvalidArgumentError, InvariantViolation, NotHyperbolicError
from anderson_band.mat2 import IDENTITY, Mat2, eigen_directions, eigen_slopes, transfer_matrix
from anderson_band.projline import Arc, Cone, act, arc_contains, maps_strictly_inside, point_from_slope, proj_distance
from strategies import canonical_params

BASE = CanonicalParams(1.0, 1.4, 2.0)
D = Mat2.diag(2.0, 0.5)
ROT = Mat2(0.0, -1.0, 1.0, 0.0)


def brute_growth(mats, max_len):
    """Oracle: explicit loop over all words with numpy's 2-norm."""
    arrs = [m.to_array() for m in mats]
    best = math.inf
    for k in range(1, max_len + 1):
        for w in itertools.product(range(len(arrs)), repeat=k):
            P = np.eye(2)
            for i in w:
                P = P @ arrs[i]
            best = min(best, np.linalg.norm(P, 2) ** (1 / k))
    return best


def sample_gap_energies(cp, n, rng, pad=5.0):
    gaps = gap_intervals(cp)
    out = []
    while len(out) < n:
        lo, hi = gaps[rng.integers(len(gaps))]
        lo = hi - pad if lo == -math.inf else lo
        hi = lo + pad if hi == math.inf else hi
        out.append(float(rng.uniform(lo, hi)))
    return out


# --------------------------------------------------------------------------
# product families and word enumeration
# --------------------------------------------------------------------------

def test_product_family_single_site():
    f = product_family([(0.0, 0.0)], 0.0)
    assert f.members == (Mat2(0.0, -1.0, 1.0, 0.0),)
    assert f.period == 1


def test_product_family_two_sites_is_conjugate_to_quad():
    E = 5.0
    f = product_family([(1.0, 0.0), (1.4, 2.0)], E)
    quad = quad_products(BASE, E)
    A = [transfer_matrix(E, v) for v in (0.0, 1.0)]
    C = [transfer_matrix(E, v) for v in (2.0, 3.4)]
    # site 0 acts first: members are C A, C B, D A, D B (bits (x0, x1) in lexicographic order)
    expected = [C[0] @ A[0], C[1] @ A[0], C[0] @ A[1], C[1] @ A[1]]
    assert len(f) == 4
    for M, X in zip(f.members, expected):
        assert M.allclose(X, 1e-13)
    assert sorted(M.trace for M in f.members) == pytest.approx(sorted(M.trace for M in quad))
    assert MatrixFamily.from_quad(BASE, E).members == quad


def test_product_family_dedupes():
    assert len(product_family([(1.0, 0.0), (0.0, 2.0)], 0.7)) == 2


def test_product_family_period_guard():
    with pytest.raises(BudgetError):
        product_family([(1.0, 0.0)] * 21, 0.0)


def test_iter_words_digit_order():
    mats = np.array([D.to_array(), ROT.to_array()])
    levels = dict(iter_words(mats, 3))
    f = MatrixFamily((D, ROT))
    for k, P in levels.items():
        for idx, w in enumerate(itertools.product(range(2), repeat=k)):
            np.testing.assert_allclose(P[idx], word_product(f, w).to_array(), atol=1e-14)


def test_budget_error():
    f = MatrixFamily((D, ROT, IDENTITY))
    with pytest.raises(BudgetError):
        min_growth_rate(f, 13)
    with pytest.raises(BudgetError):
        certify_family(MatrixFamily(quad_products(BASE, 1.5)), budget_len=12)


# --------------------------------------------------------------------------
# growth rates
# --------------------------------------------------------------------------

def test_min_growth_examples():
    assert min_growth_rate(MatrixFamily((D,)), 5) == pytest.approx(2.0)
    assert min_growth_rate(MatrixFamily((ROT,)), 5) == pytest.approx(1.0)
    free = MatrixFamily(quad_products(CanonicalParams(0, 0, 0), 0.0))
    assert min_growth_rate(free, 6) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=40)
@given(canonical_params(), st.floats(-4, 12))
def test_min_growth_matches_brute_force(cp, E):
    f = MatrixFamily(quad_products(cp, E))
    assert min_growth_rate(f, 4) == pytest.approx(brute_growth(f.deduplicated().members, 4), rel=1e-10)


# --------------------------------------------------------------------------
# principal cone
# --------------------------------------------------------------------------

def test_principal_cone_all_negative_traces():
    E = 1.5
    assert all(M.trace < -2 for M in quad_products(BASE, E))
    c = principal_cone(BASE, E)
    for M in quad_products(BASE, E):
        u, s = eigen_slopes(M)
        assert u > 0 > s
        assert c.contains(point_from_slope(u)) and not c.contains(point_from_slope(s), strict=False)
    assert c.contains(point_from_slope(0.0), strict=False) is False
    assert all(maps_strictly_inside(M, c, 1e-6) for M in quad_products(BASE, E))


def test_principal_cone_free_laplacian():
    free = CanonicalParams(0, 0, 0)
    c = principal_cone(free, 3.0)
    assert c.contains(point_from_slope((3 + math.sqrt(5)) / 2))
    assert not c.contains(point_from_slope((3 - math.sqrt(5)) / 2), strict=False)


def test_principal_cone_deep_negative_energy():
    E = -4.0
    slopes = [eigen_slopes(M) for M in quad_products(BASE, E)]
    assert all(u < 0 and s < 0 for u, s in slopes)
    c = principal_cone(BASE, E)
    for M in quad_products(BASE, E):
        u, s = eigen_directions(M)
        assert c.contains(u) and not c.contains(s, strict=False)


def test_principal_cone_rejects_band_energy():
    with pytest.raises(NotHyperbolicError):
        principal_cone(BASE, 0.0)


@settings(max_examples=150)
@given(canonical_params(), st.integers(0, 2**32 - 1))
def test_principal_cone_separates_and_is_invariant(cp, seed):
    E = sample_gap_energies(cp, 1, np.random.default_rng(seed))[0]
    ends = [x for g in gap_intervals(cp) for x in g if math.isfinite(x)]
    assume(min(abs(E - x) for x in ends) > 1e-6)
    c = principal_cone(cp, E)
    mats = quad_products(cp, E)
    for M in mats:
        u, s = eigen_directions(M)
        assert c.contains(u)
        assert not c.contains(s, strict=False)
        assert maps_strictly_inside(M, c, 0.0)


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------

def test_certify_examples():
    rep = certify_family(MatrixFamily((D,)))
    assert rep.verdict is Verdict.CERTIFIED_UH
    assert rep.growth_rate == pytest.approx(2.0)
    rep = certify_family(MatrixFamily((ROT,)))
    assert rep.verdict is Verdict.CERTIFIED_NOT_UH
    assert rep.witness_word == (0,)


def test_certify_base_gap_energy():
    f = MatrixFamily.from_quad(BASE, 1.5)
    hint = principal_cone(BASE, 1.5)
    rep = certify_family(f, hint)
    assert rep.verdict is Verdict.CERTIFIED_UH
    assert rep.cone == hint
    assert certify_family(f).verdict is Verdict.CERTIFIED_UH


def test_certify_needs_refinement():
    # a bad hint that is not invariant must not be accepted as is
    f = MatrixFamily.from_quad(BASE, 1.5)
    bad = Cone.single(Arc.from_slopes(5.0, 6.0))
    rep = certify_family(f, bad)
    assert rep.verdict is Verdict.CERTIFIED_UH
    assert rep.cone != bad
    assert all(maps_strictly_inside(M, rep.cone, rep.margin / 2) for M in f.members)


def test_witness_is_shortest_then_lexicographic():
    # both members are hyperbolic but their product is the identity
    M2 = ROT @ D @ ROT.inv()
    f = MatrixFamily((D, M2))
    rep = certify_family(f)
    assert rep.verdict is Verdict.CERTIFIED_NOT_UH
    assert rep.witness_word == (0, 1)
    assert abs(word_product(f, rep.witness_word).trace) <= 2


@settings(max_examples=60)
@given(canonical_params(), st.integers(0, 2**32 - 1))
def test_certify_is_sound(cp, seed):
    rng = np.random.default_rng(seed)
    E = float(rng.uniform(-5, cp.lambda0 + cp.lambda1 + cp.c1 + 5))
    f = MatrixFamily.from_quad(cp, E)
    rep = certify_family(f, budget_len=5)
    if rep.verdict is Verdict.CERTIFIED_UH:
        assert uh_at_energy(cp, E)
        assert all(maps_strictly_inside(M, rep.cone, rep.margin / 2) for M in f.members)
        assert min_growth_rate(f, 8) > 1
    elif rep.verdict is Verdict.CERTIFIED_NOT_UH:
        assert not uh_at_energy(cp, E)
        assert abs(word_product(f.deduplicated(), rep.witness_word).trace) <= 2 + 1e-12


@settings(max_examples=50)
@given(canonical_params(), st.integers(0, 2**32 - 1))
def test_undetermined_only_near_gap_endpoints(cp, seed):
    rng = np.random.default_rng(seed)
    E = float(rng.uniform(-5, cp.lambda0 + cp.lambda1 + cp.c1 + 5))
    rep = certify_family(MatrixFamily.from_quad(cp, E), budget_len=9)
    truth = uh_at_energy(cp, E)
    ends = [x for g in gap_intervals(cp) for x in g if math.isfinite(x)]
    near = min(abs(E - x) for x in ends) < 1e-3
    if rep.verdict is Verdict.UNDETERMINED:
        assert near
    else:
        assert (rep.verdict is Verdict.CERTIFIED_UH) == truth


def test_undetermined_very_close_to_endpoint():
    lo = gap_intervals(BASE)[1][0]
    rep = certify_family(MatrixFamily.from_quad(BASE, lo + 1e-9), budget_len=4)
    assert rep.verdict is Verdict.UNDETERMINED
    assert rep.margin is not None and rep.margin < 1e-6
    assert certify_family(MatrixFamily.from_quad(BASE, lo - 1e-9), budget_len=4).verdict is Verdict.CERTIFIED_NOT_UH


def test_doubled_period_family_agrees():
    dist = [(1.0, 0.0), (1.4, 2.0)]
    E = np.linspace(-4, 7, 200)
    two = [r.verdict for _, r in scan_energies(dist, (-4, 7, 200), 6, workers=1)]
    four = [r.verdict for _, r in scan_energies(dist * 2, (-4, 7, 200), 3, workers=1)]
    assert len(E) == len(two)
    assert two == four


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def test_report_invariants():
    with pytest.raises(InvalidArgumentError):
        CertReport(Verdict.CERTIFIED_UH)
    with pytest.raises(InvalidArgumentError):
        CertReport(Verdict.CERTIFIED_NOT_UH)
    CertReport(Verdict.UNDETERMINED)


@pytest.mark.parametrize("E", [-3.0, 0.0, 1.5, 10.0])
def test_report_json_round_trip(E):
    rep = certify_family(MatrixFamily.from_quad(BASE, E))
    back = CertReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back == rep


# --------------------------------------------------------------------------
# eigenvector coincidences
# --------------------------------------------------------------------------

def test_coincidence_identical_matrices_are_skipped():
    cp = CanonicalParams(0.0, 1.3, 0.4)
    E = 5.0
    assert coincidence_check(cp, E) == []


def test_coincidence_generic_gap_grid():
    for lo, hi in gap_intervals(BASE):
        lo, hi = max(lo, -8.0), min(hi, 12.0)
        for E in np.linspace(lo, hi, 41)[1:-1]:
            for i, j, _ in coincidence_check(BASE, float(E)):
                assert (i, j) in {(1, 4), (2, 3)}


def _cross(cp, E, i, j):
    a = eigen_directions(quad_products(cp, E)[i - 1])[0]
    b = eigen_directions(quad_products(cp, E)[j - 1])[0]
    return a.x * b.y - a.y * b.x


def test_coincidence_found_by_root_finding():
    cp = CanonicalParams(3.112, 3.702, 2.809)
    lo, hi = 6.2, 6.45
    assert _cross(cp, lo, 1, 4) * _cross(cp, hi, 1, 4) < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cross(cp, lo, 1, 4) * _cross(cp, mid, 1, 4) <= 0:
            hi = mid
        else:
            lo = mid
    E = 0.5 * (lo + hi)
    assert uh_at_energy(cp, E)
    found = coincidence_check(cp, E)
    assert (1, 4, "u") in found
    assert all((i, j) in {(1, 4), (2, 3)} for i, j, _ in found)


def test_coincidence_violation_is_raised(monkeypatch):
    # four hyperbolic matrices where A_1 and A_2 share an unstable direction
    fake = (D, Mat2(3.0, 1.0, 0.0, 1 / 3.0), Mat2(0.5, 0.0, 0.0, 2.0), Mat2(0.5, 0.0, 1.0, 2.0))
    monkeypatch.setattr(bandmodel, "quad_products", lambda cp, E: fake)
    with pytest.raises(InvariantViolation):
        coincidence_check(BASE, 1.5)


def test_coincidence_rejects_band_energy():
    with pytest.raises(NotHyperbolicError):
        coincidence_check(BASE, 0.0)


# --------------------------------------------------------------------------
# boundary diagnostics
# --------------------------------------------------------------------------

def test_boundary_examples():
    d = boundary_diagnostics(MatrixFamily((Mat2(1.0, 1.0, 0.0, 1.0),)), 3)
    assert (0,) in d.parabolic_words
    d = boundary_diagnostics(MatrixFamily((IDENTITY,)), 3)
    assert (0,) in d.identity_words
    free = MatrixFamily(quad_products(CanonicalParams(0, 0, 0), 2.0))
    assert free.members[0].trace == pytest.approx(2.0)
    assert (0,) in boundary_diagnostics(free, 2).parabolic_words


def test_heteroclinic_triple():
    # u(rotated D) = 0 = s(D)
    M2 = ROT @ D @ ROT.inv()
    f = MatrixFamily((D, M2))
    d = boundary_diagnostics(f, 2)
    assert ((), (1,), (0,)) in d.heteroclinic_triples
    for I, J, K in d.heteroclinic_triples:
        PI_ = word_product(f, I)
        u = eigen_directions(word_product(f, J))[0]
        s = eigen_directions(word_product(f, K))[1]
        assert proj_distance(act(PI_, u), s) <= 1e-8
    assert d.to_dict()["heteroclinic_triples"]


# --------------------------------------------------------------------------
# energy scans
# --------------------------------------------------------------------------

def test_scan_free_single_site():
    res = scan_energies([(0.0, 0.0)], (-4.0, 4.0, 801), 6, workers=1)
    step = 8.0 / 800
    for E, rep in res:
        if abs(abs(E) - 2.0) <= step:
            continue
        assert (rep.verdict is Verdict.CERTIFIED_NOT_UH) == (abs(E) < 2.0)
        assert rep.verdict is not Verdict.UNDETERMINED


def test_scan_grid_validation():
    with pytest.raises(InvalidArgumentError):
        scan_energies([(0.0, 0.0)], (1.0, 0.0, 10))
    with pytest.raises(InvalidArgumentError):
        scan_energies([(0.0, 0.0)], (0.0, 1.0, 1))
    with pytest.raises(BudgetError):
        scan_energies([(1.0, 0.0)] * 13, (0.0, 1.0, 3))


def test_scan_order_is_deterministic_across_workers():
    dist = [(1.0, 0.0), (1.4, 2.0), (0.5, 1.0)]
    a = scan_energies(dist, (-3, 6, 31), 4, workers=1)
    b = scan_energies(dist, (-3, 6, 31), 4, workers=3)
    assert [E for E, _ in a] == sorted(E for E, _ in a)
    assert [(E, r.to_dict()) for E, r in a] == [(E, r.to_dict()) for E, r in b]


def test_thread_env(monkeypatch):
    monkeypatch.setenv("ANDERSON_BAND_THREADS", "3")
    assert certify.default_workers() == 3
    monkeypatch.setenv("ANDERSON_BAND_THREADS", "x")
    with pytest.raises(InvalidArgumentError):
        certify.default_workers()
