"""Series calculus checks.  The scalar oracle below manipulates truncated
power series as plain coefficient arrays (index = degree), so composition,
reciprocals and compositional inverses are verified against ordinary
polynomial arithmetic rather than the tensor machinery."""

import numpy as np
import pytest

from ncprob.cumulants import FREE, CumulantTensor, cumulants_to_moments, \
    moments_to_cumulants, power_eta, convolve
from ncprob.dist import (MomentTensor, moments_of, random_realized,
                         scalar_atoms)
from ncprob.errors import (DimensionMismatchError, UnsupportedStructureError)
from ncprob.ncseries import (NCSeries, compose, evolution_check, f_series,
                             h_series, monotone_convolve, series_to_moments,
                             voiculescu_series)


# --- scalar polynomial oracle ---------------------------------------------------

def _poly_mul(a, b, deg):
    out = np.zeros(deg + 1)
    for i, ai in enumerate(a):
        if i > deg or ai == 0:
            continue
        hi = min(deg - i, len(b) - 1)
        out[i:i + hi + 1] += ai * np.asarray(b[:hi + 1])
    return out


def _poly_compose(outer, inner, deg):
    """outer(inner(w)) truncated; coefficient index = power of w."""
    out = np.zeros(deg + 1)
    power = np.zeros(deg + 1)
    power[0] = 1.0
    for k, ok in enumerate(outer):
        if k > 0:
            power = _poly_mul(power, inner, deg)
        out += ok * power
    return out


def _h_poly(m):
    """Scalar H as a coefficient array: w + sum m_n w^{n+1}."""
    out = np.zeros(m.N + 2)
    out[1] = 1.0
    for n in range(1, m.N + 1):
        out[n + 1] = m.map_for(n).reshape(-1)[0].real
    return out


def _scalar_law(rng, N):
    vals = rng.normal(size=N)
    maps = tuple(np.full((1,) * n, vals[n - 1], dtype=complex)
                 for n in range(1, N + 1))
    return MomentTensor(1, N, maps)


def test_compose_matches_polynomial_composition():
    rng = np.random.default_rng(11)
    for _ in range(5):
        m1 = _scalar_law(rng, 5)
        m2 = _scalar_law(rng, 5)
        got = compose(h_series(m1), h_series(m2))
        want = _poly_compose(_h_poly(m1), _h_poly(m2), 6)
        for deg in range(1, 7):
            g = got.coeff(deg).reshape(-1)[0]
            assert g.real == pytest.approx(want[deg], abs=1e-9)
            assert abs(g.imag) < 1e-12


def test_monotone_convolve_point_masses():
    # F-transforms of point masses compose to a shifted point mass
    a, b = 0.6, -1.1
    da = scalar_atoms([a], [1.0], 6)
    db = scalar_atoms([b], [1.0], 6)
    conv = monotone_convolve(da, db)
    target = scalar_atoms([a + b], [1.0], 6)
    assert conv.distance(target) < 1e-10


def test_monotone_convolve_associative():
    rng = np.random.default_rng(2)
    ms = [moments_of(random_realized(rng, 2, 2), 5) for _ in range(3)]
    left = monotone_convolve(monotone_convolve(ms[0], ms[1]), ms[2])
    right = monotone_convolve(ms[0], monotone_convolve(ms[1], ms[2]))
    assert left.distance(right) < 1e-10


def test_h_series_round_trip():
    rng = np.random.default_rng(4)
    m = moments_of(random_realized(rng, 2, 3), 5)
    back = series_to_moments(h_series(m))
    assert back.distance(m) == 0.0


def test_series_to_moments_rejects_constant():
    s = NCSeries(1, (np.eye(1, dtype=complex),), np.array([[0.5]]))
    with pytest.raises(UnsupportedStructureError):
        series_to_moments(s)


def test_compose_rejects_inner_constant_and_dim_mismatch():
    s1 = NCSeries(1, (np.eye(1, dtype=complex),))
    s_const = NCSeries(1, (np.eye(1, dtype=complex),), np.array([[1.0]]))
    with pytest.raises(UnsupportedStructureError):
        compose(s1, s_const)
    s2 = NCSeries(2, (np.eye(4, dtype=complex),))
    with pytest.raises(DimensionMismatchError):
        compose(s1, s2)


def test_ncseries_shape_validation():
    with pytest.raises(DimensionMismatchError):
        NCSeries(2, (np.eye(3, dtype=complex),))


def test_f_series_matches_scalar_reciprocal():
    # Psi(w) = ((1 + P(w))^{-1} - 1)/w where H(w) = w(1 + P(w))
    rng = np.random.default_rng(19)
    for _ in range(5):
        m = _scalar_law(rng, 6)
        psi = f_series(m)
        p = np.zeros(m.N + 1)
        for n in range(1, m.N + 1):
            p[n] = m.map_for(n).reshape(-1)[0].real
        inv = np.zeros(m.N + 1)     # (1+P)^{-1} via geometric series
        inv[0] = 1.0
        term = np.zeros(m.N + 1)
        term[0] = 1.0
        for _ in range(m.N):
            term = _poly_mul(term, -p, m.N)
            inv += term
        # shift down one degree
        assert psi.const[0, 0].real == pytest.approx(inv[1], abs=1e-10)
        for j in range(1, m.N):
            assert psi.coeff(j).reshape(-1)[0].real == pytest.approx(
                inv[j + 1], abs=1e-9)


def test_voiculescu_coefficients_are_free_cumulants():
    rng = np.random.default_rng(8)
    for d, k in ((1, 4), (2, 2)):
        m = moments_of(random_realized(rng, d, k), 5)
        v = voiculescu_series(m)
        c = moments_to_cumulants(m, FREE)
        assert np.allclose(v.const, c.maps[0].reshape(d, d), atol=1e-10)
        for j in range(1, 5):
            assert np.abs(v.coeff(j) - c.maps[j]).max() < 1e-9


def test_voiculescu_additive_under_free_convolution():
    rng = np.random.default_rng(14)
    m1 = moments_of(random_realized(rng, 2, 2), 5)
    m2 = moments_of(random_realized(rng, 2, 3), 5)
    conv = convolve(m1, m2, "free")
    v = voiculescu_series(conv)
    vsum = voiculescu_series(m1).plus(voiculescu_series(m2))
    assert v.distance(vsum) < 1e-9


def test_eval_diag_truncated_geometric():
    a = 0.5
    m = scalar_atoms([a], [1.0], 6)
    h = h_series(m)
    b = np.array([[0.3]])
    want = sum(a ** n * 0.3 ** (n + 1) for n in range(0, 7))
    assert h.eval_diag(b)[0, 0].real == pytest.approx(want, abs=1e-14)


def test_series_algebra():
    rng = np.random.default_rng(3)
    m = _scalar_law(rng, 4)
    h = h_series(m)
    doubled = h.plus(h)
    assert doubled.distance(h.scaled(2.0)) == 0.0
    assert h.max_degree == 5


def test_evolution_residual_small():
    rng = np.random.default_rng(23)
    for d, k in ((1, 3), (2, 2)):
        m = moments_of(random_realized(rng, d, k), 5)
        assert evolution_check(m, [0.3, 1.0, 2.0]) < 1e-10


def test_evolution_check_guards():
    rng = np.random.default_rng(23)
    m = moments_of(random_realized(rng, 1, 3), 5)
    from ncprob.errors import ValidationFailure
    with pytest.raises(ValidationFailure):
        evolution_check(m, [])
    m7 = moments_of(random_realized(rng, 1, 3), 7)
    with pytest.raises(ValidationFailure):
        evolution_check(m7, [1.0])


def test_square_root_round_trip():
    rng = np.random.default_rng(31)
    for d, k in ((1, 3), (2, 2)):
        m = moments_of(random_realized(rng, d, k), 5)
        half = power_eta(m, 0.5 * np.eye(d * d))
        squared = monotone_convolve(half, half)
        assert squared.distance(m) < 1e-10
