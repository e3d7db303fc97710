import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from layerwave.errors import DomainError
from layerwave.model import MediumParams, PmlConfig, stretched_thickness
from layerwave.symbols import (
    XiLattice,
    beta,
    coth,
    coth_minus_one,
    etm_exact,
    etm_pml,
    passivity_form,
    principal_sqrt,
    te_tm_basis,
    te_tm_eigen,
    trace_norm_curl,
    trace_norm_div,
    xi_lattice,
)

UNIT = MediumParams()
finite = dict(allow_nan=False, allow_infinity=False)
s1s = st.floats(0.05, 5.0)
s2s = st.floats(-30.0, 30.0)
xis = st.floats(-20.0, 20.0)
ems = st.floats(0.25, 4.0)


# ---------------------------------------------------------------- principal square root


def test_principal_sqrt_examples():
    assert principal_sqrt(2j) == pytest.approx(1 + 1j, abs=1e-15)
    assert principal_sqrt(4.0) == 2.0
    assert principal_sqrt(complex(-1.0, 0.0)) == pytest.approx(1j, abs=1e-15)
    assert principal_sqrt(0.0) == 0.0


@given(re=st.floats(-1e3, 1e3), im=st.floats(-1e3, 1e3))
def test_principal_sqrt_squares_back_with_nonnegative_real_part(re, im):
    z = complex(re, im)
    r = principal_sqrt(z)
    assert r.real >= 0.0
    assert abs(r * r - z) <= 2e-15 * abs(z) + 1e-300


def test_principal_sqrt_vectorised_matches_cmath():
    z = np.array([3 + 4j, -2 + 1e-3j, 5 - 12j, 1e-20 - 1j])
    np.testing.assert_allclose(principal_sqrt(z), [cmath.sqrt(v) for v in z], rtol=1e-15)


# ---------------------------------------------------------------- beta


def test_beta_examples():
    assert beta((0.0, 0.0), 1.0, 1, UNIT) == pytest.approx(1.0)
    assert beta((3.0, 4.0), 1.0, 1, UNIT) == pytest.approx(math.sqrt(26.0), rel=1e-15)
    assert beta((0.0, 0.0), 1 + 1j, 1, UNIT) == pytest.approx(1 + 1j, rel=1e-15)


@given(xi1=xis, xi2=xis, s1=s1s, s2=s2s, em=ems)
def test_beta_matches_high_precision_oracle(xi1, xi2, s1, s2, em):
    media = MediumParams(eps1=em, mu1=1.0)
    s = complex(s1, s2)
    b = beta((xi1, xi2), s, 1, media)
    ref = oracles.beta(xi1 * xi1 + xi2 * xi2, s, em)
    assert b.real > 0.0
    assert b == pytest.approx(ref, rel=1e-13)
    assert abs(b * b - (em * s * s + xi1 * xi1 + xi2 * xi2)) <= 1e-13 * abs(b * b)


# ---------------------------------------------------------------- coth


def test_coth_is_overflow_safe():
    assert coth(800.0) == 1.0
    assert coth_minus_one(800.0) == 0.0
    assert coth(1.0) == pytest.approx(1.3130352854993312, rel=1e-15)


@given(re=st.floats(1e-3, 50.0), im=st.floats(-50.0, 50.0))
def test_coth_minus_one_matches_oracle(re, im):
    w = complex(re, im)
    ref = oracles.coth_minus_one(w)
    assert coth_minus_one(w) == pytest.approx(ref, rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- EtM symbols


def test_etm_exact_examples():
    np.testing.assert_allclose(etm_exact((0, 0), 1.0, 1, UNIT).matrix, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(etm_exact((1, 0), 1.0, 1, UNIT).matrix,
                               np.diag([1 / math.sqrt(2), math.sqrt(2)]), atol=1e-15)


def test_etm_off_diagonal_vanishes_exactly_at_origin():
    m = etm_exact((0.0, 0.0), 0.3 + 2j, 2, MediumParams(eps2=2.0, mu2=3.0))
    assert m.m12 == 0 and m.m21 == 0


@given(xi1=xis, xi2=xis, s1=s1s, s2=s2s, eps=ems, mu=ems)
def test_etm_exact_matches_definition(xi1, xi2, s1, s2, eps, mu):
    media = MediumParams(eps2=eps, mu2=mu)
    s = complex(s1, s2)
    m = etm_exact((xi1, xi2), s, 2, media)
    ref = oracles.etm_matrix(xi1, xi2, s, eps, mu)
    np.testing.assert_allclose(m.matrix, ref, rtol=1e-12, atol=1e-13 * np.abs(ref).max())
    assert m.m12 == m.m21
    b = oracles.beta(xi1 ** 2 + xi2 ** 2, s, eps * mu)
    trace = (2 * eps * mu * s * s + xi1 ** 2 + xi2 ** 2) / (mu * s * b)
    assert m.m11 + m.m22 == pytest.approx(trace, rel=1e-12)


def test_etm_pml_examples():
    # Ltilde = 1 with L = 0.5, sigma = 1, m = 1, s1 = 1
    pml = PmlConfig(L1=0.5, sigma1=1.0, m=1, s1=1.0)
    assert stretched_thickness(1, pml) == pytest.approx(0.75)
    pml = PmlConfig(L1=2.0 / 3.0, sigma1=1.0, m=1, s1=1.0)  # Ltilde = 1
    np.testing.assert_allclose(etm_pml((0, 0), 1.0, 1, UNIT, pml).matrix, 1.3130352854993312 * np.eye(2),
                               rtol=1e-14)
    pml = PmlConfig(L1=4.0 / 3.0, sigma1=1.0, m=1, s1=1.0)  # Ltilde = 2
    diff = etm_pml((0, 0), 1.0, 1, UNIT, pml) - etm_exact((0, 0), 1.0, 1, UNIT)
    # coth 2 - 1 = 2 e^{-4} / (1 - e^{-4})
    np.testing.assert_allclose(diff, 0.0373147 * np.eye(2), atol=5e-8)
    np.testing.assert_allclose(diff, oracles.coth_minus_one(2.0) * np.eye(2), rtol=1e-13)


@given(xi1=xis, xi2=xis, s1=st.floats(0.5, 3.0), s2=s2s)
def test_etm_pml_tends_to_exact(xi1, xi2, s1, s2):
    s = complex(s1, s2)
    pml = PmlConfig(L1=40.0, sigma1=1.0, s1=s1)
    b = oracles.beta(xi1 ** 2 + xi2 ** 2, s, 1.0)
    assert b.real * stretched_thickness(1, pml) > 30.0
    a = etm_pml((xi1, xi2), s, 1, UNIT, pml).matrix
    e = etm_exact((xi1, xi2), s, 1, UNIT).matrix
    assert np.abs(a - e).max() <= 1e-12 * np.abs(e).max()


# ---------------------------------------------------------------- TE/TM splitting


def test_te_tm_eigen_examples():
    tm, te = te_tm_eigen((1, 0), 1.0, 1, UNIT)
    assert (tm, te) == (pytest.approx(1 / math.sqrt(2)), pytest.approx(math.sqrt(2)))
    assert te_tm_eigen((0, 0), 1.0, 1, UNIT) == (pytest.approx(1.0), pytest.approx(1.0))


@given(xi1=xis, xi2=xis, s1=s1s, s2=s2s, eps=ems, mu=ems, kind=st.sampled_from(["exact", "pml"]))
def test_te_tm_eigenpairs(xi1, xi2, s1, s2, eps, mu, kind):
    if xi1 == 0.0 and xi2 == 0.0:
        xi1 = 0.5
    media = MediumParams(eps1=eps, mu1=mu)
    pml = PmlConfig(L1=0.4, sigma1=1.5, s1=s1)
    s = complex(s1, s2)
    sym = (etm_exact if kind == "exact" else lambda *a: etm_pml(*a, pml))((xi1, xi2), s, 1, media)
    tm, te = te_tm_eigen((xi1, xi2), s, 1, media, kind=kind, pml=pml)
    xh, th = te_tm_basis((xi1, xi2))
    scale = np.abs(sym.matrix).max()
    np.testing.assert_allclose(sym.apply(xh), tm * xh, atol=1e-12 * scale)
    np.testing.assert_allclose(sym.apply(th), te * th, atol=1e-12 * scale)
    ref = np.sort_complex(np.linalg.eigvals(oracles.etm_matrix(
        xi1, xi2, s, eps, mu, None if kind == "exact" else stretched_thickness(1, pml))))
    np.testing.assert_allclose(np.sort_complex(np.array([tm, te])), ref, rtol=1e-11, atol=1e-12 * scale)
    c2 = 1.0 if kind == "exact" else coth(oracles.beta(xi1 ** 2 + xi2 ** 2, s, eps * mu)
                                          * stretched_thickness(1, pml)) ** 2
    assert tm * te == pytest.approx(eps / mu * c2, rel=1e-11)


def test_pml_eigen_needs_config():
    with pytest.raises(DomainError):
        te_tm_eigen((1, 0), 1.0, 1, UNIT, kind="pml")


@given(theta=st.floats(0.0, 2 * math.pi), xi1=xis, xi2=xis, s2=s2s)
def test_rotation_covariance(theta, xi1, xi2, s2):
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    xr = R @ np.array([xi1, xi2])
    s = complex(0.7, s2)
    a = etm_exact(tuple(xr), s, 1, UNIT).matrix
    b = R @ etm_exact((xi1, xi2), s, 1, UNIT).matrix @ R.T
    np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(b).max())


# ---------------------------------------------------------------- trace norms and passivity


def test_trace_norm_examples():
    assert trace_norm_curl(XiLattice.single(), [[0, 0]]) == 0.0
    assert trace_norm_curl(XiLattice.single(), [[1, 0]]) == pytest.approx(1.0)
    assert trace_norm_curl(XiLattice.single(1.0, 0.0), [[0, 1]]) == pytest.approx(2 ** 0.25, rel=1e-15)
    # the div weight sees the xi-parallel part instead
    assert trace_norm_div(XiLattice.single(1.0, 0.0), [[0, 1]]) == pytest.approx(2 ** -0.25, rel=1e-15)
    assert trace_norm_div(XiLattice.single(1.0, 0.0), [[1, 0]]) == pytest.approx(2 ** 0.25, rel=1e-15)


def test_trace_norm_rejects_empty_lattice():
    empty = XiLattice(np.array([]), np.array([]), np.array([]))
    with pytest.raises(DomainError):
        trace_norm_curl(empty, np.zeros((0, 2)))


def test_trace_norm_lattice_quadrature():
    # |omega|^2 = 1 on every node: sum of w (1 + xi2^2)/sqrt(1 + |xi|^2) against a direct sum
    lat = xi_lattice(3.0, 21)
    om = np.tile([1.0, 0.0], (len(lat), 1))
    ref = np.sqrt(np.sum(lat.weights * (1.0 + lat.xi2 ** 2) / np.sqrt(1.0 + lat.norm_sq)))
    assert trace_norm_curl(lat, om) == pytest.approx(ref, rel=1e-14)


def test_xi_lattice_contains_origin_exactly():
    for extent in (1.0, 2.7, 13.3):
        lat = xi_lattice(extent, 41)
        assert np.count_nonzero(lat.norm_sq == 0.0) == 1
        assert lat.weights.sum() == pytest.approx((2 * extent) ** 2)


def test_passivity_examples():
    assert passivity_form((0, 0), 1.0, 1, UNIT, [0, 0]) == 0.0
    assert passivity_form((0, 0), 1.0, 1, UNIT, [1, 0]) == pytest.approx(1.0)


@given(xi1=xis, xi2=xis, s1=s1s, s2=s2s, eps=ems, mu=ems,
       o=st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_passivity_property(xi1, xi2, s1, s2, eps, mu, o):
    media = MediumParams(eps1=eps, mu1=mu)
    omega = [complex(o[0], o[1]), complex(o[2], o[3])]
    assert passivity_form((xi1, xi2), complex(s1, s2), 1, media, omega) >= -1e-12
