import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

import oracles
from layerwave import elastic as el
from layerwave.errors import DomainError

X1, X2, X3 = oracles.X


def jet_of(u, point=(0.0, 0.0, 0.0)):
    return el.DisplacementJet(*oracles.jet_at([sp.sympify(c) for c in u], point))


# ---------------------------------------------------------------- strain and stress


def test_strain_examples():
    assert np.array_equal(el.strain(el.DisplacementJet.from_grad(np.eye(3))), np.eye(3))
    a = np.array([[0.0, 1.0, -2.0], [-1.0, 0.0, 3.0], [2.0, -3.0, 0.0]])
    assert np.array_equal(el.strain(el.DisplacementJet.from_grad(a)), np.zeros((3, 3)))
    g = np.zeros((3, 3))
    g[0, 1] = 1.0
    expect = np.array([[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]])
    assert np.array_equal(el.strain(el.DisplacementJet.from_grad(g)), expect)


def test_stress_examples(rng):
    assert np.array_equal(el.stress(np.eye(3), 1.0, 1.0), 5 * np.eye(3))
    assert np.array_equal(el.stress(np.zeros((3, 3)), 1.0, 1.0), np.zeros((3, 3)))
    a = rng.standard_normal((3, 3))
    e = a + a.T
    e -= np.trace(e) / 3 * np.eye(3)
    assert np.allclose(el.stress(e, 7.0, 0.4), 0.8 * e, rtol=0, atol=1e-15)


# ---------------------------------------------------------------- Lame operator


def test_lame_examples():
    const = el.DisplacementJet(np.array([1.0, 2.0, 3.0]), np.zeros((3, 3)), np.zeros((3, 3, 3)))
    assert np.array_equal(el.lame_apply(const, 1.0, 1.0), np.zeros(3))
    jet = jet_of([X1 ** 2, 0, 0])
    assert np.array_equal(el.lame_apply(jet, 1.0, 1.0), np.array([6.0, 0.0, 0.0]))


@pytest.mark.parametrize("seed", range(6))
def test_lame_matches_symbolic_div_stress(seed):
    rng = np.random.default_rng(seed)
    u = oracles.random_polynomial_field(rng)
    lam, mu = 1.7, 0.6
    point = tuple(rng.uniform(-1, 1, 3))
    jet = jet_of(u, point)
    ref = oracles.div_stress_symbolic(u, lam, mu, point)
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(el.lame_apply(jet, lam, mu) - ref)) <= 1e-13 * scale
    assert np.max(np.abs(el.div_stress(jet, lam, mu) - ref)) <= 1e-13 * scale


def test_lame_equals_div_stress_on_random_complex_jets(rng):
    jets = el.DisplacementJet.random(rng, complex_valued=True, batch=1000)
    lam = rng.uniform(0.1, 5, 1000)
    mu = rng.uniform(0.1, 5, 1000)
    a = el.lame_apply(jets, lam, mu)
    b = el.div_stress(jets, lam, mu)
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)) < 1e-13


# ---------------------------------------------------------------- traction


def test_traction_examples():
    n = np.array([0.0, 0.0, 1.0])
    rigid = el.DisplacementJet(np.array([1.0, -1.0, 2.0]), np.zeros((3, 3)), np.zeros((3, 3, 3)))
    assert np.array_equal(el.traction(rigid, n, 1.0, 1.0), np.zeros(3))
    shear = jet_of([X3, 0, 0])
    assert np.allclose(el.traction(shear, n, 1.0, 1.0), [1.0, 0.0, 0.0], atol=1e-15)
    assert np.allclose(el.stress_traction(shear, n, 1.0, 1.0), [1.0, 0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_traction_matches_symbolic_stress_times_normal(seed):
    rng = np.random.default_rng(100 + seed)
    u = oracles.random_polynomial_field(rng)
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    point = tuple(rng.uniform(-1, 1, 3))
    ref = oracles.traction_symbolic(u, 0.9, 2.1, n, point)
    got = el.traction(jet_of(u, point), n, 0.9, 2.1)
    assert np.max(np.abs(got - ref)) <= 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_traction_identity_on_random_jets(rng):
    jets = el.DisplacementJet.random(rng, complex_valued=True, batch=2000)
    n = rng.standard_normal((2000, 3))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    lam, mu = rng.uniform(0.1, 5, 2000), rng.uniform(0.1, 5, 2000)
    diff = el.traction(jets, n, lam, mu) - el.stress_traction(jets, n, lam, mu)
    assert np.max(np.abs(diff)) <= 1e-13 * np.max(np.abs(el.stress_traction(jets, n, lam, mu)))


def test_traction_rejects_non_unit_normal():
    jet = el.DisplacementJet.from_grad(np.eye(3))
    with pytest.raises(DomainError):
        el.traction(jet, [0.0, 0.0, 2.0], 1.0, 1.0)


# ---------------------------------------------------------------- energy density


def test_energy_density_examples():
    lam, mu = 1.3, 0.7
    stretch = el.DisplacementJet.from_grad(np.diag([1.0, 0.0, 0.0]))
    a, b = el.energy_density(stretch, stretch, lam, mu)
    assert a == pytest.approx(lam + 2 * mu) and b == pytest.approx(lam + 2 * mu)
    rot = jet_of([-X2, X1, 0])
    a, b = el.energy_density(rot, rot, lam, mu)
    assert a == 0.0 and b == 0.0
    zero = el.DisplacementJet.from_grad(np.zeros((3, 3)))
    assert el.energy_density(rot, zero, lam, mu) == (0.0, 0.0)


def test_energy_density_forms_agree(rng):
    u = el.DisplacementJet.random(rng, complex_valued=True, batch=1000)
    v = el.DisplacementJet.random(rng, complex_valued=True, batch=1000)
    a, b = el.energy_density(u, v, 2.0, 0.5)
    assert np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0)) < 1e-13


# ---------------------------------------------------------------- coercivity


def test_coercivity_examples():
    assert el.pointwise_coercivity(0.0, 1.0, np.eye(3)) == pytest.approx((6.0, 2.0))
    assert el.pointwise_coercivity(0.0, 1.0, np.eye(3), sharp=True) == pytest.approx((6.0, 6.0))
    assert el.pointwise_coercivity(1.0, 1.0, np.zeros((3, 3))) == (0.0, 0.0)
    e = np.diag([1.0, -1.0, 0.0])
    # traceless, and 2 mu is the minimum: equality
    value, bound = el.pointwise_coercivity(5.0, 1.0, e)
    assert value == bound == 4.0


@given(lam=st.floats(-0.6, 10.0), mu=st.floats(0.1, 5.0))
def test_sharp_constant_matches_eigenvalue_oracle(lam, mu):
    if 3 * lam + 2 * mu <= 0.05:
        return
    ref = oracles.coercivity_minimum(lam, mu)
    assert el.coercivity_constant(lam, mu, sharp=True) == pytest.approx(ref, rel=1e-10, abs=1e-12)
    assert el.coercivity_constant(lam, mu) <= ref + 1e-12


def test_rayleigh_search_reaches_the_sharp_constant(rng):
    for lam, mu in ((0.0, 1.0), (3.0, 0.5), (-0.5, 1.0)):
        found = el.rayleigh_minimum(lam, mu, rng, samples=20000)
        assert found == pytest.approx(el.coercivity_constant(lam, mu, sharp=True), rel=1e-6)


def test_coercivity_rejects_bad_moduli():
    with pytest.raises(DomainError):
        el.coercivity_constant(1.0, 0.0)
    with pytest.raises(DomainError):
        el.coercivity_constant(-1.0, 1.0)
    with pytest.raises(DomainError):
        el.pointwise_coercivity(1.0, 1.0, np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))


# ---------------------------------------------------------------- interface identity


def test_interface_identity_example():
    ok, res = el.interface_identity_check([1, 0, 0], [2, 3, 5], [2, 3, 7], [0, 0, 1], [0, 1, 0])
    assert ok and res == 0.0
    ok, res = el.interface_identity_check([0, 0, 0], [2, 3, 5], [2, 3, 7], [0, 0, 1], [0, 0, 0])
    assert ok and res == 0.0


def test_interface_identity_randomised(rng):
    for complex_valued in (False, True):
        tup = el.consistent_interface_tuple(rng, batch=100000, complex_valued=complex_valued)
        ok, res = el.interface_identity_check(*tup)
        assert ok and res <= 1e-12


def test_interface_identity_validation():
    with pytest.raises(DomainError):
        el.interface_identity_check([1, 0, 0], [2, 3, 5], [2, 3, 7], [0, 0, 2], [0, 2, 0])
    with pytest.raises(DomainError):
        el.interface_identity_check([1, 0, 0], [2, 3, 5], [2, 3, 7], [0, 0, 1], [0, 2, 0])


# ---------------------------------------------------------------- elastodynamic residual


def test_residual_trivial_fields():
    g = np.linspace(0, 1, 5)
    assert np.array_equal(el.elastodynamic_residual(np.zeros((4, 5, 5, 5, 3)), 0.1, 0.1, 1, 1, 1), np.zeros((2, 3, 3, 3, 3)))
    T, X, Y, Z = np.meshgrid(g[:4], g, g, g, indexing="ij")
    lin = np.stack([X, np.zeros_like(X), np.zeros_like(X)], axis=-1)
    assert np.max(np.abs(el.elastodynamic_residual(lin, 0.25, 0.25, 1, 2, 3))) < 1e-12
    with pytest.raises(DomainError):
        el.elastodynamic_residual(np.zeros((2, 5, 5, 5, 3)), 0.1, 0.1, 1, 1, 1)


@pytest.mark.parametrize("kind", ["pressure", "shear"])
def test_plane_wave_residual_is_second_order(kind):
    rho, lam, mu = 1.2, 2.0, 0.8
    k = np.array([1.0, 0.5, -0.3])
    kk = k @ k
    modulus = lam + 2 * mu if kind == "pressure" else mu
    s = 1j * np.sqrt(modulus * kk / rho)  # modulus |k|^2 = -rho s^2
    d = k / np.sqrt(kk) if kind == "pressure" else np.cross(k, [0.0, 0.0, 1.0])
    errs = []
    for h in (0.2, 0.1, 0.05):
        ax = np.array([-h, 0.0, h])
        u = el.plane_wave(k, d, s, ax, ax, ax, ax)
        errs.append(abs(el.elastodynamic_residual(u, h, h, rho, lam, mu)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2.0) <= 0.1), rates
