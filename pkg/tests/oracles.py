"""Independent reference computations for the test-suite.

Nothing here imports the package under test. Each oracle recomputes a
quantity from its defining formula with a different tool: mpmath for
high-precision scalar algebra, sympy for exact polynomial calculus, scipy
for quadrature, optimisation and boundary-value problems.
"""

import math

import mpmath as mp
import numpy as np
import sympy as sp
from scipy import integrate, optimize

mp.mp.dps = 40


# --------------------------------------------------------------------------
# scalar symbols
# --------------------------------------------------------------------------


def beta(xi_sq, s, eps_mu):
    """Principal square root of ``eps mu s^2 + |xi|^2`` in 40-digit arithmetic."""
    s = mp.mpc(s)
    return complex(mp.sqrt(eps_mu * s * s + xi_sq))


def coth_minus_one(w):
    # coth w - 1 ~ 2 e^{-2 Re w}: enough digits to resolve it after the cancellation
    with mp.workdps(60 + int(abs(complex(w).real))):
        return complex(mp.coth(mp.mpc(w)) - 1)


def etm_matrix(xi1, xi2, s, eps, mu, ltilde=None):
    """The 2x2 EtM symbol from its entrywise definition."""
    s = mp.mpc(s)
    em_s2 = eps * mu * s * s
    b = mp.sqrt(em_s2 + xi1 * xi1 + xi2 * xi2)
    scale = 1 / (mu * s * b)
    if ltilde is not None:
        scale *= mp.coth(b * ltilde)
    m = [[(em_s2 + xi2 * xi2) * scale, -xi1 * xi2 * scale], [-xi1 * xi2 * scale, (em_s2 + xi1 * xi1) * scale]]
    return np.array([[complex(v) for v in row] for row in m])


def decay_factor(x):
    """``2 e^{-x} / (1 - e^{-x})`` in high precision."""
    x = mp.mpf(x)
    return float(2 * mp.e ** (-x) / (1 - mp.e ** (-x)))


def sup_weight_ratio(s, eps_mu, r_max=1e4):
    """``sup_{r >= 0} sqrt(1 + r^2) / |beta(r)|`` by dense sampling plus a
    bounded local polish around the best sample (and the limit 1 at
    infinity)."""
    s = complex(s)

    def f(r):
        return math.sqrt(1.0 + r * r) / abs(np.sqrt(eps_mu * s * s + r * r + 0j))

    r = np.concatenate([[0.0], np.geomspace(1e-6, r_max, 20001)])
    vals = np.array([f(x) for x in r])
    k = int(np.argmax(vals))
    lo, hi = r[max(k - 1, 0)], r[min(k + 1, r.size - 1)]
    best = vals[k]
    if hi > lo:
        res = optimize.minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14})
        best = max(best, -res.fun)
    return max(best, 1.0)


# --------------------------------------------------------------------------
# PML profile
# --------------------------------------------------------------------------


def profile(x3, h1, h2, L1, L2, sigma1, sigma2, m, s1):
    if x3 > h1:
        return 1.0 + sigma1 * ((x3 - h1) / L1) ** m / s1
    if x3 < h2:
        return 1.0 + sigma2 * ((h2 - x3) / L2) ** m / s1
    return 1.0


def stretched(x3, **kw):
    """``int_0^{x3} sigma`` by piecewise Gauss-Legendre quadrature split at the kinks."""
    pts = [p for p in (kw["h1"], kw["h2"]) if min(0.0, x3) < p < max(0.0, x3)]
    edges = [0.0, *sorted(pts), x3] if x3 >= 0 else [0.0, *sorted(pts, reverse=True), x3]
    # the profile is a polynomial on each piece, so Gauss-Legendre with enough nodes is exact
    nodes, weights = np.polynomial.legendre.leggauss(16)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * sum(w * profile(x, **kw) for w, x in zip(weights, t))
    return total


# --------------------------------------------------------------------------
# two-layer mode problem (TE, Robin closures)
# --------------------------------------------------------------------------


def hat(x, lo, peak, hi, height=1.0):
    x = np.asarray(x, dtype=float)
    up = np.where((x > lo) & (x <= peak), (x - lo) / (peak - lo), 0.0)
    dn = np.where((x > peak) & (x < hi), (hi - x) / (hi - peak), 0.0)
    return height * (up + dn)


def te_mode_bvp(xi, s, eps, mu, h1, h2, f0, gamma_top, gamma_bot, src_amp, lo, peak, hi):
    """Solve ``(w u')' - w beta^2 u = J_t p(x)`` with ``w = 1/(s mu_j)``,
    ``u' = -gamma_top u`` at ``h1`` and ``u' = gamma_bot u`` at ``h2``, with
    ``u`` and ``w u'`` continuous at ``f0``. Both layers are mapped to
    ``[0, 1]`` and integrated by :func:`scipy.integrate.solve_bvp`.

    Returns a callable ``u(x)``.
    """
    xi_sq = xi[0] ** 2 + xi[1] ** 2
    w = [1.0 / (s * mu[0]), 1.0 / (s * mu[1])]
    b2 = [eps[0] * mu[0] * s * s + xi_sq, eps[1] * mu[1] * s * s + xi_sq]
    d1, d2 = h1 - f0, f0 - h2

    def fun(t, y):
        # y = (u_top, F_top, u_bot, F_bot); t = 0 at the interface
        x_top = f0 + t * d1
        x_bot = f0 - t * d2
        u1, F1, u2, F2 = y
        du1 = d1 * F1 / w[0]
        dF1 = d1 * (w[0] * b2[0] * u1 + src_amp * hat(x_top, lo, peak, hi))
        du2 = -d2 * F2 / w[1]
        dF2 = -d2 * (w[1] * b2[1] * u2 + src_amp * hat(x_bot, lo, peak, hi))
        return np.vstack([du1, dF1, du2, dF2])

    def bc(ya, yb):
        return np.array([
            ya[0] - ya[2],
            ya[1] - ya[3],
            yb[1] / w[0] + gamma_top * yb[0],
            yb[3] / w[1] - gamma_bot * yb[2],
        ])

    knots = sorted({0.0, 1.0, *[abs(k - f0) / d for k in (lo, peak, hi) for d in (d1, d2) if 0 < abs(k - f0) < d]})
    t = np.unique(np.concatenate([np.linspace(a, b, 200) for a, b in zip(knots[:-1], knots[1:])]))
    y0 = np.zeros((4, t.size), dtype=complex)
    sol = integrate.solve_bvp(fun, bc, t, y0, tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(sol.message)

    def u(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        top = x >= f0
        out[top] = sol.sol((x[top] - f0) / d1)[0]
        out[~top] = sol.sol((f0 - x[~top]) / d2)[2]
        return out

    return u


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------


def laplace_quad(fn, s, t_max=np.inf):
    """``int_0^inf e^{-st} fn(t) dt`` by adaptive quadrature."""
    s = complex(s)
    re, _ = integrate.quad(lambda t: (np.exp(-s * t) * fn(t)).real, 0.0, t_max, limit=400, epsabs=1e-13)
    im, _ = integrate.quad(lambda t: (np.exp(-s * t) * fn(t)).imag, 0.0, t_max, limit=400, epsabs=1e-13)
    return complex(re, im)


# --------------------------------------------------------------------------
# elasticity, symbolically
# --------------------------------------------------------------------------

X = sp.symbols("x1 x2 x3")


def random_polynomial_field(rng, degree=3, terms=6):
    """A random vector polynomial field (sympy expressions)."""
    out = []
    for _ in range(3):
        expr = 0
        for _ in range(terms):
            powers = rng.integers(0, degree + 1, size=3)
            while powers.sum() > degree:
                powers[rng.integers(0, 3)] -= 1
            c = sp.Rational(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
            expr += c * X[0] ** int(powers[0]) * X[1] ** int(powers[1]) * X[2] ** int(powers[2])
        out.append(sp.expand(expr))
    return out


def jet_at(u, point):
    """Value, gradient ``G[i, k] = d_k u_i`` and Hessian ``H[i, k, l]`` at a point."""
    sub = dict(zip(X, point))
    val = np.array([float(ui.subs(sub)) for ui in u])
    grad = np.array([[float(sp.diff(ui, xk).subs(sub)) for xk in X] for ui in u])
    hess = np.array([[[float(sp.diff(ui, xk, xl).subs(sub)) for xl in X] for xk in X] for ui in u])
    return val, grad, hess


def div_stress_symbolic(u, lam, mu, point):
    """``div(lam tr(e) I + 2 mu e)`` evaluated exactly."""
    e = [[(sp.diff(u[i], X[k]) + sp.diff(u[k], X[i])) / 2 for k in range(3)] for i in range(3)]
    tr = sum(e[i][i] for i in range(3))
    sig = [[lam * tr * (1 if i == k else 0) + 2 * mu * e[i][k] for k in range(3)] for i in range(3)]
    sub = dict(zip(X, point))
    return np.array([float(sum(sp.diff(sig[i][k], X[k]) for k in range(3)).subs(sub)) for i in range(3)])


def traction_symbolic(u, lam, mu, n, point):
    """``sigma(u) n`` evaluated exactly."""
    e = [[(sp.diff(u[i], X[k]) + sp.diff(u[k], X[i])) / 2 for k in range(3)] for i in range(3)]
    tr = sum(e[i][i] for i in range(3))
    sub = dict(zip(X, point))
    sig = np.array([[float((lam * tr * (1 if i == k else 0) + 2 * mu * e[i][k]).subs(sub)) for k in range(3)]
                    for i in range(3)])
    return sig @ np.asarray(n, dtype=float)


def coercivity_minimum(lam, mu):
    """Smallest eigenvalue of the quadratic form ``lam tr(e)^2 + 2 mu e:e``
    on symmetric 3x3 matrices, written in an orthonormal basis of that
    6-dimensional space."""
    basis = []
    for i in range(3):
        m = np.zeros((3, 3))
        m[i, i] = 1.0
        basis.append(m)
    for i, k in ((0, 1), (0, 2), (1, 2)):
        m = np.zeros((3, 3))
        m[i, k] = m[k, i] = 1.0 / math.sqrt(2.0)
        basis.append(m)
    Q = np.array([[lam * np.trace(a) * np.trace(b) + 2 * mu * np.sum(a * b) for b in basis] for a in basis])
    return float(np.linalg.eigvalsh(Q)[0])
