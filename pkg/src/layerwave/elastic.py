"""Local elastodynamic operators and the elastic/electromagnetic interface
algebra.

A :class:`DisplacementJet` stores a displacement and its first and second
spatial derivatives at one point, with ``grad[i, j] = d_j u_i`` and
``hess[i, j, k] = d_j d_k u_i``. Complex jets are supported so the same code
serves Laplace-domain fields, and every array may carry leading batch
dimensions, so ``u`` of shape ``(B, 3)`` describes ``B`` jets at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "DisplacementJet",
    "strain",
    "stress",
    "divergence",
    "curl",
    "lame_apply",
    "div_stress",
    "traction",
    "stress_traction",
    "energy_density",
    "coercivity_constant",
    "pointwise_coercivity",
    "rayleigh_minimum",
    "interface_identity_check",
    "consistent_interface_tuple",
    "elastodynamic_residual",
    "plane_wave",
]

# Levi-Civita symbol
_LC = np.zeros((3, 3, 3))
_LC[0, 1, 2] = _LC[1, 2, 0] = _LC[2, 0, 1] = 1.0
_LC[0, 2, 1] = _LC[2, 1, 0] = _LC[1, 0, 2] = -1.0


@dataclass(frozen=True, eq=False)
class DisplacementJet:
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u)
        g = np.asarray(self.grad)
        h = np.asarray(self.hess) if self.hess is not None else np.zeros(g.shape + (3,))
        batch = u.shape[:-1]
        if u.shape != batch + (3,) or g.shape != batch + (3, 3) or h.shape != batch + (3, 3, 3):
            raise DomainError("jet shapes must be (..., 3), (..., 3, 3) and (..., 3, 3, 3)")
        scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
        if not np.allclose(h, np.swapaxes(h, -1, -2), rtol=0.0, atol=1e-12 * scale):
            raise DomainError("second derivatives must be symmetric in the derivative indices")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "hess", h)

    @property
    def batch_shape(self) -> tuple:
        return self.u.shape[:-1]

    @classmethod
    def from_grad(cls, grad, u=None):
        grad = np.asarray(grad)
        return cls(np.zeros(grad.shape[:-1]) if u is None else u, grad, np.zeros(grad.shape + (3,)))

    @classmethod
    def random(cls, rng, complex_valued=False, batch=()):
        """Standard normal jet(s); ``batch`` is the leading shape."""
        batch = tuple(np.atleast_1d(batch)) if batch != () else ()

        def draw(shape):
            a = rng.standard_normal(batch + shape)
            if complex_valued:
                a = a + 1j * rng.standard_normal(batch + shape)
            return a

        h = draw((3, 3, 3))
        h = 0.5 * (h + np.swapaxes(h, -1, -2))
        return cls(draw((3,)), draw((3, 3)), h)


def _unit(n):
    n = np.asarray(n, dtype=float)
    if n.shape[-1:] != (3,) or np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > 1e-12):
        raise DomainError("normal must be a unit 3-vector")
    return n


def _T(a):
    return np.swapaxes(a, -1, -2)


def _eye_like(tr):
    return np.asarray(tr)[..., None, None] * np.eye(3)


def _p(x, extra):
    """Append ``extra`` unit axes to a per-jet parameter array."""
    x = np.asarray(x)
    return x.reshape(x.shape + (1,) * extra) if x.ndim else x


def strain(jet: DisplacementJet) -> np.ndarray:
    """Symmetric gradient ``(grad u + grad u^T)/2``."""
    return 0.5 * (jet.grad + _T(jet.grad))


def stress(eps, lambda_e: float, mu_e: float) -> np.ndarray:
    """Hooke's law ``lambda tr(eps) I + 2 mu eps``."""
    eps = np.asarray(eps)
    return _p(lambda_e, 2) * _eye_like(np.trace(eps, axis1=-2, axis2=-1)) + 2.0 * _p(mu_e, 2) * eps


def divergence(jet: DisplacementJet):
    return np.trace(jet.grad, axis1=-2, axis2=-1)


def curl(jet: DisplacementJet) -> np.ndarray:
    """``(curl u)_i = eps_ijk d_j u_k``."""
    return np.einsum("ijk,...kj->...i", _LC, jet.grad)


def lame_apply(jet: DisplacementJet, lambda_e: float, mu_e: float) -> np.ndarray:
    """``mu Laplace(u) + (lambda + mu) grad(div u)``."""
    lap = np.einsum("...ijj->...i", jet.hess)
    grad_div = np.einsum("...jji->...i", jet.hess)
    return _p(mu_e, 1) * lap + (_p(lambda_e, 1) + _p(mu_e, 1)) * grad_div


def div_stress(jet: DisplacementJet, lambda_e: float, mu_e: float) -> np.ndarray:
    """``div sigma(u)`` assembled from the derivative of the stress tensor."""
    h = jet.hess
    # d_k sigma_ij = lambda delta_ij d_k div u + mu (d_k d_j u_i + d_k d_i u_j)
    d_div = np.einsum("...llk->...k", h)
    dsig = _p(lambda_e, 3) * np.einsum("ij,...k->...ijk", np.eye(3), d_div) + _p(mu_e, 3) * (
        h + np.einsum("...jik->...ijk", h))
    return np.einsum("...ijj->...i", dsig)


def traction(jet: DisplacementJet, n, lambda_e: float, mu_e: float) -> np.ndarray:
    """``2 mu (n . grad) u + lambda n div u + mu n x curl u``."""
    n = _unit(n)
    lam, mu = _p(lambda_e, 1), _p(mu_e, 1)
    return (2.0 * mu * np.einsum("...ij,...j->...i", jet.grad, n) + lam * n * divergence(jet)[..., None]
            + mu * np.cross(n, curl(jet)))


def stress_traction(jet: DisplacementJet, n, lambda_e: float, mu_e: float) -> np.ndarray:
    """``sigma(u) n``; equals :func:`traction` identically."""
    n = _unit(n)
    return np.einsum("...ij,...j->...i", stress(strain(jet), lambda_e, mu_e), n)


def energy_density(jet_u: DisplacementJet, jet_v: DisplacementJet, lambda_e: float, mu_e: float):
    """Both forms of the strain-energy density, as a pair.

    ``lambda div u div v + 2 mu eps(u):eps(v)`` and
    ``2 mu grad u : grad v + lambda div u div v - mu curl u . curl v``.
    The forms are bilinear (no conjugation).
    """
    du, dv = divergence(jet_u), divergence(jet_v)
    first = lambda_e * du * dv + 2.0 * mu_e * np.sum(strain(jet_u) * strain(jet_v), axis=(-2, -1))
    second = (2.0 * mu_e * np.sum(jet_u.grad * jet_v.grad, axis=(-2, -1)) + lambda_e * du * dv
              - mu_e * np.sum(curl(jet_u) * curl(jet_v), axis=-1))
    return first, second


def coercivity_constant(lambda_e, mu_e, sharp: bool = False):
    """Lower constant ``c`` in ``lambda tr(e)^2 + 2 mu e:e >= c |e|_F^2``.

    The default ``min(2 mu, lambda + 2 mu / 3)`` is the customary statement;
    ``sharp=True`` gives the optimal ``min(2 mu, 3 lambda + 2 mu)`` from the
    split into deviatoric and spherical parts. Accepts arrays of moduli.
    """
    lam = np.asarray(lambda_e, dtype=float)
    mu = np.asarray(mu_e, dtype=float)
    if np.any(mu <= 0.0) or np.any(3.0 * lam + 2.0 * mu <= 0.0):
        raise DomainError("need mu > 0 and 3 lambda + 2 mu > 0")
    c = np.minimum(2.0 * mu, 3.0 * lam + 2.0 * mu if sharp else lam + 2.0 * mu / 3.0)
    return float(c) if c.ndim == 0 else c


def pointwise_coercivity(lambda_e, mu_e, eps, sharp: bool = False):
    """``(lambda tr(e)^2 + 2 mu e:e, c |e|_F^2)``; raises if the bound fails.

    ``eps`` may carry leading batch dimensions, matched by per-sample
    ``lambda_e``/``mu_e`` arrays; arrays are returned then.
    """
    e = np.asarray(eps, dtype=float)
    scale = max(1.0, float(np.max(np.abs(e)))) if e.size else 1.0
    if not np.allclose(e, _T(e), rtol=0.0, atol=1e-14 * scale):
        raise DomainError("strain must be symmetric")
    lam = np.asarray(lambda_e, dtype=float)
    mu = np.asarray(mu_e, dtype=float)
    ff = np.sum(e * e, axis=(-2, -1))
    value = lam * np.trace(e, axis1=-2, axis2=-1) ** 2 + 2.0 * mu * ff
    bound = coercivity_constant(lam, mu, sharp) * ff
    if np.any(value < bound - 1e-12 * np.maximum(1.0, np.abs(bound))):
        raise AssertionError("pointwise coercivity violated")
    if e.ndim == 2 and lam.ndim == 0 and mu.ndim == 0:
        return float(value), float(bound)
    return value, bound


def _sym_from6(p):
    return np.array([[p[0], p[3], p[4]], [p[3], p[1], p[5]], [p[4], p[5], p[2]]])


def rayleigh_minimum(lambda_e: float, mu_e: float, rng, samples: int = 200000, polish: int = 8) -> float:
    """Numerical minimum of ``(lambda tr(e)^2 + 2 mu e:e) / e:e`` over
    symmetric ``e``: Monte-Carlo sampling, then local minimisation started
    from the best ``polish`` samples.

    Independent of :func:`coercivity_constant`; used to check it.
    """
    from scipy.optimize import minimize

    a = rng.standard_normal((samples, 3, 3))
    e = 0.5 * (a + np.swapaxes(a, 1, 2))
    tr = np.einsum("nii->n", e)
    ff = np.einsum("nij,nij->n", e, e)
    q = (lambda_e * tr * tr + 2.0 * mu_e * ff) / ff

    def quotient(p):
        m = _sym_from6(p)
        f = np.sum(m * m)
        return (lambda_e * np.trace(m) ** 2 + 2.0 * mu_e * f) / f

    best = float(np.min(q))
    for k in np.argsort(q)[:polish]:
        m = e[k]
        p0 = np.array([m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2]])
        res = minimize(quotient, p0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
        best = min(best, float(res.fun))
    return best


def interface_identity_check(H, E, u_t, n, Tu):
    """Residual of ``(H x E) . n = Tu . u_t`` given ``n x H = Tu`` and
    ``n x E = n x u_t``.

    Returns ``(ok, residual)`` with the residual scaled by
    ``|H||E| + |Tu||u_t|``; ``ok`` uses a ``1e-12`` threshold. Inputs
    violating the two constraints raise :class:`DomainError`. Leading batch
    dimensions give the maximum residual.
    """
    n = _unit(n)
    H, E, u_t, Tu = (np.asarray(v) for v in (H, E, u_t, Tu))

    def nrm(v):
        return np.linalg.norm(v, axis=-1)

    scale = np.maximum(nrm(H) * nrm(E) + nrm(Tu) * nrm(u_t), 1e-300)
    c1 = nrm(np.cross(n, H) - Tu) / np.maximum(nrm(H) + nrm(Tu), 1e-300)
    c2 = nrm(np.cross(n, E) - np.cross(n, u_t)) / np.maximum(nrm(E) + nrm(u_t), 1e-300)
    if np.any(c1 > 1e-12) or np.any(c2 > 1e-12):
        raise DomainError("inputs do not satisfy n x H = Tu and n x E = n x u_t")
    lhs = np.sum(np.cross(H, E) * n, axis=-1)
    rhs = np.sum(Tu * u_t, axis=-1)
    residual = float(np.max(np.abs(lhs - rhs) / scale))
    return residual <= 1e-12, residual


def consistent_interface_tuple(rng, batch=(), complex_valued=False):
    """Random ``(H, E, u_t, n, Tu)`` with ``Tu = n x H`` and ``E``, ``u_t``
    sharing their tangential part."""
    batch = tuple(np.atleast_1d(batch)) if batch != () else ()

    def draw():
        a = rng.standard_normal(batch + (3,))
        return a + 1j * rng.standard_normal(batch + (3,)) if complex_valued else a

    n = rng.standard_normal(batch + (3,))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    H, E = draw(), draw()
    # u_t differs from E only along n
    u_t = E + rng.standard_normal(batch + (1,)) * n
    return H, E, u_t, n, np.cross(n, H)


def elastodynamic_residual(u, dt: float, h: float, rho_e: float, lambda_e: float, mu_e: float) -> np.ndarray:
    """Finite-difference ``rho u_tt - (mu Laplace u + (lambda + mu) grad div u)``.

    ``u`` has shape ``(nt, nx, ny, nz, 3)`` on a uniform grid. Second-order
    central differences are used for all second derivatives (mixed ones
    included); the output drops one layer of points on every side.
    """
    u = np.asarray(u)
    if u.ndim != 5 or u.shape[-1] != 3 or min(u.shape[:4]) < 3:
        raise DomainError("u must have shape (nt, nx, ny, nz, 3) with at least 3 points per axis")
    core = (slice(1, -1),) * 4

    def shift(axis, k):
        idx = [slice(1, -1)] * 4
        idx[axis] = slice(1 + k, u.shape[axis] - 1 + k)
        return tuple(idx)

    def shift2(a1, k1, a2, k2):
        idx = [slice(1, -1)] * 4
        idx[a1] = slice(1 + k1, u.shape[a1] - 1 + k1)
        idx[a2] = slice(1 + k2, u.shape[a2] - 1 + k2)
        return tuple(idx)

    c = u[core]
    utt = (u[shift(0, 1)] - 2.0 * c + u[shift(0, -1)]) / (dt * dt)
    # d2[j][k] for spatial axes j, k in {0, 1, 2} (array axes 1..3)
    d2 = [[None] * 3 for _ in range(3)]
    for j in range(3):
        aj = j + 1
        d2[j][j] = (u[shift(aj, 1)] - 2.0 * c + u[shift(aj, -1)]) / (h * h)
        for k in range(j + 1, 3):
            ak = k + 1
            mixed = (u[shift2(aj, 1, ak, 1)] - u[shift2(aj, 1, ak, -1)] - u[shift2(aj, -1, ak, 1)]
                     + u[shift2(aj, -1, ak, -1)]) / (4.0 * h * h)
            d2[j][k] = d2[k][j] = mixed
    lap = d2[0][0] + d2[1][1] + d2[2][2]
    grad_div = np.stack([sum(d2[i][j][..., j] for j in range(3)) for i in range(3)], axis=-1)
    return rho_e * utt - (mu_e * lap + (lambda_e + mu_e) * grad_div)


def plane_wave(k, d, s, t, x, y, z):
    """Sample ``d exp(s t + i k . x)`` on a tensor grid; shape ``(nt, nx, ny, nz, 3)``."""
    k = np.asarray(k, dtype=float)
    d = np.asarray(d)
    T, X, Y, Z = np.meshgrid(t, x, y, z, indexing="ij")
    phase = np.exp(s * T + 1j * (k[0] * X + k[1] * Y + k[2] * Z))
    return phase[..., None] * d
