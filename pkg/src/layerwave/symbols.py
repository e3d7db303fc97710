"""Fourier symbols of the electric-to-magnetic (EtM) boundary operators.

For a transverse wavenumber ``xi = (xi1, xi2)`` and Laplace variable ``s``
the exact EtM symbol of layer ``j`` is the complex-symmetric matrix

    M = 1/(mu s beta) [[eps mu s^2 + xi2^2, -xi1 xi2],
                       [-xi1 xi2,           eps mu s^2 + xi1^2]]

with ``beta = (eps mu s^2 + |xi|^2)^(1/2)``, ``Re beta > 0``. The PML
symbol is ``coth(beta Ltilde) M``. Both are diagonal in the basis
``(xi/|xi|, xi_perp/|xi|)`` with eigenvalues ``eps s / beta`` (TM) and
``beta / (mu s)`` (TE).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .model import MediumParams, PmlConfig, as_laplace, stretched_thickness

__all__ = [
    "TransverseMode",
    "SymbolKind",
    "EtmSymbol",
    "XiLattice",
    "principal_sqrt",
    "beta",
    "beta_array",
    "coth",
    "coth_minus_one",
    "etm_exact",
    "etm_pml",
    "etm_entries",
    "te_tm_basis",
    "te_tm_eigen",
    "xi_lattice",
    "trace_norm_curl",
    "trace_norm_div",
    "passivity_form",
]


@dataclass(frozen=True)
class TransverseMode:
    """Transverse wavenumber ``(xi1, xi2)``."""

    xi1: float = 0.0
    xi2: float = 0.0

    def __post_init__(self):
        for key in ("xi1", "xi2"):
            value = float(getattr(self, key))
            if not math.isfinite(value):
                raise DomainError(f"{key} must be finite")
            object.__setattr__(self, key, value)

    @property
    def norm_sq(self) -> float:
        return self.xi1 * self.xi1 + self.xi2 * self.xi2

    @property
    def norm(self) -> float:
        return math.hypot(self.xi1, self.xi2)

    def as_array(self):
        return np.array([self.xi1, self.xi2])


def _as_mode(xi) -> TransverseMode:
    if isinstance(xi, TransverseMode):
        return xi
    xi1, xi2 = xi
    return TransverseMode(xi1, xi2)


class SymbolKind(str, Enum):
    EXACT = "exact"
    PML = "pml"


@dataclass(frozen=True)
class EtmSymbol:
    """One 2x2 EtM symbol evaluated at a single ``(xi, s)``."""

    m11: complex
    m12: complex
    m21: complex
    m22: complex
    layer: int
    kind: SymbolKind = SymbolKind.EXACT

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def apply(self, omega) -> np.ndarray:
        return self.matrix @ np.asarray(omega, dtype=complex)

    def __sub__(self, other: "EtmSymbol") -> np.ndarray:
        return self.matrix - other.matrix


# --------------------------------------------------------------------------
# scalar building blocks
# --------------------------------------------------------------------------


def principal_sqrt(z):
    """Square root with nonnegative real part, by the explicit formula.

    ``sqrt((|z| + z1)/2) + i sgn(z2) sqrt((|z| - z1)/2)``, evaluated in a
    cancellation-free way. ``sgn(0)`` is taken as ``+1`` so the negative
    real axis maps to the positive imaginary axis. Works on scalars and
    arrays.
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    mod = np.abs(z)
    r = np.sqrt(0.5 * (mod + np.abs(x)))
    safe = np.where(r > 0.0, r, 1.0)
    other = np.abs(y) / (2.0 * safe)
    sgn = np.where(np.signbit(y) & (y != 0.0), -1.0, 1.0)
    re = np.where(x >= 0.0, r, other)
    im = np.where(x >= 0.0, y / (2.0 * safe), sgn * r)
    out = np.where(r > 0.0, re + 1j * im, 0.0 + 0.0j)
    return complex(out) if out.ndim == 0 else out


def beta_array(xi_sq, s, eps_mu):
    """Vectorised ``beta = (eps mu s^2 + |xi|^2)^(1/2)``."""
    s = np.asarray(s, dtype=complex)
    return principal_sqrt(eps_mu * s * s + np.asarray(xi_sq, dtype=float))


def beta(xi, s, j: int, media: MediumParams) -> complex:
    """Vertical decay exponent of layer ``j`` with ``Re beta > 0``."""
    mode = _as_mode(xi)
    sv = as_laplace(s)
    b = beta_array(mode.norm_sq, sv, media.eps_mu(j))
    if not b.real > 0.0:
        raise DomainError("Re(beta) must be positive for Re(s) > 0")
    return complex(b)


def coth(w):
    """``coth w`` for ``Re w > 0`` using only decaying exponentials."""
    w = np.asarray(w, dtype=complex)
    e = np.exp(-2.0 * w)
    out = (1.0 + e) / (-np.expm1(-2.0 * w))
    return complex(out) if out.ndim == 0 else out


def coth_minus_one(w):
    """``coth w - 1 = 2 e^{-2w} / (1 - e^{-2w})`` without cancellation."""
    w = np.asarray(w, dtype=complex)
    out = 2.0 * np.exp(-2.0 * w) / (-np.expm1(-2.0 * w))
    return complex(out) if out.ndim == 0 else out


def etm_entries(xi1, xi2, s, eps, mu, ltilde=None):
    """Vectorised symbol entries ``(m11, m12, m22)`` and ``beta``.

    ``ltilde`` (stretched PML thickness) multiplies the symbol by
    ``coth(beta ltilde)``; ``None`` gives the exact symbol.
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    s = np.asarray(s, dtype=complex)
    em_s2 = eps * mu * s * s
    b = principal_sqrt(em_s2 + xi1 * xi1 + xi2 * xi2)
    scale = 1.0 / (mu * s * b)
    if ltilde is not None:
        scale = scale * coth(b * ltilde)
    m11 = (em_s2 + xi2 * xi2) * scale
    m12 = -(xi1 * xi2) * scale
    m22 = (em_s2 + xi1 * xi1) * scale
    return m11, m12, m22, b


def _symbol(xi, s, j, media, ltilde, kind):
    mode = _as_mode(xi)
    sv = as_laplace(s)
    m11, m12, m22, _ = etm_entries(mode.xi1, mode.xi2, sv, media.eps(j), media.mu(j), ltilde)
    m12 = complex(m12)
    return EtmSymbol(complex(m11), m12, m12, complex(m22), j, kind)


def etm_exact(xi, s, j: int, media: MediumParams) -> EtmSymbol:
    """Exact EtM symbol of layer ``j`` at ``(xi, s)``."""
    return _symbol(xi, s, j, media, None, SymbolKind.EXACT)


def etm_pml(xi, s, j: int, media: MediumParams, pml: PmlConfig) -> EtmSymbol:
    """PML EtM symbol ``coth(beta_j Ltilde_j)`` times the exact one."""
    return _symbol(xi, s, j, media, stretched_thickness(j, pml), SymbolKind.PML)


def te_tm_basis(xi):
    """Unit vectors ``(xi_hat, t_hat)`` with ``t_hat = (-xi2, xi1)/|xi|``.

    At ``xi = 0`` the symbol is scalar and the canonical basis is returned.
    """
    mode = _as_mode(xi)
    n = mode.norm
    if n == 0.0:
        return np.array([1.0, 0.0]), np.array([0.0, 1.0])
    xh = np.array([mode.xi1, mode.xi2]) / n
    return xh, np.array([-xh[1], xh[0]])


def te_tm_eigen(xi, s, j: int, media: MediumParams, kind="exact", pml: PmlConfig = None):
    """Eigenvalues ``(lambda_TM, lambda_TE) = (eps s / beta, beta / (mu s))``.

    ``lambda_TM`` belongs to ``xi_hat`` and ``lambda_TE`` to ``t_hat`` (see
    :func:`te_tm_basis`). With ``kind="pml"`` both carry the coth factor.
    At ``xi = 0`` the two values coincide.
    """
    kind = SymbolKind(kind)
    mode = _as_mode(xi)
    sv = as_laplace(s)
    eps, mu = media.eps(j), media.mu(j)
    b = complex(beta_array(mode.norm_sq, sv, eps * mu))
    lam_tm = eps * sv / b
    lam_te = b / (mu * sv)
    if kind is SymbolKind.PML:
        if pml is None:
            raise DomainError("kind='pml' needs a PmlConfig")
        c = coth(b * stretched_thickness(j, pml))
        lam_tm, lam_te = lam_tm * c, lam_te * c
    return complex(lam_tm), complex(lam_te)


# --------------------------------------------------------------------------
# trace norms on a transverse lattice
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class XiLattice:
    """Flattened transverse lattice: coordinates and quadrature weights."""

    xi1: np.ndarray
    xi2: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.xi1.shape != self.xi2.shape or self.xi1.shape != self.weights.shape:
            raise DomainError("lattice arrays must share one shape")

    def __len__(self):
        return int(self.xi1.size)

    @property
    def norm_sq(self):
        return self.xi1 * self.xi1 + self.xi2 * self.xi2

    @classmethod
    def single(cls, xi1=0.0, xi2=0.0, weight=1.0):
        return cls(np.array([float(xi1)]), np.array([float(xi2)]), np.array([float(weight)]))


def xi_lattice(extent: float, n: int) -> XiLattice:
    """Uniform ``n x n`` lattice on ``[-extent, extent]^2`` with trapezoid
    cell weights. Odd ``n`` puts a node exactly at the origin."""
    if n < 2 or not extent > 0.0:
        raise DomainError("xi lattice needs n >= 2 and a positive extent")
    axis = np.linspace(-extent, extent, n)
    # exact antisymmetry, so odd sizes contain xi = 0 exactly
    axis = 0.5 * (axis - axis[::-1])
    w1 = np.full(n, axis[1] - axis[0])
    w1[[0, -1]] *= 0.5
    k1, k2 = np.meshgrid(axis, axis, indexing="ij")
    w = np.outer(w1, w1)
    return XiLattice(k1.ravel(), k2.ravel(), w.ravel())


def _trace_norm(lattice, omega, weight_term):
    if len(lattice) == 0:
        raise DomainError("empty lattice")
    om = np.asarray(omega, dtype=complex).reshape(len(lattice), 2)
    o1, o2 = om[:, 0], om[:, 1]
    dens = (np.abs(o1) ** 2 + np.abs(o2) ** 2 + weight_term(o1, o2)) / np.sqrt(1.0 + lattice.norm_sq)
    return float(np.sqrt(np.sum(lattice.weights * dens)))


def trace_norm_curl(lattice: XiLattice, omega) -> float:
    """Discrete ``H^{-1/2}(curl)`` norm of tangential coefficients.

    ``omega`` has shape ``(len(lattice), 2)``.
    """
    return _trace_norm(lattice, omega, lambda o1, o2: np.abs(lattice.xi1 * o2 - lattice.xi2 * o1) ** 2)


def trace_norm_div(lattice: XiLattice, omega) -> float:
    """Discrete ``H^{-1/2}(div)`` norm of tangential coefficients."""
    return _trace_norm(lattice, omega, lambda o1, o2: np.abs(lattice.xi1 * o1 + lattice.xi2 * o2) ** 2)


def passivity_form(xi, s, j: int, media: MediumParams, omega_hat) -> float:
    """``Re(conj(omega) . M omega)`` for a single mode."""
    om = np.asarray(omega_hat, dtype=complex)
    return float(np.real(np.vdot(om, etm_exact(xi, s, j, media).apply(om))))
