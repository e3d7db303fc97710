"""Truncation-error bounds for the PML EtM symbol.

The chain is

* ``Lambda_j(s)`` bounds ``(1 + |xi|^2)^(1/2) / |beta_j(xi)|`` uniformly in
  ``xi``; which closed form applies depends on a case split in
  ``(s1, s2)`` (see :class:`Regime`);
* ``Gamma_j = Lambda_j max(eps mu |s|^2, 1) / (mu |s|)``;
* ``M_j = Gamma_j 2 e^{-2 sqrt(eps mu) Lbar_j} / (1 - e^{-2 sqrt(eps mu) Lbar_j})``
  bounds the operator norm of the symbol difference between the
  ``H^{-1/2}(curl)`` trace spaces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError
from .model import MediumParams, PmlConfig, as_laplace, decay_scale, eta_constant, stretched_thickness
from .symbols import XiLattice, beta_array, coth, coth_minus_one, etm_entries

__all__ = [
    "Regime",
    "BoundReport",
    "GUARD",
    "epsilon0",
    "classify_regime",
    "lambda_j",
    "lambda_three_branch",
    "lambda_oracle",
    "gamma_j",
    "mj_bound",
    "coth_sup_check",
    "symbol_error_opnorm",
    "symbol_error_opnorm_closed",
    "theorem_factor",
    "theorem_prefactor",
    "bound_report",
    "eta_constant",
]

GUARD = 1e-14


class Regime(str, Enum):
    I = "I"
    II_A = "II.a"
    II_B = "II.b"
    II_C_I = "II.c.i"
    II_C_II = "II.c.ii"
    II_C_III_1 = "II.c.iii.1"
    II_C_III_2 = "II.c.iii.2"


@dataclass(frozen=True)
class BoundReport:
    s1: float
    s2: float
    layer: int
    regime: Regime
    lambda_val: float
    gamma_val: float
    m_bound: float
    measured_opnorm: Optional[float] = None

    @property
    def holds(self) -> bool:
        if self.measured_opnorm is None:
            return True
        return self.measured_opnorm <= self.m_bound + 1e-10


def _split(s):
    sv = as_laplace(s)
    return sv.real, sv.imag


def epsilon0(s1: float, j: int, media: MediumParams) -> float:
    """Threshold on ``s2^2`` that separates the two case-(II.c.iii) branches.

    Positive root of ``t^2 + (2 s1^2 + 1/(eps mu)) t + s1^2 (s1^2 - 1/(eps mu))``.
    """
    if not s1 > 0.0:
        raise DomainError("s1 must be positive")
    em = media.eps_mu(j)
    return -(s1 * s1 + 0.5 / em) + math.sqrt(2.0 * s1 * s1 / em + 0.25 / (em * em))


def _near(x, scale, tol):
    return abs(x) <= tol * max(1.0, abs(scale))


def _candidates(s1, s2, em, tol):
    """All regimes whose defining conditions hold up to the guard band."""
    s1sq, s2sq = s1 * s1, s2 * s2
    a = em * (s1sq - s2sq)
    eps0 = -(s1sq + 0.5 / em) + math.sqrt(2.0 * s1sq / em + 0.25 / (em * em))
    d = 1.0 - a
    e = 1.0 - em * s1sq
    out = []
    if s2sq >= s1sq or _near(s2sq - s1sq, s1sq, tol):
        out.append(Regime.I)
    if s2sq < s1sq or _near(s2sq - s1sq, s1sq, tol):
        if _near(d, a, tol):
            out.append(Regime.II_B)
        if d < 0.0 or _near(d, a, tol):
            out.append(Regime.II_A)
        if d > 0.0 or _near(d, a, tol):
            if _near(e, 1.0, tol):
                out.append(Regime.II_C_II)
            if e < 0.0 or _near(e, 1.0, tol):
                out.append(Regime.II_C_I)
            if e > 0.0 or _near(e, 1.0, tol):
                if s2sq <= eps0 or _near(s2sq - eps0, s1sq, tol):
                    out.append(Regime.II_C_III_1)
                if s2sq > eps0 or _near(s2sq - eps0, s1sq, tol):
                    out.append(Regime.II_C_III_2)
    return out


def classify_regime(s, j: int, media: MediumParams, tol: float = GUARD) -> Regime:
    """Route ``s`` to exactly one case of the Lambda analysis.

    Equality cases (II.b, II.c.ii) win inside the guard band; ties on the
    ``epsilon0`` boundary go to II.c.iii.1 as in the case definition.
    """
    s1, s2 = _split(s)
    em = media.eps_mu(j)
    s1sq, s2sq = s1 * s1, s2 * s2
    if s2sq >= s1sq:
        return Regime.I
    a = em * (s1sq - s2sq)
    d = 1.0 - a
    if _near(d, a, tol):
        return Regime.II_B
    if d < 0.0:
        return Regime.II_A
    e = 1.0 - em * s1sq
    if _near(e, 1.0, tol):
        return Regime.II_C_II
    if e < 0.0:
        return Regime.II_C_I
    if s2sq <= epsilon0(s1, j, media):
        return Regime.II_C_III_1
    return Regime.II_C_III_2


def _quartic(s1, s2, em):
    a = em * (s1 * s1 - s2 * s2)
    bsq = 4.0 * em * em * s1 * s1 * s2 * s2
    if bsq == 0.0:
        return math.inf
    return (1.0 + (1.0 - a) ** 2 / bsq) ** 0.25


def _regime_value(regime, s1, s2, em):
    if regime in (Regime.II_A, Regime.II_B):
        return 1.0
    if regime is Regime.II_C_III_1:
        return 1.0 / (math.sqrt(em) * math.hypot(s1, s2))
    return _quartic(s1, s2, em)


def lambda_j(s, j: int, media: MediumParams, tol: float = GUARD):
    """``Lambda_j(s1, s2)`` and the regime tag that produced it.

    Inside the guard band around a case boundary the largest finite value
    among the adjacent cases is returned, which keeps the bound
    conservative.
    """
    s1, s2 = _split(s)
    em = media.eps_mu(j)
    regime = classify_regime(s, j, media, tol)
    values = [_regime_value(r, s1, s2, em) for r in _candidates(s1, s2, em, tol)]
    values.append(_regime_value(regime, s1, s2, em))
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        raise DomainError(f"Lambda undefined at s = {s1}+{s2}i")
    return max(finite), regime


def lambda_three_branch(s, j: int, media: MediumParams) -> float:
    """``Lambda_j`` from the three-branch summary keyed on ``1 - eps mu s1^2``.

    Independent of :func:`lambda_j`'s case routing; used as a cross-check.
    """
    s1, s2 = _split(s)
    em = media.eps_mu(j)
    e = 1.0 - em * s1 * s1
    s2sq = s2 * s2
    if abs(e) <= GUARD:
        return (1.0 + s2sq / (4.0 * s1 * s1)) ** 0.25
    if e < 0.0:
        if s2sq <= s1 * s1 - 1.0 / em:
            return 1.0
        return _quartic(s1, s2, em)
    if s2sq <= epsilon0(s1, j, media):
        return 1.0 / (math.sqrt(em) * math.hypot(s1, s2))
    return _quartic(s1, s2, em)


def lambda_oracle(s, j: int, media: MediumParams, xi_abs) -> float:
    """Grid maximum of ``(1 + |xi|^2)^(1/2) / |beta_j(xi)|`` over radii ``xi_abs``."""
    sv = as_laplace(s)
    r = np.asarray(xi_abs, dtype=float)
    b = beta_array(r * r, sv, media.eps_mu(j))
    return float(np.max(np.sqrt(1.0 + r * r) / np.abs(b)))


def gamma_j(s, j: int, media: MediumParams) -> float:
    """``Gamma_j = Lambda_j max(eps mu |s|^2, 1) / (mu |s|)``."""
    s1, s2 = _split(s)
    mod = math.hypot(s1, s2)
    lam, _ = lambda_j(s, j, media)
    return lam * max(media.eps_mu(j) * mod * mod, 1.0) / (media.mu(j) * mod)


def _decay_factor(x):
    """``2 e^{-2x} / (1 - e^{-2x})`` for real ``x > 0``."""
    return float(np.real(coth_minus_one(x)))


def mj_bound(s, j: int, media: MediumParams, pml: PmlConfig) -> float:
    """Operator-norm bound ``M_j`` for the PML symbol error of layer ``j``.

    The bound relies on ``Re(s) Ltilde_j >= Lbar_j``, which holds when the
    PML abscissa ``pml.s1`` does not exceed ``Re(s)`` (the usual choice is
    equality). A warning is issued otherwise.
    """
    s1, _ = _split(s)
    if s1 < pml.s1 * (1.0 - 1e-12):
        warnings.warn(f"mj_bound: Re(s)={s1} < pml.s1={pml.s1}; the bound is not guaranteed", RuntimeWarning, stacklevel=2)
    x = math.sqrt(media.eps_mu(j)) * decay_scale(j, pml)
    return gamma_j(s, j, media) * _decay_factor(x)


def coth_sup_check(s, j: int, media: MediumParams, pml: PmlConfig, lattice: XiLattice):
    """Closed form at ``xi = 0`` and the grid sup of the coth deviation bound.

    Returns ``(closed, grid_sup)`` where both are values of
    ``2 e^{-2 Re(beta) Ltilde} / (1 - e^{-2 Re(beta) Ltilde})``.
    """
    if len(lattice) == 0:
        raise DomainError("empty lattice")
    sv = as_laplace(s)
    lt = stretched_thickness(j, pml)
    em = media.eps_mu(j)
    closed = _decay_factor(math.sqrt(em) * sv.real * lt)
    br = beta_array(lattice.norm_sq, sv, em).real
    grid = float(np.max(np.real(coth_minus_one(br * lt))))
    if grid > closed * (1.0 + 1e-12):
        raise AssertionError(f"coth sup {grid} exceeds the xi=0 value {closed}")
    return closed, grid


def _inv_sqrt_curl_weight(xi1, xi2):
    """Batched ``W^{-1/2}`` for ``W = (1+|xi|^2)^{-1/2} (I + c c^T)``, ``c = (-xi2, xi1)``."""
    q = xi1 * xi1 + xi2 * xi2
    w0 = (1.0 + q) ** -0.5
    out = np.zeros(xi1.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    nz = q > 0.0
    c = np.stack([-xi2, xi1], axis=-1)
    coef = np.zeros_like(q)
    coef[nz] = (1.0 / np.sqrt(1.0 + q[nz]) - 1.0) / q[nz]
    out = out + coef[..., None, None] * c[..., :, None] * c[..., None, :]
    return out / np.sqrt(w0)[..., None, None]


def symbol_error_opnorm(lattice: XiLattice, s, j: int, media: MediumParams, pml: PmlConfig) -> float:
    """Max over the lattice of the weighted spectral norm of the symbol error.

    Per mode this is ``|| W^{-1/2} (M - M_pml) W^{-1/2} ||_2`` with ``W`` the
    ``H^{-1/2}(curl)`` weight, i.e. the norm of the sesquilinear pairing
    ``<(B - B_pml) u, v>`` on the weighted space.
    """
    if len(lattice) == 0:
        raise DomainError("empty lattice")
    sv = as_laplace(s)
    eps, mu = media.eps(j), media.mu(j)
    xi1, xi2 = lattice.xi1, lattice.xi2
    m11, m12, m22, b = np.broadcast_arrays(*etm_entries(xi1, xi2, sv, eps, mu))
    k = -coth_minus_one(b * stretched_thickness(j, pml))
    diff = np.empty(xi1.shape + (2, 2), dtype=complex)
    diff[..., 0, 0] = k * m11
    diff[..., 0, 1] = k * m12
    diff[..., 1, 0] = k * m12
    diff[..., 1, 1] = k * m22
    wi = _inv_sqrt_curl_weight(xi1, xi2)
    op = wi @ diff @ wi
    return float(np.max(np.linalg.norm(op, ord=2, axis=(-2, -1))))


def symbol_error_opnorm_closed(lattice: XiLattice, s, j: int, media: MediumParams, pml: PmlConfig) -> float:
    """Same quantity as :func:`symbol_error_opnorm` from the TE/TM diagonal form.

    TM direction: ``|k| eps |s| (1+|xi|^2)^{1/2} / |beta|``;
    TE direction: ``|k| |beta| / (mu |s| (1+|xi|^2)^{1/2})``; ``k = coth - 1``.
    """
    sv = as_laplace(s)
    eps, mu = media.eps(j), media.mu(j)
    q = lattice.norm_sq
    b = beta_array(q, sv, eps * mu)
    k = np.abs(coth(b * stretched_thickness(j, pml)) - 1.0)
    root = np.sqrt(1.0 + q)
    tm = k * eps * abs(sv) * root / np.abs(b)
    te = k * np.abs(b) / (mu * abs(sv) * root)
    return float(np.max(np.maximum(tm, te)))


def theorem_prefactor(T: float, sigma0: float) -> float:
    """``max(1, T^2) (T^4 + 2 T^2) (1 + sigma0 T)^2``."""
    return max(1.0, T * T) * (T**4 + 2.0 * T * T) * (1.0 + sigma0 * T) ** 2


def theorem_factor(media: MediumParams, pml: PmlConfig, include_prefactor: bool = False, T: Optional[float] = None) -> float:
    """Squared-sum exponential factor of the time-domain convergence estimate.

    ``(sum_j 2 e^{-sqrt(eps_j mu_j) sigma_j L_j} / (1 - e^{-sqrt(eps_j mu_j) sigma_j L_j}))^2``.
    For ``m != 1`` the exponent ``2 sqrt(eps mu) Lbar_j`` is used instead and a
    warning is issued, since the rate statement assumes a linear profile.
    """
    if pml.m != 1:
        warnings.warn("theorem_factor: m != 1, using the 2*sqrt(eps*mu)*Lbar exponent", RuntimeWarning, stacklevel=2)
    total = 0.0
    for j in (1, 2):
        # for m = 1, 2*Lbar_j = sigma_j*L_j so both exponents agree
        x = math.sqrt(media.eps_mu(j)) * decay_scale(j, pml)
        total += _decay_factor(x)
    out = total * total
    if include_prefactor:
        T = 1.0 / pml.s1 if T is None else float(T)
        out *= theorem_prefactor(T, pml.sigma0)
    return out


def bound_report(s, j: int, media: MediumParams, pml: PmlConfig, lattice: Optional[XiLattice] = None) -> BoundReport:
    s1, s2 = _split(s)
    lam, regime = lambda_j(s, j, media)
    measured = None if lattice is None else symbol_error_opnorm(lattice, s, j, media, pml)
    return BoundReport(
        s1=s1,
        s2=s2,
        layer=j,
        regime=regime,
        lambda_val=lam,
        gamma_val=gamma_j(s, j, media),
        m_bound=mj_bound(s, j, media, pml),
        measured_opnorm=measured,
    )
