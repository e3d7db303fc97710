"""Physical parameters, strip geometry and the PML stretching profile.

Layer ``j = 1`` is the upper medium (above the interface ``x3 = f0``) and
is terminated at ``x3 = h1``; layer ``j = 2`` is the lower medium,
terminated at ``x3 = h2``. The PML attached to layer ``j`` has thickness
``L_j`` and strength ``sigma_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "MediumParams",
    "StripGeometry",
    "PmlConfig",
    "LaplaceFrequency",
    "as_laplace",
    "pml_profile",
    "stretched_coordinate",
    "physical_coordinate",
    "stretched_thickness",
    "decay_scale",
    "eta_constant",
]


def _positive(key, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ConfigError(key, f"must be a positive finite number, got {value!r}")
    return value


def _finite(key, value):
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(key, f"must be finite, got {value!r}")
    return value


def _check_layer(j):
    if j not in (1, 2):
        raise DomainError(f"layer index must be 1 or 2, got {j!r}")


@dataclass(frozen=True)
class MediumParams:
    """Electromagnetic constants of both layers and the elastic constants.

    The elastic triple ``(lambda_e, mu_e, rho_e)`` describes the embedded
    obstacle; it is only used by :mod:`layerwave.elastic`.
    """

    eps1: float = 1.0
    mu1: float = 1.0
    eps2: float = 1.0
    mu2: float = 1.0
    lambda_e: float = 1.0
    mu_e: float = 1.0
    rho_e: float = 1.0

    def __post_init__(self):
        for key in ("eps1", "mu1", "eps2", "mu2", "rho_e"):
            object.__setattr__(self, key, _positive(key, getattr(self, key)))
        lam = _finite("lambda_e", self.lambda_e)
        mu = _finite("mu_e", self.mu_e)
        if mu <= 0.0:
            raise ConfigError("mu_e", f"shear modulus must be positive, got {mu}")
        if 3.0 * lam + 2.0 * mu <= 0.0:
            raise ConfigError("lambda_e", f"3*lambda_e + 2*mu_e must be positive, got {3 * lam + 2 * mu}")
        object.__setattr__(self, "lambda_e", lam)
        object.__setattr__(self, "mu_e", mu)

    def eps(self, j: int) -> float:
        _check_layer(j)
        return self.eps1 if j == 1 else self.eps2

    def mu(self, j: int) -> float:
        _check_layer(j)
        return self.mu1 if j == 1 else self.mu2

    def eps_mu(self, j: int) -> float:
        return self.eps(j) * self.mu(j)


@dataclass(frozen=True)
class StripGeometry:
    """Artificial planes ``x3 = h1`` (top), ``x3 = h2`` (bottom) and the flat
    interface ``x3 = f0`` between them.

    ``surface_fn`` optionally stores samples of a rough interface profile.
    It is persisted for completeness; solvers call :meth:`require_flat` and
    refuse anything that is not constant.
    """

    h1: float = 1.0
    h2: float = -1.0
    f0: float = 0.0
    surface_fn: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        for key in ("h1", "h2", "f0"):
            object.__setattr__(self, key, _finite(key, getattr(self, key)))
        if not self.h2 < self.f0 < self.h1:
            raise ConfigError("geometry", f"need h2 < f0 < h1, got h2={self.h2}, f0={self.f0}, h1={self.h1}")
        if self.surface_fn is not None:
            object.__setattr__(self, "surface_fn", tuple(float(v) for v in self.surface_fn))

    @property
    def height(self) -> float:
        return self.h1 - self.h2

    def plane(self, j: int) -> float:
        _check_layer(j)
        return self.h1 if j == 1 else self.h2

    def require_flat(self):
        if self.surface_fn is None:
            return
        values = np.asarray(self.surface_fn, dtype=float)
        if values.size and np.ptp(values) > 0.0:
            raise DomainError("flat-interface only: the strip solver does not handle a non-constant surface_fn")


@dataclass(frozen=True)
class PmlConfig:
    """Thicknesses, strengths and profile exponent of both PML layers.

    ``s1`` is the fixed Laplace abscissa that scales the stretch; use
    :meth:`from_horizon` to pick ``s1 = 1/T``.
    """

    L1: float = 1.0
    L2: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    m: int = 1
    s1: float = 1.0

    def __post_init__(self):
        for key in ("L1", "L2", "sigma1", "sigma2", "s1"):
            object.__setattr__(self, key, _positive(key, getattr(self, key)))
        m = self.m
        if isinstance(m, float) and m.is_integer():
            m = int(m)
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
            raise ConfigError("m", f"profile exponent must be an integer >= 1, got {self.m!r}")
        object.__setattr__(self, "m", int(m))

    @classmethod
    def from_horizon(cls, T, **kwargs):
        """Build a config with ``s1 = 1/T`` unless ``s1`` is given explicitly."""
        T = _positive("T", T)
        kwargs.setdefault("s1", 1.0 / T)
        return cls(**kwargs)

    @property
    def sigma0(self) -> float:
        return max(self.sigma1, self.sigma2)

    def L(self, j: int) -> float:
        _check_layer(j)
        return self.L1 if j == 1 else self.L2

    def sigma(self, j: int) -> float:
        _check_layer(j)
        return self.sigma1 if j == 1 else self.sigma2

    def replace(self, **changes) -> "PmlConfig":
        values = {k: getattr(self, k) for k in ("L1", "L2", "sigma1", "sigma2", "m", "s1")}
        values.update(changes)
        return PmlConfig(**values)


@dataclass(frozen=True)
class LaplaceFrequency:
    """A point ``s = s1 + i s2`` of the open right half-plane."""

    s1: float
    s2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s1", _positive("s1", self.s1))
        object.__setattr__(self, "s2", _finite("s2", self.s2))

    @property
    def value(self) -> complex:
        return complex(self.s1, self.s2)

    def __complex__(self):
        return self.value

    @classmethod
    def from_complex(cls, s) -> "LaplaceFrequency":
        s = complex(s)
        return cls(s.real, s.imag)


def as_laplace(s):
    """Return ``s`` as a complex number (or complex array) with ``Re s > 0``.

    Accepts :class:`LaplaceFrequency`, Python/numpy complex scalars and
    arrays.
    """
    if isinstance(s, LaplaceFrequency):
        return s.value
    arr = np.asarray(s, dtype=complex)
    if np.any(~(arr.real > 0.0)):
        raise DomainError("Laplace variable must satisfy Re(s) > 0")
    if arr.ndim == 0:
        return complex(arr)
    return arr


# --------------------------------------------------------------------------
# PML profile
# --------------------------------------------------------------------------


def _check_extent(x3, geo, pml):
    lo = geo.h2 - pml.L2
    hi = geo.h1 + pml.L1
    # a few ulps of slack so grid endpoints computed by arithmetic pass
    slack = 8 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi))
    if np.any(x3 < lo - slack) or np.any(x3 > hi + slack):
        raise DomainError(f"x3 outside the truncated domain [{lo}, {hi}]")


def pml_profile(x3, geo: StripGeometry, pml: PmlConfig):
    """Evaluate the stretching factor ``sigma(x3) >= 1``.

    Equal to one on ``[h2, h1]`` and polynomial of degree ``m`` inside each
    PML layer, scaled by ``1/s1``.
    """
    x = np.asarray(x3, dtype=float)
    _check_extent(x, geo, pml)
    up = np.clip((x - geo.h1) / pml.L1, 0.0, 1.0)
    down = np.clip((geo.h2 - x) / pml.L2, 0.0, 1.0)
    out = 1.0 + (pml.sigma1 * up**pml.m + pml.sigma2 * down**pml.m) / pml.s1
    return float(out) if out.ndim == 0 else out


def stretched_coordinate(x3, geo: StripGeometry, pml: PmlConfig):
    """Exact antiderivative of the profile, anchored so that ``x3 -> x3``
    on the strip.

    When ``0`` lies in ``[h2, h1]`` this equals the integral of the profile
    from 0 to ``x3``.
    """
    x = np.asarray(x3, dtype=float)
    _check_extent(x, geo, pml)
    m1 = pml.m + 1
    up = np.clip((x - geo.h1) / pml.L1, 0.0, 1.0)
    down = np.clip((geo.h2 - x) / pml.L2, 0.0, 1.0)
    out = x + (pml.sigma1 * pml.L1 * up**m1 - pml.sigma2 * pml.L2 * down**m1) / (m1 * pml.s1)
    return float(out) if out.ndim == 0 else out


def physical_coordinate(xhat, geo: StripGeometry, pml: PmlConfig, tol: float = 1e-15):
    """Invert :func:`stretched_coordinate`.

    Newton iteration on each PML branch; the upper branch is convex and the
    lower concave, so starting from the outer wall converges monotonically.
    """
    y = np.atleast_1d(np.asarray(xhat, dtype=float)).copy()
    x = y.copy()
    top_hat = geo.h1 + stretched_thickness(1, pml)
    bot_hat = geo.h2 - stretched_thickness(2, pml)
    scale = max(1.0, abs(top_hat), abs(bot_hat))
    slack = 8 * np.finfo(float).eps * scale
    if np.any(y > top_hat + slack) or np.any(y < bot_hat - slack):
        raise DomainError("stretched coordinate outside the truncated domain")
    upper = y > geo.h1
    lower = y < geo.h2
    for mask, start in ((upper, geo.h1 + pml.L1), (lower, geo.h2 - pml.L2)):
        if not np.any(mask):
            continue
        target = np.minimum(np.maximum(y[mask], bot_hat), top_hat)
        xi = np.full(target.shape, start)
        for _ in range(200):
            step = (stretched_coordinate(xi, geo, pml) - target) / pml_profile(xi, geo, pml)
            xi = np.clip(xi - step, geo.h2 - pml.L2, geo.h1 + pml.L1)
            if np.all(np.abs(step) <= tol * scale):
                break
        x[mask] = xi
    if np.ndim(xhat) == 0:
        return float(x[0])
    return x


def stretched_thickness(j: int, pml: PmlConfig) -> float:
    """Stretched PML width ``L_j + sigma_j L_j / ((m + 1) s1)``."""
    _check_layer(j)
    return pml.L(j) + decay_scale(j, pml) / pml.s1


def decay_scale(j: int, pml: PmlConfig) -> float:
    """``L_j sigma_j / (m + 1)``, the s1-independent part of the stretch."""
    _check_layer(j)
    return pml.L(j) * pml.sigma(j) / (pml.m + 1)


def eta_constant(geo: StripGeometry) -> float:
    """Trace-inequality constant ``max(sqrt(1 + 1/(h1 - h2)), sqrt(2))``."""
    return max(math.sqrt(1.0 + 1.0 / geo.height), math.sqrt(2.0))
