"""Per-mode two-point boundary-value solver for the layered strip.

For a transverse wavenumber ``xi`` the tangential Maxwell system splits
into two scalar problems along ``x3``, both of the form

    (w u')' - w beta^2 u = f0 + f1'

with piecewise-constant ``w`` and ``beta``:

* TE: ``u`` is the electric amplitude along ``t_hat = (-xi2, xi1)/|xi|``,
  ``w = 1/(s mu)``, ``f0 = J . t_hat``, ``f1 = 0``.
* TM: ``u`` is the magnetic amplitude along ``t_hat``, ``w = 1/(s eps)``,
  ``f0 = i|xi| w J3``, ``f1 = -w J . xi_hat``. The electric field is
  ``E . xi_hat = -F`` and ``E3 = (i|xi| u - J3)/(s eps)``.

``F = w u' - f1`` is the conormal flux; ``u`` and ``F`` are continuous
across the interface. Inside a PML layer the same equation is posed in
the stretched coordinate, where the coefficients stay constant.

Boundary closures are Robin conditions ``u' = -gamma u`` (top) and
``u' = +gamma u`` (bottom) with ``gamma`` taken from the TE/TM eigenvalues
of the exact or PML EtM symbol, or PEC walls at the end of physical PML
layers (Dirichlet for TE, Neumann for TM).

The discretisation is a vertex-centred finite-volume scheme, second order
on smooth piecewise-uniform grids. A piecewise-exact transfer-matrix
solution serves as the oracle.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalError
from .model import (
    LaplaceFrequency,
    MediumParams,
    PmlConfig,
    StripGeometry,
    as_laplace,
    eta_constant,
    physical_coordinate,
    pml_profile,
    stretched_coordinate,
    stretched_thickness,
)
from .symbols import (
    TransverseMode,
    XiLattice,
    beta_array,
    coth,
    te_tm_basis,
    te_tm_eigen,
)

log = logging.getLogger(__name__)

__all__ = [
    "Polarization",
    "Termination",
    "GridSpec",
    "Grid1D",
    "SourceSpec",
    "ModeProblem",
    "ModeSolution",
    "ModeBatch",
    "RESIDUAL_TOL",
    "robin_coefficient",
    "robin_from_symbol",
    "solve_mode",
    "solve_mode_batch",
    "transfer_matrix_solution",
    "pml_layer_exact_mode",
    "reconstruct_E3",
    "divergence_residual",
    "interface_jumps",
    "mode_error",
    "error_chain_check",
    "quadratic_form",
    "assemble_field",
    "solve_strip",
    "stability_ratios",
]

RESIDUAL_TOL = 1e-12


class Polarization(str, Enum):
    TE = "TE"
    TM = "TM"


class Termination(str, Enum):
    TBC = "TBC"
    PML_SYMBOL = "PML_SYMBOL"
    PML_LAYER = "PML_LAYER"


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Cell counts per segment and the clustering strength.

    ``cluster`` in ``[0, 1)`` applies ``r - cluster sin(2 pi r)/(2 pi)`` on
    each strip segment, concentrating nodes near ``f0``, ``h1`` and ``h2``.
    PML segments are uniform in the stretched coordinate.
    """

    n_top: int = 40
    n_bot: int = 40
    n_pml1: int = 0
    n_pml2: int = 0
    cluster: float = 0.0

    def __post_init__(self):
        for key in ("n_top", "n_bot"):
            if int(getattr(self, key)) < 2:
                raise DomainError(f"{key} must be >= 2")
        if not 0.0 <= self.cluster < 1.0:
            raise DomainError("cluster must lie in [0, 1)")

    @property
    def with_pml(self) -> bool:
        return self.n_pml1 > 0 and self.n_pml2 > 0

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(
            self.n_top * factor, self.n_bot * factor, self.n_pml1 * factor, self.n_pml2 * factor, self.cluster
        )


def _segment(a, b, n, cluster):
    r = np.linspace(0.0, 1.0, n + 1)
    if cluster:
        r = r - cluster * np.sin(2.0 * np.pi * r) / (2.0 * np.pi)
        r[0], r[-1] = 0.0, 1.0
    return a + (b - a) * r


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Nodes in the computational (stretched) coordinate ``y`` and the
    physical coordinate ``x``.

    ``y == x`` on the strip. Index ``i_f0`` is the interface node,
    ``i_h1``/``i_h2`` the strip planes.
    """

    y: np.ndarray
    x: np.ndarray
    cell_layer: np.ndarray
    i_f0: int
    i_h1: int
    i_h2: int
    spec: GridSpec
    geo: StripGeometry
    pml: Optional[PmlConfig] = None

    @classmethod
    def build(cls, geo: StripGeometry, spec: GridSpec = GridSpec(), pml: Optional[PmlConfig] = None) -> "Grid1D":
        geo.require_flat()
        bot = _segment(geo.h2, geo.f0, spec.n_bot, spec.cluster)
        top = _segment(geo.f0, geo.h1, spec.n_top, spec.cluster)
        parts_y = [bot, top[1:]]
        if spec.with_pml:
            if pml is None:
                raise DomainError("a PML grid needs a PmlConfig")
            y_lo = geo.h2 - stretched_thickness(2, pml)
            y_hi = geo.h1 + stretched_thickness(1, pml)
            parts_y = [np.linspace(y_lo, geo.h2, spec.n_pml2 + 1)[:-1]] + parts_y
            parts_y.append(np.linspace(geo.h1, y_hi, spec.n_pml1 + 1)[1:])
        y = np.concatenate(parts_y)
        n_lo = spec.n_pml2 if spec.with_pml else 0
        i_h2 = n_lo
        i_f0 = n_lo + spec.n_bot
        i_h1 = i_f0 + spec.n_top
        if spec.with_pml:
            x = physical_coordinate(y, geo, pml)
            x[i_h2 : i_h1 + 1] = y[i_h2 : i_h1 + 1]
            x[0], x[-1] = geo.h2 - pml.L2, geo.h1 + pml.L1
        else:
            x = y.copy()
        layer = np.where(np.arange(y.size - 1) < i_f0, 2, 1)
        return cls(y, x, layer, i_f0, i_h1, i_h2, spec, geo, pml if spec.with_pml else None)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.y)

    @property
    def with_pml(self) -> bool:
        return self.spec.with_pml

    def refined(self) -> "Grid1D":
        """Grid with every cell halved (nodes are a superset)."""
        return Grid1D.build(self.geo, self.spec.refined(), self.pml)

    def strip_slice(self) -> slice:
        return slice(self.i_h2, self.i_h1 + 1)


# --------------------------------------------------------------------------
# source
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Mode source ``J(x3) = g p(x3)`` with ``g`` a Cartesian 3-vector.

    ``p`` is piecewise linear through ``(depths, values)``; a repeated depth
    encodes a jump. Alternatively ``profile_fn(x, layer)`` gives ``p``
    directly (``layer`` is 1 above ``f0`` and 2 below), which the
    manufactured-solution tests use.
    """

    g: tuple = (0.0, 1.0, 0.0)
    depths: tuple = ()
    values: tuple = ()
    tag: str = "custom"
    profile_fn: Optional[Callable] = None

    def __post_init__(self):
        g = tuple(complex(v) for v in self.g)
        if len(g) != 3:
            raise DomainError("g must have three components")
        object.__setattr__(self, "g", g)
        d = tuple(float(v) for v in self.depths)
        v = tuple(complex(x) for x in self.values)
        if len(d) != len(v):
            raise DomainError("depths and values must have equal length")
        if any(b < a for a, b in zip(d, d[1:])):
            raise DomainError("source depths must be nondecreasing")
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls) -> "SourceSpec":
        return cls(g=(0, 0, 0), tag="zero")

    @classmethod
    def hat(cls, lo: float, peak: float, hi: float, g=(0.0, 1.0, 0.0), height=1.0) -> "SourceSpec":
        """Triangle profile on ``[lo, hi]`` with apex at ``peak``."""
        return cls(g=g, depths=(lo, peak, hi), values=(0.0, height, 0.0), tag="hat")

    @classmethod
    def box(cls, lo: float, hi: float, g=(0.0, 1.0, 0.0), height=1.0) -> "SourceSpec":
        """Constant profile on ``[lo, hi]`` with jumps at both ends."""
        return cls(g=g, depths=(lo, lo, hi, hi), values=(0.0, height, height, 0.0), tag="box")

    def scaled(self, factor) -> "SourceSpec":
        return replace(self, g=tuple(factor * c for c in self.g))

    @property
    def is_zero(self) -> bool:
        if all(c == 0 for c in self.g):
            return True
        return self.profile_fn is None and not any(self.values)

    def check_support(self, geo: StripGeometry):
        if self.profile_fn is not None or not self.depths:
            return
        d = np.asarray(self.depths)
        v = np.asarray(self.values)
        outside = (d < geo.h2) | (d > geo.h1)
        if np.any(v[outside] != 0.0):
            raise DomainError("source profile must vanish outside (h2, h1)")
        if (d[0] <= geo.h2 and v[0] != 0.0) or (d[-1] >= geo.h1 and v[-1] != 0.0):
            raise DomainError("source profile must vanish at the strip planes")

    def evaluate(self, x, layer, side):
        """Profile at ``x``; ``side = -1`` takes left limits, ``+1`` right limits."""
        x = np.asarray(x, dtype=float)
        if self.profile_fn is not None:
            return np.asarray(self.profile_fn(x, layer), dtype=complex) * np.ones_like(x)
        if not self.depths:
            return np.zeros(x.shape, dtype=complex)
        d = np.asarray(self.depths)
        v = np.asarray(self.values)
        out = np.zeros(x.shape, dtype=complex)
        tol = 64 * np.finfo(float).eps * max(1.0, abs(d[0]), abs(d[-1]))
        inside = (x >= d[0] - tol) & (x <= d[-1] + tol)
        xi = x[inside]
        # snap points within a few ulps of a knot onto it, so grid nodes
        # computed by arithmetic see jumps on the intended side
        near = np.clip(np.searchsorted(d, xi), 1, d.size - 1)
        for cand in (d[near - 1], d[near]):
            hit = np.abs(xi - cand) <= 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(cand))
            xi = np.where(hit, cand, xi)
        last = d.size - 1
        if side < 0:
            # first knot at or beyond x; interpolate on the segment ending there
            hi = np.searchsorted(d, xi, side="left")
            lo = np.maximum(hi - 1, 0)
            hi = np.minimum(hi, last)
        else:
            # last knot at or before x; interpolate on the segment starting there
            lo = np.searchsorted(d, xi, side="right") - 1
            hi = np.minimum(lo + 1, last)
            lo = np.minimum(lo, last)
        span = d[hi] - d[lo]
        t = np.where(span > 0, (xi - d[lo]) / np.where(span > 0, span, 1.0), 0.0)
        out[inside] = v[lo] + t * (v[hi] - v[lo])
        return out


# --------------------------------------------------------------------------
# problem and solution types
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModeProblem:
    xi: TransverseMode
    s: LaplaceFrequency
    polarization: Polarization
    termination: Termination
    source: SourceSpec
    grid: Grid1D
    media: MediumParams = MediumParams()
    pml: PmlConfig = PmlConfig()

    def __post_init__(self):
        if not isinstance(self.xi, TransverseMode):
            object.__setattr__(self, "xi", TransverseMode(*self.xi))
        if not isinstance(self.s, LaplaceFrequency):
            object.__setattr__(self, "s", LaplaceFrequency.from_complex(self.s))
        object.__setattr__(self, "polarization", Polarization(self.polarization))
        object.__setattr__(self, "termination", Termination(self.termination))
        self.grid.geo.require_flat()
        self.source.check_support(self.grid.geo)
        needs_layer = self.termination is Termination.PML_LAYER
        if needs_layer != self.grid.with_pml:
            raise DomainError(
                "grid/termination mismatch: PML_LAYER needs a grid with PML cells, other closures a strip-only grid"
            )
        if needs_layer and self.grid.pml != self.pml:
            raise DomainError("grid was built for a different PmlConfig")

    @property
    def geo(self) -> StripGeometry:
        return self.grid.geo

    def with_(self, **changes) -> "ModeProblem":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """Nodal amplitude ``values`` and conormal ``flux`` (right limits; the
    top node carries its left limit). ``flux_left`` holds left limits."""

    values: np.ndarray
    flux: np.ndarray
    flux_left: np.ndarray
    problem: ModeProblem
    residual: float

    @property
    def grid(self) -> Grid1D:
        return self.problem.grid

    def e_tangential(self) -> np.ndarray:
        """Tangential electric field, shape ``(n, 2)``, Cartesian components."""
        xh, th = te_tm_basis(self.problem.xi)
        if self.problem.polarization is Polarization.TE:
            return self.values[:, None] * th[None, :]
        return -self.flux[:, None] * xh[None, :]

    def e_field(self) -> np.ndarray:
        """Full electric field ``(n, 3)`` with the physical ``E3``."""
        et = self.e_tangential()
        e3 = reconstruct_E3(self) if self.problem.polarization is Polarization.TM else np.zeros(et.shape[0], complex)
        return np.column_stack([et, e3])

    def trace(self, j: int) -> np.ndarray:
        """Tangential electric trace on the strip plane ``h_j``."""
        i = self.grid.i_h1 if j == 1 else self.grid.i_h2
        return self.e_tangential()[i]


@dataclass(frozen=True, eq=False)
class ModeBatch:
    """Solutions for many ``s`` values sharing one grid; shape ``(batch, n)``."""

    s: np.ndarray
    values: np.ndarray
    flux: np.ndarray
    template: ModeProblem
    residual: float


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------


def _layer_w_beta2(pol, s, xi_sq, media, j):
    eps, mu = media.eps(j), media.mu(j)
    w = 1.0 / (s * (mu if pol is Polarization.TE else eps))
    return w, eps * mu * s * s + xi_sq


def robin_coefficient(pol, term, xi, s, j: int, media: MediumParams, pml: PmlConfig):
    """Robin coefficient ``gamma`` for the closure at plane ``h_j``.

    TE: ``gamma = s mu lambda_TE``; TM: ``gamma = s eps / lambda_TM``. This
    gives ``beta`` for the exact symbol, ``beta coth(beta Ltilde)`` (TE) and
    ``beta tanh(beta Ltilde)`` (TM) for the PML symbol. Vectorised in ``s``.
    """
    pol, term = Polarization(pol), Termination(term)
    mode = xi if isinstance(xi, TransverseMode) else TransverseMode(*xi)
    s = np.asarray(s, dtype=complex)
    b = beta_array(mode.norm_sq, s, media.eps_mu(j))
    if term is Termination.TBC:
        return b
    if term is Termination.PML_SYMBOL:
        c = coth(b * stretched_thickness(j, pml))
        return b * c if pol is Polarization.TE else b / c
    raise DomainError("PML_LAYER uses wall conditions, not a Robin coefficient")


def robin_from_symbol(pol, term, xi, s, j, media, pml):
    """Scalar ``gamma`` computed through :func:`te_tm_eigen` (cross-check)."""
    pol, term = Polarization(pol), Termination(term)
    kind = "exact" if term is Termination.TBC else "pml"
    lam_tm, lam_te = te_tm_eigen(xi, s, j, media, kind=kind, pml=pml)
    sv = as_laplace(s)
    if pol is Polarization.TE:
        return sv * media.mu(j) * lam_te
    return sv * media.eps(j) / lam_tm


@dataclass
class _System:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray
    a: np.ndarray  # (B, ncell) w/dy
    wb2: np.ndarray  # (B, ncell)
    f0L: np.ndarray
    f0R: np.ndarray
    f1M: np.ndarray
    bc_top: np.ndarray  # w*gamma at the top (B,)
    bc_bot: np.ndarray


def _source_cells(problem: ModeProblem, s):
    """Per-cell source samples ``f0`` at both ends and ``f1`` at the midpoint."""
    grid = problem.grid
    src = problem.source
    B = s.size
    ncell = grid.n - 1
    f0L = np.zeros((B, ncell), complex)
    f0R = np.zeros((B, ncell), complex)
    f1M = np.zeros((B, ncell), complex)
    if src.is_zero:
        return f0L, f0R, f1M
    lo, hi = grid.i_h2, grid.i_h1
    cells = np.arange(lo, hi)
    xl, xr = grid.x[cells], grid.x[cells + 1]
    layer = grid.cell_layer[cells]
    pL = np.empty(cells.size, complex)
    pR = np.empty(cells.size, complex)
    pM = np.empty(cells.size, complex)
    for j in (1, 2):
        m = layer == j
        pL[m] = src.evaluate(xl[m], j, +1)
        pR[m] = src.evaluate(xr[m], j, -1)
        pM[m] = src.evaluate(0.5 * (xl[m] + xr[m]), j, +1)
    g = np.asarray(src.g)
    xh, th = te_tm_basis(problem.xi)
    if problem.polarization is Polarization.TE:
        amp = complex(g[0] * th[0] + g[1] * th[1])
        f0L[:, cells] = amp * pL
        f0R[:, cells] = amp * pR
        return f0L, f0R, f1M
    # TM: f0 = i|xi| w J3, f1 = -w J.xi_hat
    gx = complex(g[0] * xh[0] + g[1] * xh[1])
    g3 = complex(g[2])
    kx = problem.xi.norm
    for j in (1, 2):
        m = cells[layer == j]
        w = 1.0 / (s * problem.media.eps(j))
        sel = layer == j
        f0L[:, m] = 1j * kx * g3 * w[:, None] * pL[sel]
        f0R[:, m] = 1j * kx * g3 * w[:, None] * pR[sel]
        f1M[:, m] = -gx * w[:, None] * pM[sel]
    return f0L, f0R, f1M


def _assemble(problem: ModeProblem, s) -> _System:
    grid = problem.grid
    pol, term = problem.polarization, problem.termination
    media, pml = problem.media, problem.pml
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    xi_sq = problem.xi.norm_sq
    dy = grid.dy
    B, n = s.size, grid.n
    w = np.empty((B, n - 1), complex)
    wb2 = np.empty((B, n - 1), complex)
    for j in (1, 2):
        m = grid.cell_layer == j
        wj, b2j = _layer_w_beta2(pol, s, xi_sq, media, j)
        w[:, m] = wj[:, None]
        wb2[:, m] = (wj * b2j)[:, None]
    a = w / dy
    hw = 0.5 * dy * wb2
    f0L, f0R, f1M = _source_cells(problem, s)

    diag = np.zeros((B, n), complex)
    lower = np.zeros((B, n), complex)
    upper = np.zeros((B, n), complex)
    diag[:, :-1] += a + hw
    diag[:, 1:] += a + hw
    lower[:, 1:] = -a
    upper[:, :-1] = -a
    rhs = np.zeros((B, n), complex)
    rhs[:, :-1] -= 0.5 * dy * f0L + f1M
    rhs[:, 1:] -= 0.5 * dy * f0R - f1M

    if term is Termination.PML_LAYER:
        bc_top = np.zeros(B, complex)
        bc_bot = np.zeros(B, complex)
        if pol is Polarization.TE:
            for i in (0, n - 1):
                diag[:, i] = 1.0
                lower[:, i] = 0.0
                upper[:, i] = 0.0
                rhs[:, i] = 0.0
    else:
        bc_top = w[:, -1] * robin_coefficient(pol, term, problem.xi, s, 1, media, pml)
        bc_bot = w[:, 0] * robin_coefficient(pol, term, problem.xi, s, 2, media, pml)
        diag[:, -1] += bc_top
        diag[:, 0] += bc_bot
    return _System(lower, diag, upper, rhs, a, wb2, f0L, f0R, f1M, bc_top, bc_bot)


def _solve_system(sys_: _System):
    u = _kernels.thomas_batch(sys_.lower, sys_.diag, sys_.upper, sys_.rhs)
    au = _kernels.tridiag_matvec_batch(sys_.lower, sys_.diag, sys_.upper, u)
    res = np.abs(au - sys_.rhs)
    scale = np.maximum(np.abs(sys_.rhs), np.abs(sys_.diag * u))
    scale = np.maximum(scale, np.abs(sys_.lower) * np.abs(np.roll(u, 1, axis=1)))
    scale = np.maximum(scale, np.abs(sys_.upper) * np.abs(np.roll(u, -1, axis=1)))
    denom = np.max(scale, axis=1)
    num = np.max(res, axis=1)
    rel = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), num)
    if not np.all(np.isfinite(u)):
        raise NumericalError("strip solve produced non-finite values")
    worst = float(np.max(rel)) if rel.size else 0.0
    if worst > RESIDUAL_TOL:
        raise NumericalError(f"strip solve residual {worst:.3e} exceeds {RESIDUAL_TOL:g}")
    return u, worst


def _fluxes(sys_: _System, u, dy):
    fmid = sys_.a * (u[:, 1:] - u[:, :-1]) - sys_.f1M
    right = np.empty_like(u)
    left = np.empty_like(u)
    right[:, :-1] = fmid - 0.5 * dy * (sys_.wb2 * u[:, :-1] + sys_.f0L)
    left[:, 1:] = fmid + 0.5 * dy * (sys_.wb2 * u[:, 1:] + sys_.f0R)
    right[:, -1] = left[:, -1]
    left[:, 0] = right[:, 0]
    return right, left


def solve_mode(problem: ModeProblem) -> ModeSolution:
    """Solve one mode problem; raises :class:`NumericalError` if the
    relative residual of the discrete system exceeds ``RESIDUAL_TOL``."""
    sv = np.array([problem.s.value])
    sys_ = _assemble(problem, sv)
    u, res = _solve_system(sys_)
    right, left = _fluxes(sys_, u, problem.grid.dy)
    log.debug("mode xi=%s s=%s %s/%s residual=%.3e", problem.xi, problem.s.value, problem.polarization.value,
              problem.termination.value, res)
    return ModeSolution(u[0], right[0], left[0], problem, res)


def solve_mode_batch(template: ModeProblem, s_values, amplitudes=None) -> ModeBatch:
    """Solve the template problem for every ``s`` in ``s_values``.

    ``amplitudes`` optionally scales the source per ``s`` (linearity).
    """
    s = np.asarray(s_values, dtype=complex).ravel()
    as_laplace(s)
    sys_ = _assemble(template, s)
    u, res = _solve_system(sys_)
    right, _ = _fluxes(sys_, u, template.grid.dy)
    if amplitudes is not None:
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1, 1)
        u = u * amp
        right = right * amp
    return ModeBatch(s, u, right, template, res)


def quadratic_form(solution: ModeSolution) -> complex:
    """``conj(u) . A u`` of the discrete operator at the computed solution."""
    sys_ = _assemble(solution.problem, np.array([solution.problem.s.value]))
    u = solution.values[None, :]
    au = _kernels.tridiag_matvec_batch(sys_.lower, sys_.diag, sys_.upper, u)
    return complex(np.vdot(u[0], au[0]))


def interface_jumps(solution: ModeSolution):
    """Relative jumps of value and flux at ``f0``.

    The value is a single nodal unknown, so its jump is exactly zero; the
    flux jump compares the two one-sided half-cell reconstructions.
    """
    i = solution.grid.i_f0
    fr, fl = solution.flux[i], solution.flux_left[i]
    scale = max(abs(fr), abs(fl), np.max(np.abs(solution.flux)), 1e-300)
    return 0.0, float(abs(fr - fl) / scale)


# --------------------------------------------------------------------------
# piecewise-exact oracle
# --------------------------------------------------------------------------


def transfer_matrix_solution(problem: ModeProblem, x_eval=None):
    """Piecewise-exact solution on the strip for piecewise-linear sources.

    Between consecutive breakpoints (planes, interface, source knots) the
    solution is ``A e^{beta (x - x_r)} + B e^{-beta (x - x_l)} + u_p`` with
    the linear particular solution ``u_p = -(f0 + f1')/(w beta^2)``. The
    coefficients follow from continuity of ``u`` and ``F`` plus the Robin
    closures, solved as one dense system. Returns ``(u, F)`` at ``x_eval``
    (default: the grid nodes of the strip).
    """
    if problem.termination is Termination.PML_LAYER:
        raise DomainError("the oracle covers Robin closures only")
    if problem.source.profile_fn is not None:
        raise DomainError("the oracle needs a sampled piecewise-linear source")
    geo = problem.geo
    s = problem.s.value
    pol = problem.polarization
    media, pml = problem.media, problem.pml
    knots = [geo.h2, geo.f0, geo.h1] + [d for d in problem.source.depths if geo.h2 < d < geo.h1]
    bps = np.unique(np.asarray(knots, dtype=float))
    nseg = bps.size - 1
    src = problem.source
    xh, th = te_tm_basis(problem.xi)
    g = np.asarray(src.g)
    kx = problem.xi.norm

    seg = []
    for k in range(nseg):
        xl, xr = bps[k], bps[k + 1]
        j = 1 if xl >= geo.f0 else 2
        w, b2 = _layer_w_beta2(pol, np.array([s]), problem.xi.norm_sq, media, j)
        w, b2 = complex(w[0]), complex(b2[0])
        b = complex(beta_array(problem.xi.norm_sq, s, media.eps_mu(j)))
        pl = complex(src.evaluate(np.array([xl]), j, +1)[0])
        pr = complex(src.evaluate(np.array([xr]), j, -1)[0])
        if pol is Polarization.TE:
            amp = complex(g[0] * th[0] + g[1] * th[1])
            f0l, f0r, f1l, f1r = amp * pl, amp * pr, 0.0, 0.0
        else:
            gx = complex(g[0] * xh[0] + g[1] * xh[1])
            f0l, f0r = 1j * kx * w * g[2] * pl, 1j * kx * w * g[2] * pr
            f1l, f1r = -w * gx * pl, -w * gx * pr
        h = xr - xl
        df1 = (f1r - f1l) / h
        # particular solution u_p(x) = c0 + c1 (x - xl)
        c0 = -(f0l + df1) / (w * b2)
        c1 = -((f0r - f0l) / h) / (w * b2)
        seg.append(dict(xl=xl, xr=xr, w=w, b=b, c0=c0, c1=c1, f1l=f1l, f1r=f1r, j=j))

    def basis(sg, x):
        # values and derivatives of the two homogeneous modes, scaled
        e_up = np.exp(sg["b"] * (x - sg["xr"]))
        e_dn = np.exp(-sg["b"] * (x - sg["xl"]))
        return e_up, e_dn, sg["b"] * e_up, -sg["b"] * e_dn

    def particular(sg, x):
        return sg["c0"] + sg["c1"] * (x - sg["xl"]), sg["c1"]

    def f1_at(sg, x):
        t = (x - sg["xl"]) / (sg["xr"] - sg["xl"])
        return sg["f1l"] + t * (sg["f1r"] - sg["f1l"])

    N = 2 * nseg
    A = np.zeros((N, N), complex)
    rhs = np.zeros(N, complex)
    row = 0
    term = problem.termination
    gam_bot = complex(robin_coefficient(pol, term, problem.xi, s, 2, media, pml))
    gam_top = complex(robin_coefficient(pol, term, problem.xi, s, 1, media, pml))
    # bottom: u' - gamma u = 0
    sg = seg[0]
    eu, ed, deu, ded = basis(sg, sg["xl"])
    up, dup = particular(sg, sg["xl"])
    A[row, 0:2] = [deu - gam_bot * eu, ded - gam_bot * ed]
    rhs[row] = -(dup - gam_bot * up)
    row += 1
    for k in range(nseg - 1):
        sl, sr = seg[k], seg[k + 1]
        x = sl["xr"]
        eu_l, ed_l, deu_l, ded_l = basis(sl, x)
        eu_r, ed_r, deu_r, ded_r = basis(sr, x)
        up_l, dup_l = particular(sl, x)
        up_r, dup_r = particular(sr, x)
        A[row, 2 * k : 2 * k + 2] = [eu_l, ed_l]
        A[row, 2 * k + 2 : 2 * k + 4] = [-eu_r, -ed_r]
        rhs[row] = up_r - up_l
        row += 1
        A[row, 2 * k : 2 * k + 2] = [sl["w"] * deu_l, sl["w"] * ded_l]
        A[row, 2 * k + 2 : 2 * k + 4] = [-sr["w"] * deu_r, -sr["w"] * ded_r]
        rhs[row] = (sr["w"] * dup_r - f1_at(sr, x)) - (sl["w"] * dup_l - f1_at(sl, x))
        row += 1
    sg = seg[-1]
    eu, ed, deu, ded = basis(sg, sg["xr"])
    up, dup = particular(sg, sg["xr"])
    A[row, N - 2 : N] = [deu + gam_top * eu, ded + gam_top * ed]
    rhs[row] = -(dup + gam_top * up)
    coef = np.linalg.solve(A, rhs)

    if x_eval is None:
        x_eval = problem.grid.x[problem.grid.strip_slice()]
    x_eval = np.asarray(x_eval, dtype=float)
    u = np.zeros(x_eval.shape, complex)
    F = np.zeros(x_eval.shape, complex)
    k_of = np.clip(np.searchsorted(bps, x_eval, side="right") - 1, 0, nseg - 1)
    for k in range(nseg):
        m = k_of == k
        if not np.any(m):
            continue
        sg = seg[k]
        eu, ed, deu, ded = basis(sg, x_eval[m])
        up, dup = particular(sg, x_eval[m])
        u[m] = coef[2 * k] * eu + coef[2 * k + 1] * ed + up
        du = coef[2 * k] * deu + coef[2 * k + 1] * ded + dup
        F[m] = sg["w"] * du - f1_at(sg, x_eval[m])
    return u, F


# --------------------------------------------------------------------------
# closed-form PML layer solution
# --------------------------------------------------------------------------


def pml_layer_exact_mode(xi, s, j: int, media: MediumParams, pml: PmlConfig, geo: StripGeometry,
                         boundary_value, x3, component: str = "tangential"):
    """Closed-form field inside PML layer ``j`` with PEC at the outer wall.

    ``component="tangential"``: ``v sinh(beta (Ltilde - d)) / sinh(beta Ltilde)``;
    ``component="P"``: ``v cosh(beta (Ltilde - d)) / cosh(beta Ltilde)``, where
    ``d`` is the stretched distance from the strip plane. Evaluated with
    decaying exponentials only.
    """
    x = np.asarray(x3, dtype=float)
    plane = geo.plane(j)
    inside = (x >= plane - 1e-14) if j == 1 else (x <= plane + 1e-14)
    if not np.all(inside):
        raise DomainError(f"x3 must lie inside PML layer {j}")
    yhat = stretched_coordinate(x, geo, pml)
    d = np.abs(np.asarray(yhat) - plane)
    lt = stretched_thickness(j, pml)
    b = complex(beta_array(_mode_sq(xi), as_laplace(s), media.eps_mu(j)))
    rest = np.exp(-2.0 * b * (lt - d))
    full = np.exp(-2.0 * b * lt)
    if component == "tangential":
        ratio = np.exp(-b * d) * (1.0 - rest) / (-np.expm1(-2.0 * b * lt))
    elif component == "P":
        ratio = np.exp(-b * d) * (1.0 + rest) / (1.0 + full)
    else:
        raise DomainError(f"unknown component {component!r}")
    out = boundary_value * ratio
    return complex(out) if np.ndim(out) == 0 else out


def _mode_sq(xi):
    mode = xi if isinstance(xi, TransverseMode) else TransverseMode(*xi)
    return mode.norm_sq


# --------------------------------------------------------------------------
# normal component and divergence
# --------------------------------------------------------------------------


def _j3_profile(solution: ModeSolution, side):
    grid = solution.grid
    src = solution.problem.source
    out = np.zeros(grid.n, complex)
    if src.is_zero or src.g[2] == 0:
        return out
    sl = grid.strip_slice()
    xs = grid.x[sl]
    layer = np.where(xs >= grid.geo.f0, 1, 2) if side > 0 else np.where(xs > grid.geo.f0, 1, 2)
    vals = np.empty(xs.size, complex)
    for j in (1, 2):
        m = layer == j
        vals[m] = src.evaluate(xs[m], j, side)
    out[sl] = src.g[2] * vals
    return out


def _p_cells(solution: ModeSolution):
    """``P = sigma^{-1} E3`` at both ends of every cell.

    Integrates the discrete divergence condition
    ``i xi . E_t + dP/dy = -(s eps)^{-1}(i xi . J_t + dJ3/dy)`` cell by cell,
    starting from ``P = (i|xi| u - J3)/(s eps)`` at the bottom node, with
    ``eps P`` continuous across ``f0``.
    """
    prob = solution.problem
    grid = solution.grid
    kx = prob.xi.norm
    s = prob.s.value
    sys_ = _assemble(prob, np.array([s]))
    u = solution.values
    fmid = sys_.a[0] * (u[1:] - u[:-1]) - sys_.f1M[0]
    j3 = _j3_profile(solution, +1)
    j3l = _j3_profile(solution, -1)
    ncell = grid.n - 1
    p_start = np.empty(ncell, complex)
    p_end = np.empty(ncell, complex)
    current = (1j * kx * u[0] - j3[0]) / (s * prob.media.eps(grid.cell_layer[0]))
    for c in range(ncell):
        j = grid.cell_layer[c]
        w = 1.0 / (s * prob.media.eps(j))
        if c > 0:
            # eps P jumps by -[J3]/s at a node (and is otherwise continuous)
            d_left = prob.media.eps(grid.cell_layer[c - 1]) * current
            current = (d_left - (j3[c] - j3l[c]) / s) / prob.media.eps(j)
        jx = -sys_.f1M[0, c] / w
        dj3 = (j3l[c + 1] - j3[c]) / grid.dy[c]
        p_start[c] = current
        current = current + grid.dy[c] * (1j * kx * fmid[c] - w * (1j * kx * jx + dj3))
        p_end[c] = current
    return p_start, p_end, fmid, sys_, j3, j3l


def _sigma_nodes(grid):
    if not grid.with_pml:
        return np.ones(grid.n)
    return pml_profile(grid.x, grid.geo, grid.pml)


def reconstruct_E3(solution: ModeSolution) -> np.ndarray:
    """Physical ``E3`` on the grid nodes (right limits; the top node
    carries its left limit).

    Obtained by quadrature of the discrete divergence condition, so the
    discrete divergence residual vanishes to roundoff. ``eps E3`` (not
    ``E3``) is continuous at ``f0``. TE modes carry no ``E3``; at ``xi = 0``
    the component is undetermined and 0 is returned.
    """
    prob = solution.problem
    n = solution.grid.n
    if prob.polarization is Polarization.TE:
        return np.zeros(n, complex)
    if prob.xi.norm == 0.0:
        if not prob.source.is_zero and prob.source.g[2] != 0:
            warnings.warn("E3 is undetermined at xi = 0; returning 0", RuntimeWarning, stacklevel=2)
        return np.zeros(n, complex)
    p_start, p_end, *_ = _p_cells(solution)
    P = np.append(p_start, p_end[-1])
    return _sigma_nodes(solution.grid) * P


def divergence_residual(solution: ModeSolution) -> float:
    """Max relative residual of the discrete divergence condition, using the
    nodal ``E3`` returned by :func:`reconstruct_E3`."""
    prob = solution.problem
    grid = solution.grid
    if prob.polarization is Polarization.TE or prob.xi.norm == 0.0:
        return 0.0
    s = prob.s.value
    kx = prob.xi.norm
    P = reconstruct_E3(solution) / _sigma_nodes(grid)
    _, _, fmid, sys_, j3, j3l = _p_cells(solution)
    scale = max(float(np.max(np.abs(P))), 1e-300)
    worst = 0.0
    for c in range(grid.n - 1):
        w = 1.0 / (s * prob.media.eps(grid.cell_layer[c]))
        p_right = P[c + 1]
        if c + 1 < grid.n - 1:
            # stored node values are right limits; convert to the left limit
            d_right = prob.media.eps(grid.cell_layer[c + 1]) * P[c + 1]
            p_right = (d_right + (j3[c + 1] - j3l[c + 1]) / s) / prob.media.eps(grid.cell_layer[c])
        jx = -sys_.f1M[0, c] / w
        dj3 = (j3l[c + 1] - j3[c]) / grid.dy[c]
        r = -1j * kx * fmid[c] + (p_right - P[c]) / grid.dy[c] + w * (1j * kx * jx + dj3)
        worst = max(worst, abs(r) * grid.dy[c] / scale)
    return float(worst)


# --------------------------------------------------------------------------
# error measures
# --------------------------------------------------------------------------


def _curl_weight(xi: TransverseMode, vec):
    """Single-mode ``H^{-1/2}(curl)`` norm of a tangential vector."""
    v = np.asarray(vec, dtype=complex)
    c = -xi.xi2 * v[0] + xi.xi1 * v[1]
    q = xi.norm_sq
    return math.sqrt(float((abs(v[0]) ** 2 + abs(v[1]) ** 2 + abs(c) ** 2) / math.sqrt(1.0 + q)))


def _depth_l2(grid: Grid1D, values):
    sl = grid.strip_slice()
    x = grid.x[sl]
    v = np.abs(np.asarray(values)[sl]) ** 2
    if v.ndim > 1:
        v = v.sum(axis=-1)
    return math.sqrt(float(np.trapezoid(v, x)))


def mode_error(xi, s, media: MediumParams, geo: StripGeometry, pml: PmlConfig, source: SourceSpec,
               polarization=Polarization.TE, grid_spec: GridSpec = GridSpec()) -> float:
    """TBC versus PML_SYMBOL difference for one mode.

    ``sqrt(|dE_t(h1)|_curl^2 + |dE_t(h2)|_curl^2 + ||dE_t||_{L2(h2,h1)}^2)``
    with single-mode trace weights.
    """
    grid = Grid1D.build(geo, grid_spec)
    base = ModeProblem(xi, s, polarization, Termination.TBC, source, grid, media, pml)
    a = solve_mode(base)
    b = solve_mode(base.with_(termination=Termination.PML_SYMBOL))
    d = a.e_tangential() - b.e_tangential()
    mode = base.xi
    top = _curl_weight(mode, d[grid.i_h1])
    bot = _curl_weight(mode, d[grid.i_h2])
    vol = _depth_l2(grid, d)
    return math.sqrt(top * top + bot * bot + vol * vol)


@dataclass(frozen=True)
class ErrorChain:
    """Discrete form of the error mechanism for one TE mode.

    ``form = |conj(d) . A_tbc d|`` equals ``|sum_j conj(d_j) (lam_pml - lam) u_pml_j|``
    exactly; ``bound = sum_j M_j |d_j|_curl |u_pml_j|_curl``.
    """

    form: float
    identity_gap: float
    bound: float
    coercive: float
    eta: float

    @property
    def holds(self) -> bool:
        return self.form <= self.bound * (1.0 + 1e-9) + 1e-300


def error_chain_check(problem: ModeProblem) -> ErrorChain:
    """Check the trace-error chain on a TE mode problem (strip grid).

    ``problem.pml.s1`` should equal ``Re(s)`` for the ``M_j`` bound to apply.
    """
    from .bounds import mj_bound

    if problem.polarization is not Polarization.TE:
        raise DomainError("the error chain is implemented for TE modes")
    tbc = problem.with_(termination=Termination.TBC)
    pmp = problem.with_(termination=Termination.PML_SYMBOL)
    u = solve_mode(tbc)
    ut = solve_mode(pmp)
    d = u.values - ut.values
    sys_t = _assemble(tbc, np.array([problem.s.value]))
    sys_p = _assemble(pmp, np.array([problem.s.value]))
    Ad = _kernels.tridiag_matvec_batch(sys_t.lower, sys_t.diag, sys_t.upper, d[None, :])[0]
    form = complex(np.vdot(d, Ad))
    boundary = (np.conj(d[-1]) * (sys_p.bc_top[0] - sys_t.bc_top[0]) * ut.values[-1]
                + np.conj(d[0]) * (sys_p.bc_bot[0] - sys_t.bc_bot[0]) * ut.values[0])
    gap = abs(form - boundary) / max(abs(form), abs(boundary), 1e-300)
    mode = problem.xi
    grid = problem.grid
    bound = 0.0
    th = te_tm_basis(mode)[1]
    for j, i in ((1, grid.i_h1), (2, grid.i_h2)):
        bound += mj_bound(problem.s.value, j, problem.media, problem.pml) * _curl_weight(mode, d[i] * th) * _curl_weight(
            mode, ut.values[i] * th)
    return ErrorChain(abs(form), float(gap), float(bound), float(form.real), eta_constant(problem.geo))


# --------------------------------------------------------------------------
# lattice synthesis
# --------------------------------------------------------------------------


def assemble_field(lattice: XiLattice, mode_fields, x_tilde) -> np.ndarray:
    """Inverse Fourier synthesis ``(1/2pi) sum_k w_k e^{i x.xi_k} phi_k(x3)``.

    ``mode_fields`` has shape ``(K, n3, 3)`` (or ``(K, n3)``); ``x_tilde`` has
    shape ``(P, 2)``. Returns ``(P, n3, 3)`` (or ``(P, n3)``).
    """
    phi = np.asarray(mode_fields, dtype=complex)
    if phi.shape[0] != len(lattice):
        raise DomainError("mode data and lattice disagree in size")
    xt = np.atleast_2d(np.asarray(x_tilde, dtype=float))
    phase = np.exp(1j * (xt[:, 0:1] * lattice.xi1[None, :] + xt[:, 1:2] * lattice.xi2[None, :]))
    coef = phase * lattice.weights[None, :] / (2.0 * np.pi)
    flat = phi.reshape(phi.shape[0], -1)
    out = coef @ flat
    return out.reshape((xt.shape[0],) + phi.shape[1:])


@dataclass(frozen=True, eq=False)
class StripSolution:
    lattice: XiLattice
    grid: Grid1D
    fields: np.ndarray  # (K, n, 3) electric field per mode
    termination: Termination


def solve_strip(lattice: XiLattice, s, source_amplitude: Callable, source: SourceSpec, geo: StripGeometry,
                media: MediumParams = MediumParams(), pml: PmlConfig = PmlConfig(),
                termination=Termination.TBC, grid_spec: GridSpec = GridSpec(), threads: int = 1) -> StripSolution:
    """Solve every lattice mode (both polarisations) and collect the
    electric field per mode. ``source_amplitude(xi1, xi2)`` scales
    ``source`` per mode. Modes are solved in parallel; results keep the
    lattice order."""
    termination = Termination(termination)
    grid = Grid1D.build(geo, grid_spec, pml if termination is Termination.PML_LAYER else None)

    def one(k):
        xi = TransverseMode(lattice.xi1[k], lattice.xi2[k])
        src = source.scaled(source_amplitude(xi.xi1, xi.xi2))
        total = np.zeros((grid.n, 3), complex)
        for pol in Polarization:
            prob = ModeProblem(xi, s, pol, termination, src, grid, media, pml)
            sol = solve_mode(prob)
            log.debug("mode %d %s residual %.3e", k, pol.value, sol.residual)
            total += sol.e_field()
        return total

    idx = range(len(lattice))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fields = list(pool.map(one, idx))
    else:
        fields = [one(k) for k in idx]
    return StripSolution(lattice, grid, np.stack(fields), termination)


# --------------------------------------------------------------------------
# stability monitoring
# --------------------------------------------------------------------------


def _energy_norms(solution: ModeSolution):
    prob = solution.problem
    s = prob.s.value
    grid = solution.grid
    sl = grid.strip_slice()
    kx = prob.xi.norm
    u = solution.values
    F = solution.flux
    if prob.polarization is Polarization.TE:
        w = np.where(np.arange(grid.n) >= grid.i_f0, 1.0 / (s * prob.media.mu1), 1.0 / (s * prob.media.mu2))
        du = F / w
        curl = np.sqrt(np.abs(du) ** 2 + kx * kx * np.abs(u) ** 2)
        se = np.abs(s * u)
    else:
        mu = np.where(np.arange(grid.n) >= grid.i_f0, prob.media.mu1, prob.media.mu2)
        curl = np.abs(s * mu * u)
        e3 = reconstruct_E3(solution) if kx > 0 else np.zeros_like(u)
        se = np.abs(s) * np.sqrt(np.abs(F) ** 2 + np.abs(e3) ** 2)
    x = grid.x[sl]
    n_curl = math.sqrt(float(np.trapezoid(curl[sl] ** 2, x)))
    n_se = math.sqrt(float(np.trapezoid(se[sl] ** 2, x)))
    return n_curl, n_se


def _source_norm(problem: ModeProblem):
    grid = problem.grid
    src = problem.source
    if src.is_zero:
        return 0.0
    x = np.linspace(grid.geo.h2, grid.geo.h1, 4001)
    p = np.where(x >= grid.geo.f0, src.evaluate(x, 1, +1), src.evaluate(x, 2, +1))
    g = np.linalg.norm(np.asarray(src.g))
    return float(abs(problem.s.value) * g * math.sqrt(np.trapezoid(np.abs(p) ** 2, x)))


def stability_ratios(solution: ModeSolution, pml_solution: Optional[ModeSolution] = None):
    """``(||curl E|| + ||s E||) / (s1^{-1} ||s J||)`` for the given solution
    and, if supplied, the PML analogue with the extra ``(1 + sigma0/s1)``
    factor in the denominator. Norms are taken over the strip.

    A zero source makes the ratios undefined: ``(nan, nan)`` is returned
    with a warning.
    """
    prob = solution.problem
    s1 = prob.s.s1
    js = _source_norm(prob)
    if js == 0.0:
        warnings.warn("stability ratio undefined for a zero source", RuntimeWarning, stacklevel=2)
        return math.nan, math.nan
    c, e = _energy_norms(solution)
    r = (c + e) / (js / s1)
    if pml_solution is None:
        return r, math.nan
    cp, ep = _energy_norms(pml_solution)
    factor = 1.0 + pml_solution.problem.pml.sigma0 / pml_solution.problem.pml.s1
    return r, (cp + ep) / (factor * js / s1)
