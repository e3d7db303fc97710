"""Laplace-domain EtM operators, PML truncation and error bounds for
electromagnetic scattering in a two-layer medium.

Modules
-------
model        media, strip geometry, PML profile and stretched coordinates
symbols      EtM symbols (exact and PML), TE/TM splitting, trace norms
bounds       the Lambda/Gamma/M_j bound constants and the symbol error
stripsolver  per-mode two-point solver with TBC or PML closures
elastic      Lame operators, traction, coercivity and interface identities
timedomain   Laplace transform, Bromwich inversion, time-domain mode fields
harness      convergence sweeps, rate fits and output files
cli          command-line entry point
"""

__version__ = "0.1.0"

from . import errors, model, symbols, bounds, stripsolver, elastic, timedomain, harness  # noqa: E402
from .errors import ConfigError, DomainError, LayerwaveError, NumericalError  # noqa: E402

__all__ = [
    "__version__",
    "errors",
    "model",
    "symbols",
    "bounds",
    "stripsolver",
    "elastic",
    "timedomain",
    "harness",
    "LayerwaveError",
    "ConfigError",
    "DomainError",
    "NumericalError",
]
