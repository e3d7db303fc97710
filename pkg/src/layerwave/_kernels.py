"""Hot inner loops: batched complex tridiagonal solves and products.

Every kernel has a numba implementation and a pure-numpy fallback with the
same signature. The numba path is used when numba imports and the
environment variable ``LAYERWAVE_NO_NUMBA`` is unset (or ``0``).

All arrays are ``complex128`` with shape ``(batch, n)``. ``lower[:, 0]`` and
``upper[:, -1]`` are ignored.
"""

import os

import numpy as np

try:
    import numba

    _NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None
    _NUMBA_AVAILABLE = False


def _flag_disabled():
    value = os.environ.get("LAYERWAVE_NO_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no")


USE_NUMBA = _NUMBA_AVAILABLE and not _flag_disabled()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy fallback: loop over the grid, vectorise over the batch
# --------------------------------------------------------------------------


def _thomas_numpy(lower, diag, upper, rhs):
    batch, n = diag.shape
    cp = np.empty((batch, n), dtype=np.complex128)
    dp = np.empty((batch, n), dtype=np.complex128)
    cp[:, 0] = upper[:, 0] / diag[:, 0]
    dp[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        denom = diag[:, i] - lower[:, i] * cp[:, i - 1]
        cp[:, i] = upper[:, i] / denom
        dp[:, i] = (rhs[:, i] - lower[:, i] * dp[:, i - 1]) / denom
    x = np.empty((batch, n), dtype=np.complex128)
    x[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = dp[:, i] - cp[:, i] * x[:, i + 1]
    return x


def _matvec_numpy(lower, diag, upper, x):
    y = diag * x
    y[:, 1:] += lower[:, 1:] * x[:, :-1]
    y[:, :-1] += upper[:, :-1] * x[:, 1:]
    return y


# --------------------------------------------------------------------------
# numba path: loop over the batch, then the grid
# --------------------------------------------------------------------------

if _NUMBA_AVAILABLE:

    @numba.njit(cache=True, nogil=True)
    def _thomas_numba(lower, diag, upper, rhs):  # pragma: no cover - jitted
        batch, n = diag.shape
        x = np.empty((batch, n), dtype=np.complex128)
        cp = np.empty(n, dtype=np.complex128)
        dp = np.empty(n, dtype=np.complex128)
        for b in range(batch):
            cp[0] = upper[b, 0] / diag[b, 0]
            dp[0] = rhs[b, 0] / diag[b, 0]
            for i in range(1, n):
                denom = diag[b, i] - lower[b, i] * cp[i - 1]
                cp[i] = upper[b, i] / denom
                dp[i] = (rhs[b, i] - lower[b, i] * dp[i - 1]) / denom
            x[b, n - 1] = dp[n - 1]
            for i in range(n - 2, -1, -1):
                x[b, i] = dp[i] - cp[i] * x[b, i + 1]
        return x

    @numba.njit(cache=True, nogil=True)
    def _matvec_numba(lower, diag, upper, x):  # pragma: no cover - jitted
        batch, n = diag.shape
        y = np.empty((batch, n), dtype=np.complex128)
        for b in range(batch):
            for i in range(n):
                acc = diag[b, i] * x[b, i]
                if i > 0:
                    acc += lower[b, i] * x[b, i - 1]
                if i < n - 1:
                    acc += upper[b, i] * x[b, i + 1]
                y[b, i] = acc
        return y

else:  # pragma: no cover
    _thomas_numba = None
    _matvec_numba = None


def _prepare(*arrays):
    out = [np.ascontiguousarray(a, dtype=np.complex128) for a in arrays]
    shape = out[1].shape
    if out[1].ndim != 2:
        raise ValueError("tridiagonal kernels expect (batch, n) arrays")
    for a in out:
        if a.shape != shape:
            raise ValueError(f"shape mismatch: {a.shape} vs {shape}")
    return out


def thomas_batch(lower, diag, upper, rhs):
    """Solve a batch of tridiagonal systems without pivoting.

    Row ``i`` of system ``b`` reads
    ``lower[b,i]*x[i-1] + diag[b,i]*x[i] + upper[b,i]*x[i+1] = rhs[b,i]``.
    Callers are responsible for checking the residual; the matrices built by
    the strip solver have positive-definite real part after scaling, which is
    the regime where elimination without pivoting is stable.
    """
    lower, diag, upper, rhs = _prepare(lower, diag, upper, rhs)
    if USE_NUMBA:
        return _thomas_numba(lower, diag, upper, rhs)
    return _thomas_numpy(lower, diag, upper, rhs)


def tridiag_matvec_batch(lower, diag, upper, x):
    """Batched product of tridiagonal matrices with vectors."""
    lower, diag, upper, x = _prepare(lower, diag, upper, x)
    if USE_NUMBA:
        return _matvec_numba(lower, diag, upper, x)
    return _matvec_numpy(lower, diag, upper, x)
