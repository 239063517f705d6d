"""Adaptive DOP853 stepping in extended precision.

scipy's ``solve_ivp`` keeps the state in complex128.  Along the loops used
here the transported frame passes through a region where it is ill
conditioned, and rounding of the double-precision state and right-hand side
then sets an error floor of a few 1e-9 regardless of the tolerance.  This
stepper uses the same Dormand-Prince 8(5,3) tableau and error norm as scipy,
but keeps the state and stage arithmetic in numpy's ``clongdouble``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as tableau

EXT = np.longdouble
CEXT = np.clongdouble

N_STAGES = tableau.N_STAGES
_A = tableau.A[:N_STAGES, :N_STAGES].astype(EXT)
_B = tableau.B.astype(EXT)
_C = tableau.C[:N_STAGES].astype(EXT)
_E3 = tableau.E3.astype(EXT)
_E5 = tableau.E5.astype(EXT)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
MAX_STEPS = 200_000


class IntegrationFailure(RuntimeError):
    pass


@dataclass
class StepStats:
    steps: int = 0
    rejected: int = 0
    nfev: int = 0


def _stage_sum(coeffs, K, upto):
    return np.tensordot(coeffs[:upto], K[:upto], axes=(0, 0))


def _error_norm(K, h, scale):
    err5 = _stage_sum(_E5, K, N_STAGES + 1) / scale
    err3 = _stage_sum(_E3, K, N_STAGES + 1) / scale
    e5 = float(np.sum(np.abs(err5) ** 2))
    e3 = float(np.sum(np.abs(err3) ** 2))
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(float(h)) * e5 / np.sqrt((e5 + 0.01 * e3) * err5.size)


def _initial_step(fun, y0, f0, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = float(np.sqrt(np.mean(np.abs(y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean(np.abs(f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 1.0)
    y1 = y0 + EXT(h0) * f0
    f1 = fun(EXT(h0), y1)
    d2 = float(np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2))) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** (1 / 8)
    return min(100 * h0, h1, 1.0)


def integrate(fun, y0: np.ndarray, rtol: float, atol: float, stats: StepStats | None = None) -> np.ndarray:
    """Integrate ``y' = fun(t, y)`` over t in [0, 1]; t and y are extended precision."""
    stats = stats if stats is not None else StepStats()
    y = np.asarray(y0, dtype=CEXT)
    t = EXT(0)
    f = fun(t, y)
    stats.nfev += 1
    h = EXT(_initial_step(fun, y, f, rtol, atol))
    stats.nfev += 1
    K = np.empty((N_STAGES + 1,) + y.shape, dtype=CEXT)
    while t < 1:
        if stats.steps + stats.rejected > MAX_STEPS:
            raise IntegrationFailure("step budget exhausted")
        if t + h > 1:
            h = EXT(1) - t
        if h <= abs(t) * np.finfo(EXT).eps * 16 + np.finfo(EXT).tiny:
            raise IntegrationFailure(f"step size collapsed at t={float(t):.6f}")
        K[0] = f
        for s in range(1, N_STAGES):
            K[s] = fun(t + _C[s] * h, y + h * _stage_sum(_A[s], K, s))
        y_new = y + h * _stage_sum(_B, K, N_STAGES)
        f_new = fun(t + h, y_new)
        stats.nfev += N_STAGES
        K[N_STAGES] = f_new
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err = _error_norm(K, h, scale)
        if err < 1:
            t, y, f = t + h, y_new, f_new
            stats.steps += 1
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT)
        else:
            stats.rejected += 1
            factor = max(MIN_FACTOR, SAFETY * err**ERROR_EXPONENT)
        h = h * EXT(factor)
    return y
