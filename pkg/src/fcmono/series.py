"""Truncated F_C^{p,m} series, certified Frobenius solutions and the theta-derivative frame."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import annihilation_residual, build_operator, degree_grid
from .params import Params, ToleranceProfile, index_maps

N_CAP = 120
N_STEP = 8


class DivergenceWarning(RuntimeWarning):
    pass


class CertificationError(RuntimeError):
    pass


class IllConditioned(RuntimeError):
    pass


def pochhammer(c: complex, n: int) -> complex:
    """Rising factorial ``c (c+1) ... (c+n-1)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = 1
    for i in range(n):
        out *= c + i
    return out


def series_coefficients(a, B, N: int) -> np.ndarray:
    """Dense coefficient table of ``F_C(a, B; x)`` for total degree <= N.

    ``a`` has p entries and ``B`` is p x m (the last row need not be 1 here;
    all p Pochhammer factors of each column are used).  Built with the
    one-step ratio ``c(n + e_k) / c(n) = A(|n|) / prod_i (b_{i,k} + n_k)``.
    """
    a = np.asarray(a, dtype=complex)
    B = np.asarray(B, dtype=complex)
    m = B.shape[1]
    deg = degree_grid(m, N)
    c = np.zeros((N + 1,) * m, dtype=complex)
    c[(0,) * m] = 1
    # fill axes from last to first; trailing axes are already complete when axis k is filled
    for k in range(m - 1, -1, -1):
        for i in range(1, N + 1):
            head = (0,) * k
            cur = head + (i,)
            prev = head + (i - 1,)
            tail_deg = deg[cur]
            A = np.prod(a[:, None] + (tail_deg - 1).ravel()[None, :], axis=0).reshape(tail_deg.shape)
            Bk = np.prod(B[:, k] + (i - 1))
            vals = c[prev] * A / Bk
            c[cur] = np.where(tail_deg <= N, vals, 0)
    return c


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    truncation_estimate: float
    N_used: int


def _check_region(p: int, x: np.ndarray, margin: float = 0.0):
    rho = float(np.sum(np.abs(x) ** (1.0 / p)))
    if rho >= 1 - margin:
        raise ValueError(f"x outside the convergence region: sum |x_k|^(1/p) = {rho:.6g} >= {1 - margin:.6g}")


def _shells(terms: np.ndarray, N: int) -> np.ndarray:
    deg = degree_grid(terms.ndim, N)
    return np.bincount(deg.ravel(), weights=np.abs(terms).ravel(), minlength=terms.ndim * N + 1)[: N + 1]


def _warn_if_diverging(shells: np.ndarray):
    tail = shells[-3:]
    if len(tail) == 3 and tail[0] > 0 and tail[0] <= tail[1] <= tail[2]:
        warnings.warn("series shells are non-decreasing over the last 3 degrees", DivergenceWarning, stacklevel=3)


def eval_series(P: Params, x, N: int | None = None, tol: ToleranceProfile = ToleranceProfile()) -> SeriesValue:
    """Partial sum of ``F_C(a, B; x)`` over ``|n| <= N`` (adaptive N when not given)."""
    x = np.asarray(x, dtype=complex).reshape(P.m)
    _check_region(P.p, x)
    Ns = [N] if N is not None else range(N_STEP, N_CAP + 1, N_STEP)
    for n_try in Ns:
        c = series_coefficients(P.a_array, P.B_array, n_try)
        terms = c * _monomials(x, n_try)
        total = complex(terms.sum())
        shells = _shells(terms, n_try)
        if N is None and shells[-1] >= tol.ode_tol * max(abs(total), 1e-300) and n_try < N_CAP:
            continue
        _warn_if_diverging(shells)
        return SeriesValue(total, float(shells[-1]), n_try)
    raise AssertionError("unreachable")


def _monomials(x: np.ndarray, N: int) -> np.ndarray:
    m = len(x)
    out = np.ones((N + 1,) * m, dtype=complex)
    for k in range(m):
        shape = [1] * m
        shape[k] = N + 1
        out = out * (x[k] ** np.arange(N + 1)).reshape(shape)
    return out


# -- Frobenius solutions ----------------------------------------------------------


@dataclass(frozen=True)
class FrobeniusSolution:
    J: tuple[int, ...]
    lam: np.ndarray  # local exponents 1 - b_{j_k,k}
    a_shift: np.ndarray
    B_shift: np.ndarray
    N: int
    coeffs: np.ndarray
    residual: float  # worst annihilation residual over k, degrees <= N - p


def shifted_parameters(P: Params, J) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exponents and shifted parameters (a^J, B^J) of the Frobenius solution Phi_J.

    In column k with ``j = j_k`` the roots of ``B_k(T + lam_k)`` give the
    Pochhammer parameters ``b_{i,k} - b_{j,k} + 1``; the value 1 (from i = j)
    goes to the last row and the value from i = p goes to row j.
    """
    p, m = P.p, P.m
    B = P.B_array
    lam = np.array([1 - B[J[k] - 1, k] for k in range(m)], dtype=complex)
    BJ = B.copy()
    for k in range(m):
        j = J[k] - 1
        if j == p - 1:
            continue
        col = B[:, k] - B[j, k] + 1
        col[j] = 2 - B[j, k]
        col[p - 1] = 1
        BJ[:, k] = col
    aJ = P.a_array + lam.sum()
    return lam, aJ, BJ


@lru_cache(maxsize=256)
def frobenius_solution(P: Params, J: tuple[int, ...], N: int = 40, cert_tol: float = 1e-12) -> FrobeniusSolution:
    """Phi_J = prod_k x_k^lam_k * F_C(a^J, B^J; x), certified by annihilation.

    Every ell_k of the original system is applied to the truncated candidate;
    any residual in total degree <= N - p raises CertificationError.
    """
    J = tuple(int(j) for j in J)
    if len(J) != P.m or not all(1 <= j <= P.p for j in J):
        raise ValueError(f"J={J} is not in [{P.p}]^{P.m}")
    lam, aJ, BJ = shifted_parameters(P, J)
    coeffs = series_coefficients(aJ, BJ, N)
    worst = 0.0
    for k in range(P.m):
        op = build_operator(P, k)
        worst = max(worst, annihilation_residual(op, lam, coeffs, N - P.p))
    if not worst < cert_tol:
        raise CertificationError(f"Phi_{J}: annihilation residual {worst:.3e} in degree <= {N - P.p}")
    coeffs.setflags(write=False)
    return FrobeniusSolution(J, lam, aJ, BJ, N, coeffs, worst)


@dataclass(frozen=True)
class FrameMatrix:
    x: np.ndarray
    W: np.ndarray  # W[J, alpha] = theta^alpha Phi_J(x)
    cond: float
    N: int
    truncation: float
    cond_scaled: float  # after two-sided diagonal equilibration


def equilibrate(V: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row scales r, column scales c and ``U = diag(r)^-1 V diag(c)^-1`` with unit-norm rows, then columns."""
    r = np.linalg.norm(V, axis=1)
    r[r == 0] = 1
    V1 = V / r[:, None]
    c = np.linalg.norm(V1, axis=0)
    c[c == 0] = 1
    return r, c, V1 / c[None, :]


def frame_matrix(
    P: Params,
    x,
    N: int | None = None,
    tol: ToleranceProfile = ToleranceProfile(),
    rel_tol: float = 1e-17,
    check_cond: bool = True,
) -> FrameMatrix:
    """Theta-derivative frame of the Frobenius basis at ``x`` (principal branches)."""
    x = np.asarray(x, dtype=complex).reshape(P.m)
    _check_region(P.p, x)
    Js, alphas = index_maps(P.p, P.m)
    Ns = [N] if N is not None else range(N_STEP, N_CAP + 1, N_STEP)
    for n_try in Ns:
        W, trunc = _frame_at(P, x, n_try, Js)
        if N is None and trunc > rel_tol and n_try < N_CAP:
            continue
        break
    cond = float(np.linalg.cond(W))
    # the raw condition number mostly reflects the spread of scales among the
    # theta^alpha components; only the equilibrated one signals real dependence
    cond_scaled = float(np.linalg.cond(equilibrate(W)[2]))
    if check_cond and not cond_scaled < 1 / tol.rank_tol:
        raise IllConditioned(f"equilibrated frame condition number {cond_scaled:.3e} exceeds {1 / tol.rank_tol:.3e}")
    return FrameMatrix(x, W, cond, n_try, trunc, cond_scaled)


def _frame_at(P: Params, x: np.ndarray, N: int, Js) -> tuple[np.ndarray, float]:
    p, m = P.p, P.m
    mono = _monomials(x, N)
    rows = []
    trunc = 0.0
    for J in Js:
        sol = frobenius_solution(P, J, max(N, 40))
        c = sol.coeffs[(slice(0, N + 1),) * m]
        c = np.where(degree_grid(m, N) <= N, c, 0)
        T = c * mono
        # contract each axis with (n_k + lam_k)^alpha_k
        for k in range(m):
            V = (np.arange(N + 1)[:, None] + sol.lam[k]) ** np.arange(p)[None, :]
            T = np.tensordot(T, V, axes=([0], [0]))
        # after m contractions the axes are alpha_1..alpha_m in order
        prefactor = np.prod(x**sol.lam)
        rows.append(prefactor * T.reshape(-1))
        shells = _shells(c * mono, N)
        weight = (N + 1 + np.max(np.abs(sol.lam))) ** ((p - 1) * m)
        total = max(np.sum(shells), 1e-300)
        trunc = max(trunc, shells[-1] * weight / total)
    return np.array(rows), trunc


def theta_derivatives(P: Params, x, J: tuple[int, ...], betas, N: int = 60) -> np.ndarray:
    """``theta^beta Phi_J(x)`` for each multi-index in ``betas`` (principal branch)."""
    x = np.asarray(x, dtype=complex).reshape(P.m)
    _check_region(P.p, x)
    sol = frobenius_solution(P, tuple(J), max(N, 40))
    c = sol.coeffs[(slice(0, N + 1),) * P.m]
    T = np.where(degree_grid(P.m, N) <= N, c, 0) * _monomials(x, N)
    idx = np.indices(T.shape)
    prefactor = np.prod(x**sol.lam)
    out = []
    for beta in betas:
        w = np.ones(T.shape, dtype=complex)
        for k, bk in enumerate(beta):
            if bk:
                w = w * (idx[k] + sol.lam[k]) ** bk
        out.append(prefactor * np.sum(w * T))
    return np.array(out)


def base_point(p: int, m: int, eps: float | None = None) -> np.ndarray:
    """The base point ``(eps^p, ..., eps^p)``; default ``eps = 1/(4m)``."""
    eps = default_eps(m) if eps is None else eps
    return np.full(m, eps**p, dtype=complex)


def default_eps(m: int) -> float:
    return 1.0 / (4 * m)
