"""Numeric connection (Pfaffian) matrices on the theta-derivative frame.

At a point x the relations ``theta^gamma ell_k`` (|gamma| <= d_max - p) are
linear in the values ``theta^beta f`` of any solution f.  Splitting the
monomials into the frame ``{beta : beta_k <= p-1}`` and the excess ones, the
excess values are eliminated in terms of the frame values; ``C_k`` then
expresses ``theta_k theta^alpha f`` on the frame:

    theta_k v(x) = C_k(x) v(x),    v = (theta^alpha f)_alpha.

The relations are normal-ordered once per (params, d_max); per point only
``R(x) = R_0 + sum_k x_k R_k`` is formed and solved.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .operators import ThetaPolynomial, as_theta_polynomial, build_operator
from .params import Params, ToleranceProfile, index_maps


class DegreeBoundExceeded(RuntimeError):
    pass


class NearSingularElimination(RuntimeError):
    pass


class FrameDimensionError(RuntimeError):
    pass


# the frame consistency residual is a hard failure above this (relative) level
CONSISTENCY_LIMIT = 1e-6
REFINEMENT_STEPS = 1


def default_degree_bound(p: int, m: int) -> int:
    return (p - 1) * m + 1


def degree_cap(p: int, m: int) -> int:
    return (p - 1) * m + 4


@dataclass(frozen=True)
class RelationSystem:
    params: Params
    d_max: int
    monomials: tuple[tuple[int, ...], ...]
    frame: np.ndarray  # column indices of frame monomials, lexicographic alpha order
    excess: np.ndarray
    R0: np.ndarray
    Rx: np.ndarray  # (m, n_rel, n_mono): coefficient of x_k
    target_rows: np.ndarray  # (m, p^m) rows into the stacked [I; X] table
    R0_ext: np.ndarray  # R0 and Rx in extended precision
    Rx_ext: np.ndarray


@lru_cache(maxsize=64)
def relation_system(P: Params, d_max: int) -> RelationSystem:
    p, m = P.p, P.m
    if d_max < default_degree_bound(p, m):
        raise ValueError(f"d_max must be >= (p-1)m+1 = {default_degree_bound(p, m)}")
    monomials = [b for d in range(d_max + 1) for b in _graded(d, m)]
    col = {b: i for i, b in enumerate(monomials)}
    _, alphas = index_maps(p, m)
    frame = np.array([col[a] for a in alphas])
    frame_set = set(alphas)
    # excess monomials in graded order; higher degree first keeps elimination deterministic
    excess_list = [b for b in reversed(monomials) if b not in frame_set]
    excess = np.array([col[b] for b in excess_list])

    ops = [as_theta_polynomial(build_operator(P, k)) for k in range(m)]
    gammas = [g for d in range(d_max - p + 1) for g in _graded(d, m)]
    n_rel = m * len(gammas)
    R0 = np.zeros((n_rel, len(monomials)), dtype=complex)
    Rx = np.zeros((m, n_rel, len(monomials)), dtype=complex)
    row = 0
    zero = (0,) * m
    for k in range(m):
        for g in gammas:
            theta_g = ThetaPolynomial(m, {(zero, g): 1})
            rel = theta_g * ops[k]
            for (xe, beta), c in rel.terms.items():
                if xe == zero:
                    R0[row, col[beta]] += c
                else:
                    (kk,) = [i for i, v in enumerate(xe) if v]
                    Rx[kk, row, col[beta]] += c
            row += 1

    # stacked table: rows 0..p^m-1 are frame identities, then excess rows in `excess` order
    pos = {b: i for i, b in enumerate(alphas)}
    pos.update({b: len(alphas) + i for i, b in enumerate(excess_list)})
    target_rows = np.zeros((m, len(alphas)), dtype=int)
    for k in range(m):
        for i, a in enumerate(alphas):
            b = tuple(v + (j == k) for j, v in enumerate(a))
            target_rows[k, i] = pos[b]
    R0_ext, Rx_ext = R0.astype(np.clongdouble), Rx.astype(np.clongdouble)
    for arr in (R0, Rx, frame, excess, target_rows, R0_ext, Rx_ext):
        arr.setflags(write=False)
    return RelationSystem(P, d_max, tuple(monomials), frame, excess, R0, Rx, target_rows, R0_ext, Rx_ext)


def _graded(d: int, m: int):
    """Monomials of total degree d in lexicographic order."""
    return [b for b in itertools.product(range(d + 1), repeat=m) if sum(b) == d]


@dataclass(frozen=True)
class ConnectionSet:
    x: np.ndarray
    C: np.ndarray  # (m, p^m, p^m)
    params: Params
    d_max: int
    diagnostics: dict = field(default_factory=dict)

    def matrix(self, k: int) -> np.ndarray:
        return self.C[k]


def _eliminate(rs: RelationSystem, x: np.ndarray, tol: ToleranceProfile):
    """Excess-monomial values in terms of the frame: ``X`` (extended precision) and diagnostics.

    R(x) is formed and the residual evaluated in extended precision.  One
    refinement step makes X smooth in x to far below double rounding; a plain
    double solve carries noise of about eps/sigma_ratio, which the transport
    amplifies.
    """
    xl = np.asarray(x, dtype=np.clongdouble)
    Rl = rs.R0_ext + np.tensordot(xl, rs.Rx_ext, axes=(0, 0))
    REl, RFl = Rl[:, rs.excess], Rl[:, rs.frame]
    RE, RF = REl.astype(complex), RFl.astype(complex)
    if RE.shape[0] < RE.shape[1]:
        return None, {"reason": "too few relations", "n_rel": RE.shape[0], "n_excess": RE.shape[1]}
    scale = np.linalg.norm(RE, axis=0)
    scale[scale == 0] = 1
    U, s, Vh = np.linalg.svd(RE / scale, full_matrices=False)
    ratio = float(s[-1] / s[0])
    diag = {"sigma_ratio": ratio, "n_rel": RE.shape[0], "n_excess": RE.shape[1]}
    if ratio < tol.rank_tol:
        return None, diag | {"reason": "rank deficient"}

    def solve(B):
        return (Vh.conj().T @ ((U.conj().T @ B) / s[:, None])) / scale[:, None]

    X = (-solve(RF)).astype(np.clongdouble)
    for _ in range(REFINEMENT_STEPS):
        res = REl @ X + RFl
        X = X - solve(res.astype(complex))
    resid = np.linalg.norm((REl @ X + RFl).astype(complex)) / max(np.linalg.norm(RF), 1e-300)
    diag["consistency"] = float(resid)
    return X, diag


def _assemble(rs: RelationSystem, X: np.ndarray) -> np.ndarray:
    table = np.vstack([np.eye(len(rs.frame), dtype=X.dtype), X])
    return table[rs.target_rows]


def connection_at(
    P: Params,
    x,
    d_max: int | None = None,
    tol: ToleranceProfile = ToleranceProfile(),
) -> ConnectionSet:
    """Connection matrices C_1..C_m at ``x`` by numeric elimination.

    Retries with a larger degree bound (up to (p-1)m+4) when the excess
    monomials are not resolved.
    """
    x = np.asarray(x, dtype=complex).reshape(P.m)
    d0 = default_degree_bound(P.p, P.m) if d_max is None else d_max
    last = {}
    for d in range(d0, max(d0, degree_cap(P.p, P.m)) + 1):
        rs = relation_system(P, d)
        X, diag = _eliminate(rs, x, tol)
        last = diag
        if X is None:
            continue
        if diag["consistency"] > CONSISTENCY_LIMIT:
            raise FrameDimensionError(
                f"frame monomials are dependent at x={x} (consistency residual {diag['consistency']:.3e})"
            )
        return ConnectionSet(x, _assemble(rs, X).astype(complex), P, d, diag | {"d_max": d})
    if last.get("reason") == "rank deficient":
        raise NearSingularElimination(f"pivot ratio {last['sigma_ratio']:.3e} below rank_tol at x={x}")
    raise DegreeBoundExceeded(f"excess monomials unresolved at x={x} up to d_max={degree_cap(P.p, P.m)}")


def connection_fast(rs: RelationSystem, x: np.ndarray, tol: ToleranceProfile, extended: bool = False) -> np.ndarray:
    """Stacked C_k at a fixed degree bound; used in the transport inner loop."""
    X, diag = _eliminate(rs, x, tol)
    if X is None:
        raise NearSingularElimination(f"elimination failed at x={x}: {diag}")
    if diag["consistency"] > CONSISTENCY_LIMIT:
        raise FrameDimensionError(f"frame monomials are dependent at x={x}")
    C = _assemble(rs, X)
    return C if extended else C.astype(complex)


def integrability_residual(cs: ConnectionSet, h: float = 1e-4, tol: ToleranceProfile = ToleranceProfile()) -> float:
    """Flatness defect ``max_{k<l} |x_l d_l C_k - x_k d_k C_l + [C_k, C_l]|``.

    Theta operators commute, so there is no extra commutation term.  The
    derivatives are central differences of step h (error O(h^2)); the
    result is relative to ``max(1, |C|_max)``.
    """
    P, x, m = cs.params, cs.x, cs.params.m
    if m == 1:
        return 0.0

    def C_at(pt):
        return connection_at(P, pt, cs.d_max, tol).C

    dC = []
    for l in range(m):
        step = np.zeros(m, dtype=complex)
        step[l] = h
        dC.append(x[l] * (C_at(x + step) - C_at(x - step)) / (2 * h))
    C = cs.C
    worst = 0.0
    for k, l in itertools.combinations(range(m), 2):
        F = dC[l][k] - dC[k][l] + C[k] @ C[l] - C[l] @ C[k]
        worst = max(worst, float(np.max(np.abs(F))))
    return worst / max(1.0, float(np.max(np.abs(C))))
