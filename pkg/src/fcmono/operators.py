"""Euler-operator system ell_k and its exact action on truncated series.

An operator is kept in factored form through two univariate polynomials,

    ell_k = B_k(theta_k) - x_k * A(theta_1 + ... + theta_m),
    B_k(T) = (b_{1,k} - 1 + T) ... (b_{p-1,k} - 1 + T) * T,
    A(S)   = (a_1 + S) ... (a_p + S),

and only expanded into normal-ordered theta polynomials where the
connection engine needs the full m-variate form.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import polynomial as npoly

from .params import Params


@dataclass(frozen=True)
class EulerOperator:
    k: int  # 0-based axis
    m: int
    B_coeffs: tuple[complex, ...]  # ascending powers of T, length p + 1
    A_coeffs: tuple[complex, ...]  # ascending powers of S, length p + 1

    @property
    def p(self) -> int:
        return len(self.B_coeffs) - 1

    def B(self, T):
        return npoly.polyval(T, np.asarray(self.B_coeffs))

    def A(self, S):
        return npoly.polyval(S, np.asarray(self.A_coeffs))


def build_operator(P: Params, k: int) -> EulerOperator:
    """Expand ``ell_k`` (0-based ``k``) from its roots ``1 - b_{j,k}`` (and 0) and ``-a_i``."""
    if not 0 <= k < P.m:
        raise IndexError(f"axis {k} out of range for m={P.m}")
    col = P.column(k)
    B_roots = [1 - b for b in col[:-1]] + [0.0]
    Bc = npoly.polyfromroots(np.array(B_roots, dtype=complex))
    Ac = npoly.polyfromroots(-P.a_array)
    Bc[0] = 0.0  # B_k(0) = 0 exactly
    return EulerOperator(
        k=k,
        m=P.m,
        B_coeffs=tuple(complex(c) for c in Bc),
        A_coeffs=tuple(complex(c) for c in Ac),
    )


def degree_grid(m: int, N: int) -> np.ndarray:
    """Integer array of shape ``(N+1,)*m`` holding ``|n|`` at index ``n``."""
    grids = np.indices((N + 1,) * m)
    return grids.sum(axis=0)


def apply_to_series(op: EulerOperator, lam, coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of ``ell_k`` applied to ``sum_n c_n x^(n + lam)`` up to total degree N.

    ``coeffs`` is dense of shape ``(N+1,)*m``; entries beyond degree N are ignored.
    The result uses the same layout, with the exponent shift ``lam`` implicit.
    """
    m = op.m
    N = coeffs.shape[0] - 1
    lam = np.asarray(lam, dtype=complex).reshape(m)
    deg = degree_grid(m, N)
    mask = deg <= N
    c = np.where(mask, coeffs, 0)
    nk = np.indices(c.shape)[op.k]
    out = op.B(nk + lam[op.k]) * c
    # x_k * A(|n| + |lam|) moves the coefficient at n to n + e_k
    shifted = op.A(deg + lam.sum()) * c
    src = [slice(None)] * m
    dst = [slice(None)] * m
    src[op.k] = slice(0, N)
    dst[op.k] = slice(1, N + 1)
    out[tuple(dst)] -= shifted[tuple(src)]
    return np.where(mask, out, 0)


def annihilation_residual(op: EulerOperator, lam, coeffs: np.ndarray, max_degree: int) -> float:
    """Max relative size of the coefficients of ``ell_k s`` in total degrees <= ``max_degree``.

    Each coefficient is compared with the roundoff scale of the two terms
    that cancel in it (polynomials evaluated with absolute coefficients).
    """
    m = op.m
    N = coeffs.shape[0] - 1
    lam = np.asarray(lam, dtype=complex).reshape(m)
    deg = degree_grid(m, N)
    c = np.where(deg <= N, coeffs, 0)
    nk = np.indices(c.shape)[op.k]
    absB = npoly.polyval(np.abs(nk + lam[op.k]), np.abs(op.B_coeffs))
    absA = npoly.polyval(np.abs(deg + lam.sum()), np.abs(op.A_coeffs))
    first = absB * np.abs(c)
    shifted = absA * np.abs(c)
    second = np.zeros_like(first)
    src = [slice(None)] * m
    dst = [slice(None)] * m
    src[op.k] = slice(0, N)
    dst[op.k] = slice(1, N + 1)
    second[tuple(dst)] = shifted[tuple(src)]
    res = np.abs(apply_to_series(op, lam, coeffs))
    scale = first + second
    sel = (deg <= max_degree) & (scale > 0)
    if not sel.any():
        return 0.0
    return float(np.max(res[sel] / scale[sel]))


# -- normal-ordered theta polynomials ---------------------------------------------


class ThetaPolynomial:
    """Finite sum of ``coeff * x^e * theta^beta`` with all x factors to the left.

    Stored as ``{(e, beta): coeff}`` with exponent tuples of length m.
    """

    __slots__ = ("m", "terms")

    def __init__(self, m: int, terms=None):
        self.m = m
        self.terms: dict[tuple[tuple[int, ...], tuple[int, ...]], complex] = {}
        for key, c in (terms or {}).items():
            if c != 0:
                self.terms[key] = self.terms.get(key, 0) + c

    @classmethod
    def constant(cls, m: int, c: complex = 1) -> "ThetaPolynomial":
        z = (0,) * m
        return cls(m, {(z, z): c})

    @classmethod
    def theta(cls, m: int, j: int, power: int = 1) -> "ThetaPolynomial":
        beta = tuple(power if i == j else 0 for i in range(m))
        return cls(m, {((0,) * m, beta): 1})

    @classmethod
    def x(cls, m: int, k: int, power: int = 1) -> "ThetaPolynomial":
        e = tuple(power if i == k else 0 for i in range(m))
        return cls(m, {(e, (0,) * m): 1})

    def __add__(self, other: "ThetaPolynomial") -> "ThetaPolynomial":
        out = ThetaPolynomial(self.m, self.terms)
        for key, c in other.terms.items():
            out.terms[key] = out.terms.get(key, 0) + c
        out.terms = {k: v for k, v in out.terms.items() if v != 0}
        return out

    def __sub__(self, other: "ThetaPolynomial") -> "ThetaPolynomial":
        return self + other.scale(-1)

    def scale(self, c: complex) -> "ThetaPolynomial":
        return ThetaPolynomial(self.m, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other: "ThetaPolynomial") -> "ThetaPolynomial":
        # x^a theta^alpha * x^b theta^beta = x^(a+b) (theta + b)^alpha theta^beta
        out: dict = {}
        for (a, alpha), c1 in self.terms.items():
            for (b, beta), c2 in other.terms.items():
                e = tuple(i + j for i, j in zip(a, b))
                for gamma, cs in _shifted_monomial(alpha, b):
                    key = (e, tuple(g + h for g, h in zip(gamma, beta)))
                    out[key] = out.get(key, 0) + c1 * c2 * cs
        return ThetaPolynomial(self.m, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ThetaPolynomial):
            return NotImplemented
        return self.m == other.m and (self - other).is_zero()

    def is_zero(self, atol: float = 0.0) -> bool:
        return all(abs(c) <= atol for c in self.terms.values())

    def __repr__(self) -> str:
        return f"ThetaPolynomial(m={self.m}, terms={self.terms!r})"

    def act_on_series(self, lam, coeffs: np.ndarray) -> np.ndarray:
        """Term-wise action on ``sum_n c_n x^(n + lam)``; result truncated at degree N."""
        m = self.m
        N = coeffs.shape[0] - 1
        lam = np.asarray(lam, dtype=complex).reshape(m)
        deg = degree_grid(m, N)
        c = np.where(deg <= N, coeffs, 0).astype(complex)
        idx = np.indices(c.shape)
        out = np.zeros_like(c)
        for (e, beta), coef in self.terms.items():
            weight = np.ones_like(c)
            for j in range(m):
                if beta[j]:
                    weight = weight * (idx[j] + lam[j]) ** beta[j]
            term = coef * weight * c
            src = tuple(slice(0, N + 1 - e[j]) for j in range(m))
            dst = tuple(slice(e[j], N + 1) for j in range(m))
            out[dst] += term[src]
        return np.where(deg <= N, out, 0)


def _shifted_monomial(alpha, b):
    """Expand ``prod_j (theta_j + b_j)^alpha_j`` into ``[(gamma, coeff)]``."""
    factors = []
    for aj, bj in zip(alpha, b):
        if bj == 0:
            factors.append([(aj, 1)])
        else:
            factors.append([(g, comb(aj, g) * bj ** (aj - g)) for g in range(aj + 1)])
    out = []
    for combo in itertools.product(*factors):
        coeff = 1
        for _, c in combo:
            coeff *= c
        out.append((tuple(g for g, _ in combo), coeff))
    return out


def normal_order(word, m: int) -> ThetaPolynomial:
    """Normal-order a composition word.

    Letters are ``("theta", j)``, ``("x", k)`` (0-based axes) or ThetaPolynomial
    instances; the word is read as the operator product left to right.
    """
    out = ThetaPolynomial.constant(m)
    for letter in word:
        if isinstance(letter, ThetaPolynomial):
            factor = letter
        else:
            kind, j = letter
            if kind == "theta":
                factor = ThetaPolynomial.theta(m, j)
            elif kind == "x":
                factor = ThetaPolynomial.x(m, j)
            else:
                raise ValueError(f"unknown letter {letter!r}")
        out = out * factor
    return out


def univariate_in_theta_sum(coeffs, m: int) -> ThetaPolynomial:
    """``sum_d coeffs[d] * (theta_1 + ... + theta_m)^d`` expanded multinomially."""
    terms: dict = {}
    zero = (0,) * m
    for d, c in enumerate(coeffs):
        if c == 0:
            continue
        for beta in _compositions(d, m):
            mult = _multinomial(beta)
            key = (zero, beta)
            terms[key] = terms.get(key, 0) + c * mult
    return ThetaPolynomial(m, terms)


def univariate_in_theta(coeffs, m: int, k: int) -> ThetaPolynomial:
    terms = {}
    zero = (0,) * m
    for d, c in enumerate(coeffs):
        beta = tuple(d if i == k else 0 for i in range(m))
        terms[(zero, beta)] = c
    return ThetaPolynomial(m, terms)


def as_theta_polynomial(op: EulerOperator) -> ThetaPolynomial:
    """Normal-ordered form of ``ell_k``."""
    m = op.m
    lhs = univariate_in_theta(op.B_coeffs, m, op.k)
    rhs = ThetaPolynomial.x(m, op.k) * univariate_in_theta_sum(op.A_coeffs, m)
    return lhs - rhs


def _compositions(d: int, m: int):
    if m == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, m - 1):
            yield (first,) + rest


def _multinomial(beta) -> int:
    out, total = 1, 0
    for b in beta:
        total += b
        out *= comb(total, b)
    return out
