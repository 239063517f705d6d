"""Singular locus: exact expansion of R(x), hyperplanes H_I, the covering phi and deck maps.

R is expanded as a product of p^m linear forms in ``s_k = x_k^(1/p)``.  The
arithmetic runs in the group ring Z[C_p] (multiplication by zeta^i is a
cyclic shift) and is reduced to Z[zeta_p] modulo the p-th cyclotomic
polynomial at the end, so every cancellation is exact.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import INDEX_CAP


class CyclotomicResidueError(ArithmeticError):
    pass


@lru_cache(maxsize=None)
def cyclotomic_coeffs(n: int) -> tuple[int, ...]:
    """Ascending integer coefficients of the n-th cyclotomic polynomial."""
    from sympy import Poly, cyclotomic_poly, symbols

    t = symbols("t")
    return tuple(int(c) for c in reversed(Poly(cyclotomic_poly(n, t), t).all_coeffs()))


def reduce_mod_cyclotomic(v, p: int) -> tuple[int, ...]:
    """Map a group-ring element ``sum v_i y^i`` to the power basis of Z[zeta_p]."""
    phi = cyclotomic_coeffs(p)
    d = len(phi) - 1
    r = [int(c) for c in v]
    for top in range(len(r) - 1, d - 1, -1):
        c = r[top]
        if c:
            for i, ph in enumerate(phi):
                r[top - d + i] -= c * ph
    return tuple(r[:d])


@dataclass(frozen=True)
class LocusPolynomial:
    p: int
    m: int
    coeffs: dict  # exponent tuple in x -> int

    @property
    def degree(self) -> int:
        return max(sum(e) for e in self.coeffs)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for e, c in self.coeffs.items():
            out = out + c * np.prod(x ** np.array(e), axis=-1)
        return out

    def as_json(self) -> dict:
        return {",".join(map(str, e)): c for e, c in sorted(self.coeffs.items())}

    def restrict_last_zero(self) -> "LocusPolynomial":
        """Set ``x_m = 0``; the result lives in m-1 variables."""
        out = {e[:-1]: c for e, c in self.coeffs.items() if e[-1] == 0}
        return LocusPolynomial(self.p, self.m - 1, out)

    def __mul__(self, other: "LocusPolynomial") -> "LocusPolynomial":
        out: dict = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(i + j for i, j in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return LocusPolynomial(self.p, self.m, {e: c for e, c in out.items() if c})

    def __pow__(self, n: int) -> "LocusPolynomial":
        out = LocusPolynomial(self.p, self.m, {(0,) * self.m: 1})
        for _ in range(n):
            out = out * self
        return out


def expand_R(p: int, m: int, cap: int = INDEX_CAP) -> LocusPolynomial:
    """Exact integer polynomial R(x_1, ..., x_m) of degree p^(m-1)."""
    if p**m > cap:
        raise OverflowError(f"p^m = {p**m} exceeds the cap {cap}")
    big = (1 + m) ** (p**m) >= 2**62
    dtype = object if big else np.int64
    zero = np.zeros(p, dtype=dtype)
    one = zero.copy()
    one[0] = 1
    poly: dict = {(0,) * m: one}
    for I in itertools.product(range(p), repeat=m):
        new: dict = {}
        for e, c in poly.items():
            acc = new.get(e)
            new[e] = c.copy() if acc is None else acc + c
            for k in range(m):
                ek = e[:k] + (e[k] + 1,) + e[k + 1 :]
                term = -np.roll(c, I[k])  # -zeta^{i_k} * c
                acc = new.get(ek)
                new[ek] = term if acc is None else acc + term
        poly = new
    out = {}
    for e, c in poly.items():
        r = reduce_mod_cyclotomic(c, p)
        if all(v == 0 for v in r):
            continue
        if any(ek % p for ek in e) or any(r[1:]):
            raise CyclotomicResidueError(f"non-integral term s^{e} with coefficient {r}")
        out[tuple(ek // p for ek in e)] = int(r[0])
    R = LocusPolynomial(p, m, out)
    if R.degree != p ** (m - 1):
        raise CyclotomicResidueError(f"degree {R.degree} != p^(m-1) = {p ** (m - 1)}")
    return R


# -- covering, deck maps, hyperplanes -----------------------------------------------


def zeta(p: int) -> complex:
    return np.exp(2j * np.pi / p)


def covering_phi(z, p: int) -> np.ndarray:
    """Componentwise p-th power."""
    return np.asarray(z, dtype=complex) ** p


@dataclass(frozen=True)
class DeckMap:
    p: int
    I: tuple[int, ...]

    def __call__(self, z) -> np.ndarray:
        return np.asarray(z, dtype=complex) * zeta(self.p) ** np.array(self.I)


@dataclass(frozen=True)
class HyperplaneI:
    p: int
    I: tuple[int, ...]

    @property
    def normal(self) -> np.ndarray:
        return zeta(self.p) ** np.array(self.I)

    def equation(self, z) -> np.ndarray:
        """``zeta^I . z - 1``; zero exactly on the hyperplane."""
        return np.asarray(z, dtype=complex) @ self.normal - 1


@lru_cache(maxsize=None)
def hyperplane_normals(p: int, m: int) -> np.ndarray:
    """Array of shape (p^m, m) of normals zeta^I, I in lexicographic order."""
    I = np.array(list(itertools.product(range(p), repeat=m)))
    out = zeta(p) ** I
    out.setflags(write=False)
    return out


def linear_forms_product(z, p: int) -> np.ndarray:
    """``prod_I (1 - sum_k zeta^{i_k} z_k)``."""
    z = np.asarray(z, dtype=complex)
    return np.prod(1 - z @ hyperplane_normals(p, z.shape[-1]).T, axis=-1)


def pullback_factorization_check(p: int, m: int, z, R: LocusPolynomial | None = None) -> float:
    """Relative gap between R(z^p) and the product of the p^m linear forms."""
    R = expand_R(p, m) if R is None else R
    z = np.asarray(z, dtype=complex).reshape(m)
    lhs = complex(R(covering_phi(z, p)))
    rhs = complex(linear_forms_product(z, p))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def distance_to_locus(points, p: int, space: str = "z") -> np.ndarray:
    """Safety distance to S(z) (or S(x) via all p^m lifts).

    In z-space: min over k of |z_k| and over I of |1 - zeta^I . z| / sqrt(m).
    Accepts a single point of shape (m,) or an array (n, m).
    """
    pts = np.asarray(points, dtype=complex)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    m = pts.shape[1]
    if space == "x":
        root = pts ** (1.0 / p)
        lifts = hyperplane_normals(p, m)  # the same zeta^I table enumerates deck images
        zs = (root[:, None, :] * lifts[None, :, :]).reshape(-1, m)
        d = _z_distance(zs, p).reshape(len(pts), -1).min(axis=1)
    elif space == "z":
        d = _z_distance(pts, p)
    else:
        raise ValueError("space must be 'z' or 'x'")
    return float(d[0]) if single else d


def _z_distance(zs: np.ndarray, p: int) -> np.ndarray:
    m = zs.shape[1]
    coord = np.abs(zs).min(axis=1)
    planes = np.abs(1 - zs @ hyperplane_normals(p, m).T).min(axis=1) / np.sqrt(m)
    return np.minimum(coord, planes)
