"""Parameter containers, standing-hypothesis validation and index bookkeeping.

All analytic code works over ``complex`` (IEEE binary64 per component, unit
roundoff 2**-53).  Genericity is decided by distance thresholds because
floating point cannot decide membership in Z.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

UNIT_ROUNDOFF = 2.0**-53
INDEX_CAP = 4096


class ParamsError(ValueError):
    """Malformed parameter document or non-standard B."""


@dataclass(frozen=True)
class ToleranceProfile:
    ode_tol: float = 1e-10
    residual_tol: float = 1e-6
    rank_tol: float = 1e-6
    tau_gen: float = 0.05

    def __post_init__(self):
        for name in ("ode_tol", "residual_tol", "rank_tol", "tau_gen"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.ode_tol < self.residual_tol:
            raise ValueError("ode_tol must be smaller than residual_tol")

    def as_dict(self) -> dict:
        return {
            "ode_tol": self.ode_tol,
            "residual_tol": self.residual_tol,
            "rank_tol": self.rank_tol,
            "tau_gen": self.tau_gen,
        }


@dataclass(frozen=True)
class Params:
    """Parameters ``(p, m, a, B)`` of the system; ``B`` is ``p x m`` with last row 1."""

    p: int
    m: int
    a: tuple[complex, ...]
    B: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        if self.p < 2 or self.m < 1:
            raise ParamsError(f"need p >= 2 and m >= 1, got p={self.p}, m={self.m}")
        if len(self.a) != self.p:
            raise ParamsError(f"a must have {self.p} entries")
        if len(self.B) != self.p or any(len(row) != self.m for row in self.B):
            raise ParamsError(f"B must be {self.p} x {self.m}")
        if any(v != 1 for v in self.B[-1]):
            raise ParamsError("last row of B must be exactly 1")

    @classmethod
    def from_arrays(cls, a, B) -> "Params":
        a = [complex(v) for v in np.ravel(a)]
        B = np.asarray(B, dtype=complex)
        if B.ndim == 1:
            B = B[:, None]
        rows = tuple(tuple(complex(v) for v in row) for row in B)
        return cls(p=B.shape[0], m=B.shape[1], a=tuple(a), B=rows)

    @property
    def a_array(self) -> np.ndarray:
        return np.array(self.a, dtype=complex)

    @property
    def B_array(self) -> np.ndarray:
        return np.array(self.B, dtype=complex)

    def column(self, k: int) -> np.ndarray:
        """Column ``k`` (0-based) of B."""
        return self.B_array[:, k]

    def exponent(self, j: int, k: int) -> complex:
        """Local exponent ``1 - b_{j,k}`` for 1-based row ``j`` and 0-based axis ``k``."""
        return 1 - self.B[j - 1][k]

    def drop_last_axis(self, a_shift: complex = 0) -> "Params":
        """The (m-1)-variable system with ``a + a_shift`` and ``B`` minus its last column."""
        if self.m < 2:
            raise ParamsError("cannot drop an axis from a one-variable system")
        B = self.B_array[:, :-1]
        return Params.from_arrays(self.a_array + a_shift, B)

    def to_json(self) -> dict:
        pair = lambda z: [float(z.real), float(z.imag)]
        return {
            "p": self.p,
            "m": self.m,
            "a": [pair(v) for v in self.a],
            "B": [[pair(v) for v in row] for row in self.B],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Params":
        try:
            p, m = int(doc["p"]), int(doc["m"])
            a = [_complex_pair(v) for v in doc["a"]]
            B = [[_complex_pair(v) for v in row] for row in doc["B"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParamsError(f"malformed parameter document: {exc}") from exc
        if len(B) != p or any(len(row) != m for row in B):
            raise ParamsError(f"B must be a list of {p} rows of {m} entries")
        if any(v != 1 for v in B[-1]):
            raise ParamsError("last row of B must be exactly [[1,0],...]")
        return cls(p=p, m=m, a=tuple(a), B=tuple(tuple(r) for r in B))

    @classmethod
    def load(cls, path) -> "Params":
        return cls.from_json(json.loads(Path(path).read_text()))


def _complex_pair(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError(f"complex number must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def dist_to_integers(z: complex) -> float:
    """Distance from ``z`` to the nearest integer."""
    z = complex(z)
    return abs(z - round(z.real))


@dataclass
class ValidationReport:
    ok: bool
    failures: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "failures": self.failures}


def validate_params(P: Params, tol: ToleranceProfile = ToleranceProfile()) -> ValidationReport:
    """Check standardness and column-wise exponent distinctness at threshold ``tau_gen``."""
    failures = []
    for k in range(P.m):
        for j in range(P.p - 1):
            d = dist_to_integers(P.B[j][k])
            if d <= tol.tau_gen:
                failures.append({"check": "b_not_integer", "index": [j + 1, k + 1], "distance": d})
        for i, j in itertools.combinations(range(P.p), 2):
            if i == P.p - 1 or j == P.p - 1:
                continue  # covered by b_not_integer since b_{p,k} = 1
            d = dist_to_integers(P.B[i][k] - P.B[j][k])
            if d <= tol.tau_gen:
                failures.append(
                    {"check": "column_exponents_distinct", "index": [[i + 1, k + 1], [j + 1, k + 1]], "distance": d}
                )
    return ValidationReport(ok=not failures, failures=failures)


def _check_cap(p: int, m: int, cap: int):
    if p < 2 or m < 1:
        raise ValueError(f"need p >= 2 and m >= 1, got ({p}, {m})")
    if p**m > cap:
        raise OverflowError(f"p^m = {p**m} exceeds the cap {cap}")


@lru_cache(maxsize=None)
def index_maps(p: int, m: int, cap: int = INDEX_CAP):
    """Lexicographic enumerations of J in [p]^m and alpha in {0..p-1}^m."""
    _check_cap(p, m, cap)
    J = tuple(itertools.product(range(1, p + 1), repeat=m))
    alpha = tuple(itertools.product(range(p), repeat=m))
    return J, alpha


def position(index: tuple[int, ...], p: int, offset: int = 0) -> int:
    """Lexicographic rank of ``index`` whose entries run over ``offset..offset+p-1``."""
    n = 0
    for v in index:
        n = n * p + (v - offset)
    return n


def generic_params(p: int, m: int, seed: int = 0, complex_a: bool = False) -> Params:
    """Seeded generic parameters kept away from resonance.

    Each column of B has entries in [0.6, 1.4] with fractional parts in
    [0.1, 0.9] and pairwise gaps >= 0.1 mod Z.  The entries sit near 1 so the
    local exponents 1 - b stay small, which keeps the Frobenius frame well
    scaled at the base point.
    """
    rng = np.random.default_rng([seed, p, m])

    def frac_gap(u, v):
        return dist_to_integers(u - v)

    B = np.ones((p, m), dtype=complex)
    for k in range(m):
        vals: list[float] = []
        while len(vals) < p - 1:
            v = float(rng.uniform(0.6, 1.4))
            if all(frac_gap(v, w) >= 0.1 for w in vals + [1.0]):
                vals.append(v)
        B[: p - 1, k] = vals
    while True:
        a = rng.uniform(0.1, 0.9, size=p)
        if complex_a:
            a = a + 1j * rng.uniform(-0.2, 0.2, size=p)
        special = np.sum(B[: p - 1, 0]) - np.sum(a)
        gaps = [frac_gap(ai, aj) for ai, aj in itertools.combinations(a, 2)]
        if dist_to_integers(special) >= 0.1 and min(gaps, default=1.0) >= 0.05:
            break
    return Params.from_arrays(a, B)
