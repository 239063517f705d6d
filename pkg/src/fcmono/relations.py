"""Matrix-level checks of the monodromy relations.

All residuals are ``|LHS - RHS|_max / max(1, |LHS|_max)``, evaluated after the
matrices are moved to a canonical gauge (see ``canonical_gauge``) so that they
do not depend on how each Phi_J is normalized.

Matrix products follow the transport convention ``M(g h) = M(h) M(g)``.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import linear_sum_assignment

from .loops import LoopWord, e, loop_iota_rho_0
from .operators import build_operator
from .params import Params, ToleranceProfile, index_maps, validate_params
from .transport import GeneratorCache, transport_frame, transport_word, word_matrix

# The m = 1 cross-check compares spec((M0 M1)^s) with {e(a_j)}; s was fixed
# once on the Gauss case (see scripts/pin_orientation.py and pin_orientation).
PINNED_ORIENTATION = -1
# ordering of the conjugate product that matches the transported N0, fixed the
# same way on the generic grid (see scripts/pin_orientation.py)
PINNED_CONVENTION = "ascending"
# eigenvalue clustering radius for the multiplicity of 1 in spec(M0)
CLUSTER_TOL = 1e-6
DIAGONAL_TOL = 1e-8

CHECK_NAMES = (
    "validation",
    "diagonal",
    "commutation",
    "braidlike",
    "reflection",
    "product_formula",
    "product_commutes",
    "induction",
    "infinity_oracle",
    "self_test",
)


class ConventionAmbiguous(RuntimeError):
    pass


class ShiftNotStandard(ValueError):
    pass


@dataclass
class CheckResult:
    name: str
    residual: float | None
    passed: bool
    applicable: bool = True
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "passed": self.passed,
            "applicable": self.applicable,
            "diagnostics": self.diagnostics,
        }


def not_applicable(name: str, reason: str) -> CheckResult:
    return CheckResult(name, None, True, applicable=False, diagnostics={"reason": reason})


@dataclass
class RelationReport:
    params: Params
    checks: list[CheckResult]
    convention: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> list[CheckResult]:
        return [c for c in self.checks if c.name == name]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "convention": self.convention,
            "checks": [c.as_dict() for c in self.checks],
        }

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            if not c.applicable:
                status, res = "n/a ", "-"
            else:
                status = "PASS" if c.passed else "FAIL"
                res = "-" if c.residual is None else f"{c.residual:.3e}"
            label = c.name + (f"[{c.diagnostics['label']}]" if "label" in c.diagnostics else "")
            lines.append(f"{status}  {label:<32} {res}")
        return "\n".join(lines)


def relative_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.max(np.abs(lhs - rhs)) / max(1.0, float(np.max(np.abs(lhs)))))


# -- gauge --------------------------------------------------------------------------


def canonical_gauge(M0: np.ndarray) -> np.ndarray:
    """Diagonal gauge g with ``diag(g) (M0 - I) diag(g)^-1`` having constant rows.

    ``M0 - I`` is (numerically) ``u w^T``.  Rescaling the basis by a diagonal D
    sends w to D w, so ``g = w`` (up to a scalar) undoes any such rescaling.
    """
    _, s, Vh = np.linalg.svd(M0 - np.eye(len(M0)))
    w = Vh[0].copy()  # row space of M0 - I is spanned by conj(v1)^T = Vh[0]
    if s[0] == 0 or np.min(np.abs(w)) < 1e-8 * np.max(np.abs(w)):
        return np.ones(len(M0), dtype=complex)
    return w / w[np.argmax(np.abs(w))]


def to_gauge(M: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g[:, None] * M / g[None, :]


# -- individual checks ---------------------------------------------------------------


def check_commutation(Mk: np.ndarray, Mk2: np.ndarray, tol: ToleranceProfile = ToleranceProfile(), label: str = "") -> CheckResult:
    r = relative_residual(Mk @ Mk2, Mk2 @ Mk)
    return CheckResult("commutation", r, r < tol.residual_tol, diagnostics={"label": label} if label else {})


def check_braidlike(M0: np.ndarray, Mk: np.ndarray, p: int, tol: ToleranceProfile = ToleranceProfile(), label: str = "") -> CheckResult:
    if p < 2:
        raise ValueError("p must be >= 2")
    mp = np.linalg.matrix_power
    r = relative_residual(mp(M0 @ Mk, p), mp(Mk @ M0, p))
    return CheckResult("braidlike", r, r < tol.residual_tol, diagnostics={"label": label} if label else {})


def check_diagonal(Mk: np.ndarray, P: Params, k: int, tol: ToleranceProfile = ToleranceProfile()) -> CheckResult:
    """``M_k`` (k = 1..m) against ``diag(e(1 - b_{j_k,k}))`` over the Phi_J basis."""
    Js, _ = index_maps(P.p, P.m)
    target = np.diag([e(P.exponent(J[k - 1], k - 1)) for J in Js])
    err = float(np.max(np.abs(Mk - target)))
    off = float(np.max(np.abs(Mk - np.diag(np.diag(Mk)))))
    return CheckResult(
        "diagonal",
        err,
        err < DIAGONAL_TOL and off < tol.residual_tol,
        diagnostics={"label": f"M{k}", "off_diagonal": off},
    )


def product_candidates(M0: np.ndarray, Mm: np.ndarray, p: int) -> dict[str, np.ndarray]:
    """Both orderings of the product of the conjugates ``M_m^j M_0 M_m^-j``, j = 0..p-1."""
    mp = np.linalg.matrix_power
    Mi = np.linalg.inv(Mm)
    factors = [mp(Mm, j) @ M0 @ mp(Mi, j) for j in range(p)]
    out = {}
    for name, seq in (("ascending", factors), ("descending", factors[::-1])):
        acc = np.eye(len(M0), dtype=complex)
        for F in seq:
            acc = acc @ F
        out[name] = acc
    return out


def check_product_formula(M0, Mm, N0, p: int, tol: ToleranceProfile = ToleranceProfile()):
    """Returns ``(formula_check, commute_check, convention)``.

    The convention is the ordering whose product matches the directly
    transported N0.  Raises ConventionAmbiguous if both orderings match.
    """
    cands = product_candidates(M0, Mm, p)
    res = {name: relative_residual(N0, X) for name, X in cands.items()}
    matched = [name for name, r in res.items() if r < tol.residual_tol]
    if len(matched) > 1:
        raise ConventionAmbiguous(f"both orderings match N0 (residuals {res})")
    convention = matched[0] if matched else min(res, key=res.get)
    formula = CheckResult(
        "product_formula", res[convention], bool(matched), diagnostics={"candidates": res, "convention": convention}
    )
    rc = relative_residual(N0 @ Mm, Mm @ N0)
    commute = CheckResult("product_commutes", rc, rc < tol.residual_tol)
    return formula, commute, convention if matched else None


def check_reflection(M0: np.ndarray, tol: ToleranceProfile = ToleranceProfile()) -> CheckResult:
    """Rank one of ``M0 - I`` and the special eigenvalue."""
    n = len(M0)
    s = np.linalg.svd(M0 - np.eye(n), compute_uv=False)
    det = complex(np.linalg.det(M0))
    ev = np.linalg.eigvals(M0)
    mult = int(np.sum(np.abs(ev - 1) < CLUSTER_TOL))
    diag = {"singular_values": s.tolist(), "det": det, "eigenvalue_one_multiplicity": mult}
    if s[0] == 0:
        return CheckResult("reflection", None, False, diagnostics=diag | {"degenerate": True})
    ratio = float(s[1] / s[0]) if n > 1 else 0.0
    special = ev[np.argmax(np.abs(ev - 1))]
    diag |= {"special_eigenvalue": complex(special), "special_vs_det": float(abs(special - det))}
    return CheckResult("reflection", ratio, ratio < tol.rank_tol and mult >= n - 1, diagnostics=diag)


# -- eigenspace induction ------------------------------------------------------------


@dataclass
class EigenspaceSplit:
    eigenvalues: np.ndarray  # mu_j = e(1 - b_{j,m}), j = 1..p
    bases: list[np.ndarray]  # orthonormal columns spanning V_j
    dims: list[int]


def eigenspace_split(Mm: np.ndarray, P: Params, tol: ToleranceProfile = ToleranceProfile()) -> EigenspaceSplit:
    n = len(Mm)
    mus = np.array([e(P.exponent(j, P.m - 1)) for j in range(1, P.p + 1)])
    bases, dims = [], []
    for mu in mus:
        _, s, Vh = np.linalg.svd(Mm - mu * np.eye(n))
        null = s < tol.rank_tol * max(1.0, s[0])
        bases.append(Vh[null].conj().T)
        dims.append(int(null.sum()))
    return EigenspaceSplit(mus, bases, dims)


def match_spectra(ev1, ev2) -> float:
    """Largest pairwise gap after optimal assignment of two eigenvalue multisets."""
    ev1, ev2 = np.asarray(ev1), np.asarray(ev2)
    if len(ev1) != len(ev2):
        return float("inf")
    cost = np.abs(ev1[:, None] - ev2[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def shifted_system(P: Params, j: int, tol: ToleranceProfile = ToleranceProfile()) -> Params:
    """The (m-1)-system attached to the eigenvalue e(1 - b_{j,m})."""
    Q = P.drop_last_axis(1 - P.B[j - 1][P.m - 1])
    rep = validate_params(Q, tol)
    if not rep.ok:
        raise ShiftNotStandard(f"shifted system for j={j} fails validation: {rep.failures}")
    return Q


def eigenspace_induction_check(
    P: Params,
    Mm: np.ndarray,
    N0: np.ndarray,
    tol: ToleranceProfile = ToleranceProfile(),
    threads: int = 1,
    sub_M0: dict | None = None,
) -> list[CheckResult]:
    """Split by M_m, check N0 preserves the split, match each block's spectrum with M'_0.

    ``sub_M0`` may supply precomputed M'_0 matrices keyed by j.
    """
    if P.m < 2:
        return [not_applicable("induction", "m = 1")]
    split = eigenspace_split(Mm, P, tol)
    n = len(Mm)
    out = []
    dims_ok = all(d == P.p ** (P.m - 1) for d in split.dims)
    out.append(
        CheckResult("induction", None, dims_ok and sum(split.dims) == n, diagnostics={"label": "dims", "dims": split.dims})
    )
    if sum(split.dims) != n:
        return out
    T = np.hstack(split.bases)
    Nb = np.linalg.solve(T, N0 @ T)
    edges = np.cumsum([0] + split.dims)
    mask = np.ones((n, n), dtype=bool)
    for lo, hi in itertools.pairwise(edges):
        mask[lo:hi, lo:hi] = False
    off = float(np.max(np.abs(Nb[mask]), initial=0.0)) / max(1.0, float(np.max(np.abs(Nb))))
    out.append(CheckResult("induction", off, off < tol.residual_tol, diagnostics={"label": "block"}))

    def sub_run(j):
        if sub_M0 is not None and j in sub_M0:
            return j, sub_M0[j], None
        try:
            Q = shifted_system(P, j, tol)
        except ShiftNotStandard as exc:
            return j, None, str(exc)
        return j, GeneratorCache(Q, tol).circuit(0).M, None

    js = range(1, P.p + 1)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(sub_run, js))
    else:
        runs = [sub_run(j) for j in js]
    for (j, Mp, err), lo, hi in zip(runs, edges[:-1], edges[1:]):
        label = f"spectrum j={j}"
        if Mp is None:
            out.append(CheckResult("induction", None, True, applicable=False, diagnostics={"label": label, "reason": err}))
            continue
        gap = match_spectra(np.linalg.eigvals(Nb[lo:hi, lo:hi]), np.linalg.eigvals(Mp))
        out.append(CheckResult("induction", gap, gap < tol.residual_tol, diagnostics={"label": label}))
    return out


# -- one-variable cross-check ------------------------------------------------------


def exponents_at_infinity(P: Params) -> np.ndarray:
    """Local exponents ``a_j`` at infinity of the one-variable operator.

    Near infinity ``A(theta) f`` dominates, so f ~ x^s with A(s) = 0; the
    roots come from the companion matrix of A and equal ``-a_j``.
    """
    op = build_operator(P, 0)
    roots = np.linalg.eigvals(npoly.polycompanion(np.asarray(op.A_coeffs)))
    return -roots


def infinity_spectrum_gap(P: Params, M0: np.ndarray, M1: np.ndarray, orientation: int) -> float:
    prod = M0 @ M1
    if orientation < 0:
        prod = np.linalg.inv(prod)
    return match_spectra(np.linalg.eigvals(prod), e(exponents_at_infinity(P)))


def check_infinity_oracle(P: Params, M0, M1, tol: ToleranceProfile = ToleranceProfile(), orientation: int = PINNED_ORIENTATION) -> CheckResult:
    if P.m != 1:
        return not_applicable("infinity_oracle", "m > 1")
    gap = infinity_spectrum_gap(P, M0, M1, orientation)
    return CheckResult("infinity_oracle", gap, gap < tol.residual_tol, diagnostics={"orientation": orientation})


def gauss_params(a1=0.31, a2=0.57, c=0.83) -> Params:
    return Params.from_arrays([a1, a2], [[c], [1.0]])


def pin_orientation(tol: ToleranceProfile = ToleranceProfile()) -> tuple[int, dict]:
    """Determine the sign s for which spec((M0 M1)^s) = {e(a_j)} in the Gauss case."""
    P = gauss_params()
    mats = GeneratorCache(P, tol).matrices()
    gaps = {s: infinity_spectrum_gap(P, mats[0], mats[1], s) for s in (1, -1)}
    good = [s for s, g in gaps.items() if g < tol.residual_tol]
    if len(good) != 1:
        raise ConventionAmbiguous(f"orientation not determined: {gaps}")
    return good[0], gaps


# -- aggregate -----------------------------------------------------------------------


def matrix_checks(
    P: Params,
    mats: dict[int, np.ndarray],
    N0: np.ndarray | None,
    tol: ToleranceProfile = ToleranceProfile(),
    checks=CHECK_NAMES,
    threads: int = 1,
    sub_M0: dict | None = None,
) -> RelationReport:
    """All matrix-level checks from generator matrices (and N0 for m >= 2)."""
    p, m = P.p, P.m
    g = canonical_gauge(mats[0])
    G = {k: to_gauge(M, g) for k, M in mats.items()}
    out: list[CheckResult] = []
    convention = None
    if "diagonal" in checks:
        out += [check_diagonal(mats[k], P, k, tol) for k in range(1, m + 1)]
    if "commutation" in checks:
        for k, k2 in itertools.combinations(range(1, m + 1), 2):
            out.append(check_commutation(G[k], G[k2], tol, f"M{k},M{k2}"))
        if m == 1:
            out.append(not_applicable("commutation", "single axis"))
    if "braidlike" in checks:
        for k in range(1, m + 1):
            res = check_braidlike(G[0], G[k], p, tol, f"M0,M{k}")
            if m == 1:
                # the relation comes from the reduction to m-1 variables; for one
                # variable pi_1 of C minus {0, 1} is free and it does not hold
                res = CheckResult(
                    "braidlike",
                    None,
                    True,
                    applicable=False,
                    diagnostics={"label": f"M0,M{k}", "reason": "needs m >= 2", "observed_residual": res.residual},
                )
            out.append(res)
    if "reflection" in checks:
        out.append(check_reflection(G[0], tol))
    want_prod = "product_formula" in checks or "product_commutes" in checks
    if want_prod and m >= 2 and N0 is not None:
        f, c, convention = check_product_formula(G[0], G[m], to_gauge(N0, g), p, tol)
        out += [x for x in (f, c) if x.name in checks]
    elif want_prod:
        out.append(not_applicable("product_formula", "m = 1" if m == 1 else "N0 not computed"))
    if "induction" in checks:
        if m >= 2 and N0 is not None:
            out += eigenspace_induction_check(P, G[m], to_gauge(N0, g), tol, threads, sub_M0)
        else:
            out.append(not_applicable("induction", "m = 1" if m == 1 else "N0 not computed"))
    if "infinity_oracle" in checks:
        out.append(check_infinity_oracle(P, mats[0], mats[1], tol) if m == 1 else not_applicable("infinity_oracle", "m > 1"))
    return RelationReport(P, out, convention)


def full_report(
    P: Params,
    tol: ToleranceProfile = ToleranceProfile(),
    checks=CHECK_NAMES,
    threads: int = 1,
    cache: GeneratorCache | None = None,
) -> RelationReport:
    """Validate, transport the generators (and N0), and run every requested check."""
    checks = tuple(checks)
    unknown = set(checks) - set(CHECK_NAMES)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {', '.join(CHECK_NAMES)}")
    rep = validate_params(P, tol)
    head = [CheckResult("validation", None, rep.ok, diagnostics={"failures": rep.failures})]
    if not rep.ok:
        return RelationReport(P, head + [not_applicable(c, "validation failed") for c in checks if c != "validation"])
    cache = cache or GeneratorCache(P, tol, threads=threads)
    mats = cache.matrices()
    N0 = None
    if P.m >= 2 and {"product_formula", "product_commutes", "induction"} & set(checks):
        N0 = transport_frame(P, loop_iota_rho_0(P.p, P.m, cache.eps, cache.delta), tol).M
    report = matrix_checks(P, mats, N0, tol, checks, threads)
    report.checks = head + report.checks
    if "self_test" in checks:
        word = " ".join(f"r{k}" for k in range(P.m + 1))
        cm = transport_word(P, word, tol, cache, mode="compiled")
        gap = relative_residual(cm.M, word_matrix(LoopWord.parse(word, P.m), mats))
        report.checks.append(
            CheckResult("self_test", gap, gap < tol.residual_tol, diagnostics={"label": word})
        )
    return report
