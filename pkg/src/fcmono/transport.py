"""Parallel transport of the Frobenius frame along loops and circuit matrices.

Along a path x(t) every frame vector ``v = (theta^alpha f)_alpha`` obeys

    v'(t) = A(t) v(t),   A(t) = sum_k (x_k'(t) / x_k(t)) C_k(x(t)).

The frame matrix ``V0 = W(x0)^T`` (columns are the Phi_J frames) is carried
around the loop with an adaptive DOP853 stepper in extended precision, and
the continued row vector of solutions is ``Phi M`` with ``M = V0^-1 V(1)``.

The theta^alpha components of a frame differ in size by orders of magnitude
near the origin, so the columns are integrated in row-equilibrated
coordinates ``D^-1 v``, which balances the error control across components.

Words are traversed left letter first and matrices act on the right of the
row vector, so continuation along ``g h`` gives ``M(g h) = M(h) M(g)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connection import (
    FrameDimensionError,
    NearSingularElimination,
    connection_at,
    connection_fast,
    default_degree_bound,
    relation_system,
)
from .loops import LoopPath, LoopWord, compile_word, generator_library
from .ode import CEXT, IntegrationFailure, StepStats, integrate
from .params import Params, ToleranceProfile
from .series import base_point, default_eps, equilibrate, frame_matrix

# the stepper runs this much tighter than ode_tol so reported matrices stay
# within a small multiple of ode_tol after the frame change of basis
INTEGRATOR_SAFETY = 1e-3


class StepCollapse(RuntimeError):
    pass


class SelfTestError(RuntimeError):
    pass


@dataclass
class CircuitMatrix:
    name: str
    M: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _rhs_factory(P: Params, seg, rs, tol, scale):
    ratio = (scale[None, :] / scale[:, None]).astype(CEXT)

    def rhs(t, Y):
        x = seg.point(t)
        dl = seg.dlog(t)
        try:
            C = connection_fast(rs, x, tol, extended=True)
        except (NearSingularElimination, FrameDimensionError):
            C = connection_at(P, x, rs.d_max + 1, tol).C.astype(CEXT)
        A = np.tensordot(dl, C, axes=(0, 0)) * ratio
        return A @ Y

    return rhs


def carry(
    P: Params,
    segments,
    Y0: np.ndarray,
    tol: ToleranceProfile = ToleranceProfile(),
    d_max: int | None = None,
    scale: np.ndarray | None = None,
):
    """Carry the columns of ``Y0`` (frame vectors) along consecutive segments.

    ``scale`` is the diagonal coordinate change used during integration; it
    only affects how the local error is weighted.
    """
    n = Y0.shape[0]
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
    rs = relation_system(P, d_max or default_degree_bound(P.p, P.m))
    itol = tol.ode_tol * INTEGRATOR_SAFETY
    stats = StepStats()
    y = np.asarray(Y0, dtype=CEXT) / scale[:, None]
    for seg in segments:
        try:
            y = integrate(_rhs_factory(P, seg, rs, tol, scale), y, itol, itol, stats)
        except IntegrationFailure as exc:
            raise StepCollapse(str(exc)) from exc
    out = (y * scale[:, None]).astype(complex)
    return out, {"steps": stats.steps, "rejected": stats.rejected, "nfev": stats.nfev}


def fundamental_matrix(P: Params, loop: LoopPath, tol: ToleranceProfile = ToleranceProfile(), d_max: int | None = None):
    """Psi(1) for ``v' = A v`` along the loop (Psi(0) = I), with diagnostics."""
    Psi, diag = carry(P, loop.segments, np.eye(P.p**P.m), tol, d_max)
    diag["endpoint_defect"] = float(np.max(np.abs(loop.segments[-1].end - loop.base_point)))
    return Psi, diag


def transport_frame(
    P: Params,
    loop: LoopPath,
    tol: ToleranceProfile = ToleranceProfile(),
    d_max: int | None = None,
) -> CircuitMatrix:
    """Circuit matrix of ``loop`` in the Phi_J basis (row vector, right action)."""
    if loop.margin is None or not loop.margin > 0:
        raise ValueError(f"{loop.name}: loop is not certified")
    frame = frame_matrix(P, loop.base_point, tol=tol)
    V0 = frame.W.T
    r, c, U = equilibrate(V0)
    V1, diag = carry(P, loop.segments, V0, tol, d_max, scale=r)
    # V0 = D U E with D = diag(r), E = diag(c)
    Ms = np.linalg.solve(U, (V1 / r[:, None]) / c[None, :])
    M = Ms * c[None, :] / c[:, None]
    diag |= {
        "endpoint_defect": float(np.max(np.abs(loop.segments[-1].end - loop.base_point))),
        "frame_cond": frame.cond,
        "frame_cond_scaled": frame.cond_scaled,
        "margin": loop.margin,
    }
    return CircuitMatrix(loop.name, M, diag)


def word_matrix(word: LoopWord, gens: dict) -> np.ndarray:
    """Matrix of a word from generator matrices: ``M(g h) = M(h) M(g)``."""
    n = next(iter(gens.values())).shape[0]
    M = np.eye(n, dtype=complex)
    inverses: dict = {}
    for g, s in word.letters:
        if s > 0:
            G = gens[g]
        else:
            if g not in inverses:
                inverses[g] = np.linalg.inv(gens[g])
            G = inverses[g]
        M = G @ M
    return M


class GeneratorCache:
    """Circuit matrices M_0..M_m computed once per (params, tolerance, eps, delta)."""

    def __init__(self, P: Params, tol: ToleranceProfile = ToleranceProfile(), eps=None, delta=None, threads: int = 1):
        self.P, self.tol = P, tol
        self.eps = default_eps(P.m) if eps is None else eps
        self.delta = self.eps / 8 if delta is None else delta
        self.threads = max(1, int(threads))
        self._library = None
        self._mats: dict[int, CircuitMatrix] = {}

    @property
    def library(self) -> dict:
        if self._library is None:
            self._library = generator_library(self.P.p, self.P.m, self.eps, self.delta)
        return self._library

    def matrices(self) -> dict[int, np.ndarray]:
        missing = [g for g in self.library if g not in self._mats]
        if missing:
            work = lambda g: (g, transport_frame(self.P, self.library[g], self.tol))
            if self.threads > 1:
                with ThreadPoolExecutor(self.threads) as ex:
                    results = list(ex.map(work, missing))
            else:
                results = [work(g) for g in missing]
            for g, cm in sorted(results, key=lambda r: r[0]):
                self._mats[g] = cm
        return {g: self._mats[g].M for g in sorted(self._mats)}

    def circuit(self, g: int) -> CircuitMatrix:
        if g not in self._mats:
            self._mats[g] = transport_frame(self.P, self.library[g], self.tol)
        return self._mats[g]


def transport_word(
    P: Params,
    word: LoopWord | str,
    tol: ToleranceProfile = ToleranceProfile(),
    cache: GeneratorCache | None = None,
    mode: str = "product",
) -> CircuitMatrix:
    """Circuit matrix of a word.

    ``mode`` is ``"product"`` (cached generator matrices), ``"compiled"``
    (transport along the concatenated loop) or ``"self-test"`` (both, which
    must agree to ``residual_tol``).
    """
    if isinstance(word, str):
        word = LoopWord.parse(word, P.m)
    cache = cache or GeneratorCache(P, tol)
    out_prod = out_comp = None
    if mode in ("product", "self-test"):
        out_prod = word_matrix(word, cache.matrices())
    if mode in ("compiled", "self-test"):
        loop = compile_word(word, cache.library)
        out_comp = transport_frame(P, loop, tol)
    if mode == "product":
        return CircuitMatrix(str(word), out_prod, {"mode": mode})
    if mode == "compiled":
        out_comp.diagnostics["mode"] = mode
        return out_comp
    if mode != "self-test":
        raise ValueError(f"unknown mode {mode!r}")
    gap = float(np.max(np.abs(out_prod - out_comp.M)) / max(1.0, np.max(np.abs(out_comp.M))))
    if not gap < tol.residual_tol:
        raise SelfTestError(f"{word}: product and compiled transports differ by {gap:.3e}")
    out_comp.diagnostics |= {"mode": mode, "self_test_gap": gap}
    return out_comp


def base_frame(P: Params, eps: float | None = None, tol: ToleranceProfile = ToleranceProfile()):
    return frame_matrix(P, base_point(P.p, P.m, eps), tol=tol)
