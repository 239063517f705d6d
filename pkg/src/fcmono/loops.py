"""Concrete generator loops, path algebra and safety certification.

Paths are parametrized over [0, 1] and carry analytic derivatives.  A word
is traversed left letter first: ``g h`` runs along ``g`` and then ``h``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .locus import distance_to_locus
from .series import default_eps

TWO_PI_I = 2j * np.pi
# 2 pi i carried to extended precision, used when t is a longdouble
TWO_PI_I_EXT = np.clongdouble(2j) * np.arccos(np.longdouble(-1))
SAMPLES = 512
CONTINUITY_TOL = 1e-14


class SafetyError(RuntimeError):
    pass


def _extended(t) -> bool:
    return np.asarray(t).dtype in (np.longdouble, np.clongdouble)


def e(t):
    """``exp(2 pi i t)``; t may be complex.  Extended-precision t stays extended."""
    t = np.asarray(t)
    return np.exp((TWO_PI_I_EXT if _extended(t) else TWO_PI_I) * t)


def _ctype(t):
    return np.clongdouble if _extended(t) else complex


def _col(t):
    t = np.asarray(t)
    return (t if _extended(t) else t.astype(float))[..., None]


class PathSegment:
    """Smooth map [0,1] -> C^dim.  ``point`` and ``deriv`` broadcast over arrays of t."""

    dim: int

    def point(self, t) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, t) -> np.ndarray:
        raise NotImplementedError

    def dlog(self, t) -> np.ndarray:
        """Logarithmic derivative ``x'(t) / x(t)`` per coordinate."""
        return self.deriv(t) / self.point(t)

    @property
    def start(self) -> np.ndarray:
        return self.point(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.point(1.0)


@dataclass(frozen=True)
class Segment(PathSegment):
    a: np.ndarray
    b: np.ndarray

    @property
    def dim(self):
        return len(self.a)

    def point(self, t):
        return self.a + _col(t) * (self.b - self.a) if np.ndim(t) else self.a + t * (self.b - self.a)

    def deriv(self, t):
        d = self.b - self.a
        return np.broadcast_to(d, np.shape(t) + d.shape).copy()


@dataclass(frozen=True)
class Arc(PathSegment):
    """Coordinate ``k`` runs over ``c + r e(theta0 + t dtheta)``; the rest stay at ``base``."""

    base: np.ndarray
    k: int
    c: complex
    r: float
    theta0: float
    dtheta: float

    @property
    def dim(self):
        return len(self.base)

    def point(self, t):
        out = np.broadcast_to(self.base, np.shape(t) + self.base.shape).astype(_ctype(t))
        out[..., self.k] = self.c + self.r * e(self.theta0 + np.asarray(t) * self.dtheta)
        return out

    def deriv(self, t):
        out = np.zeros(np.shape(t) + self.base.shape, dtype=_ctype(t))
        two_pi_i = TWO_PI_I_EXT if _extended(t) else TWO_PI_I
        out[..., self.k] = two_pi_i * self.dtheta * self.r * e(self.theta0 + np.asarray(t) * self.dtheta)
        return out


@dataclass(frozen=True)
class LineCircle(PathSegment):
    """On the complex line ``z = origin + s * direction``: ``s(t) = s_c + r e(theta0 + t dtheta)``."""

    origin: np.ndarray
    direction: np.ndarray
    s_c: complex
    r: float
    theta0: float = 0.0
    dtheta: float = 1.0

    @property
    def dim(self):
        return len(self.origin)

    def _s(self, t):
        return self.s_c + self.r * e(self.theta0 + np.asarray(t) * self.dtheta)

    def point(self, t):
        s = self._s(t)
        return self.origin + np.asarray(s)[..., None] * self.direction

    def deriv(self, t):
        two_pi_i = TWO_PI_I_EXT if _extended(t) else TWO_PI_I
        ds = two_pi_i * self.dtheta * self.r * e(self.theta0 + np.asarray(t) * self.dtheta)
        return np.asarray(ds)[..., None] * self.direction


@dataclass(frozen=True)
class Pushforward(PathSegment):
    """Image of a z-space segment under phi(z) = z^p."""

    seg: PathSegment
    p: int

    @property
    def dim(self):
        return self.seg.dim

    def point(self, t):
        return self.seg.point(t) ** self.p

    def deriv(self, t):
        z = self.seg.point(t)
        return self.p * z ** (self.p - 1) * self.seg.deriv(t)

    def dlog(self, t):
        return self.p * self.seg.deriv(t) / self.seg.point(t)


@dataclass(frozen=True)
class Reversed(PathSegment):
    seg: PathSegment

    @property
    def dim(self):
        return self.seg.dim

    def point(self, t):
        return self.seg.point(1 - np.asarray(t))

    def deriv(self, t):
        return -self.seg.deriv(1 - np.asarray(t))

    def dlog(self, t):
        return -self.seg.dlog(1 - np.asarray(t))


@dataclass(frozen=True)
class Embedded(PathSegment):
    """Append a constant last coordinate."""

    seg: PathSegment
    value: complex

    @property
    def dim(self):
        return self.seg.dim + 1

    def point(self, t):
        pt = self.seg.point(t)
        last = np.full(pt.shape[:-1] + (1,), self.value, dtype=pt.dtype)
        return np.concatenate([pt, last], axis=-1)

    def deriv(self, t):
        d = self.seg.deriv(t)
        return np.concatenate([d, np.zeros(d.shape[:-1] + (1,), dtype=d.dtype)], axis=-1)

    def dlog(self, t):
        d = self.seg.dlog(t)
        return np.concatenate([d, np.zeros(d.shape[:-1] + (1,), dtype=d.dtype)], axis=-1)


@dataclass
class LoopPath:
    segments: list
    p: int
    space: str = "x"
    name: str = ""
    margin: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a loop needs at least one segment")
        for s1, s2 in zip(self.segments, self.segments[1:]):
            if np.max(np.abs(s1.end - s2.start)) > CONTINUITY_TOL * max(1.0, np.max(np.abs(s1.end))):
                raise ValueError(f"{self.name}: segments are not continuous")

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def base_point(self) -> np.ndarray:
        return self.segments[0].start

    @property
    def closed(self) -> bool:
        return bool(np.max(np.abs(self.segments[-1].end - self.base_point)) <= CONTINUITY_TOL)

    def inverse(self) -> "LoopPath":
        segs = [Reversed(s) for s in reversed(self.segments)]
        return LoopPath(segs, self.p, self.space, name=_invert_name(self.name), margin=self.margin)

    def __mul__(self, other: "LoopPath") -> "LoopPath":
        """Traverse ``self`` then ``other``."""
        return LoopPath(self.segments + other.segments, self.p, self.space, name=f"{self.name} {other.name}".strip())

    def sample(self, n: int = SAMPLES):
        """``(t, points)`` with t in [0, len(segments)] (segment index + local parameter)."""
        ts, pts = [], []
        local = np.linspace(0.0, 1.0, n)
        for i, seg in enumerate(self.segments):
            ts.append(i + local)
            pts.append(seg.point(local))
        return np.concatenate(ts), np.concatenate(pts)


def _invert_name(name: str) -> str:
    if not name:
        return ""
    return " ".join(f"({tok})^-1" if " " in name else f"{tok}^-1" for tok in reversed(name.split()))


def certify_margin(loop: LoopPath, n_samples: int = SAMPLES) -> float:
    """Min sampled distance to the singular locus; stored on the loop."""
    _, pts = loop.sample(n_samples)
    loop.margin = float(np.min(distance_to_locus(pts, loop.p, loop.space)))
    loop.n_samples = n_samples
    return loop.margin


def _certified(loop: LoopPath, n_samples: int = SAMPLES) -> LoopPath:
    if not loop.closed:
        raise SafetyError(f"{loop.name}: loop is not closed")
    if not certify_margin(loop, n_samples) > 0:
        raise SafetyError(f"{loop.name}: certified margin {loop.margin:.3e} is not positive")
    return loop


# -- generators -------------------------------------------------------------------


def base_z(m: int, eps: float) -> np.ndarray:
    return np.full(m, eps, dtype=complex)


def _check_eps(m: int, eps: float):
    if not 0 < eps <= default_eps(m) + 1e-15:
        raise SafetyError(f"eps={eps} must lie in (0, 1/(4m)] = (0, {default_eps(m)}]")


def lift_rho_k(p: int, m: int, k: int, eps: float | None = None) -> PathSegment:
    """z-space path from z0 to sigma_k z0: coordinate k runs over e(t/p) eps."""
    eps = default_eps(m) if eps is None else eps
    return Arc(base_z(m, eps), k, 0.0, eps, 0.0, 1.0 / p)


def loop_rho_k(p: int, m: int, k: int, eps: float | None = None, n_samples: int = SAMPLES) -> LoopPath:
    """Circle of radius eps^p in x_k about 0, other coordinates pinned at eps^p (0-based k)."""
    eps = default_eps(m) if eps is None else eps
    _check_eps(m, eps)
    if not 0 <= k < m:
        raise IndexError(f"axis {k} out of range for m={m}")
    base = np.full(m, eps**p, dtype=complex)
    arc = Arc(base, k, 0.0, eps**p, 0.0, 1.0)
    return _certified(LoopPath([arc], p, "x", name=f"r{k + 1}"), n_samples)


def lift_rho_0(p: int, m: int, eps: float | None = None, delta: float | None = None) -> list[PathSegment]:
    """z-space loop on the line through z0 (s=1) and (1/m,...,1/m) (s=0)."""
    eps = default_eps(m) if eps is None else eps
    delta = eps / 8 if delta is None else delta
    z0 = base_z(m, eps)
    q = np.full(m, 1.0 / m, dtype=complex)
    d = z0 - q
    beta = q + delta * d
    return [
        Segment(z0, beta),
        LineCircle(q, d, 0.0, delta),
        Segment(beta, z0),
    ]


def loop_rho_0(p: int, m: int, eps: float | None = None, delta: float | None = None, n_samples: int = SAMPLES) -> LoopPath:
    """phi_* of the z-space loop turning once positively around H_(0,...,0)."""
    eps = default_eps(m) if eps is None else eps
    delta = eps / 8 if delta is None else delta
    _check_eps(m, eps)
    if not 0 < delta < 1:
        raise SafetyError(f"delta={delta} must lie in (0, 1)")
    segs = [Pushforward(s, p) for s in lift_rho_0(p, m, eps, delta)]
    return _certified(LoopPath(segs, p, "x", name="r0"), n_samples)


def iota_infty_embed(loop: LoopPath, eps: float, p: int, n_samples: int = SAMPLES) -> LoopPath:
    """Append the constant coordinate x_m = eps^p and re-certify in the bigger space."""
    segs = [Embedded(s, eps**p) for s in loop.segments]
    out = LoopPath(segs, p, loop.space, name=f"iota({loop.name})")
    return _certified(out, n_samples)


def embedding_delta(m: int, eps: float, delta: float) -> float:
    """Line parameter of the (m-1)-variable rho_0' circle used under iota_infty.

    With x_m = eps^p the p points where H_(0,..,0,i) meets the embedded line
    sit at radius eps / (1 - (m-1) eps) in the line coordinate; the circle
    passes outside them at distance ``delta`` in the unnormalized coordinate.
    """
    return (eps + delta) / (1 - (m - 1) * eps)


def loop_iota_rho_0(p: int, m: int, eps: float | None = None, delta: float | None = None, n_samples: int = SAMPLES) -> LoopPath:
    """iota_infty(rho_0') for the m-variable system (m >= 2)."""
    if m < 2:
        raise ValueError("iota_infty needs m >= 2")
    eps = default_eps(m) if eps is None else eps
    delta = eps / 8 if delta is None else delta
    _check_eps(m, eps)
    if m > 2 and not eps < math.sin(math.pi / p) / (2 * (m - 1)):
        raise SafetyError(f"eps={eps} violates eps < sin(pi/p)/(2(m-1))")
    d_prime = embedding_delta(m, eps, delta)
    segs = [Pushforward(s, p) for s in lift_rho_0(p, m - 1, eps, d_prime)]
    inner = LoopPath(segs, p, "x", name="r0'")
    return iota_infty_embed(inner, eps, p, n_samples)


# -- words ------------------------------------------------------------------------

_LETTER = re.compile(r"^r(\d+)(?:\^(-?\d+))?$")


@dataclass(frozen=True)
class LoopWord:
    letters: tuple[tuple[int, int], ...]  # (generator index, +1 or -1)
    m: int | None = field(default=None, compare=False)

    @classmethod
    def parse(cls, text: str, m: int | None = None) -> "LoopWord":
        letters = []
        for tok in text.split():
            mt = _LETTER.match(tok)
            if not mt:
                raise ValueError(f"bad letter {tok!r}; expected r<k> or r<k>^<int>")
            g, n = int(mt.group(1)), int(mt.group(2) or 1)
            if m is not None and g > m:
                raise ValueError(f"generator r{g} out of range 0..{m}")
            letters.extend([(g, 1 if n > 0 else -1)] * abs(n))
        return cls(tuple(letters), m)

    def inverse(self) -> "LoopWord":
        return LoopWord(tuple((g, -s) for g, s in reversed(self.letters)), self.m)

    def __mul__(self, other: "LoopWord") -> "LoopWord":
        return LoopWord(self.letters + other.letters, self.m)

    def __str__(self) -> str:
        return " ".join(f"r{g}" if s > 0 else f"r{g}^-1" for g, s in self.letters)


def generator_library(p: int, m: int, eps: float | None = None, delta: float | None = None, n_samples: int = SAMPLES) -> dict:
    """``{0: rho_0, 1: rho_1, ..., m: rho_m}`` (1-based axis labels as in words)."""
    lib = {0: loop_rho_0(p, m, eps, delta, n_samples)}
    for k in range(m):
        lib[k + 1] = loop_rho_k(p, m, k, eps, n_samples)
    return lib


def compile_word(word: LoopWord, library: dict, n_samples: int = SAMPLES) -> LoopPath:
    """Concatenate generator loops, left letter first; inverse letters are time-reversed."""
    if not word.letters:
        any_loop = next(iter(library.values()))
        bp = any_loop.base_point
        const = LoopPath([Segment(bp, bp)], any_loop.p, any_loop.space, name="1")
        return _certified(const, n_samples)
    segs = []
    for g, s in word.letters:
        if g not in library:
            raise KeyError(f"no generator r{g} in the library")
        loop = library[g] if s > 0 else library[g].inverse()
        segs.extend(loop.segments)
    p = library[word.letters[0][0]].p
    out = LoopPath(segs, p, "x", name=str(word))
    return _certified(out, n_samples)


def winding_number(values: np.ndarray) -> float:
    """Winding of a closed sampled curve around 0."""
    ang = np.unwrap(np.angle(values))
    return float((ang[-1] - ang[0]) / (2 * np.pi))
