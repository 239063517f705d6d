"""Fix the two global conventions from reference runs.

1. Orientation s with spec((M0 M1)^s) = {e(a_j)} in the Gauss case.
2. Ordering of the product of the conjugates M_m^j M0 M_m^-j that matches the
   directly transported N0 on the generic grid.

The results are the constants PINNED_ORIENTATION and PINNED_CONVENTION.
"""
from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass, field

from fcmono.loops import loop_iota_rho_0
from fcmono.params import ToleranceProfile, generic_params
from fcmono.relations import (
    PINNED_CONVENTION,
    PINNED_ORIENTATION,
    canonical_gauge,
    pin_orientation,
    product_candidates,
    relative_residual,
    to_gauge,
)
from fcmono.transport import GeneratorCache, transport_frame


@dataclass
class Config:
    grid: list = field(default_factory=lambda: [(2, 2), (3, 2), (2, 3)])
    seed: int = 0
    ode_tol: float = 1e-10


def ordering_residuals(p: int, m: int, seed: int, tol: ToleranceProfile) -> dict:
    P = generic_params(p, m, seed)
    mats = GeneratorCache(P, tol).matrices()
    N0 = transport_frame(P, loop_iota_rho_0(p, m), tol).M
    g = canonical_gauge(mats[0])
    cands = product_candidates(to_gauge(mats[0], g), to_gauge(mats[m], g), p)
    return {name: relative_residual(to_gauge(N0, g), X) for name, X in cands.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    cfg = Config(seed=args.seed)
    tol = ToleranceProfile(ode_tol=cfg.ode_tol)
    orientation, gaps = pin_orientation(tol)
    orderings = {f"{p},{m}": ordering_residuals(p, m, cfg.seed, tol) for p, m in cfg.grid}
    print(json.dumps({"config": asdict(cfg), "orientation_gaps": gaps, "orientation": orientation, "orderings": orderings}, indent=2))
    best = {min(r, key=r.get) for r in orderings.values()}
    assert orientation == PINNED_ORIENTATION, "orientation differs from the pinned constant"
    assert best == {PINNED_CONVENTION}, "ordering differs from the pinned constant"


if __name__ == "__main__":
    main()
