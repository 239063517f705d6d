"""How circuit matrices move as ode_tol shrinks, with step statistics.

For each grid point the generator matrices (and N0 for m >= 2) are computed
at a ladder of tolerances; the table reports the max-norm change against the
tightest run and the integrator work.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field

import numpy as np

from fcmono.loops import loop_iota_rho_0
from fcmono.params import ToleranceProfile, generic_params
from fcmono.transport import GeneratorCache, transport_frame


@dataclass
class Config:
    grid: list = field(default_factory=lambda: [(2, 1), (3, 1), (2, 2), (3, 2), (2, 3)])
    tolerances: tuple = (1e-8, 1e-9, 1e-10, 5e-11, 2.5e-11)
    seed: int = 0


def circuits(P, tol):
    cache = GeneratorCache(P, tol)
    out = {f"M{g}": cache.circuit(g) for g in cache.library}
    if P.m >= 2:
        out["N0"] = transport_frame(P, loop_iota_rho_0(P.p, P.m), tol)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    cfg = Config(seed=args.seed)
    for p, m in cfg.grid:
        P = generic_params(p, m, cfg.seed)
        runs = {t: circuits(P, ToleranceProfile(ode_tol=t)) for t in cfg.tolerances}
        ref = runs[cfg.tolerances[-1]]
        print(f"(p,m)=({p},{m})")
        print(f"  {'ode_tol':>9} {'max change':>11} {'steps':>7} {'rejected':>8}")
        for t, cms in runs.items():
            change = max(float(np.max(np.abs(cm.M - ref[k].M))) for k, cm in cms.items())
            steps = sum(cm.diagnostics["steps"] for cm in cms.values())
            rej = sum(cm.diagnostics["rejected"] for cm in cms.values())
            print(f"  {t:9.1e} {change:11.2e} {steps:7d} {rej:8d}")


if __name__ == "__main__":
    main()
