"""Full relation report on the (p, m) grid for several seeded parameter sets."""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, field

from fcmono.params import ToleranceProfile, generic_params
from fcmono.relations import full_report


@dataclass
class Config:
    grid: list = field(default_factory=lambda: [(2, 1), (3, 1), (2, 2), (3, 2), (2, 3)])
    seeds: tuple = (0, 1, 2)
    ode_tol: float = 1e-10
    threads: int = 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=list(Config.seeds))
    ap.add_argument("--threads", type=int, default=Config.threads)
    ap.add_argument("--verbose", action="store_true", help="print every check")
    args = ap.parse_args()
    cfg = Config(seeds=tuple(args.seeds), threads=args.threads)
    tol = ToleranceProfile(ode_tol=cfg.ode_tol)
    ok = True
    for p, m in cfg.grid:
        for seed in cfg.seeds:
            t0 = time.perf_counter()
            rep = full_report(generic_params(p, m, seed), tol, threads=cfg.threads)
            ok &= rep.passed
            print(f"(p,m)=({p},{m}) seed={seed} passed={rep.passed} convention={rep.convention} {time.perf_counter() - t0:.1f}s")
            if args.verbose or not rep.passed:
                print("  " + rep.summary().replace("\n", "\n  "))
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
