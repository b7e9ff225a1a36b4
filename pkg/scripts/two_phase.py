"""Phase 1 on a coefficient grid, phase 2 at chosen targets, vanilla PINN
alongside; prints an abs/rel error table and writes it as CSV.

    python scripts/two_phase.py convection --targets 30 35 40
    python scripts/two_phase.py helmholtz --phase1-epochs 9000 --phase2-epochs 10 --targets 2.5
    python scripts/two_phase.py reaction --targets 5
"""
import argparse
import logging

from hlrp import experiments as ex
from hlrp.evaluate import comparison_table, write_csv
from hlrp.models import ArchConfig
from hlrp.sampling import param_grid
from hlrp.train import TrainConfig

GRIDS = {"convection": (30, 40, 1), "reaction": (1, 5, 1), "helmholtz": (2.0, 3.0, 0.1)}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("family", choices=sorted(GRIDS))
    ap.add_argument("--targets", type=float, nargs="+", required=True)
    ap.add_argument("--phase1-epochs", type=int, default=10000)
    ap.add_argument("--phase2-epochs", type=int, default=2000)
    ap.add_argument("--baseline-epochs", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cache", default=".acceptance_cache")
    ap.add_argument("--out", default=None, help="CSV path (default: <family>_comparison.csv)")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    grid = param_grid(*GRIDS[args.family]).values
    cfg = TrainConfig(seed=args.seed)
    base, secs = ex.phase1(args.family, grid, ArchConfig(), cfg, args.phase1_epochs, args.seed, args.cache, progress=500)
    print(f"phase 1: {secs:.0f}s")
    results = {}
    for v in args.targets:
        results[(v, "hyper")] = ex.phase2(base, args.family, v, grid, cfg, args.phase2_epochs, args.seed)[1]
        results[(v, "vanilla")] = ex.baseline("vanilla", args.family, v, cfg, args.baseline_epochs, args.seed, grid)[1]
    rows = comparison_table(results)
    print(f"{'mu':>6} {'method':>8} {'abs_err':>9} {'rel_err':>9}")
    for mu, method, a, r in rows:
        print(f"{mu:6.2f} {method:>8} {a:9.4f} {r:9.4f}")
    write_csv(args.out or f"{args.family}_comparison.csv", ("mu", "method", "abs_err", "rel_err"), rows)


if __name__ == "__main__":
    main()
