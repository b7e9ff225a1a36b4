"""Phase 1 on beta in [1, 20]; writes per-layer nonzero counts and the sorted
coefficient heatmaps for every grid value."""
import argparse

from hlrp import experiments as ex
from hlrp.evaluate import diag_heatmap, rank_columns, rank_report, write_csv
from hlrp.models import ArchConfig
from hlrp.sampling import param_grid
from hlrp.train import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cache", default=".acceptance_cache")
    args = ap.parse_args()
    grid = param_grid(1, 20, 1)
    model, _ = ex.phase1("convection", grid.values, ArchConfig(), TrainConfig(), args.epochs, args.seed, args.cache)
    rows = rank_report(model, grid)
    write_csv("rank_report.csv", rank_columns(model, ["beta"]), rows)
    for r in rows:
        print("beta %5.1f  ranks %s  phase-2 params %d" % (r[0], list(r[1:-1]), r[-1]))
    for l in range(model.arch.n_hidden):
        hm = diag_heatmap(model, grid, l)
        write_csv(f"heatmap_l{l + 1}.csv", ("beta",) + tuple(f"s{k}" for k in range(hm.shape[1])),
                  [(b,) + tuple(row) for b, row in zip(grid.values, hm)])


if __name__ == "__main__":
    main()
