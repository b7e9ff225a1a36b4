"""Paired phase-1 runs with and without the orthogonality penalty; prints
||U^T U - I||_F and ||V^T V - I||_F per layer and the final test errors."""
import argparse

import numpy as np

from hlrp import experiments as ex
from hlrp.models import ArchConfig
from hlrp.train import TrainConfig, model_error


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--betas", type=float, nargs="+", default=[1.0, 5.0, 10.0, 15.0, 20.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cache", default=".acceptance_cache")
    args = ap.parse_args()
    tasks = ex.make_tasks("convection", args.betas, args.seed)
    for w in (1.0, 0.0):
        model, _ = ex.phase1("convection", args.betas, ArchConfig(), TrainConfig(w1=w, w2=w), args.epochs, args.seed, args.cache)
        res = model.ortho_residuals()
        errs = [model_error(model, s, d).rel_err for s, d in tasks]
        print(f"w1=w2={w:g}: " + "  ".join(f"L{l + 1} U {u:.3g} V {v:.3g}" for l, (u, v) in enumerate(res))
              + f"  mean rel err {np.mean(errs):.4f}")


if __name__ == "__main__":
    main()
