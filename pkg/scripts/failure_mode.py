"""Vanilla PINN on convection at a given beta, averaged over seeds."""
import argparse

import numpy as np

from hlrp import experiments as ex
from hlrp.train import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, default=40.0)
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    rels = []
    for s in range(args.seeds):
        m = ex.baseline("vanilla", "convection", args.beta, TrainConfig(), args.epochs, seed=s)[1]
        rels.append(m.rel_err)
        print(f"seed {s}: abs {m.abs_err:.4f} rel {m.rel_err:.4f}", flush=True)
    print(f"mean rel err {np.mean(rels):.4f} +- {np.std(rels):.4f}")


if __name__ == "__main__":
    main()
