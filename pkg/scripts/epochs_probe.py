"""Epochs to reach abs error < threshold: phase 2 of a beta in [1, 20] phase-1
model versus a freshly initialized vanilla PINN, on a 0.5-spaced grid."""
import argparse

from hlrp import experiments as ex
from hlrp.diffcore import Adam, make_rng
from hlrp.evaluate import write_csv
from hlrp.models import ArchConfig, init_model
from hlrp.sampling import param_grid
from hlrp.train import TrainConfig, epochs_to_threshold, model_error, run_epochs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--phase1-epochs", type=int, default=2000)
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--threshold", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cache", default=".acceptance_cache")
    args = ap.parse_args()
    cfg = TrainConfig()
    p1 = param_grid(1, 20, 1).values
    base, _ = ex.phase1("convection", p1, ArchConfig(), cfg, args.phase1_epochs, args.seed, args.cache)

    def probe(model, spec, data, lr):
        opt = Adam(lr=lr)
        return epochs_to_threshold(lambda: run_epochs(model, [(spec, data)], cfg, opt, 1),
                                   lambda: model_error(model, spec, data).abs_err, args.threshold, args.budget)

    rows = []
    for b in param_grid(1, 20, 0.5).values:
        spec, data = ex.task_at("convection", b, p1, args.seed)
        h = probe(base.to_phase2(spec.mu), spec, data, cfg.lr_phase2)
        v = probe(init_model(ArchConfig(kind="vanilla"), make_rng(args.seed, ex.MODEL_STREAM)), spec, data, cfg.lr_baseline)
        rows.append((b, h, v))
        print(f"beta {b:5.1f}  hyper {h}  vanilla {v}", flush=True)
    write_csv("epochs_probe.csv", ("mu", "hyper_epochs", "vanilla_epochs"), rows)


if __name__ == "__main__":
    main()
