"""Command-line entry point.

Exit codes: 0 success, 2 configuration/compatibility error, 3 numeric
divergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from hlrp.diffcore import Adam, make_rng
from hlrp.errors import CompatibilityError, ConfigError, NumericError, TrainingError
from hlrp.evaluate import (
    MetricSet,
    comparison_table,
    diag_heatmap,
    metrics,
    rank_columns,
    rank_report,
    write_csv,
)
from hlrp.io import (
    RunConfig,
    load_checkpoint,
    load_config,
    load_dataset,
    mu_tag,
    save_checkpoint,
    save_dataset,
)
from hlrp.models import ArchConfig, count_params, init_model
from hlrp.pde import FAMILY_COEFFS, make_spec
from hlrp.reference import reference_field
from hlrp.sampling import ParamGrid, sample_collocation
from hlrp.train import (
    HISTORY_COLUMNS,
    epochs_to_threshold,
    phase1_train,
    phase2_train,
    pinn_loss,
    run_epochs,
    model_error,
    train_baseline,
)

log = logging.getLogger("hlrp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MODEL_SEED_STREAM = 100


class Run:
    """Resolved configuration plus output paths for one invocation."""

    def __init__(self, cfg: RunConfig, args):
        self.cfg = cfg
        self.out = Path(args.out or cfg.out)
        self.jobs = max(1, args.jobs)
        self.epochs = args.epochs
        self.data_dir = self.out / "data"

    @property
    def names(self):
        return FAMILY_COEFFS[self.cfg.problem]

    def all_mus(self):
        vals = sorted(set(self.cfg.phase1_grid().values) | set(self.cfg.phase2_grid().values))
        return vals

    def data_seed(self, mu):
        # one stream per grid value: seed * 1000 + position in the merged grid
        return self.cfg.seed * 1000 + self.all_mus().index(mu)

    def dataset_path(self, mu):
        return self.data_dir / f"{self.cfg.problem}_{mu_tag(mu)}.hlrp"

    def load_tasks(self, grid: ParamGrid):
        tasks = []
        for mu in grid:
            path = self.dataset_path(mu)
            if not path.exists():
                raise FileNotFoundError(f"missing dataset {path}; run gen-data first")
            spec, data, _ = load_dataset(path)
            tasks.append((spec, data))
        return tasks

    def arch(self):
        return self.cfg.arch

    def model_rng(self):
        return make_rng(self.cfg.seed, MODEL_SEED_STREAM)


def _history_csv(path, history):
    write_csv(path, HISTORY_COLUMNS, history)


def _metric_row(mu, m: MetricSet, extra=()):
    return (mu,) + m.row() + tuple(extra)


def _pmap(fn, items, jobs):
    if jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- commands ----------------------------------------------------------------


def cmd_gen_data(run: Run):
    """One dataset file per grid value plus manifest.json (seeds, counts)."""
    run.data_dir.mkdir(parents=True, exist_ok=True)
    entries = []

    def one(mu):
        spec = make_spec(run.cfg.problem, [mu])
        seed = run.data_seed(mu)
        data = sample_collocation(spec, seed)
        path = run.dataset_path(mu)
        save_dataset(path, spec, data, seed, reference_field(spec).provenance)
        return {"mu": mu, "file": path.name, "seed": seed, "counts": data.counts()}

    entries = _pmap(one, run.all_mus(), run.jobs)
    manifest = {
        "problem": run.cfg.problem,
        "seed": run.cfg.seed,
        "datasets": entries,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),  # excluded from idempotency
    }
    with open(run.data_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(entries)} datasets to {run.data_dir}")


def cmd_phase1(run: Run):
    grid = run.cfg.phase1_grid()
    tasks = run.load_tasks(grid)
    rng = run.model_rng()
    model = init_model(run.arch(), rng)
    epochs = run.cfg.train.phase1_epochs if run.epochs is None else run.epochs
    model, history = phase1_train(model, tasks, run.cfg.train, epochs=epochs)
    run.out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(run.out / "phase1.ckpt", model, epoch=epochs, rng=rng, extra={"grid": list(grid.values)})
    _history_csv(run.out / "phase1_loss.csv", history)
    rows = [_metric_row(mu, model_error(model, s, d)) for mu, (s, d) in zip(grid, tasks)]
    write_csv(run.out / "phase1_metrics.csv", ("mu",) + MetricSet.columns(), rows)
    mean_rel = float(np.mean([r[2] for r in rows]))
    print(f"phase1: {epochs} epochs on {len(grid)} tasks, mean rel_err {mean_rel:.4g}")


def _load_phase1(run: Run):
    path = run.out / "phase1.ckpt"
    if not path.exists():
        raise FileNotFoundError(f"missing {path}; run phase1 first")
    model, _, _, meta = load_checkpoint(path, expect_arch=run.arch().to_dict())
    if meta["phase"] != 1:
        raise CompatibilityError(f"{path} is not a phase-1 checkpoint")
    return model


def _phase2_one(run: Run, base, spec, data, epochs):
    model = base.to_phase2(spec.mu)
    model, history = phase2_train(model, spec, data, run.cfg.train, epochs=epochs)
    return model, history


def cmd_phase2(run: Run):
    """Phase 2 per target; results.csv has (mu, abs_err, rel_err, max_err,
    explained_var, trainable)."""
    base = _load_phase1(run)
    grid = run.cfg.phase2_grid()
    tasks = run.load_tasks(grid)
    epochs = run.cfg.train.phase2_epochs if run.epochs is None else run.epochs
    pdir = run.out / "phase2"
    pdir.mkdir(parents=True, exist_ok=True)

    def one(item):
        mu, (spec, data) = item
        model, history = _phase2_one(run, base, spec, data, epochs)
        tag = mu_tag(mu)
        save_checkpoint(pdir / f"{tag}.ckpt", model, epoch=epochs)
        _history_csv(pdir / f"{tag}_loss.csv", history)
        return _metric_row(mu, model_error(model, spec, data), (count_params(model, 2),))

    rows = _pmap(one, list(zip(grid, tasks)), run.jobs)
    write_csv(run.out / "phase2_results.csv", ("mu",) + MetricSet.columns() + ("trainable",), rows)
    print(f"phase2: {len(rows)} targets, {epochs} epochs, mean rel_err {np.mean([r[2] for r in rows]):.4g}")


def _baseline_models(run: Run, kind, grid, tasks, epochs):
    arch = ArchConfig(kind=kind, mu_dim=run.arch().mu_dim, rank=run.cfg.baseline_rank)
    if kind == "pinnp":
        p1 = run.cfg.phase1_grid()
        model = init_model(replace(arch, kind="pinnp"), run.model_rng())
        model, history = train_baseline(model, run.load_tasks(p1), run.cfg.train, epochs=epochs)
        return [(mu, model, history if i == 0 else []) for i, mu in enumerate(grid)]

    def one(item):
        mu, task = item
        model = init_model(arch, run.model_rng())
        model, history = train_baseline(model, [task], run.cfg.train, epochs=epochs)
        return mu, model, history

    return _pmap(one, list(zip(grid, tasks)), run.jobs)


def cmd_baseline(run: Run):
    kind = run.cfg.baseline
    grid = run.cfg.phase2_grid()
    tasks = run.load_tasks(grid)
    epochs = run.cfg.train.baseline_epochs if run.epochs is None else run.epochs
    bdir = run.out / f"baseline_{kind}"
    bdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for (mu, model, history), (spec, data) in zip(_baseline_models(run, kind, grid, tasks, epochs), tasks):
        tag = mu_tag(mu)
        if history or kind != "pinnp":
            name = "model" if kind == "pinnp" else tag
            save_checkpoint(bdir / f"{name}.ckpt", model, epoch=epochs)
            _history_csv(bdir / f"{name}_loss.csv", history)
        rows.append(_metric_row(mu, model_error(model, spec, data), (count_params(model),)))
    write_csv(run.out / f"baseline_{kind}_results.csv", ("mu",) + MetricSet.columns() + ("trainable",), rows)
    print(f"baseline {kind}: {len(rows)} targets, mean rel_err {np.mean([r[2] for r in rows]):.4g}")


def cmd_eval(run: Run, checkpoint, dataset):
    """eval_metrics.csv for one (checkpoint, dataset) pair; hyper checkpoints
    also get rank_report.csv and heatmap_l{l}.csv over the phase-2 grid."""
    model, _, _, meta = load_checkpoint(checkpoint)
    spec, data, _ = load_dataset(dataset)
    if model.arch.coord_dim != data.test.shape[1]:
        raise CompatibilityError("checkpoint input width does not match the dataset")
    if spec.mu.size != model.arch.mu_dim:
        raise CompatibilityError("checkpoint PDE-parameter count does not match the dataset")
    run.out.mkdir(parents=True, exist_ok=True)
    m = model_error(model, spec, data)
    lb, _ = pinn_loss(model, data, spec, run.cfg.train, with_grad=False)
    write_csv(
        run.out / "eval_metrics.csv",
        ("mu",) + MetricSet.columns() + ("residual", "ic", "bc", "total"),
        [(mu_tag(spec.mu),) + m.row() + (lb.residual_mse, lb.ic_mse, lb.bc_mse, lb.total)],
    )
    if meta["arch"]["kind"] == "hyper" and meta["phase"] == 1:
        _rank_outputs(run, model, run.cfg.phase2_grid())
    print(f"eval: abs_err {m.abs_err:.4g} rel_err {m.rel_err:.4g}")


def _rank_outputs(run: Run, model, grid):
    write_csv(run.out / "rank_report.csv", rank_columns(model, run.names), rank_report(model, grid))
    for l in range(model.arch.n_hidden):
        hm = diag_heatmap(model, grid, l)
        write_csv(
            run.out / f"heatmap_l{l + 1}.csv",
            ("mu",) + tuple(f"s{k}" for k in range(hm.shape[1])),
            [(mu,) + tuple(row) for mu, row in zip(grid, hm)],
        )


def cmd_rank_report(run: Run):
    """rank_report.csv (mu, r1..rL, phase2_params) and heatmap_l{l}.csv over
    the phase-1 grid."""
    model = _load_phase1(run)
    _rank_outputs(run, model, run.cfg.phase1_grid())
    print(f"rank report for {len(run.cfg.phase1_grid())} values in {run.out}")


def cmd_sweep(run: Run):
    """Phase 2 and the configured baseline over the phase-2 grid, merged into
    comparison.csv (mu, method, abs_err, rel_err)."""
    cmd_phase2(run)
    cmd_baseline(run)
    results = {}
    for name, path in (("hyper", "phase2_results.csv"), (run.cfg.baseline, f"baseline_{run.cfg.baseline}_results.csv")):
        rows = np.loadtxt(run.out / path, delimiter=",", skiprows=1, ndmin=2)
        for r in rows:
            results[(float(r[0]), name)] = MetricSet(*r[1:5])
    write_csv(run.out / "comparison.csv", ("mu", "method", "abs_err", "rel_err"), comparison_table(results))
    print(f"sweep: {len(results)} rows in {run.out / 'comparison.csv'}")


def cmd_epochs_probe(run: Run, threshold):
    """epochs_probe.csv: (mu, hyper_epochs, vanilla_epochs); 'exhausted' marks
    a budget that ran out before abs_err < threshold."""
    base = _load_phase1(run)
    grid = run.cfg.phase2_grid()
    tasks = run.load_tasks(grid)
    cfg = run.cfg.train
    budget = cfg.phase2_epochs if run.epochs is None else run.epochs

    def probe(model, spec, data, lr):
        opt = Adam(lr=lr)
        return epochs_to_threshold(
            lambda: run_epochs(model, [(spec, data)], cfg, opt, 1),
            lambda: model_error(model, spec, data).abs_err,
            threshold,
            budget,
        )

    def one(item):
        mu, (spec, data) = item
        hyper = probe(base.to_phase2(spec.mu), spec, data, cfg.lr_phase2)
        vanilla = init_model(ArchConfig(kind="vanilla"), run.model_rng())
        return mu, hyper, probe(vanilla, spec, data, cfg.lr_baseline)

    rows = _pmap(one, list(zip(grid, tasks)), run.jobs)
    run.out.mkdir(parents=True, exist_ok=True)
    write_csv(run.out / "epochs_probe.csv", ("mu", "hyper_epochs", "vanilla_epochs"), rows)
    print(f"epochs-probe: {len(rows)} targets at threshold {threshold}")


# -- entry point ---------------------------------------------------------------


def _resolve_seed(args, cfg: RunConfig) -> RunConfig:
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get("HLRP_SEED"):
        try:
            seed = int(os.environ["HLRP_SEED"])
        except ValueError:
            raise ConfigError(f"HLRP_SEED must be an integer, got {os.environ['HLRP_SEED']!r}") from None
    else:
        return cfg
    return replace(cfg, seed=seed, train=replace(cfg.train, seed=seed))


def build_parser():
    p = argparse.ArgumentParser(prog="hlrp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="verb", required=True)
    helps = {
        "gen-data": cmd_gen_data.__doc__,
        "phase1": "Phase-1 training on the phase-1 grid: phase1.ckpt, phase1_loss.csv "
        "(epoch, task, residual, ic, bc, ortho, total), phase1_metrics.csv.",
        "phase2": cmd_phase2.__doc__,
        "baseline": "Train the configured baseline on each phase-2 target (pinnp: once on the "
        "phase-1 grid); baseline_<kind>_results.csv.",
        "eval": cmd_eval.__doc__,
        "sweep": cmd_sweep.__doc__,
        "epochs-probe": cmd_epochs_probe.__doc__,
        "rank-report": cmd_rank_report.__doc__,
    }
    for verb, text in helps.items():
        sp = sub.add_parser(verb, help=text.split(".")[0], description=text)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--seed", type=int, help="overrides the config seed (fallback: $HLRP_SEED)")
        sp.add_argument("--out", help="output directory (default: config 'out')")
        sp.add_argument("--epochs", type=int, help="override the epoch budget of this command")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads across targets")
        if verb == "eval":
            sp.add_argument("--checkpoint", required=True)
            sp.add_argument("--dataset", required=True)
        if verb == "epochs-probe":
            sp.add_argument("--threshold", type=float, default=0.05)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.epochs is not None and args.epochs < 0:
            raise ConfigError("--epochs must be >= 0")
        cfg = _resolve_seed(args, load_config(args.config))
        run = Run(cfg, args)
        if args.verb == "gen-data":
            cmd_gen_data(run)
        elif args.verb == "phase1":
            cmd_phase1(run)
        elif args.verb == "phase2":
            cmd_phase2(run)
        elif args.verb == "baseline":
            cmd_baseline(run)
        elif args.verb == "eval":
            cmd_eval(run, args.checkpoint, args.dataset)
        elif args.verb == "sweep":
            cmd_sweep(run)
        elif args.verb == "epochs-probe":
            cmd_epochs_probe(run, args.threshold)
        elif args.verb == "rank-report":
            cmd_rank_report(run)
    except (ConfigError, CompatibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, NumericError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
