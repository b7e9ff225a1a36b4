"""Experiment pipelines shared by the scripts and the acceptance suite.

Phase-1 checkpoints are cached on disk keyed by every input that affects
them, so a rerun with the same settings reloads instead of retraining.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import replace
from pathlib import Path

from hlrp.diffcore import make_rng
from hlrp.io import load_checkpoint, save_checkpoint
from hlrp.models import ArchConfig, init_model
from hlrp.pde import make_spec
from hlrp.sampling import sample_collocation
from hlrp.train import TrainConfig, model_error, phase1_train, phase2_train, train_baseline

log = logging.getLogger(__name__)

MODEL_STREAM = 100


def make_tasks(family, values, seed=0):
    """One (spec, data) per grid value; data seed = seed * 1000 + index."""
    tasks = []
    for i, v in enumerate(values):
        spec = make_spec(family, [v])
        tasks.append((spec, sample_collocation(spec, seed * 1000 + i)))
    return tasks


def task_at(family, value, grid, seed=0):
    """The task a grid run would use for ``value`` (same data seed)."""
    values = list(grid)
    i = values.index(value) if value in values else len(values)
    spec = make_spec(family, [value])
    return spec, sample_collocation(spec, seed * 1000 + i)


def _key(**parts):
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def phase1(family, values, arch: ArchConfig, cfg: TrainConfig, epochs, seed=0, cache_dir=None, progress=None):
    """Phase-1 model on the grid ``values`` and its training wall time in
    seconds; reloads both from ``cache_dir`` when present."""
    path = None
    if cache_dir is not None:
        key = _key(family=family, values=list(values), arch=arch.to_dict(), cfg=cfg.to_dict(), epochs=epochs, seed=seed)
        path = Path(cache_dir) / f"phase1_{family}_{key}.ckpt"
        if path.exists():
            model, _, _, meta = load_checkpoint(path)
            return model, meta["extra"]["seconds"]
    tasks = make_tasks(family, values, seed)
    model = init_model(arch, make_rng(seed, MODEL_STREAM))
    t0 = time.time()

    def cb(epoch, m, hist):
        if progress and (epoch + 1) % progress == 0:
            errs = [model_error(m, s, d).rel_err for s, d in tasks]
            log.info("phase1 %s epoch %d (%.0fs) rel_err %s", family, epoch + 1, time.time() - t0, [round(e, 4) for e in errs])

    model, _ = phase1_train(model, tasks, cfg, epochs=epochs, callback=cb)
    seconds = time.time() - t0
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(path, model, epoch=epochs, extra={"seconds": seconds})
    return model, seconds


def phase2(base, family, value, grid, cfg: TrainConfig, epochs, seed=0):
    """Phase 2 at one target; returns ``(model, MetricSet)``."""
    spec, data = task_at(family, value, grid, seed)
    model = base.to_phase2(spec.mu)
    model, _ = phase2_train(model, spec, data, cfg, epochs=epochs)
    return model, model_error(model, spec, data)


def baseline(kind, family, value, cfg: TrainConfig, epochs, seed=0, grid=None, **arch_kw):
    """Single-task dense/naive baseline at ``value``; returns ``(model, MetricSet)``."""
    spec, data = task_at(family, value, grid or [value], seed)
    arch = ArchConfig(kind=kind, **arch_kw)
    model = init_model(arch, make_rng(seed, MODEL_STREAM))
    model, _ = train_baseline(model, [(spec, data)], replace(cfg, seed=seed), epochs=epochs)
    return model, model_error(model, spec, data)
