"""File formats: a single-file container of named little-endian float64 arrays,
checkpoints and datasets built on it, and the TOML run configuration.

Container layout::

    b"HLRPARR\\0"  magic
    uint32 LE      format version
    uint64 LE      header length in bytes
    header         UTF-8 JSON, sorted keys: {"meta": ..., "arrays": [[name, shape], ...]}
    payload        arrays back to back, C order, '<f8'
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, fields

import numpy as np

from hlrp.diffcore import rng_from_state, rng_state
from hlrp.errors import CompatibilityError, ConfigError
from hlrp.models import ArchConfig, HyperLRPINN, Model, build_model
from hlrp.pde import FAMILY_COEFFS, make_spec
from hlrp.sampling import CollocationSet
from hlrp.train import TrainConfig

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

MAGIC = b"HLRPARR\0"
FORMAT_VERSION = 1
_F8 = np.dtype("<f8")


def write_container(path, arrays: dict, meta: dict):
    names = list(arrays)
    blobs = [np.ascontiguousarray(np.asarray(arrays[n], dtype=_F8)) for n in names]
    header = json.dumps(
        {"meta": meta, "arrays": [[n, list(b.shape)] for n, b in zip(names, blobs)]},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b.tobytes())
    os.replace(tmp, path)


def read_container(path):
    """Returns ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise CompatibilityError(f"{path}: not an array container")
    version, hlen = struct.unpack_from("<IQ", raw, 8)
    if version != FORMAT_VERSION:
        raise CompatibilityError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    pos = 8 + struct.calcsize("<IQ")
    header = json.loads(raw[pos : pos + hlen].decode())
    pos += hlen
    arrays = {}
    for name, shape in header["arrays"]:
        n = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(raw, dtype=_F8, count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(raw):
        raise CompatibilityError(f"{path}: trailing or missing payload bytes")
    return arrays, header["meta"]


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(path, model: Model, epoch=0, rng=None, extra=None):
    arrays = {f"param/{n}": v for n, v in model.store.items()}
    phase = getattr(model, "phase", None)
    if phase == 2:
        for l, m in enumerate(model.s_mask):
            arrays[f"mask/s{l}"] = m
    meta = {
        "kind": "checkpoint",
        "arch": model.arch.to_dict(),
        "phase": phase,
        "epoch": int(epoch),
        "trainable": model.store.trainable(),
        "mu_target": None if getattr(model, "mu_target", None) is None else model.mu_target.tolist(),
        "rng": None if rng is None else rng_state(rng),
        "extra": extra or {},
    }
    write_container(path, arrays, meta)


def load_checkpoint(path, expect_arch=None):
    """Returns ``(model, epoch, rng, meta)``; ``rng`` is None when none was saved."""
    arrays, meta = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise CompatibilityError(f"{path} is not a checkpoint")
    if expect_arch is not None and meta["arch"] != expect_arch:
        raise CompatibilityError(f"{path}: architecture {meta['arch']} != expected {expect_arch}")
    try:
        model = build_model(meta["arch"])
    except TypeError as exc:
        raise CompatibilityError(f"{path}: unknown architecture fields ({exc})") from None
    params = {k[len("param/") :]: v for k, v in arrays.items() if k.startswith("param/")}
    if isinstance(model, HyperLRPINN) and meta["phase"] == 2:
        model.phase = 2
        model.mu_target = np.array(meta["mu_target"], dtype=np.float64)
        model.s_mask = [arrays[f"mask/s{l}"] for l in range(model.arch.n_hidden)]
        for l in range(model.arch.n_hidden):
            model.store.add(f"s{l}", np.zeros(model.arch.rank))
    if set(params) != set(model.store.names()):
        raise CompatibilityError(f"{path}: parameter names do not match the architecture")
    for name, value in params.items():
        try:
            model.store[name] = value
        except ValueError as exc:
            raise CompatibilityError(f"{path}: {exc}") from None
    model.store.set_trainable_only(meta["trainable"])
    rng = None if meta["rng"] is None else rng_from_state(meta["rng"])
    return model, meta["epoch"], rng, meta


# -- datasets ----------------------------------------------------------------


def save_dataset(path, spec, data: CollocationSet, seed, provenance):
    meta = {
        "kind": "dataset",
        "family": spec.family,
        "mu": spec.mu.tolist(),
        "seed": int(seed),
        "counts": data.counts(),
        "reference": provenance,
        "test_points": "reference-grid nodes",
    }
    write_container(path, data.arrays(), meta)


def load_dataset(path):
    """Returns ``(spec, data, meta)``."""
    arrays, meta = read_container(path)
    if meta.get("kind") != "dataset":
        raise CompatibilityError(f"{path} is not a dataset")
    spec = make_spec(meta["family"], meta["mu"])
    for k in ("initial_u", "test_u", "boundary_u"):
        if k in arrays:
            arrays[k] = arrays[k].reshape(-1)
    return spec, CollocationSet(**arrays), meta


def mu_tag(mu) -> str:
    return "_".join(repr(float(v)) for v in np.atleast_1d(mu))


# -- run configuration ---------------------------------------------------------


@dataclass
class GridSpec:
    lo: float
    hi: float
    step: float = 1.0


@dataclass
class RunConfig:
    problem: str = "convection"
    phase1: GridSpec = field(default_factory=lambda: GridSpec(30.0, 40.0, 1.0))
    phase2: GridSpec = field(default_factory=lambda: GridSpec(30.0, 40.0, 1.0))
    train: TrainConfig = field(default_factory=TrainConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    baseline: str = "vanilla"  # vanilla | naive | pinnp
    baseline_rank: int = 10
    seed: int = 0
    out: str = "runs/default"

    def phase1_grid(self):
        from hlrp.sampling import param_grid

        return _grid(self.problem, self.phase1, "phase1-train", param_grid)

    def phase2_grid(self):
        from hlrp.sampling import param_grid

        return _grid(self.problem, self.phase2, "phase2-targets", param_grid)


def _grid(problem, g: GridSpec, role, param_grid):
    if len(FAMILY_COEFFS[problem]) != 1:
        raise ConfigError(f"grids over {problem} need one coefficient; only single-parameter presets sweep")
    return param_grid(g.lo, g.hi, g.step, role)


def _strict(cls, table, where):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    nested = {"phase1": GridSpec, "phase2": GridSpec, "train": TrainConfig, "arch": ArchConfig}
    top = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kw = {}
    for k, v in raw.items():
        kw[k] = _strict(nested[k], v, k) if k in nested else v
    cfg = RunConfig(**kw)
    if cfg.problem not in FAMILY_COEFFS:
        raise ConfigError(f"unknown problem preset {cfg.problem!r}")
    if cfg.baseline not in ("vanilla", "naive", "pinnp"):
        raise ConfigError(f"unknown baseline {cfg.baseline!r}")
    if cfg.arch.kind != "hyper":
        raise ConfigError("[arch].kind selects the main model and must be 'hyper'; use baseline = ... instead")
    if cfg.arch.mu_dim != len(FAMILY_COEFFS[cfg.problem]):
        raise ConfigError(f"[arch].mu_dim must be {len(FAMILY_COEFFS[cfg.problem])} for {cfg.problem}")
    for k, typ in (("seed", int), ("baseline_rank", int), ("out", str), ("problem", str)):
        if not isinstance(getattr(cfg, k), typ):
            raise ConfigError(f"{k} must be {typ.__name__}")
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
