"""PINN loss assembly, two-phase training, baseline loops."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from hlrp.diffcore import Adam, Mode, make_rng, param_grad
from hlrp.errors import NumericError, TrainingError
from hlrp.models import Evaluator, HyperLRPINN, Model
from hlrp.pde import ProblemSpec, pde_residual, pde_residual_vjp
from hlrp.sampling import CollocationSet

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "task", "residual", "ic", "bc", "ortho", "total")


@dataclass
class TrainConfig:
    phase1_epochs: int = 10000
    phase2_epochs: int = 2000
    baseline_epochs: int = 2000
    lr_phase1: float = 1e-3
    lr_phase2: float = 2.5e-4
    lr_baseline: float = 1e-3
    w_res: float = 1.0
    w_ic: float = 1.0
    w_bc: float = 1.0
    w1: float = 1.0
    w2: float = 1.0
    shuffle: bool = False
    divergence: float = 1e6
    seed: int = 0

    def __post_init__(self):
        for name in ("phase1_epochs", "phase2_epochs", "baseline_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("lr_phase1", "lr_phase2", "lr_baseline"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class LossBreakdown:
    residual_mse: float
    ic_mse: float
    bc_mse: float
    ortho: float
    total: float

    def row(self):
        return (self.residual_mse, self.ic_mse, self.bc_mse, self.ortho, self.total)


def _edge_points(data: CollocationSet):
    parts = []
    if data.initial is not None:
        parts.append(data.initial)
    parts.append(data.boundary)
    if data.boundary_pair is not None:
        parts.append(data.boundary_pair)
    return np.vstack(parts)


def pinn_loss(model: Model, data: CollocationSet, spec: ProblemSpec, cfg: TrainConfig, with_grad=True):
    """Weighted PDE residual + IC + BC mean-squared losses plus the orthogonality
    penalty.  Returns ``(LossBreakdown, grads)``; grads is None without
    ``with_grad``."""
    mu = spec.mu
    edge = _edge_points(data)
    n0 = 0 if data.initial is None else len(data.initial)
    nb = len(data.boundary)

    def forward(ops):
        ui = model.forward(ops, ops.input(model.input_jet(data.interior, spec.mode, mu)), mu)
        ue = model.forward(ops, ops.input(model.input_jet(edge, Mode.VALUE, mu)), mu)
        return ui, ue

    def loss(outs):
        ui, ue = outs
        r = pde_residual(spec, ui, data.interior)
        res = float(np.mean(r * r))
        seeds = [(ui, pde_residual_vjp(spec, ui, cfg.w_res * 2.0 * r / r.size))]
        v = ue.value
        a_edge = np.zeros_like(v)
        ic = 0.0
        if n0:
            d = v[:n0] - data.initial_u
            ic = float(np.mean(d * d))
            a_edge[:n0] = cfg.w_ic * 2.0 * d / n0
        if data.boundary_pair is not None:
            d = v[n0 : n0 + nb] - v[n0 + nb :]
            a_edge[n0 : n0 + nb] = cfg.w_bc * 2.0 * d / nb
            a_edge[n0 + nb :] = -cfg.w_bc * 2.0 * d / nb
        else:
            d = v[n0:] - data.boundary_u
            a_edge[n0:] = cfg.w_bc * 2.0 * d / nb
        bc = float(np.mean(d * d))
        seeds.append((ue, a_edge.reshape(ue.data.shape)))
        ortho, direct = model.ortho_terms(cfg.w1, cfg.w2)
        total = cfg.w_res * res + cfg.w_ic * ic + cfg.w_bc * bc + ortho
        terms = {"residual": res, "ic": ic, "bc": bc, "ortho": ortho}
        return total, terms, seeds, direct

    if with_grad:
        total, terms, grads = param_grad(forward, loss, model.store)
    else:
        total, terms, _, _ = loss(forward(Evaluator(model.store)))
        for name, val in terms.items():
            if not np.isfinite(val):
                raise NumericError(name)
        grads = None
    lb = LossBreakdown(terms["residual"], terms["ic"], terms["bc"], terms["ortho"], float(total))
    return lb, grads


def _step(model, opt, spec, data, cfg, epoch, task):
    try:
        lb, grads = pinn_loss(model, data, spec, cfg)
    except NumericError as exc:
        raise TrainingError(f"non-finite {exc.term} at epoch {epoch}, task {task}", epoch, task) from exc
    if lb.total > cfg.divergence:
        raise TrainingError(f"loss {lb.total:.3g} diverged at epoch {epoch}, task {task}", epoch, task)
    opt.step(model.store, grads)
    return (epoch, task) + lb.row()


def run_epochs(model, tasks, cfg, opt, epochs, callback=None, start_epoch=0):
    """``epochs`` passes over ``tasks`` with one optimizer step per task."""
    history = []
    order = list(range(len(tasks)))
    shuffler = make_rng(cfg.seed, 11)
    for epoch in range(start_epoch, start_epoch + epochs):
        if cfg.shuffle:
            shuffler.shuffle(order)
        for i in order:
            spec, data = tasks[i]
            history.append(_step(model, opt, spec, data, cfg, epoch, i))
        if callback is not None:
            callback(epoch, model, history)
    return history


def phase1_train(model: HyperLRPINN, tasks, cfg: TrainConfig, epochs=None, callback=None, opt=None):
    """One Adam step per task per epoch, tasks in grid order.

    ``tasks`` is a list of ``(ProblemSpec, CollocationSet)``.  The returned
    history has one row per (epoch, task) with the pre-step loss terms.
    """
    if not tasks:
        raise ValueError("phase 1 needs at least one task")
    if model.phase != 1:
        raise ValueError("phase1_train needs a phase-1 model")
    model.store.set_trainable_only(model.phase1_trainable())
    opt = opt or Adam(lr=cfg.lr_phase1)
    epochs = cfg.phase1_epochs if epochs is None else epochs
    return model, run_epochs(model, tasks, cfg, opt, epochs, callback)


def phase2_convert(model: HyperLRPINN, mu_target, learnable_basis=False) -> HyperLRPINN:
    return model.to_phase2(mu_target, learnable_basis=learnable_basis)


def phase2_train(model: HyperLRPINN, spec, data, cfg: TrainConfig, epochs=None, callback=None, opt=None):
    if model.phase != 2:
        raise ValueError("phase2_train needs a converted model")
    opt = opt or Adam(lr=cfg.lr_phase2)
    epochs = cfg.phase2_epochs if epochs is None else epochs
    return model, run_epochs(model, [(spec, data)], cfg, opt, epochs, callback)


def train_baseline(model: Model, tasks, cfg: TrainConfig, epochs=None, callback=None, opt=None):
    """Plain Adam loop.  Vanilla and naive models take one task; PINN-P cycles
    over all tasks each epoch with the PDE parameters as extra inputs."""
    if getattr(model, "phase", None) is not None:
        raise ValueError("train_baseline takes baseline models")
    if model.arch.kind != "pinnp" and len(tasks) != 1:
        raise ValueError(f"{model.arch.kind} baseline trains on a single task")
    opt = opt or Adam(lr=cfg.lr_baseline)
    epochs = cfg.baseline_epochs if epochs is None else epochs
    return model, run_epochs(model, tasks, cfg, opt, epochs, callback)


def epochs_to_threshold(step, error, threshold=0.05, budget=2000):
    """Epochs of ``step()`` needed before ``error()`` drops below ``threshold``.

    Returns 0 when the initial model already qualifies and None when the budget
    runs out.
    """
    for epoch in range(budget + 1):
        if error() < threshold:
            return epoch
        if epoch < budget:
            step()
    return None


def model_error(model: Model, spec: ProblemSpec, data: CollocationSet):
    from hlrp.evaluate import metrics

    return metrics(data.test_u, model.predict(data.test, spec.mu))
