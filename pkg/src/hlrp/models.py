"""Network architectures: low-rank layers, the hypernetwork-driven low-rank PINN,
and the dense / naive low-rank baselines.

Parameters live in a :class:`ParamStore` under flat names::

    in.W, in.b                 input layer (coords -> width)
    lr{l}.U, lr{l}.V, lr{l}.b  factored hidden layers, l = 0..L-1
    out.W, out.b               output layer (width -> 1)
    emb{m}.W, emb{m}.b         hypernetwork embedding layers, m = 0..M-1
    head{l}.W, head{l}.b       hypernetwork heads emitting s^l
    s{l}                       free diagonal coefficients (phase 2 / naive model)
    dense{k}.W, dense{k}.b     dense baseline layers
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from hlrp.diffcore import Jet, Mode, ParamStore, seed_jet, vector_jet
from hlrp.diffcore import jet as J
from hlrp.diffcore.linalg import orthonormal_columns, svd
from hlrp.errors import NumericError, ShapeError


@dataclass
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        if self.b.shape != (self.W.shape[0],):
            raise ShapeError("bias length must equal W.rows")


@dataclass
class LowRankLayer:
    U: np.ndarray  # (n_out, r)
    V: np.ndarray  # (n_in, r)
    b: np.ndarray  # (n_out,)

    def __post_init__(self):
        r = self.U.shape[1]
        if self.V.shape[1] != r:
            raise ShapeError("U and V must have the same column count")
        if r > min(self.U.shape[0], self.V.shape[0]):
            raise ShapeError("rank exceeds layer dimensions")
        if self.b.shape != (self.U.shape[0],):
            raise ShapeError("bias length must equal U.rows")

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def apply(self, s, h):
        """Three small products: ``U (s * (V^T h)) + b``."""
        return self.U @ (s[:, None] * (self.V.T @ h)) + self.b[:, None]


def effective_weight(layer: LowRankLayer, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (layer.rank,):
        raise ShapeError(f"need {layer.rank} coefficients, got {s.shape}")
    return (layer.U * s) @ layer.V.T


def ortho_penalty(U, V, w1=1.0, w2=1.0):
    """``w1 ||U^T U - I||_F^2 + w2 ||V^T V - I||_F^2`` and its gradients w.r.t. U, V."""
    EU = U.T @ U - np.eye(U.shape[1])
    EV = V.T @ V - np.eye(V.shape[1])
    val = w1 * float((EU * EU).sum()) + w2 * float((EV * EV).sum())
    return val, 4.0 * w1 * (U @ EU), 4.0 * w2 * (V @ EV)


def nnz_ranks(s_set, eps=0.0) -> list[int]:
    return [int((np.asarray(s) > eps).sum()) for s in s_set]


def svd_truncate(layer: DenseLayer, r: int):
    """Keep the ``r`` leading singular triples of ``layer.W``.

    Returns ``(LowRankLayer, s)`` with the retained singular values as the
    diagonal coefficients.
    """
    rows, cols = layer.W.shape
    if not 1 <= r <= min(rows, cols):
        raise ValueError(f"rank {r} outside [1, {min(rows, cols)}]")
    U, s, V = svd(layer.W)
    return LowRankLayer(U[:, :r].copy(), V[:, :r].copy(), layer.b.copy()), s[:r].copy()


def glorot_uniform(rng, fan_out, fan_in):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


class Evaluator:
    """Same interface as :class:`~hlrp.diffcore.tape.Tape` without recording."""

    def __init__(self, store: ParamStore):
        self.store = store

    def leaf(self, name):
        return vector_jet(self.store[name])

    def input(self, x):
        return x

    def affine(self, w, b, x):
        return J.affine_jet(self.store[w], self.store[b], x)

    def lowrank(self, u, v, b, s, x, mask=None):
        svec = s.data[0, :, 0]
        if mask is not None:
            svec = svec * mask
        return J.lowrank_jet(self.store[u], svec, self.store[v], self.store[b], x)[0]

    def activation(self, kind, z):
        return J.ACTIVATIONS[kind][0](z)


def _check(jet: Jet, where: str) -> Jet:
    if not np.isfinite(jet.data).all():
        raise NumericError(where)
    return jet


@dataclass
class ArchConfig:
    kind: str = "hyper"  # hyper | vanilla | pinnp | naive
    coord_dim: int = 2
    mu_dim: int = 1
    width: int = 50
    n_hidden: int = 3  # low-rank layers L (hyper / naive)
    n_embed: int = 3  # embedding layers M
    embed_width: int = 50
    rank: int = 50
    n_dense: int = 6  # weight matrices in the dense baselines
    head_bias: float = 0.1
    mu_scale: float = 1.0

    def to_dict(self):
        return asdict(self)


class Model:
    """Shared plumbing: a parameter store and evaluation helpers."""

    arch: ArchConfig
    store: ParamStore

    def forward(self, ops, x: Jet, mu=None) -> Jet:
        raise NotImplementedError

    def input_jet(self, coords, mode: Mode, mu=None) -> Jet:
        return seed_jet(coords, mode)

    def jets(self, coords, mode: Mode, mu=None) -> Jet:
        return self.forward(Evaluator(self.store), self.input_jet(coords, mode, mu), mu)

    def predict(self, coords, mu=None) -> np.ndarray:
        return self.jets(coords, Mode.VALUE, mu).value

    def ortho_terms(self, w1, w2):
        """Summed orthogonality penalty over trainable bases, with direct grads."""
        return 0.0, {}

    def trainable_count(self) -> int:
        return sum(self.store[n].size for n in self.store.trainable())

    def clone(self):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.store = self.store.copy()
        return new


class LowRankTrunk(Model):
    """Input layer, L factored hidden layers, linear output layer."""

    s_mask: list | None = None

    def _init_trunk(self, rng, rank):
        a = self.arch
        st = self.store
        st.add("in.W", glorot_uniform(rng, a.width, a.coord_dim))
        st.add("in.b", np.zeros(a.width))
        for l in range(a.n_hidden):
            st.add(f"lr{l}.U", orthonormal_columns(rng, a.width, rank))
            st.add(f"lr{l}.V", orthonormal_columns(rng, a.width, rank))
            st.add(f"lr{l}.b", np.zeros(a.width))
        st.add("out.W", glorot_uniform(rng, 1, a.width))
        st.add("out.b", np.zeros(1))

    def layer(self, l) -> LowRankLayer:
        st = self.store
        return LowRankLayer(st[f"lr{l}.U"], st[f"lr{l}.V"], st[f"lr{l}.b"])

    def trunk(self, ops, x: Jet, s_jets) -> Jet:
        h = _check(ops.activation("tanh", ops.affine("in.W", "in.b", x)), "input layer")
        for l, s in enumerate(s_jets):
            mask = None if self.s_mask is None else self.s_mask[l]
            z = ops.lowrank(f"lr{l}.U", f"lr{l}.V", f"lr{l}.b", s, h, mask)
            h = _check(ops.activation("tanh", z), f"hidden layer {l}")
        return _check(ops.affine("out.W", "out.b", h), "output layer")

    def ortho_terms(self, w1, w2):
        total, grads = 0.0, {}
        if w1 == 0.0 and w2 == 0.0:
            return total, grads
        for l in range(self.arch.n_hidden):
            u, v = f"lr{l}.U", f"lr{l}.V"
            if not (self.store.is_trainable(u) or self.store.is_trainable(v)):
                continue
            val, dU, dV = ortho_penalty(self.store[u], self.store[v], w1, w2)
            total += val
            grads[u], grads[v] = dU, dV
        return total, grads

    def ortho_residuals(self):
        """``(||U^T U - I||_F, ||V^T V - I||_F)`` per hidden layer."""
        out = []
        for l in range(self.arch.n_hidden):
            U, V = self.store[f"lr{l}.U"], self.store[f"lr{l}.V"]
            out.append(
                (
                    float(np.linalg.norm(U.T @ U - np.eye(U.shape[1]))),
                    float(np.linalg.norm(V.T @ V - np.eye(V.shape[1]))),
                )
            )
        return out

    def storage_count(self) -> int:
        """Scalars stored by the trunk for one set of coefficients."""
        a = self.arch
        r = self.store["lr0.U"].shape[1]
        return (
            a.n_hidden * (2 * a.width * r + r + a.width)
            + self.store["in.W"].size
            + a.width
            + self.store["out.W"].size
            + 1
        )

    def to_dense(self, s_set):
        """The trunk with each factored layer materialized as a dense layer."""
        layers = [DenseLayer(self.store["in.W"].copy(), self.store["in.b"].copy(), "tanh")]
        for l, s in enumerate(s_set):
            lay = self.layer(l)
            layers.append(DenseLayer(effective_weight(lay, s), lay.b.copy(), "tanh"))
        layers.append(DenseLayer(self.store["out.W"].copy(), self.store["out.b"].copy(), "identity"))
        return layers


class HyperLRPINN(LowRankTrunk):
    """Low-rank PINN whose diagonal coefficients come from a hypernetwork of the
    PDE parameters (phase 1), or from free per-layer vectors after
    :meth:`to_phase2`."""

    def __init__(self, arch: ArchConfig, rng):
        self.arch = arch
        self.store = ParamStore()
        self.phase = 1
        self.mu_target = None
        self.s_mask = None
        self._init_trunk(rng, arch.rank)
        st = self.store
        fan_in = arch.mu_dim
        for m in range(arch.n_embed):
            st.add(f"emb{m}.W", glorot_uniform(rng, arch.embed_width, fan_in))
            st.add(f"emb{m}.b", np.zeros(arch.embed_width))
            fan_in = arch.embed_width
        # |W e| <= fan_in * bound * max|e| <= head_bias / 2, so every s starts positive
        bound = 0.5 * arch.head_bias / fan_in
        for l in range(arch.n_hidden):
            st.add(f"head{l}.W", rng.uniform(-bound, bound, size=(arch.rank, fan_in)))
            st.add(f"head{l}.b", np.full(arch.rank, arch.head_bias))

    def hyper_names(self):
        names = []
        for m in range(self.arch.n_embed):
            names += [f"emb{m}.W", f"emb{m}.b"]
        for l in range(self.arch.n_hidden):
            names += [f"head{l}.W", f"head{l}.b"]
        return names

    def hyper(self, ops, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        if mu.shape != (self.arch.mu_dim,):
            raise ShapeError(f"expected {self.arch.mu_dim} PDE parameters, got {mu.shape}")
        e = ops.input(vector_jet(mu * self.arch.mu_scale))
        for m in range(self.arch.n_embed):
            e = ops.activation("tanh", ops.affine(f"emb{m}.W", f"emb{m}.b", e))
        return [
            ops.activation("relu", ops.affine(f"head{l}.W", f"head{l}.b", e))
            for l in range(self.arch.n_hidden)
        ]

    def hyper_forward(self, mu) -> list[np.ndarray]:
        """Diagonal coefficients ``s^1..s^L`` produced for ``mu``."""
        return [s.data[0, :, 0].copy() for s in self.hyper(Evaluator(self.store), mu)]

    def coefficients(self, mu=None) -> list[np.ndarray]:
        if self.phase == 2:
            return [self.store[f"s{l}"] * self.s_mask[l] for l in range(self.arch.n_hidden)]
        return self.hyper_forward(mu)

    def forward(self, ops, x, mu=None):
        if self.phase == 2:
            s_jets = [ops.leaf(f"s{l}") for l in range(self.arch.n_hidden)]
        else:
            s_jets = self.hyper(ops, mu)
        return self.trunk(ops, x, s_jets)

    def phase1_trainable(self):
        return [n for n in self.store.names() if not n.startswith("s")]

    def to_phase2(self, mu_target, learnable_basis=False) -> "HyperLRPINN":
        """Copy with the hypernetwork detached: coefficients become free
        parameters initialized at ``hyper_forward(mu_target)``; coefficients the
        ReLU zeroed stay pinned at zero."""
        if self.phase != 1:
            raise ValueError("model is already in phase 2")
        s_set = self.hyper_forward(mu_target)
        new = self.clone()
        new.phase = 2
        new.mu_target = np.atleast_1d(np.asarray(mu_target, dtype=np.float64)).copy()
        new.s_mask = [(s > 0.0).astype(np.float64) for s in s_set]
        for l, s in enumerate(s_set):
            new.store.add(f"s{l}", s)
        trainable = ["in.W", "in.b", "out.W", "out.b"] + [f"s{l}" for l in range(self.arch.n_hidden)]
        if learnable_basis:
            for l in range(self.arch.n_hidden):
                trainable += [f"lr{l}.U", f"lr{l}.V"]
        new.store.set_trainable_only(trainable)
        return new

    def trainable_count(self) -> int:
        if self.phase == 1:
            return super().trainable_count()
        total = 0
        for n in self.store.trainable():
            if n.startswith("s"):
                total += int(self.s_mask[int(n[1:])].sum())
            else:
                total += self.store[n].size
        return total

    def phase2_count(self, mu) -> int:
        """Trainable scalars a phase-2 model converted at ``mu`` would have."""
        io = sum(self.store[n].size for n in ("in.W", "in.b", "out.W", "out.b"))
        return io + sum(nnz_ranks(self.hyper_forward(mu)))


class NaiveLRPINN(LowRankTrunk):
    """Low-rank trunk with free coefficients and fixed orthonormal bases."""

    def __init__(self, arch: ArchConfig, rng):
        self.arch = arch
        self.store = ParamStore()
        self.s_mask = None
        self._init_trunk(rng, arch.rank)
        for l in range(arch.n_hidden):
            self.store.add(f"s{l}", np.ones(arch.rank))
            self.store.freeze([f"lr{l}.U", f"lr{l}.V"])

    def coefficients(self, mu=None):
        return [self.store[f"s{l}"] for l in range(self.arch.n_hidden)]

    def forward(self, ops, x, mu=None):
        return self.trunk(ops, x, [ops.leaf(f"s{l}") for l in range(self.arch.n_hidden)])


class DensePINN(Model):
    """Fully connected PINN; with ``kind='pinnp'`` the PDE parameters are extra inputs."""

    def __init__(self, arch: ArchConfig, rng):
        self.arch = arch
        self.store = ParamStore()
        d_in = arch.coord_dim + (arch.mu_dim if arch.kind == "pinnp" else 0)
        dims = [d_in] + [arch.width] * (arch.n_dense - 1) + [1]
        for k in range(arch.n_dense):
            self.store.add(f"dense{k}.W", glorot_uniform(rng, dims[k + 1], dims[k]))
            self.store.add(f"dense{k}.b", np.zeros(dims[k + 1]))

    def input_jet(self, coords, mode, mu=None):
        coords = np.asarray(coords, dtype=np.float64)
        if self.arch.kind == "pinnp":
            mu = np.atleast_1d(np.asarray(mu, dtype=np.float64)) * self.arch.mu_scale
            coords = np.hstack([coords, np.broadcast_to(mu, (coords.shape[0], mu.size))])
        return seed_jet(coords, mode)

    def forward(self, ops, x, mu=None):
        h = x
        n = self.arch.n_dense
        for k in range(n):
            h = ops.affine(f"dense{k}.W", f"dense{k}.b", h)
            if k < n - 1:
                h = ops.activation("tanh", h)
            _check(h, f"dense layer {k}")
        return h

    def layers(self):
        n = self.arch.n_dense
        return [
            DenseLayer(self.store[f"dense{k}.W"], self.store[f"dense{k}.b"], "tanh" if k < n - 1 else "identity")
            for k in range(n)
        ]


def init_model(arch: ArchConfig, rng) -> Model:
    if arch.kind == "hyper":
        return HyperLRPINN(arch, rng)
    if arch.kind == "naive":
        return NaiveLRPINN(arch, rng)
    if arch.kind in ("vanilla", "pinnp"):
        return DensePINN(arch, rng)
    raise ValueError(f"unknown model kind {arch.kind!r}")


def count_params(model: Model, phase=None) -> int:
    """Trainable scalars under the model's freeze ledger.

    ``phase`` (1, 2 or "baseline") is checked against the model rather than
    changing it.
    """
    if phase is not None:
        actual = getattr(model, "phase", "baseline") if isinstance(model, HyperLRPINN) else "baseline"
        if phase != actual:
            raise ValueError(f"model is in phase {actual!r}, not {phase!r}")
    return model.trainable_count()


def lowrank_from_dense(model: DensePINN, r: int) -> NaiveLRPINN:
    """Truncate every hidden (width x width) layer of a trained dense PINN to rank
    ``r``; the result keeps the bases fixed and trains coefficients, biases and
    the input/output layers."""
    layers = model.layers()
    hidden = layers[1:-1]
    arch = ArchConfig(
        kind="naive",
        coord_dim=model.arch.coord_dim,
        mu_dim=model.arch.mu_dim,
        width=model.arch.width,
        n_hidden=len(hidden),
        rank=r,
    )
    new = object.__new__(NaiveLRPINN)
    new.arch = arch
    new.s_mask = None
    st = new.store = ParamStore()
    st.add("in.W", layers[0].W)
    st.add("in.b", layers[0].b)
    coeffs = []
    for l, lay in enumerate(hidden):
        lr, s = svd_truncate(lay, r)
        st.add(f"lr{l}.U", lr.U, trainable=False)
        st.add(f"lr{l}.V", lr.V, trainable=False)
        st.add(f"lr{l}.b", lr.b)
        coeffs.append(s)
    st.add("out.W", layers[-1].W)
    st.add("out.b", layers[-1].b)
    for l, s in enumerate(coeffs):
        st.add(f"s{l}", s)
    return new


def dense_forward(layers, x: Jet) -> Jet:
    """Reference evaluation of a stack of :class:`DenseLayer`."""
    h = x
    for lay in layers:
        h = J.ACTIVATIONS[lay.activation][0](J.affine_jet(lay.W, lay.b, h))
    return h


def build_model(arch_dict: dict) -> Model:
    """Empty model with the right parameter shapes for ``arch_dict`` (values are
    overwritten on checkpoint load)."""
    from hlrp.diffcore import make_rng

    arch = ArchConfig(**arch_dict)
    return init_model(arch, make_rng(0))
