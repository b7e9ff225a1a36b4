"""Parameter storage and reverse-mode gradients over jet-propagating graphs."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from hlrp.diffcore import jet as J
from hlrp.errors import NumericError, ShapeError


class ParamStore:
    """Named float64 tensors with a trainable flag each.  Iteration order is
    insertion order."""

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}
        self._frozen: set[str] = set()

    def add(self, name, value, trainable=True):
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        self._params[name] = np.array(value, dtype=np.float64)
        if not trainable:
            self._frozen.add(name)

    def __getitem__(self, name) -> np.ndarray:
        return self._params[name]

    def __setitem__(self, name, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._params[name].shape:
            raise ShapeError(f"{name}: shape {value.shape} != {self._params[name].shape}")
        self._params[name] = value

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def trainable(self) -> list[str]:
        return [n for n in self._params if n not in self._frozen]

    def is_trainable(self, name) -> bool:
        return name in self._params and name not in self._frozen

    def freeze(self, names: Iterable[str]):
        for n in names:
            if n not in self._params:
                raise KeyError(n)
            self._frozen.add(n)

    def unfreeze(self, names: Iterable[str]):
        for n in names:
            self._frozen.discard(n)

    def set_trainable_only(self, names: Iterable[str]):
        keep = set(names)
        missing = keep - set(self._params)
        if missing:
            raise KeyError(sorted(missing))
        self._frozen = set(self._params) - keep

    def copy(self) -> "ParamStore":
        out = ParamStore()
        out._params = {k: v.copy() for k, v in self._params.items()}
        out._frozen = set(self._frozen)
        return out


class Tape:
    """Records jet ops in forward order so adjoints can be pushed back through
    them.  Parameters are referenced by name in a :class:`ParamStore`;
    gradients are only formed for trainable names."""

    def __init__(self, store: ParamStore):
        self.store = store
        self._ops: list[Callable[[], None]] = []
        self._adj: dict[int, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def _acc(self, x, a):
        k = id(x)
        if k in self._adj:
            self._adj[k] = self._adj[k] + a
        else:
            self._adj[k] = a

    def _acc_param(self, name, g):
        if not self.store.is_trainable(name):
            return
        if name in self.grads:
            self.grads[name] = self.grads[name] + g
        else:
            self.grads[name] = g

    def _needs_adjoint(self, x) -> bool:
        # leaves created from frozen params and raw input jets need nothing
        return getattr(x, "_tracked", True)

    def leaf(self, name) -> J.Jet:
        """Parameter vector ``name`` as a value-only jet routed to its gradient."""
        out = J.vector_jet(self.store[name])
        out._tracked = self.store.is_trainable(name)

        def bw():
            a = self._adj.pop(id(out), None)
            if a is not None:
                self._acc_param(name, a[0, :, 0])

        self._ops.append(bw)
        return out

    def input(self, x: J.Jet) -> J.Jet:
        x._tracked = False
        return x

    def affine(self, w, b, x: J.Jet) -> J.Jet:
        W = self.store[w]
        out = J.affine_jet(W, self.store[b], x)
        out._tracked = self._needs_adjoint(x) or self.store.is_trainable(w) or self.store.is_trainable(b)

        def bw():
            a = self._adj.pop(id(out), None)
            if a is None:
                return
            dW, db, ax = J.affine_jet_vjp(W, x, a, need_weight=self.store.is_trainable(w))
            if dW is not None:
                self._acc_param(w, dW)
            self._acc_param(b, db)
            if self._needs_adjoint(x):
                self._acc(x, ax)

        self._ops.append(bw)
        return out

    def lowrank(self, u, v, b, s: J.Jet, x: J.Jet, mask=None) -> J.Jet:
        """Factored layer with coefficients taken from the value of jet ``s``.
        ``mask`` (0/1 per coefficient) pins coefficients to zero."""
        U, V = self.store[u], self.store[v]
        svec = s.data[0, :, 0]
        if mask is not None:
            svec = svec * mask
        out, cache = J.lowrank_jet(U, svec, V, self.store[b], x)
        basis = self.store.is_trainable(u) or self.store.is_trainable(v)
        out._tracked = (
            self._needs_adjoint(x) or self._needs_adjoint(s) or basis or self.store.is_trainable(b)
        )

        def bw():
            a = self._adj.pop(id(out), None)
            if a is None:
                return
            dU, ds, dV, db, ax = J.lowrank_jet_vjp(U, svec, V, x, cache, a, need_basis=basis)
            if basis:
                self._acc_param(u, dU)
                self._acc_param(v, dV)
            self._acc_param(b, db)
            if self._needs_adjoint(s):
                if mask is not None:
                    ds = ds * mask
                self._acc(s, ds.reshape(1, -1, 1))
            if self._needs_adjoint(x):
                self._acc(x, ax)

        self._ops.append(bw)
        return out

    def activation(self, kind, z: J.Jet) -> J.Jet:
        fwd, vjp = J.ACTIVATIONS[kind]
        out = fwd(z)
        if out is z:
            return z
        out._tracked = self._needs_adjoint(z)

        def bw():
            a = self._adj.pop(id(out), None)
            if a is not None and self._needs_adjoint(z):
                self._acc(z, vjp(z, out, a))

        self._ops.append(bw)
        return out

    def backward(self, seeds):
        """Push ``(jet, adjoint)`` pairs back through the recorded ops."""
        for x, a in seeds:
            if a.shape != x.data.shape:
                raise ShapeError(f"adjoint shape {a.shape} != jet shape {x.data.shape}")
            self._acc(x, a)
        for bw in reversed(self._ops):
            bw()
        self._ops.clear()
        self._adj.clear()
        return self.grads


def param_grad(forward, loss, store: ParamStore):
    """Gradient of a scalar loss over jets with respect to every trainable
    parameter in ``store``.

    ``forward(tape)`` builds the graph and returns whatever ``loss`` needs.
    ``loss(outputs)`` returns ``(total, terms, seeds, direct)`` where ``terms``
    maps term names to their values, ``seeds`` is a list of ``(jet, dtotal/djet)``
    and ``direct`` holds gradient contributions w.r.t. parameters that do not go
    through the tape (e.g. penalties on raw weights).

    Returns ``(total, terms, grads)``.
    """
    tape = Tape(store)
    outputs = forward(tape)
    total, terms, seeds, direct = loss(outputs)
    for name, val in terms.items():
        if not np.all(np.isfinite(val)):
            raise NumericError(name)
    if not np.isfinite(total):
        raise NumericError("total")
    grads = tape.backward(seeds)
    for name, g in direct.items():
        tape._acc_param(name, g)
    for name in store.trainable():
        if name not in grads:
            grads[name] = np.zeros_like(store[name])
    return total, terms, grads
