"""Jets: batched network activations bundled with input derivatives.

A jet stores an array of shape ``(channels, width, batch)``.  Channel 0 is the
value; the remaining channels are first derivatives with respect to the
coordinate directions followed by pure second derivatives.  Mixed partials are
never carried.

Every forward op has a matching ``*_vjp`` that maps the adjoint of the output
(same shape as the output data) back to the adjoint of the input and to the
parameter gradients.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from hlrp.diffcore import kernels as K
from hlrp.errors import ModeError, ShapeError


class Mode(enum.Enum):
    VALUE = "value"
    SPACE1D_TIME = "space1d_time"
    SPACE2D = "space2d"

    @property
    def channels(self) -> tuple[str, ...]:
        return _CHANNELS[self]

    @property
    def directions(self) -> tuple[str, ...]:
        """Coordinate directions with a first-derivative channel."""
        return _DIRECTIONS[self]

    @property
    def second_pairs(self) -> tuple[tuple[int, int], ...]:
        """(second-derivative channel, matching first-derivative channel)."""
        return _SECOND[self]


_CHANNELS = {
    Mode.VALUE: ("v",),
    Mode.SPACE1D_TIME: ("v", "x", "t", "xx"),
    Mode.SPACE2D: ("v", "x", "y", "xx", "yy"),
}
_DIRECTIONS = {Mode.VALUE: (), Mode.SPACE1D_TIME: ("x", "t"), Mode.SPACE2D: ("x", "y")}
_SECOND = {Mode.VALUE: (), Mode.SPACE1D_TIME: ((3, 1),), Mode.SPACE2D: ((3, 1), (4, 2))}
_PAIRS = {m: K.pair_array(p) for m, p in _SECOND.items()}


@dataclass(eq=False)
class Jet:
    data: np.ndarray
    mode: Mode

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != len(self.mode.channels):
            raise ShapeError(f"jet data shape {self.data.shape} does not fit mode {self.mode.value}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def batch(self) -> int:
        return self.data.shape[2]

    def channel(self, name: str) -> np.ndarray:
        """Channel ``name`` as a ``(width, batch)`` array, or ``(batch,)`` for width-1 jets."""
        try:
            k = self.mode.channels.index(name)
        except ValueError:
            raise ModeError(f"jet in mode {self.mode.value} has no {name!r} channel") from None
        out = self.data[k]
        return out[0] if self.width == 1 else out

    value = property(lambda self: self.channel("v"))
    d_x = property(lambda self: self.channel("x"))
    d_t = property(lambda self: self.channel("t"))
    d_y = property(lambda self: self.channel("y"))
    d_xx = property(lambda self: self.channel("xx"))
    d_yy = property(lambda self: self.channel("yy"))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


def seed_jet(coords, mode: Mode) -> Jet:
    """Input jet for coordinates of shape ``(batch, d_in)``.

    The leading columns are the coordinate directions of ``mode`` (``x, t`` or
    ``x, y``) and receive unit first-derivative seeds; any further columns
    (e.g. PDE parameters fed as inputs) are constants.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2:
        raise ShapeError("coords must be a (batch, d_in) array")
    batch, d_in = coords.shape
    ndir = len(mode.directions)
    if d_in < ndir:
        raise ShapeError(f"mode {mode.value} needs at least {ndir} coordinate columns")
    data = np.zeros((len(mode.channels), d_in, batch))
    data[0] = coords.T
    for k in range(ndir):
        data[1 + k, k, :] = 1.0
    return Jet(data, mode)


def vector_jet(vec) -> Jet:
    """A plain vector as a value-only jet with batch 1."""
    vec = np.asarray(vec, dtype=np.float64).reshape(1, -1, 1)
    return Jet(vec, Mode.VALUE)


def _apply(M, data):
    # M @ data over the width axis, for every channel at once
    return np.matmul(M, data)


def _outer(a, data):
    # sum over channels and batch of a[c, :, n] data[c, :, n]^T
    return np.matmul(a, data.transpose(0, 2, 1)).sum(axis=0)


def affine_jet(W, b, x: Jet) -> Jet:
    W = np.asarray(W)
    b = np.asarray(b)
    if W.ndim != 2 or W.shape[1] != x.width or b.shape != (W.shape[0],):
        raise ShapeError(f"affine map {W.shape} + {b.shape} cannot take width {x.width}")
    out = _apply(W, x.data)
    out[0] += b[:, None]
    return Jet(out, x.mode)


def affine_jet_vjp(W, x: Jet, adj, need_weight=True):
    """Returns ``(dW, db, adj_x)``; ``dW`` is None when ``need_weight`` is False."""
    dW = _outer(adj, x.data) if need_weight else None
    db = adj[0].sum(axis=1)
    return dW, db, _apply(W.T, adj)


def _dense_route(U, V):
    # two thin products cost more than one square one once r(n_in + n_out) >= n_in n_out
    return U.shape[1] * (U.shape[0] + V.shape[0]) >= U.shape[0] * V.shape[0]


def lowrank_jet(U, s, V, b, x: Jet):
    """Factored layer ``U (s * (V^T h)) + b``.

    Returns the output jet and the cached intermediate for the adjoint: the
    projection ``V^T h`` on the thin route, or the materialized weight
    ``U diag(s) V^T`` when the rank is large enough that one square product is
    cheaper than two thin ones.
    """
    U, s, V, b = map(np.asarray, (U, s, V, b))
    r = s.shape[0]
    if U.shape[1] != r or V.shape[1] != r or V.shape[0] != x.width or b.shape != (U.shape[0],):
        raise ShapeError(
            f"low-rank layer U{U.shape} s{s.shape} V{V.shape} b{b.shape} cannot take width {x.width}"
        )
    if _dense_route(U, V):
        W = (U * s) @ V.T
        out = _apply(W, x.data)
        cache = ("dense", W)
    else:
        p = _apply(V.T, x.data)
        out = _apply(U, p * s[:, None])
        cache = ("thin", p)
    out[0] += b[:, None]
    return Jet(out, x.mode), cache


def lowrank_jet_vjp(U, s, V, x: Jet, cache, adj, need_basis=True):
    """Returns ``(dU, ds, dV, db, adj_x)``; basis grads are None when not needed."""
    db = adj[0].sum(axis=1)
    route, c = cache
    if route == "dense":
        G = _outer(adj, x.data)  # gradient w.r.t. the materialized weight
        GV = G @ V
        ds = (U * GV).sum(axis=0)
        if need_basis:
            dU = GV * s
            dV = (G.T @ U) * s
        else:
            dU = dV = None
        return dU, ds, dV, db, _apply(c.T, adj)
    p = c
    q_adj = _apply(U.T, adj)
    ds = np.einsum("crn,crn->r", q_adj, p)
    p_adj = q_adj * s[:, None]
    if need_basis:
        dU = _outer(adj, p * s[:, None])
        dV = _outer(x.data, p_adj)
    else:
        dU = dV = None
    return dU, ds, dV, db, _apply(V, p_adj)


def tanh_jet_reference(z: Jet) -> Jet:
    """Plain numpy tanh jet; :func:`tanh_jet` is the fused equivalent."""
    d = z.data
    out = np.empty_like(d)
    v = np.tanh(d[0])
    d1 = 1.0 - v * v
    out[0] = v
    nfirst = len(z.mode.directions)
    if nfirst:
        np.multiply(d[1 : 1 + nfirst], d1, out=out[1 : 1 + nfirst])
        d2 = -2.0 * v * d1
        for k2, k1 in z.mode.second_pairs:
            g = d[k1]
            out[k2] = d2 * g * g + d1 * d[k2]
    return Jet(out, z.mode)


def tanh_jet_vjp_reference(z: Jet, out: Jet, adj):
    d = z.data
    v = out.data[0]
    d1 = 1.0 - v * v
    a_in = np.empty_like(adj)
    a_z = adj[0] * d1
    nfirst = len(z.mode.directions)
    if nfirst:
        d2 = -2.0 * v * d1
        d3 = -2.0 * d1 * d1 + 4.0 * v * v * d1
        g = d[1 : 1 + nfirst]
        a_g = adj[1 : 1 + nfirst]
        a_z += (a_g * g).sum(axis=0) * d2
        np.multiply(a_g, d1, out=a_in[1 : 1 + nfirst])
        for k2, k1 in z.mode.second_pairs:
            a_h = adj[k2]
            gk = d[k1]
            a_z += a_h * (d3 * gk * gk + d2 * d[k2])
            a_in[k1] += a_h * 2.0 * d2 * gk
            a_in[k2] = a_h * d1
    a_in[0] = a_z
    return a_in


def tanh_jet(z: Jet) -> Jet:
    d = np.ascontiguousarray(z.data)
    c = d.shape[0]
    out = np.empty_like(d)
    v = np.tanh(d[0]).reshape(-1)
    K.tanh_fwd(d.reshape(c, -1), v, len(z.mode.directions), _PAIRS[z.mode], out.reshape(c, -1))
    return Jet(out, z.mode)


def tanh_jet_vjp(z: Jet, out: Jet, adj):
    d = np.ascontiguousarray(z.data)
    adj = np.ascontiguousarray(adj)
    c = d.shape[0]
    a_in = np.empty_like(d)
    K.tanh_bwd(
        d.reshape(c, -1),
        np.ascontiguousarray(out.data[0]).reshape(-1),
        adj.reshape(c, -1),
        len(z.mode.directions),
        _PAIRS[z.mode],
        a_in.reshape(c, -1),
    )
    return a_in


def relu_jet(z: Jet) -> Jet:
    # second derivative of relu is zero away from the kink
    mask = z.data[0] > 0.0
    return Jet(np.where(mask, z.data, 0.0), z.mode)


def relu_jet_vjp(z: Jet, out: Jet, adj):
    return np.where(z.data[0] > 0.0, adj, 0.0)


ACTIVATIONS = {
    "tanh": (tanh_jet, tanh_jet_vjp),
    "relu": (relu_jet, relu_jet_vjp),
    "identity": (lambda z: z, lambda z, out, adj: adj),
}
