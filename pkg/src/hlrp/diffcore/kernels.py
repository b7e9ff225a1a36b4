"""Fused loops for the tanh jet and its adjoint.

Arrays are 2-D ``(channels, points)`` views of jet data; ``pairs`` rows are
(second-derivative channel, first-derivative channel).  The value channel is
passed in precomputed because numpy's vectorized tanh beats a scalar loop.
"""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def tanh_fwd(d, v, nfirst, pairs, out):
    n_pts = d.shape[1]
    for n in range(n_pts):
        out[0, n] = v[n]
    for k in range(1, 1 + nfirst):
        for n in range(n_pts):
            out[k, n] = d[k, n] * (1.0 - v[n] * v[n])
    for i in range(pairs.shape[0]):
        k2 = pairs[i, 0]
        k1 = pairs[i, 1]
        for n in range(n_pts):
            vv = v[n]
            d1 = 1.0 - vv * vv
            g = d[k1, n]
            out[k2, n] = -2.0 * vv * d1 * g * g + d1 * d[k2, n]


@numba.njit(cache=True, nogil=True)
def tanh_bwd(d, v, adj, nfirst, pairs, a_in):
    n_pts = d.shape[1]
    for n in range(n_pts):
        vv = v[n]
        a_in[0, n] = adj[0, n] * (1.0 - vv * vv)
    for k in range(1, 1 + nfirst):
        for n in range(n_pts):
            vv = v[n]
            d1 = 1.0 - vv * vv
            a_in[0, n] += adj[k, n] * d[k, n] * (-2.0 * vv * d1)
            a_in[k, n] = adj[k, n] * d1
    for i in range(pairs.shape[0]):
        k2 = pairs[i, 0]
        k1 = pairs[i, 1]
        for n in range(n_pts):
            vv = v[n]
            d1 = 1.0 - vv * vv
            d2 = -2.0 * vv * d1
            d3 = -2.0 * d1 * d1 + 4.0 * vv * vv * d1
            a_h = adj[k2, n]
            gk = d[k1, n]
            a_in[0, n] += a_h * (d3 * gk * gk + d2 * d[k2, n])
            a_in[k1, n] += a_h * 2.0 * d2 * gk
            a_in[k2, n] = a_h * d1


def pair_array(pairs):
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)
