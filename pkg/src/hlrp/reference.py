"""Ground-truth solution fields: closed forms where they exist, exact Fourier
evolution for convection-diffusion, Strang splitting for the full CDR equation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hlrp.pde import TWO_PI, CdrParams, HelmholtzParams, ProblemSpec, helmholtz_solution, initial_condition

NX, NT = 256, 100
NXY = 100


@dataclass
class ReferenceField:
    """``values[i, j]`` is the solution at ``(axis0[i], axis1[j])``: (x, t) for
    1D problems, (x, y) for Helmholtz."""

    axis0: np.ndarray
    axis1: np.ndarray
    values: np.ndarray
    provenance: str  # analytic | spectral | splitting

    def __post_init__(self):
        if self.values.shape != (self.axis0.size, self.axis1.size):
            raise ValueError("values do not match the grid")
        if not np.isfinite(self.values).all():
            raise ValueError("reference values must be finite")
        for ax in (self.axis0, self.axis1):
            if ax.size > 1 and not (np.diff(ax) > 0).all():
                raise ValueError("grid axes must be strictly increasing")

    def at_nodes(self, i, j):
        return self.values[i, j]

    def points(self, i, j):
        return np.column_stack([self.axis0[i], self.axis1[j]])


def cdr_grid(nx=NX, nt=NT, T=1.0):
    return np.arange(nx) * (TWO_PI / nx), np.linspace(0.0, T, nt)


def helmholtz_grid(n=NXY):
    g = np.linspace(-1.0, 1.0, n)
    return g, g.copy()


def convection_exact(spec: ProblemSpec, grid=None) -> ReferenceField:
    x, t = cdr_grid(T=spec.T) if grid is None else grid
    beta = spec.params.beta
    shifted = np.mod(x[:, None] - beta * t[None, :], TWO_PI)
    return ReferenceField(x, t, initial_condition(spec, shifted), "analytic")


def logistic(u0, rho, t):
    """Exact flow of ``u' = rho u (1 - u)``."""
    g = np.exp(rho * t)
    return u0 * g / (u0 * g + 1.0 - u0)


def reaction_exact(spec: ProblemSpec, grid=None) -> ReferenceField:
    x, t = cdr_grid(T=spec.T) if grid is None else grid
    u0 = initial_condition(spec, x)
    if u0.min() < 0.0 or u0.max() > 1.0:
        raise ValueError("closed-form reaction solution needs u0 in [0, 1]")
    return ReferenceField(x, t, logistic(u0[:, None], spec.params.rho, t[None, :]), "analytic")


def _wavenumbers(nx):
    # domain length 2 pi, so integer wavenumbers
    return np.fft.fftfreq(nx, d=1.0 / nx)


def convdiff_spectral(spec: ProblemSpec, grid=None) -> ReferenceField:
    x, t = cdr_grid(T=spec.T) if grid is None else grid
    k = _wavenumbers(x.size)
    u0_hat = np.fft.fft(initial_condition(spec, x))
    p = spec.params
    growth = np.exp(np.outer(t, -1j * p.beta * k - p.nu * k**2))
    u = np.fft.ifft(u0_hat[None, :] * growth, axis=1).real
    return ReferenceField(x, t, u.T.copy(), "spectral")


def cdr_splitting(spec: ProblemSpec, grid=None, dt=1e-3) -> ReferenceField:
    """Strang splitting: half-step exact reaction, full-step exact Fourier
    convection-diffusion, half-step reaction.

    The step is shrunk to ``spacing / ceil(spacing / dt)`` so that every output
    time is hit exactly.
    """
    x, t = cdr_grid(T=spec.T) if grid is None else grid
    p = spec.params
    k = _wavenumbers(x.size)
    u = initial_condition(spec, x)
    out = np.empty((x.size, t.size))
    out[:, 0] = u
    for j in range(1, t.size):
        span = t[j] - t[j - 1]
        n = max(1, int(np.ceil(span / dt - 1e-9)))
        h = span / n
        prop = np.exp((-1j * p.beta * k - p.nu * k**2) * h)
        for _ in range(n):
            u = logistic(u, p.rho, 0.5 * h)
            u = np.fft.ifft(np.fft.fft(u) * prop).real
            u = logistic(u, p.rho, 0.5 * h)
        out[:, j] = u
    return ReferenceField(x, t, out, "splitting")


def helmholtz_exact(p: HelmholtzParams, grid=None) -> ReferenceField:
    x, y = helmholtz_grid() if grid is None else grid
    return ReferenceField(x, y, helmholtz_solution(x[:, None], y[None, :], p), "analytic")


def reference_field(spec: ProblemSpec, dt=1e-3) -> ReferenceField:
    """Best available oracle for ``spec`` on its default grid."""
    if spec.family == "helmholtz":
        return helmholtz_exact(spec.params)
    p: CdrParams = spec.params
    if p.rho == 0.0:
        if p.nu == 0.0:
            return convection_exact(spec)
        return convdiff_spectral(spec)
    if p.beta == 0.0 and p.nu == 0.0:
        return reaction_exact(spec)
    return cdr_splitting(spec, dt=dt)
