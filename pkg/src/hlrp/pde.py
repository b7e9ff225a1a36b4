"""Parameterized PDE families: convection-diffusion-reaction on a periodic 1D
domain and the 2D Helmholtz equation with a manufactured forcing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hlrp.diffcore import Jet, Mode
from hlrp.errors import ConfigError, ModeError

TWO_PI = 2.0 * np.pi

# free coefficients of each family, in the order they form the PDE-parameter vector
FAMILY_COEFFS = {
    "convection": ("beta",),
    "diffusion": ("nu",),
    "reaction": ("rho",),
    "convdiff": ("beta", "nu"),
    "reacdiff": ("nu", "rho"),
    "cdr": ("beta", "nu", "rho"),
    "helmholtz": ("a",),
}


@dataclass(frozen=True)
class CdrParams:
    beta: float = 0.0
    nu: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.beta, self.nu, self.rho])):
            raise ValueError("CDR coefficients must be finite")
        if self.nu < 0:
            raise ValueError("diffusion coefficient must be >= 0")


@dataclass(frozen=True)
class HelmholtzParams:
    a1: float
    a2: float
    k: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite([self.a1, self.a2, self.k])):
            raise ValueError("Helmholtz parameters must be finite")
        if self.k == 0:
            raise ValueError("wavenumber k must be nonzero")


@dataclass(frozen=True)
class ProblemSpec:
    family: str
    params: CdrParams | HelmholtzParams
    ic: str | None = "one_plus_sin"  # one_plus_sin | gaussian | sin | None
    ic_sigma: float = np.pi / 4
    bc: str = "periodic"  # periodic | dirichlet_exact
    T: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILY_COEFFS:
            raise ConfigError(f"unknown PDE family {self.family!r}")
        twod = self.family == "helmholtz"
        if twod != isinstance(self.params, HelmholtzParams):
            raise ConfigError(f"{self.family} needs {'Helmholtz' if twod else 'CDR'} parameters")
        if twod and (self.bc != "dirichlet_exact" or self.ic is not None):
            raise ConfigError("helmholtz uses Dirichlet data from the exact solution and no IC")
        if not twod and (self.bc != "periodic" or self.ic not in ("one_plus_sin", "gaussian", "sin")):
            raise ConfigError("1D problems use a periodic BC and one of the supported ICs")

    @property
    def mode(self) -> Mode:
        return Mode.SPACE2D if self.family == "helmholtz" else Mode.SPACE1D_TIME

    @property
    def domain(self):
        if self.family == "helmholtz":
            return ((-1.0, 1.0), (-1.0, 1.0))
        return ((0.0, TWO_PI), (0.0, self.T))

    @property
    def mu(self) -> np.ndarray:
        if self.family == "helmholtz":
            return np.array([self.params.a1])
        return np.array([getattr(self.params, c) for c in FAMILY_COEFFS[self.family]], dtype=np.float64)


# preset initial conditions per family
_PRESET_IC = {
    "convection": ("one_plus_sin", np.pi / 4),
    "reaction": ("gaussian", np.pi / 4),
    "reacdiff": ("gaussian", np.pi / 4),
    "diffusion": ("gaussian", np.pi / 2),
    "convdiff": ("gaussian", np.pi / 2),
    "cdr": ("gaussian", np.pi / 2),
}


def make_spec(family: str, mu, k: float = 1.0, ic=None, ic_sigma=None) -> ProblemSpec:
    """Problem instance of a preset family at PDE parameters ``mu``."""
    if family not in FAMILY_COEFFS:
        raise ConfigError(f"unknown PDE family {family!r}")
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    names = FAMILY_COEFFS[family]
    if mu.shape != (len(names),):
        raise ConfigError(f"{family} takes {len(names)} parameter(s) {names}, got {mu.tolist()}")
    if family == "helmholtz":
        return ProblemSpec("helmholtz", HelmholtzParams(mu[0], mu[0], k), ic=None, bc="dirichlet_exact")
    default_ic, default_sigma = _PRESET_IC[family]
    return ProblemSpec(
        family,
        CdrParams(**{n: float(v) for n, v in zip(names, mu)}),
        ic=ic or default_ic,
        ic_sigma=default_sigma if ic_sigma is None else ic_sigma,
    )


def _need(jet: Jet, mode: Mode):
    if jet.mode is not mode:
        raise ModeError(f"operator needs a {mode.value} jet, got {jet.mode.value}")


def cdr_residual(jet: Jet, p: CdrParams) -> np.ndarray:
    _need(jet, Mode.SPACE1D_TIME)
    u = jet.value
    return jet.d_t + p.beta * jet.d_x - p.nu * jet.d_xx - p.rho * u * (1.0 - u)


def cdr_residual_vjp(jet: Jet, p: CdrParams, adj) -> np.ndarray:
    """Adjoint of the output jet data given the adjoint of the residual."""
    out = np.zeros_like(jet.data)
    u = jet.data[0, 0]
    out[0, 0] = adj * (-p.rho * (1.0 - 2.0 * u))
    out[1, 0] = adj * p.beta
    out[2, 0] = adj
    out[3, 0] = adj * (-p.nu)
    return out


def forcing_q(x, y, p: HelmholtzParams):
    a1, a2 = p.a1 * np.pi, p.a2 * np.pi
    return (-(a1**2) - a2**2 + p.k**2) * np.sin(a1 * x) * np.sin(a2 * y)


def helmholtz_solution(x, y, p: HelmholtzParams):
    """Solution matching :func:`forcing_q`."""
    return np.sin(p.a1 * np.pi * x) * np.sin(p.a2 * np.pi * y)


def helmholtz_residual(jet: Jet, p: HelmholtzParams, coords) -> np.ndarray:
    _need(jet, Mode.SPACE2D)
    coords = np.asarray(coords)
    return jet.d_xx + jet.d_yy + p.k**2 * jet.value - forcing_q(coords[:, 0], coords[:, 1], p)


def helmholtz_residual_vjp(jet: Jet, p: HelmholtzParams, adj) -> np.ndarray:
    out = np.zeros_like(jet.data)
    out[0, 0] = adj * p.k**2
    out[3, 0] = adj
    out[4, 0] = adj
    return out


def pde_residual(spec: ProblemSpec, jet: Jet, coords):
    if spec.family == "helmholtz":
        return helmholtz_residual(jet, spec.params, coords)
    return cdr_residual(jet, spec.params)


def pde_residual_vjp(spec: ProblemSpec, jet: Jet, adj):
    if spec.family == "helmholtz":
        return helmholtz_residual_vjp(jet, spec.params, adj)
    return cdr_residual_vjp(jet, spec.params, adj)


def initial_condition(spec: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.ic == "one_plus_sin":
        return 1.0 + np.sin(x)
    if spec.ic == "sin":
        return np.sin(x)
    if spec.ic == "gaussian":
        # unnormalized bump with peak 1 at x = pi
        return np.exp(-((x - np.pi) ** 2) / (2.0 * spec.ic_sigma**2))
    raise ModeError(f"{spec.family} has no initial condition")


def boundary_residual(spec: ProblemSpec, u_a, u_b) -> np.ndarray:
    """Periodic: ``u_a = u(0, t)``, ``u_b = u(2 pi, t)``.  Dirichlet: ``u_a`` is
    the model on the boundary, ``u_b`` the exact boundary data."""
    return np.asarray(u_a) - np.asarray(u_b)
