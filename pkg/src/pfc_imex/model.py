"""Phase field crystal free energy, nonlinearity and its Lipschitz truncation.

With the linear stabilizer ``a`` the chemical potential splits as
``mu = P_a phi + f(phi)`` where ``P_a = (Delta + I)^2 + a`` and

    f(phi) = phi^3 - r phi^2 - (eps + a) phi,
    F(phi) = phi^4 / 4 - r phi^3 / 3 - (eps + a) phi^2 / 2.

Beyond ``|phi| > m0`` the truncated pair ``f_trunc``/``F_trunc`` continues
``f`` linearly (C1 match at the knots), so ``F_trunc`` grows quadratically
and ``f_trunc`` is globally Lipschitz.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import spectral
from .errors import ConfigurationError


@dataclass(frozen=True)
class ModelParams:
    epsilon: float = 0.025
    a: float = 0.001
    alpha: float = 0.0
    beta: float = 1.0
    r: float = 0.0
    m0: float = math.inf

    def __post_init__(self):
        for name in ("epsilon", "a", "alpha", "beta", "r"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.a < 0.0:
            raise ConfigurationError(f"a must be >= 0, got {self.a}")
        if self.r < 0.0:
            raise ConfigurationError(f"r must be >= 0, got {self.r}")
        if not self.m0 > 0.0:
            raise ConfigurationError(f"m0 must be > 0, got {self.m0}")

    @property
    def ea(self) -> float:
        return self.epsilon + self.a

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.m0)

    @property
    def lip(self) -> float:
        return lipschitz_constant(self)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lip"] = self.lip
        return out


def lipschitz_constant(params: ModelParams) -> float:
    """Global Lipschitz constant of ``f_trunc``: ``max |f'|`` over ``[-m0, m0]``."""
    m0 = params.m0
    if not math.isfinite(m0):
        return math.inf
    candidates = [df_plain(m0, params), df_plain(-m0, params)]
    if abs(params.r / 3.0) <= m0:
        candidates.append(df_plain(params.r / 3.0, params))
    return float(max(abs(v) for v in candidates))


def f_plain(phi, params: ModelParams):
    return phi * phi * phi - params.r * phi * phi - params.ea * phi


def df_plain(phi, params: ModelParams):
    return 3.0 * phi * phi - 2.0 * params.r * phi - params.ea


def big_f(phi, params: ModelParams):
    return 0.25 * phi**4 - (params.r / 3.0) * phi**3 - 0.5 * params.ea * phi**2


def f_trunc(phi, params: ModelParams):
    phi = np.asarray(phi, dtype=float)
    inner = f_plain(phi, params)
    m0 = params.m0
    if not math.isfinite(m0):
        return inner
    hi = f_plain(m0, params) + df_plain(m0, params) * (phi - m0)
    lo = f_plain(-m0, params) + df_plain(-m0, params) * (phi + m0)
    return np.where(phi > m0, hi, np.where(phi < -m0, lo, inner))


def big_f_trunc(phi, params: ModelParams):
    phi = np.asarray(phi, dtype=float)
    inner = big_f(phi, params)
    m0 = params.m0
    if not math.isfinite(m0):
        return inner

    def ext(knot):
        d = phi - knot
        return big_f(knot, params) + f_plain(knot, params) * d + 0.5 * df_plain(knot, params) * d * d

    return np.where(phi > m0, ext(m0), np.where(phi < -m0, ext(-m0), inner))


def energy(phi, grid, params: ModelParams, use_trunc: bool = False, phi_hat=None) -> float:
    """Stabilized free energy ``int phi P_0 phi / 2 + a phi^2 / 2 + F(phi) dx``.

    ``P_0 = (Delta + I)^2`` is applied in Fourier space; the local terms use
    the nodal sum times the cell volume.
    """
    phi = np.asarray(phi, dtype=float)
    if phi_hat is None:
        phi_hat = spectral.forward(phi, grid)
    gradient_part = 0.5 * spectral.inner_product(phi_hat, phi_hat, grid, (1.0 - grid.ksq) ** 2)
    F = big_f_trunc(phi, params) if use_trunc else big_f(phi, params)
    local = float(np.sum(0.5 * params.a * phi * phi + F)) * grid.cell_volume
    return gradient_part + local


def original_energy(phi, grid, epsilon: float, r: float = 0.0, phi_hat=None) -> float:
    """Unstabilized energy ``int phi^4/4 - r phi^3/3 - eps phi^2/2 + phi (I + Delta)^2 phi / 2``."""
    phi = np.asarray(phi, dtype=float)
    if phi_hat is None:
        phi_hat = spectral.forward(phi, grid)
    gradient_part = 0.5 * spectral.inner_product(phi_hat, phi_hat, grid, (1.0 - grid.ksq) ** 2)
    local = np.sum(0.25 * phi**4 - (r / 3.0) * phi**3 - 0.5 * epsilon * phi**2)
    return gradient_part + float(local) * grid.cell_volume


def mass(phi, grid) -> float:
    return float(np.sum(phi)) * grid.cell_volume


def default_m0(phi0, safety_factor: float = 10.0) -> float:
    """Truncation bound used when ``m0`` is ``"auto"``."""
    return safety_factor * max(1.0, float(np.max(np.abs(phi0))))


def poincare_constant(grid) -> float:
    """``1 / sqrt(smallest nonzero -Laplacian eigenvalue)`` on the periodic box."""
    return max(grid.lengths) / (2.0 * math.pi)


@dataclass(frozen=True)
class BoundChain:
    m1: float
    m2: float
    m3: float
    m: float
    c_p: float
    c_omega: float
    eps_free: float


def bound_chain(energy0: float, mean0: float, omega_volume: float,
                c_omega: float, c_p: float) -> BoundChain:
    """A priori sup-norm bound from the initial energy and mean.

    ``m1`` bounds ``||Delta u||``, ``m2`` bounds ``||u||`` and ``m3`` bounds
    ``||grad u||`` (all L2); ``m = c_omega * sqrt(m1^2 + m2^2 + m3^2)``.
    """
    if c_omega <= 0 or c_p <= 0 or omega_volume <= 0:
        raise ConfigurationError("c_omega, c_p and omega_volume must be positive")
    radicand = energy0 + omega_volume
    if radicand < 0:
        raise ConfigurationError("energy0 + |Omega| must be nonnegative")
    eps_free = min(1.0, 1.0 / c_p)
    mean_l2 = abs(mean0) * math.sqrt(omega_volume)
    m1 = 2.0 * math.sqrt(radicand)
    m2 = (c_p / eps_free) * m1 + 2.0 * mean_l2
    m3 = eps_free * mean_l2 + (0.5 * c_p + 0.5 / eps_free) * m1
    m = c_omega * math.sqrt(m1 * m1 + m2 * m2 + m3 * m3)
    return BoundChain(m1=m1, m2=m2, m3=m3, m=m, c_p=c_p, c_omega=c_omega, eps_free=eps_free)
