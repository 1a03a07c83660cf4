"""Periodic grids, real FFTs and diagonal Fourier symbols.

Fields are plain ``numpy`` arrays of shape ``grid.dims`` indexed ``[ix, iy, iz]``.
Spectral coefficients use the real-transform half-spectrum layout (last axis
truncated to ``n // 2 + 1``). The forward transform is unnormalized and the
inverse divides by the node count, so mode 0 holds ``N * mean``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ConfigurationError, NumericError


@dataclass(frozen=True)
class Grid:
    dims: tuple
    lengths: tuple
    workers: int = 1

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_nodes(self) -> int:
        return math.prod(self.dims)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def cell_volume(self) -> float:
        return self.volume / self.n_nodes

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.dims))

    @property
    def spectral_shape(self) -> tuple:
        return self.dims[:-1] + (self.dims[-1] // 2 + 1,)

    @cached_property
    def wavenumbers(self) -> tuple:
        """Per-axis wavenumbers ``2 pi m / L`` with m = 0..n/2, -(n/2-1)..-1."""
        ks = []
        for n, L in zip(self.dims, self.lengths):
            m = np.concatenate([np.arange(0, n // 2 + 1), np.arange(-(n // 2) + 1, 0)])
            ks.append(2.0 * np.pi * m / L)
        return tuple(ks)

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|k|^2`` on the half-spectrum layout."""
        ks = list(self.wavenumbers)
        ks[-1] = ks[-1][: self.dims[-1] // 2 + 1]
        mesh = np.meshgrid(*ks, indexing="ij", sparse=True)
        out = sum(k * k for k in mesh)
        out = np.broadcast_to(out, self.spectral_shape).copy()
        out.setflags(write=False)
        return out

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum coefficient in the full spectrum."""
        n = self.dims[-1]
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w, self.spectral_shape)

    def coordinates(self) -> tuple:
        """Node coordinates ``x_j = j * h`` as open meshgrid arrays."""
        axes = [np.arange(n) * (L / n) for n, L in zip(self.dims, self.lengths)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps modes with ``|m| <= n // 3`` on every axis."""
        masks = []
        for axis, n in enumerate(self.dims):
            m = np.abs(np.rint(self.wavenumbers[axis] * self.lengths[axis] / (2 * np.pi)))
            if axis == self.ndim - 1:
                m = m[: n // 2 + 1]
            masks.append(m <= n // 3)
        mesh = np.meshgrid(*masks, indexing="ij", sparse=True)
        out = mesh[0]
        for m in mesh[1:]:
            out = out & m
        return np.broadcast_to(out, self.spectral_shape).copy()


def make_grid(dims, lengths, workers: int = 1) -> Grid:
    dims = tuple(int(n) for n in np.atleast_1d(dims))
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    if not 1 <= len(dims) <= 3:
        raise ConfigurationError(f"grid must have 1 to 3 axes, got {len(dims)}")
    if len(lengths) != len(dims):
        raise ConfigurationError(f"{len(dims)} dims but {len(lengths)} lengths")
    for n in dims:
        if n < 4 or n % 2:
            raise ConfigurationError(f"grid sizes must be even and >= 4, got {dims}")
    for L in lengths:
        if not (math.isfinite(L) and L > 0):
            raise ConfigurationError(f"domain lengths must be positive and finite, got {lengths}")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    return Grid(dims, lengths, int(workers))


def forward(field: np.ndarray, grid: Grid) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != grid.dims:
        raise ConfigurationError(f"field shape {field.shape} does not match grid {grid.dims}")
    if not np.isfinite(field).all():
        raise NumericError("non-finite values in field passed to forward transform")
    return scipy.fft.rfftn(field, workers=grid.workers)


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    if not np.isfinite(coeffs).all():
        raise NumericError("non-finite spectral coefficients passed to inverse transform")
    return scipy.fft.irfftn(coeffs, s=grid.dims, workers=grid.workers)


def symbol_laplacian(grid: Grid) -> np.ndarray:
    return -grid.ksq


def symbol_pa(grid: Grid, a: float) -> np.ndarray:
    """Symbol of ``(Delta + I)^2 + a I``: ``(1 - |k|^2)^2 + a``."""
    return (1.0 - grid.ksq) ** 2 + a


def symbol_l(grid: Grid, alpha: float, beta: float, a: float) -> np.ndarray:
    """Symbol of the implicit operator ``Delta((1 + alpha) P_a + beta I)``."""
    return -grid.ksq * ((1.0 + alpha) * symbol_pa(grid, a) + beta)


def stage_solve(rhs: np.ndarray, tau: float, aii: float, lsym: np.ndarray) -> np.ndarray:
    """Solve ``(I - tau * aii * L) u = rhs`` modewise."""
    denom = 1.0 - (tau * aii) * lsym
    if np.any(denom == 0.0) or not np.isfinite(denom).all():
        raise NumericError("vanishing denominator in implicit stage solve")
    return rhs / denom


def inner_product(u_hat: np.ndarray, v_hat: np.ndarray, grid: Grid, symbol=None) -> float:
    """``integral u (S v) dx`` from half-spectrum coefficients, S a real even symbol."""
    prod = (u_hat.conj() * v_hat).real * grid.parseval_weights
    if symbol is not None:
        prod = prod * symbol
    return float(prod.sum()) * grid.cell_volume / grid.n_nodes
