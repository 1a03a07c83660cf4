"""Initial conditions and experiment drivers for the PFC benchmark problems.

Random initial data come from :func:`uniform_pm1`, which draws from the
Philox-4x64 counter-based generator keyed by the 64-bit seed (counter starting
at zero) and maps each raw 64-bit word ``w`` to ``2 * (w >> 11) * 2**-53 - 1``.
Values are laid out with x varying fastest, matching the snapshot format.
The stream is therefore the same on every platform.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .errors import ConfigurationError
from .stepper import DIAGNOSTIC_COLUMNS, ImexStepper

EXPERIMENT_KINDS = ("converge", "energy_study", "random2d", "crystal_growth", "pattern", "random3d")


def uniform_pm1(shape, seed: int) -> np.ndarray:
    """I.i.d. uniform(-1, 1) samples from Philox keyed by ``seed``."""
    shape = tuple(shape)
    bitgen = np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF)
    raw = np.asarray(bitgen.random_raw(math.prod(shape)), dtype=np.uint64)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (2.0 * u - 1.0).reshape(shape, order="F")


def _require_2d(grid, name, lengths=None):
    if grid.ndim != 2:
        raise ConfigurationError(f"{name} needs a 2D grid, got {grid.ndim}D")
    if lengths is not None and not np.allclose(grid.lengths, lengths, rtol=0, atol=1e-12):
        raise ConfigurationError(f"{name} is defined on the domain {lengths}, got {grid.lengths}")


def ic_converge(grid) -> np.ndarray:
    _require_2d(grid, "ic_converge", (32.0, 32.0))
    x, y = grid.coordinates()
    return 0.05 - 0.01 * np.cos(2 * np.pi * x / 32) * np.cos(2 * np.pi * y / 32)


def ic_energy_study(grid) -> np.ndarray:
    _require_2d(grid, "ic_energy_study", (128.0, 128.0))
    x, y = grid.coordinates()
    return (0.07
            - 0.02 * np.cos(np.pi * (x - 12) / 16) * np.sin(np.pi * (y - 1) / 16)
            + 0.02 * (np.cos(np.pi * (x + 10) / 32) * np.cos(np.pi * (y + 3) / 32)) ** 2
            - 0.01 * (np.sin(np.pi * x / 8) * np.sin(np.pi * (y - 6) / 8)) ** 2)


def ic_random(grid, base: float, amp: float, seed: int) -> np.ndarray:
    if amp < 0:
        raise ConfigurationError("amp must be >= 0")
    return base + amp * uniform_pm1(grid.dims, seed)


def default_patches(grid, size: float = 30.0):
    Lx, Ly = grid.lengths
    thetas = (-np.pi / 4, 0.0, np.pi / 4)
    return [((Lx * f, Ly / 2), size, th) for f, th in zip((0.25, 0.5, 0.75), thetas)]


def ic_crystal_growth(grid, phibar: float = 0.285, capc: float = 0.446, p: float = 0.66,
                      patches=None) -> np.ndarray:
    """Constant ``phibar`` with square crystallite patches ``(center, size, theta)``.

    Inside a patch the one-mode hexagonal lattice is evaluated in rotated
    coordinates ``x_l = x sin(theta) + y cos(theta)``,
    ``y_l = -x cos(theta) + y sin(theta)`` of the global node positions.
    """
    _require_2d(grid, "ic_crystal_growth")
    if patches is None:
        patches = default_patches(grid)
    boxes = []
    for (cx, cy), size, _ in patches:
        boxes.append((cx - size / 2, cx + size / 2, cy - size / 2, cy + size / 2))
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[j]
            if a[0] < b[1] and b[0] < a[1] and a[2] < b[3] and b[2] < a[3]:
                raise ConfigurationError(f"crystal patches {i} and {j} overlap")
    x, y = grid.coordinates()
    phi = np.full(grid.dims, float(phibar))
    for ((x0, x1, y0, y1), (_, _, theta)) in zip(boxes, patches):
        inside = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
        xl = x * np.sin(theta) + y * np.cos(theta)
        yl = -x * np.cos(theta) + y * np.sin(theta)
        lattice = phibar + capc * (np.cos(p * yl / np.sqrt(3)) * np.cos(p * xl)
                                   - 0.5 * np.cos(2 * p * yl / np.sqrt(3)))
        phi[inside] = lattice[inside]
    return phi


def hexagon_mask(grid, circumradius: float = 16.0, center=None) -> np.ndarray:
    """Nodes inside a regular hexagon (two vertices on the x axis) by six half-planes."""
    if center is None:
        center = tuple(L / 2 for L in grid.lengths)
    x, y = grid.coordinates()
    dx, dy = x - center[0], y - center[1]
    apothem = circumradius * np.sqrt(3) / 2
    inside = np.ones(grid.dims, dtype=bool)
    for angle in (np.pi / 2, np.pi / 6, -np.pi / 6):
        inside &= np.abs(dx * np.cos(angle) + dy * np.sin(angle)) <= apothem
    return inside


def ic_pattern(grid, psi0: float, seed: int, circumradius: float = 16.0,
               base: float = 0.1, amp: float = 0.5) -> np.ndarray:
    _require_2d(grid, "ic_pattern")
    inside = hexagon_mask(grid, circumradius)
    phi = np.full(grid.dims, float(psi0))
    noise = base + amp * uniform_pm1(grid.dims, seed)
    phi[inside] = noise[inside]
    return phi


def initial_condition(kind: str, grid, seed: int = 0, **options) -> np.ndarray:
    """Dispatch to the initial-condition generator belonging to an experiment kind."""
    if kind == "converge":
        return ic_converge(grid)
    if kind == "energy_study":
        return ic_energy_study(grid)
    if kind == "random2d":
        _require_2d(grid, "random2d")
        return ic_random(grid, options.get("base", 0.06), options.get("amp", 0.01), seed)
    if kind == "random3d":
        if grid.ndim != 3:
            raise ConfigurationError("random3d needs a 3D grid")
        return ic_random(grid, options.get("base", 0.285), options.get("amp", 0.1), seed)
    if kind == "crystal_growth":
        opts = {k: options[k] for k in ("phibar", "capc", "p", "patches") if k in options}
        return ic_crystal_growth(grid, **opts)
    if kind == "pattern":
        return ic_pattern(grid, options.get("psi0", 0.2), seed,
                          circumradius=options.get("circumradius", 16.0))
    raise ConfigurationError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")


@dataclass
class ConvergenceTable:
    """Cauchy errors ``||phi_tau - phi_{tau/2}||_inf`` and observed rates per ``a``.

    ``rates[a][i]`` compares row ``i - 1`` with row ``i`` (the first is NaN),
    the same placement as a printed convergence table.
    """

    taus: list
    errors: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)

    def rows(self):
        for a in self.errors:
            for tau, err, rate in zip(self.taus, self.errors[a], self.rates[a]):
                yield {"a": a, "tau": tau, "cauchy_error": err, "rate": rate}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["a", "tau", "cauchy_error", "rate"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow(row)

    def format(self) -> str:
        header = ["tau"] + [col for a in self.errors for col in (f"a={a:g}", "Rate")]
        lines = ["  ".join(f"{h:>12}" for h in header)]
        for i, tau in enumerate(self.taus):
            cells = [f"2^{math.log2(tau):.0f}" if math.log2(tau).is_integer() else f"{tau:.4g}"]
            for a in self.errors:
                rate = self.rates[a][i]
                cells += [f"{self.errors[a][i]:.5E}", "---" if math.isnan(rate) else f"{rate:.4f}"]
            lines.append("  ".join(f"{c:>12}" for c in cells))
        return "\n".join(lines)


def check_halving(taus):
    taus = [float(t) for t in taus]
    if len(taus) < 3:
        raise ConfigurationError("a convergence study needs at least 3 time steps")
    for t0, t1 in zip(taus, taus[1:]):
        if not math.isclose(t0, 2.0 * t1, rel_tol=1e-12):
            raise ConfigurationError(f"time steps must form a halving sequence, got {taus}")
    return taus


def convergence_study(grid, tableau, params: model.ModelParams, taus, t_final: float,
                      a_values=None, phi0=None) -> ConvergenceTable:
    """Temporal Cauchy-error study over a halving sequence of time steps.

    For each ``a`` every listed ``tau`` is run to ``t_final`` together with
    ``taus[-1] / 2`` as the partner of the finest row.
    """
    taus = check_halving(taus)
    if phi0 is None:
        phi0 = ic_converge(grid)
    if a_values is None:
        a_values = [params.a]
    table = ConvergenceTable(taus=taus)
    for a in a_values:
        p = params.replace(a=float(a))
        finals = []
        for tau in taus + [taus[-1] / 2]:
            stepper = ImexStepper(grid, tableau, p)
            finals.append(stepper.run(phi0, tau, t_final).phi)
        errs = [float(np.abs(finals[i] - finals[i + 1]).max()) for i in range(len(taus))]
        rates = [math.nan] + [math.log2(errs[i - 1] / errs[i]) for i in range(1, len(errs))]
        table.errors[float(a)] = errs
        table.rates[float(a)] = rates
    return table


@dataclass
class SweepRun:
    alpha: float
    beta: float
    tau: float
    diagnostics: list
    certified: bool

    @property
    def final_energy(self) -> float:
        return self.diagnostics[-1].energy

    @property
    def max_energy_increase(self) -> float:
        return max([0.0] + [rec.energy_delta for rec in self.diagnostics[1:]])


def write_diagnostics_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for rec in records:
            writer.writerow(rec.as_row())


def energy_sweep(grid, tableau, params: model.ModelParams, combos, t_final: float,
                 phi0, outdir=None) -> list:
    """Run every ``(alpha, beta, tau)`` combination from the same initial field."""
    runs = []
    phi0 = np.array(phi0, dtype=float)
    for alpha, beta, tau in combos:
        p = params.replace(alpha=float(alpha), beta=float(beta))
        stepper = ImexStepper(grid, tableau, p)
        result = stepper.run(phi0, float(tau), t_final)
        run = SweepRun(float(alpha), float(beta), float(tau), result.diagnostics,
                       stepper.certificate.admissible)
        runs.append(run)
        if outdir is not None:
            out = Path(outdir)
            out.mkdir(parents=True, exist_ok=True)
            write_diagnostics_csv(out / f"diagnostics_alpha{alpha:g}_beta{beta:g}_tau{tau:g}.csv",
                                  result.diagnostics)
    if outdir is not None:
        with open(Path(outdir) / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "beta", "tau", "final_energy", "max_energy_increase", "certified"])
            for run in runs:
                writer.writerow([run.alpha, run.beta, run.tau, run.final_energy,
                                 run.max_energy_increase, run.certified])
    return runs
