"""Stabilized IMEX Runge-Kutta time stepping for the PFC equation.

The equation is written as ``phi_t = L phi + N(phi)`` with

    L = Delta((1 + alpha) P_a + beta),
    N(phi) = -Delta(-f(phi) + alpha P_a phi + beta phi),

and each step solves, for i = 1..s,

    u_i = u_0 + tau * (sum_{j<=i} A[i, j] L u_j + sum_{j<=i} Ahat[i, j] N(u_{j-1})),

which is diagonal in Fourier space. The new state is ``u_s``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from . import model, spectral
from .errors import BoundViolation, CertificationError, ConfigurationError, NumericError
from .tableau import ImexTableau, certify


DIAGNOSTIC_COLUMNS = ("step", "t", "energy", "mass", "max_norm", "energy_delta", "bound_violated")


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    energy: float
    mass: float
    max_norm: float
    energy_delta: float
    bound_violated: bool

    def as_row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class StepperState:
    phi: np.ndarray
    phi_hat: np.ndarray
    t: float = 0.0
    step_index: int = 0
    energy: float = math.nan
    bound_violated: bool = False
    diagnostics: list = field(default_factory=list)


@dataclass
class RunResult:
    phi: np.ndarray
    diagnostics: list
    state: StepperState


class ImexStepper:
    """Time stepper bound to one grid, tableau and parameter set.

    Symbol arrays are computed once at construction. ``n_implicit_solves``
    and ``n_nonlinear_evals`` count work done, so tests can check that a step
    costs exactly ``s`` of each.
    """

    def __init__(self, grid, tableau: ImexTableau, params: model.ModelParams,
                 dealias: bool = False, strict: bool = False):
        self.grid = grid
        self.tableau = tableau
        self.params = params
        self.strict = strict
        self.lsym = spectral.symbol_l(grid, params.alpha, params.beta, params.a)
        pa = spectral.symbol_pa(grid, params.a)
        self._ksq = grid.ksq
        self._nlin = grid.ksq * (params.alpha * pa + params.beta)
        self._mask = grid.dealias_mask() if dealias else None
        self.certificate = certify(tableau, params.alpha, params.beta, params.lip)
        self.n_implicit_solves = 0
        self.n_nonlinear_evals = 0
        if not self.certificate.admissible:
            msg = (f"stabilizers alpha={params.alpha}, beta={params.beta} are not certified for "
                   f"tableau {tableau.name or '?'} with lip={params.lip:.6g}: {self.certificate.reason}")
            if strict:
                raise CertificationError(msg)
            warnings.warn(msg, stacklevel=2)

    def eval_n(self, u, u_hat=None, step=None, stage=None) -> np.ndarray:
        """Fourier coefficients of ``N(u)`` using the truncated nonlinearity."""
        if u_hat is None:
            u_hat = spectral.forward(u, self.grid)
        fu = model.f_trunc(u, self.params)
        if not np.isfinite(fu).all():
            raise NumericError("non-finite nonlinearity", step=step, stage=stage)
        f_hat = spectral.forward(fu, self.grid)
        if self._mask is not None:
            f_hat *= self._mask
        self.n_nonlinear_evals += 1
        out = self._nlin * u_hat - self._ksq * f_hat
        out.flat[0] = 0.0
        return out

    def initial_state(self, phi0) -> StepperState:
        phi0 = np.array(phi0, dtype=float)
        phi_hat = spectral.forward(phi0, self.grid)
        with np.errstate(over="ignore", invalid="ignore"):
            e0 = model.energy(phi0, self.grid, self.params, phi_hat=phi_hat)
        state = StepperState(phi=phi0, phi_hat=phi_hat, energy=e0)
        state.bound_violated = bool(np.abs(phi0).max() > self.params.m0)
        state.diagnostics.append(DiagnosticsRecord(
            step=0, t=0.0, energy=e0, mass=model.mass(phi0, self.grid),
            max_norm=float(np.abs(phi0).max()), energy_delta=0.0,
            bound_violated=state.bound_violated))
        return state

    def step(self, state: StepperState, tau: float) -> StepperState:
        if not tau > 0:
            raise ConfigurationError(f"tau must be positive, got {tau}")
        # overflow is detected explicitly through the stage max-norm
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(state, tau)

    def _step(self, state: StepperState, tau: float) -> StepperState:
        A, Ah = self.tableau.A, self.tableau.Ahat
        s = self.tableau.s
        n = state.step_index + 1
        lsym = self.lsym
        m0 = self.params.m0

        u_hat = [state.phi_hat]
        u = [state.phi]
        lu = [None]
        nh = []
        max_norm = float(np.abs(state.phi).max())
        violated = max_norm > m0
        for i in range(1, s + 1):
            nh.append(self.eval_n(u[i - 1], u_hat[i - 1], step=n, stage=i - 1))
            rhs = u_hat[0].copy()
            acc = np.zeros_like(rhs)
            for j in range(1, i):
                acc += A[i - 1, j - 1] * lu[j]
            for j in range(1, i + 1):
                acc += Ah[i - 1, j - 1] * nh[j - 1]
            rhs += tau * acc
            ui_hat = spectral.stage_solve(rhs, tau, A[i - 1, i - 1], lsym)
            self.n_implicit_solves += 1
            ui = spectral.inverse(ui_hat, self.grid)
            stage_max = float(np.abs(ui).max())
            if not math.isfinite(stage_max):
                raise NumericError("numerical blowup", step=n, stage=i)
            if stage_max > m0:
                violated = True
            u_hat.append(ui_hat)
            u.append(ui)
            lu.append(lsym * ui_hat)

        phi, phi_hat = u[s], u_hat[s]
        if violated and self.strict:
            raise BoundViolation(f"stage max-norm exceeded m0={m0} at step {n}")
        e = model.energy(phi, self.grid, self.params, phi_hat=phi_hat)
        record = DiagnosticsRecord(
            step=n, t=n * tau, energy=e, mass=model.mass(phi, self.grid),
            max_norm=float(np.abs(phi).max()), energy_delta=e - state.energy,
            bound_violated=violated)
        diagnostics = state.diagnostics
        diagnostics.append(record)
        return StepperState(phi=phi, phi_hat=phi_hat, t=n * tau, step_index=n, energy=e,
                            bound_violated=state.bound_violated or violated,
                            diagnostics=diagnostics)

    def run(self, phi0, tau: float, t_final: float, sink=None, diagnostics_every: int = 1,
            snapshot_every: int | None = None, on_snapshot=None) -> RunResult:
        """Integrate from ``phi0`` to ``t_final`` in steps of ``tau``.

        Every ``diagnostics_every``-th record (plus the first and last) is
        appended to ``sink``; ``on_snapshot(step, t, phi)`` is called at step 0,
        every ``snapshot_every`` steps and at the final step.
        """
        n_steps = check_step_count(tau, t_final)
        state = self.initial_state(phi0)
        emitted = 0

        def emit(rec, final=False):
            nonlocal emitted
            if sink is not None and (final or rec.step % diagnostics_every == 0):
                sink.append(rec)
                emitted += 1
                if emitted % 100 == 0:
                    _flush(sink)

        emit(state.diagnostics[0], final=n_steps == 0)
        if on_snapshot is not None:
            on_snapshot(0, 0.0, state.phi)
        try:
            for _ in range(n_steps):
                state = self.step(state, tau)
                rec = state.diagnostics[-1]
                emit(rec, final=state.step_index == n_steps)
                if on_snapshot is not None and (
                        state.step_index == n_steps
                        or (snapshot_every and state.step_index % snapshot_every == 0)):
                    on_snapshot(state.step_index, state.t, state.phi)
        finally:
            if sink is not None:
                _flush(sink)
        return RunResult(phi=state.phi, diagnostics=state.diagnostics, state=state)


def check_step_count(tau: float, t_final: float) -> int:
    if not tau > 0 or not math.isfinite(tau):
        raise ConfigurationError(f"tau must be positive and finite, got {tau}")
    if t_final < 0 or not math.isfinite(t_final):
        raise ConfigurationError(f"t_final must be nonnegative and finite, got {t_final}")
    n = round(t_final / tau)
    if abs(n * tau - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigurationError(f"t_final={t_final} is not an integer multiple of tau={tau}")
    return n


def _flush(sink):
    flush = getattr(sink, "flush", None)
    if callable(flush):
        flush()
