import math

import numpy as np
import pytest

from pfc_imex import harness, model, spectral
from pfc_imex.errors import BoundViolation, CertificationError, ConfigurationError, NumericError
from pfc_imex.stepper import DIAGNOSTIC_COLUMNS, ImexStepper, check_step_count
from pfc_imex.tableau import load_tableau


@pytest.fixture
def phi0(grid32):
    return harness.ic_converge(grid32)


class ListSink(list):
    flushes = 0

    def flush(self):
        self.flushes += 1


def test_constant_has_zero_n(grid32, imex43):
    st = ImexStepper(grid32, imex43, model.ModelParams())
    out = st.eval_n(np.full(grid32.dims, 0.3))
    assert np.abs(out).max() < 1e-12


def test_work_per_step(grid32, imex43, phi0):
    st = ImexStepper(grid32, imex43, model.ModelParams())
    st.run(phi0, 0.1, 0.5)
    assert st.n_implicit_solves == 5 * imex43.s
    assert st.n_nonlinear_evals == 5 * imex43.s


@pytest.mark.parametrize("name", ["euler1", "imex2", "imex43"])
def test_consistency(grid32, phi0, name):
    tab = load_tableau(name)
    p = model.ModelParams(alpha=0.5, beta=2.0)
    st = ImexStepper(grid32, tab, p)
    tau = 1e-6
    state = st.initial_state(phi0)
    new = st.step(state, tau)
    rate = (new.phi_hat - state.phi_hat) / tau
    expected = st.lsym * state.phi_hat + st.eval_n(phi0)
    assert np.abs(rate - expected).max() <= 1e-4 * np.abs(expected).max()


def test_t_final_zero(grid32, imex43, phi0):
    sink = ListSink()
    res = ImexStepper(grid32, imex43, model.ModelParams()).run(phi0, 0.1, 0.0, sink=sink)
    np.testing.assert_array_equal(res.phi, phi0)
    assert len(sink) == 1 and sink[0].step == 0


def test_sink_cadence(grid32, imex43, phi0):
    sink = ListSink()
    ImexStepper(grid32, imex43, model.ModelParams()).run(phi0, 0.1, 2.5, sink=sink, diagnostics_every=10)
    assert [r.step for r in sink] == [0, 10, 20, 25]
    assert sink.flushes >= 1
    assert DIAGNOSTIC_COLUMNS == tuple(f for f in sink[0].__dataclass_fields__)


def test_snapshots(grid32, imex43, phi0):
    seen = []
    ImexStepper(grid32, imex43, model.ModelParams()).run(
        phi0, 0.1, 1.0, snapshot_every=4, on_snapshot=lambda n, t, phi: seen.append(n))
    assert seen == [0, 4, 8, 10]


def test_bitwise_determinism(grid32, imex43):
    phi = harness.ic_random(grid32, 0.06, 0.01, seed=5)
    runs = [ImexStepper(grid32, imex43, model.ModelParams()).run(phi, 0.5, 5.0) for _ in range(2)]
    np.testing.assert_array_equal(runs[0].phi, runs[1].phi)
    assert [r.as_row() for r in runs[0].diagnostics] == [r.as_row() for r in runs[1].diagnostics]


def test_mass_conserved(grid32, imex43):
    phi = harness.ic_random(grid32, 0.06, 0.01, seed=2)
    res = ImexStepper(grid32, imex43, model.ModelParams()).run(phi, 0.5, 20.0)
    masses = [r.mass for r in res.diagnostics]
    assert max(abs(m - masses[0]) for m in masses) <= 1e-12 * grid32.volume


def test_energy_decreases_certified(grid32, imex43, phi0):
    p = model.ModelParams(m0=0.5)
    st = ImexStepper(grid32, imex43, p, strict=True)
    assert st.certificate.admissible
    res = st.run(phi0, 1.0, 30.0)
    assert max(r.energy_delta for r in res.diagnostics[1:]) <= 1e-10
    assert not res.state.bound_violated


def test_strict_certification(grid32, imex43):
    with pytest.raises(CertificationError):
        ImexStepper(grid32, imex43, model.ModelParams(beta=0.0, m0=1.0), strict=True)
    with pytest.warns(UserWarning, match="not certified"):
        ImexStepper(grid32, imex43, model.ModelParams(beta=0.0, m0=1.0))


def test_bound_violation_recorded(grid32, imex43, phi0):
    p = model.ModelParams(m0=0.045, beta=10.0)
    res = ImexStepper(grid32, imex43, p).run(phi0, 0.1, 0.2)
    assert res.diagnostics[0].bound_violated
    assert res.state.bound_violated
    with pytest.raises(BoundViolation):
        ImexStepper(grid32, imex43, p.replace(beta=100.0), strict=True).run(phi0, 0.1, 0.2)


def test_blowup_detected(grid32, euler1):
    big = np.full(grid32.dims, 0.0)
    big[0, 0] = 1e120
    st = ImexStepper(grid32, euler1, model.ModelParams(beta=0.0))
    with pytest.raises(NumericError) as info:
        st.run(big, 1.0, 5.0)
    assert "step 1" in str(info.value)


def test_dealias(grid32, imex43, phi0):
    p = model.ModelParams()
    # low modes only: the cubic stays below the 2/3 cutoff
    a = ImexStepper(grid32, imex43, p).run(phi0, 0.1, 1.0).phi
    b = ImexStepper(grid32, imex43, p, dealias=True).run(phi0, 0.1, 1.0).phi
    np.testing.assert_array_equal(a, b)
    noisy = harness.ic_random(grid32, 0.06, 0.3, seed=4)
    a = ImexStepper(grid32, imex43, p).run(noisy, 0.1, 1.0).phi
    b = ImexStepper(grid32, imex43, p, dealias=True).run(noisy, 0.1, 1.0).phi
    assert 0 < np.abs(a - b).max() < 1e-2


def test_step_count():
    assert check_step_count(0.1, 1.0) == 10
    assert check_step_count(2.0**-8, 2.0) == 512
    with pytest.raises(ConfigurationError):
        check_step_count(0.3, 1.0)
    with pytest.raises(ConfigurationError):
        check_step_count(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        check_step_count(0.1, math.inf)


def test_three_dimensional(imex43):
    g = spectral.make_grid((8, 8, 8), (8.0, 8.0, 8.0))
    phi = harness.ic_random(g, 0.285, 0.1, seed=1)
    res = ImexStepper(g, imex43, model.ModelParams(epsilon=0.25, a=0.01)).run(phi, 0.5, 2.0)
    assert res.phi.shape == (8, 8, 8)
    assert abs(res.diagnostics[-1].mass - res.diagnostics[0].mass) < 1e-12 * g.volume
