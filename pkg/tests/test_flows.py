import numpy as np
import pytest

from hierarchylab import flows as F
from hierarchylab.errors import BlowupDetected, GridMismatch, StabilityViolation
from hierarchylab.grid import Periodic, potential


def init(spec, text):
    return potential(text, spec.geometry, spec.grid)


def test_zero_is_a_fixed_point():
    spec = F.FlowSpec("gardner", 2, dt=1e-3, t_end=0.01)
    tr = F.evolve(spec, init(spec, "zero"))
    assert not np.any(tr.snapshots)


def test_auto_integrator_choice():
    assert F.FlowSpec("gardner", 1).integrator == "etdrk4"
    s2 = F.FlowSpec("gardner", 2)
    assert s2.integrator == "exprb4" and s2.project_l2
    assert F.FlowSpec("tauflow", 0).integrator == "rk4"
    assert not F.FlowSpec("goodvar", 2).project_l2


def test_spec_validation():
    with pytest.raises(ValueError):
        F.FlowSpec("gardner", 1, grid=15)
    with pytest.raises(StabilityViolation):
        F.FlowSpec("gardner", 2, integrator="rk4")
    with pytest.raises(ValueError):
        F.FlowSpec("goodvar", 1, project_l2=True)


def test_airy_linearization():
    eps = 1e-6
    spec = F.FlowSpec("kdv", 1, dt=1e-3, t_end=1.0, sample_every=1000)
    u0 = init(spec, f"wave:a={eps},b=0,p=0")
    tr = F.evolve(spec, u0)
    lin = np.fft.irfft(np.exp(F.make_flow(spec).L) * np.fft.rfft(u0.samples.real), n=spec.grid)
    assert np.max(np.abs(tr.snapshots[-1] - lin)) / eps < 1e-4


def test_gardner_n1_l2_conservation():
    spec = F.FlowSpec("gardner", 1, sample_every=100)  # defaults: grid 256, t in [0, 1]
    tr = F.evolve(spec, init(spec, "wave:a=0.5,b=0,p=0"))
    rep = F.conservation_report(tr, F.gardner_conserved(2), extra={"L2": F.l2_squared})
    assert rep.drift("L2") < 1e-10
    assert rep.drift("H1") < 1e-8 and rep.drift("H2") < 1e-6


def test_projection_keeps_l2_for_n2():
    spec = F.FlowSpec("gardner", 2, dt=1e-3, t_end=0.02, sample_every=1)
    tr = F.evolve(spec, init(spec, "wave"))
    n = np.sum(tr.snapshots ** 2, axis=1)
    assert np.max(np.abs(n / n[0] - 1)) < 1e-13
    assert tr.projection_defect < 1e-6


def test_intertwining_short_run():
    spec = F.FlowSpec("gardner", 1, tau0=2.0, dt=1e-3, t_end=0.1)
    series, _ = F.intertwining_check(spec, init(spec, "wave:a=0.3,b=0.1,p=0"))
    assert series.max_residual("miura") < 1e-6
    assert series.max_residual("good_variable") < 1e-6
    assert np.min(series.residuals["min_one_plus_v"]) > 0


def test_flux_residual_constant_state():
    spec = F.FlowSpec("gardner", 1, dt=1e-3, t_end=0.01, sample_every=1)
    tr = F.evolve(spec, init(spec, "wave:a=0,b=0").like(np.full(spec.grid, 0.3)))
    assert np.max(F.flux_residual(tr).residuals["flux"]) < 1e-12


def test_flux_order_n1():
    spec = F.FlowSpec("gardner", 1)
    st = F.flux_order_study(1, init(spec, "wave:a=0.3,b=0.1,p=0"), 2.0, (4e-4, 2e-4, 1e-4))
    assert st.residuals[-1] < 1e-4
    assert abs(st.orders[-1] - 4) < 0.3


def test_blowup_reports_last_good_time():
    spec = F.FlowSpec("kdv", 1, dt=0.05, t_end=2.0, grid=64)
    with pytest.raises(BlowupDetected) as ei:
        F.evolve(spec, init(spec, "wave:a=50,b=0"))
    assert ei.value.last_good_time >= 0


def test_good_variable_guard():
    spec = F.FlowSpec("goodvar", 1, dt=1e-3, t_end=0.01)
    with pytest.raises(StabilityViolation):
        F.evolve(spec, init(spec, "wave:a=-1.5,b=0"))


def test_grid_mismatch():
    spec = F.FlowSpec("gardner", 1)
    with pytest.raises(GridMismatch):
        F.evolve(spec, potential("wave", Periodic(2 * np.pi), 128))
