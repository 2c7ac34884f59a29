import numpy as np
import pytest

from hierarchylab import scattering as S
from hierarchylab.errors import NotInMiuraRange
from hierarchylab.grid import Line, potential
from hierarchylab.verify import cross_route, map_triangle

LINE = Line(-30.0, 30.0)


def line(spec, n=1024):
    return potential(spec, LINE, n)


def test_zero_potential_is_transparent():
    rec = S.jost_solutions(S.Schrodinger(line("zero")), 2j)
    assert abs(rec.T_renormalized - 1) < 1e-14


def test_jost_and_riccati_routes_agree():
    g = S.generating_function("kdv", 1 + 2j, u=line("sech:a=0.5", 2048))
    assert g.difference < 1e-8


def test_det2_matches_jost_after_richardson():
    r = cross_route("gaussian:a=0.5", 2j, det2=True)
    assert r["det2_vs_jost"] < 1e-6


def test_small_potential_leading_term():
    # weak coupling: T_{-1}(i tau) = -int u^2 / (8 tau^2) + O(u^3)
    u = line("gaussian:a=1")
    eps, tau = 1e-3, 8.0
    g = S.generating_function("kdv", 1j * tau, u=u.like(eps * u.samples)).value
    want = -(eps ** 2) * u.integrate(u.samples ** 2).real / (8 * tau ** 2)
    assert g.real == pytest.approx(want, rel=1e-2)


def test_bound_state_gives_pole():
    u = line("sech2:a=-2")
    T = [abs(S.transmission(S.Schrodinger(u), 1j * (1 + e))) for e in (0.01, 0.005)]
    assert T[1] / T[0] == pytest.approx(2.0, rel=0.03)


def test_miura_round_trip():
    w0 = line("sech:a=0.3")
    u = S.miura_forward(w0, 1.0)
    w = S.miura_inverse(u, 1.0)
    assert np.max(np.abs(w.samples - w0.samples)) < 1e-7


def test_miura_range_error():
    with pytest.raises(NotInMiuraRange):
        S.miura_inverse(line("sech2:a=-2"), 0.5)


def test_map_triangle_closes():
    r = map_triangle("sech:a=0.5", 2.0)
    assert max(r["miura_round_trip"], r["W_round_trip"], r["beta_v_round_trip"]) < 1e-7
    assert r["min_one_plus_v"] > 0


def test_remainder_slope_near_minus_two():
    p = S.remainder_slope(1, line("sech4:a=0.5,k=0.5", 2048))
    assert abs(p.slope + 2) < 0.3


def test_tau_flow_conserves_generating_function():
    u = line("sech:a=0.3")
    assert S.tau_flow_conservation_probe(u, 2.0, 3.0) < 1e-6


def test_upper_half_plane_required():
    with pytest.raises(ValueError):
        S.jost_solutions(S.Schrodinger(line("zero")), -1j)
