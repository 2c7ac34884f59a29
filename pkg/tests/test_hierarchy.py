from fractions import Fraction

import pytest

from hierarchylab import algebra as A
from hierarchylab import hierarchy as H
from hierarchylab.algebra import P


def test_kdv_second_hamiltonian():
    t = H.lenard_sequence(2)
    assert A.equal_mod_total_derivative(t.hamiltonian(2).density,
                                        P("1/2 (u'')^2 + 5 u (u')^2 + 5/2 u^4"))


def test_lenard_checks_all_pass():
    t = H.lenard_sequence(4)
    assert t.checks and all(c.passed for c in t.checks)


def test_top_coefficients_are_half_the_closed_formula():
    t = H.lenard_sequence(4)
    tops = [Fraction(t.meta[f"top_coefficient_H{n}"]) for n in range(5)]
    assert tops == [Fraction(1, 2), 1, Fraction(5, 2), 7, 21]
    for n in range(5):
        assert 2 * tops[n] == H.kdv_leading_formula(n)


def test_gardner_h0_and_flux_identity():
    t = H.build_table("gardner", 2)
    assert A.equal_mod_total_derivative(t.hamiltonian(0).density, P("1/2 w^2"))
    assert all(c.passed for c in t.checks)


def test_akns_alpha5():
    t = H.akns_table(5)
    want = P("-i (q'''' - 8 q q'' r - 6 (q')^2 r - 4 q q' r' - 2 q^2 r'' + 6 q^3 r^2)")
    assert t.entries[5].alpha == want


def test_complex_kdv_identity_needs_derivative():
    for n in (1, 2, 3):
        assert H.complex_kdv_beta_identity(n, with_derivative=True)[0]
        assert not H.complex_kdv_beta_identity(n, with_derivative=False)[0]


def test_miura_and_wadati_relations():
    assert H.gardner_from_wadati_check(3)
    for N in (1, 2, 3):
        assert A.equal_mod_total_derivative(H.kdv_from_gardner_limit(N).density,
                                            H.lenard_sequence(N).hamiltonian(N).density)


@pytest.mark.parametrize("n,m", [(1, 2), (2, 3)])
def test_kdv_hamiltonians_commute(n, m):
    t = H.lenard_sequence(3)
    for s in ("gardner", "magri"):
        assert H.poisson_bracket(t.hamiltonian(n), t.hamiltonian(m), s).commutes


def test_good_variable_f2_has_expected_reciprocal_term():
    t = H.build_table("goodvar", 2)
    text = H.pretty_good_variable(t.entries[2].gradients["F"])
    assert "(v+1)^-3 (−45/8 (v')⁴)" in text


def test_unknown_family():
    with pytest.raises(ValueError):
        H.build_table("boussinesq", 1)
