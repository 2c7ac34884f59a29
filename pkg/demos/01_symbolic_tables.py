"""Exact hierarchy tables: Lenard recursion, Gardner densities and the Miura link.

    python demos/01_symbolic_tables.py
"""

from hierarchylab import algebra as A
from hierarchylab import hierarchy as H

# KdV densities from the Lenard recursion; every antiderivative step is exact.
kdv = H.lenard_sequence(4)
for n in range(5):
    print(H.pretty_entry(kdv, n).splitlines()[0])

# The top coefficient of u^(n+2) is half the closed binomial formula.
for n in range(5):
    got = kdv.meta[f"top_coefficient_H{n}"]
    print(f"n={n}: u^{n + 2} coefficient {got}, binomial formula {H.kdv_leading_formula(n)}")

# Gardner densities reduce to KdV through the Miura map u = w' + 2 tau w + w^2.
gardner = H.build_table("gardner", 3)
print(H.pretty_entry(gardner, 2))
for N in (1, 2, 3):
    same = A.equal_mod_total_derivative(H.kdv_from_gardner_limit(N, gardner).density,
                                        kdv.hamiltonian(N).density)
    print(f"tau -> 0 limit of Gardner H_{N} equals KdV H_{N}: {same}")

# Commutation under both Poisson structures.
for s in ("gardner", "magri"):
    r = H.poisson_bracket(kdv.hamiltonian(2), kdv.hamiltonian(3), s)
    print(f"{{H_2, H_3}} under the {s} structure is a total derivative: {r.commutes}")

# Good-variable equation with its reciprocal terms grouped by powers of 1/(v+1).
print("F_2 =", H.pretty_good_variable(H.build_table("goodvar", 2).entries[2].gradients["F"]))
