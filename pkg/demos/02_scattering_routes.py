"""Three independent routes to the same scattering quantity on the line.

    python demos/02_scattering_routes.py
"""

from hierarchylab import scattering as S
from hierarchylab.grid import Line, potential

u = potential("sech:a=0.5", Line(-30.0, 30.0), 2048)

for z in (2j, 1 + 2j, 4j):
    g = S.generating_function("kdv", z, u=u)       # Jost ODE and spectral Riccati
    d = S.fredholm_det2(z, u)                       # Nystroem det_2 with one Richardson step
    print(f"z={z}: jost {g.jost:.12f}  riccati {g.riccati:.12f}  det2 {d.value:.12f}  "
          f"|det2 - jost| {abs(d.value - g.jost):.1e}")

# Large-|z| behavior: the N-th remainder decays like tau^-2 along z = i tau.
smooth = potential("sech4:a=0.5,k=0.5", Line(-30.0, 30.0), 2048)
for N in (0, 1, 2):
    p = S.remainder_slope(N, smooth)
    print(f"N={N}: |remainder| at tau={p.taus} -> {[f'{v:.2e}' for v in p.values]}, slope {p.slope:.3f}")

# Miura map and good variable round trips.
w = potential("sech:a=0.5", Line(-30.0, 30.0), 1024)
beta, v = S.diagonal_green_and_v(w, 2.0)
print("W(v) - w:", abs(S.W_map(v, 2.0).samples - w.samples).max(), " min(1+v):", (1 + v.samples).real.min())
