"""Periodic pseudospectral evolution of the KdV, Gardner, good-variable and tau flows.

Each flow is ``f_t = d/dx G(f)`` with ``G`` a differential polynomial generated by
the hierarchy module.  The part of ``d G`` that is linear in ``f`` is a Fourier
multiplier and is integrated exactly; the rest is evaluated pointwise on a
zero-padded grid large enough to remove aliasing from polynomial products.

Integrators
  ``etdrk4``  exponential time differencing RK4 (Cox-Matthews, contour-integral
              coefficients).  Adequate when the nonlinear part is mild (N = 1).
  ``exprb4``  fourth-order exponential Rosenbrock scheme (two stages) with the
              full Jacobian in the truncated Fourier basis.  For N >= 2 the
              nonlinear part contains terms like ``w w'''`` whose stiffness
              grows like ``k^3`` and defeats explicit treatment.
  ``rk4``     classical RK4, for the tau flow whose symbol is bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from . import algebra as A
from .algebra import DiffPolynomial
from .errors import BlowupDetected, GridMismatch, StabilityViolation
from .grid import GridFunction, Periodic

FAMILIES = ("kdv", "gardner", "goodvar", "tauflow")
INTEGRATORS = ("auto", "etdrk4", "exprb4", "gauss4", "rk4")
GOODVAR_GUARD = 0.05
EDGE_VISCOSITY = 1e5
BLOWUP_FACTOR = 1e6


@dataclass
class FlowSpec:
    family: str = "gardner"
    N: int = 1
    tau0: float = 1.0
    tau: float = 2.0
    grid: int = 256
    period: float = 2 * math.pi
    t_end: float = 1.0
    dt: float = 2.5e-4
    integrator: str = "auto"
    sample_every: int = 10
    project_l2: Optional[bool] = None

    def __post_init__(self):
        self.family = self.family.lower()
        if self.family == "goodvariable":
            self.family = "goodvar"
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.N < 0 or (self.family != "tauflow" and self.N < 1):
            raise ValueError("N >= 1 required")
        if self.grid < 16 or self.grid % 2:
            raise ValueError("grid must be even and >= 16")
        if not (self.dt > 0 and self.t_end >= 0 and self.period > 0):
            raise ValueError("dt, t_end and period must be positive")
        if self.sample_every < 1:
            raise ValueError("sample_every >= 1 required")
        if self.integrator == "auto":
            if self.family == "tauflow":
                self.integrator = "rk4"
            else:
                self.integrator = "etdrk4" if self.N == 1 else "exprb4"
        if self.project_l2 is None:
            # exprb4 is not norm preserving; the KdV and Gardner flows conserve f^2
            self.project_l2 = self.integrator == "exprb4" and self.family in ("kdv", "gardner")
        elif self.project_l2 and self.family not in ("kdv", "gardner"):
            raise ValueError("L2 projection only applies to the KdV and Gardner flows")
        if self.family == "tauflow":
            if self.integrator != "rk4":
                raise StabilityViolation("the tau flow is non-stiff; use rk4")
            # symbol bounded by 1/(4 tau); RK4 stability interval about 2.8
            if self.dt / (4 * self.tau) > 2.5:
                raise StabilityViolation("dt exceeds the RK4 budget for the tau flow")
        elif self.integrator == "rk4":
            kmax = math.pi * self.grid / self.period
            if self.dt * kmax ** (2 * self.N + 1) > 2.5:
                raise StabilityViolation(
                    f"rk4 needs dt < {2.5 / kmax ** (2 * self.N + 1):.2e} for this grid")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def geometry(self) -> Periodic:
        return Periodic(self.period)

    def to_json(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# symbolic right-hand sides
# --------------------------------------------------------------------------

def _var_of(family: str) -> str:
    return {"kdv": "u", "gardner": "w", "goodvar": "v"}[family]


@lru_cache(maxsize=None)
def flow_gradient(family: str, N: int) -> DiffPolynomial:
    """G with f_t = d G(f)."""
    from . import hierarchy as Hy
    if family == "kdv":
        return Hy.lenard_sequence(N).entries[N].gradients["u"]
    if family == "gardner":
        return Hy.gardner_hamiltonians(N, verify=False).entries[N].gradients["w"]
    if family == "goodvar":
        return Hy.good_variable_equation(N)
    raise ValueError(family)


def _params(spec: FlowSpec) -> Dict[str, float]:
    return {"tau": spec.tau0} if spec.family in ("gardner", "goodvar") else {}


class PolynomialFlow:
    """Split f_t = d G(f) into an exact Fourier multiplier and a dealiased remainder."""

    def __init__(self, G: DiffPolynomial, var: str, n: int, period: float,
                 params: Optional[Dict[str, float]] = None):
        self.var, self.n, self.period = var, n, period
        self.params = dict(params or {})
        self.k = 2 * np.pi * np.fft.rfftfreq(n, d=period / n)
        self.ik = 1j * self.k
        rational = any(v in A.RECIPROCALS for (m, _) in G._t for v, _, _ in m)
        lin = G.filter(lambda m, pe, c: len(m) == 1 and m[0][0] == var and m[0][2] == 1)
        rest = G - lin
        self.linear_gradient = lin
        self.rest = rest
        coef = lin.compile(self.params)
        sym = np.zeros_like(self.k, dtype=complex)
        for mono, c in coef.terms:
            (_, order, _), = mono
            sym = sym + c * self.ik ** order
        self.L = self.ik * sym
        self.L[-1] = self.L[-1].real if n % 2 == 0 else self.L[-1]
        self.compiled = rest.compile(self.params)
        self.orders = sorted({k for v, k in self.compiled.jets if v == var})
        self.s_needed = any(v in A.RECIPROCALS for v, _ in self.compiled.jets)
        deg = max((sum(pw for v, _, pw in m if v not in A.RECIPROCALS)
                   for m, _ in self.compiled.terms), default=1)
        self.rational = rational
        if rational:
            self.M = 2 * n
        else:
            self.M = n * max(1, int(math.ceil((deg + 1) / 2)))
        self.degree = deg
        # 2/3 filter for the rational case, exact truncation otherwise
        self.mask = np.ones_like(self.k)
        if rational:
            self.mask[self.k > (2.0 / 3.0) * self.k.max()] = 0.0
        if n % 2 == 0:
            self.mask[-1] = 0.0
        if rational:
            # Filtered modes are frozen.  The sharp cutoff also breaks the gauge
            # symmetry that keeps the quasilinear part of the linearization
            # neutral, so a steep spectral viscosity damps the band next to it.
            kc = (2.0 / 3.0) * self.k.max()
            self.L = (self.L - EDGE_VISCOSITY * (self.k / kc) ** 36) * self.mask
        self.mk = 2 * np.pi * np.fft.rfftfreq(self.M, d=period / self.M)

    # transforms -----------------------------------------------------------
    def to_hat(self, f: np.ndarray) -> np.ndarray:
        h = np.fft.rfft(np.real(f))
        if self.n % 2 == 0:
            h[-1] = 0.0
        return h

    def to_phys(self, h: np.ndarray) -> np.ndarray:
        return np.fft.irfft(h, n=self.n)

    def _pad(self, h: np.ndarray) -> np.ndarray:
        out = np.zeros(self.M // 2 + 1, dtype=complex)
        out[: h.size] = h
        return out

    def jets(self, h: np.ndarray) -> Dict[Tuple[str, int], np.ndarray]:
        hp = self._pad(h) * (self.M / self.n)
        ikm = 1j * self.mk
        J = {}
        for k in self.orders:
            J[(self.var, k)] = np.fft.irfft(hp * ikm ** k, n=self.M)
        if self.s_needed:
            base = J.get((self.var, 0))
            if base is None:
                base = np.fft.irfft(hp, n=self.M)
            J[("s", 0)] = 1.0 / (1.0 + base)
        return J

    def nonlinear(self, h: np.ndarray) -> np.ndarray:
        """Fourier coefficients of d/dx (G - G_lin)(f)."""
        if not self.compiled.terms:
            return np.zeros_like(h)
        vals = self.compiled(self.jets(h)).real
        g = np.fft.rfft(vals)[: self.k.size] * (self.n / self.M)
        return self.ik * g * self.mask

    def full_rhs(self, h: np.ndarray) -> np.ndarray:
        return self.L * h + self.nonlinear(h)

    def min_one_plus(self, h: np.ndarray) -> float:
        return float(np.min(1.0 + self.to_phys(h)))

    # Jacobian of the nonlinear part in the real truncated Fourier basis --------
    def jacobian_phys(self, h: np.ndarray) -> np.ndarray:
        """Dense Jacobian of the dealiased nonlinear part on physical grid values."""
        n, M = self.n, self.M
        J = self.jets(h)
        coefs = {}
        for k in self.orders:
            part = self.rest.partial(self.var, k)
            coefs[k] = np.real(part.compile(self.params)(J))
        if self.s_needed:
            ps = self.rest.partial("s", 0)
            extra = -np.real(ps.compile(self.params)(J)) * J[("s", 0)] ** 2
            coefs[0] = coefs.get(0, 0.0) + extra
        # columns: unit vectors -> padded derivative jets -> product -> truncate
        E_hat = np.fft.rfft(np.eye(n), axis=0)
        if n % 2 == 0:
            E_hat[-1] = 0.0
        Ep = np.zeros((M // 2 + 1, n), dtype=complex)
        Ep[: E_hat.shape[0]] = E_hat * (M / n)
        ikm = (1j * self.mk)[:, None]
        acc = np.zeros((M, n))
        for k, a in coefs.items():
            col = np.fft.irfft(Ep * ikm ** k, n=M, axis=0)
            acc += (np.asarray(a)[:, None] if np.ndim(a) else a) * col
        g = np.fft.rfft(acc, axis=0)[: self.k.size] * (n / M)
        g *= (self.ik * self.mask)[:, None]
        return np.fft.irfft(g, n=n, axis=0)


@lru_cache(maxsize=8)
def _diff_matrix(n: int, period: float) -> np.ndarray:
    """Spectral differentiation matrix on n periodic nodes (Nyquist mode dropped)."""
    k = 2 * np.pi * np.fft.rfftfreq(n, d=period / n)
    ik = 1j * k
    ik[-1] = 0.0
    E = np.eye(n)
    return np.fft.irfft(ik[:, None] * np.fft.rfft(E, axis=0), n=n, axis=0)


# --------------------------------------------------------------------------
# integrators
# --------------------------------------------------------------------------

def _etd_coefficients(L: np.ndarray, h: float, M: int = 64):
    E = np.exp(h * L)
    E2 = np.exp(h * L / 2)
    # full circle: the symbol is imaginary, so the half-circle shortcut does not apply
    r = np.exp(2j * np.pi * (np.arange(1, M + 1) - 0.5) / M)
    LR = h * L[:, None] + r[None, :]
    Q = h * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
    f1 = h * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=1)
    f2 = h * np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR ** 3, axis=1)
    f3 = h * np.mean((-4 - 3 * LR - LR ** 2 + np.exp(LR) * (4 - LR)) / LR ** 3, axis=1)
    return E, E2, Q, f1, f2, f3


class ETDRK4:
    def __init__(self, flow: PolynomialFlow, dt: float):
        self.flow = flow
        self.E, self.E2, self.Q, self.f1, self.f2, self.f3 = _etd_coefficients(flow.L, dt)

    def step(self, v: np.ndarray) -> np.ndarray:
        N = self.flow.nonlinear
        Nv = N(v)
        a = self.E2 * v + self.Q * Nv
        Na = N(a)
        b = self.E2 * v + self.Q * Na
        Nb = N(b)
        c = self.E2 * a + self.Q * (2 * Nb - Nv)
        Nc = N(c)
        return self.E * v + Nv * self.f1 + 2 * (Na + Nb) * self.f2 + Nc * self.f3


def phi(k: int, z: np.ndarray) -> np.ndarray:
    """phi_k(z) = sum_j z^j/(j+k)!, elementwise; Taylor near 0, recursion elsewhere."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1.0
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.full_like(zs, 1.0 / math.factorial(k))
    for j in range(30):
        acc = acc + term
        term = term * zs / (j + k + 1)
    out[small] = acc
    zl = z[~small]
    p = np.exp(zl)
    for j in range(1, k + 1):
        p = (p - 1.0 / math.factorial(j - 1)) / zl
    out[~small] = p
    return out


class ExpRosenbrock4:
    """Two-stage fourth-order exponential Rosenbrock scheme (exprb42).

        K   = u + 3/4 h phi_1(3/4 h J) f(u)
        u+  = u + h phi_1(h J) f(u) + 32/9 h phi_3(h J) (g(K) - g(u)),
    with J = f'(u) and g(x) = f(x) - J x.  Works on physical grid values; the
    matrix functions use an eigendecomposition of J because |h J| reaches
    ~k_max^(2N+1) h, far beyond what scaling-and-squaring handles accurately.
    Unlike ETDRK4 it linearizes the stiff nonlinear dispersive terms, which is
    what keeps N >= 2 stable at usable step sizes.  Not norm preserving; see
    ``FlowSpec.project_l2``.
    """

    def __init__(self, flow: PolynomialFlow, dt: float):
        self.flow, self.h = flow, dt
        n = flow.n
        E = np.eye(n)
        Lh = flow.L[:, None] * np.fft.rfft(E, axis=0)
        Lh[-1] = 0.0
        self.Lmat = np.fft.irfft(Lh, n=n, axis=0)
        self.max_condition = 0.0

    def _f(self, x: np.ndarray) -> np.ndarray:
        return self.flow.to_phys(self.flow.full_rhs(self.flow.to_hat(x)))

    def step(self, v: np.ndarray) -> np.ndarray:
        fl, h = self.flow, self.h
        x = fl.to_phys(v)
        Jn = fl.jacobian_phys(v)
        lam, V = np.linalg.eig(self.Lmat + Jn)
        lu = sla.lu_factor(V)
        to_eig = lambda y: sla.lu_solve(lu, y.astype(complex))
        fx = self._f(x)
        fe = to_eig(fx)
        K = x + np.real(V @ (0.75 * h * phi(1, 0.75 * h * lam) * fe))
        # g(K) - g(x) from the nonlinear part only: the linear terms cancel
        # exactly and would otherwise leave |L| * eps of rounding behind
        nl = lambda y: fl.to_phys(fl.nonlinear(fl.to_hat(y)))
        de = to_eig(nl(K) - nl(x) - Jn @ (K - x))
        xn = x + np.real(V @ (h * phi(1, h * lam) * fe + (32.0 / 9.0) * h * phi(3, h * lam) * de))
        return fl.to_hat(xn)


_SQ3 = math.sqrt(3.0)
GAUSS_A = np.array([[0.25, 0.25 - _SQ3 / 6], [0.25 + _SQ3 / 6, 0.25]])
GAUSS_D = np.array([-_SQ3, _SQ3])  # b^T A^{-1}


class Gauss4:
    """Two-stage Gauss-Legendre collocation (order 4), simplified Newton.

    A-stable and symplectic; quadratic invariants such as the L^2 norm are
    conserved up to the Newton tolerance.  The Newton matrix I - h A (x) J uses
    the exact Jacobian at the start of the step.  Phases of modes with
    h k^(2N+1) >~ 1 are wrong, so invariants stay tight while the trajectory
    itself converges slowly; kept for comparison.
    """

    def __init__(self, flow: PolynomialFlow, dt: float, newton_tol: float = 1e-14,
                 max_iter: int = 30):
        self.flow, self.h = flow, dt
        n = flow.n
        E = np.eye(n)
        Lh = flow.L[:, None] * np.fft.rfft(E, axis=0)
        Lh[-1] = 0.0
        self.Lmat = np.fft.irfft(Lh, n=n, axis=0)
        self.tol, self.max_iter = newton_tol, max_iter
        self.newton_iterations: List[int] = []

    def _f(self, x: np.ndarray) -> np.ndarray:
        return self.flow.to_phys(self.flow.full_rhs(self.flow.to_hat(x)))

    def step(self, v: np.ndarray) -> np.ndarray:
        fl, h = self.flow, self.h
        n = fl.n
        x = fl.to_phys(v)
        J = self.Lmat + fl.jacobian_phys(v)
        M = np.eye(2 * n) - h * np.kron(GAUSS_A, J)
        lu = sla.lu_factor(M)
        f0 = self._f(x)
        c = GAUSS_A.sum(axis=1)
        Z = np.concatenate([h * c[0] * f0, h * c[1] * f0])
        scale = 1.0 + float(np.max(np.abs(x)))
        for it in range(1, self.max_iter + 1):
            F1 = self._f(x + Z[:n])
            F2 = self._f(x + Z[n:])
            G = Z - h * np.concatenate([GAUSS_A[0, 0] * F1 + GAUSS_A[0, 1] * F2,
                                        GAUSS_A[1, 0] * F1 + GAUSS_A[1, 1] * F2])
            dZ = sla.lu_solve(lu, G)
            Z = Z - dZ
            if np.max(np.abs(dZ)) < self.tol * scale:
                break
        else:
            raise StabilityViolation("Gauss collocation: Newton iteration did not converge; reduce dt")
        self.newton_iterations.append(it)
        xn = x + GAUSS_D[0] * Z[:n] + GAUSS_D[1] * Z[n:]
        return fl.to_hat(xn)


class RK4:
    def __init__(self, rhs: Callable[[np.ndarray], np.ndarray], dt: float):
        self.rhs, self.h = rhs, dt

    def step(self, v):
        h, f = self.h, self.rhs
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    spec: FlowSpec
    times: np.ndarray
    snapshots: np.ndarray     # (len(times), grid), real
    geometry: Periodic
    # largest relative norm correction applied by the L2 projection (0 if off)
    projection_defect: float = 0.0

    def field(self, i: int) -> GridFunction:
        return GridFunction(self.snapshots[i], self.geometry)

    @property
    def final(self) -> GridFunction:
        return self.field(-1)


@dataclass
class DiagnosticsSeries:
    times: np.ndarray
    conserved: Dict[str, np.ndarray] = field(default_factory=dict)
    residuals: Dict[str, np.ndarray] = field(default_factory=dict)

    def drift(self, name: str, relative: bool = True) -> float:
        s = np.asarray(self.conserved[name])
        d = float(np.max(np.abs(s - s[0])))
        if relative:
            return d / max(abs(s[0]), 1e-300) if abs(s[0]) > 1e-14 else d
        return d

    def max_residual(self, name: str) -> float:
        return float(np.max(np.abs(self.residuals[name])))

    def to_json(self) -> dict:
        enc = lambda a: [[float(np.real(x)), float(np.imag(x))] for x in np.asarray(a)]
        return {"times": [float(t) for t in self.times],
                "conserved": {k: enc(v) for k, v in self.conserved.items()},
                "residuals": {k: [float(x) for x in np.asarray(v).real] for k, v in self.residuals.items()}}

    def validate(self) -> None:
        for d in (self.conserved, self.residuals):
            for k, v in d.items():
                if len(v) != len(self.times):
                    raise ValueError(f"series {k} has the wrong length")


def make_flow(spec: FlowSpec) -> PolynomialFlow:
    return PolynomialFlow(flow_gradient(spec.family, spec.N), _var_of(spec.family), spec.grid,
                          spec.period, _params(spec))


def _tau_rhs(spec: FlowSpec):
    from .scattering import tau_flow_vf
    geo = spec.geometry

    def f(x):
        return np.real(tau_flow_vf(GridFunction(x, geo), spec.tau, route="spectral").field.samples)
    return f


def evolve(spec: FlowSpec, initial: GridFunction,
           callback: Optional[Callable[[float, GridFunction], None]] = None) -> Trajectory:
    """Time-step the flow and return snapshots every ``spec.sample_every`` steps."""
    if not initial.periodic or initial.n != spec.grid or \
            abs(initial.geometry.period - spec.period) > 1e-12:
        raise GridMismatch("initial data must live on the flow's periodic grid")
    x0 = np.real(initial.samples).copy()
    geo = spec.geometry
    norm0 = max(float(np.max(np.abs(x0))), 1e-12)
    if spec.family == "tauflow":
        stepper = RK4(_tau_rhs(spec), spec.dt)
        state, to_phys = x0, (lambda s: s)
        guard = None
    else:
        flow = make_flow(spec)
        if spec.family == "goodvar" and np.min(1 + x0) <= 0:
            raise StabilityViolation("good-variable data must satisfy 1 + v > 0")
        if spec.integrator == "etdrk4":
            stepper = ETDRK4(flow, spec.dt)
        elif spec.integrator == "exprb4":
            stepper = ExpRosenbrock4(flow, spec.dt)
        elif spec.integrator == "gauss4":
            stepper = Gauss4(flow, spec.dt)
        else:
            stepper = RK4(flow.full_rhs, spec.dt)
        state, to_phys = flow.to_hat(x0), flow.to_phys
        guard = flow if spec.family == "goodvar" else None
    times, snaps = [0.0], [x0]
    t = 0.0
    target = float(np.sum(x0 ** 2))
    defect = 0.0
    for i in range(1, spec.steps + 1):
        new = stepper.step(state)
        xs = to_phys(new)
        if spec.project_l2 and target > 0 and np.all(np.isfinite(xs)):
            # rescale onto the invariant sphere; preserves the order of the scheme
            scale = math.sqrt(target / float(np.sum(xs ** 2)))
            defect = max(defect, abs(scale - 1.0))
            new, xs = new * scale, xs * scale
        t = i * spec.dt
        if not np.all(np.isfinite(xs)) or np.max(np.abs(xs)) > BLOWUP_FACTOR * norm0:
            raise BlowupDetected(f"{spec.family} N={spec.N}: solution blew up near t={t:.6g}",
                                 last_good_time=(i - 1) * spec.dt)
        if guard is not None and np.min(1 + xs) < GOODVAR_GUARD:
            raise StabilityViolation(f"1+v dropped below {GOODVAR_GUARD} at t={t:.6g}")
        state = new
        if i % spec.sample_every == 0 or i == spec.steps:
            times.append(t)
            snaps.append(xs)
            if callback is not None:
                callback(t, GridFunction(xs, geo))
    return Trajectory(spec, np.asarray(times), np.asarray(snaps), geo, defect)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

def _density_value(p: DiffPolynomial, f: GridFunction, var: str, params) -> complex:
    return A.evaluate_density(p, {var: f}, params)


def conservation_report(traj: Trajectory, hamiltonians: Dict[str, DiffPolynomial],
                        var: Optional[str] = None, params: Optional[Dict[str, float]] = None,
                        extra: Optional[Dict[str, Callable[[GridFunction], complex]]] = None
                        ) -> DiagnosticsSeries:
    """Evaluate each density (and optional functionals) along the trajectory."""
    spec = traj.spec
    var = var or (_var_of(spec.family) if spec.family != "tauflow" else "u")
    params = params if params is not None else _params(spec)
    out = DiagnosticsSeries(traj.times)
    fields = [traj.field(i) for i in range(len(traj.times))]
    for name, H in hamiltonians.items():
        out.conserved[name] = np.array([_density_value(H, f, var, params) for f in fields])
    for name, fn in (extra or {}).items():
        out.conserved[name] = np.array([fn(f) for f in fields])
    out.validate()
    return out


def gardner_conserved(N_max: int) -> Dict[str, DiffPolynomial]:
    from .hierarchy import gardner_hamiltonians
    g = gardner_hamiltonians(N_max, verify=False)
    return {f"H{m}": g.hamiltonian(m).density for m in range(N_max + 1)}


def kdv_conserved(N_max: int) -> Dict[str, DiffPolynomial]:
    from .hierarchy import lenard_sequence
    t = lenard_sequence(N_max)
    return {f"H{m}": t.hamiltonian(m).density for m in range(N_max + 1)}


def gardner_generating_functional(tau1: float, tau0: float) -> Callable[[GridFunction], complex]:
    """T_{-1}^Gardner(i tau1, w, tau0) via the periodic Riccati solve."""
    from .scattering import generating_function

    def f(w: GridFunction) -> complex:
        return generating_function("gardner", 1j * tau1, w=w, tau0=tau0, route="riccati").value
    return f


def l2_squared(f: GridFunction) -> complex:
    return f.integrate(np.abs(f.samples) ** 2)


def periodic_V(w: GridFunction, tau: float) -> GridFunction:
    """Good variable v = 1/(2 tau beta) - 1 with beta = (-d + 2 tau + 2w)^{-1} 1 periodically."""
    from .scattering import solve_first_order
    beta = solve_first_order(w, -1, 2 * tau, 2 * w.samples, np.ones(w.n))
    return w.like(np.real(1 / (2 * tau * beta) - 1))


def intertwining_check(spec: FlowSpec, w0: GridFunction, tau0: Optional[float] = None
                       ) -> Tuple[DiagnosticsSeries, Dict[str, Trajectory]]:
    """Evolve w (Gardner), u = M(w0) (KdV) and v = V(w0) (good variable) side by side."""
    from .scattering import miura_forward
    tau0 = spec.tau0 if tau0 is None else tau0
    base = dict(spec.to_json())
    base.update(tau0=tau0, tau=tau0, project_l2=None)
    sg = FlowSpec(**{**base, "family": "gardner"})
    sk = FlowSpec(**{**base, "family": "kdv"})
    sv = FlowSpec(**{**base, "family": "goodvar"})
    u0 = miura_forward(w0, tau0)
    v0 = periodic_V(w0, tau0)
    tg = evolve(sg, w0)
    tk = evolve(sk, u0.like(u0.samples.real))
    tv = evolve(sv, v0)
    out = DiagnosticsSeries(tg.times)
    mres, vres, pos = [], [], []
    for i in range(len(tg.times)):
        w = tg.field(i)
        mres.append(np.max(np.abs(miura_forward(w, tau0).samples.real - tk.snapshots[i])))
        vres.append(np.max(np.abs(periodic_V(w, tau0).samples.real - tv.snapshots[i])))
        pos.append(np.min(1 + tv.snapshots[i]))
    out.residuals["miura"] = np.array(mres)
    out.residuals["good_variable"] = np.array(vres)
    out.residuals["min_one_plus_v"] = np.array(pos)
    out.validate()
    return out, {"gardner": tg, "kdv": tk, "goodvar": tv}


_FD5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def flux_residual(traj: Trajectory, N: Optional[int] = None,
                  noise_floor: float = 1e-13) -> DiagnosticsSeries:
    """|| d_t(w^2) - d_x Fl_N(w) ||_{L^2} at interior snapshots.

    Time derivative by the fourth-order five-point centered stencil; snapshots
    must be equally spaced.  Fourier modes that stay below ``noise_floor``
    (relative to the largest coefficient) over the whole trajectory are removed
    first: rounding noise there rotates at ~k^(2N+1), which no time stencil
    resolves, and the high derivatives in Fl_N amplify it.
    """
    from .hierarchy import gardner_flux
    spec = traj.spec
    N = spec.N if N is None else N
    if spec.family != "gardner":
        raise ValueError("flux residual applies to Gardner trajectories")
    dts = np.diff(traj.times)
    if len(dts) < 4 or not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-15):
        raise ValueError("flux residual needs at least five equally spaced snapshots")
    h = dts[0]
    Fl = gardner_flux(N)
    n = traj.snapshots.shape[1]
    hat = np.fft.rfft(traj.snapshots, axis=1)
    amp = np.max(np.abs(hat), axis=0)
    keep = amp >= noise_floor * max(float(amp.max()), 1e-300)
    snaps = np.fft.irfft(hat * keep, n=n, axis=1)
    sq = snaps ** 2
    times, res, integ = [], [], []
    for i in range(2, len(traj.times) - 2):
        dt_w2 = np.tensordot(_FD5, sq[i - 2: i + 3], axes=1) / h
        f = GridFunction(snaps[i], traj.geometry)
        fl = f.like(A.evaluate_pointwise(Fl, {"w": f}, {"tau": spec.tau0}).real)
        dxfl = fl.derivative(1).samples.real
        times.append(traj.times[i])
        res.append(f.like(dt_w2 - dxfl).l2_norm())
        integ.append(abs(f.integrate(dxfl)))
    out = DiagnosticsSeries(np.asarray(times))
    out.residuals["flux"] = np.asarray(res)
    out.residuals["flux_integral"] = np.asarray(integ)
    out.validate()
    return out


@dataclass
class FluxStudy:
    dts: List[float]
    residuals: List[float]

    @property
    def ratios(self) -> List[float]:
        r = self.residuals
        return [r[i] / r[i + 1] for i in range(len(r) - 1)]

    @property
    def orders(self) -> List[float]:
        return [math.log2(q) for q in self.ratios]

    def to_json(self) -> dict:
        return {"dts": self.dts, "residuals": self.residuals,
                "ratios": self.ratios, "orders": self.orders}


def flux_order_study(N: int, w0: GridFunction, tau0: float, dts: Sequence[float],
                     window: Optional[float] = None, **spec_kw) -> FluxStudy:
    """Max flux residual over a fixed window [0, window] for each dt (snapshots every step)."""
    window = 40 * max(dts) if window is None else window
    res = []
    for dt in dts:
        spec = FlowSpec("gardner", N, tau0=tau0, dt=dt, t_end=window, sample_every=1,
                        grid=w0.n, period=w0.geometry.period, **spec_kw)
        res.append(float(np.max(flux_residual(evolve(spec, w0)).residuals["flux"])))
    return FluxStudy(list(map(float, dts)), res)
