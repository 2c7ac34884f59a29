"""Forward scattering for Schroedinger and AKNS operators and the Miura machinery.

Conventions
-----------
Schroedinger ``-f'' + u f = z^2 f`` with ``Im z > 0``.  Jost solutions are
stored renormalized:

    m = e^{izx} phi_l -> 1  (x -> -inf),     n = e^{-izx} phi_r -> 1  (x -> +inf),

so that ``m'' - 2iz m' = u m`` and ``n'' + 2iz n' = u n``.  Both are integrated in
their stable direction.  The Wronskian ``W = m n' - m' n + 2iz m n`` is
x-independent and ``T = 2iz / W`` (``T = 1`` for ``u = 0``).  The renormalized
coefficient is ``T_r = T exp(-(2iz)^{-1} int u)``.

AKNS ``psi' = [[-iz, q], [r, iz]] psi``.  With ``m = e^{izx} psi_l`` and
``n = e^{-izx} psi_r`` normalized to (1,0) and (0,1) at the left/right ends,
``1/T = det[m, n] = lim m_1(+inf)``.

Riccati variable ``w(z) = m'/m`` solves ``w' - 2iz w + w^2 = u``; at ``z = i tau`` this
is the Miura relation ``w' + 2 tau w + w^2 = u``.  The generating function is
``T_{-1}(z, u) = iz log T_r = -1/2 int w(z)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import (AtEigenvalue, BranchAmbiguity, ConvergenceNotReached, EigenvalueAtMinusOne,
                     GridMismatch, NonDecayingPotential, NotInMiuraRange, ResidualTooLarge,
                     StiffnessFailure)
from .grid import GridFunction, Line, Periodic, require_same_grid

RTOL = 1e-10
ATOL = 1e-12
RESIDUAL_TOL = 1e-7
CROSS_TOL = 1e-6
POSITIVITY_MARGIN = 1e-12
UPSAMPLE = 8


@dataclass(frozen=True)
class Tolerances:
    rtol: float = RTOL
    atol: float = ATOL
    residual: float = RESIDUAL_TOL
    cross: float = CROSS_TOL


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Schrodinger:
    u: GridFunction


@dataclass(frozen=True)
class AKNS:
    q: GridFunction
    r: GridFunction


Problem = Union[Schrodinger, AKNS]


@dataclass
class ScatteringRecord:
    z: complex
    problem: str
    T: complex
    T_renormalized: complex
    log_T: complex
    log_T_renormalized: complex
    wronskian: complex
    wronskian_drift: float
    jost_left: np.ndarray   # renormalized, shape (n,) or (2, n)
    jost_right: np.ndarray
    geometry: object
    w_of_z: Optional[GridFunction] = None
    beta: Optional[GridFunction] = None
    v: Optional[GridFunction] = None

    def to_json(self) -> dict:
        c = lambda a: [float(np.real(a)), float(np.imag(a))]
        g = self.geometry
        return {
            "problem": self.problem,
            "z": c(self.z),
            "T": c(self.T),
            "T_renormalized": c(self.T_renormalized),
            "log_T_renormalized": c(self.log_T_renormalized),
            "T_minus1": c(1j * self.z * self.log_T_renormalized),
            "wronskian": c(self.wronskian),
            "wronskian_drift": self.wronskian_drift,
            "grid": {"kind": "line", "a": g.a, "b": g.b, "n": int(np.shape(self.jost_left)[-1])},
        }


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _as_z(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise ValueError(f"spectral parameter must lie in the upper half plane, got {z}")
    return z


def _line_field(f: GridFunction, what: str = "potential") -> None:
    if f.periodic:
        raise ValueError(f"{what}: Jost solutions need a truncated line, not a periodic grid")
    f.check_decay()


def _spline(f: GridFunction) -> CubicSpline:
    xs, vals = f.upsample(UPSAMPLE)
    return CubicSpline(xs, vals)


def _ivp(rhs, span, y0, t_eval, tol: Tolerances):
    sol = solve_ivp(rhs, span, np.asarray(y0, dtype=complex), method="DOP853", t_eval=t_eval,
                    rtol=tol.rtol, atol=tol.atol)
    if not sol.success:
        raise StiffnessFailure(f"ODE step control failed: {sol.message}")
    return sol.y


def _fwd(rhs, x, y0, tol):
    return _ivp(rhs, (x[0], x[-1]), y0, x, tol)


def _bwd(rhs, x, y0, tol):
    return _ivp(rhs, (x[-1], x[0]), y0, x[::-1], tol)[:, ::-1]


def _continuous_log(m: np.ndarray) -> complex:
    """log m at the right end, branch continued from log m(left) = 0."""
    mag = np.abs(m)
    if np.min(mag) < 1e-10 * np.max(mag):
        raise BranchAmbiguity("renormalized Jost function nearly vanishes; phase tracking unreliable")
    ph = np.unwrap(np.angle(m))
    ph = ph - ph[0] + np.angle(m[0])
    return complex(math.log(mag[-1]), ph[-1])


def _match_branch(principal: complex, guess: complex) -> complex:
    k = round((guess.imag - principal.imag) / (2 * math.pi))
    val = principal + 2j * math.pi * k
    if abs(((val - guess).imag + math.pi) % (2 * math.pi) - math.pi) > 1e-3 and abs(val - guess) > 1e-3:
        raise BranchAmbiguity(f"Wronskian and path-tracked log T disagree: {val} vs {guess}")
    return val


# --------------------------------------------------------------------------
# Jost solutions and transmission
# --------------------------------------------------------------------------

def _jost_schrodinger(u: GridFunction, z: complex, tol: Tolerances) -> ScatteringRecord:
    _line_field(u)
    x = u.x
    su = _spline(u)
    iz2 = 2j * z

    def left(t, y):
        return [y[1], iz2 * y[1] + su(t) * y[0]]

    def right(t, y):
        return [y[1], -iz2 * y[1] + su(t) * y[0]]

    m, mp = _fwd(left, x, [1.0, 0.0], tol)
    n, np_ = _bwd(right, x, [1.0, 0.0], tol)
    W = m * np_ - mp * n + iz2 * m * n
    mid = W[len(W) // 2]
    drift = float(np.max(np.abs(W - mid)) / abs(mid)) if mid != 0 else math.inf
    if abs(mid) < 1e-10 * max(1.0, abs(iz2)):
        raise AtEigenvalue(f"Wronskian vanishes at z={z}: |W|={abs(mid):.2e}")
    T = iz2 / mid
    logT = _match_branch(complex(np.log(T)), -_continuous_log(m))
    int_u = u.integrate()
    shift = int_u / iz2
    rec = ScatteringRecord(z, "schrodinger", T, T * np.exp(-shift), logT, logT - shift, mid, drift,
                           np.vstack([m, mp]), np.vstack([n, np_]), u.geometry)
    with np.errstate(divide="ignore", invalid="ignore"):
        rec.w_of_z = u.like(mp / m)
    return rec


def _jost_akns(q: GridFunction, r: GridFunction, z: complex, tol: Tolerances) -> ScatteringRecord:
    require_same_grid(q, r)
    _line_field(q, "q")
    _line_field(r, "r")
    x = q.x
    sq, sr = _spline(q), _spline(r)
    iz2 = 2j * z

    def left(t, y):
        return [sq(t) * y[1], sr(t) * y[0] + iz2 * y[1]]

    def right(t, y):
        return [-iz2 * y[0] + sq(t) * y[1], sr(t) * y[0]]

    m = _fwd(left, x, [1.0, 0.0], tol)
    n = _bwd(right, x, [0.0, 1.0], tol)
    W = m[0] * n[1] - m[1] * n[0]
    mid = W[len(W) // 2]
    drift = float(np.max(np.abs(W - mid)) / abs(mid)) if mid != 0 else math.inf
    if abs(mid) < 1e-10:
        raise AtEigenvalue(f"Wronskian vanishes at z={z}: |W|={abs(mid):.2e}")
    T = 1.0 / mid
    logT = _match_branch(complex(np.log(T)), -_continuous_log(m[0]))
    shift = q.integrate(q.samples * r.samples) / iz2
    return ScatteringRecord(z, "akns", T, T * np.exp(-shift), logT, logT - shift, mid, drift,
                            m, n, q.geometry)


def jost_solutions(problem: Problem, z, tol: Tolerances = DEFAULT_TOL) -> ScatteringRecord:
    """Renormalized left/right Jost solutions, T, T_r and the Wronskian drift."""
    z = _as_z(z)
    if isinstance(problem, Schrodinger):
        return _jost_schrodinger(problem.u, z, tol)
    if isinstance(problem, AKNS):
        return _jost_akns(problem.q, problem.r, z, tol)
    raise TypeError(f"unknown scattering problem {problem!r}")


def transmission(problem: Problem, z, tol: Tolerances = DEFAULT_TOL) -> complex:
    """T_r for Schroedinger problems, T for AKNS problems."""
    rec = jost_solutions(problem, z, tol)
    return rec.T_renormalized if isinstance(problem, Schrodinger) else rec.T


# --------------------------------------------------------------------------
# periodic / spectral first-order solves
# --------------------------------------------------------------------------

def _symbol(f: GridFunction) -> np.ndarray:
    length = f.geometry.period if f.periodic else f.n * f.dx
    return 2j * np.pi * np.fft.fftfreq(f.n, d=length / f.n)


def solve_first_order(f: GridFunction, sign: int, c: complex, mult: np.ndarray,
                      rhs: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Solve (sign*d/dx + c + mult(x)) y = rhs on the periodic extension of the grid.

    Preconditioned by the constant-coefficient inverse; GMRES for the rest.
    """
    ik = _symbol(f)
    denom = sign * ik + c
    if np.min(np.abs(denom)) < 1e-14:
        raise ValueError("constant-coefficient part is not invertible")
    P = lambda g: np.fft.ifft(np.fft.fft(g) / denom)
    mult = np.asarray(mult, dtype=complex)
    b = P(np.asarray(rhs, dtype=complex))
    if not np.any(mult):
        return b
    n = f.n
    op = LinearOperator((n, n), matvec=lambda y: y + P(mult * y), dtype=complex)
    y, info = gmres(op, b, x0=b, rtol=tol, atol=0.0, restart=min(n, 60), maxiter=200)
    if info != 0:
        raise ConvergenceNotReached(f"GMRES did not converge (info={info})")
    return y


def riccati_spectral(source: GridFunction, z, tol: float = 1e-13,
                     max_newton: int = 40) -> GridFunction:
    """Solve w' - 2iz w + w^2 = source by Newton-GMRES on the (periodic extension of the) grid."""
    z = _as_z(z)
    s = source.samples
    w = solve_first_order(source, 1, -2j * z, np.zeros_like(s), s)
    scale = max(1.0, float(np.max(np.abs(s))))
    for _ in range(max_newton):
        d = np.fft.ifft(_symbol(source) * np.fft.fft(w))
        res = d - 2j * z * w + w * w - s
        err = float(np.max(np.abs(res)))
        if err < tol * scale:
            return source.like(w)
        w = w - solve_first_order(source, 1, -2j * z, 2 * w, res)
    raise ConvergenceNotReached(f"Riccati Newton iteration stalled, residual {err:.2e}")


def _dx(f: GridFunction) -> np.ndarray:
    return f.derivative(1).samples


# --------------------------------------------------------------------------
# Miura maps
# --------------------------------------------------------------------------

def miura_forward(w: GridFunction, tau: float) -> GridFunction:
    """u = w' + 2 tau w + w^2."""
    return w.like(_dx(w) + 2 * tau * w.samples + w.samples ** 2)


def _riccati_residual(w: GridFunction, source: GridFunction, z: complex) -> float:
    res = _dx(w) - 2j * z * w.samples + w.samples ** 2 - source.samples
    return float(np.max(np.abs(res)))


def riccati_shifted(source: GridFunction, z, tol: Tolerances = DEFAULT_TOL,
                    route: str = "auto") -> GridFunction:
    """w(z) = d/dx log phi_l + iz, i.e. w' - 2iz w + w^2 = source.

    ``route``: "jost" integrates the renormalized Jost function on a line,
    "spectral" uses the Newton solver (periodic grids), "auto" picks by geometry.
    """
    z = _as_z(z)
    if route == "auto":
        route = "spectral" if source.periodic else "jost"
    if route == "spectral":
        w = riccati_spectral(source, z)
    else:
        _line_field(source)
        rec = _jost_schrodinger(source, z, tol)
        m, mp = rec.jost_left
        real_problem = np.all(source.samples.imag == 0) and z.real == 0
        if real_problem:
            if np.min(m.real) <= POSITIVITY_MARGIN:
                raise NotInMiuraRange(
                    f"left Jost function changes sign at z={z}: -d^2+u+{abs(z) ** 2:g} is not positive")
        elif np.min(np.abs(m)) <= POSITIVITY_MARGIN:
            raise NotInMiuraRange(f"left Jost function vanishes at z={z}")
        w = source.like(mp / m)
    res = _riccati_residual(w, source, z)
    if res > tol.residual:
        raise ResidualTooLarge(f"Riccati residual {res:.2e} exceeds {tol.residual:.0e}")
    return w


def miura_inverse(u: GridFunction, tau: float, tol: Tolerances = DEFAULT_TOL,
                  route: str = "auto") -> GridFunction:
    """w = d/dx log psi_l - tau, the solution of w' + 2 tau w + w^2 = u decaying on the left."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return riccati_shifted(u, 1j * tau, tol, route)


# --------------------------------------------------------------------------
# diagonal Green's function and good variable
# --------------------------------------------------------------------------

def _green_solve(w: GridFunction, tau: float, rhs: np.ndarray, tail: complex,
                 tol: Tolerances) -> np.ndarray:
    """y = (-d + 2 tau + 2w)^{-1} rhs."""
    if w.periodic:
        return solve_first_order(w, -1, 2 * tau, 2 * w.samples, rhs)
    x = w.x
    sw = _spline(w)
    sr = CubicSpline(*w.like(rhs).upsample(UPSAMPLE))

    def f(t, y):
        return [(2 * tau + 2 * sw(t)) * y[0] - sr(t)]

    # scalar problem: tighten the step control, the residual gate is checked spectrally
    fine = Tolerances(min(tol.rtol, 1e-12), min(tol.atol, 1e-14), tol.residual, tol.cross)
    return _bwd(f, x, [tail], fine)[0]


def green_residual(w: GridFunction, tau: float, beta: GridFunction, rhs=1.0) -> float:
    res = -_dx(beta) + (2 * tau + 2 * w.samples) * beta.samples - rhs
    return float(np.max(np.abs(res)))


def W_map(v: GridFunction, tau: float) -> GridFunction:
    """W(tau, v) = tau v - 1/2 d/dx log(1+v)."""
    one_v = 1 + v.samples
    return v.like(tau * v.samples - 0.5 * _dx(v) / one_v)


def diagonal_green_and_v(w: GridFunction, tau: float, tol: Tolerances = DEFAULT_TOL
                         ) -> Tuple[GridFunction, GridFunction]:
    """beta = (-d + 2 tau + 2w)^{-1} 1 and v = 1/(2 tau beta) - 1, with residual checks."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not w.periodic:
        w.check_decay()
    beta = w.like(_green_solve(w, tau, np.ones(w.n), 1 / (2 * tau), tol))
    res = green_residual(w, tau, beta)
    if res > tol.residual:
        raise ResidualTooLarge(f"Green's function residual {res:.2e}")
    v = w.like(1 / (2 * tau * beta.samples) - 1)
    if np.min((1 + v.samples).real) <= 0:
        raise ResidualTooLarge("good variable leaves the region v > -1")
    back = W_map(v, tau)
    err = float(np.max(np.abs(back.samples - w.samples)))
    if err > tol.residual:
        raise ResidualTooLarge(f"good-variable relation residual {err:.2e}")
    return beta, v


def good_variable_inverse(v: GridFunction, tau: float) -> GridFunction:
    return W_map(v, tau)


# --------------------------------------------------------------------------
# generating functions
# --------------------------------------------------------------------------

@dataclass
class GeneratingValue:
    value: complex
    jost: Optional[complex]
    riccati: Optional[complex]

    @property
    def difference(self) -> float:
        if self.jost is None or self.riccati is None:
            return 0.0
        return abs(self.jost - self.riccati)


def _T_minus1_jost(u: GridFunction, z: complex, tol: Tolerances) -> complex:
    rec = _jost_schrodinger(u, z, tol)
    return 1j * z * rec.log_T_renormalized


def _T_minus1_riccati(u: GridFunction, z: complex) -> complex:
    w = riccati_spectral(u, z)
    return -0.5 * u.integrate(w.samples ** 2)


def generating_function(kind: str, z, u: Optional[GridFunction] = None,
                        w: Optional[GridFunction] = None, tau0: Optional[float] = None,
                        route: str = "both", tol: Tolerances = DEFAULT_TOL) -> GeneratingValue:
    """T_{-1}^KdV(z, u) or T_{-1}^Gardner(z, w, tau0) by the Jost and/or Riccati routes."""
    z = _as_z(z)
    kind = kind.lower()
    if kind == "kdv":
        if u is None:
            raise ValueError("KdV generating function needs u")
        src, pre, post = u, 1.0, 0.0
    elif kind == "gardner":
        if w is None or tau0 is None:
            raise ValueError("Gardner generating function needs w and tau0")
        src = miura_forward(w, tau0)
        den = 4 * z * z + 4 * tau0 * tau0
        if abs(den) < 1e-12:
            raise ValueError("z = i tau0 is a removable point; evaluate nearby")
        pre, post = 1 / den, 0.5 * w.integrate(w.samples ** 2)
    else:
        raise ValueError(f"unknown generating function {kind!r}")
    j = r = None
    if route in ("both", "jost"):
        j = pre * (_T_minus1_jost(src, z, tol) + post)
    if route in ("both", "riccati"):
        r = pre * (_T_minus1_riccati(src, z) + post)
    if j is not None and r is not None and abs(j - r) > tol.cross * max(1.0, abs(j)):
        raise BranchAmbiguity(f"Jost and Riccati routes disagree: {j} vs {r}")
    return GeneratingValue(j if j is not None else r, j, r)


# --------------------------------------------------------------------------
# remainder of the asymptotic expansion
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _kdv_densities(N: int):
    from .hierarchy import lenard_sequence
    t = lenard_sequence(max(N, 0))
    return tuple(t.hamiltonian(n).density for n in range(N + 1))


def kdv_hamiltonian_values(u: GridFunction, N: int) -> List[complex]:
    from .algebra import evaluate_density
    return [evaluate_density(H, {"u": u}) for H in _kdv_densities(N)]


def remainder_T_N(N: int, z, u: GridFunction, order: Optional[int] = None) -> complex:
    """T_N(z,u) = (2z)^{2N+2} T_{-1}(z,u) - sum_{n=0}^N (2z)^{2(N-n)} H_n(u).

    Evaluated without cancellation: the Riccati solution is split as the
    truncated asymptotic series in eps = 1/(2iz) plus a correction rho solved
    by Newton; the low-order series coefficients are paired with H_n exactly.
    """
    z = _as_z(z)
    if N < -1:
        raise ValueError("N >= -1 required")
    if N == -1:
        return _T_minus1_riccati(u, z)
    K = order if order is not None else 2 * N + 4
    s = u.samples
    ik = _symbol(u)
    D = lambda f: np.fft.ifft(ik * np.fft.fft(f))
    # w = sum_k w_k eps^k, w_1 = -u, w_{k+1} = w_k' + c_k, c_m = sum_{j+l=m} w_j w_l
    wk = {1: -s}
    def c(m):
        return sum(wk[j] * wk[m - j] for j in range(max(1, m - K), min(K, m - 1) + 1))
    for k in range(1, K):
        wk[k + 1] = D(wk[k]) + c(k)
    eps = 1 / (2j * z)
    wt = sum(wk[k] * eps ** k for k in range(1, K + 1))
    # residual of the truncated series, assembled from its high-order terms only
    R = D(wk[K]) * eps ** K + sum(c(m) * eps ** m for m in range(K + 1, 2 * K + 1))
    R = R + c(K) * eps ** K if K >= 2 else R
    # rho' - 2iz rho + 2 wt rho + rho^2 = -R
    rho = np.zeros_like(wt)
    for _ in range(30):
        res = D(rho) - 2j * z * rho + 2 * wt * rho + rho * rho + R
        if np.max(np.abs(res)) <= 1e-15 * max(1e-300, np.max(np.abs(R))) or not np.any(res):
            break
        rho = rho - solve_first_order(u, 1, -2j * z, 2 * wt + 2 * rho, res)
    I = lambda f: u.integrate(f)
    integrals = {m: I(c(m)) for m in range(2, 2 * K + 1)}
    H = kdv_hamiltonian_values(u, N)
    two_z = 2 * z
    scale = two_z ** (2 * N + 2)
    total = 0j
    # paired low-order terms: (2z)^{2(N-n)} [ (-1)^n/2 I_{2n+2} - H_n ]
    for n in range(N + 1):
        total += two_z ** (2 * (N - n)) * ((-1) ** n * 0.5 * integrals[2 * n + 2] - H[n])
    # odd low-order terms integrate to zero analytically; keep their quadrature values
    for m in range(3, 2 * N + 3, 2):
        total += scale * (-0.5) * integrals[m] * eps ** m
    for m in range(2 * N + 3, 2 * K + 1):
        total += scale * (-0.5) * integrals[m] * eps ** m
    total += scale * (-0.5) * (2 * I(wt * rho) + I(rho * rho))
    return complex(total)


def remainder_direct(N: int, z, u: GridFunction, tol: Tolerances = DEFAULT_TOL) -> complex:
    """Same quantity by naive subtraction from the Jost-route T_{-1} (for moderate |z|)."""
    z = _as_z(z)
    T = _T_minus1_jost(u, z, tol)
    H = kdv_hamiltonian_values(u, max(N, 0))
    val = (2 * z) ** (2 * N + 2) * T
    for n in range(N + 1):
        val -= (2 * z) ** (2 * (N - n)) * H[n]
    return complex(val)


@dataclass
class SlopeProbe:
    N: int
    taus: List[float]
    values: List[float]
    slope: float


def remainder_slope(N: int, u: GridFunction, taus: Sequence[float] = (4, 8, 16, 32)) -> SlopeProbe:
    """Log-log slope of |(2i tau)^2 T_{N-1}(i tau) - H_N| = |T_N(i tau)| in tau."""
    vals = [abs(remainder_T_N(N, 1j * t, u)) for t in taus]
    slope = float(np.polyfit(np.log(taus), np.log(vals), 1)[0])
    return SlopeProbe(N, list(map(float, taus)), vals, slope)


# --------------------------------------------------------------------------
# regularized Fredholm determinant
# --------------------------------------------------------------------------

@dataclass
class Det2Result:
    value: complex             # T_{-1} = -iz log det_2
    log_det2: complex
    fine: complex
    coarse: Optional[complex]
    trace: complex

    @property
    def richardson_correction(self) -> float:
        return abs(self.value - self.fine)


def _log_det2(z: complex, x: np.ndarray, u: np.ndarray, weights: np.ndarray,
              method: str = "lu") -> Tuple[complex, complex]:
    s = np.sqrt(u.astype(complex)) * np.sqrt(weights)
    G = (0.5j / z) * np.exp(1j * z * np.abs(x[:, None] - x[None, :]))
    K = s[:, None] * G * s[None, :]
    tr = complex(np.trace(K))
    A = np.eye(len(x)) + K
    if method == "eig":
        lam = np.linalg.eigvals(K)
        if np.min(np.abs(1 + lam)) < 1e-12:
            raise EigenvalueAtMinusOne("discretized kernel has an eigenvalue at -1")
        lam = lam[np.argsort(-np.abs(lam))]
        return complex(np.sum(np.log1p(lam) - lam)), tr
    lu, _ = sla.lu_factor(A, check_finite=False)
    d = np.diag(lu)
    if np.min(np.abs(d)) < 1e-12:
        raise EigenvalueAtMinusOne("1 + K is numerically singular")
    ld = complex(np.sum(np.log(d.astype(complex)))) - tr
    # det_2 is close to 1 here; pick the principal branch of its logarithm
    ld = complex(ld.real, (ld.imag + math.pi) % (2 * math.pi) - math.pi)
    return ld, tr


def _trapezoid_weights(n: int, dx: float, periodic: bool) -> np.ndarray:
    w = np.full(n, dx)
    if not periodic:
        w[0] = w[-1] = dx / 2
    return w


def fredholm_det2(z, u: GridFunction, richardson: bool = True, method: str = "lu",
                  gate: float = 1e-3) -> Det2Result:
    """T_{-1}(z, u) = -iz log det_2(1 + u(-d^2 - z^2)^{-1}) by Nystroem quadrature.

    The kernel (i/2z) e^{iz|x-y|} has a kink on the diagonal, so the trapezoid rule
    is second order with an even error expansion; one Richardson step against the
    every-other-node grid removes the h^2 term.
    """
    z = _as_z(z)
    if u.periodic:
        raise ValueError("det_2 is defined here for decaying data on a line")
    u.check_decay()
    x, s = u.x, u.samples
    ld, tr = _log_det2(z, x, s, _trapezoid_weights(u.n, u.dx, False), method)
    fine = -1j * z * ld
    coarse = None
    value = fine
    if richardson:
        xc, sc = x[::2], s[::2]
        wc = _trapezoid_weights(len(xc), 2 * u.dx, False)
        ldc, _ = _log_det2(z, xc, sc, wc, method)
        coarse = -1j * z * ldc
        value = (4 * fine - coarse) / 3
        if abs(fine - coarse) > gate * max(1.0, abs(fine)):
            raise ConvergenceNotReached(f"grid refinement changes det_2 by {abs(fine - coarse):.2e}")
    return Det2Result(value, value / (-1j * z), fine, coarse, tr)


# --------------------------------------------------------------------------
# tau flow
# --------------------------------------------------------------------------

@dataclass
class TauFlowField:
    field: GridFunction   # u_t
    F: GridFunction       # (-d + 2 tau + 2w)^{-1} w
    w: GridFunction
    residual: float


def tau_flow_vf(u: GridFunction, tau: float, tol: Tolerances = DEFAULT_TOL,
                route: str = "auto") -> TauFlowField:
    """u_t = d/dx dT_{-1}(i tau, u)/du = -d/dx F with F = (-d + 2 tau + 2w)^{-1} w.

    The gradient of T_{-1} at z = i tau equals -F (its quadratic part is
    -int u^2 / (8 tau^2), whose gradient is -u/(4 tau^2) ~ -F).
    """
    w = miura_inverse(u, tau, tol, route)
    F = w.like(_green_solve(w, tau, w.samples, 0.0, tol) if route != "spectral" or not u.periodic
               else solve_first_order(w, -1, 2 * tau, 2 * w.samples, w.samples))
    res = green_residual(w, tau, F, w.samples)
    if res > tol.residual:
        raise ResidualTooLarge(f"tau-flow resolvent residual {res:.2e}")
    return TauFlowField(F.like(-_dx(F)), F, w, res)


def tau_flow_linear_symbol(xi: np.ndarray, tau: float) -> np.ndarray:
    """Fourier multiplier of the tau-flow linearized at u = 0."""
    return -1j * xi / (4 * tau * tau + xi * xi)


def tau_flow_conservation_probe(u: GridFunction, tau1: float, tau2: float, dt: float = 1e-4,
                                tol: Tolerances = DEFAULT_TOL) -> float:
    """Centered difference of T_{-1}(i tau1) along the tau2 flow."""
    V = tau_flow_vf(u, tau2, tol).field
    Tp = _T_minus1_riccati(u + dt * V, 1j * tau1)
    Tm = _T_minus1_riccati(u - dt * V, 1j * tau1)
    return abs(Tp - Tm) / (2 * dt)
