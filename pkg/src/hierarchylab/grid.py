"""Uniform grids, sampled fields and built-in potentials."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .errors import GridMismatch, NonDecayingPotential


@dataclass(frozen=True)
class Periodic:
    period: float

    def nodes(self, n: int) -> np.ndarray:
        return np.arange(n) * (self.period / n)

    def spacing(self, n: int) -> float:
        return self.period / n


@dataclass(frozen=True)
class Line:
    """Truncated line [a, b] sampled at n points including both ends."""
    a: float
    b: float

    def nodes(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)

    def spacing(self, n: int) -> float:
        return (self.b - self.a) / (n - 1)


Geometry = Union[Periodic, Line]

TAIL_TOL = 1e-12


def _wavenumbers(n: int, length: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


@dataclass
class GridFunction:
    """Complex samples on a uniform grid with its geometry."""

    samples: np.ndarray
    geometry: Geometry
    tail_tol: float = TAIL_TOL
    _dcache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 16:
            raise ValueError("a grid function needs at least 16 samples")

    # geometry -----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.geometry.nodes(self.n)

    @property
    def dx(self) -> float:
        return self.geometry.spacing(self.n)

    @property
    def periodic(self) -> bool:
        return isinstance(self.geometry, Periodic)

    def like(self, samples) -> "GridFunction":
        return GridFunction(np.asarray(samples, dtype=complex), self.geometry, self.tail_tol)

    def __add__(self, o):
        return self.like(self.samples + (o.samples if isinstance(o, GridFunction) else o))

    def __sub__(self, o):
        return self.like(self.samples - (o.samples if isinstance(o, GridFunction) else o))

    def __mul__(self, o):
        return self.like(self.samples * (o.samples if isinstance(o, GridFunction) else o))

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples)))

    # tails --------------------------------------------------------------
    def check_decay(self, tol: Optional[float] = None) -> None:
        if self.periodic:
            return
        tol = self.tail_tol if tol is None else tol
        ends = max(abs(self.samples[0]), abs(self.samples[-1]))
        if ends > tol:
            raise NonDecayingPotential(f"field does not decay at the truncation ends: {ends:.2e}")

    # calculus -----------------------------------------------------------
    def _fft_length(self) -> float:
        if self.periodic:
            return self.geometry.period
        # decaying data on [a,b] treated as one period of length n*dx
        return self.n * self.dx

    def derivative(self, k: int = 1) -> "GridFunction":
        if k == 0:
            return self
        if k not in self._dcache:
            kk = _wavenumbers(self.n, self._fft_length())
            mult = (1j * kk) ** k
            if self.n % 2 == 0 and k % 2 == 1:
                mult[self.n // 2] = 0.0
            self._dcache[k] = np.fft.ifft(mult * np.fft.fft(self.samples))
        return self.like(self._dcache[k])

    def integrate(self, values: Optional[np.ndarray] = None) -> complex:
        """Trapezoid quadrature (spectrally accurate for periodic or decaying data)."""
        f = self.samples if values is None else np.asarray(values)
        if self.periodic:
            return complex(np.sum(f) * self.dx)
        return complex((np.sum(f) - 0.5 * (f[0] + f[-1])) * self.dx)

    def l2_norm(self) -> float:
        return float(np.sqrt(abs(self.integrate(np.abs(self.samples) ** 2))))

    def cumulative_integral(self) -> "GridFunction":
        """Running integral from the left end (trapezoid plus spectral correction not applied)."""
        f = self.samples
        c = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * self.dx)])
        return self.like(c)

    def upsample(self, factor: int) -> Tuple[np.ndarray, np.ndarray]:
        """Band-limited interpolation onto a grid refined by ``factor``."""
        n = self.n
        m = n * factor
        if self.periodic:
            fh = np.fft.fft(self.samples)
            pad = np.zeros(m, dtype=complex)
            h = n // 2
            pad[:h] = fh[:h]
            pad[m - (n - h):] = fh[h:]
            if n % 2 == 0:
                pad[h] *= 0.5
                pad[m - h] = pad[h]
            vals = np.fft.ifft(pad) * factor
            xs = self.geometry.nodes(m)
            return xs, vals
        # line: treat as periodic of length n*dx starting at a
        length = n * self.dx
        fh = np.fft.fft(self.samples)
        pad = np.zeros(m, dtype=complex)
        h = n // 2
        pad[:h] = fh[:h]
        pad[m - (n - h):] = fh[h:]
        if n % 2 == 0:
            pad[h] *= 0.5
            pad[m - h] = pad[h]
        vals = np.fft.ifft(pad) * factor
        xs = self.geometry.a + np.arange(m) * (length / m)
        keep = xs <= self.geometry.b + 1e-12
        return xs[keep], vals[keep]


def same_grid(f: GridFunction, g: GridFunction) -> bool:
    return f.n == g.n and f.geometry == g.geometry


def require_same_grid(*fs: GridFunction) -> None:
    for g in fs[1:]:
        if not same_grid(fs[0], g):
            raise GridMismatch("fields live on different grids")


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def periodic_grid(n: int, period: float = 2 * np.pi) -> Periodic:
    return Periodic(float(period))


def sample(fn: Callable[[np.ndarray], np.ndarray], geometry: Geometry, n: int) -> GridFunction:
    x = geometry.nodes(n)
    return GridFunction(np.asarray(fn(x), dtype=complex) * np.ones_like(x), geometry)


def sech(x):
    return 1.0 / np.cosh(x)


POTENTIALS: Dict[str, Tuple[Callable, Dict[str, float]]] = {
    # name: (callable(x, **params), defaults)
    "zero": (lambda x: 0 * x, {}),
    "sech": (lambda x, a=0.5, c=0.0, k=1.0: a * sech(k * (x - c)), {"a": 0.5, "c": 0.0, "k": 1.0}),
    "sech2": (lambda x, a=-2.0, c=0.0, k=1.0: a * sech(k * (x - c)) ** 2,
              {"a": -2.0, "c": 0.0, "k": 1.0}),
    "sech4": (lambda x, a=0.5, c=0.0, k=1.0: a * sech(k * (x - c)) ** 4,
              {"a": 0.5, "c": 0.0, "k": 1.0}),
    "gaussian": (lambda x, a=0.5, c=0.0, s=1.0: a * np.exp(-((x - c) / s) ** 2),
                 {"a": 0.5, "c": 0.0, "s": 1.0}),
    "wave": (lambda x, a=0.1, b=0.03, p=0.5: a * np.cos(x) + b * np.cos(2 * x + p),
             {"a": 0.1, "b": 0.03, "p": 0.5}),
    "bump": (lambda x, a=0.4, c=1.5, s=1.0: a * (np.exp(-((x - c) / s) ** 2)
                                               + np.exp(-((x + c) / s) ** 2)),
             {"a": 0.4, "c": 1.5, "s": 1.0}),
}


def parse_potential_spec(spec: str) -> Tuple[str, Dict[str, float]]:
    """``"sech:a=0.5,c=1"`` -> ("sech", {"a": 0.5, "c": 1.0})."""
    if ":" in spec:
        name, rest = spec.split(":", 1)
    else:
        name, rest = spec, ""
    params: Dict[str, float] = {}
    if name == "csv":
        return name, {"path": rest}
    for item in filter(None, rest.split(",")):
        k, v = item.split("=")
        params[k.strip()] = float(v)
    if name not in POTENTIALS:
        raise ValueError(f"unknown potential family {name!r}; known: {sorted(POTENTIALS)}")
    return name, params


def potential(spec: str, geometry: Geometry, n: int) -> GridFunction:
    name, params = parse_potential_spec(spec)
    if name == "csv":
        return read_csv(params["path"], geometry if isinstance(geometry, Periodic) else None)
    fn, defaults = POTENTIALS[name]
    kw = dict(defaults)
    kw.update(params)
    return sample(lambda x: fn(x, **kw), geometry, n)


def read_csv(path: str, periodic: Optional[Periodic] = None) -> GridFunction:
    """Read ``x, re, im`` rows on a uniform grid."""
    xs, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x = float(row[0])
            except ValueError:
                continue  # header
            re_ = float(row[1]) if len(row) > 1 else 0.0
            im_ = float(row[2]) if len(row) > 2 else 0.0
            xs.append(x)
            vals.append(complex(re_, im_))
    xs = np.asarray(xs)
    d = np.diff(xs)
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise GridMismatch("CSV grid is not uniform")
    if periodic is not None:
        return GridFunction(np.asarray(vals), periodic)
    return GridFunction(np.asarray(vals), Line(float(xs[0]), float(xs[-1])))


def write_csv(path: str, f: GridFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re", "im"])
        for x, v in zip(f.x, f.samples):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
