"""Exact differential-polynomial algebra.

Polynomials in finitely many dependent variables and their x-derivatives,
with coefficients in Q(i)[tau, tau0].  The special variable ``s`` stands for
``(1 + v)^{-1}`` and differentiates as ``s' = -s^2 v'``.

Monomials are tuples of ``(var, order, power)`` sorted by ``(var, order)``.
A polynomial is stored flat as ``{(monomial, param_exponents): coeff}``.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import GridMismatch, NotATotalDerivative, SingularS, UnsupportedAlphabet

PARAMS: Tuple[str, str] = ("tau", "tau0")
# reciprocal variables: s = (1 + v)^{-1}
RECIPROCALS: Dict[str, str] = {"s": "v"}

Monomial = Tuple[Tuple[str, int, int], ...]
PExp = Tuple[int, int]


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------

class GaussianRational:
    """Exact element of Q(i)."""


    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            re, im = re.re, re.im
        elif isinstance(re, complex):
            re, im = Fraction(re.real), Fraction(re.imag)
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _make(re: Fraction, im: Fraction) -> "GaussianRational":
        g = object.__new__(GaussianRational)
        g.re = re
        g.im = im
        return g

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        return cls(x)

    def __add__(self, o):
        if not isinstance(o, _NUMBER):
            return NotImplemented
        o = GaussianRational.coerce(o)
        return GaussianRational._make(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        if not isinstance(o, _NUMBER):
            return NotImplemented
        o = GaussianRational.coerce(o)
        return GaussianRational._make(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return GaussianRational.coerce(o) - self

    def __neg__(self):
        return GaussianRational._make(-self.re, -self.im)

    def __mul__(self, o):
        if not isinstance(o, _NUMBER):
            return NotImplemented
        o = GaussianRational.coerce(o)
        a, b, c, d = self.re, self.im, o.re, o.im
        if not b and not d:
            return GaussianRational._make(a * c, b)
        return GaussianRational._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if not isinstance(o, _NUMBER):
            return NotImplemented
        o = GaussianRational.coerce(o)
        n = o.re * o.re + o.im * o.im
        if not n:
            raise ZeroDivisionError("division by zero in Q(i)")
        return self * GaussianRational._make(o.re / n, -o.im / n)

    def __rtruediv__(self, o):
        return GaussianRational.coerce(o) / self

    def __pow__(self, k: int):
        out = GaussianRational(1)
        base = self if k >= 0 else GaussianRational(1) / self
        for _ in range(abs(k)):
            out = out * base
        return out

    def conjugate(self) -> "GaussianRational":
        return GaussianRational._make(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        try:
            o = GaussianRational.coerce(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return "i" if self.im == 1 else ("-i" if self.im == -1 else f"{self.im}i")
        return f"({self.re}{'+' if self.im > 0 else '-'}{abs(self.im)}i)"


_NUMBER = (GaussianRational, int, Fraction)
ONE = GaussianRational(1)
I = GaussianRational(0, 1)


class ParamCoefficient:
    """Polynomial in (tau, tau0) with Gaussian-rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[PExp, GaussianRational]] = None):
        self.terms = {tuple(k): GaussianRational.coerce(v) for k, v in (terms or {}).items() if v}

    def __eq__(self, o):
        return isinstance(o, ParamCoefficient) and self.terms == o.terms

    def __repr__(self):
        return f"ParamCoefficient({self.terms})"

    def evaluate(self, params: Mapping[str, complex]) -> complex:
        t = complex(params.get("tau", 0.0))
        t0 = complex(params.get("tau0", 0.0))
        return sum(complex(c) * t ** a * t0 ** b for (a, b), c in self.terms.items())


# --------------------------------------------------------------------------
# monomials
# --------------------------------------------------------------------------

def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d: Dict[Tuple[str, int], int] = {}
    for v, k, p in a:
        d[(v, k)] = p
    for v, k, p in b:
        d[(v, k)] = d.get((v, k), 0) + p
    return tuple(sorted((v, k, p) for (v, k), p in d.items()))


def _mono_key(m: Monomial):
    """Comparison key used by the antiderivative: factor instances by (order, var), descending."""
    inst = []
    for v, k, p in m:
        inst.extend([(k, v)] * p)
    inst.sort(reverse=True)
    return tuple(inst)


class Grading:
    """Per-monomial grades."""

    __slots__ = ("homogeneity", "weight", "negative", "tau_degree")

    def __init__(self, homogeneity: int, weight: int, negative: int = 0, tau_degree: int = 0):
        self.homogeneity = homogeneity
        self.weight = weight
        self.negative = negative
        self.tau_degree = tau_degree

    @property
    def degree_kdv(self) -> Fraction:
        return self.homogeneity + Fraction(self.weight, 2)

    @property
    def degree_gardner(self) -> int:
        return self.homogeneity + self.weight

    @property
    def degree_generalized(self) -> int:
        # l + k - n + d for monomials carrying s-factors
        return self.tau_degree + self.homogeneity - self.negative + self.weight

    def __repr__(self):
        return (f"Grading(H={self.homogeneity}, M={self.weight}, n={self.negative}, "
                f"l={self.tau_degree})")

    def __eq__(self, o):
        return isinstance(o, Grading) and (self.homogeneity, self.weight, self.negative,
                                           self.tau_degree) == (o.homogeneity, o.weight,
                                                                o.negative, o.tau_degree)


# --------------------------------------------------------------------------
# polynomials
# --------------------------------------------------------------------------

def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


class DiffPolynomial:
    """Immutable differential polynomial over Q(i)[tau, tau0]."""

    __slots__ = ("_t", "alphabet", "_hash")

    def __init__(self, terms: Optional[Mapping] = None, alphabet: Iterable[str] = ()):
        t = {}
        for key, c in (terms or {}).items():
            c = GaussianRational.coerce(c)
            if c:
                mono, pe = key
                t[(tuple(mono), tuple(pe))] = c
        self._t = t
        alph = set(alphabet)
        for mono, _ in t:
            for v, _, _ in mono:
                alph.add(v)
        self.alphabet = frozenset(alph)
        self._hash = None

    @classmethod
    def _raw(cls, t: dict, alphabet=frozenset()) -> "DiffPolynomial":
        p = object.__new__(cls)
        p._t = t
        alph = set(alphabet)
        for mono, _ in t:
            for v, _, _ in mono:
                alph.add(v)
        p.alphabet = frozenset(alph)
        p._hash = None
        return p

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, alphabet=()) -> "DiffPolynomial":
        return cls._raw({}, frozenset(alphabet))

    @classmethod
    def const(cls, c, pexp: PExp = (0, 0)) -> "DiffPolynomial":
        c = GaussianRational.coerce(c)
        return cls._raw({((), tuple(pexp)): c} if c else {})

    @classmethod
    def var(cls, name: str, order: int = 0) -> "DiffPolynomial":
        if name in PARAMS:
            return cls.param(name)
        return cls._raw({(((name, order, 1),), (0, 0)): ONE})

    @classmethod
    def param(cls, name: str, power: int = 1) -> "DiffPolynomial":
        pe = (power, 0) if name == "tau" else (0, power)
        return cls._raw({((), pe): ONE})

    # basic protocol -----------------------------------------------------
    @property
    def params(self) -> Tuple[str, str]:
        return PARAMS

    def items(self):
        return self._t.items()

    def __len__(self):
        return len(self._t)

    def __bool__(self):
        return bool(self._t)

    def is_zero(self) -> bool:
        return not self._t

    def __eq__(self, o):
        if not isinstance(o, DiffPolynomial):
            try:
                o = DiffPolynomial.const(o)
            except (TypeError, ValueError):
                return NotImplemented
        return self._t == o._t

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._t.items()))
        return self._hash

    @property
    def terms(self) -> Dict[Monomial, ParamCoefficient]:
        """Grouped view: monomial -> ParamCoefficient."""
        out: Dict[Monomial, dict] = {}
        for (m, pe), c in self._t.items():
            out.setdefault(m, {})[pe] = c
        return {m: ParamCoefficient(d) for m, d in sorted(out.items())}

    def coefficient(self, monomial: Monomial, pexp: PExp = (0, 0)) -> GaussianRational:
        return self._t.get((tuple(monomial), tuple(pexp)), GaussianRational(0))

    # arithmetic ---------------------------------------------------------
    @staticmethod
    def _coerce(o) -> "DiffPolynomial":
        if isinstance(o, DiffPolynomial):
            return o
        return DiffPolynomial.const(o)

    def __add__(self, o):
        o = DiffPolynomial._coerce(o)
        t = dict(self._t)
        for k, c in o._t.items():
            if k in t:
                s = t[k] + c
                if s:
                    t[k] = s
                else:
                    del t[k]
            else:
                t[k] = c
        return DiffPolynomial._raw(t, self.alphabet | o.alphabet)

    __radd__ = __add__

    def __neg__(self):
        return DiffPolynomial._raw({k: -c for k, c in self._t.items()}, self.alphabet)

    def __sub__(self, o):
        return self + (-DiffPolynomial._coerce(o))

    def __rsub__(self, o):
        return DiffPolynomial._coerce(o) - self

    def __mul__(self, o):
        if not isinstance(o, DiffPolynomial):
            c = GaussianRational.coerce(o)
            if not c:
                return DiffPolynomial.zero(self.alphabet)
            return DiffPolynomial._raw({k: v * c for k, v in self._t.items()}, self.alphabet)
        acc: dict = {}
        for (m1, p1), c1 in self._t.items():
            for (m2, p2), c2 in o._t.items():
                key = (_mono_mul(m1, m2), (p1[0] + p2[0], p1[1] + p2[1]))
                c = c1 * c2
                if key in acc:
                    acc[key] = acc[key] + c
                else:
                    acc[key] = c
        return DiffPolynomial._raw(_clean(acc), self.alphabet | o.alphabet)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = GaussianRational.coerce(c)
        return self * (ONE / c)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomial")
        out = DiffPolynomial.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return DiffPolynomial._raw(out._t, out.alphabet | self.alphabet)

    def scale_params(self, tau_power: int = 0, tau0_power: int = 0) -> "DiffPolynomial":
        """Multiply by tau^a tau0^b."""
        return DiffPolynomial._raw({(m, (p[0] + tau_power, p[1] + tau0_power)): c
                                    for (m, p), c in self._t.items()}, self.alphabet)

    def conjugate_coefficients(self) -> "DiffPolynomial":
        return DiffPolynomial._raw({k: c.conjugate() for k, c in self._t.items()}, self.alphabet)

    def map_terms(self, fn) -> "DiffPolynomial":
        """Rebuild from fn(mono, pexp, coeff) -> iterable of (mono, pexp, coeff)."""
        acc: dict = {}
        for (m, p), c in self._t.items():
            for m2, p2, c2 in fn(m, p, c):
                key = (m2, p2)
                acc[key] = acc[key] + c2 if key in acc else c2
        return DiffPolynomial._raw(_clean(acc), self.alphabet)

    def filter(self, pred) -> "DiffPolynomial":
        return DiffPolynomial._raw({k: c for k, c in self._t.items() if pred(k[0], k[1], c)},
                                   self.alphabet)

    # calculus -----------------------------------------------------------
    def derivative(self, times: int = 1) -> "DiffPolynomial":
        p = self
        for _ in range(times):
            p = x_derivative(p)
        return p

    def partial(self, var: str, order: int) -> "DiffPolynomial":
        """Partial derivative with respect to the jet coordinate var^(order)."""
        acc = {}
        for (m, pe), c in self._t.items():
            for idx, (v, k, p) in enumerate(m):
                if v == var and k == order:
                    if p == 1:
                        m2 = m[:idx] + m[idx + 1:]
                    else:
                        m2 = m[:idx] + ((v, k, p - 1),) + m[idx + 1:]
                    key = (m2, pe)
                    c2 = c * p
                    acc[key] = acc[key] + c2 if key in acc else c2
        return DiffPolynomial._raw(_clean(acc), self.alphabet)

    def max_order(self, var: Optional[str] = None) -> int:
        o = -1
        for (m, _), _ in self._t.items():
            for v, k, _ in m:
                if var is None or v == var:
                    o = max(o, k)
        return o

    def variables(self) -> frozenset:
        return frozenset(v for (m, _) in self._t for v, _, _ in m)

    def constant_term(self) -> "DiffPolynomial":
        return self.filter(lambda m, p, c: not m)

    def has_constant_term(self) -> bool:
        return any(not m for (m, _) in self._t)

    def substitute(self, mapping: Mapping[str, "DiffPolynomial"]) -> "DiffPolynomial":
        return substitute(self, mapping)

    def subs_params(self, tau=None, tau0=None) -> "DiffPolynomial":
        """Replace parameters by exact numbers (None keeps the parameter)."""
        tv = None if tau is None else GaussianRational.coerce(tau)
        t0 = None if tau0 is None else GaussianRational.coerce(tau0)

        def fn(m, p, c):
            a, b = p
            if tv is not None:
                c = c * tv ** a
                a = 0
            if t0 is not None:
                c = c * t0 ** b
                b = 0
            yield m, (a, b), c
        return self.map_terms(fn)

    # ordering/printing --------------------------------------------------
    def sorted_items(self):
        return sorted(self._t.items(), key=lambda kv: _print_key(kv[0]))

    def __repr__(self):
        return f"DiffPolynomial({pretty(self)})"

    def __str__(self):
        return pretty(self)

    # numerics -----------------------------------------------------------
    def compile(self, params: Optional[Mapping[str, complex]] = None) -> "CompiledPolynomial":
        return CompiledPolynomial(self, params or {})


class FunctionalDensity:
    """A density regarded modulo total derivatives."""

    __slots__ = ("density",)

    def __init__(self, density: DiffPolynomial):
        self.density = density

    def __eq__(self, o):
        if isinstance(o, FunctionalDensity):
            return equal_mod_total_derivative(self.density, o.density)
        if isinstance(o, DiffPolynomial):
            return equal_mod_total_derivative(self.density, o)
        return NotImplemented

    def __hash__(self):  # pragma: no cover - equality is not hash compatible
        raise TypeError("FunctionalDensity is unhashable")

    def __add__(self, o):
        return FunctionalDensity(self.density + _density(o))

    def __sub__(self, o):
        return FunctionalDensity(self.density - _density(o))

    def __mul__(self, c):
        return FunctionalDensity(self.density * c)

    __rmul__ = __mul__

    def gradient(self, var: str) -> DiffPolynomial:
        return variational_derivative(self.density, var)

    def __repr__(self):
        return f"FunctionalDensity(∫ {pretty(self.density)})"


def _density(x) -> DiffPolynomial:
    return x.density if isinstance(x, FunctionalDensity) else DiffPolynomial._coerce(x)


# --------------------------------------------------------------------------
# core operations
# --------------------------------------------------------------------------

_DERIV_CACHE: Dict[DiffPolynomial, DiffPolynomial] = {}


def x_derivative(p: DiffPolynomial) -> DiffPolynomial:
    """Total x-derivative, with s' = -s^2 v'."""
    acc: dict = {}
    for (m, pe), c in p._t.items():
        for idx, (v, k, pw) in enumerate(m):
            rest_items = list(m[:idx]) + list(m[idx + 1:])
            if pw > 1:
                rest_items.append((v, k, pw - 1))
            if v in RECIPROCALS:
                if k != 0:
                    raise UnsupportedAlphabet("derivatives of reciprocal variables are not stored")
                base = RECIPROCALS[v]
                extra = ((v, 0, 2), (base, 1, 1))
                coeff = c * (-pw)
            else:
                extra = ((v, k + 1, 1),)
                coeff = c * pw
            m2 = _mono_mul(tuple(sorted(rest_items)), tuple(sorted(extra)))
            key = (m2, pe)
            acc[key] = acc[key] + coeff if key in acc else coeff
    return DiffPolynomial._raw(_clean(acc), p.alphabet)


def _check_no_s(p: DiffPolynomial):
    for v in p.variables():
        if v in RECIPROCALS:
            raise UnsupportedAlphabet(f"variable {v!r} ((1+{RECIPROCALS[v]})^-1) is not supported here")


def variational_derivative(p: DiffPolynomial, var: str) -> DiffPolynomial:
    """Euler operator sum_i (-d)^i dp/d var^(i)."""
    _check_no_s(p)
    if var not in p.alphabet and p:
        raise UnsupportedAlphabet(f"{var!r} not in alphabet {sorted(p.alphabet)}")
    out = DiffPolynomial.zero(p.alphabet)
    top = p.max_order(var)
    for i in range(top, -1, -1):
        # Horner: out = partial_i + (-d) out
        out = p.partial(var, i) - x_derivative(out)
    return DiffPolynomial._raw(out._t, p.alphabet)


def is_total_derivative(p: DiffPolynomial) -> bool:
    """True iff p = dQ for a differential polynomial Q (no constant term allowed)."""
    _check_no_s(p)
    if p.has_constant_term():
        return False
    for v in p.variables():
        if variational_derivative(p, v):
            return False
    return True


def equal_mod_total_derivative(p, q) -> bool:
    """Equality of densities modulo total derivatives.

    Differences carrying a constant term are rejected with ValueError since the
    Euler operator cannot distinguish constants from total derivatives.
    """
    d = _density(p) - _density(q)
    _check_no_s(d)
    if d.has_constant_term():
        raise ValueError("densities with a nonzero constant term are ambiguous modulo d/dx")
    return all(not variational_derivative(d, v) for v in d.variables())


def formal_antiderivative(p: DiffPolynomial) -> DiffPolynomial:
    """Return Q with dQ/dx = p exactly (greedy peeling of the leading monomial)."""
    _check_no_s(p)
    if p.has_constant_term():
        raise NotATotalDerivative("constant term present")
    rem = dict(p._t)
    out: dict = {}
    # process each parameter exponent independently
    while rem:
        (m, pe), c = max(rem.items(), key=lambda kv: (_mono_key(kv[0][0]), kv[0][1]))
        key = _mono_key(m)
        top_order, top_var = key[0]
        if top_order == 0 or (len(key) > 1 and key[1] == key[0]):
            raise NotATotalDerivative(f"leading monomial {pretty_monomial(m)} cannot be integrated")
        # lower the leading factor by one order
        lowered = []
        for v, k, pw in m:
            if v == top_var and k == top_order:
                continue
            lowered.append((v, k, pw))
        lowered = _mono_mul(tuple(sorted(lowered)), ((top_var, top_order - 1, 1),))
        a = dict(((v, k), pw) for v, k, pw in lowered)[(top_var, top_order - 1)]
        qc = c / a
        qk = (lowered, pe)
        out[qk] = out[qk] + qc if qk in out else qc
        dq = x_derivative(DiffPolynomial._raw({qk: qc}))
        for k2, c2 in dq._t.items():
            if k2 in rem:
                s = rem[k2] - c2
                if s:
                    rem[k2] = s
                else:
                    del rem[k2]
            else:
                rem[k2] = -c2
        if (m, pe) in rem:
            raise NotATotalDerivative("antiderivative peeling failed to cancel leading term")
    return DiffPolynomial._raw(_clean(out), p.alphabet)


def substitute(p: DiffPolynomial, mapping: Mapping[str, DiffPolynomial]) -> DiffPolynomial:
    """Replace variables by polynomials; derivatives map to derivatives."""
    mapping = {k: DiffPolynomial._coerce(v) for k, v in mapping.items()}
    for v in p.variables():
        if v in RECIPROCALS and RECIPROCALS[v] in mapping and v not in mapping:
            raise UnsupportedAlphabet(f"substituting {RECIPROCALS[v]!r} requires a rule for {v!r}")
    jets: Dict[Tuple[str, int], DiffPolynomial] = {}
    powers: Dict[Tuple[str, int, int], DiffPolynomial] = {}

    def jet(v, k):
        if (v, k) not in jets:
            jets[(v, k)] = mapping[v] if k == 0 else x_derivative(jet(v, k - 1))
        return jets[(v, k)]

    def factor(v, k, pw):
        key = (v, k, pw)
        if key not in powers:
            powers[key] = jet(v, k) ** pw
        return powers[key]

    out = DiffPolynomial.zero()
    groups: Dict[Monomial, dict] = {}
    for (m, pe), c in p._t.items():
        kept = tuple(f for f in m if f[0] not in mapping)
        repl = tuple(f for f in m if f[0] in mapping)
        groups.setdefault(repl, {})[(kept, pe)] = c
    alph = (p.alphabet - set(mapping)) | frozenset().union(*[q.alphabet for q in mapping.values()]) \
        if mapping else p.alphabet
    for repl, rest in groups.items():
        prod = DiffPolynomial.const(1)
        for f in repl:
            prod = prod * factor(*f)
        out = out + prod * DiffPolynomial._raw(rest)
    return DiffPolynomial._raw(out._t, alph)


def reduce_reciprocals(p: DiffPolynomial) -> DiffPolynomial:
    """Normal form: no monomial contains both s and an undifferentiated v.

    Uses s * v = 1 - s repeatedly.
    """
    rem = dict(p._t)
    out: dict = {}
    while rem:
        (m, pe), c = rem.popitem()
        d = {(v, k): pw for v, k, pw in m}
        hit = None
        for s, base in RECIPROCALS.items():
            if d.get((s, 0)) and d.get((base, 0)):
                hit = (s, base)
                break
        if hit is None:
            key = (m, pe)
            out[key] = out[key] + c if key in out else c
            continue
        s, base = hit
        d[(base, 0)] -= 1
        if not d[(base, 0)]:
            del d[(base, 0)]
        m_one = tuple(sorted((v, k, pw) for (v, k), pw in d.items()))  # s^a v^(b-1)
        d2 = dict(d)
        d2[(s, 0)] -= 1
        if not d2[(s, 0)]:
            del d2[(s, 0)]
        m_lower = tuple(sorted((v, k, pw) for (v, k), pw in d2.items()))  # s^(a-1) v^(b-1)
        for mm, cc in ((m_lower, c), (m_one, -c)):
            key = (mm, pe)
            rem[key] = rem[key] + cc if key in rem else cc
            if not rem[key]:
                del rem[key]
    return DiffPolynomial._raw(_clean(out), p.alphabet)


def grading(p: DiffPolynomial):
    """List of ((monomial, param_exponents), Grading)."""
    out = []
    for (m, pe), _ in p.sorted_items():
        h = w = n = 0
        for v, k, pw in m:
            if v in RECIPROCALS:
                n += pw
            else:
                h += pw
                w += k * pw
        out.append(((m, pe), Grading(h, w, n, pe[0] + pe[1])))
    return out


# --------------------------------------------------------------------------
# numerical evaluation
# --------------------------------------------------------------------------

class CompiledPolynomial:
    """Pointwise numerical evaluator for a polynomial with fixed parameter values."""

    def __init__(self, p: DiffPolynomial, params: Mapping[str, complex]):
        t = complex(params.get("tau", 0.0))
        t0 = complex(params.get("tau0", 0.0))
        acc: Dict[Monomial, complex] = {}
        for (m, (a, b)), c in p.items():
            acc[m] = acc.get(m, 0.0) + complex(c) * t ** a * t0 ** b
        self.terms = [(m, c) for m, c in sorted(acc.items()) if c != 0]
        self.jets = sorted({(v, k) for m, _ in self.terms for v, k, _ in m})
        self.real = all(c.imag == 0 for _, c in self.terms)

    def __call__(self, jets: Mapping[Tuple[str, int], np.ndarray]):
        shape = None
        for arr in jets.values():
            shape = np.shape(arr)
            break
        out = np.zeros(shape if shape is not None else (), dtype=complex)
        powcache: Dict[Tuple[str, int, int], np.ndarray] = {}
        for m, c in self.terms:
            term = c
            for v, k, pw in m:
                key = (v, k, pw)
                if key not in powcache:
                    powcache[key] = jets[(v, k)] ** pw
                term = term * powcache[key]
            out = out + term
        return out


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

_SUP = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")
_NAMES = {"qb": "q̄", "tau": "τ", "tau0": "τ₀"}


def _print_key(key):
    m, pe = key
    h = sum(pw for v, _, pw in m if v not in RECIPROCALS)
    w = sum(k * pw for v, k, pw in m)
    return (h, -w, pe, tuple((v, -k, -pw) for v, k, pw in m))


def pretty_monomial(m: Monomial) -> str:
    parts = []
    for v, k, pw in m:
        name = _NAMES.get(v, v)
        if k == 0:
            s = name
        elif k <= 3:
            s = name + "'" * k
        else:
            s = f"{name}^({k})"
        if pw != 1:
            s = (f"({s})" if k else s) + str(pw).translate(_SUP)
        parts.append(s)
    return " ".join(parts)


def _pretty_params(pe: PExp) -> str:
    out = []
    for name, e in zip(("τ", "τ₀"), pe):
        if e == 1:
            out.append(name)
        elif e:
            out.append(name + str(e).translate(_SUP))
    return " ".join(out)


def pretty(p: DiffPolynomial) -> str:
    """Human readable form, e.g. ``i q'' − 2 i q² r``."""
    if not p:
        return "0"
    chunks = []
    for (m, pe), c in p.sorted_items():
        body = " ".join(x for x in (_pretty_params(pe), pretty_monomial(m)) if x)
        if not c.im:
            sign = "-" if c.re < 0 else "+"
            mag = abs(c.re)
            cs = "" if (mag == 1 and body) else str(mag)
        elif not c.re:
            sign = "-" if c.im < 0 else "+"
            mag = abs(c.im)
            cs = "i" if mag == 1 else f"{mag} i"
        else:
            sign = "+"
            cs = str(c)
        chunks.append((sign, " ".join(x for x in (cs, body) if x)))
    s = ("−" if chunks[0][0] == "-" else "") + chunks[0][1]
    for sign, txt in chunks[1:]:
        s += f" {'−' if sign == '-' else '+'} {txt}"
    return s


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def to_json_obj(p: DiffPolynomial) -> dict:
    grouped = p.terms
    terms = []
    for m, pc in grouped.items():
        coeff = [{"exp": list(pe), "re": _frac_str(c.re), "im": _frac_str(c.im)}
                 for pe, c in sorted(pc.terms.items())]
        terms.append({"coeff": coeff, "monomial": [[v, k, pw] for v, k, pw in m]})
    return {"alphabet": sorted(p.alphabet), "params": list(PARAMS), "terms": terms}


def from_json_obj(obj: dict) -> DiffPolynomial:
    t = {}
    for term in obj["terms"]:
        m = tuple((v, int(k), int(pw)) for v, k, pw in term["monomial"])
        for c in term["coeff"]:
            t[(m, tuple(c["exp"]))] = GaussianRational(Fraction(c["re"]), Fraction(c["im"]))
    return DiffPolynomial(t, obj.get("alphabet", ()))


def dumps(p: DiffPolynomial) -> str:
    return json.dumps(to_json_obj(p), ensure_ascii=False)


def loads(s: str) -> DiffPolynomial:
    return from_json_obj(json.loads(s))


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>tau0|tau|qb|Re|Im|conj|[a-z])"
                    r"|(?P<op>\*\*|[-+*/^()'\[\]]))")


def conjugate(p: DiffPolynomial, pairs: Mapping[str, str] = None) -> DiffPolynomial:
    """Formal complex conjugation: swap paired variables, conjugate coefficients."""
    pairs = dict(pairs or {"q": "qb", "qb": "q"})
    mapping = {}
    for v in p.variables():
        mapping[v] = DiffPolynomial.var(pairs.get(v, v))
    return substitute(p, mapping).conjugate_coefficients() if mapping else p.conjugate_coefficients()


def parse(text: str) -> DiffPolynomial:
    """Parse compact notation.

    Juxtaposition multiplies, ``'`` differentiates the preceding atom or group,
    ``q(4)`` is the fourth derivative, ``i`` is the imaginary unit, and
    ``Re``/``Im``/``conj`` act through the involution q <-> qb.
    """
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            raise ValueError(f"cannot parse near {text[pos:pos + 10]!r}")
        pos = mt.end()
        if mt.group("num"):
            toks.append(("num", int(mt.group("num"))))
        elif mt.group("name"):
            toks.append(("name", mt.group("name")))
        else:
            op = mt.group("op")
            toks.append(("op", "^" if op == "**" else op))
    toks.append(("end", None))
    state = {"i": 0}

    def peek():
        return toks[state["i"]]

    def take():
        t = toks[state["i"]]
        state["i"] += 1
        return t

    def expect(op):
        t = take()
        if t != ("op", op):
            raise ValueError(f"expected {op!r}, got {t}")

    def expr():
        sign = 1
        if peek() in (("op", "-"), ("op", "+")):
            sign = -1 if take()[1] == "-" else 1
        out = term() * sign
        while peek() in (("op", "+"), ("op", "-")):
            op = take()[1]
            t = term()
            out = out + t if op == "+" else out - t
        return out

    def starts_atom(t):
        return t[0] in ("num", "name") or t == ("op", "(") or t == ("op", "[")

    def term():
        out = factor()
        while True:
            t = peek()
            if t == ("op", "*"):
                take()
                out = out * factor()
            elif t == ("op", "/"):
                take()
                d = factor()
                if d.variables() or len(d) != 1:
                    raise ValueError("division only by numbers")
                (m, pe), c = next(iter(d.items()))
                if m or pe != (0, 0):
                    raise ValueError("division only by numbers")
                out = out / c
            elif starts_atom(t):
                out = out * factor()
            else:
                return out

    def factor():
        base = atom()
        while True:
            t = peek()
            if t == ("op", "'"):
                take()
                base = x_derivative(base)
            elif t == ("op", "^"):
                take()
                if peek() == ("op", "("):
                    take()
                    n = take()[1]
                    expect(")")
                else:
                    n = take()[1]
                base = base ** int(n)
            else:
                return base

    def atom():
        t = take()
        if t[0] == "num":
            return DiffPolynomial.const(t[1])
        if t == ("op", "(") or t == ("op", "["):
            e = expr()
            expect(")" if t[1] == "(" else "]")
            return e
        if t[0] == "name":
            name = t[1]
            if name == "i":
                return DiffPolynomial.const(I)
            if name in ("Re", "Im", "conj"):
                expect("(")
                e = expr()
                expect(")")
                c = conjugate(e)
                if name == "conj":
                    return c
                if name == "Re":
                    return (e + c) / 2
                return (e - c) / GaussianRational(0, 2)
            if name in PARAMS:
                return DiffPolynomial.param(name)
            # q(4) style derivative
            if peek() == ("op", "(") and toks[state["i"] + 1][0] == "num" \
                    and toks[state["i"] + 2] == ("op", ")"):
                take()
                k = take()[1]
                take()
                return DiffPolynomial.var(name, k)
            return DiffPolynomial.var(name)
        raise ValueError(f"unexpected token {t}")

    out = expr()
    if peek()[0] != "end":
        raise ValueError(f"trailing input at token {peek()}")
    return out


def P(text: str) -> DiffPolynomial:
    """Shorthand for :func:`parse`."""
    return parse(text)


# --------------------------------------------------------------------------
# evaluation on grids
# --------------------------------------------------------------------------

def evaluate_pointwise(p: DiffPolynomial, fields: Mapping[str, "object"],
                       params: Optional[Mapping[str, complex]] = None) -> np.ndarray:
    """Evaluate p pointwise on GridFunction fields (derivatives computed per geometry)."""
    from .grid import same_grid

    grids = list(fields.values())
    for g in grids[1:]:
        if not same_grid(grids[0], g):
            raise GridMismatch("fields live on different grids")
    comp = p.compile(params)
    jets = {}
    for v, k in comp.jets:
        if v in RECIPROCALS:
            base = fields[RECIPROCALS[v]]
            one_plus = 1.0 + base.samples
            if np.min(one_plus.real) <= 0:
                raise SingularS("1 + v vanishes or is negative on the grid")
            jets[(v, k)] = 1.0 / one_plus
        else:
            jets[(v, k)] = fields[v].derivative(k).samples
    if not comp.terms:
        return np.zeros(grids[0].samples.shape, dtype=complex) if grids else np.zeros(1)
    out = comp(jets)
    if np.ndim(out) == 0:
        out = np.full(grids[0].samples.shape, out, dtype=complex)
    return out


def evaluate_density(p: DiffPolynomial, fields: Mapping[str, "object"],
                     params: Optional[Mapping[str, complex]] = None) -> complex:
    """Quadrature of the pointwise density over the common grid."""
    vals = evaluate_pointwise(p, fields, params)
    g = next(iter(fields.values()))
    return g.integrate(vals)
