"""Exact arithmetic kernel for the equivariant operator engine.

Everything here is exact: rational coefficients, sparse polynomials in the
three torus weights ``t1, t2, t3``, canonically normalized rational functions,
and Laurent-in-q / power-in-s series truncated to an explicit window.  Floats
never appear.

The series type tracks, besides the storage window, a *proven lower bound*
``qfloor`` on the exact q-support.  That bound is what makes truncated
multiplication sound: the product of two series is complete up to
``min(a.qmax + b.qfloor, b.qmax + a.qfloor)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import gcd as _igcd
from typing import Iterable, Mapping, Sequence

try:  # gmpy2 is an optional speedup; fractions.Fraction is the reference type
    from gmpy2 import mpq as QQ
except ImportError:  # pragma: no cover - exercised only without gmpy2
    from fractions import Fraction as QQ

__all__ = [
    "QQ",
    "ExactDivisionError",
    "WindowError",
    "ReconstructError",
    "TPoly",
    "RatFn",
    "Window",
    "QSSeries",
    "LogAtomSum",
    "T1",
    "T2",
    "T3",
    "TAU",
    "ONE",
    "ZERO",
    "RF_ZERO",
    "RF_ONE",
    "poly_gcd",
    "log_atom_expand",
    "macmahon_power",
    "series_exp",
    "series_filter_support",
    "rational_reconstruct_q",
    "QRational",
]


class ExactDivisionError(ArithmeticError):
    """Raised when an exact polynomial division leaves a remainder."""


class WindowError(ValueError):
    """Raised when a series window is too small for the requested operation."""


class ReconstructError(ValueError):
    """Raised when no rational function matches a series on its window."""


def _qq_content(coeffs: Iterable) -> "QQ":
    """gcd of a family of rationals, as a positive rational."""
    num = 0
    den = 1
    for c in coeffs:
        num = _igcd(num, int(c.numerator))
        den = (den * int(c.denominator)) // _igcd(den, int(c.denominator))
    if num == 0:
        return QQ(0)
    return QQ(num, den)


# ---------------------------------------------------------------------------
# sparse polynomials in t1, t2, t3
# ---------------------------------------------------------------------------

_NVARS = 3
_ZKEY = (0, 0, 0)


def _gl_key(exps):
    # graded lex with t1 > t2 > t3
    return (exps[0] + exps[1] + exps[2], exps[0], exps[1], exps[2])


class TPoly:
    """Sparse polynomial in t1, t2, t3 with exact rational coefficients.

    Immutable.  Keys are exponent triples; zero coefficients are never stored.
    Term order, where one is needed, is graded lexicographic with t1 > t2 > t3.
    """

    __slots__ = ("_d", "_hash")

    def __init__(self, data: Mapping[tuple, object] | None = None, *, _trusted=False):
        if data is None:
            d = {}
        elif _trusted:
            d = dict(data)
        else:
            d = {}
            for k, v in data.items():
                if len(k) != _NVARS or any(e < 0 or not isinstance(e, int) for e in k):
                    raise ValueError(f"bad exponent triple {k!r}")
                q = QQ(v) if not isinstance(v, type(QQ(0))) else v
                if q != 0:
                    q0 = d.get(k)
                    d[k] = q if q0 is None else q0 + q
                    if d[k] == 0:
                        del d[k]
        self._d = d
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def const(cls, c) -> "TPoly":
        c = QQ(c)
        return cls({_ZKEY: c} if c != 0 else {}, _trusted=True)

    @classmethod
    def gen(cls, i: int) -> "TPoly":
        e = [0, 0, 0]
        e[i] = 1
        return cls({tuple(e): QQ(1)}, _trusted=True)

    # -- basic protocol ------------------------------------------------------
    def __bool__(self):
        return bool(self._d)

    @property
    def is_zero(self) -> bool:
        return not self._d

    def __eq__(self, other):
        if isinstance(other, TPoly):
            return self._d == other._d
        if isinstance(other, (int, type(QQ(0)))):
            return self == TPoly.const(other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def items(self):
        return self._d.items()

    def __len__(self):
        return len(self._d)

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = _as_tpoly(other)
        if other is NotImplemented:
            return NotImplemented
        d = dict(self._d)
        for k, v in other._d.items():
            w = d.get(k)
            if w is None:
                d[k] = v
            else:
                w = w + v
                if w == 0:
                    del d[k]
                else:
                    d[k] = w
        return TPoly(d, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return TPoly({k: -v for k, v in self._d.items()}, _trusted=True)

    def __sub__(self, other):
        other = _as_tpoly(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return _as_tpoly(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, type(QQ(0)))):
            c = QQ(other)
            if c == 0:
                return TPoly()
            return TPoly({k: v * c for k, v in self._d.items()}, _trusted=True)
        if not isinstance(other, TPoly):
            return NotImplemented
        a, b = self._d, other._d
        if len(a) > len(b):
            a, b = b, a
        out: dict = {}
        for (e1, e2, e3), u in a.items():
            for (f1, f2, f3), v in b.items():
                k = (e1 + f1, e2 + f2, e3 + f3)
                w = out.get(k)
                if w is None:
                    out[k] = u * v
                else:
                    w = w + u * v
                    if w == 0:
                        del out[k]
                    else:
                        out[k] = w
        return TPoly(out, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power of a polynomial; use RatFn")
        r = TPoly.const(1)
        b = self
        while e:
            if e & 1:
                r = r * b
            b = b * b
            e >>= 1
        return r

    # -- structure -----------------------------------------------------------
    def total_degree(self) -> int:
        if not self._d:
            return -1
        return max(e1 + e2 + e3 for (e1, e2, e3) in self._d)

    def leading(self):
        """(exponent triple, coefficient) of the graded-lex leading term."""
        if not self._d:
            raise ValueError("zero polynomial has no leading term")
        k = max(self._d, key=_gl_key)
        return k, self._d[k]

    def content(self):
        return _qq_content(self._d.values())

    def monomial_content(self) -> tuple:
        if not self._d:
            return _ZKEY
        return tuple(min(e[i] for e in self._d) for i in range(_NVARS))

    def shift_monomial(self, delta: tuple) -> "TPoly":
        """Multiply by t^delta (delta may be negative if every term allows it)."""
        out = {}
        for e, v in self._d.items():
            k = (e[0] + delta[0], e[1] + delta[1], e[2] + delta[2])
            if any(x < 0 for x in k):
                raise ExactDivisionError("monomial shift below zero")
            out[k] = v
        return TPoly(out, _trusted=True)

    def exact_div(self, other: "TPoly") -> "TPoly":
        """Exact division; raises ExactDivisionError if not divisible."""
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero:
            return TPoly()
        if len(other._d) == 1:
            (ek, ev), = other._d.items()
            return self.shift_monomial((-ek[0], -ek[1], -ek[2])) * (QQ(1) / ev)
        lk, lc = other.leading()
        rem = self
        quo: dict = {}
        while not rem.is_zero:
            rk, rc = rem.leading()
            dk = (rk[0] - lk[0], rk[1] - lk[1], rk[2] - lk[2])
            if any(x < 0 for x in dk):
                raise ExactDivisionError("inexact polynomial division")
            c = rc / lc
            quo[dk] = c
            rem = rem - other * TPoly({dk: c}, _trusted=True)
        return TPoly(quo, _trusted=True)

    def divides(self, other: "TPoly") -> bool:
        try:
            other.exact_div(self)
            return True
        except ExactDivisionError:
            return False

    def substitute(self, vals: Mapping[int, object]) -> "TPoly":
        """Substitute exact rational values for a subset of the variables."""
        vals = {i: QQ(v) for i, v in vals.items()}
        out: dict = {}
        for e, c in self._d.items():
            k = list(e)
            for i, v in vals.items():
                c = c * v ** e[i]
                k[i] = 0
            k = tuple(k)
            w = out.get(k)
            w = c if w is None else w + c
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w
        return TPoly(out, _trusted=True)

    def primitive(self) -> "TPoly":
        """Integer-primitive scalar multiple with positive leading coefficient."""
        if self.is_zero:
            return self
        c = self.content()
        p = self * (QQ(1) / c)
        if p.leading()[1] < 0:
            p = -p
        return p

    def min_exponent(self, var: int) -> int:
        if self.is_zero:
            raise ValueError("zero polynomial")
        return min(e[var] for e in self._d)

    def __str__(self):
        if not self._d:
            return "0"
        names = ("t1", "t2", "t3")
        parts = []
        for e in sorted(self._d, key=_gl_key, reverse=True):
            c = self._d[e]
            mon = "*".join(
                (names[i] if e[i] == 1 else f"{names[i]}^{e[i]}")
                for i in range(_NVARS)
                if e[i]
            )
            if mon:
                cs = "" if c == 1 else ("-" if c == -1 else f"{c}*")
                parts.append(f"{cs}{mon}")
            else:
                parts.append(f"{c}")
        s = " + ".join(parts).replace("+ -", "- ")
        return s

    __repr__ = __str__


def _as_tpoly(x):
    if isinstance(x, TPoly):
        return x
    if isinstance(x, (int, type(QQ(0)))):
        return TPoly.const(x)
    return NotImplemented


T1 = TPoly.gen(0)
T2 = TPoly.gen(1)
T3 = TPoly.gen(2)
TAU = T1 + T2
ONE = TPoly.const(1)
ZERO = TPoly()


# -- polynomial gcd ----------------------------------------------------------
# Fast paths handle the overwhelmingly common shapes (constants, monomials,
# equal factors, one dividing the other); the general case is delegated to
# sympy's sparse polynomial rings.

_SYMPY_RING = None


def _sympy_ring():
    global _SYMPY_RING
    if _SYMPY_RING is None:
        from sympy.polys.domains import QQ as SQQ
        from sympy.polys.rings import ring

        R, *gens = ring("t1,t2,t3", SQQ)
        _SYMPY_RING = (R, SQQ)
    return _SYMPY_RING


def _to_sympy(p: TPoly):
    R, SQQ = _sympy_ring()
    return R.from_dict({e: SQQ(int(c.numerator), int(c.denominator)) for e, c in p.items()})


def _from_sympy(sp) -> TPoly:
    return TPoly(
        {tuple(e): QQ(int(c.numerator), int(c.denominator)) for e, c in sp.terms()},
        _trusted=True,
    )


@lru_cache(maxsize=100000)
def poly_gcd(a: TPoly, b: TPoly) -> TPoly:
    """Primitive positive gcd of two polynomials."""
    if a.is_zero:
        return b.primitive()
    if b.is_zero:
        return a.primitive()
    ma, mb = a.monomial_content(), b.monomial_content()
    mg = tuple(min(x, y) for x, y in zip(ma, mb))
    a0 = a.shift_monomial((-ma[0], -ma[1], -ma[2])).primitive()
    b0 = b.shift_monomial((-mb[0], -mb[1], -mb[2])).primitive()
    base = TPoly({mg: QQ(1)}, _trusted=True)
    if len(a0) == 1 or len(b0) == 1:
        return base  # coprime after removing monomial content
    if a0 == b0:
        return base * a0
    if a0.total_degree() <= b0.total_degree() and a0.divides(b0):
        return base * a0
    if b0.total_degree() < a0.total_degree() and b0.divides(a0):
        return base * b0
    g = _from_sympy(_to_sympy(a0).gcd(_to_sympy(b0)))
    return base * g.primitive()


# ---------------------------------------------------------------------------
# rational functions
# ---------------------------------------------------------------------------


class RatFn:
    """Quotient of two TPoly in canonical form.

    Canonical form: gcd(num, den) = 1, the denominator has integer coefficients
    with content 1 and positive graded-lex leading coefficient.  Equality is
    structural equality of the canonical forms.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, *, _canonical=False):
        if den is None:
            den = ONE
        num = _as_tpoly(num)
        den = _as_tpoly(den)
        if _canonical:
            self.num, self.den = num, den
            self._hash = None
            return
        if den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero:
            self.num, self.den = ZERO, ONE
            self._hash = None
            return
        g = poly_gcd(num, den)
        if g != ONE:
            num = num.exact_div(g)
            den = den.exact_div(g)
        c = den.content()
        if den.leading()[1] < 0:
            c = -c
        if c != 1:
            num = num * (QQ(1) / c)
            den = den * (QQ(1) / c)
        self.num, self.den = num, den
        self._hash = None

    # -- constructors / predicates -------------------------------------------
    @classmethod
    def const(cls, c) -> "RatFn":
        return cls(TPoly.const(c), ONE, _canonical=True)

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_const(self) -> bool:
        return self.den == ONE and len(self.num) <= 1 and (
            self.num.is_zero or _ZKEY in dict(self.num.items())
        )

    def const_value(self):
        if not self.is_const:
            raise ValueError("not a constant")
        return dict(self.num.items()).get(_ZKEY, QQ(0))

    # -- protocol --------------------------------------------------------------
    def __eq__(self, other):
        other = _as_ratfn(other)
        if other is NotImplemented:
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def __bool__(self):
        return not self.num.is_zero

    # -- arithmetic -------------------------------------------------------------
    def __add__(self, other):
        other = _as_ratfn(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.den == other.den:
            return RatFn(self.num + other.num, self.den)
        return RatFn(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFn(-self.num, self.den, _canonical=True)

    def __sub__(self, other):
        other = _as_ratfn(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return _as_ratfn(other) + (-self)

    def __mul__(self, other):
        other = _as_ratfn(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero or other.is_zero:
            return RF_ZERO
        # cross-cancel before multiplying to keep intermediates small
        g1 = poly_gcd(self.num, other.den)
        g2 = poly_gcd(other.num, self.den)
        n1 = self.num if g1 == ONE else self.num.exact_div(g1)
        d2 = other.den if g1 == ONE else other.den.exact_div(g1)
        n2 = other.num if g2 == ONE else other.num.exact_div(g2)
        d1 = self.den if g2 == ONE else self.den.exact_div(g2)
        return RatFn(n1 * n2, d1 * d2)

    __rmul__ = __mul__

    def inverse(self) -> "RatFn":
        if self.is_zero:
            raise ZeroDivisionError("inverse of zero")
        return RatFn(self.den, self.num)

    def __truediv__(self, other):
        other = _as_ratfn(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return _as_ratfn(other) * self.inverse()

    def __pow__(self, e: int):
        if e == 0:
            return RF_ONE
        if e < 0:
            return self.inverse() ** (-e)
        return RatFn(self.num**e, self.den**e)

    # -- valuations and substitution ---------------------------------------------
    def valuation_t1pt2(self) -> int:
        """Order of vanishing along t1 + t2 = 0 (negative for a pole).

        Computed by exact division, never by substitution.  Raises on zero.
        """
        if self.is_zero:
            raise ValueError("valuation of the zero rational function")
        return _tau_valuation(self.num) - _tau_valuation(self.den)

    def valuation_var(self, var: int) -> int:
        """Order of vanishing in a single variable (min-exponent based)."""
        if self.is_zero:
            raise ValueError("valuation of the zero rational function")
        return self.num.min_exponent(var) - self.den.min_exponent(var)

    def substitute(self, vals: Mapping[int, object]) -> "RatFn":
        den = self.den.substitute(vals)
        if den.is_zero:
            raise ZeroDivisionError("substitution vanishes on the denominator")
        return RatFn(self.num.substitute(vals), den)

    def substitute_all(self, t1, t2, t3=0):
        r = self.substitute({0: t1, 1: t2, 2: t3})
        return r.const_value()

    def limit_var_zero(self, var: int) -> "RatFn":
        """Exact limit as one variable -> 0, after cancelling its common power."""
        if self.is_zero:
            return self
        v = min(self.num.min_exponent(var), self.den.min_exponent(var))
        delta = [0, 0, 0]
        delta[var] = -v
        num = self.num.shift_monomial(tuple(delta))
        den = self.den.shift_monomial(tuple(delta))
        den0 = den.substitute({var: 0})
        if den0.is_zero:
            raise ZeroDivisionError("pole in the limit")
        return RatFn(num.substitute({var: 0}), den0)

    def __str__(self):
        if self.den == ONE:
            return str(self.num)
        return f"({self.num})/({self.den})"

    __repr__ = __str__


def _as_ratfn(x):
    if isinstance(x, RatFn):
        return x
    if isinstance(x, TPoly):
        return RatFn(x)
    if isinstance(x, (int, type(QQ(0)))):
        return RatFn.const(x)
    return NotImplemented


@lru_cache(maxsize=100000)
def _tau_valuation(p: TPoly) -> int:
    v = 0
    while True:
        try:
            p = p.exact_div(TAU)
        except ExactDivisionError:
            return v
        v += 1


RF_ZERO = RatFn.const(0)
RF_ONE = RatFn.const(1)


# ---------------------------------------------------------------------------
# windowed series: Laurent in q, truncated power series in s_1..s_n
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    qmin: int = -12
    qmax: int = 12
    smax: int = 3

    def __post_init__(self):
        if self.qmin > self.qmax or self.smax < 0:
            raise WindowError(f"empty window {self}")

    def intersect(self, other: "Window") -> "Window":
        return Window(
            max(self.qmin, other.qmin), min(self.qmax, other.qmax), min(self.smax, other.smax)
        )

    def contains(self, other: "Window") -> bool:
        return (
            self.qmin <= other.qmin and self.qmax >= other.qmax and self.smax >= other.smax
        )


def _skey_ok(s: tuple, nvars: int, smax: int) -> bool:
    return len(s) == nvars and all(e >= 0 for e in s) and sum(s) <= smax


class QSSeries:
    """Series sum c_{N,beta} q^N s^beta with RatFn coefficients.

    ``window`` bounds what is stored; ``qfloor`` is a proven lower bound for
    the *exact* q-support, which is what justifies truncated products.  Keys
    are (q exponent, s exponent tuple); coefficients are nonzero RatFn.
    """

    __slots__ = ("nvars", "window", "qfloor", "data")

    def __init__(self, nvars: int, window: Window, qfloor: int, data: Mapping | None = None):
        self.nvars = nvars
        self.window = window
        self.qfloor = qfloor
        d = {}
        if data:
            lo = max(window.qmin, qfloor)
            for (qe, se), c in data.items():
                c = _as_ratfn(c)
                if c is NotImplemented:
                    raise TypeError("series coefficients must be exact rationals")
                if c.is_zero:
                    continue
                if qe < qfloor:
                    raise WindowError(f"key q^{qe} below declared qfloor {qfloor}")
                if not _skey_ok(se, nvars, window.smax):
                    raise WindowError(f"bad s-key {se}")
                if lo <= qe <= window.qmax:
                    d[(qe, se)] = c
        self.data = d

    # -- constructors ------------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, window: Window) -> "QSSeries":
        return cls(nvars, window, window.qmax + 0, {})  # empty; qfloor irrelevant

    @classmethod
    def unit(cls, nvars: int, window: Window) -> "QSSeries":
        s0 = (0,) * nvars
        return cls(nvars, window, 0, {(0, s0): RF_ONE})

    @classmethod
    def monomial(cls, nvars: int, window: Window, qe: int, se: tuple, coeff=RF_ONE) -> "QSSeries":
        return cls(nvars, window, qe, {(qe, se): coeff})

    # -- protocol ---------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.data

    def __eq__(self, other):
        if not isinstance(other, QSSeries):
            return NotImplemented
        return (
            self.nvars == other.nvars
            and self.window == other.window
            and self.data == other.data
        )

    def __hash__(self):
        return hash((self.nvars, self.window, frozenset(self.data.items())))

    def eq_on(self, other: "QSSeries", window: Window | None = None) -> bool:
        """Equality of coefficients on a common (or given) window."""
        if self.nvars != other.nvars:
            return False
        w = self.window.intersect(other.window)
        if window is not None:
            if not self.window.contains(window) or not other.window.contains(window):
                raise WindowError("requested comparison window exceeds known data")
            w = window
        for key in self.data.keys() | other.data.keys():
            qe, se = key
            if w.qmin <= qe <= w.qmax and sum(se) <= w.smax:
                if self.data.get(key, RF_ZERO) != other.data.get(key, RF_ZERO):
                    return False
        return True

    def coeff(self, qe: int, se: tuple) -> RatFn:
        return self.data.get((qe, se), RF_ZERO)

    # -- arithmetic ----------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, QSSeries):
            if self.nvars != other.nvars:
                raise ValueError("mixed s-variable counts")
            if self.is_zero:
                return other
            if other.is_zero:
                return self
            w = self.window.intersect(other.window)
            d = {}
            for key, c in itertools.chain(self.data.items(), other.data.items()):
                if key in d:
                    d[key] = d[key] + c
                else:
                    d[key] = c
            return QSSeries(self.nvars, w, min(self.qfloor, other.qfloor), d)
        return NotImplemented

    def __neg__(self):
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {k: -c for k, c in self.data.items()}
        return out

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "QSSeries":
        c = _as_ratfn(c)
        if c.is_zero:
            return QSSeries(self.nvars, self.window, self.window.qmax, {})
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {k: v * c for k, v in self.data.items()}
        return out

    def __mul__(self, other):
        if not isinstance(other, QSSeries):
            c = _as_ratfn(other)
            if c is NotImplemented:
                return NotImplemented
            return self.scale(c)
        if self.nvars != other.nvars:
            raise ValueError("mixed s-variable counts")
        if self.is_zero or other.is_zero:
            w = self.window.intersect(other.window)
            return QSSeries(self.nvars, w, w.qmax, {})
        for f in (self, other):
            if f.qfloor < f.window.qmin:
                raise WindowError(
                    "multiplication operand is not fully known from its exact floor"
                )
        qfloor = self.qfloor + other.qfloor
        qmax = min(
            self.window.qmax + other.qfloor, other.window.qmax + self.qfloor
        )
        smax = min(self.window.smax, other.window.smax)
        if qfloor > qmax:
            return QSSeries(self.nvars, Window(qfloor, qfloor, smax), qfloor, {})
        w = Window(qfloor, qmax, smax)
        out: dict = {}
        for (q1, s1), c1 in self.data.items():
            for (q2, s2), c2 in other.data.items():
                qe = q1 + q2
                if qe > qmax:
                    continue
                se = tuple(a + b for a, b in zip(s1, s2))
                if sum(se) > smax:
                    continue
                key = (qe, se)
                prev = out.get(key)
                term = c1 * c2
                out[key] = term if prev is None else prev + term
        out = {k: v for k, v in out.items() if not v.is_zero}
        res = QSSeries(self.nvars, w, qfloor)
        res.data = out
        return res

    __rmul__ = __mul__

    # -- calculus -------------------------------------------------------------------
    def q_log_derivative(self) -> "QSSeries":
        """q d/dq, exponent-wise."""
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {
            k: c * k[0] for k, c in self.data.items() if k[0] != 0
        }
        return out

    def s_log_derivative(self, i: int) -> "QSSeries":
        """s_i d/ds_i for 1-based i."""
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {k: c * k[1][i - 1] for k, c in self.data.items() if k[1][i - 1] != 0}
        return out

    def s_total_derivative(self) -> "QSSeries":
        """sum_i s_i d/ds_i (grades by total s-degree)."""
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {k: c * sum(k[1]) for k, c in self.data.items() if sum(k[1]) != 0}
        return out

    # -- structure --------------------------------------------------------------------
    def restrict(self, window: Window) -> "QSSeries":
        return QSSeries(self.nvars, window, self.qfloor, self.data)

    def map_coeffs(self, fn) -> "QSSeries":
        out = QSSeries(self.nvars, self.window, self.qfloor)
        out.data = {k: v for k, v in ((k, fn(c)) for k, c in self.data.items()) if not v.is_zero}
        return out

    def s_coefficients(self) -> dict:
        """Group by s-key: {s-key: {q-exponent: coefficient}}."""
        out: dict = {}
        for (qe, se), c in self.data.items():
            out.setdefault(se, {})[qe] = c
        return out

    def min_tau_valuation(self) -> int | None:
        """Minimum (t1+t2)-valuation over all coefficients; None if empty."""
        vals = [c.valuation_t1pt2() for c in self.data.values()]
        return min(vals) if vals else None

    def evaluate(self, t1, t2, q, svals: Sequence, t3=0):
        """Numeric evaluation of the truncated sum (evidence only, not exact)."""
        q = QQ(q)
        svals = [QQ(v) for v in svals]
        tot = QQ(0)
        for (qe, se), c in self.data.items():
            term = c.substitute_all(t1, t2, t3) * q**qe
            for v, e in zip(svals, se):
                term *= v**e
            tot += term
        return tot

    def __str__(self):
        if not self.data:
            return "0"
        parts = []
        for qe, se in sorted(self.data):
            c = self.data[(qe, se)]
            svars = "*".join(
                f"s{i+1}" if e == 1 else f"s{i+1}^{e}" for i, e in enumerate(se) if e
            )
            mon = "*".join(x for x in (f"q^{qe}" if qe else "", svars) if x) or "1"
            parts.append(f"({c})*{mon}")
        return " + ".join(parts)

    __repr__ = __str__


def series_filter_support(series: QSSeries, i: int, j: int) -> QSSeries:
    """Keep s-monomials supported exactly on the interval [i, j-1].

    "Exactly" means: zero exponents outside positions i..j-1 (1-based) and
    strictly positive exponents at both endpoints i and j-1.
    """
    if not (1 <= i < j <= series.nvars + 1):
        raise ValueError(f"bad interval [{i},{j}] for {series.nvars} s-variables")
    lo, hi = i - 1, j - 2  # 0-based endpoint positions
    out = QSSeries(series.nvars, series.window, series.qfloor)
    for (qe, se), c in series.data.items():
        if se[lo] > 0 and se[hi] > 0 and all(
            e == 0 for p, e in enumerate(se) if p < lo or p > hi
        ):
            out.data[(qe, se)] = c
    return out


# ---------------------------------------------------------------------------
# log atoms
# ---------------------------------------------------------------------------


def _interval_skey(nvars: int, i: int, j: int) -> tuple:
    if (i, j) == (0, 1):  # sentinel: no s-variable factor at all
        return (0,) * nvars
    if not (1 <= i < j <= nvars + 1):
        raise ValueError(f"bad interval [{i},{j}] with {nvars} s-variables")
    return tuple(1 if i <= p + 1 <= j - 1 else 0 for p in range(nvars))


def log_atom_expand(nvars: int, window: Window, k: int, i: int, j: int) -> QSSeries:
    """Windowed expansion of log(1 - (-q)^k s_i ... s_{j-1}).

    = - sum_{d >= 1} (-1)^{kd} q^{kd} (s_i...s_{j-1})^d / d, truncated.
    The sentinel interval (i, j) = (0, 1) means a pure-q atom log(1 - (-q)^k)
    with no s factor; it requires k != 0.
    """
    base = _interval_skey(nvars, i, j)
    if (i, j) == (0, 1):
        if k == 0:
            raise ValueError("pure-q log atom needs a nonzero q-power")
        dmax = window.qmax // k if k > 0 else window.qmin // k
        dmax = max(dmax, 0)
    else:
        span = j - i
        dmax = window.smax // span
    if k > 0:
        qfloor = k
    elif k == 0:
        qfloor = 0
    else:
        qfloor = k * dmax if dmax >= 1 else 0
    data = {}
    for d in range(1, dmax + 1):
        qe = k * d
        if window.qmin <= qe <= window.qmax:
            se = tuple(e * d for e in base)
            sign = -1 if (k * d) % 2 else 1
            data[(qe, se)] = RatFn.const(QQ(-sign, d))
    return QSSeries(nvars, window, qfloor, data)


class LogAtomSum:
    """Finite sum of coeff * log(1 - (-q)^k s_i...s_{j-1}) plus a remainder series."""

    __slots__ = ("nvars", "atoms", "remainder")

    def __init__(self, nvars: int, atoms: Mapping | None = None, remainder: QSSeries | None = None):
        self.nvars = nvars
        self.atoms: dict = {}
        if atoms:
            for (k, i, j), c in atoms.items():
                _interval_skey(nvars, i, j)  # validates
                c = _as_ratfn(c)
                if not c.is_zero:
                    key = (k, i, j)
                    cur = self.atoms.get(key)
                    tot = c if cur is None else cur + c
                    if tot.is_zero:
                        self.atoms.pop(key, None)
                    else:
                        self.atoms[key] = tot
        self.remainder = remainder

    def __add__(self, other: "LogAtomSum") -> "LogAtomSum":
        if self.nvars != other.nvars:
            raise ValueError("mixed s-variable counts")
        atoms = dict(self.atoms)
        for k, c in other.atoms.items():
            cur = atoms.get(k)
            tot = c if cur is None else cur + c
            if tot.is_zero:
                atoms.pop(k, None)
            else:
                atoms[k] = tot
        rem = self.remainder
        if other.remainder is not None:
            rem = other.remainder if rem is None else rem + other.remainder
        out = LogAtomSum(self.nvars)
        out.atoms = atoms
        out.remainder = rem
        return out

    def scale(self, c) -> "LogAtomSum":
        c = _as_ratfn(c)
        out = LogAtomSum(self.nvars)
        if not c.is_zero:
            out.atoms = {k: v * c for k, v in self.atoms.items()}
            out.remainder = None if self.remainder is None else self.remainder.scale(c)
        return out

    def expand(self, window: Window) -> QSSeries:
        tot = QSSeries.zero(self.nvars, window)
        for (k, i, j), c in sorted(self.atoms.items()):
            tot = tot + log_atom_expand(self.nvars, window, k, i, j).scale(c)
        if self.remainder is not None:
            tot = tot + self.remainder.restrict(window.intersect(self.remainder.window))
        return tot

    def __eq__(self, other):
        if not isinstance(other, LogAtomSum):
            return NotImplemented
        return (
            self.nvars == other.nvars
            and self.atoms == other.atoms
            and self.remainder == other.remainder
        )

    def __str__(self):
        parts = [
            f"({c})*log(1-(-q)^{k}*s[{i}:{j}])" for (k, i, j), c in sorted(self.atoms.items())
        ]
        if self.remainder is not None and not self.remainder.is_zero:
            parts.append(f"[{self.remainder}]")
        return " + ".join(parts) if parts else "0"

    __repr__ = __str__


# ---------------------------------------------------------------------------
# exp and MacMahon powers
# ---------------------------------------------------------------------------


def series_exp(x: QSSeries) -> QSSeries:
    """exp of a series with strictly positive exact q-floor (so the sum is finite)."""
    if x.qfloor < 1:
        raise WindowError("series_exp needs a strictly positive q-floor")
    if x.qfloor < x.window.qmin:
        raise WindowError("series_exp operand is not fully known from its floor")
    w = Window(0, x.window.qmax, x.window.smax)
    out = QSSeries.unit(x.nvars, w)
    term = QSSeries.unit(x.nvars, w)
    kmax = x.window.qmax // x.qfloor
    for k in range(1, kmax + 1):
        term = (term * x).scale(QQ(1, k)).restrict(w)
        out = out + term
    return out.restrict(w)


def macmahon_power(c, window: Window, nvars: int = 0) -> QSSeries:
    """The MacMahon series at -q, raised to an exact rational-function power.

    exp(c * sum_{r>=1} -r log(1 - (-q)^r)) truncated to the window; the
    exponent c may be any RatFn.
    """
    c = _as_ratfn(c)
    w = Window(0, window.qmax, window.smax)
    s0 = (0,) * nvars
    inner: dict = {}
    for r in range(1, window.qmax + 1):
        for d in range(1, window.qmax // r + 1):
            qe = r * d
            sign = -1 if qe % 2 else 1
            key = (qe, s0)
            add = QQ(r, d) * sign
            inner[key] = inner.get(key, QQ(0)) + add
    base = QSSeries(nvars, w, 1, {k: RatFn.const(v) for k, v in inner.items()})
    return series_exp(base.scale(c)).restrict(window.intersect(w))


# ---------------------------------------------------------------------------
# rational reconstruction in q
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QRational:
    """shift + P/Q in q with RatFn coefficients; Q[0] == 1.

    Represents q^shift * (sum P[r] q^r) / (sum Q[r] q^r).
    """

    shift: int
    num: tuple
    den: tuple

    def expand(self, lo: int, hi: int) -> dict:
        """Coefficients of the Laurent expansion on [lo, hi] (dict q-exp -> RatFn)."""
        if self.den[0] != RF_ONE:
            raise ValueError("denominator not normalized")
        n = hi - self.shift
        if n < 0:
            return {}
        coeffs = []
        for r in range(n + 1):
            c = self.num[r] if r < len(self.num) else RF_ZERO
            for s in range(1, min(r, len(self.den) - 1) + 1):
                c = c - self.den[s] * coeffs[r - s]
            coeffs.append(c)
        return {
            r + self.shift: c
            for r, c in enumerate(coeffs)
            if not c.is_zero and lo <= r + self.shift <= hi
        }

    def degree_bound(self) -> int:
        return max(len(self.num), len(self.den)) - 1

    def evaluate(self, t1, t2, q, t3=0):
        q = QQ(q)
        nv = sum(c.substitute_all(t1, t2, t3) * q**r for r, c in enumerate(self.num))
        dv = sum(c.substitute_all(t1, t2, t3) * q**r for r, c in enumerate(self.den))
        if dv == 0:
            raise ZeroDivisionError("denominator vanishes at the sample point")
        return q**self.shift * nv / dv


def _nullspace_vector(rows: list) -> list | None:
    """One nonzero rational-function solution of a homogeneous system, or None."""
    if not rows:
        return None
    ncols = len(rows[0])
    mat = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        piv = None
        for rr in range(r, len(mat)):
            if not mat[rr][col].is_zero:
                piv = rr
                break
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = mat[r][col].inverse()
        mat[r] = [x * inv for x in mat[r]]
        for rr in range(len(mat)):
            if rr != r and not mat[rr][col].is_zero:
                f = mat[rr][col]
                mat[rr] = [a - f * b for a, b in zip(mat[rr], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(ncols) if c not in pivots]
    if not free:
        return None
    f0 = free[0]
    sol = [RF_ZERO] * ncols
    sol[f0] = RF_ONE
    for rr, col in enumerate(pivots):
        sol[col] = -mat[rr][f0]
    return sol


def rational_reconstruct_q(series: QSSeries, degbound: int) -> dict:
    """Reconstruct each s-coefficient of a series as an exact rational in q.

    Returns {s-key: QRational}.  The window must provide at least
    2*degbound + 2 consecutive known coefficients past the leading one; the
    result is certified by exact re-expansion against every known coefficient
    (so this is a left inverse of expansion on the window).
    """
    if degbound < 0:
        raise ValueError("negative degree bound")
    lo = max(series.window.qmin, series.qfloor)
    if series.qfloor < series.window.qmin:
        raise WindowError("series is not fully known from its exact floor")
    hi = series.window.qmax
    out: dict = {}
    for skey, qdict in sorted(series.s_coefficients().items()):
        v0 = min(qdict)
        avail = hi - v0 + 1
        if avail < 2 * degbound + 2:
            raise WindowError(
                f"window gives {avail} coefficients from the leading term; "
                f"need {2 * degbound + 2} for degree bound {degbound}"
            )
        a = [qdict.get(v0 + r, RF_ZERO) for r in range(avail)]
        d = degbound
        rows = []
        for r in range(d + 1, 2 * d + 2):
            rows.append([a[r - s] if 0 <= r - s < len(a) else RF_ZERO for s in range(d + 1)])
        sol = _nullspace_vector(rows)
        if sol is None:
            raise ReconstructError(
                f"no rational function of degree <= {degbound} matches s-key {skey}"
            )
        # normalize so the lowest nonzero denominator coefficient is at index 0
        first = next(i for i, c in enumerate(sol) if not c.is_zero)
        if first > 0:
            # denominator divisible by q^first would contradict a(0) != 0; reject
            raise ReconstructError(f"degenerate denominator for s-key {skey}")
        inv = sol[0].inverse()
        den = tuple(c * inv for c in sol)
        num = []
        for r in range(d + 1):
            c = RF_ZERO
            for s in range(0, min(r, d) + 1):
                if r - s < len(a):
                    c = c + den[s] * a[r - s]
            num.append(c)
        cand = QRational(v0, tuple(num), den)
        got = cand.expand(lo, hi)
        want = {qe: c for qe, c in qdict.items()}
        if got != want:
            raise ReconstructError(f"certificate failed for s-key {skey}")
        out[skey] = cand
    return out
