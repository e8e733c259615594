"""Kernel tests: ring axioms, canonical forms, windows, reconstruction.

Oracle values are frozen at the top of the file and were computed
independently of the implementation (by hand or from standard tables).
"""
import pytest
from hypothesis import given, settings, strategies as st

from andt.exact import (
    QQ,
    ExactDivisionError,
    WindowError,
    ReconstructError,
    TPoly,
    RatFn,
    Window,
    QSSeries,
    LogAtomSum,
    QRational,
    T1,
    T2,
    T3,
    TAU,
    ONE,
    RF_ONE,
    RF_ZERO,
    poly_gcd,
    log_atom_expand,
    macmahon_power,
    series_exp,
    series_filter_support,
    rational_reconstruct_q,
)

# Frozen oracle: numbers of plane partitions of 0..6 (standard table, not
# computed by this package).
PLANE_PARTITIONS = [1, 1, 3, 6, 13, 24, 48]


# -- strategies ---------------------------------------------------------------

exps = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))
coeffs = st.integers(-4, 4)


@st.composite
def tpolys(draw, max_terms=4, allow_zero=True):
    n = draw(st.integers(0 if allow_zero else 1, max_terms))
    d = {}
    for _ in range(n):
        d[draw(exps)] = d.get(draw(exps), 0) + draw(coeffs)
    p = TPoly({k: QQ(v) for k, v in d.items() if v})
    if not allow_zero and p.is_zero:
        return p + ONE
    return p


@st.composite
def ratfns(draw):
    num = draw(tpolys())
    den = draw(tpolys(allow_zero=False))
    return RatFn(num, den)


# -- TPoly --------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(tpolys(), tpolys(), tpolys())
def test_tpoly_ring_axioms(a, b, c):
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + TPoly() == a
    assert a * ONE == a
    assert a - a == TPoly()


@settings(max_examples=40, deadline=None)
@given(tpolys(), tpolys(allow_zero=False))
def test_exact_division_roundtrip(a, b):
    assert (a * b).exact_div(b) == a


def test_exact_division_failure():
    with pytest.raises(ExactDivisionError):
        (T1 + T2 + 1).exact_div(T1 + 1)
    with pytest.raises(ExactDivisionError):
        T1.exact_div(T2)


def test_no_zero_coefficients_stored():
    p = T1 - T1 + T2 * 0
    assert p.is_zero and len(p) == 0
    q = TPoly({(1, 0, 0): QQ(1), (0, 1, 0): QQ(0)})
    assert len(q) == 1


def test_graded_lex_leading():
    p = T1 * T2 + T2**3 + T1
    # graded lex t1 > t2 > t3: t2^3 (degree 3) beats t1*t2 (degree 2)
    assert p.leading()[0] == (0, 3, 0)
    assert (T1 * T2 + T2 * T3).leading()[0] == (1, 1, 0)


@settings(max_examples=40, deadline=None)
@given(tpolys(allow_zero=False), tpolys(allow_zero=False), tpolys(allow_zero=False))
def test_poly_gcd_divides(a, b, c):
    g = poly_gcd(a * c, b * c)
    assert c.divides(g)
    assert g.divides(a * c) and g.divides(b * c)


# -- RatFn --------------------------------------------------------------------


def test_ratfn_canonical_form():
    r = RatFn(TAU**2 * T3, TAU * T2 * 2)
    # denominator is primitive-integer with positive leading coefficient
    assert r.num == TAU * T3 * QQ(1, 2) and r.den == T2
    assert r.den.content() == 1 and r.den.leading()[1] > 0
    r2 = RatFn(T1, -T2)
    assert r2.den == T2 and r2.num == -T1
    r3 = RatFn(T1 * 6, T2 * QQ(3, 2))
    assert r3.den == T2 and r3.num == 4 * T1


def test_ratfn_zero_denominator():
    with pytest.raises(ZeroDivisionError):
        RatFn(T1, TPoly())
    with pytest.raises(ZeroDivisionError):
        RF_ONE / RF_ZERO


@settings(max_examples=40, deadline=None)
@given(ratfns(), ratfns(), ratfns())
def test_ratfn_field_axioms(a, b, c):
    assert a + b == b + a
    assert a * (b + c) == a * b + a * c
    assert (a - a).is_zero
    if not a.is_zero:
        assert a * a.inverse() == RF_ONE
        assert (RF_ONE / a) * a == RF_ONE


@settings(max_examples=40, deadline=None)
@given(ratfns(), ratfns())
def test_ratfn_eq_hash(a, b):
    if a == b:
        assert hash(a) == hash(b)
    assert a == a + RF_ZERO


def test_tau_valuation_by_division():
    f = RatFn(TAU**3 * T1, TAU * (T1 + T2 + T3))
    assert f.valuation_t1pt2() == 2
    g = RatFn(T1 - T2, TAU**2)
    assert g.valuation_t1pt2() == -2
    with pytest.raises(ValueError):
        RF_ZERO.valuation_t1pt2()
    # (t1+t2)^2 hidden inside an expanded square
    h = RatFn(T1**2 + 2 * T1 * T2 + T2**2)
    assert h.valuation_t1pt2() == 2


@settings(max_examples=30, deadline=None)
@given(ratfns(), ratfns())
def test_tau_valuation_additive(a, b):
    if a.is_zero or b.is_zero:
        return
    assert (a * b).valuation_t1pt2() == a.valuation_t1pt2() + b.valuation_t1pt2()


def test_ratfn_substitute():
    f = RatFn(T1 * T2, T1 + T2)
    assert f.substitute_all(QQ(1), QQ(2)) == QQ(2, 3)
    with pytest.raises(ZeroDivisionError):
        f.substitute_all(QQ(1), QQ(-1))
    g = RatFn(T3 * T1 + T3**2 * T2, T3)
    assert g.limit_var_zero(2) == RatFn(T1)


# -- series -------------------------------------------------------------------


def series_of(nvars, window, qfloor, d):
    return QSSeries(nvars, window, qfloor, {k: RatFn.const(v) for k, v in d.items()})


def test_series_basic_ops():
    w = Window(-2, 4, 2)
    a = series_of(1, w, -1, {(-1, (0,)): 2, (1, (1,)): 3})
    b = series_of(1, w, 0, {(0, (0,)): 1, (1, (1,)): -3})
    s = a + b
    assert s.coeff(-1, (0,)) == RatFn.const(2)
    assert s.coeff(1, (1,)).is_zero
    assert (a - a).is_zero


def test_series_mul_window_soundness():
    # exact objects: A = q^1/(known to q^4), B = sum_{d>=1} q^d
    w = Window(0, 4, 0)
    A = series_of(0, w, 1, {(1, ()): 1})
    B = series_of(0, w, 1, {(d, ()): 1 for d in range(1, 5)})
    P = A * B
    # valid only up to qmax(B) + qfloor(A) = 5 -> window caps at 5
    assert P.window.qmax == 5
    assert P.coeff(2, ()) == RF_ONE and P.coeff(5, ()) == RF_ONE
    assert P.qfloor == 2


def test_series_mul_requires_floor():
    w = Window(0, 4, 0)
    bad = series_of(0, w, -5, {(0, ()): 1})  # claims support may start at -5
    good = series_of(0, w, 0, {(0, ()): 1})
    with pytest.raises(WindowError):
        bad * good


def test_series_smax_truncation():
    w = Window(0, 4, 2)
    a = series_of(1, w, 0, {(0, (1,)): 1})
    p = a * a * a  # s^3 exceeds smax
    assert p.is_zero


def test_series_derivatives():
    w = Window(-3, 3, 3)
    a = series_of(2, w, -2, {(-2, (1, 0)): 5, (0, (1, 2)): 7, (2, (0, 0)): 1})
    qd = a.q_log_derivative()
    assert qd.coeff(-2, (1, 0)) == RatFn.const(-10)
    assert qd.coeff(0, (1, 2)).is_zero
    assert qd.coeff(2, (0, 0)) == RatFn.const(2)
    sd = a.s_log_derivative(2)
    assert sd.coeff(0, (1, 2)) == RatFn.const(14)
    assert sd.coeff(-2, (1, 0)).is_zero
    td = a.s_total_derivative()
    assert td.coeff(0, (1, 2)) == RatFn.const(21)
    assert td.coeff(-2, (1, 0)) == RatFn.const(5)


@settings(max_examples=25, deadline=None)
@given(
    st.dictionaries(st.tuples(st.integers(0, 3)), st.integers(-3, 3), max_size=4),
    st.dictionaries(st.tuples(st.integers(0, 3)), st.integers(-3, 3), max_size=4),
)
def test_series_q_derivative_leibniz(da, db):
    w = Window(0, 6, 0)
    a = series_of(0, w, 0, {(k[0], ()): v for k, v in da.items()})
    b = series_of(0, w, 0, {(k[0], ()): v for k, v in db.items()})
    lhs = (a * b).q_log_derivative()
    rhs = a.q_log_derivative() * b + a * b.q_log_derivative()
    assert lhs.eq_on(rhs)


def test_log_atom_expansion_hand_values():
    w = Window(-6, 6, 3)
    at = log_atom_expand(1, w, 1, 1, 2)  # log(1 - (-q) s1)
    assert at.coeff(1, (1,)) == RF_ONE
    assert at.coeff(2, (2,)) == RatFn.const(QQ(-1, 2))
    assert at.coeff(3, (3,)) == RatFn.const(QQ(1, 3))
    neg = log_atom_expand(1, w, -2, 1, 2)  # log(1 - (-q)^{-2} s1)
    assert neg.coeff(-2, (1,)) == RatFn.const(-1)
    assert neg.coeff(-4, (2,)) == RatFn.const(QQ(-1, 2))
    assert neg.qfloor == -6
    k0 = log_atom_expand(1, w, 0, 1, 2)  # log(1 - s1)
    assert k0.coeff(0, (1,)) == RatFn.const(-1)
    assert k0.coeff(0, (3,)) == RatFn.const(QQ(-1, 3))


def test_log_atom_sum_expand_and_cancel():
    w = Window(-4, 4, 2)
    one = LogAtomSum(2, {(1, 1, 3): RF_ONE})
    minus = one.scale(RatFn.const(-1))
    tot = one + minus
    assert not tot.atoms
    assert tot.expand(w).is_zero
    mixed = one + LogAtomSum(2, {(2, 1, 2): RatFn(TAU)})
    e = mixed.expand(w)
    assert e.coeff(1, (1, 1)) == RF_ONE
    assert e.coeff(2, (1, 0)) == RatFn(-TAU)


def test_filter_support():
    w = Window(0, 2, 3)
    a = series_of(3, w, 0, {
        (0, (1, 1, 0)): 1,   # supported on [1,3), endpoints 1 and 2 nonzero
        (0, (1, 0, 0)): 2,   # fails: endpoint s2 zero for [1,3]
        (1, (2, 1, 0)): 3,
        (0, (1, 1, 1)): 4,   # support exceeds [1,3)
        (0, (0, 1, 0)): 5,
    })
    f = series_filter_support(a, 1, 3)
    assert set(f.data) == {(0, (1, 1, 0)), (1, (2, 1, 0))}
    g = series_filter_support(a, 2, 3)
    assert set(g.data) == {(0, (0, 1, 0))}
    with pytest.raises(ValueError):
        series_filter_support(a, 2, 2)


# -- exp / MacMahon -------------------------------------------------------------


def test_series_exp_needs_positive_floor():
    w = Window(0, 4, 0)
    with pytest.raises(WindowError):
        series_exp(series_of(0, w, 0, {(0, ()): 1}))


def test_series_exp_homomorphism():
    w = Window(0, 8, 0)
    a = series_of(0, w, 1, {(1, ()): 2, (3, ()): -1})
    b = series_of(0, w, 2, {(2, ()): QQ(1, 2)})
    lhs = series_exp(a + b)
    rhs = series_exp(a) * series_exp(b)
    assert lhs.eq_on(rhs, Window(0, 8, 0))


def test_macmahon_exponent_one_matches_plane_partitions():
    w = Window(0, 6, 0)
    m = macmahon_power(1, w)
    for d, count in enumerate(PLANE_PARTITIONS):
        sign = -1 if d % 2 else 1
        assert m.coeff(d, ()) == RatFn.const(sign * count)


def test_macmahon_pinned_coefficients():
    # the two pinned evaluations: exponent 1 -> q^1 coefficient -1;
    # exponent 2 -> q^2 coefficient 7
    assert macmahon_power(1, Window(0, 4, 0)).coeff(1, ()) == RatFn.const(-1)
    assert macmahon_power(2, Window(0, 4, 0)).coeff(2, ()) == RatFn.const(7)


def test_macmahon_rational_exponent_additivity():
    w = Window(0, 5, 0)
    c1 = RatFn(TAU**2, T1 * T2 * 3)
    c2 = RatFn(T1, T2)
    lhs = macmahon_power(c1 + c2, w)
    rhs = macmahon_power(c1, w) * macmahon_power(c2, w)
    assert lhs.eq_on(rhs, w)


# -- rational reconstruction ------------------------------------------------------


def expand_qrat(shift, num, den, lo, hi, nvars=0):
    qr = QRational(shift, tuple(RatFn.const(c) for c in num), tuple(RatFn.const(c) for c in den))
    data = {(qe, (0,) * nvars): c for qe, c in qr.expand(lo, hi).items()}
    return QSSeries(nvars, Window(lo, hi, 0), shift, data)


def test_reconstruct_geometric():
    # q/(1-q)^2 = sum d q^d
    s = expand_qrat(1, [1], [1, -2, 1], 0, 12)
    rec = rational_reconstruct_q(s, 2)[()]
    assert rec.expand(0, 12) == {d: RatFn.const(d) for d in range(1, 13)}
    assert rec.degree_bound() <= 2
    assert rec.evaluate(QQ(1), QQ(1), QQ(2)) == QQ(2)  # 2/(1-2)^2


def test_reconstruct_with_ratfn_coefficients():
    w = Window(-2, 10, 1)
    c = RatFn(TAU, T1)
    data = {}
    for d in range(-2, 11):
        # c * (-q)^d starting at d=-2: rational function c * q^{-2}/(1+q) pattern:
        # use sum_{d>=-2} (-1)^d q^d = q^{-2}/(1+q)
        data[(d, (1,))] = c * (1 - 2 * (d % 2))
    s = QSSeries(1, w, -2, data)
    rec = rational_reconstruct_q(s, 1)[(1,)]
    assert rec.shift == -2
    got = rec.expand(-2, 10)
    assert got == {d: c * (1 - 2 * (d % 2)) for d in range(-2, 11)}


def test_reconstruct_window_too_small():
    s = expand_qrat(1, [1], [1, -2, 1], 0, 6)
    with pytest.raises(WindowError):
        rational_reconstruct_q(s, 3)  # needs 2*3+2=8 coefficients past leading


def test_reconstruct_rejects_non_rational():
    w = Window(0, 12, 0)
    s = series_of(0, w, 1, {(d * d, ()): 1 for d in range(1, 4)})
    with pytest.raises(ReconstructError):
        rational_reconstruct_q(s, 2)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.integers(-3, 3), min_size=1, max_size=3),
    st.lists(st.integers(-2, 2), min_size=0, max_size=2),
    st.integers(-3, 3),
)
def test_reconstruct_roundtrip(num, denrest, shift):
    den = [1] + denrest
    d = max(len(num), len(den)) - 1
    hi = shift + 2 * d + 4
    s = expand_qrat(shift, num, den, shift, hi)
    if s.is_zero:
        return
    rec = rational_reconstruct_q(s, d)
    key = ()
    assert rec[key].expand(shift, hi) == QRational(
        shift, tuple(RatFn.const(c) for c in num), tuple(RatFn.const(c) for c in den)
    ).expand(shift, hi)
