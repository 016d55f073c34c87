"""Exact coefficient ring: rational functions in x, jet variables and nonlocal symbols.

A :class:`DiffExpr` is a quotient ``num / den`` of sparse polynomials with
rational coefficients.  Variables are tagged tuples (see ``Var`` below); the
representation is canonical, so structural equality is mathematical equality.

Square-root constants ``c`` with ``c**2 = r`` are ordinary variables whose key
carries ``r``; every product is reduced modulo that relation and denominators
are rationalised so they never contain constants.  Nonlocal symbols
``D^-1(K)`` carry their density ``K`` inside the key, which is all the total
derivative needs.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyRing

# Variable kinds; the integer leads the key so the variable order is
# constants < parameters < x < jets (by field, then order) < nonlocal symbols.
CONST, PARAM, XVAR, JET, OMEGA = 0, 1, 2, 3, 4

Var = tuple
Mono = Tuple[Tuple[Var, int], ...]
Poly = Dict[Mono, Fraction]

ONE_MONO: Mono = ()
_ZERO = Fraction(0)
_ONE = Fraction(1)


class RingError(ValueError):
    """Invalid arithmetic in the coefficient ring."""


class NonlocalError(RingError):
    """An operation needing an omega-free expression received a nonlocal one."""


# ---------------------------------------------------------------------------
# sparse polynomial helpers (dict monomial -> Fraction)


def _mono_mul(m1: Mono, m2: Mono) -> Mono:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def _reduce_mono(m: Mono):
    """Apply c**2 -> r to a monomial; returns (factor, reduced monomial)."""
    factor = _ONE
    out = []
    changed = False
    for v, e in m:
        if v[0] == CONST and e >= 2:
            factor *= v[4] ** (e // 2)
            e %= 2
            changed = True
            if e == 0:
                continue
        out.append((v, e))
    return factor, (tuple(out) if changed else m)


def p_add(a: Poly, b: Poly) -> Poly:
    if len(a) < len(b):
        a, b = b, a
    out = dict(a)
    for m, c in b.items():
        s = out.get(m, _ZERO) + c
        if s:
            out[m] = s
        else:
            out.pop(m, None)
    return out


def p_scale(a: Poly, c: Fraction) -> Poly:
    if not c:
        return {}
    return {m: v * c for m, v in a.items()}


def p_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono_mul(m1, m2)
            c = c1 * c2
            if any(v[0] == CONST and e >= 2 for v, e in m):
                f, m = _reduce_mono(m)
                c *= f
            s = out.get(m, _ZERO) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
    return out


def p_diff(a: Poly, var: Var) -> Poly:
    out: Poly = {}
    for m, c in a.items():
        for i, (v, e) in enumerate(m):
            if v == var:
                nm = m[:i] + (((v, e - 1),) if e > 1 else ()) + m[i + 1:]
                out[nm] = out.get(nm, _ZERO) + c * e
                break
    return {m: c for m, c in out.items() if c}


def p_vars(a: Poly) -> set:
    return {v for m in a for v, _ in m}


def p_is_one(a: Poly) -> bool:
    return len(a) == 1 and a.get(ONE_MONO) == _ONE


def _mono_key(m: Mono):
    return (sum(e for _, e in m), m)


def p_leading(a: Poly) -> Mono:
    return max(a, key=_mono_key)


def p_split_var(a: Poly, var: Var) -> Dict[int, Poly]:
    """Group ``a`` by the exponent of ``var``; exponents are removed."""
    out: Dict[int, Poly] = {}
    for m, c in a.items():
        k = 0
        rest = m
        for i, (v, e) in enumerate(m):
            if v == var:
                k = e
                rest = m[:i] + m[i + 1:]
                break
        out.setdefault(k, {})[rest] = c
    return out


# ---------------------------------------------------------------------------
# gcd cancellation through sympy's sparse polynomial rings


@lru_cache(maxsize=None)
def _sympy_ring(k: int):
    return PolyRing(["g%d" % i for i in range(k)], QQ, lex)


def _to_sympy(a: Poly, index: Dict[Var, int], R):
    k = len(index)
    terms = {}
    for m, c in a.items():
        exps = [0] * k
        for v, e in m:
            exps[index[v]] = e
        terms[tuple(exps)] = QQ(c.numerator, c.denominator)
    return R.from_dict(terms)


def _from_sympy(p, order) -> Poly:
    out: Poly = {}
    for exps, c in p.terms():
        m = tuple((order[i], e) for i, e in enumerate(exps) if e)
        out[m] = Fraction(int(c.numerator), int(c.denominator))
    return out


def _cancel(num: Poly, den: Poly):
    order = sorted(p_vars(num) | p_vars(den))
    index = {v: i for i, v in enumerate(order)}
    R = _sympy_ring(max(len(order), 1))
    pn = _to_sympy(num, index, R)
    pd = _to_sympy(den, index, R)
    g = pn.gcd(pd)
    if g != R.one:
        pn = pn.exquo(g)
        pd = pd.exquo(g)
    return _from_sympy(pn, order), _from_sympy(pd, order)


def _rationalize(num: Poly, den: Poly):
    consts = sorted(v for v in p_vars(den) if v[0] == CONST)
    for c in consts:
        parts = p_split_var(den, c)
        d0, d1 = parts.get(0, {}), parts.get(1, {})
        if not d1:
            continue
        conj = p_add(d0, p_mul(p_scale(d1, Fraction(-1)), {((c, 1),): _ONE}))
        num = p_mul(num, conj)
        den = p_add(p_mul(d0, d0), p_scale(p_mul(d1, d1), -c[4]))
    return num, den


def _canonical(num: Poly, den: Poly):
    if not den:
        raise ZeroDivisionError("division by zero in DiffExpr")
    if not num:
        return {}, {ONE_MONO: _ONE}
    if p_is_one(den):
        return num, den
    if any(v[0] == OMEGA for v in p_vars(den)):
        raise RingError("denominators may not contain nonlocal symbols")
    if any(v[0] == CONST for v in p_vars(den)):
        num, den = _rationalize(num, den)
        if not den:
            raise ZeroDivisionError("division by zero in DiffExpr")
    if len(den) == 1 and ONE_MONO in den:
        return p_scale(num, 1 / den[ONE_MONO]), {ONE_MONO: _ONE}
    num, den = _cancel(num, den)
    lc = den[p_leading(den)]
    if lc != 1:
        num = p_scale(num, 1 / lc)
        den = p_scale(den, 1 / lc)
    return num, den


# ---------------------------------------------------------------------------


def x_var() -> Var:
    return (XVAR, 0, 0, "")


def jet_var(a: int, j: int) -> Var:
    return (JET, a, j, "")


def param_var(name: str) -> Var:
    return (PARAM, 0, 0, name)


def const_var(name: str, square) -> Var:
    return (CONST, 0, 0, name, Fraction(square))


def omega_var(density: "DiffExpr") -> Var:
    return (OMEGA, 0, 0, density.key(), density)


class DiffExpr:
    """Canonical rational function over the constant field.

    Instances are immutable; ``==`` and ``hash`` are by canonical form.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Poly, den: Poly | None = None, _canonical_ok=False):
        if den is None:
            den = {ONE_MONO: _ONE}
        if not _canonical_ok:
            num = {m: Fraction(c) for m, c in num.items() if c}
            if any(v[0] == CONST and e >= 2 for m in num for v, e in m):
                num = p_mul(num, {ONE_MONO: _ONE})
            num, den = _canonical(num, den)
        self.num = num
        self.den = den
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, q) -> "DiffExpr":
        q = Fraction(q)
        return cls({ONE_MONO: q} if q else {}, None, True)

    @classmethod
    def var(cls, v: Var) -> "DiffExpr":
        return cls({((v, 1),): _ONE}, None, True)

    @classmethod
    def jet(cls, a: int, j: int = 0) -> "DiffExpr":
        return cls.var(jet_var(a, j))

    @classmethod
    def x(cls) -> "DiffExpr":
        return cls.var(x_var())

    @classmethod
    def param(cls, name: str = "lam") -> "DiffExpr":
        return cls.var(param_var(name))

    @classmethod
    def sqrt_constant(cls, name: str, square) -> "DiffExpr":
        """A declared algebraic constant ``name`` with ``name**2 = square``."""
        return cls.var(const_var(name, square))

    @classmethod
    def omega(cls, density: "DiffExpr") -> "DiffExpr":
        """The nonlocal symbol D^-1(density), taken as is (no normalisation)."""
        if density.has_omega():
            raise NonlocalError("nonlocal densities must be omega-free")
        if not density.num:
            raise RingError("nonlocal density must be nonzero")
        return cls.var(omega_var(density))

    @classmethod
    def coerce(cls, v) -> "DiffExpr":
        if isinstance(v, DiffExpr):
            return v
        if isinstance(v, (int, Fraction)):
            return cls.const(v)
        raise TypeError("cannot convert %r to DiffExpr" % (v,))

    # -- queries ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def __bool__(self):
        return bool(self.num)

    def is_polynomial(self) -> bool:
        return p_is_one(self.den)

    def variables(self) -> set:
        return p_vars(self.num) | p_vars(self.den)

    def is_constant(self) -> bool:
        """True when only declared constants occur (an element of the constant field)."""
        return all(v[0] == CONST for v in self.variables())

    def as_fraction(self):
        """The rational value if the expression is a rational number, else None."""
        if not self.num:
            return _ZERO
        if self.is_polynomial() and len(self.num) == 1 and ONE_MONO in self.num:
            return self.num[ONE_MONO]
        return None

    def has_omega(self) -> bool:
        return any(v[0] == OMEGA for v in p_vars(self.num))

    def omegas(self) -> list:
        return sorted(v for v in p_vars(self.num) if v[0] == OMEGA)

    def omega_degree(self) -> int:
        return max((sum(e for v, e in m if v[0] == OMEGA) for m in self.num), default=0)

    def has_param(self, name: str | None = None) -> bool:
        return any(v[0] == PARAM and (name is None or v[3] == name) for v in self.variables())

    def jets(self) -> set:
        return {v for v in self.variables() if v[0] == JET}

    def max_order(self, a: int | None = None) -> int:
        orders = [v[2] for v in self.jets() if a is None or v[1] == a]
        return max(orders, default=-1)

    def key(self) -> str:
        return format_expr(self)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den == other.den:
            if p_is_one(self.den):
                return DiffExpr(p_add(self.num, other.num), self.den, True)
            return DiffExpr(p_add(self.num, other.num), self.den)
        num = p_add(p_mul(self.num, other.den), p_mul(other.num, self.den))
        return DiffExpr(num, p_mul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return DiffExpr(p_scale(self.num, Fraction(-1)), self.den, True)

    def __sub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return ZERO
            return DiffExpr(p_scale(self.num, Fraction(other)), self.den, True)
        if not isinstance(other, DiffExpr):
            return NotImplemented
        if not self.num or not other.num:
            return ZERO
        num = p_mul(self.num, other.num)
        if p_is_one(self.den) and p_is_one(other.den):
            return DiffExpr(num, self.den, True)
        return DiffExpr(num, p_mul(self.den, other.den))

    __rmul__ = __mul__

    def inverse(self) -> "DiffExpr":
        if not self.num:
            raise ZeroDivisionError("division by zero in DiffExpr")
        if self.has_omega():
            raise RingError("cannot divide by an expression containing nonlocal symbols")
        return DiffExpr(self.den, self.num)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero in DiffExpr")
            return DiffExpr(p_scale(self.num, 1 / Fraction(other)), self.den, True)
        if not isinstance(other, DiffExpr):
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return DiffExpr.coerce(other) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffExpr.const(other)
        if not isinstance(other, DiffExpr):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()), frozenset(self.den.items())))
        return self._hash

    def __repr__(self):
        return "DiffExpr(%s)" % format_expr(self)

    def __str__(self):
        return format_expr(self)

    def format(self, names=None, omega_names=None) -> str:
        return format_expr(self, names, omega_names)

    # -- calculus -----------------------------------------------------
    def diff(self, var: Var) -> "DiffExpr":
        """Formal partial derivative with respect to one variable."""
        dn = p_diff(self.num, var)
        if p_is_one(self.den):
            return DiffExpr(dn, self.den, True)
        dd = p_diff(self.den, var)
        if not dd:
            return DiffExpr(dn, self.den)
        num = p_add(p_mul(dn, self.den), p_scale(p_mul(self.num, dd), Fraction(-1)))
        return DiffExpr(num, p_mul(self.den, self.den))

    def total_derivative(self) -> "DiffExpr":
        return total_derivative(self)

    def subs(self, var: Var, value: "DiffExpr") -> "DiffExpr":
        """Substitute ``value`` for ``var`` (value must not make a denominator nonlocal)."""
        value = DiffExpr.coerce(value)
        return _subs_poly(self.num, var, value) / _subs_poly(self.den, var, value)


def _coerce_or_none(v):
    if isinstance(v, DiffExpr):
        return v
    if isinstance(v, (int, Fraction)):
        return DiffExpr.const(v)
    return None


ZERO = DiffExpr({}, None, True)
ONE = DiffExpr({ONE_MONO: _ONE}, None, True)


def _subs_poly(a: Poly, var: Var, value: DiffExpr) -> DiffExpr:
    parts = p_split_var(a, var)
    out = ZERO
    for k, rest in parts.items():
        out = out + DiffExpr(rest) * value ** k
    return out


def _dvar(v: Var) -> DiffExpr:
    kind = v[0]
    if kind == XVAR:
        return ONE
    if kind == JET:
        return DiffExpr.jet(v[1], v[2] + 1)
    if kind == OMEGA:
        return v[4]
    return ZERO


def _poly_total_derivative(a: Poly) -> DiffExpr:
    local: Poly = {}
    extra = ZERO
    for m, c in a.items():
        for i, (v, e) in enumerate(m):
            kind = v[0]
            if kind in (CONST, PARAM):
                continue
            rest = m[:i] + (((v, e - 1),) if e > 1 else ()) + m[i + 1:]
            if kind == XVAR:
                mm = rest
            elif kind == JET:
                mm = _mono_mul(rest, (((JET, v[1], v[2] + 1, ""), 1),))
            else:
                extra = extra + DiffExpr({rest: c * e}, None, True) * v[4]
                continue
            s = local.get(mm, _ZERO) + c * e
            if s:
                local[mm] = s
            else:
                local.pop(mm, None)
    return DiffExpr(local, None, True) + extra


def total_derivative(e: DiffExpr) -> DiffExpr:
    """D = d/dx + sum u_{j+1} d/du_j, extended by D(D^-1(K)) = K."""
    dn = _poly_total_derivative(e.num)
    if p_is_one(e.den):
        return dn
    den = DiffExpr(e.den, None, True)
    dd = _poly_total_derivative(e.den)
    return (dn * den - DiffExpr(e.num, None, True) * dd) / (den * den)


def total_derivative_n(e: DiffExpr, k: int) -> DiffExpr:
    for _ in range(k):
        if not e:
            break
        e = total_derivative(e)
    return e


def partial(e: DiffExpr, v: Union[Var, DiffExpr]) -> DiffExpr:
    """Partial derivative with respect to a jet variable, x, or a nonlocal symbol."""
    if isinstance(v, DiffExpr):
        vs = list(p_vars(v.num))
        if len(vs) != 1 or len(v.num) != 1 or not p_is_one(v.den):
            raise RingError("partial derivative needs a single variable")
        v = vs[0]
    return e.diff(v)


def scale_jets(e: DiffExpr, lam: Union[str, DiffExpr] = "lam") -> DiffExpr:
    """Replace every jet variable u^a_j by lam*u^a_j (x and constants untouched)."""
    if e.has_omega():
        raise NonlocalError("scale_jets needs an omega-free expression")
    if isinstance(lam, str):
        lam = DiffExpr.param(lam)
    if len(lam.num) == 1 and p_is_one(lam.den) and lam.num[p_leading(lam.num)] == 1:
        lam_mono = p_leading(lam.num)

        def scale(a: Poly) -> Poly:
            out = {}
            for m, c in a.items():
                k = sum(ex for v, ex in m if v[0] == JET)
                mm = m
                for _ in range(k):
                    mm = _mono_mul(mm, lam_mono)
                out[mm] = c
            return out

        return DiffExpr(scale(e.num), scale(e.den))
    # general substitution
    out = e
    for v in sorted(e.jets()):
        out = out.subs(v, lam * DiffExpr.var(v))
    return out


def integrate_unit_interval(e: DiffExpr, lam: str = "lam") -> DiffExpr:
    """Integrate a polynomial in the parameter ``lam`` over [0, 1]."""
    pv = param_var(lam)
    if pv in p_vars(e.den):
        raise RingError("integrand is not polynomial in %s" % lam)
    parts = p_split_var(e.num, pv)
    num: Poly = {}
    for k, rest in parts.items():
        num = p_add(num, p_scale(rest, Fraction(1, k + 1)))
    return DiffExpr(num, e.den)


def constant_coordinates(e: DiffExpr) -> Dict[Mono, DiffExpr]:
    """Split a polynomial into {monomial without constants: constant-field coefficient}."""
    if not p_is_one(e.den):
        raise RingError("constant_coordinates needs a polynomial")
    out: Dict[Mono, Poly] = {}
    for m, c in e.num.items():
        cpart = tuple(p for p in m if p[0][0] == CONST)
        rest = tuple(p for p in m if p[0][0] != CONST)
        d = out.setdefault(rest, {})
        d[cpart] = d.get(cpart, _ZERO) + c
    return {m: DiffExpr(p, None, True) for m, p in out.items() if any(p.values())}


def monomial_expr(m: Mono) -> DiffExpr:
    return DiffExpr({m: _ONE}, None, True)


def leading_rational(e: DiffExpr) -> Fraction:
    """Rational coefficient of the leading numerator monomial."""
    return e.num[p_leading(e.num)]


# ---------------------------------------------------------------------------
# printing

DEFAULT_FIELD_NAMES = ("u", "v", "w")


def field_name(a: int, names: Iterable[str] | None = None) -> str:
    names = tuple(names) if names is not None else DEFAULT_FIELD_NAMES
    if a < len(names):
        return names[a]
    return "u%d" % (a + 1)


def format_var(v: Var, names=None, omega_names=None) -> str:
    kind = v[0]
    if kind in (CONST, PARAM):
        return v[3]
    if kind == XVAR:
        return "x"
    if kind == JET:
        base = field_name(v[1], names)
        return base if v[2] == 0 else "%s_%d" % (base, v[2])
    if omega_names and v[3] in omega_names:
        return omega_names[v[3]]
    return "D^-1(%s)" % format_expr(v[4], names, omega_names)


def _format_frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else "%d/%d" % (q.numerator, q.denominator)


def _format_poly(a: Poly, names, omega_names) -> str:
    if not a:
        return "0"
    terms = sorted(a.items(), key=lambda t: _mono_key(t[0]), reverse=True)
    out = []
    for m, c in terms:
        factors = []
        for v, e in m:
            s = format_var(v, names, omega_names)
            factors.append(s if e == 1 else "%s^%d" % (s, e))
        mag = abs(c)
        if factors:
            body = "*".join(factors)
            if mag.numerator != 1:
                body = "%d*%s" % (mag.numerator, body)
            if mag.denominator != 1:
                body = "%s/%d" % (body, mag.denominator)
        else:
            body = _format_frac(mag)
        sign = "-" if c < 0 else "+"
        out.append((sign, body))
    s = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        s += " %s %s" % (sign, body)
    return s


def format_expr(e: DiffExpr, names=None, omega_names=None) -> str:
    """Deterministic text form, re-parsable by :mod:`wnhcalc.parser`."""
    if p_is_one(e.den):
        return _format_poly(e.num, names, omega_names)
    nd, dd = e.num, e.den
    if len(nd) == 1 and ONE_MONO in nd and nd[ONE_MONO].denominator != 1:
        # c/q over a polynomial reads better as c/(q*den)
        q = nd[ONE_MONO].denominator
        nd = {ONE_MONO: nd[ONE_MONO] * q}
        dd = {m: c * q for m, c in dd.items()}
    num = _format_poly(nd, names, omega_names)
    den = _format_poly(dd, names, omega_names)
    if len(nd) > 1:
        num = "(%s)" % num
    if len(dd) > 1 or len(next(iter(dd))) > 1 or next(iter(dd.values())) != 1:
        den = "(%s)" % den
    elif any(ex > 1 for _, ex in next(iter(dd))):
        den = "(%s)" % den
    return "%s/%s" % (num, den)


def as_expr(v) -> DiffExpr:
    return DiffExpr.coerce(v)
