"""Variational calculus on the jet space.

Euler and higher Euler operators, exactness, formal antiderivatives (D^-1),
Helmholtz test and homotopy reconstruction of densities.  The exactness
convention is the x-polynomial one: a density is in Im D iff its Euler
operator vanishes, and antiderivatives that would leave the ring (logarithms)
are reported as :class:`UnsupportedIntegration`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterable

from .ring import (
    DiffExpr,
    NonlocalError,
    ONE,
    RingError,
    ZERO,
    JET,
    XVAR,
    constant_coordinates,
    integrate_unit_interval,
    jet_var,
    monomial_expr,
    leading_rational,
    p_split_var,
    p_vars,
    scale_jets,
    total_derivative,
    total_derivative_n,
    x_var,
)


class NotExactError(RingError):
    """A density that is not a total derivative was integrated in strict mode."""

    def __init__(self, density, message=None):
        self.density = density
        super().__init__(message or "density is not exact: %s" % density)


class UnsupportedIntegration(RingError):
    """The antiderivative exists formally but leaves the rational ring."""


class NotVariationalError(RingError):
    """Reconstruction requested for a covector failing the Helmholtz test."""


# ---------------------------------------------------------------------------
# vectors and covectors


class _FieldTuple:
    covariant = False
    __slots__ = ("components",)

    def __init__(self, components: Iterable):
        self.components = tuple(DiffExpr.coerce(c) for c in components)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def _same(self, comps):
        return type(self)(comps)

    def __add__(self, other):
        if type(other) is not type(self) or len(other) != len(self):
            return NotImplemented
        return self._same(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        if type(other) is not type(self) or len(other) != len(self):
            return NotImplemented
        return self._same(a - b for a, b in zip(self, other))

    def __neg__(self):
        return self._same(-a for a in self)

    def __mul__(self, c):
        c = DiffExpr.coerce(c)
        return self._same(c * a for a in self)

    __rmul__ = __mul__

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash((type(self).__name__, self.components))

    def __repr__(self):
        return "%s(%s)" % (type(self).__name__, ", ".join(map(str, self.components)))

    def __str__(self):
        return "(%s)" % ", ".join(map(str, self.components))

    def dot(self, other) -> DiffExpr:
        out = ZERO
        for a, b in zip(self, other):
            out = out + a * b
        return out

    def is_zero(self) -> bool:
        return not any(self.components)

    def is_local(self) -> bool:
        return not any(c.has_omega() for c in self.components)

    def omega_degree(self) -> int:
        return max((c.omega_degree() for c in self.components), default=0)

    @property
    def local_part(self):
        return self._same(c.subs_omegas_zero() if c.has_omega() else c for c in self.components)

    def nonlocal_terms(self) -> dict:
        """Coefficient vector of each nonlocal symbol in the omega-linear part."""
        syms = sorted({v for c in self.components for v in c.omegas()})
        return {v[3]: (v[4], self._same(c.diff(v).subs_omegas_zero() for c in self.components)) for v in syms}

    @property
    def T(self):
        other = WnlCovector if not self.covariant else WnlVector
        return other(self.components)

    def map(self, fn):
        return self._same(fn(c) for c in self.components)


class WnlVector(_FieldTuple):
    """Column of (possibly nonlocal) expressions: an element of V~."""

    covariant = False


class WnlCovector(_FieldTuple):
    """Row of (possibly nonlocal) expressions: an element of V~*."""

    covariant = True


LocalVector = WnlVector
LocalCovector = WnlCovector


def _subs_omegas_zero(e: DiffExpr) -> DiffExpr:
    out = e
    for v in e.omegas():
        out = out.subs(v, ZERO)
    return out


DiffExpr.subs_omegas_zero = _subs_omegas_zero


def field_vector(n: int) -> WnlVector:
    """The vector u = (u^1, ..., u^n)."""
    return WnlVector(DiffExpr.jet(a) for a in range(n))


def _require_local(f: DiffExpr, what: str):
    if f.has_omega():
        raise NonlocalError("%s needs an omega-free density, got %s" % (what, f))


def _jet_orders(f: DiffExpr, n: int | None = None):
    orders = {}
    for v in f.jets():
        orders[v[1]] = max(orders.get(v[1], -1), v[2])
    if n is not None:
        for a in range(n):
            orders.setdefault(a, -1)
    return orders


def n_fields_of(*exprs) -> int:
    n = 0
    for e in exprs:
        for v in e.jets():
            n = max(n, v[1] + 1)
    return n


# ---------------------------------------------------------------------------
# Euler operators


def euler(f: DiffExpr, n: int | None = None) -> WnlCovector:
    """Variational derivative: sum_j (-D)^j dF/du_j, one entry per field."""
    f = DiffExpr.coerce(f)
    _require_local(f, "euler")
    if n is None:
        n = max(n_fields_of(f), 1)
    orders = _jet_orders(f, n)
    comps = []
    for a in range(n):
        out = ZERO
        for j in range(orders[a], -1, -1):
            # Horner scheme in -D
            out = f.diff(jet_var(a, j)) - total_derivative(out)
        comps.append(out)
    return WnlCovector(comps)


def higher_euler(f: DiffExpr, a: int, j: int) -> DiffExpr:
    """E^j_a(f) = sum_{i>=j} C(i, j) (-D)^(i-j) dF/du^a_i."""
    f = DiffExpr.coerce(f)
    _require_local(f, "higher_euler")
    top = _jet_orders(f).get(a, -1)
    out = ZERO
    for i in range(j, top + 1):
        p = f.diff(jet_var(a, i))
        if not p:
            continue
        term = total_derivative_n(p, i - j) * comb(i, j)
        out = out + (term if (i - j) % 2 == 0 else -term)
    return out


def is_exact(f: DiffExpr) -> bool:
    f = DiffExpr.coerce(f)
    _require_local(f, "is_exact")
    return euler(f).is_zero()


# ---------------------------------------------------------------------------
# antiderivatives


def _integrate_x(f: DiffExpr) -> DiffExpr:
    """Integrate a jet-free expression in x (polynomial dependence on x only)."""
    xv = x_var()
    if not f.is_polynomial() and xv in f.variables():
        raise UnsupportedIntegration("x-antiderivative of %s may leave the ring" % f)
    if not f.is_polynomial():
        return f * DiffExpr.x()
    parts = p_split_var(f.num, xv)
    out = ZERO
    for k, rest in parts.items():
        out = out + DiffExpr(rest) * DiffExpr.x() ** (k + 1) / (k + 1)
    return out


def _homotopy_antiderivative(f: DiffExpr) -> DiffExpr:
    orders = _jet_orders(f)
    zero_jets = f
    for v in sorted(f.jets()):
        zero_jets = zero_jets.subs(v, ZERO)
    rest = f - zero_jets
    integrand = ZERO
    for a, top in orders.items():
        for i in range(top):
            e = higher_euler(rest, a, i + 1)
            if e:
                integrand = integrand + DiffExpr.jet(a, i) * e
    lam = DiffExpr.param("lam")
    g = integrate_unit_interval(scale_jets(integrand, "lam") / lam, "lam") if integrand else ZERO
    return g + _integrate_x(zero_jets)


def _partial_integral(A: DiffExpr, var) -> DiffExpr:
    if var in p_vars(A.den):
        raise UnsupportedIntegration("cannot integrate %s in %s" % (A, var))
    parts = p_split_var(A.num, var)
    v = DiffExpr.var(var)
    den = DiffExpr(A.den)
    out = ZERO
    for k, rest in parts.items():
        out = out + DiffExpr(rest) * v ** (k + 1) / (k + 1)
    return out / den


def _by_parts_antiderivative(f: DiffExpr) -> DiffExpr:
    g = ZERO
    r = f
    for _ in range(200):
        if not r:
            return g
        jets = r.jets()
        if not jets:
            return g + _integrate_x(r)
        top = max(jets, key=lambda v: (v[2], v[1]))
        if top[2] == 0:
            raise NotExactError(f)
        A = r.diff(top)
        if top in A.variables():
            raise NotExactError(f)
        G = _partial_integral(A, jet_var(top[1], top[2] - 1))
        g = g + G
        r = r - total_derivative(G)
    raise UnsupportedIntegration("integration by parts did not terminate for %s" % f)


def antiderivative(f: DiffExpr) -> DiffExpr:
    """A local g with D(g) = f for an exact omega-free density f.

    The homotopy integral is tried first; rational densities whose scaling
    integral diverges fall back to integration by parts.  The result is
    always re-verified.
    """
    f = DiffExpr.coerce(f)
    _require_local(f, "antiderivative")
    if not f:
        return ZERO
    if not is_exact(f):
        raise NotExactError(f)
    try:
        g = _homotopy_antiderivative(f)
    except (RingError, ZeroDivisionError):
        g = None
    if g is None or total_derivative(g) != f:
        g = _by_parts_antiderivative(f)
    if total_derivative(g) != f:
        raise UnsupportedIntegration("no antiderivative of %s in the ring" % f)
    return g


def _max_jet(mono):
    jets = [(v[2], v[1]) for v, _ in mono if v[0] == JET]
    return max(jets) if jets else None


def reduce_mod_image(K: DiffExpr):
    """Split a polynomial density as K = R + D(g) with R in reduced form.

    A term linear in its largest jet u^a_k is integrated by parts whenever
    that strictly lowers the largest jet of every new term; pure x terms are
    integrated outright.  Terms that cannot be lowered are kept in R, so
    equivalent densities usually (not provably always) share the same R.
    """
    K = DiffExpr.coerce(K)
    if not K.is_polynomial() or K.has_omega():
        return K, ZERO
    work = dict(K.num)
    red = {}
    g = ZERO
    while work:
        mono = max(work, key=lambda m: (_max_jet(m) or (-1, -1), m))
        c = work.pop(mono)
        if not c:
            continue
        term = DiffExpr({mono: c})
        top = _max_jet(mono)
        if top is None:
            if any(v[0] == XVAR for v, _ in mono):
                xv = x_var()
                e = dict(mono).get(xv, 0)
                g = g + term * DiffExpr.x() / (e + 1)
                continue
            red[mono] = red.get(mono, 0) + c
            continue
        k, a = top
        exps = dict(mono)
        J = jet_var(a, k)
        if k == 0 or exps[J] != 1:
            red[mono] = red.get(mono, 0) + c
            continue
        L = jet_var(a, k - 1)
        p = exps.get(L, 0)
        rest = tuple((v, e) for v, e in mono if v not in (J, L))
        s_expr = DiffExpr({rest: c})
        lower = DiffExpr.var(L) ** (p + 1) / (p + 1)
        new = -lower * total_derivative(s_expr)
        if any((_max_jet(m) or (-1, -1)) >= top for m in new.num):
            red[mono] = red.get(mono, 0) + c
            continue
        g = g + lower * s_expr
        for m, q in new.num.items():
            work[m] = work.get(m, 0) + q
    R = DiffExpr(red)
    return R, g


def nonlocal_symbol(density: DiffExpr) -> DiffExpr:
    """D^-1(density) written over normalised nonlocal symbols.

    Polynomial densities are reduced modulo Im D and split into monomials, so
    that D^-1 acts linearly on the symbols it creates; other densities become
    a constant multiple of one symbol.
    """
    density = DiffExpr.coerce(density)
    if density.is_polynomial():
        R, g = reduce_mod_image(density)
        out = g
        for mono, coeff in constant_coordinates(R).items():
            out = out + coeff * DiffExpr.omega(monomial_expr(mono))
        return out
    c = leading_rational(density)
    return DiffExpr.omega(density / c) * c


def integrate(f: DiffExpr, allow_new: bool = True) -> DiffExpr:
    """D^-1 of a density, local whenever possible.

    omega-free inexact densities become new nonlocal symbols when
    ``allow_new`` (otherwise :class:`NotExactError`).  Densities linear in
    nonlocal symbols are integrated by parts, which requires each omega
    coefficient to be exact; other cases raise :class:`NotExactError`.
    """
    f = DiffExpr.coerce(f)
    if not f:
        return ZERO
    if not f.has_omega():
        if is_exact(f):
            return antiderivative(f)
        if not allow_new:
            raise NotExactError(f)
        return nonlocal_symbol(f)
    if f.omega_degree() > 1:
        raise NotExactError(f, "cannot integrate density of nonlocal degree > 1: %s" % f)
    result = ZERO
    remainder = f
    for w in f.omegas():
        a = f.diff(w)
        remainder = remainder - a * DiffExpr.var(w)
        K = w[4]
        if a.has_omega() or not is_exact(a):
            ratio = a / K if not a.has_omega() else None
            if ratio is not None and ratio.is_constant():
                # a*w = ratio*D(w^2/2)
                result = result + ratio * DiffExpr.var(w) ** 2 / 2
                continue
            raise NotExactError(f, "coefficient of %s is not exact in %s" % (DiffExpr.var(w), f))
        s = antiderivative(a)
        result = result + s * DiffExpr.var(w)
        remainder = remainder - s * K
    return result + integrate(remainder, allow_new)


# ---------------------------------------------------------------------------
# Frechet derivatives


def frechet(f, n: int | None = None):
    """Directional (Frechet) derivative as a PDOperator.

    A scalar gives a 1 x n row, a vector an n x n operator of variance V->V
    and a covector one of variance V->V*.  Nonlocal symbols contribute
    coefficient (x) D^-1 o K' terms.
    """
    from .opalg import PDOperator, Tail

    if isinstance(f, _FieldTuple):
        comps = list(f.components)
        variance = "V->V*" if f.covariant else "V->V"
    else:
        comps = [DiffExpr.coerce(f)]
        variance = None
    if n is None and isinstance(f, _FieldTuple):
        n = len(comps)
    if n is None:
        n = max(n_fields_of(*comps, *[v[4] for c in comps for v in c.omegas()]), 1)
    r = len(comps)
    diff = {}
    extra = []
    for i, c in enumerate(comps):
        for v in c.jets():
            d = c.diff(v)
            if d:
                diff.setdefault(v[2], {})[(i, v[1])] = d
        for w in c.omegas():
            coeff = c.diff(w)
            left = tuple(coeff if k == i else ZERO for k in range(r))
            tail_op = PDOperator.from_tails(r, 1, [Tail(left, (ONE,))])
            extra.append(tail_op.compose(frechet(w[4], n)))
    mats = {}
    for j, entries in diff.items():
        mats[j] = tuple(tuple(entries.get((i, a), ZERO) for a in range(n)) for i in range(r))
    op = PDOperator(r, n, mats, (), None)
    for e in extra:
        op = op + e
    return op.with_variance(variance).normalized()


def directional(f, Q, allow_new: bool = True):
    """f'[Q] for a scalar or (co)vector f and a vector field Q."""
    if isinstance(f, _FieldTuple):
        return f.map(lambda c: directional(c, Q, allow_new))
    f = DiffExpr.coerce(f)
    Q = tuple(Q)
    cache = {}

    def dq(a, j):
        key = (a, j)
        if key not in cache:
            cache[key] = total_derivative_n(Q[a], j) if a < len(Q) else ZERO
        return cache[key]

    out = ZERO
    for v in f.jets():
        d = f.diff(v)
        out = out + d * dq(v[1], v[2])
    for w in f.omegas():
        coeff = f.diff(w)
        out = out + coeff * integrate(directional(w[4], Q, allow_new), allow_new)
    return out


# ---------------------------------------------------------------------------
# Helmholtz and reconstruction


def helmholtz_is_variational(w) -> bool:
    """True iff the Frechet derivative of the covector w is formally self-adjoint."""
    w = w if isinstance(w, WnlCovector) else WnlCovector(w)
    for c in w:
        _require_local(c, "helmholtz test")
    op = frechet(w, len(w))
    return op.equals(op.adjoint())


def reconstruct_density(w) -> DiffExpr:
    """H = int_0^1 u . w[lam u] dlam, checked to satisfy euler(H) = w."""
    w = w if isinstance(w, WnlCovector) else WnlCovector(w)
    n = len(w)
    if not helmholtz_is_variational(w):
        raise NotVariationalError("covector is not a variational derivative: %s" % (w,))
    integrand = ZERO
    for a, c in enumerate(w):
        integrand = integrand + DiffExpr.jet(a) * scale_jets(c, "lam")
    H = integrate_unit_interval(integrand, "lam")
    if euler(H, n) != w:
        raise NotVariationalError("homotopy reconstruction failed for %s" % (w,))
    return H


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionalClass:
    """A density modulo Im D; equality is decided by the Euler operator."""

    representative: DiffExpr

    def __post_init__(self):
        object.__setattr__(self, "representative", DiffExpr.coerce(self.representative))
        _require_local(self.representative, "FunctionalClass")

    def is_zero(self) -> bool:
        return is_exact(self.representative)

    def __eq__(self, other):
        if not isinstance(other, FunctionalClass):
            return NotImplemented
        return is_exact(self.representative - other.representative)

    def __hash__(self):
        # classes have no canonical representative; hash only by type
        return hash(FunctionalClass)

    def __add__(self, other):
        return FunctionalClass(self.representative + other.representative)

    def __neg__(self):
        return FunctionalClass(-self.representative)

    def __sub__(self, other):
        return FunctionalClass(self.representative - other.representative)

    def variational_derivative(self, n: int | None = None) -> WnlCovector:
        return euler(self.representative, n)

    def __str__(self):
        return "int(%s) dx" % self.representative
