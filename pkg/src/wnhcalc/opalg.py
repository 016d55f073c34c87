"""Matrix weakly nonlocal operators.

An operator is a finite differential part ``sum_j h_j D^j`` plus a finite sum
of tails ``f (x) D^-1 o g`` acting by ``h -> f * D^-1(g . h)``.  Composition
follows the generalised Leibniz rule; products of two tails close only when
the middle density is a total derivative (otherwise
:class:`NotWeaklyNonlocalClosure` is raised).  ``A.compose(B)`` means "apply
B, then A".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Iterable, List, Sequence, Tuple

from .ring import (
    ONE,
    ZERO,
    DiffExpr,
    RingError,
    _mono_key,
    constant_coordinates,
    format_expr,
    monomial_expr,
    total_derivative,
    total_derivative_n,
)
from .varcalc import NotExactError, WnlCovector, WnlVector, _FieldTuple, integrate

Matrix = Tuple[Tuple[DiffExpr, ...], ...]

VARIANCES = ("V->V", "V->V*", "V*->V", "V*->V*")


class ShapeError(ValueError):
    """Operator shapes or variances do not match."""


class NotWeaklyNonlocalClosure(RingError):
    """A tail-by-tail product whose middle density is not a total derivative."""

    def __init__(self, density):
        self.density = density
        super().__init__("product of tails is not weakly nonlocal: %s is not exact" % density)


class DegenerateError(ValueError):
    """Leading coefficient of a formal series is not invertible."""


# ---------------------------------------------------------------------------
# small matrix helpers


def mzero(r: int, c: int) -> Matrix:
    return tuple((ZERO,) * c for _ in range(r))


def meye(n: int) -> Matrix:
    return tuple(tuple(ONE if i == k else ZERO for k in range(n)) for i in range(n))


def madd(A: Matrix, B: Matrix) -> Matrix:
    return tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mscale(A: Matrix, c) -> Matrix:
    c = DiffExpr.coerce(c)
    return tuple(tuple(c * a for a in row) for row in A)


def mmul(A: Matrix, B: Matrix) -> Matrix:
    cols = list(zip(*B)) if B else []
    out = []
    for row in A:
        r = []
        for col in cols:
            s = ZERO
            for a, b in zip(row, col):
                if a and b:
                    s = s + a * b
            r.append(s)
        out.append(tuple(r))
    return tuple(out)


def mT(A: Matrix) -> Matrix:
    return tuple(zip(*A))


def mD(A: Matrix, k: int = 1) -> Matrix:
    return tuple(tuple(total_derivative_n(a, k) for a in row) for row in A)


def mis_zero(A: Matrix) -> bool:
    return not any(a for row in A for a in row)


def outer(col: Sequence[DiffExpr], row: Sequence[DiffExpr]) -> Matrix:
    return tuple(tuple(f * g for g in row) for f in col)


def vec_D(v, k: int = 1):
    return tuple(total_derivative_n(a, k) for a in v)


def minverse(A: Matrix) -> Matrix:
    """Inverse over the rational function field by Gauss-Jordan elimination."""
    n = len(A)
    M = [list(row) + [ONE if i == k else ZERO for k in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            raise DegenerateError("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        inv = M[col][col].inverse()
        M[col] = [inv * a for a in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return tuple(tuple(row[n:]) for row in M)


def mdet(A: Matrix) -> DiffExpr:
    n = len(A)
    M = [list(r) for r in A]
    det = ONE
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            return ZERO
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det = det * M[col][col]
        inv = M[col][col].inverse()
        for r in range(col + 1, n):
            if M[r][col]:
                f = M[r][col] * inv
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return det


def gbinom(i: int, q: int) -> Fraction:
    """Generalised binomial i(i-1)...(i-q+1)/q! for any integer i."""
    num = 1
    for t in range(q):
        num *= i - t
    return Fraction(num, factorial(q))


# ---------------------------------------------------------------------------
# constant-field linear algebra on vectors of expressions


def _common_den(vecs) -> DiffExpr:
    dens = {}
    for v in vecs:
        for e in v:
            if not e.is_polynomial():
                d = DiffExpr(e.den)
                dens[d.key()] = d
    out = ONE
    for k in sorted(dens):
        out = out * dens[k]
    return out


def _coords(vec, cden: DiffExpr) -> dict:
    out = {}
    for i, e in enumerate(vec):
        if not e:
            continue
        p = e * cden if cden != ONE else e
        for mono, k in constant_coordinates(p).items():
            out[(i, mono)] = k
    return out


def _coord_key(k):
    return (k[0], _mono_key(k[1]))


def _from_coords(coords: dict, length: int, cden: DiffExpr):
    comps = [ZERO] * length
    for (i, mono), k in coords.items():
        comps[i] = comps[i] + k * monomial_expr(mono)
    if cden != ONE:
        comps = [c / cden for c in comps]
    return tuple(comps)


def _row_sub(r: dict, c: DiffExpr, b: dict) -> dict:
    out = dict(r)
    for k, v in b.items():
        s = out.get(k, ZERO) - c * v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def rref(rows: List[dict]):
    """Reduced row echelon basis of coordinate rows over the constant field.

    Returns ``(basis, pivots)`` sorted by pivot coordinate.
    """
    basis: List[dict] = []
    pivots: list = []
    for row in rows:
        r = dict(row)
        for b, p in zip(basis, pivots):
            if p in r:
                r = _row_sub(r, r[p], b)
        if not r:
            continue
        p = min(r, key=_coord_key)
        inv = r[p].inverse()
        r = {k: v * inv for k, v in r.items()}
        for idx, b in enumerate(basis):
            if p in b:
                basis[idx] = _row_sub(b, b[p], r)
        basis.append(r)
        pivots.append(p)
    order = sorted(range(len(basis)), key=lambda i: _coord_key(pivots[i]))
    return [basis[i] for i in order], [pivots[i] for i in order]


def span_basis(vecs: Sequence[Sequence[DiffExpr]]):
    """Constant-field basis of span(vecs) and each vector's coefficients in it."""
    vecs = [tuple(v) for v in vecs]
    length = len(vecs[0]) if vecs else 0
    cden = _common_den(vecs)
    rows = [_coords(v, cden) for v in vecs]
    basis, pivots = rref(rows)
    coeffs = [[r.get(p, ZERO) for p in pivots] for r in rows]
    return [_from_coords(b, length, cden) for b in basis], coeffs


@dataclass(frozen=True)
class Tail:
    """The rank-one nonlocal block ``left (x) D^-1 o right``."""

    left: Tuple[DiffExpr, ...]
    right: Tuple[DiffExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(DiffExpr.coerce(a) for a in self.left))
        object.__setattr__(self, "right", tuple(DiffExpr.coerce(a) for a in self.right))

    def is_zero(self) -> bool:
        return not any(self.left) or not any(self.right)

    def scaled(self, c) -> "Tail":
        c = DiffExpr.coerce(c)
        return Tail(tuple(c * a for a in self.left), self.right)


def _normal_tails(tails: Iterable[Tail], r: int, c: int) -> Tuple[Tail, ...]:
    tails = [t for t in tails if not t.is_zero()]
    if not tails:
        return ()
    # rights -> independent basis, lefts accumulated per basis vector
    rbasis, rcoef = span_basis([t.right for t in tails])
    lefts = []
    for beta in range(len(rbasis)):
        acc = [ZERO] * r
        for alpha, t in enumerate(tails):
            k = rcoef[alpha][beta]
            if k:
                acc = [a + k * f for a, f in zip(acc, t.left)]
        lefts.append(tuple(acc))
    keep = [b for b in range(len(rbasis)) if any(lefts[b])]
    if not keep:
        return ()
    lefts = [lefts[b] for b in keep]
    rbasis = [rbasis[b] for b in keep]
    # canonical left basis, rights recombined
    lbasis, lcoef = span_basis(lefts)
    out = []
    for g in range(len(lbasis)):
        acc = [ZERO] * c
        for b, rb in enumerate(rbasis):
            k = lcoef[b][g]
            if k:
                acc = [a + k * x for a, x in zip(acc, rb)]
        out.append(Tail(lbasis[g], tuple(acc)))
    return tuple(out)


def _variance_parts(v):
    if v is None:
        return None, None
    src, dst = v.split("->")
    return src, dst


# ---------------------------------------------------------------------------


class PDOperator:
    """r x c matrix operator: differential part plus weakly nonlocal tails."""

    __slots__ = ("rows", "cols", "diff", "tails", "variance", "_normal")

    def __init__(self, rows: int, cols: int, diff: Dict[int, Matrix] | None = None,
                 tails: Iterable[Tail] = (), variance: str | None = None):
        if variance is not None and variance not in VARIANCES:
            raise ValueError("unknown variance %r" % variance)
        self.rows = rows
        self.cols = cols
        self.diff = {j: m for j, m in (diff or {}).items() if not mis_zero(m)}
        for j, m in self.diff.items():
            if j < 0 or len(m) != rows or any(len(row) != cols for row in m):
                raise ShapeError("bad coefficient matrix at degree %d" % j)
        self.tails = tuple(tails)
        for t in self.tails:
            if len(t.left) != rows or len(t.right) != cols:
                raise ShapeError("tail shape does not match %dx%d operator" % (rows, cols))
        self.variance = variance
        self._normal = False

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, r, c, variance=None):
        return cls(r, c, {}, (), variance)

    @classmethod
    def identity(cls, n, variance=None):
        return cls(n, n, {0: meye(n)}, (), variance)

    @classmethod
    def D(cls, n: int = 1, power: int = 1, variance=None):
        """D^power times the identity; negative powers are not allowed here."""
        if power < 0:
            raise ValueError("use PDOperator.dinv for D^-1")
        return cls(n, n, {power: meye(n)}, (), variance)

    @classmethod
    def dinv(cls, n: int = 1, variance=None):
        """D^-1 on each component, as n tails e_i (x) D^-1 o e_i."""
        e = meye(n)
        return cls(n, n, {}, [Tail(e[i], e[i]) for i in range(n)], variance)

    @classmethod
    def scalar(cls, expr, n: int = 1, variance=None):
        return cls(n, n, {0: mscale(meye(n), expr)}, (), variance)

    @classmethod
    def from_matrix(cls, M, degree: int = 0, variance=None):
        M = tuple(tuple(DiffExpr.coerce(a) for a in row) for row in M)
        return cls(len(M), len(M[0]), {degree: M}, (), variance)

    @classmethod
    def from_coefficients(cls, coeffs: Dict[int, Sequence[Sequence]], variance=None):
        mats = {j: tuple(tuple(DiffExpr.coerce(a) for a in row) for row in M) for j, M in coeffs.items()}
        M0 = next(iter(mats.values()))
        return cls(len(M0), len(M0[0]), mats, (), variance)

    @classmethod
    def from_tails(cls, r, c, tails, variance=None):
        return cls(r, c, {}, tails, variance)

    @classmethod
    def tail(cls, left, right, variance=None):
        t = Tail(tuple(left), tuple(right))
        return cls(len(t.left), len(t.right), {}, [t], variance)

    def with_variance(self, variance):
        out = PDOperator(self.rows, self.cols, self.diff, self.tails, variance)
        out._normal = self._normal
        return out

    @property
    def shape(self):
        return (self.rows, self.cols)

    # -- linear structure ---------------------------------------------
    def _merge_variance(self, other):
        if self.variance is None:
            return other.variance
        if other.variance is None or other.variance == self.variance:
            return self.variance
        raise ShapeError("variance mismatch: %s vs %s" % (self.variance, other.variance))

    def __add__(self, other):
        if not isinstance(other, PDOperator):
            return NotImplemented
        if self.shape != other.shape:
            raise ShapeError("cannot add %s and %s operators" % (self.shape, other.shape))
        variance = self._merge_variance(other)
        diff = dict(self.diff)
        for j, m in other.diff.items():
            diff[j] = madd(diff[j], m) if j in diff else m
        return PDOperator(self.rows, self.cols, diff, self.tails + other.tails, variance)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, PDOperator):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "PDOperator":
        """Left multiplication by a scalar expression (c o A)."""
        c = DiffExpr.coerce(c)
        return PDOperator(
            self.rows, self.cols, {j: mscale(m, c) for j, m in self.diff.items()},
            [t.scaled(c) for t in self.tails], self.variance,
        )

    def __mul__(self, c):
        if isinstance(c, PDOperator):
            return NotImplemented
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self.compose(other)

    # -- composition --------------------------------------------------
    def compose(self, other: "PDOperator") -> "PDOperator":
        """self o other (apply other first)."""
        if self.cols != other.rows:
            raise ShapeError("cannot compose %s o %s" % (self.shape, other.shape))
        variance = None
        s_src, s_dst = _variance_parts(self.variance)
        o_src, o_dst = _variance_parts(other.variance)
        if s_src is not None and o_dst is not None:
            if s_src != o_dst:
                raise ShapeError("variance mismatch in composition: %s o %s" % (self.variance, other.variance))
            variance = "%s->%s" % (o_src, s_dst)
        r, c = self.rows, other.cols
        diff: Dict[int, Matrix] = {}
        tails: List[Tail] = []

        def put(deg, m):
            if mis_zero(m):
                return
            diff[deg] = madd(diff[deg], m) if deg in diff else m

        # differential o differential
        for i, a in self.diff.items():
            for j, b in other.diff.items():
                for q in range(i + 1):
                    put(i + j - q, mscale(mmul(a, mD(b, q)), comb(i, q)))
        # differential o tail
        for i, a in self.diff.items():
            for t in other.tails:
                for q in range(i + 1):
                    dq = [x[0] for x in mmul(a, tuple((f,) for f in vec_D(t.left, q)))]
                    if not any(dq):
                        continue
                    if q == i:
                        tails.append(Tail(tuple(dq), t.right))
                        continue
                    k = i - 1 - q
                    for p in range(k + 1):
                        put(k - p, mscale(outer(dq, vec_D(t.right, p)), comb(i, q) * comb(k, p)))
        # tail o differential
        for t in self.tails:
            for m, b in other.diff.items():
                h = mmul((t.right,), b)[0]
                for k in range(m):
                    dh = vec_D(h, k)
                    coeff = outer(t.left, dh)
                    put(m - 1 - k, coeff if k % 2 == 0 else mscale(coeff, -1))
                dm = vec_D(h, m)
                tails.append(Tail(t.left, dm if m % 2 == 0 else tuple(-x for x in dm)))
        # tail o tail
        for t1 in self.tails:
            for t2 in other.tails:
                middle = ZERO
                for g, h in zip(t1.right, t2.left):
                    middle = middle + g * h
                if not middle:
                    continue
                try:
                    s = integrate(middle, allow_new=False)
                except NotExactError:
                    raise NotWeaklyNonlocalClosure(middle) from None
                tails.append(Tail(tuple(s * f for f in t1.left), t2.right))
                tails.append(Tail(t1.left, tuple(-s * k for k in t2.right)))
        return PDOperator(r, c, diff, tails, variance).normalized()

    def power(self, k: int) -> "PDOperator":
        out = PDOperator.identity(self.rows)
        for _ in range(k):
            out = out.compose(self)
        return out

    # -- adjoint ------------------------------------------------------
    def adjoint(self) -> "PDOperator":
        """Formal adjoint: sum (-D)^j o h_j^T, tails f (x) D^-1 o g -> -g (x) D^-1 o f."""
        variance = self.variance
        if variance == "V->V":
            variance = "V*->V*"
        elif variance == "V*->V*":
            variance = "V->V"
        diff: Dict[int, Matrix] = {}
        for j, h in self.diff.items():
            hT = mT(h)
            sign = -1 if j % 2 else 1
            for q in range(j + 1):
                m = mscale(mD(hT, q), sign * comb(j, q))
                if not mis_zero(m):
                    deg = j - q
                    diff[deg] = madd(diff[deg], m) if deg in diff else m
        tails = [Tail(t.right, tuple(-f for f in t.left)) for t in self.tails]
        return PDOperator(self.cols, self.rows, diff, tails, variance).normalized()

    # -- normal form and queries ----------------------------------------
    def normalized(self) -> "PDOperator":
        if self._normal:
            return self
        out = PDOperator(self.rows, self.cols, self.diff,
                         _normal_tails(self.tails, self.rows, self.cols), self.variance)
        out._normal = True
        return out

    def is_zero(self) -> bool:
        n = self.normalized()
        return not n.diff and not n.tails

    def equals(self, other: "PDOperator") -> bool:
        if self.shape != other.shape:
            return False
        return (self.with_variance(None) - other.with_variance(None)).is_zero()

    def __eq__(self, other):
        if not isinstance(other, PDOperator):
            return NotImplemented
        return self.equals(other)

    __hash__ = None

    def is_differential(self) -> bool:
        return not self.normalized().tails

    def differential_part(self) -> "PDOperator":
        return PDOperator(self.rows, self.cols, self.diff, (), self.variance)

    def nonlocal_part(self) -> "PDOperator":
        return PDOperator(self.rows, self.cols, {}, self.normalized().tails, self.variance)

    def coefficients(self):
        for j in sorted(self.diff):
            for row in self.diff[j]:
                yield from row
        for t in self.normalized().tails:
            yield from t.left
            yield from t.right

    def has_omega(self) -> bool:
        return any(c.has_omega() for c in self.coefficients())

    def omega_degree(self) -> int:
        return max((c.omega_degree() for c in self.coefficients()), default=0)

    def degree(self):
        """Highest power of D with nonzero coefficient (tails count as -1); None for 0."""
        if self.diff:
            return max(self.diff)
        if self.normalized().tails:
            return -1
        return None

    def leading_matrix(self) -> Matrix:
        d = self.degree()
        if d is None:
            return mzero(self.rows, self.cols)
        if d >= 0:
            return self.diff[d]
        return self.expand(1).coefficient(-1)

    def is_nondegenerate(self) -> bool:
        if self.rows != self.cols or self.degree() is None:
            return False
        return bool(mdet(self.leading_matrix()))

    def is_skew(self) -> bool:
        return self.adjoint().equals(-self)

    def profile(self) -> dict:
        return {
            "degree": self.degree(),
            "leading": self.leading_matrix(),
            "nondegenerate": self.is_nondegenerate(),
            "formally_skew": self.is_skew(),
        }

    # -- action ---------------------------------------------------------
    def apply(self, v, allow_new: bool = True):
        """Act on a (co)vector; tails integrate via D^-1, creating nonlocal
        symbols for inexact integrands unless ``allow_new`` is False."""
        comps = tuple(v)
        if len(comps) != self.cols:
            raise ShapeError("operator with %d columns applied to %d components" % (self.cols, len(comps)))
        src, dst = _variance_parts(self.variance)
        if isinstance(v, _FieldTuple) and src is not None:
            if (src == "V*") != v.covariant:
                raise ShapeError("operator of variance %s applied to a %s" % (self.variance, type(v).__name__))
        out = [ZERO] * self.rows
        for j, h in self.diff.items():
            dv = vec_D(comps, j)
            for i in range(self.rows):
                for k in range(self.cols):
                    if h[i][k] and dv[k]:
                        out[i] = out[i] + h[i][k] * dv[k]
        for t in self.tails:
            dens = ZERO
            for g, x in zip(t.right, comps):
                dens = dens + g * x
            if not dens:
                continue
            w = integrate(dens, allow_new)
            out = [o + f * w for o, f in zip(out, t.left)]
        if dst is None:
            cls = type(v) if isinstance(v, _FieldTuple) else WnlVector
        else:
            cls = WnlCovector if dst == "V*" else WnlVector
        return cls(out)

    def __call__(self, v, allow_new: bool = True):
        return self.apply(v, allow_new)

    # -- series -------------------------------------------------------
    def expand(self, N: int) -> "TruncatedSeries":
        return expand_truncated(self, N)

    # -- printing -------------------------------------------------------
    def format(self, names=None, omega_names=None) -> str:
        n = self.normalized()
        f = lambda e: format_expr(e, names, omega_names)  # noqa: E731
        rows = []
        for i in range(n.rows):
            entries = []
            for k in range(n.cols):
                terms = []
                for j in sorted(n.diff, reverse=True):
                    cexp = n.diff[j][i][k]
                    if cexp:
                        terms.append(_format_term(cexp, j, f))
                entries.append(_join_terms(terms) if terms else "0")
            rows.append("[%s]" % ", ".join(entries))
        s = "[%s]" % ", ".join(rows)
        if not n.diff and n.tails:
            s = ""
        for t in n.tails:
            part = "tail((%s); (%s))" % (", ".join(map(f, t.left)), ", ".join(map(f, t.right)))
            s = part if not s else s + " + " + part
        return s

    def __str__(self):
        return self.format()

    def __repr__(self):
        return "PDOperator(%s%s)" % (self.format(), "" if self.variance is None else ", " + self.variance)


def _format_term(c: DiffExpr, j: int, f) -> str:
    if j == 0:
        return f(c)
    d = "D" if j == 1 else "D^%d" % j
    if c == ONE:
        return d
    if c == -ONE:
        return "-" + d
    s = f(c)
    if len(c.num) > 1 or not c.is_polynomial() or "/" in s:
        s = "(%s)" % s
    return "%s*%s" % (s, d)


def _join_terms(terms) -> str:
    s = terms[0]
    for t in terms[1:]:
        if t.startswith("-"):
            s += " - " + t[1:]
        else:
            s += " + " + t
    return s


# ---------------------------------------------------------------------------
# truncated formal series


@dataclass
class TruncatedSeries:
    """sum_{j >= -cutoff} h_j D^j; coefficients below -cutoff are dropped."""

    rows: int
    cols: int
    cutoff: int
    coeffs: Dict[int, Matrix] = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = {j: m for j, m in self.coeffs.items() if j >= -self.cutoff and not mis_zero(m)}

    def degree(self):
        return max(self.coeffs, default=None)

    def coefficient(self, j: int) -> Matrix:
        return self.coeffs.get(j, mzero(self.rows, self.cols))

    def __sub__(self, other):
        cut = min(self.cutoff, other.cutoff)
        out = dict(self.coeffs)
        for j, m in other.coeffs.items():
            neg = mscale(m, -1)
            out[j] = madd(out[j], neg) if j in out else neg
        return TruncatedSeries(self.rows, self.cols, cut, out)

    def is_zero(self) -> bool:
        return not self.coeffs

    def equals(self, other, down_to: int | None = None) -> bool:
        lo = min(self.cutoff, other.cutoff) if down_to is None else down_to
        diff = self - other
        return all(j < -lo for j in diff.coeffs)

    def multiply(self, other: "TruncatedSeries", cutoff: int) -> "TruncatedSeries":
        """Truncated product self o other keeping degrees >= -cutoff."""
        out: Dict[int, Matrix] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                q = 0
                while i + j - q >= -cutoff:
                    if i >= 0 and q > i:
                        break
                    c = gbinom(i, q)
                    if c:
                        m = mscale(mmul(a, mD(b, q)), c)
                        deg = i + j - q
                        if not mis_zero(m):
                            out[deg] = madd(out[deg], m) if deg in out else m
                    q += 1
        return TruncatedSeries(self.rows, other.cols, cutoff, out)

    def is_identity(self, down_to: int) -> bool:
        ident = TruncatedSeries(self.rows, self.cols, down_to, {0: meye(self.rows)})
        return self.equals(ident, down_to)

    def format(self, names=None, omega_names=None) -> str:
        parts = []
        for j in sorted(self.coeffs, reverse=True):
            m = self.coeffs[j]
            if self.rows == self.cols == 1:
                c = format_expr(m[0][0], names, omega_names)
            else:
                c = "[%s]" % ", ".join("[%s]" % ", ".join(format_expr(a, names, omega_names) for a in row) for row in m)
            parts.append("(%s)*D^%d" % (c, j))
        return " + ".join(parts) if parts else "0"

    def __str__(self):
        return self.format()


def expand_truncated(A: PDOperator, N: int) -> TruncatedSeries:
    """Formal series of A keeping degrees >= -N (tails expanded by the Leibniz rule)."""
    if N < 1:
        raise ValueError("cutoff must be >= 1")
    coeffs: Dict[int, Matrix] = dict(A.diff)
    for t in A.normalized().tails:
        dg = t.right
        for q in range(N):
            m = outer(t.left, dg)
            if q % 2:
                m = mscale(m, -1)
            deg = -1 - q
            coeffs[deg] = madd(coeffs[deg], m) if deg in coeffs else m
            dg = vec_D(dg)
    return TruncatedSeries(A.rows, A.cols, N, coeffs)


def invert_truncated(A, N: int) -> TruncatedSeries:
    """Formal inverse of a nondegenerate operator or series.

    Coefficients are computed down to degree -(N + deg A), which makes
    A o A^-1 = I exact through degree -N.
    """
    series = A if isinstance(A, TruncatedSeries) else None
    m = A.degree()
    if m is None:
        raise DegenerateError("zero operator has no inverse")
    lead = series.coefficient(m) if series else A.leading_matrix()
    if A.rows != A.cols:
        raise DegenerateError("only square operators can be inverted")
    if not mdet(lead):
        raise DegenerateError("leading coefficient is degenerate")
    depth = N + m
    if series is None:
        series = expand_truncated(A, max(depth + m + 1, 1))
    inv_lead = minverse(lead)
    n = A.rows
    B: Dict[int, Matrix] = {-m: inv_lead}
    for k in range(-m - 1, -depth - 1, -1):
        t = k + m
        S = mzero(n, n)
        for j, a in series.coeffs.items():
            for kp, b in B.items():
                q = j + kp - t
                if q < 0 or (j >= 0 and q > j):
                    continue
                c = gbinom(j, q)
                if c:
                    S = madd(S, mscale(mmul(a, mD(b, q)), c))
        B[k] = mscale(mmul(inv_lead, S), -1)
    return TruncatedSeries(n, n, depth, B)


def tail_gram(A: PDOperator):
    """Write the tail tensor sum f (x) g as sum_ij M_ij e_i (x) e_j.

    Returns ``(basis, M)`` with ``basis`` a constant-field basis of the span
    of all left and right factors; requires a square operator.
    """
    tails = A.normalized().tails
    if not tails:
        return [], []
    vecs = [t.left for t in tails] + [t.right for t in tails]
    basis, coeffs = span_basis(vecs)
    k = len(tails)
    d = len(basis)
    M = [[ZERO] * d for _ in range(d)]
    for alpha in range(k):
        a = coeffs[alpha]
        b = coeffs[k + alpha]
        for i in range(d):
            if a[i]:
                for j in range(d):
                    if b[j]:
                        M[i][j] = M[i][j] + a[i] * b[j]
    return basis, M
