"""Session files: declarations of fields, constants, expressions and operators.

Syntax (declarations end with ``;``, ``#`` starts a comment)::

    fields u, v;
    const sq2: sq2^2 = 2;
    expr H1 = (u^2 + v^2)/sq2;
    nonlocal w = D^-1(u);
    vec Y = (-sq2*v, sq2*u);
    covec g = (u_1, v_1);
    op P : V*->V = [[D, 0], [0, D]] + tail((u, v); (u, v));

Jets are ``u``, ``u_1``, ``u_2``...; ``x`` is the independent variable.  In
operator expressions ``*`` is composition, ``D^k`` a power of D and ``D^-1``
the operator 1 (x) D^-1 o 1; ``D(e)``, ``D^k(e)`` and ``D^-1(e)`` applied to
a parenthesised scalar give total derivatives and antiderivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .opalg import PDOperator, ShapeError, Tail, VARIANCES, meye, mscale
from .ring import ONE, ZERO, DiffExpr, RingError, format_expr, total_derivative_n
from .varcalc import WnlCovector, WnlVector, integrate

RESERVED = {"D", "x", "tail", "fields", "const", "expr", "nonlocal", "vec", "covec", "op"}


class SessionError(ValueError):
    """Syntax, name-resolution or shape error, with a source location."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = "line %d, column %d: " % (line, col) if line is not None else ""
        super().__init__(where + message)


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<num>\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<arrow>->)|(?P<op>[-+*/^()\[\],;:=])"
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    out = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SessionError("unexpected character %r" % text[pos], line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# ---------------------------------------------------------------------------
# values


@dataclass
class OpVal:
    op: PDOperator
    literal: bool = False  # explicit matrix literal: never promoted to another size


@dataclass
class VecVal:
    comps: Tuple[DiffExpr, ...]


def promote(op: PDOperator, n: int) -> PDOperator:
    """A 1 x 1 operator acting diagonally on n components."""
    if op.shape == (n, n):
        return op
    if op.shape != (1, 1):
        raise ShapeError("cannot use a %dx%d operator as %dx%d" % (op.rows, op.cols, n, n))
    diff = {j: mscale(meye(n), m[0][0]) for j, m in op.diff.items()}
    tails = []
    for t in op.tails:
        for i in range(n):
            e = [ZERO] * n
            e2 = [ZERO] * n
            e[i] = t.left[0]
            e2[i] = t.right[0]
            tails.append(Tail(tuple(e), tuple(e2)))
    return PDOperator(n, n, diff, tails, op.variance)


@dataclass
class Declaration:
    kind: str
    name: str
    value: object
    variance: Optional[str] = None
    line: int = 0
    col: int = 0


@dataclass
class Session:
    fields: Tuple[str, ...] = ()
    constants: Dict[str, Fraction] = field(default_factory=dict)
    declarations: List[Declaration] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.fields)

    def lookup(self, name: str) -> Declaration:
        for d in self.declarations:
            if d.name == name:
                return d
        raise KeyError(name)

    def names(self):
        return [d.name for d in self.declarations]

    def constant(self, name: str) -> DiffExpr:
        return DiffExpr.sqrt_constant(name, self.constants[name])

    def constant_exprs(self) -> List[DiffExpr]:
        return [self.constant(c) for c in self.constants]

    def omega_names(self) -> Dict[str, str]:
        out = {}
        for d in self.declarations:
            if d.kind == "nonlocal":
                oms = d.value.omegas()
                if len(oms) == 1 and d.value == DiffExpr.var(oms[0]):
                    out[oms[0][3]] = d.name
        return out

    # -- printing -----------------------------------------------------
    def fmt(self, e: DiffExpr, use_names: bool = True) -> str:
        return format_expr(e, self.fields, self.omega_names() if use_names else None)

    def fmt_op(self, op: PDOperator) -> str:
        return op.format(self.fields, self.omega_names())

    def fmt_value(self, v) -> str:
        if isinstance(v, PDOperator):
            return self.fmt_op(v)
        if isinstance(v, OpVal):
            return self.fmt_op(v.op)
        if isinstance(v, (WnlVector, WnlCovector, VecVal, tuple, list)):
            comps = v.comps if isinstance(v, VecVal) else tuple(v)
            return "(%s)" % ", ".join(self.fmt(c) for c in comps)
        return self.fmt(DiffExpr.coerce(v))

    def __eq__(self, other):
        if not isinstance(other, Session):
            return NotImplemented
        if self.fields != other.fields or self.constants != other.constants:
            return False
        if len(self.declarations) != len(other.declarations):
            return False
        for a, b in zip(self.declarations, other.declarations):
            if (a.kind, a.name, a.variance) != (b.kind, b.name, b.variance):
                return False
            if a.kind == "op":
                if not a.value.equals(b.value):
                    return False
            elif a.value != b.value:
                return False
        return True


def print_session(s: Session) -> str:
    """Canonical text of a session; parse_session(print_session(s)) == s."""
    lines = []
    if s.fields:
        lines.append("fields %s;" % ", ".join(s.fields))
    for name, sq in s.constants.items():
        lines.append("const %s: %s^2 = %s;" % (name, name, sq))
    shown = Session(s.fields, s.constants, [])
    for d in s.declarations:
        if d.kind == "expr":
            lines.append("expr %s = %s;" % (d.name, shown.fmt(d.value)))
        elif d.kind == "nonlocal":
            lines.append("nonlocal %s = %s;" % (d.name, shown.fmt(d.value)))
        elif d.kind in ("vec", "covec"):
            lines.append("%s %s = (%s);" % (d.kind, d.name, ", ".join(shown.fmt(c) for c in d.value)))
        elif d.kind == "op":
            lines.append("op %s : %s = %s;" % (d.name, d.variance, shown.fmt_op(d.value)))
        shown.declarations.append(d)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# expression parser


class _Parser:
    def __init__(self, tokens: List[Token], session: Session):
        self.toks = tokens
        self.i = 0
        self.s = session

    # -- token helpers --------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return SessionError(msg, tok.line, tok.col)

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "arrow", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise self.error("expected %r, found %r" % (text, found))
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected a name, found %r" % (self.tok.text or "end of input"))
        t = self.tok
        self.i += 1
        return t

    # -- grammar ------------------------------------------------------
    def expr(self):
        v = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op_tok = self.tok
            self.i += 1
            w = self.term()
            v = self.combine(v, w, op_tok.text, op_tok)
        return v

    def term(self):
        v = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op_tok = self.tok
            self.i += 1
            w = self.unary()
            v = self.combine(v, w, op_tok.text, op_tok)
        return v

    def unary(self):
        if self.tok.text == "-" and self.tok.kind == "op":
            t = self.tok
            self.i += 1
            return self.combine(DiffExpr.const(-1), self.unary(), "*", t)
        if self.tok.text == "+" and self.tok.kind == "op":
            self.i += 1
            return self.unary()
        return self.power()

    def int_exponent(self) -> int:
        sign = -1 if self.accept("-") else 1
        if self.tok.kind != "num":
            raise self.error("expected an integer exponent")
        k = int(self.tok.text)
        self.i += 1
        return sign * k

    def power(self):
        if self.tok.kind == "ident" and self.tok.text == "D":
            return self.d_form()
        base_tok = self.tok
        v = self.atom()
        if self.accept("^"):
            k = self.int_exponent()
            if isinstance(v, DiffExpr):
                try:
                    return v ** k
                except (RingError, ZeroDivisionError) as exc:
                    raise self.error(str(exc), base_tok) from None
            if isinstance(v, OpVal):
                if k < 0:
                    raise self.error("negative powers of operators are not supported", base_tok)
                out = PDOperator.identity(v.op.rows)
                for _ in range(k):
                    out = out.compose(v.op)
                return OpVal(out, v.literal)
            raise self.error("cannot raise this value to a power", base_tok)
        return v

    def d_form(self):
        t = self.tok
        self.i += 1
        k = 1
        if self.accept("^"):
            k = self.int_exponent()
        if self.tok.text == "(" and self.tok.kind == "op":
            self.i += 1
            arg = self.expr()
            self.expect(")")
            if not isinstance(arg, DiffExpr):
                raise self.error("D(...) applies to scalar expressions", t)
            if k >= 0:
                return total_derivative_n(arg, k)
            if k == -1:
                try:
                    return integrate(arg, allow_new=True)
                except RingError as exc:
                    raise self.error(str(exc), t) from None
            raise self.error("only D^-1 may be applied to an expression", t)
        if k >= 0:
            return OpVal(PDOperator.D(1, k))
        inv = PDOperator.dinv(1)
        out = inv
        try:
            for _ in range(-k - 1):
                out = out.compose(inv)
        except RingError as exc:
            raise self.error(str(exc), t) from None
        return OpVal(out)

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return DiffExpr.const(int(t.text))
        if t.kind == "ident":
            if t.text == "tail":
                return self.tail()
            self.i += 1
            return self.resolve(t)
        if t.text == "(":
            self.i += 1
            v = self.expr()
            if self.tok.text == ",":
                comps = [v]
                while self.accept(","):
                    comps.append(self.expr())
                self.expect(")")
                return VecVal(tuple(self.scalar(c, t) for c in comps))
            self.expect(")")
            return v
        if t.text == "[":
            return self.matrix()
        raise self.error("unexpected %r" % (t.text or "end of input"))

    def scalar(self, v, tok) -> DiffExpr:
        if isinstance(v, DiffExpr):
            return v
        raise self.error("expected a scalar expression", tok)

    def expr_list(self) -> List[DiffExpr]:
        self.expect("(")
        out = []
        t = self.tok
        out.append(self.scalar(self.expr(), t))
        while self.accept(","):
            t = self.tok
            out.append(self.scalar(self.expr(), t))
        self.expect(")")
        return out

    def tail(self):
        t = self.tok
        self.i += 1
        self.expect("(")
        left = self.expr_list()
        self.expect(";")
        right = self.expr_list()
        self.expect(")")
        if not any(left) or not any(right):
            return OpVal(PDOperator.zero(len(left), len(right)), True)
        try:
            return OpVal(PDOperator.tail(left, right), True)
        except ValueError as exc:
            raise self.error(str(exc), t) from None

    def matrix(self):
        t = self.tok
        self.expect("[")
        rows = []
        while True:
            rt = self.tok
            self.expect("[")
            row = [self.expr()]
            while self.accept(","):
                row.append(self.expr())
            self.expect("]")
            rows.append((row, rt))
            if not self.accept(","):
                break
        self.expect("]")
        ncols = len(rows[0][0])
        for row, rt in rows:
            if len(row) != ncols:
                raise self.error("matrix rows have different lengths", rt)
        r = len(rows)
        diff: Dict[int, list] = {}
        tails = []
        for i, (row, _) in enumerate(rows):
            for k, entry in enumerate(row):
                op = self.as_op(entry, t)
                if op.shape != (1, 1):
                    raise self.error("matrix entries must be scalar operators", t)
                for j, m in op.diff.items():
                    mat = diff.setdefault(j, [[ZERO] * ncols for _ in range(r)])
                    mat[i][k] = mat[i][k] + m[0][0]
                for tl in op.tails:
                    left = [ZERO] * r
                    right = [ZERO] * ncols
                    left[i] = tl.left[0]
                    right[k] = tl.right[0]
                    tails.append(Tail(tuple(left), tuple(right)))
        mats = {j: tuple(tuple(row) for row in m) for j, m in diff.items()}
        return OpVal(PDOperator(r, ncols, mats, tails), True)

    def as_op(self, v, tok) -> PDOperator:
        if isinstance(v, OpVal):
            return v.op
        if isinstance(v, DiffExpr):
            return PDOperator.scalar(v, 1)
        raise self.error("expected an operator", tok)

    def resolve(self, t: Token):
        name = t.text
        s = self.s
        if name == "x":
            return DiffExpr.x()
        if name == "sqrt" and name not in s.constants:
            raise self.error("sqrt is outside the differential ring; declare a constant such as 'const sq2: sq2^2 = 2;'", t)
        m = re.fullmatch(r"(.+?)(?:_(\d+))?", name)
        base, order = m.group(1), m.group(2)
        if base in s.fields:
            return DiffExpr.jet(s.fields.index(base), int(order) if order else 0)
        if name in s.fields:
            return DiffExpr.jet(s.fields.index(name), 0)
        if name in s.constants:
            return s.constant(name)
        for d in s.declarations:
            if d.name == name:
                if d.kind in ("expr", "nonlocal"):
                    return d.value
                if d.kind in ("vec", "covec"):
                    return VecVal(tuple(d.value))
                if d.kind == "op":
                    return OpVal(d.value.with_variance(None), True)
        raise self.error("unknown identifier %r" % name, t)

    def combine(self, a, b, opname, tok):
        try:
            return self._combine(a, b, opname, tok)
        except (ShapeError, RingError, ZeroDivisionError) as exc:
            if isinstance(exc, SessionError):
                raise
            raise self.error(str(exc), tok) from None

    def _combine(self, a, b, opname, tok):
        if isinstance(a, DiffExpr) and isinstance(b, DiffExpr):
            if opname == "+":
                return a + b
            if opname == "-":
                return a - b
            if opname == "*":
                return a * b
            if not b:
                raise self.error("division by zero", tok)
            return a / b
        if isinstance(a, VecVal) or isinstance(b, VecVal):
            if opname in "+-" and isinstance(a, VecVal) and isinstance(b, VecVal):
                if len(a.comps) != len(b.comps):
                    raise self.error("vector lengths differ", tok)
                sign = 1 if opname == "+" else -1
                return VecVal(tuple(x + sign * y for x, y in zip(a.comps, b.comps)))
            if opname == "*" and isinstance(a, DiffExpr):
                return VecVal(tuple(a * y for y in b.comps))
            if opname in "*/" and isinstance(b, DiffExpr) and isinstance(a, VecVal):
                return VecVal(tuple(x * b if opname == "*" else x / b for x in a.comps))
            raise self.error("unsupported vector operation %r" % opname, tok)
        if opname == "/":
            raise self.error("operators cannot be divided", tok)
        A = a if isinstance(a, OpVal) else OpVal(self.as_op(a, tok))
        B = b if isinstance(b, OpVal) else OpVal(self.as_op(b, tok))
        pa, pb = A.op, B.op
        if opname in "+-":
            if pa.shape != pb.shape:
                if pa.shape == (1, 1) and not A.literal and pb.rows == pb.cols:
                    pa = promote(pa, pb.rows)
                elif pb.shape == (1, 1) and not B.literal and pa.rows == pa.cols:
                    pb = promote(pb, pa.rows)
                else:
                    raise self.error("cannot add %dx%d and %dx%d operators" % (pa.rows, pa.cols, pb.rows, pb.cols), tok)
            out = pa + pb if opname == "+" else pa - pb
            return OpVal(out, A.literal or B.literal)
        if pa.cols != pb.rows:
            if pa.shape == (1, 1) and not A.literal:
                pa = promote(pa, pb.rows)
            elif pb.shape == (1, 1) and not B.literal:
                pb = promote(pb, pa.cols)
            else:
                raise self.error("cannot compose %dx%d with %dx%d" % (pa.rows, pa.cols, pb.rows, pb.cols), tok)
        return OpVal(pa.compose(pb), A.literal or B.literal)


def _norm_variance(text: str, tok: Token) -> str:
    v = text.replace("Vs", "V*").replace(" ", "")
    if v not in VARIANCES:
        raise SessionError("unknown variance %r (use V->V, V->V*, V*->V or V*->V*)" % text, tok.line, tok.col)
    return v


def parse_session(text: str) -> Session:
    toks = tokenize(text)
    s = Session()
    p = _Parser(toks, s)
    seen = set()

    def declare(name_tok):
        if name_tok.text in RESERVED:
            raise SessionError("%r is reserved" % name_tok.text, name_tok.line, name_tok.col)
        if name_tok.text in seen:
            raise SessionError("duplicate name %r" % name_tok.text, name_tok.line, name_tok.col)
        seen.add(name_tok.text)

    while p.tok.kind != "eof":
        kw = p.ident()
        if kw.text == "fields":
            if s.fields:
                raise SessionError("fields declared twice", kw.line, kw.col)
            names = [p.ident()]
            while p.accept(","):
                names.append(p.ident())
            for t in names:
                declare(t)
            s.fields = tuple(t.text for t in names)
        elif kw.text == "const":
            name = p.ident()
            declare(name)
            p.expect(":")
            again = p.ident()
            if again.text != name.text:
                raise SessionError("relation must be %s^2 = q" % name.text, again.line, again.col)
            p.expect("^")
            two = p.tok
            if p.int_exponent() != 2:
                raise SessionError("only square roots are supported", two.line, two.col)
            p.expect("=")
            vt = p.tok
            val = p.expr()
            q = val.as_fraction() if isinstance(val, DiffExpr) else None
            if q is None or q == 0:
                raise SessionError("constant relation needs a nonzero rational", vt.line, vt.col)
            s.constants[name.text] = q
        elif kw.text in ("expr", "nonlocal", "vec", "covec", "op"):
            if not s.fields:
                raise SessionError("declare fields first", kw.line, kw.col)
            name = p.ident()
            declare(name)
            variance = None
            if kw.text == "op":
                variance = "V*->V"
                if p.accept(":"):
                    vt = p.tok
                    parts = []
                    while p.tok.text != "=" and p.tok.kind != "eof":
                        parts.append(p.tok.text)
                        p.i += 1
                    variance = _norm_variance("".join(parts), vt)
            p.expect("=")
            vt = p.tok
            val = p.expr()
            value = _check_decl(kw.text, name.text, val, s, vt, variance)
            s.declarations.append(Declaration(kw.text, name.text, value, variance, name.line, name.col))
        else:
            raise SessionError("unknown declaration %r" % kw.text, kw.line, kw.col)
        p.expect(";")
    return s


def _check_decl(kind, name, val, s: Session, tok: Token, variance):
    n = s.n
    if kind in ("expr", "nonlocal"):
        if not isinstance(val, DiffExpr):
            raise SessionError("%s %s must be a scalar expression" % (kind, name), tok.line, tok.col)
        if kind == "nonlocal" and not val.has_omega():
            raise SessionError("nonlocal %s is local: %s" % (name, s.fmt(val)), tok.line, tok.col)
        return val
    if kind in ("vec", "covec"):
        if isinstance(val, DiffExpr) and n == 1:
            comps = (val,)
        elif isinstance(val, VecVal):
            comps = val.comps
        else:
            raise SessionError("%s %s must be a tuple" % (kind, name), tok.line, tok.col)
        if len(comps) != n:
            raise SessionError("%s %s has %d components but the session has %d fields"
                               % (kind, name, len(comps), n), tok.line, tok.col)
        return WnlVector(comps) if kind == "vec" else WnlCovector(comps)
    if isinstance(val, DiffExpr):
        val = OpVal(PDOperator.scalar(val, 1))
    if not isinstance(val, OpVal):
        raise SessionError("op %s must be an operator" % name, tok.line, tok.col)
    op = val.op
    if op.shape != (n, n):
        if op.shape == (1, 1) and not val.literal:
            op = promote(op, n)
        else:
            raise SessionError("shape mismatch: op %s is %dx%d but the session has %d field%s"
                               % (name, op.rows, op.cols, n, "" if n == 1 else "s"), tok.line, tok.col)
    return op.with_variance(variance).normalized()


def parse_value(text: str, session: Session):
    """Evaluate a standalone expression (scalar, tuple or operator) in a session."""
    toks = tokenize(text)
    p = _Parser(toks, session)
    v = p.expr()
    if p.tok.kind != "eof":
        raise p.error("unexpected %r" % p.tok.text)
    return v


def value_as_operator(v, session: Session, variance=None) -> PDOperator:
    n = session.n
    if isinstance(v, DiffExpr):
        v = OpVal(PDOperator.scalar(v, 1))
    if not isinstance(v, OpVal):
        raise SessionError("expected an operator")
    op = v.op
    if op.shape != (n, n):
        if op.shape == (1, 1) and not v.literal:
            op = promote(op, n)
        else:
            raise SessionError("operator is %dx%d but the session has %d fields" % (op.rows, op.cols, n))
    return op.with_variance(variance)


def value_as_tuple(v, session: Session) -> Tuple[DiffExpr, ...]:
    if isinstance(v, DiffExpr) and session.n == 1:
        return (v,)
    if isinstance(v, VecVal) and len(v.comps) == session.n:
        return v.comps
    raise SessionError("expected a tuple with %d components" % session.n)


__all__ = [
    "Declaration",
    "ONE",
    "OpVal",
    "Session",
    "SessionError",
    "VecVal",
    "parse_session",
    "parse_value",
    "print_session",
    "promote",
    "tokenize",
    "value_as_operator",
    "value_as_tuple",
]
