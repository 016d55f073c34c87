"""Lie derivatives, pairings and trilinear forms on (co)vector fields and operators.

Conventions: ``[P, Q] = Q'[P] - P'[Q]``; the covector Lie derivative is
``gamma'[Q] + (Q')^dagger gamma``; operators are dispatched on their variance
tag.  Functionals whose density keeps a nonlocal symbol after integration by
parts are returned as :class:`Inconclusive` instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Union

from .opalg import PDOperator, Tail, ShapeError
from .ring import OMEGA, ONE_MONO, ZERO, DiffExpr, RingError
from .varcalc import (
    FunctionalClass,
    NotExactError,
    UnsupportedIntegration,
    WnlCovector,
    WnlVector,
    antiderivative,
    directional,
    euler,
    frechet,
    is_exact,
)


@dataclass(frozen=True)
class Inconclusive:
    """A functional whose density could not be brought to local form."""

    density: DiffExpr
    reason: str

    def is_zero(self):
        return None

    def __str__(self):
        return "inconclusive: %s (%s)" % (self.reason, self.density)


Functional = Union[FunctionalClass, Inconclusive]


def _vec(Q) -> WnlVector:
    return Q if isinstance(Q, WnlVector) else WnlVector(Q)


def _covec(g) -> WnlCovector:
    return g if isinstance(g, WnlCovector) else WnlCovector(g)


# ---------------------------------------------------------------------------
# vector fields and covectors


def commutator(P, Q) -> WnlVector:
    P, Q = _vec(P), _vec(Q)
    return directional(Q, P) - directional(P, Q)


def lie_covector(Q, gamma) -> WnlCovector:
    """L_Q(gamma) = gamma'[Q] + (Q')^dagger(gamma)."""
    Q, gamma = _vec(Q), _covec(gamma)
    qp = frechet(Q, len(Q)).adjoint()
    return WnlCovector(directional(gamma, Q)) + WnlCovector(qp.apply(gamma))


def lievar_identity_check(Q, gamma) -> dict:
    """Test the condition (gamma')^dagger(Q) = gamma'[Q] and, when it holds,
    compare L_Q(gamma) with the variational derivative of Q . gamma."""
    Q, gamma = _vec(Q), _covec(gamma)
    gp = frechet(gamma, len(gamma))
    defect = WnlCovector(gp.adjoint().apply(Q)) - WnlCovector(directional(gamma, Q))
    out = {"condition_holds": defect.is_zero(), "defect": defect, "lhs": None, "rhs": None, "agree": None}
    if out["condition_holds"]:
        lhs = lie_covector(Q, gamma)
        rhs = euler(Q.dot(gamma), len(Q))
        out.update(lhs=lhs, rhs=rhs, agree=lhs == rhs)
    return out


# ---------------------------------------------------------------------------
# operators


def operator_directional(A: PDOperator, Q) -> PDOperator:
    """A'[Q]: every coefficient differentiated along Q."""
    Q = _vec(Q)
    d = lambda e: directional(e, Q)  # noqa: E731
    diff = {j: tuple(tuple(d(a) for a in row) for row in m) for j, m in A.diff.items()}
    tails = []
    for t in A.tails:
        tails.append(Tail(tuple(d(f) for f in t.left), t.right))
        tails.append(Tail(t.left, tuple(d(g) for g in t.right)))
    return PDOperator(A.rows, A.cols, diff, tails, A.variance).normalized()


def lie_operator(Q, A: PDOperator) -> PDOperator:
    """Lie derivative of an operator along Q, by variance:

    V->V: R'[Q] - (Q' R - R Q');  V*->V*: N'[Q] + (Q'^+ N - N Q'^+);
    V*->V: P'[Q] - Q' P - P Q'^+;  V->V*: J'[Q] + Q'^+ J + J Q'.
    """
    if A.variance is None:
        raise ShapeError("Lie derivative needs an operator with a variance tag")
    Q = _vec(Q)
    n = len(Q)
    if A.rows != n or A.cols != n:
        raise ShapeError("operator of shape %s vs vector field with %d components" % (A.shape, n))
    qp = frechet(Q, n).with_variance("V->V")
    qpt = qp.adjoint()
    Ad = operator_directional(A, Q)
    v = A.variance
    if v == "V->V":
        out = Ad - (qp.compose(A) - A.compose(qp))
    elif v == "V*->V*":
        out = Ad + (qpt.compose(A) - A.compose(qpt))
    elif v == "V*->V":
        out = Ad - qp.compose(A) - A.compose(qpt)
    else:
        out = Ad + qpt.compose(A) + A.compose(qp)
    return out.with_variance(v).normalized()


# ---------------------------------------------------------------------------
# functionals


def _omega_split(e: DiffExpr) -> Dict[tuple, DiffExpr]:
    """{omega monomial: omega-free coefficient} for an expression polynomial in omegas."""
    parts: Dict[tuple, dict] = {}
    for m, c in e.num.items():
        om = tuple(p for p in m if p[0][0] == OMEGA)
        rest = tuple(p for p in m if p[0][0] != OMEGA)
        parts.setdefault(om, {})[rest] = c
    return {om: DiffExpr(p, e.den) for om, p in parts.items()}


def _mono_expr(om) -> DiffExpr:
    out = DiffExpr.const(1)
    for v, k in om:
        out = out * DiffExpr.var(v) ** k
    return out


def reduce_density(e: DiffExpr, max_steps: int = 64) -> Functional:
    """Integrate omega terms by parts until the density is local.

    ``c * m(omega)`` with ``c = D(s)`` becomes ``-s * D(m(omega))``; a
    non-exact coefficient leaves the result inconclusive.
    """
    e = DiffExpr.coerce(e)
    for _ in range(max_steps):
        if not e.has_omega():
            return FunctionalClass(e)
        split = _omega_split(e)
        # highest omega monomial first so that each step lowers the degree
        om = max((k for k in split if k != ONE_MONO), key=lambda k: (sum(p[1] for p in k), k))
        c = split[om]
        m = _mono_expr(om)
        if not is_exact(c):
            return Inconclusive(e, "coefficient of %s is not a total derivative" % m)
        try:
            s = antiderivative(c)
        except (NotExactError, UnsupportedIntegration) as exc:
            return Inconclusive(e, str(exc))
        dm = ZERO
        for v, _ in om:
            dm = dm + m.diff(v) * v[4]
        e = e - c * m - s * dm
    return Inconclusive(e, "integration by parts did not terminate")


def pairing(gamma, Q) -> Functional:
    """Class of int gamma . Q dx."""
    return reduce_density(_covec(gamma).dot(_vec(Q)))


def poisson_bracket(P: PDOperator, F, G) -> Functional:
    """{F, G}_P = int dF/du . P(dG/du) dx."""
    if P.variance not in (None, "V*->V"):
        raise ShapeError("Poisson bracket needs a V*->V operator, got %s" % P.variance)
    F = F if isinstance(F, FunctionalClass) else FunctionalClass(F)
    G = G if isinstance(G, FunctionalClass) else FunctionalClass(G)
    n = P.rows
    dF = F.variational_derivative(n)
    dG = G.variational_derivative(n)
    return reduce_density(dF.dot(P.with_variance("V*->V").apply(dG)))


def _sum_functionals(items) -> Functional:
    total = ZERO
    for f in items:
        if isinstance(f, Inconclusive):
            return f
        total = total + f.representative
    return FunctionalClass(total)


def schouten_eval(H: PDOperator, K: PDOperator, chi1, chi2, chi3) -> Functional:
    """<H L_{K chi1}(chi2), chi3> + <K L_{H chi1}(chi2), chi3> + cyclic permutations."""
    H = H.with_variance("V*->V")
    K = K.with_variance("V*->V")
    chis = [_covec(c) for c in (chi1, chi2, chi3)]
    terms = []
    try:
        for i in range(3):
            a, b, c = chis[i], chis[(i + 1) % 3], chis[(i + 2) % 3]
            for X, Y in ((H, K), (K, H)):
                lie = lie_covector(Y.apply(a), b)
                terms.append(pairing(c, X.apply(lie)))
    except RingError as exc:
        # name the density that blocked the computation when we know it
        return Inconclusive(getattr(exc, "density", None) or ZERO, str(exc))
    return _sum_functionals(terms)


def symplectic_trilinear(J: PDOperator, X1, X2, X3) -> Functional:
    """<J'[X1] X2, X3> + cyclic permutations."""
    if J.variance not in (None, "V->V*"):
        raise ShapeError("symplectic form needs a V->V* operator, got %s" % J.variance)
    J = J.with_variance("V->V*")
    Xs = [_vec(x) for x in (X1, X2, X3)]
    terms = []
    for i in range(3):
        a, b, c = Xs[i], Xs[(i + 1) % 3], Xs[(i + 2) % 3]
        terms.append(pairing(operator_directional(J, a).apply(b), c))
    return _sum_functionals(terms)


def is_zero_functional(f: Functional):
    """True/False for a decided class, None when inconclusive."""
    if isinstance(f, Inconclusive):
        return None
    return f.is_zero()


__all__ = [
    "Inconclusive",
    "commutator",
    "is_zero_functional",
    "lie_covector",
    "lie_operator",
    "lievar_identity_check",
    "operator_directional",
    "pairing",
    "poisson_bracket",
    "reduce_density",
    "schouten_eval",
    "symplectic_trilinear",
]
