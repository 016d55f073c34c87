"""Randomized algebraic laws.  Each ``prop_*`` is a hypothesis test that bumps
CASES once per example, so callers can count how many cases actually ran."""

from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from strategies import diff_ops, polys, wnl_ops
from wnhcalc import (
    DiffExpr,
    PDOperator,
    WnlCovector,
    euler,
    expand_truncated,
    reconstruct_density,
    symplectic_trilinear,
    total_derivative,
)
from wnhcalc.certify import potential_operator

CASES = {"n": 0}

fast = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
slow = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)


def _tick():
    CASES["n"] += 1


@fast
@given(polys(2, with_x=True), polys(2, with_x=True))
def prop_derivation_law(f, g):
    _tick()
    assert total_derivative(f * g) == total_derivative(f) * g + f * total_derivative(g)


@fast
@given(polys(2, with_x=True))
def prop_euler_kills_image(f):
    _tick()
    assert euler(total_derivative(f), 2).is_zero()


@fast
@given(polys(2, max_order=2))
def prop_helmholtz_roundtrip(f):
    _tick()
    w = euler(f, 2)
    assert euler(reconstruct_density(w), 2) == w


@fast
@given(wnl_ops(1))
def prop_adjoint_involution(A):
    _tick()
    assert A.adjoint().adjoint().equals(A)


@fast
@given(st.one_of(wnl_ops(1), diff_ops(1)), diff_ops(1), st.booleans())
def prop_adjoint_antihomomorphism(A, B, swap):
    _tick()
    if swap:
        A, B = B, A
    assert A.compose(B).adjoint().equals(B.adjoint().compose(A.adjoint()))


@fast
@given(diff_ops(1), diff_ops(1), st.one_of(wnl_ops(1), diff_ops(1)), st.booleans())
def prop_associativity(A, B, C, swap):
    _tick()
    if swap:
        A, C = C, A
    assert A.compose(B).compose(C).equals(A.compose(B.compose(C)))


@fast
@given(diff_ops(1), wnl_ops(1), st.booleans(), st.integers(1, 4))
def prop_expand_commutes_with_compose(A, B, swap, N):
    _tick()
    if swap:
        A, B = B, A
    da = max(A.degree() or 0, 0)
    db = max(B.degree() or 0, 0)
    lhs = expand_truncated(A.compose(B), N)
    rhs = expand_truncated(A, N + db + 1).multiply(expand_truncated(B, N + da + 1), N)
    assert lhs.equals(rhs, -N)


@slow
@given(st.lists(polys(2, max_order=1, max_degree=3), min_size=2, max_size=2),
       st.data())
def prop_trilinear_vanishes_on_potentials(gamma, data):
    J = potential_operator(WnlCovector(gamma))
    assume(not J.is_zero())
    _tick()
    Xs = [tuple(data.draw(polys(2, max_order=1, max_degree=2, max_terms=2)) for _ in range(2)) for _ in range(3)]
    assert symplectic_trilinear(J, *Xs).is_zero()


PROPERTIES = [
    prop_derivation_law,
    prop_euler_kills_image,
    prop_helmholtz_roundtrip,
    prop_adjoint_involution,
    prop_adjoint_antihomomorphism,
    prop_associativity,
    prop_expand_commutes_with_compose,
    prop_trilinear_vanishes_on_potentials,
]


def invert_identity_cases():
    """(name, operator) pairs whose truncated inverse must compose back to 1."""
    u, u1 = DiffExpr.jet(0), DiffExpr.jet(0, 1)
    D = PDOperator.D(1)
    kdv = D.power(3) + PDOperator.scalar(2 * u).compose(D) + PDOperator.scalar(u1)
    dn = PDOperator.scalar(u).compose(D) + PDOperator.scalar(u1 / 2)
    return [("D^3 + 2uD + u_1", kdv), ("uD + u_1/2", dn)]
