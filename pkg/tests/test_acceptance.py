"""Acceptance suite: one group of checks per criterion, all exact.

Run with pytest for the per-criterion PASS/FAIL summary, or directly with
``python3 tests/test_acceptance.py`` for the same lines without pytest.
"""

import random
import time

import pytest

import props
from wnhcalc import DiffExpr, PDOperator, WnlCovector, WnlVector, euler, integrate
from wnhcalc.certify import (
    CompatibilityCertificate,
    Refuted,
    SymplecticCertificate,
    casimir_check,
    compatibility_certificate,
    dn_validate,
    homotopy_potential,
    jpj_decompose,
    potential_operator,
    symplectic_from_densities,
    wnl_symplectic_certificate,
)
from wnhcalc.geom import lie_operator
from wnhcalc.opalg import Tail, invert_truncated, meye, mscale

u, u1, u2, u3, u4 = [DiffExpr.jet(0, k) for k in range(5)]
v, v1 = DiffExpr.jet(1), DiffExpr.jet(1, 1)
w = DiffExpr.jet(2)
D = PDOperator.D(1)
sq2 = DiffExpr.sqrt_constant("sq2", 2)


def op(*terms, variance="V*->V"):
    out = PDOperator.zero(1, 1)
    for t in terms:
        out = out + t
    return out.with_variance(variance)


def mul(e):
    return PDOperator.scalar(e)


P = D.with_variance("V*->V")
KDV2 = op(D.power(3), mul(2 * u).compose(D), mul(u1))
TAU = -(u ** 2 + u2) / 2


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, "took %.2fs (limit %ss)" % (self.elapsed, self.limit)


# 1 -------------------------------------------------------------------------


@pytest.mark.criterion(1, "KdV Lie derivative L_tau(D) = D^3 + 2uD + u_1")
def test_c1_kdv_lie_derivative():
    with Timer(1):
        L = lie_operator([TAU], P)
        assert L.equals(KDV2)
        assert L.format(("u",)) == "[[D^3 + 2*u*D + u_1]]"


# 2 -------------------------------------------------------------------------

TAU2_PRINTED = -u4 / 2 - u1 ** 2 / 2 + DiffExpr.const(5) * u ** 3 / 6
TAU2_DERIVED = -u4 / 2 - 2 * u * u2 - 3 * u1 ** 2 / 2 - u ** 3 / 2


@pytest.mark.criterion(2, "KdV second order L_tau(L_tau(D)) = L_tau~(D)")
@pytest.mark.xfail(strict=True, reason="the stated tau~ gives D^5 - (5u^2 + 2u_2)D - 5uu_1 - u_3, "
                                      "which lacks the 4uD^3 term of L_tau(L_tau(D)); see the decisions ledger")
def test_c2_second_order_stated_tau():
    with Timer(1):
        lhs = lie_operator([TAU], lie_operator([TAU], P))
        rhs = lie_operator([TAU2_PRINTED], P)
        assert lhs.equals(rhs)


@pytest.mark.criterion(2, "KdV second order L_tau(L_tau(D)) = L_tau~(D)")
def test_c2_second_order_derived_tau():
    # the weight-6 local tau~ that does satisfy the identity
    with Timer(1):
        lhs = lie_operator([TAU], lie_operator([TAU], P))
        assert lhs.equals(op(D.power(5), mul(4 * u).compose(D.power(3)), mul(6 * u1).compose(D.power(2)),
                             mul(3 * u ** 2 + 4 * u2).compose(D), mul(3 * u * u1 + u3)))
        assert lie_operator([TAU2_DERIVED], P).equals(lhs)
        assert not lie_operator([TAU2_PRINTED], P).equals(lhs)


# 3 -------------------------------------------------------------------------


def _nls():
    J = PDOperator.from_matrix([[0, 1], [-1, 0]], variance="V->V*")
    Pinv = PDOperator.from_matrix([[0, -1], [1, 0]], variance="V*->V")
    Y1 = (-sq2 * v, sq2 * u)
    Pt = PDOperator(2, 2, {1: meye(2)}, [Tail(Y1, Y1)], "V*->V")
    return J, Pinv, Pt, Y1


@pytest.mark.criterion(3, "NLS pipeline: J P~ J decomposition and L_tau(J^-1) = P~")
def test_c3_nls_pipeline():
    with Timer(5):
        J, Pinv, Pt, Y1 = _nls()
        # the literal matrix form of P~ agrees with diag(D, D) + Y1 (x) D^-1 o Y1
        Dv = PDOperator.D(1)
        lit = [[Dv + PDOperator.tail([2 * v], [v]), PDOperator.tail([-2 * v], [u])],
               [PDOperator.tail([-2 * u], [v]), Dv + PDOperator.tail([2 * u], [u])]]
        assert Pt.equals(_assemble(lit).with_variance("V*->V"))

        H1 = (u ** 2 + v ** 2) / sq2
        dH1 = tuple(euler(H1, 2))
        assert dH1 == (sq2 * u, sq2 * v)
        target = PDOperator(2, 2, {1: mscale(meye(2), -1)}, [Tail(tuple(-x for x in dH1), dH1)], "V->V*")
        dec = jpj_decompose(J, Pt)
        assert dec.jpj.equals(target)
        assert dec.tails_match
        assert dec.residual.is_zero()
        [(eps1, Y, H)] = dec.h_data
        assert (eps1, tuple(Y), H) == (1, Y1, H1)

        cert = compatibility_certificate(Pinv, Pt, J)
        assert isinstance(cert, CompatibilityCertificate)
        assert cert.residual.is_zero()
        wH = integrate(H1)
        expected_tau = WnlVector((-v1 / 2, u1 / 2)) + WnlVector(tuple(y * wH / 2 for y in Y1))
        assert cert.tau == expected_tau
        # binding check: the operator identity itself
        assert lie_operator(cert.tau, Pinv).equals(Pt)
        # the potential's local part from the homotopy integral
        assert dec.gamma0 == WnlCovector((-u1 / 2, -v1 / 2))


def _assemble(entries):
    n = len(entries)
    out = PDOperator.zero(n, n)
    for i, row in enumerate(entries):
        for k, e in enumerate(row):
            left = PDOperator.from_matrix([[1 if a == i else 0] for a in range(n)])
            right = PDOperator.from_matrix([[1 if b == k else 0 for b in range(n)]])
            out = out + left.compose(e).compose(right)
    return out


# 4 -------------------------------------------------------------------------


@pytest.mark.criterion(4, "homotopy formula for J = D gives zeta = u_1/2")
def test_c4_homotopy():
    with Timer(1):
        pot = homotopy_potential(D.with_variance("V->V*"))
        assert pot.zeta == WnlCovector([u1 / 2])
        assert potential_operator(pot.zeta).equals(D.with_variance("V->V*"))
        assert pot.residual.is_zero()


# 5 -------------------------------------------------------------------------


@pytest.mark.criterion(5, "KdV nonlocal route through J = 1 (x) D^-1 o 1")
def test_c5_kdv_nonlocal_route():
    with Timer(5):
        J = PDOperator.dinv(1, "V->V*")
        dec = jpj_decompose(J, KDV2)
        expected = op(D, PDOperator.tail([u], [1]), PDOperator.tail([1], [u]), variance="V->V*")
        assert dec.jpj.equals(expected)
        assert [K for _, _, K in dec.psi_data] == [u ** 2 / 2]
        cert = compatibility_certificate(P, KDV2, J)
        assert isinstance(cert, CompatibilityCertificate)
        tau = WnlVector([-u2 / 2 - 3 * u ** 2 / 4 - u1 * DiffExpr.omega(u) / 2])
        assert cert.tau == tau
        assert lie_operator(tau, P).equals(KDV2)
        Q = WnlVector([u ** 2 / 4 + u1 * DiffExpr.omega(u) / 2])
        assert lie_operator(Q, P).is_zero()


# 6 -------------------------------------------------------------------------


@pytest.mark.criterion(6, "property suites, at least 500 randomized exact cases")
def test_c6_property_suites():
    with Timer(60):
        start = props.CASES["n"]
        for prop in props.PROPERTIES:
            prop()
        ran = props.CASES["n"] - start
        for _, A in props.invert_identity_cases():
            inv = invert_truncated(A, 8)
            deg = A.degree()
            prod = A.expand(8 + 1).multiply(inv, 8 + deg)
            assert prod.is_identity(8)
        assert ran >= 500, ran


# 7 -------------------------------------------------------------------------


def _random_density(rng, n):
    # zero-order densities in any number of fields, or first-order ones in a
    # single field: the classes on which the tail formula is closed
    if n == 1:
        pool = [DiffExpr.jet(0), DiffExpr.jet(0, 1)]
    else:
        pool = [DiffExpr.jet(a) for a in range(n)]
    out = DiffExpr.const(0)
    for _ in range(rng.randint(1, 3)):
        m = DiffExpr.const(rng.choice([-3, -2, -1, 1, 2, 3])) / rng.choice([1, 2, 3])
        for _ in range(rng.randint(1, 4)):
            m = m * rng.choice(pool)
        out = out + m
    return out


def tail_sum_cases(count=20, seed=20240611):
    rng = random.Random(seed)
    cases = []
    while len(cases) < count:
        n = rng.choice([1, 1, 2, 3])
        psis = [_random_density(rng, n) for _ in range(rng.randint(1, 2))]
        eps = [rng.choice([1, -1]) for _ in psis]
        try:
            J = symplectic_from_densities(psis, eps, n)
        except ValueError:
            continue  # vanishing or dependent variational derivatives
        cases.append((psis, eps, J))
    return cases


@pytest.mark.criterion(7, "random sums eps dpsi/du (x) D^-1 o dpsi/du certified symplectic")
def test_c7_random_tail_sums_certified():
    cases = tail_sum_cases()
    assert len(cases) == 20
    for psis, eps, J in cases:
        cert = wnl_symplectic_certificate(J, densities=psis)
        assert isinstance(cert, SymplecticCertificate), (psis, eps, cert)
        assert cert.residual.is_zero()
        assert [e for e, _ in cert.tail_data] == eps
        assert potential_operator(cert.gamma).equals(J)
        # same verdict when the densities are reconstructed from the tails
        auto = wnl_symplectic_certificate(J)
        assert isinstance(auto, SymplecticCertificate) and auto.residual.is_zero()


# 8 -------------------------------------------------------------------------


@pytest.mark.criterion(8, "Dubrovin-Novikov validation and flatness")
def test_c8_dubrovin_novikov():
    with Timer(5):
        one, zero = DiffExpr.const(1), DiffExpr.const(0)
        flat = dn_validate([[one, zero], [zero, one]])
        assert flat.flat
        assert all(b == 0 for plane in flat.b for row in plane for b in row)
        assert flat.operator.equals(PDOperator(2, 2, {1: meye(2)}, (), "V*->V"))

        scalar = dn_validate([[u]])
        assert scalar.b == (((DiffExpr.const(1) / 2,),),)
        assert scalar.flat
        assert scalar.operator.equals(op(mul(u).compose(D), mul(u1 / 2)))

        curved = dn_validate([[one, zero], [zero, 1 + u ** 2]])
        assert not curved.flat
        assert curved.curvature[(0, 1, 0, 1)] == (1 - 2 * u ** 2) / (1 + u ** 2) ** 3
        assert curved.curvature[(0, 1, 0, 1)] != 0


# 9 -------------------------------------------------------------------------


@pytest.mark.criterion(9, "negative controls: non-closed 2-form and a non-Casimir")
def test_c9_negative_controls():
    with Timer(1):
        z = DiffExpr.const(0)
        J = PDOperator.from_matrix([[z, w, z], [-w, z, z], [z, z, z]], variance="V->V*")
        res = wnl_symplectic_certificate(J)
        assert isinstance(res, Refuted)
        assert not res.residual.is_zero()
        [c] = casimir_check(KDV2, [u])
        assert c.is_casimir is False
        assert c.witness == WnlVector([u1])


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
