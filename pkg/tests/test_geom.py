import pytest

from wnhcalc import DiffExpr, PDOperator, ShapeError, WnlCovector, WnlVector
from wnhcalc.geom import (
    Inconclusive,
    commutator,
    is_zero_functional,
    lie_covector,
    lie_operator,
    lievar_identity_check,
    pairing,
    poisson_bracket,
    reduce_density,
    schouten_eval,
    symplectic_trilinear,
)

u, u1, u2, u3 = [DiffExpr.jet(0, k) for k in range(4)]
v = DiffExpr.jet(1)
w = DiffExpr.jet(2)
D = PDOperator.D(1)


def mul(e):
    return PDOperator.scalar(e)


KDV2 = D.power(3) + mul(2 * u).compose(D) + mul(u1)
DN = mul(u).compose(D) + mul(u1 / 2)
BAD = mul(u1).compose(D) + mul(u2 / 2)


def test_commutator():
    assert commutator([u1], [u3]).is_zero()
    assert commutator([u1], [u * u1]).is_zero()
    assert commutator([u2], [u ** 2]) == WnlVector([-2 * u1 ** 2])
    assert commutator([u ** 2], [u2]) == WnlVector([2 * u1 ** 2])


def test_lie_covector():
    assert lie_covector([u1], [u]).is_zero()
    assert lie_covector([u], [u1]) == WnlCovector([2 * u1])


def test_lievar_identity():
    out = lievar_identity_check([u1], [u])
    assert out["condition_holds"] and out["agree"]
    out = lievar_identity_check([u], [u1])
    # gamma = u_1 has a skew Frechet derivative, so the condition fails
    assert not out["condition_holds"]
    assert out["agree"] is None


def test_lie_operator_translation_invariance():
    assert lie_operator([u1], D.with_variance("V*->V")).is_zero()
    assert lie_operator([u1], KDV2.with_variance("V*->V")).is_zero()


def test_lie_operator_variance_conventions():
    # along the scaling field Q = u every variance picks up its own factor
    Q = [u]
    assert lie_operator(Q, D.with_variance("V*->V")).equals(-2 * D)
    assert lie_operator(Q, D.with_variance("V->V*")).equals(2 * D)
    assert lie_operator(Q, D.with_variance("V->V")).is_zero()
    assert lie_operator(Q, D.with_variance("V*->V*")).is_zero()


def test_lie_operator_kernel_element():
    Q = [u ** 2 / 4 + u1 * DiffExpr.omega(u) / 2]
    assert lie_operator(Q, D.with_variance("V*->V")).is_zero()


def test_lie_operator_needs_variance_and_shape():
    with pytest.raises(ShapeError):
        lie_operator([u], D.with_variance(None))
    with pytest.raises(ShapeError):
        lie_operator([u, v], D.with_variance("V*->V"))


def test_pairing_and_reduction():
    assert pairing([u], [u1]).is_zero()
    assert not pairing([u], [u1 * u2]).is_zero()
    assert not pairing([u1], [u1]).is_zero()
    # omega terms are integrated by parts: int u_1 D^-1(u) = -int u^2
    f = reduce_density(u1 * DiffExpr.omega(u))
    assert f.is_zero() is False
    assert (f + reduce_density(u ** 2)).is_zero()


def test_reduction_inconclusive():
    f = reduce_density(u1 ** 2 * DiffExpr.omega(u1 ** 2))
    assert isinstance(f, Inconclusive)
    assert is_zero_functional(f) is None
    assert "not a total derivative" in f.reason


def test_poisson_bracket():
    assert poisson_bracket(D, u ** 2 / 2, u ** 3 / 6).is_zero()
    f = poisson_bracket(DN, u1 ** 2 / 2, u ** 2 / 2)
    assert f.representative == -3 * u * u1 * u2 / 2
    assert not f.is_zero()
    with pytest.raises(ShapeError):
        poisson_bracket(D.with_variance("V->V*"), u, u)


@pytest.mark.parametrize("H, K", [(D, D), (D, KDV2), (KDV2, KDV2), (DN, DN)])
def test_schouten_vanishes_for_hamiltonian_pairs(H, K):
    assert schouten_eval(H, K, [u], [u1], [u ** 2]).is_zero()
    assert schouten_eval(H, K, [u1], [u ** 3], [u2]).is_zero()


def test_schouten_detects_failure_of_jacobi():
    assert not schouten_eval(BAD, BAD, [u], [u1], [u ** 2]).is_zero()
    # equal arguments always give zero since the form is totally skew
    assert schouten_eval(BAD, BAD, [u], [u], [u]).is_zero()


def test_symplectic_trilinear():
    Jc = PDOperator.from_matrix([[0, 1], [-1, 0]], variance="V->V*")
    assert symplectic_trilinear(Jc, [u, 0], [0, 1], [v, u]).is_zero()
    z = DiffExpr.const(0)
    J3 = PDOperator.from_matrix([[z, w, z], [-w, z, z], [z, z, z]], variance="V->V*")
    f = symplectic_trilinear(J3, [u, 0, 0], [0, 1, 0], [0, 0, 1])
    assert f.representative == -u
    assert not f.is_zero()
    with pytest.raises(ShapeError):
        symplectic_trilinear(J3.with_variance("V*->V"), [u, 0, 0], [0, 1, 0], [0, 0, 1])
