import pytest

from wnhcalc import DiffExpr, PDOperator, total_derivative
from wnhcalc.opalg import Tail
from wnhcalc.varcalc import (
    FunctionalClass,
    NotExactError,
    WnlCovector,
    WnlVector,
    antiderivative,
    directional,
    euler,
    frechet,
    helmholtz_is_variational,
    higher_euler,
    integrate,
    is_exact,
    reconstruct_density,
    reduce_mod_image,
)

u, u1, u2, u3 = [DiffExpr.jet(0, k) for k in range(4)]
v, v1, v2 = [DiffExpr.jet(1, k) for k in range(3)]
x = DiffExpr.x()
sq2 = DiffExpr.sqrt_constant("sq2", 2)
H1 = (u ** 2 + v ** 2) / sq2
w = DiffExpr.omega(u)


def test_frechet_local():
    F = frechet(u ** 2 + u2)
    assert F.equals(PDOperator.scalar(2 * u) + PDOperator.D(1, 2))


def test_frechet_of_nls_density_is_a_row():
    F = frechet(H1, 2)
    assert F.shape == (1, 2)
    assert F.equals(PDOperator.from_matrix([[sq2 * u, sq2 * v]]))


def test_frechet_of_nonlocal_element():
    # (u_1 w)' = w D + u_1 (x) D^-1 o 1  where D(w) = u
    F = frechet(u1 * w)
    assert F.equals(PDOperator.scalar(w).compose(PDOperator.D(1)) + PDOperator.tail([u1], [1]))


@pytest.mark.parametrize("f, Q, expected", [
    (u ** 2, u1, 2 * u * u1),
    (u2, u1, u3),
    (u1 * w, u, 2 * u1 * w),
])
def test_directional(f, Q, expected):
    assert directional(f, WnlVector([Q])) == expected


def test_euler():
    assert euler(u1 ** 2 / 2) == WnlCovector([-u2])
    assert euler(H1, 2) == WnlCovector([sq2 * u, sq2 * v])
    assert euler(total_derivative(u * u1), 1).is_zero()


def test_higher_euler():
    assert higher_euler(u1 ** 2, 0, 1) == 2 * u1
    assert higher_euler(u1 ** 2, 0, 0) == -2 * u2
    assert higher_euler(u * u2, 0, 2) == u


def test_is_exact():
    assert is_exact(u * u1)
    assert not is_exact(u1 ** 2)
    Y1 = (-sq2 * v, sq2 * u)
    dH = euler(H1, 2)
    assert is_exact(Y1[0] * dH[0] + Y1[1] * dH[1])


@pytest.mark.parametrize("f, F", [
    (u * u1, u ** 2 / 2),
    (u3, u2),
    (3 * u * u1, 3 * u ** 2 / 2),
    (u3 + 3 * u * u1, u2 + 3 * u ** 2 / 2),
    (u1 * v + u * v1, u * v),
    (x * u1 + u, x * u),
])
def test_antiderivative(f, F):
    assert antiderivative(f) == F


def test_antiderivative_rejects_inexact():
    with pytest.raises(NotExactError):
        antiderivative(u1 ** 2)


def test_helmholtz():
    assert helmholtz_is_variational(WnlCovector([u, v]))
    assert reconstruct_density(WnlCovector([u, v])) == (u ** 2 + v ** 2) / 2
    assert helmholtz_is_variational(WnlCovector([sq2 * u, sq2 * v]))
    assert reconstruct_density(WnlCovector([sq2 * u, sq2 * v])) == H1
    assert not helmholtz_is_variational(WnlCovector([u1]))


def test_reduce_mod_image_canonical_remainders():
    R, g = reduce_mod_image(u * u2)
    assert (R, g) == (-u1 ** 2, u * u1)
    R, g = reduce_mod_image(x * u1)
    assert (R, g) == (-u, x * u)


def test_integrate_to_canonical_symbols():
    assert integrate(u * u1) == u ** 2 / 2
    assert integrate(u * u2) == u * u1 - DiffExpr.omega(u1 ** 2)
    assert integrate(u * v1) == u * v - DiffExpr.omega(u1 * v)
    assert integrate(x) == x ** 2 / 2
    # linear combinations split into monomial symbols
    assert integrate(u ** 2 + 4 * u) == integrate(u ** 2) + 4 * integrate(u)
    with pytest.raises(NotExactError):
        integrate(u1 ** 2, allow_new=False)


def test_functional_class_equality_is_modulo_image():
    assert FunctionalClass(u * u1) == FunctionalClass(0)
    assert FunctionalClass(u * u2) == FunctionalClass(-u1 ** 2)
    assert not FunctionalClass(u1 ** 2).is_zero()


def test_vector_types_do_not_mix():
    with pytest.raises(TypeError):
        WnlVector([u]) + WnlCovector([u])


def test_tail_right_side_is_variational_derivative():
    F = frechet(DiffExpr.omega(u1 * v1 ** 2), 2)
    [t] = F.tails
    assert isinstance(t, Tail)
    assert WnlCovector(t.right) == euler(u1 * v1 ** 2, 2) * t.left[0]
