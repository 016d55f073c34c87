"""NLS in real coordinates: a nonlocal partner of a constant operator.

sqrt(2) enters through the density H1 = (u^2 + v^2)/sqrt(2), so it is
declared once as an algebraic constant and the rest is exact.
"""

from wnhcalc import DiffExpr, PDOperator, euler
from wnhcalc.certify import compatibility_certificate, hamiltonian_pair_certificate
from wnhcalc.opalg import Tail, meye

names = ("u", "v")
u, v = DiffExpr.jet(0), DiffExpr.jet(1)
sq2 = DiffExpr.sqrt_constant("sq2", 2)

J = PDOperator.from_matrix([[0, 1], [-1, 0]], variance="V->V*")
P = PDOperator.from_matrix([[0, -1], [1, 0]], variance="V*->V")
Y1 = (-sq2 * v, sq2 * u)
Pt = PDOperator(2, 2, {1: meye(2)}, [Tail(Y1, Y1)], "V*->V")

H1 = (u ** 2 + v ** 2) / sq2
print("dH1/du          =", [c.format(names) for c in euler(H1, 2)])

cert = compatibility_certificate(P, Pt, J)
dec = cert.decomposition
print("J P~ J          =", dec.jpj.format(names))
print("H from the tail =", dec.h_data[0][2].format(names))
print("tau             =", [c.format(names) for c in cert.tau])

ham = hamiltonian_pair_certificate(P, Pt, J, comp=cert)
print("P~ Hamiltonian  :", ham.residual.is_zero())
