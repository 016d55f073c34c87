"""KdV, step by step.

Starts from the first operator D and a local vector field tau, builds the
second operator as a Lie derivative, then certifies compatibility through
the nonlocal symplectic inverse J = 1 (x) D^-1 o 1.
"""

from wnhcalc import DiffExpr, PDOperator
from wnhcalc.certify import casimir_check, compatibility_certificate, hamiltonian_pair_certificate
from wnhcalc.geom import lie_operator

u, u1, u2 = (DiffExpr.jet(0, k) for k in range(3))
names = ("u",)

P = PDOperator.D(1, variance="V*->V")
tau = [-(u ** 2 + u2) / 2]

Pt = lie_operator(tau, P)
print("L_tau(D)        =", Pt.format(names))

J = PDOperator.dinv(1, "V->V*")
cert = compatibility_certificate(P, Pt, J)
print("J P~ J          =", cert.decomposition.jpj.format(names))
print("recovered tau   =", ", ".join(c.format(names) for c in cert.tau))
print("residual        =", cert.residual.format(names))

# tau is only fixed up to the kernel of L_(.)(D)
Q = [u ** 2 / 4 + u1 * DiffExpr.omega(u) / 2]
print("L_Q(D) is zero  :", lie_operator(Q, P).is_zero())

ham = hamiltonian_pair_certificate(P, Pt, J)
print("M_1             =", ham.m_data[0].format(names))

[c] = casimir_check(Pt, [u])
print("int u Casimir?  :", c.is_casimir, "witness", c.witness[0].format(names))
