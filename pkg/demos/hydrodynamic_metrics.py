"""Operators of hydrodynamic type from contravariant metrics."""

from wnhcalc import DiffExpr
from wnhcalc.certify import dn_canonical, dn_validate

u, v = DiffExpr.jet(0), DiffExpr.jet(1)
one, zero = DiffExpr.const(1), DiffExpr.const(0)

scalar = dn_validate([[u]])
print("g = u           :", scalar.operator.format(("u",)), "flat" if scalar.flat else "curved")

curved = dn_validate([[one, zero], [zero, 1 + u ** 2]])
print("g = diag(1, 1+u^2) flat?", curved.flat)
for (i, j, k, l), r in sorted(curved.curvature.items()):
    print("  R^%d_%d%d%d = %s" % (i + 1, j + 1, k + 1, l + 1, r.format(("u", "v"))))

chart = dn_canonical([[4, 0], [0, 1]], [u / 2, v])
print("diag(4,1) in (u/2, v):", [[e.format(("u", "v")) for e in row] for row in chart.eta])
