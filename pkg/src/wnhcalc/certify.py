"""Certificates for symplectic, compatible and Hamiltonian weakly nonlocal structures.

Every certificate carries a residual operator that was recomputed from
scratch; a certificate is only returned when that residual is exactly zero.
Failures come back as :class:`Refuted` (an identity fails) or
:class:`NotApplicable` (a structural hypothesis fails), never as exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import isqrt
from typing import List, Optional, Sequence, Tuple

from .opalg import (
    DegenerateError,
    NotWeaklyNonlocalClosure,
    PDOperator,
    Tail,
    expand_truncated,
    mdet,
    minverse,
    span_basis,
    tail_gram,
)
from .geom import lie_covector, lie_operator
from .ring import CONST, ONE, ZERO, DiffExpr, RingError, integrate_unit_interval, scale_jets
from .varcalc import (
    NotVariationalError,
    WnlCovector,
    WnlVector,
    euler,
    field_vector,
    frechet,
    helmholtz_is_variational,
    integrate,
    reconstruct_density,
)


# ---------------------------------------------------------------------------
# outcomes


@dataclass
class Refuted:
    """An identity required by the certificate fails; ``residual`` shows by how much."""

    reason: str
    residual: Optional[PDOperator] = None
    details: dict = field(default_factory=dict)
    status = "refuted"


@dataclass
class NotApplicable:
    """A hypothesis of the certificate does not hold for the input."""

    reason: str
    failing: object = None
    status = "not-applicable"


class CertificateInputError(ValueError):
    """Preconditions of a certificate procedure are violated."""


@dataclass
class Potential:
    zeta: WnlCovector
    residual: PDOperator

    @property
    def exact(self) -> bool:
        return self.residual.is_zero()


@dataclass
class SymplecticCertificate:
    gamma0: WnlCovector
    tail_data: List[Tuple[int, DiffExpr]]
    gamma: WnlCovector
    residual: PDOperator
    status = "verified"


@dataclass
class JPJDecomposition:
    psi_data: List[Tuple[DiffExpr, DiffExpr, DiffExpr]]  # (eps, psi, K)
    h_data: List[Tuple[DiffExpr, WnlVector, DiffExpr]]  # (eps~, Y, H)
    jpj: PDOperator
    predicted_tails: PDOperator
    tails_match: bool
    gamma0: Optional[WnlCovector]
    gamma: Optional[WnlCovector]
    residual: PDOperator

    @property
    def symplectic(self) -> bool:
        return self.tails_match and self.residual.is_zero()


@dataclass
class CompatibilityCertificate:
    psi_data: list
    h_data: list
    gamma: WnlCovector
    tau: WnlVector
    residual: PDOperator
    conditions: List[Tuple[str, bool]] = field(default_factory=list)
    decomposition: Optional[JPJDecomposition] = None
    status = "verified"


@dataclass
class HamiltonianCertificate:
    l_data: List[DiffExpr]
    m_data: List[DiffExpr]
    gamma_tilde: WnlCovector
    tau_tilde: WnlVector
    residual: PDOperator
    second_order_residual: PDOperator
    status = "verified"


@dataclass
class CasimirResult:
    psi: DiffExpr
    is_casimir: bool
    witness: WnlVector


@dataclass
class ZeroOrderResult:
    form_ok: bool
    violations: List[str]
    certificate: object = None


@dataclass
class DNData:
    metric: tuple
    lower: tuple
    christoffel: tuple  # Gamma[k][i][j] = Gamma^k_ij
    b: tuple  # b[i][j][k] = b^ij_k
    curvature: dict  # nonzero R^i_jkl keyed by (i, j, k, l)
    flat: bool
    operator: PDOperator


@dataclass
class DNCanonical:
    is_flat_chart: bool
    eta: tuple
    operator: PDOperator


# ---------------------------------------------------------------------------
# helpers


def potential_operator(gamma) -> PDOperator:
    """gamma' - (gamma')^dagger as an operator V -> V*."""
    gamma = gamma if isinstance(gamma, WnlCovector) else WnlCovector(gamma)
    gp = frechet(gamma, len(gamma))
    return (gp - gp.adjoint()).with_variance("V->V*").normalized()


def _declared_constants(*ops_or_exprs) -> List[DiffExpr]:
    found = {}
    for o in ops_or_exprs:
        exprs = o.coefficients() if isinstance(o, PDOperator) else [o]
        for e in exprs:
            for v in e.variables():
                if v[0] == CONST:
                    found[v] = DiffExpr.var(v)
    return [found[k] for k in sorted(found)]


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    a, b = isqrt(q.numerator), isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def sqrt_in_field(d: DiffExpr, constants: Sequence[DiffExpr]) -> Optional[DiffExpr]:
    """A square root of the positive rational ``d`` using rationals and declared constants."""
    q = d.as_fraction()
    if q is None or q <= 0:
        return None
    s = _rational_sqrt(q)
    if s is not None:
        return DiffExpr.const(s)
    for c in constants:
        r = (c * c).as_fraction()
        if r:
            s = _rational_sqrt(q / r)
            if s is not None:
                return c * s
    return None


def _sign(d: DiffExpr) -> int:
    q = d.as_fraction()
    if q is None:
        raise RingError("cannot decide the sign of %s" % d)
    return 1 if q > 0 else -1


class _NeedsExtension(Exception):
    def __init__(self, value):
        self.value = value


def diagonalize_tails(A: PDOperator, unit_weights: bool = False, constants=()):
    """Write the (symmetric) tail tensor of A as sum eps_k w_k (x) D^-1 o w_k.

    Tails already of the form c*w (x) D^-1 o w are kept as given; otherwise a
    symmetric elimination over the constant field is used.  With
    ``unit_weights`` every eps_k is scaled to +-1, which may require a square
    root; a missing one raises NotApplicable-carrying ``_NeedsExtension``.
    Returns a list of ``(eps, w)`` or None when the tail tensor is not symmetric.
    """
    raw = []
    for t in A.tails:
        ratio = _proportional(t.right, t.left)
        if ratio is None:
            raw = None
            break
        raw.append((ratio, t.left))
    if raw is not None and raw:
        check = PDOperator.from_tails(A.rows, A.cols, [Tail(tuple(e * x for x in w), w) for e, w in raw])
        if not check.equals(A.nonlocal_part()):
            raw = None
    if raw is None or not raw:
        raw = _ldl(A)
        if raw is None:
            return None
    if not unit_weights:
        return raw
    out = []
    for eps, w in raw:
        s = sqrt_in_field(eps if _sign(eps) > 0 else -eps, constants)
        if s is None:
            raise _NeedsExtension(eps if _sign(eps) > 0 else -eps)
        out.append((DiffExpr.const(_sign(eps)), tuple(s * x for x in w)))
    return out


def _proportional(a, b) -> Optional[DiffExpr]:
    """Constant c with a = c*b, or None."""
    ratio = None
    for x, y in zip(a, b):
        if not y:
            if x:
                return None
            continue
        r = x / y
        if not r.is_constant():
            return None
        if ratio is None:
            ratio = r
        elif r != ratio:
            return None
    return ratio


def _ldl(A: PDOperator):
    basis, M = tail_gram(A)
    d = len(basis)
    for i in range(d):
        for j in range(d):
            if M[i][j] != M[j][i]:
                return None
    M = [row[:] for row in M]
    out = []

    def vec(coeffs):
        acc = [ZERO] * A.rows
        for c, e in zip(coeffs, basis):
            if c:
                acc = [a + c * x for a, x in zip(acc, e)]
        return tuple(acc)

    def subtract(weight, r):
        for i in range(d):
            for j in range(d):
                if r[i] and r[j]:
                    M[i][j] = M[i][j] - weight * r[i] * r[j]

    while any(M[i][j] for i in range(d) for j in range(d)):
        diag = [i for i in range(d) if M[i][i]]
        # prefer pivots that are +-squares, so unit weights need no extension
        good = [i for i in diag if M[i][i].as_fraction() is not None
                and _rational_sqrt(abs(M[i][i].as_fraction())) is not None]
        if good or diag:
            i = (good or diag)[0]
            piv = M[i][i]
            r = [x / piv for x in M[i]]
            out.append((piv, vec(r)))
            subtract(piv, r)
            continue
        i, j = next((i, j) for i in range(d) for j in range(d) if M[i][j])
        m = M[i][j]
        r = [ZERO] * d
        r[i] = ONE
        r[j] = m / 2
        out.append((ONE, vec(r)))
        subtract(ONE, r)
    return out


def _local_density(w, what):
    """Reconstruct a density for covector w or raise NotApplicable-style error."""
    w = w if isinstance(w, WnlCovector) else WnlCovector(w)
    if any(c.has_omega() for c in w):
        raise _Inapplicable("%s is not local: %s" % (what, w), w)
    if not helmholtz_is_variational(w):
        raise _Inapplicable("%s fails the Helmholtz test: %s" % (what, w), w)
    try:
        return reconstruct_density(w)
    except (NotVariationalError, RingError) as exc:
        raise _Inapplicable("%s: %s" % (what, exc), w) from None


class _Inapplicable(Exception):
    def __init__(self, reason, failing=None):
        super().__init__(reason)
        self.reason = reason
        self.failing = failing


def _D_inv(H: DiffExpr) -> DiffExpr:
    return integrate(H, allow_new=True)


def _require_variance(A: PDOperator, variance: str, what: str) -> PDOperator:
    if A.variance not in (None, variance):
        raise CertificateInputError("%s must have variance %s, got %s" % (what, variance, A.variance))
    return A.with_variance(variance)


# ---------------------------------------------------------------------------
# symplectic structures


def homotopy_potential(J: PDOperator) -> Potential:
    """zeta = int_0^1 (J(u))[lam u] dlam, with the residual J - (zeta' - zeta'^dagger)."""
    J = J.normalized()
    if J.tails or J.has_omega():
        raise CertificateInputError("homotopy formula needs a purely differential, local operator")
    n = J.cols
    Ju = J.with_variance(None).apply(field_vector(n), allow_new=False)
    zeta = WnlCovector(integrate_unit_interval(scale_jets(c, "lam"), "lam") for c in Ju)
    residual = (J.with_variance("V->V*") - potential_operator(zeta)).normalized()
    return Potential(zeta, residual)


def _gamma_from_tails(data) -> WnlCovector:
    """1/2 sum eps dH/du D^-1(H) for (eps, w=dH/du, H) triples."""
    n = len(data[0][1]) if data else 0
    acc = [ZERO] * n
    for eps, w, H in data:
        om = _D_inv(H)
        acc = [a + eps * x * om / 2 for a, x in zip(acc, w)]
    return WnlCovector(acc)


def _finish_symplectic(J: PDOperator, gamma_nl: WnlCovector):
    """Common tail: J~ = J - pot(gamma_nl) must be local differential; gamma0 by homotopy."""
    Jt = (J - potential_operator(gamma_nl)).normalized()
    if Jt.tails or Jt.has_omega():
        return None, None, Jt
    gamma0 = homotopy_potential(Jt).zeta
    gamma = gamma0 + gamma_nl
    residual = (J - potential_operator(gamma)).normalized()
    return gamma0, gamma, residual


def wnl_symplectic_certificate(J: PDOperator, densities: Optional[Sequence] = None, constants=()):
    """Decide symplecticity of a weakly nonlocal skew operator J: V -> V*.

    The tails must be expressible as sum eps_a dH_a/du (x) D^-1 o dH_a/du
    with eps_a = +-1.  ``densities`` may supply the H_a (all sign patterns
    are tried); otherwise they are reconstructed from the diagonalised tails.
    """
    J = _require_variance(J, "V->V*", "symplectic operator").normalized()
    if J.rows != J.cols:
        raise CertificateInputError("symplectic operator must be square")
    if not J.is_skew():
        raise CertificateInputError("operator is not formally skew-symmetric")
    n = J.rows
    constants = list(constants) + _declared_constants(J)
    data = []
    if J.tails:
        if densities is not None:
            ws = [euler(DiffExpr.coerce(H), n) for H in densities]
            target = J.nonlocal_part()
            found = None
            for signs in product((1, -1), repeat=len(ws)):
                cand = PDOperator.from_tails(n, n, [Tail(tuple(s * x for x in w), tuple(w)) for s, w in zip(signs, ws)])
                if cand.equals(target):
                    found = signs
                    break
            if found is None:
                return NotApplicable("tails are not sum eps dH/du (x) D^-1 o dH/du for the given densities")
            data = [(DiffExpr.const(s), tuple(w), DiffExpr.coerce(H)) for s, w, H in zip(found, ws, densities)]
        else:
            try:
                diag = diagonalize_tails(J, unit_weights=True, constants=constants)
            except _NeedsExtension as exc:
                return NotApplicable("unit weights need sqrt(%s); declare it as a constant" % exc.value, exc.value)
            if diag is None:
                return NotApplicable("tail tensor is not symmetric")
            for eps, w in diag:
                try:
                    H = _local_density(w, "tail vector")
                except _Inapplicable as exc:
                    return NotApplicable(exc.reason, exc.failing)
                data.append((eps, w, H))
    gamma_nl = _gamma_from_tails(data) if data else WnlCovector([ZERO] * n)
    gamma0, gamma, residual = _finish_symplectic(J, gamma_nl)
    if gamma is None:
        return Refuted("J minus the nonlocal potential is not a local differential operator", residual)
    if not residual.is_zero():
        return Refuted("J != gamma' - gamma'^dagger", residual, {"gamma0": gamma0, "gamma": gamma})
    return SymplecticCertificate(gamma0, [(_sign(e), H) for e, _, H in data], gamma, residual)


def symplectic_from_densities(psis: Sequence, eps: Sequence, n: Optional[int] = None) -> PDOperator:
    """J = sum eps_a dpsi_a/du (x) D^-1 o dpsi_a/du."""
    psis = [DiffExpr.coerce(p) for p in psis]
    if len(psis) != len(eps):
        raise ValueError("need one weight per density")
    if n is None:
        n = max([1] + [len(euler(p)) for p in psis])
    tails = []
    ws = []
    for p, e in zip(psis, eps):
        e = DiffExpr.coerce(e)
        if not e:
            raise ValueError("weights must be nonzero")
        w = tuple(euler(p, n))
        if not any(w):
            raise ValueError("variational derivative of %s vanishes" % p)
        ws.append(w)
        tails.append(Tail(tuple(e * x for x in w), w))
    basis, _ = span_basis(ws)
    if len(basis) != len(ws):
        raise ValueError("variational derivatives are linearly dependent over the constants")
    return PDOperator.from_tails(n, n, tails, "V->V*")


def casimir_check(P: PDOperator, psis: Sequence) -> List[CasimirResult]:
    if not P.is_differential():
        raise CertificateInputError("Casimir check needs a purely differential operator")
    out = []
    for p in psis:
        p = DiffExpr.coerce(p)
        w = P.with_variance("V*->V").apply(euler(p, P.cols))
        out.append(CasimirResult(p, w.is_zero(), WnlVector(w)))
    return out


# ---------------------------------------------------------------------------
# compatibility


def jpj_decompose(J: PDOperator, Pt: PDOperator, constants=()):
    """Densities K_a, H_r and the potential gamma for J o Pt o J.

    Returns a :class:`JPJDecomposition` or :class:`NotApplicable` when one of
    the required densities does not exist.
    """
    J = _require_variance(J, "V->V*", "J")
    Pt = _require_variance(Pt, "V*->V", "P~")
    n = J.rows
    constants = list(constants) + _declared_constants(J, Pt)
    try:
        jd = diagonalize_tails(J) if J.normalized().tails else []
        pd = diagonalize_tails(Pt) if Pt.normalized().tails else []
        if jd is None or pd is None:
            return NotApplicable("tails of J or P~ are not symmetric")
        psi_data = []
        for eps, w in jd:
            psi = _local_density(w, "J tail vector")
            K = _local_density(J.apply(Pt.apply(WnlCovector(w))), "J P~ (dpsi/du)")
            psi_data.append((eps, psi, K))
        h_data = []
        for eps, Y in pd:
            H = _local_density(J.apply(WnlVector(Y)), "J(Y)")
            h_data.append((eps, WnlVector(Y), H))
    except _Inapplicable as exc:
        return NotApplicable(exc.reason, exc.failing)
    try:
        jpj = J.compose(Pt).compose(J).with_variance("V->V*").normalized()
    except NotWeaklyNonlocalClosure as exc:
        return NotApplicable(str(exc), exc.density)
    tails = []
    gamma_nl = [ZERO] * n
    for eps, psi, K in psi_data:
        dK, dpsi = tuple(euler(K, n)), tuple(euler(psi, n))
        tails.append(Tail(tuple(eps * x for x in dK), dpsi))
        tails.append(Tail(tuple(eps * x for x in dpsi), dK))
        wp, wk = _D_inv(psi), (_D_inv(K) if K else ZERO)
        gamma_nl = [g + eps * (a * wp + b * wk) / 2 for g, a, b in zip(gamma_nl, dK, dpsi)]
    for eps, _, H in h_data:
        dH = tuple(euler(H, n))
        tails.append(Tail(tuple(-eps * x for x in dH), dH))
        wh = _D_inv(H)
        gamma_nl = [g - eps * a * wh / 2 for g, a in zip(gamma_nl, dH)]
    predicted = PDOperator.from_tails(n, n, tails, "V->V*").normalized()
    match = jpj.nonlocal_part().equals(predicted)
    gamma0, gamma, residual = _finish_symplectic(jpj, WnlCovector(gamma_nl))
    return JPJDecomposition(psi_data, h_data, jpj, predicted, match, gamma0, gamma, residual)


def verify_inverse(J: PDOperator, P: PDOperator, N: int = 8) -> bool:
    """J o P = identity as truncated series down to degree -N."""
    dj = max(J.degree() or 0, 0)
    dp = max(P.degree() or 0, 0)
    sj = expand_truncated(J.with_variance(None), N + dp + 1)
    sp = expand_truncated(P.with_variance(None), N + dj + 1)
    return sj.multiply(sp, N).is_identity(N)


def _locality_conditions(P: PDOperator, dec: JPJDecomposition) -> List[Tuple[str, bool]]:
    out = []
    if not P.normalized().tails:
        for eps, psi, _ in dec.psi_data:
            w = P.apply(euler(psi, P.cols))
            out.append(("P(d%s/du) = 0" % psi, w.is_zero()))
        return out
    gd = diagonalize_tails(P)
    if gd is None:
        return [("tails of P are symmetric", False)]
    for _, G in gd:
        for _, psi, K in dec.psi_data:
            for name, dens in (("K", K), ("psi", psi)):
                if not dens:
                    continue
                lie = lie_covector(WnlVector(G), euler(dens, P.cols))
                out.append(("L_G(d%s/du) = 0 for %s = %s" % (name, name, dens), lie.is_zero()))
    return out


def compatibility_certificate(P: PDOperator, Pt: PDOperator, J: PDOperator, N: int = 8,
                              constants=(), Q=None):
    """Certify [P, P~] = 0 by exhibiting tau = -P(gamma) with L_tau(P) = P~."""
    P = _require_variance(P, "V*->V", "P")
    Pt = _require_variance(Pt, "V*->V", "P~")
    J = _require_variance(J, "V->V*", "J")
    if not verify_inverse(J, P, N):
        raise CertificateInputError("J o P is not the identity to order D^-%d" % N)
    if not Pt.is_skew():
        raise CertificateInputError("P~ is not formally skew-symmetric")
    dec = jpj_decompose(J, Pt, constants)
    if isinstance(dec, NotApplicable):
        return dec
    if not dec.tails_match:
        return Refuted("nonlocal part of J P~ J differs from the predicted tails",
                       (dec.jpj.nonlocal_part() - dec.predicted_tails).normalized())
    if dec.gamma is None or not dec.residual.is_zero():
        return Refuted("J P~ J is not symplectic", dec.residual)
    conditions = _locality_conditions(P, dec)
    failed = [c for c, ok in conditions if not ok]
    if failed:
        return NotApplicable("locality conditions fail: " + "; ".join(failed), failed)
    try:
        tau = -WnlVector(P.apply(dec.gamma))
    except RingError as exc:
        return NotApplicable("tau = -P(gamma) is not weakly nonlocal: %s" % exc)
    if Q is not None:
        tau = tau + WnlVector(Q)
    if tau.omega_degree() > 1:
        return NotApplicable("tau has nonlocal degree > 1", tau)
    residual = (Pt - lie_operator(tau, P)).normalized()
    if not residual.is_zero():
        return Refuted("L_tau(P) != P~", residual, {"tau": tau})
    return CompatibilityCertificate(dec.psi_data, dec.h_data, dec.gamma, tau, residual, conditions, dec)


def hamiltonian_pair_certificate(P: PDOperator, Pt: PDOperator, J: PDOperator, comp=None, constants=()):
    """Certify that P~ = L_tau(P) is Hamiltonian via (J P~)^2 J = gamma~' - gamma~'^dagger."""
    P = _require_variance(P, "V*->V", "P")
    Pt = _require_variance(Pt, "V*->V", "P~")
    J = _require_variance(J, "V->V*", "J")
    if comp is None:
        comp = compatibility_certificate(P, Pt, J, constants=constants)
    if not isinstance(comp, CompatibilityCertificate):
        return comp
    n = P.rows
    JP = J.compose(Pt).with_variance("V*->V*")
    try:
        l_data = [_local_density(JP.apply(euler(H, n)), "J P~ (dH/du)") for _, _, H in comp.h_data]
        m_data = [_local_density(JP.apply(euler(K, n)), "J P~ (dK/du)") if K else ZERO
                  for _, _, K in comp.psi_data]
    except _Inapplicable as exc:
        return NotApplicable(exc.reason, exc.failing)
    except RingError as exc:
        return NotApplicable(str(exc))
    g = [ZERO] * n
    for (eps, _, H), L in zip(comp.h_data, l_data):
        dL, dH = euler(L, n), euler(H, n)
        wL = _D_inv(L) if L else ZERO
        wH = _D_inv(H)
        g = [x - eps * (a * wH + b * wL) / 2 for x, a, b in zip(g, dL, dH)]
    for (eps, psi, K), M in zip(comp.psi_data, m_data):
        dM, dK, dpsi = euler(M, n), euler(K, n), euler(psi, n)
        wpsi, wK, wM = _D_inv(psi), (_D_inv(K) if K else ZERO), (_D_inv(M) if M else ZERO)
        g = [x + eps * (a * wpsi + b * wK + c * wM) / 2 for x, a, b, c in zip(g, dM, dK, dpsi)]
    try:
        T = JP.compose(JP).compose(J).with_variance("V->V*").normalized()
    except NotWeaklyNonlocalClosure as exc:
        return NotApplicable(str(exc), exc.density)
    gamma0, gamma_t, residual = _finish_symplectic(T, WnlCovector(g))
    if gamma_t is None or not residual.is_zero():
        return Refuted("(J P~)^2 J is not symplectic: P~ is not Hamiltonian", residual)
    try:
        tau_t = WnlVector(Pt.apply(comp.gamma)) - WnlVector(P.apply(gamma_t)) * 2
    except RingError as exc:
        return NotApplicable("tau~ is not weakly nonlocal: %s" % exc)
    try:
        second = lie_operator(comp.tau, lie_operator(comp.tau, P))
        res2 = (second - lie_operator(tau_t, P)).normalized()
    except RingError as exc:
        return NotApplicable("second Lie derivative leaves the weakly nonlocal class: %s" % exc)
    if not res2.is_zero():
        return Refuted("L_tau(L_tau(P)) != L_tau~(P)", res2, {"tau_tilde": tau_t})
    return HamiltonianCertificate(l_data, m_data, gamma_t, tau_t, residual, res2)


# ---------------------------------------------------------------------------
# zero-order operators


def zero_order_check(J: PDOperator, constants=()) -> ZeroOrderResult:
    J = J.normalized()
    violations = []
    if J.tails:
        violations.append("operator has nonlocal tails")
    if any(j > 0 for j in J.diff):
        violations.append("operator has order %d" % max(J.diff))
    entries = J.diff.get(0, ())
    for i, row in enumerate(entries):
        for k, e in enumerate(row):
            if e.has_omega():
                violations.append("entry (%d,%d) is nonlocal" % (i + 1, k + 1))
                continue
            high = sorted(v for v in e.jets() if v[2] >= 2)
            if high:
                violations.append("entry (%d,%d) depends on jets of order %d" % (i + 1, k + 1, max(v[2] for v in high)))
                continue
            first = sorted(v for v in e.jets() if v[2] == 1)
            if any(e.diff(a).diff(b) for a in first for b in first):
                violations.append("entry (%d,%d) is not affine in first-order jets" % (i + 1, k + 1))
    if violations:
        return ZeroOrderResult(False, violations)
    try:
        cert = wnl_symplectic_certificate(J, constants=constants)
    except CertificateInputError as exc:
        return ZeroOrderResult(True, [], Refuted(str(exc)))
    return ZeroOrderResult(True, [], cert)


# ---------------------------------------------------------------------------
# Dubrovin-Novikov operators


def _as_matrix(g) -> tuple:
    return tuple(tuple(DiffExpr.coerce(a) for a in row) for row in g)


def dn_validate(g) -> DNData:
    """Christoffel symbols, b^ij_k and curvature of a contravariant metric g^ij(u)."""
    g = _as_matrix(g)
    n = len(g)
    for row in g:
        for e in row:
            if e.has_omega() or any(v[2] > 0 for v in e.jets()) or any(v[0] == 2 for v in e.variables()):
                raise CertificateInputError("metric entries must depend on the fields u only")
    for i in range(n):
        for j in range(n):
            if g[i][j] != g[j][i]:
                raise CertificateInputError("metric is not symmetric")
    if not mdet(g):
        raise CertificateInputError("metric is degenerate")
    low = minverse(g)
    u = [DiffExpr.jet(a) for a in range(n)]
    uv = [next(iter(x.jets())) for x in u]
    dlow = [[[low[i][j].diff(uv[k]) for k in range(n)] for j in range(n)] for i in range(n)]
    Gam = tuple(tuple(tuple(
        sum((g[k][l] * (dlow[l][j][i] + dlow[l][i][j] - dlow[i][j][l]) for l in range(n)), ZERO) / 2
        for j in range(n)) for i in range(n)) for k in range(n))
    b = tuple(tuple(tuple(
        -sum((g[i][m] * Gam[j][m][k] for m in range(n)), ZERO)
        for k in range(n)) for j in range(n)) for i in range(n))
    curv = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    r = Gam[i][l][j].diff(uv[k]) - Gam[i][k][j].diff(uv[l])
                    for m in range(n):
                        r = r + Gam[i][k][m] * Gam[m][l][j] - Gam[i][l][m] * Gam[m][k][j]
                    if r:
                        curv[(i, j, k, l)] = r
    u1 = [DiffExpr.jet(a, 1) for a in range(n)]
    zero = tuple(tuple(sum((b[i][j][k] * u1[k] for k in range(n)), ZERO) for j in range(n)) for i in range(n))
    op = PDOperator(n, n, {1: g, 0: zero}, (), "V*->V")
    return DNData(g, low, Gam, b, curv, not curv, op)


def dn_operator(g) -> PDOperator:
    return dn_validate(g).operator


def dn_canonical(g, psi) -> DNCanonical:
    """Push g^ij forward through the coordinate change psi(u)."""
    g = _as_matrix(g)
    n = len(g)
    psi = [DiffExpr.coerce(p) for p in psi]
    if len(psi) != n:
        raise CertificateInputError("need %d candidate coordinates" % n)
    uv = [next(iter(DiffExpr.jet(a).jets())) for a in range(n)]
    jac = tuple(tuple(p.diff(v) for v in uv) for p in psi)
    if not mdet(jac):
        raise CertificateInputError("Jacobian of the coordinate change is degenerate")
    eta = tuple(tuple(
        sum((jac[a][i] * g[i][j] * jac[b][j] for i in range(n) for j in range(n)), ZERO)
        for b in range(n)) for a in range(n))
    flat = all(
        (eta[a][b].as_fraction() in (1, -1)) if a == b else not eta[a][b]
        for a in range(n) for b in range(n)
    )
    return DNCanonical(flat, eta, PDOperator(n, n, {1: eta}, (), "V*->V"))


__all__ = [
    "CasimirResult",
    "CertificateInputError",
    "CompatibilityCertificate",
    "DNCanonical",
    "DNData",
    "DegenerateError",
    "HamiltonianCertificate",
    "JPJDecomposition",
    "NotApplicable",
    "Potential",
    "Refuted",
    "SymplecticCertificate",
    "ZeroOrderResult",
    "casimir_check",
    "compatibility_certificate",
    "diagonalize_tails",
    "dn_canonical",
    "dn_operator",
    "dn_validate",
    "hamiltonian_pair_certificate",
    "homotopy_potential",
    "jpj_decompose",
    "potential_operator",
    "sqrt_in_field",
    "symplectic_from_densities",
    "verify_inverse",
    "wnl_symplectic_certificate",
    "zero_order_check",
]
