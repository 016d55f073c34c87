"""Command-line front end: ``wnhcalc <subcommand> --session FILE [options]``.

Every command produces an :class:`Outcome` with a status (verified, refuted,
inconclusive, value or error), a mapping of named results rendered as
canonical strings, an optional residual and diagnostics.  Exit codes: 0 for
verified/value, 1 refuted, 2 inconclusive, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import certify as C
from .geom import Inconclusive, lie_covector, lie_operator, schouten_eval
from .opalg import NotWeaklyNonlocalClosure, PDOperator, ShapeError, expand_truncated
from .parser import (
    OpVal,
    Session,
    SessionError,
    VecVal,
    parse_session,
    parse_value,
    print_session,
    value_as_operator,
    value_as_tuple,
)
from .ring import DiffExpr, RingError
from .varcalc import WnlCovector, WnlVector, euler, reduce_mod_image

EXIT_CODES = {"verified": 0, "value": 0, "refuted": 1, "inconclusive": 2, "error": 3}

COMMANDS = (
    "eval", "adjoint", "compose", "apply", "lie", "euler", "homotopy",
    "certify-symplectic", "certify-compatible", "certify-hamiltonian", "casimir",
    "zero-order", "dn-validate", "dn-canonical", "expand", "schouten", "print",
)


@dataclass
class Outcome:
    command: str
    status: str
    result: Dict[str, str] = field(default_factory=dict)
    residual: Optional[str] = None
    diagnostics: List[str] = field(default_factory=list)
    timing_ms: float = 0

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "status": self.status,
            "result": dict(self.result),
            "residual": self.residual,
            "diagnostics": list(self.diagnostics),
            "timing_ms": self.timing_ms,
        }


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wnhcalc", description="Weakly nonlocal Hamiltonian and symplectic operator calculus.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--session", required=True, help="session file")
    common.add_argument("--json", action="store_true", help="emit the JSON report")
    common.add_argument("--truncate", type=int, default=8, metavar="N", help="series cutoff (default 8)")
    common.add_argument("--strict-nonlocal", action="store_true",
                        help="reject results with nonlocal symbols not declared in the session")
    common.add_argument("--timing", action="store_true", help="report wall time (makes output run-dependent)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    add("eval", "evaluate and print an expression, tuple or operator").add_argument("value")
    add("adjoint", "formal adjoint of an operator").add_argument("--op", required=True)
    add("compose", "compose operators left to right").add_argument("ops", nargs="+")
    p = add("apply", "apply an operator to a (co)vector")
    p.add_argument("--op", required=True)
    p.add_argument("--to", required=True)
    p = add("lie", "Lie derivative along a vector field")
    p.add_argument("--tau", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--op")
    g.add_argument("--covec")
    add("euler", "variational derivative of a density").add_argument("density")
    add("homotopy", "potential of a local differential operator").add_argument("--op", required=True)
    p = add("certify-symplectic", "decide symplecticity of a weakly nonlocal operator")
    p.add_argument("--op", required=True)
    p.add_argument("--density", action="append", help="tail density (repeatable)")
    for name, help_ in (("certify-compatible", "compatibility of P and P~, with J = P^-1"),
                        ("certify-hamiltonian", "Hamiltonian property of P~ compatible with P, with J = P^-1")):
        p = add(name, help_)
        p.add_argument("--p", required=True)
        p.add_argument("--ptilde", required=True)
        p.add_argument("--j", required=True)
    p = add("casimir", "test densities for being Casimirs")
    p.add_argument("--p", required=True)
    p.add_argument("--psi", action="append", required=True)
    add("zero-order", "zero-order symplectic form check").add_argument("--op", required=True)
    add("dn-validate", "Dubrovin-Novikov data of a metric").add_argument("--metric", required=True)
    p = add("dn-canonical", "metric in candidate flat coordinates")
    p.add_argument("--metric", required=True)
    p.add_argument("--coords", required=True)
    add("expand", "truncated series expansion").add_argument("--op", required=True)
    p = add("schouten", "evaluate the Schouten trilinear form on three covectors")
    p.add_argument("--h", required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--chi", action="append", required=True)
    add("print", "print the session in canonical form")
    return ap


# ---------------------------------------------------------------------------
# resolution helpers


def _value(text: str, s: Session):
    return parse_value(text, s)


def _op(text: str, s: Session, default: Optional[str] = None) -> PDOperator:
    name = text.strip()
    for d in s.declarations:
        if d.name == name and d.kind == "op":
            return d.value
    return value_as_operator(_value(text, s), s, default).normalized()


def _tuple(text: str, s: Session):
    name = text.strip()
    for d in s.declarations:
        if d.name == name and d.kind in ("vec", "covec"):
            return d.value
    return value_as_tuple(_value(text, s), s)


def _scalar(text: str, s: Session) -> DiffExpr:
    v = _value(text, s)
    if not isinstance(v, DiffExpr):
        raise InputError("expected a scalar expression: %s" % text)
    return v


def _metric(text: str, s: Session):
    op = _op(text, s)
    if op.tails or any(j != 0 for j in op.diff):
        raise InputError("metric must be a matrix of functions")
    return op.diff.get(0) or tuple(tuple(DiffExpr.const(0) for _ in range(s.n)) for _ in range(s.n))


def _residual(op, s: Session) -> Optional[str]:
    if op is None:
        return None
    return "0" if op.is_zero() else s.fmt_op(op)


# ---------------------------------------------------------------------------
# commands


def _run(s: Session, a) -> Outcome:
    cmd = a.command
    out = Outcome(cmd, "value")
    fmt = s.fmt_value
    r = out.result

    if cmd == "print":
        r["session"] = print_session(s)
    elif cmd == "eval":
        v = _value(a.value, s)
        if isinstance(v, OpVal):
            r["kind"] = "operator"
            r["value"] = fmt(v.op.normalized())
        elif isinstance(v, VecVal):
            r["kind"] = "tuple"
            r["value"] = fmt(v)
        else:
            r["kind"] = "scalar"
            r["value"] = fmt(v)
    elif cmd == "adjoint":
        A = _op(a.op, s)
        r["adjoint"] = fmt(A.adjoint())
        r["variance"] = str(A.adjoint().variance)
    elif cmd == "compose":
        ops = [_op(t, s) for t in a.ops]
        acc = ops[0]
        for B in ops[1:]:
            acc = acc.compose(B)
        r["composition"] = fmt(acc.normalized())
        r["variance"] = str(acc.variance)
    elif cmd == "apply":
        A = _op(a.op, s)
        v = _tuple(a.to, s)
        if A.variance is not None and not isinstance(v, (WnlVector, WnlCovector)):
            v = WnlCovector(v) if A.variance.startswith("V*") else WnlVector(v)
        r["result"] = fmt(A.apply(v, allow_new=not a.strict_nonlocal))
    elif cmd == "lie":
        tau = _tuple(a.tau, s) if s.n > 1 or _is_declared_tuple(a.tau, s) else (_scalar(a.tau, s),)
        if a.op is not None:
            A = _op(a.op, s, "V*->V")
            r["lie"] = fmt(lie_operator(tau, A))
            r["variance"] = str(A.variance)
        else:
            r["lie"] = fmt(lie_covector(tau, _tuple(a.covec, s)))
    elif cmd == "euler":
        r["euler"] = fmt(euler(_scalar(a.density, s), s.n))
    elif cmd == "homotopy":
        pot = C.homotopy_potential(_op(a.op, s, "V->V*"))
        r["zeta"] = fmt(pot.zeta)
        out.residual = _residual(pot.residual, s)
        out.status = "verified" if pot.exact else "refuted"
        if not pot.exact:
            out.diagnostics.append("zeta' - zeta'^dagger differs from the operator: it is not symplectic")
    elif cmd == "certify-symplectic":
        J = _op(a.op, s, "V->V*")
        dens = [_scalar(t, s) for t in a.density] if a.density else None
        res = C.wnl_symplectic_certificate(J, dens, s.constant_exprs())
        if isinstance(res, C.SymplecticCertificate):
            out.status = "verified"
            r["gamma0"] = fmt(res.gamma0)
            r["gamma"] = fmt(res.gamma)
            for i, (eps, H) in enumerate(res.tail_data, 1):
                r["eps_%d" % i] = str(eps)
                r["H_%d" % i] = fmt(H)
            out.residual = _residual(res.residual, s)
        else:
            _negative(out, res, s)
    elif cmd in ("certify-compatible", "certify-hamiltonian"):
        P = _op(a.p, s, "V*->V")
        Pt = _op(a.ptilde, s, "V*->V")
        J = _op(a.j, s, "V->V*")
        consts = s.constant_exprs()
        comp = C.compatibility_certificate(P, Pt, J, a.truncate, consts)
        if not isinstance(comp, C.CompatibilityCertificate):
            _negative(out, comp, s)
        else:
            _report_compat(out, comp, s)
            if cmd == "certify-hamiltonian":
                ham = C.hamiltonian_pair_certificate(P, Pt, J, comp, consts)
                if isinstance(ham, C.HamiltonianCertificate):
                    r["gamma_tilde"] = fmt(ham.gamma_tilde)
                    r["tau_tilde"] = fmt(ham.tau_tilde)
                    for i, L in enumerate(ham.l_data, 1):
                        r["L_%d" % i] = fmt(L)
                    for i, M in enumerate(ham.m_data, 1):
                        r["M_%d" % i] = fmt(M)
                    out.residual = _residual(ham.residual, s)
                else:
                    _negative(out, ham, s)
    elif cmd == "casimir":
        P = _op(a.p, s, "V*->V")
        results = C.casimir_check(P, [_scalar(t, s) for t in a.psi])
        many = len(results) > 1
        for i, c in enumerate(results, 1):
            suffix = "_%d" % i if many else ""
            r["psi" + suffix] = fmt(c.psi)
            r["is_casimir" + suffix] = "true" if c.is_casimir else "false"
            r["witness" + suffix] = fmt(c.witness) if s.n > 1 else fmt(c.witness[0])
        out.status = "verified" if all(c.is_casimir for c in results) else "refuted"
        if out.status == "refuted":
            out.diagnostics.append("P(d psi/du) is nonzero for at least one density")
    elif cmd == "zero-order":
        res = C.zero_order_check(_op(a.op, s, "V->V*"), s.constant_exprs())
        r["form_ok"] = "true" if res.form_ok else "false"
        if not res.form_ok:
            out.status = "inconclusive"
            out.diagnostics.extend(res.violations)
        elif isinstance(res.certificate, C.SymplecticCertificate):
            out.status = "verified"
            r["gamma"] = fmt(res.certificate.gamma)
            out.residual = "0"
        else:
            _negative(out, res.certificate, s)
    elif cmd == "dn-validate":
        data = C.dn_validate(_metric(a.metric, s))
        n = s.n
        r["operator"] = fmt(data.operator)
        r["flat"] = "true" if data.flat else "false"
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    b = data.b[i][j][k]
                    if b:
                        r["b^%d%d_%d" % (i + 1, j + 1, k + 1)] = fmt(b)
        for (i, j, k, l), val in sorted(data.curvature.items()):
            r["R^%d_%d%d%d" % (i + 1, j + 1, k + 1, l + 1)] = fmt(val)
        out.status = "verified" if data.flat else "refuted"
        if not data.flat:
            out.diagnostics.append("metric is not flat: nonzero curvature components listed")
    elif cmd == "dn-canonical":
        res = C.dn_canonical(_metric(a.metric, s), _tuple(a.coords, s))
        r["eta"] = "[%s]" % ", ".join("[%s]" % ", ".join(fmt(e) for e in row) for row in res.eta)
        r["operator"] = fmt(res.operator)
        r["flat_chart"] = "true" if res.is_flat_chart else "false"
        out.status = "verified" if res.is_flat_chart else "refuted"
    elif cmd == "expand":
        A = _op(a.op, s)
        r["series"] = expand_truncated(A.with_variance(None), a.truncate).format(s.fields, s.omega_names())
    elif cmd == "schouten":
        if len(a.chi) != 3:
            raise InputError("schouten needs exactly three --chi covectors")
        H = _op(a.h, s, "V*->V")
        K = _op(a.k, s, "V*->V")
        chis = [_tuple(t, s) for t in a.chi]
        val = schouten_eval(H, K, *chis)
        if isinstance(val, Inconclusive):
            out.status = "inconclusive"
            r["density"] = fmt(val.density)
            out.diagnostics.append(val.reason)
        else:
            zero = val.is_zero()
            # print the reduced density, not the raw sum of pairings
            r["value"] = "0" if zero else fmt(reduce_mod_image(val.representative)[0])
            out.status = "verified" if zero else "refuted"
    else:  # pragma: no cover - argparse restricts the choices
        raise InputError("unknown command %s" % cmd)

    if a.strict_nonlocal and out.status == "value":
        _check_strict(out, s)
    return out


def _is_declared_tuple(text, s: Session) -> bool:
    return any(d.name == text.strip() and d.kind in ("vec", "covec") for d in s.declarations)


def _report_compat(out: Outcome, comp, s: Session):
    fmt = s.fmt_value
    out.status = "verified"
    r = out.result
    r["gamma"] = fmt(comp.gamma)
    r["tau"] = fmt(comp.tau)
    if comp.decomposition is not None:
        r["jpj"] = fmt(comp.decomposition.jpj)
        if comp.decomposition.gamma0 is not None:
            r["gamma0"] = fmt(comp.decomposition.gamma0)
    for i, (eps, psi, K) in enumerate(comp.psi_data, 1):
        r["psi_%d" % i] = "%s (eps = %s, K = %s)" % (fmt(psi), fmt(eps), fmt(K))
    for i, (eps, Y, H) in enumerate(comp.h_data, 1):
        r["Y_%d" % i] = "%s (eps = %s, H = %s)" % (fmt(Y), fmt(eps), fmt(H))
    out.residual = _residual(comp.residual, s)
    for cond, ok in comp.conditions:
        out.diagnostics.append("%s: %s" % (cond, "holds" if ok else "fails"))


def _negative(out: Outcome, res, s: Session):
    if isinstance(res, C.Refuted):
        out.status = "refuted"
        out.diagnostics.append(res.reason)
        out.residual = _residual(res.residual, s) if res.residual is not None else None
        for k, v in sorted(res.details.items()):
            out.result[k] = s.fmt_value(v)
    elif isinstance(res, C.NotApplicable):
        out.status = "inconclusive"
        out.diagnostics.append(res.reason)
        if isinstance(res.failing, DiffExpr):
            out.result["failing"] = s.fmt(res.failing)
    else:
        out.status = "error"
        out.diagnostics.append("unexpected result %r" % (res,))


def _check_strict(out: Outcome, s: Session):
    # declared symbols print under their names, so any D^-1(...) left is new
    for k, text in out.result.items():
        if "D^-1(" in text:
            out.status = "error"
            out.diagnostics.append("%s introduces an undeclared nonlocal symbol (--strict-nonlocal)" % k)


def execute(session: Session, argv: List[str], timing: bool = False) -> Outcome:
    """Run one command given as an argument list (without --session)."""
    a = build_parser().parse_args(list(argv[:1]) + ["--session", "-"] + list(argv[1:]))
    return _execute(session, a, timing or a.timing)


def _execute(s: Session, a, timing: bool) -> Outcome:
    t0 = time.perf_counter()
    try:
        out = _run(s, a)
    except (SessionError, InputError, C.CertificateInputError, ShapeError) as exc:
        out = Outcome(a.command, "error", diagnostics=[str(exc)])
    except NotWeaklyNonlocalClosure as exc:
        out = Outcome(a.command, "inconclusive", diagnostics=[str(exc)])
        if isinstance(getattr(exc, "density", None), DiffExpr):
            out.result["density"] = s.fmt(exc.density)
    except (RingError, ValueError, ZeroDivisionError, KeyError) as exc:
        out = Outcome(a.command, "error", diagnostics=["%s: %s" % (type(exc).__name__, exc)])
    if timing:
        out.timing_ms = round((time.perf_counter() - t0) * 1000, 3)
    return out


def render_report(outcome: Outcome, fmt: str = "text") -> bytes:
    if fmt == "json":
        return (json.dumps(outcome.as_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
    lines = ["command: %s" % outcome.command, "status: %s" % outcome.status]
    for k, v in outcome.result.items():
        if "\n" in v:
            lines.append("%s:" % k)
            lines.extend("  " + x for x in v.rstrip("\n").split("\n"))
        else:
            lines.append("%s = %s" % (k, v))
    if outcome.residual is not None:
        lines.append("residual: %s" % outcome.residual)
    for d in outcome.diagnostics:
        lines.append("note: %s" % d)
    if outcome.timing_ms:
        lines.append("time: %s ms" % outcome.timing_ms)
    return ("\n".join(lines) + "\n").encode("utf-8")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    a = build_parser().parse_args(argv)
    try:
        with open(a.session, encoding="utf-8") as fh:
            text = fh.read()
        s = parse_session(text)
    except (OSError, UnicodeDecodeError) as exc:
        out = Outcome(a.command, "error", diagnostics=["cannot read session: %s" % exc])
    except SessionError as exc:
        out = Outcome(a.command, "error", diagnostics=["%s: %s" % (a.session, exc)])
    else:
        out = _execute(s, a, a.timing)
    sys.stdout.buffer.write(render_report(out, "json" if a.json else "text"))
    sys.stdout.flush()
    return out.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
