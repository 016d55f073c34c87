import json
import os
import subprocess
import sys

import pytest

from wnhcalc.cli import EXIT_CODES, Outcome, execute, main, render_report
from wnhcalc.parser import parse_session

SESSIONS = os.path.join(os.path.dirname(__file__), os.pardir, "demos", "sessions")

KDV = """fields u;
op P = [[D]];
op Pt = [[D^3 + 2*u*D + u_1]];
op Jinv : V->V* = tail((1);(1));
expr tau = -(u^2+u_2)/2;
"""

NLS = """fields u, v;
const sq2: sq2^2 = 2;
op P = [[0, -1], [1, 0]];
op J : V->V* = [[0, 1], [-1, 0]];
op Pt = [[D + 2*v*D^-1*v, -2*v*D^-1*u], [-2*u*D^-1*v, D + 2*u*D^-1*u]];
expr H1 = (u^2+v^2)/sq2;
"""

ZERO_ORDER = """fields u, v, w;
op J : V->V* = [[0, w, 0], [-w, 0, 0], [0, 0, 0]];
"""

JACOBI = """fields u;
op B = [[u_1*D + u_2/2]];
op W = [[D]] + tail((u_1); (1)) + tail((1); (u_1));
"""


def run(text, *argv):
    return execute(parse_session(text), list(argv))


def report(out):
    return render_report(out, "text").decode()


def test_lie_on_kdv():
    out = run(KDV, "lie", "--tau", "tau", "--op", "P")
    assert out.status == "value" and out.exit_code == 0
    assert out.result["lie"] == "[[D^3 + 2*u*D + u_1]]"


def test_certify_compatible_kdv():
    out = run(KDV, "certify-compatible", "--p", "P", "--ptilde", "Pt", "--j", "Jinv")
    assert out.status == "verified"
    assert out.result["tau"] == "(-u_1*D^-1(u)/2 - 3*u^2/4 - u_2/2)"
    assert out.residual == "0"
    data = json.loads(render_report(out, "json"))
    assert data["status"] == "verified" and "tau" in data["result"]


def test_certify_hamiltonian():
    out = run(KDV, "certify-hamiltonian", "--p", "P", "--ptilde", "Pt", "--j", "Jinv")
    assert out.status == "verified"
    assert out.result["M_1"] == "u^3/2 + u*u_2/2"
    out = run(NLS, "certify-hamiltonian", "--p", "P", "--ptilde", "Pt", "--j", "J")
    assert out.status == "verified"


def test_casimir():
    out = run(KDV, "casimir", "--p", "Pt", "--psi", "u")
    assert (out.status, out.exit_code) == ("refuted", 1)
    assert out.result["is_casimir"] == "false"
    assert out.result["witness"] == "u_1"
    assert run(KDV, "casimir", "--p", "P", "--psi", "u").status == "verified"


def test_refuted_symplecticity_reports_residual():
    out = run(ZERO_ORDER, "certify-symplectic", "--op", "J")
    assert (out.status, out.exit_code) == ("refuted", 1)
    data = json.loads(render_report(out, "json"))
    assert data["residual"] == "[[0, w/3, -v/3], [-w/3, 0, u/3], [v/3, -u/3, 0]]"


def test_inconclusive_schouten_names_density():
    out = run(JACOBI, "schouten", "--h", "W", "--k", "W", "--chi", "u_1", "--chi", "u_2^2", "--chi", "u^2")
    assert (out.status, out.exit_code) == ("inconclusive", 2)
    data = json.loads(render_report(out, "json"))
    assert "D^-1(u_1*u_2^2)" in data["result"]["density"]
    assert data["diagnostics"]


def test_schouten_verdicts():
    out = run(JACOBI, "schouten", "--h", "B", "--k", "B", "--chi", "u", "--chi", "u_1", "--chi", "u^2")
    assert out.status == "refuted"
    assert out.result["value"] == "-3*u_1^5 + 3*u^2*u_1*u_2^2"
    out = run(KDV, "schouten", "--h", "P", "--k", "Pt", "--chi", "u", "--chi", "u_1", "--chi", "u^2")
    assert (out.status, out.result["value"]) == ("verified", "0")


@pytest.mark.parametrize("argv, key, expected", [
    (["eval", "tau"], "value", "-u^2/2 - u_2/2"),
    (["adjoint", "--op", "Pt"], "adjoint", "[[-D^3 - 2*u*D - u_1]]"),
    (["apply", "--op", "Pt", "--to", "1"], "result", "(u_1)"),
    (["euler", "u_1^2/2"], "euler", "(-u_2)"),
    (["homotopy", "--op", "D"], "zeta", "(u_1/2)"),
    (["expand", "--op", "tail((1);(u))", "--truncate", "3"], "series", "(u)*D^-1 + (-u_1)*D^-2 + (u_2)*D^-3"),
])
def test_value_commands(argv, key, expected):
    out = run(KDV, *argv)
    assert out.status in ("value", "verified")
    assert out.result[key] == expected


def test_strict_nonlocal():
    out = run(KDV, "apply", "--op", "Jinv", "--to", "u_1^2")
    assert out.status == "value"
    out = run(KDV, "apply", "--op", "Jinv", "--to", "u_1^2", "--strict-nonlocal")
    assert (out.status, out.exit_code) == ("error", 3)


def test_input_errors_are_typed():
    out = run(KDV, "lie", "--tau", "nope", "--op", "P")
    assert (out.status, out.exit_code) == ("error", 3)
    assert out.diagnostics
    out = run(NLS, "certify-compatible", "--p", "Pt", "--ptilde", "Pt", "--j", "J")
    assert out.status == "error"


def test_json_schema_and_byte_stability():
    out1 = run(NLS, "certify-compatible", "--p", "P", "--ptilde", "Pt", "--j", "J")
    out2 = run(NLS, "certify-compatible", "--p", "P", "--ptilde", "Pt", "--j", "J")
    b1, b2 = render_report(out1, "json"), render_report(out2, "json")
    assert b1 == b2
    data = json.loads(b1)
    assert set(data) == {"command", "status", "result", "residual", "diagnostics", "timing_ms"}
    assert data["status"] in ("verified", "refuted", "inconclusive", "value", "error")
    assert all(isinstance(v, str) for v in data["result"].values())
    assert isinstance(data["diagnostics"], list)
    assert data["timing_ms"] == 0


def test_timing_flag():
    out = run(KDV, "lie", "--tau", "tau", "--op", "P", "--timing")
    assert out.timing_ms >= 0


def test_exit_code_table():
    assert EXIT_CODES == {"verified": 0, "value": 0, "refuted": 1, "inconclusive": 2, "error": 3}
    assert Outcome("x", "inconclusive").exit_code == 2


def test_text_report_layout():
    out = run(KDV, "casimir", "--p", "Pt", "--psi", "u")
    lines = report(out).splitlines()
    assert lines[:2] == ["command: casimir", "status: refuted"]
    assert "witness = u_1" in lines


def test_main_with_session_file(tmp_path, capsys):
    f = tmp_path / "kdv.wnh"
    f.write_text(KDV, encoding="utf-8")
    code = main(["lie", "--session", str(f), "--tau", "tau", "--op", "P", "--json"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["result"]["lie"] == "[[D^3 + 2*u*D + u_1]]"


def test_main_reports_parse_errors(tmp_path, capsys):
    f = tmp_path / "bad.wnh"
    f.write_text("fields u, v;\nop P : Vs->V = [[D]];\n", encoding="utf-8")
    assert main(["print", "--session", str(f)]) == 3
    assert "line 2, column 16: shape mismatch" in capsys.readouterr().out
    assert main(["print", "--session", str(tmp_path / "missing.wnh")]) == 3


def test_console_script_subprocess():
    path = os.path.join(SESSIONS, "kdv.wnh")
    proc = subprocess.run([sys.executable, "-m", "wnhcalc", "casimir", "--session", path, "--p", "Pt", "--psi", "u", "--json"],
                          capture_output=True, check=False)
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["result"]["witness"] == "u_1"


@pytest.mark.parametrize("name", sorted(os.listdir(SESSIONS)))
def test_demo_sessions_parse(name):
    with open(os.path.join(SESSIONS, name), encoding="utf-8") as fh:
        s = parse_session(fh.read())
    out = execute(s, ["print"])
    assert out.status == "value"
