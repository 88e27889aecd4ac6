import json

import pytest
from click.testing import CliRunner

from pptc.cli import main

PROOF = """H4 {wp(a, wp(b, phi))} a . b {phi}
  H1 {wp(a, wp(b, phi))} a {wp(b, phi)}
  H1 {wp(b, phi)} b {phi}
"""
DATA = """state s0, s1;
test phi @ s0 = true;
effect a @ s0 = {s1}; effect a @ s1 = {s0};
"""


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def run(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env)


class TestEquiv:
    def test_equivalent(self, files):
        r = run("equiv", files("x", "root a + b;"), files("y", "root b + a;"))
        assert r.exit_code == 0 and "verdict: equivalent" in r.output

    def test_not_equivalent(self, files):
        r = run("equiv", files("x", "root a || b;"), files("y", "root a . b + b . a;"), "--rel", "phhp")
        assert r.exit_code == 1

    def test_branching_json(self, files):
        r = run("--json", "equiv", files("x", "root hide{i}(a . i . b);"), files("y", "root a . b;"),
                "--rel", "prbstep")
        data = json.loads(r.output)
        assert r.exit_code == 0 and data["equivalent"] and data["relation"] == "prbstep"

    def test_parse_error(self, files):
        assert run("equiv", files("x", "root a + ;"), files("y", "root a;")).exit_code == 2

    def test_missing_file(self, files):
        assert run("equiv", "/nonexistent.pptc", files("y", "root a;")).exit_code == 2


class TestOtherCommands:
    def test_fmt(self, files):
        r = run("fmt", files("x", "root b + a;"))
        assert r.exit_code == 0 and "a + b" in r.output

    def test_normalize_trace(self, files):
        r = run("normalize", files("x", "root (a + b) . c;"), "--trace")
        assert r.exit_code == 0 and r.output.splitlines()[0] == "a . c + b . c" and "==>" in r.output

    def test_lts_export(self, files, tmp_path):
        out = tmp_path / "x.aut"
        r = run("lts", files("x", "root a +[1/2] b;"), "-o", str(out))
        assert r.exit_code == 0 and out.read_text().startswith("des (0, ")

    def test_state_limit(self, files, tmp_path):
        r = run("lts", files("x", "eq X = a . X . b; root X;"), "-o", str(tmp_path / "o"), "--max-states", "10")
        assert r.exit_code == 3

    def test_limits_from_environment(self, files, tmp_path):
        src = files("x", "eq X = a . X . b; root X;")
        assert run("lts", src, "-o", str(tmp_path / "o"), env={"PPTC_LIMITS": "max_states=10"}).exit_code == 3
        assert run("lts", src, "-o", str(tmp_path / "o"), env={"PPTC_LIMITS": "bogus"}).exit_code == 2

    def test_projection(self, files):
        r = run("pi", files("x", "eq X = a . b . X; root X;"), "2")
        assert r.exit_code == 0 and r.output.strip() == "a . (b . delta)"


class TestHoare:
    def test_triples(self, files):
        ok = run("hoare", files("x", DATA + "hoare {phi} a {!phi};"))
        bad = run("hoare", files("y", DATA + "hoare {phi} a {phi};"))
        assert ok.exit_code == 0 and "holds" in ok.output
        assert bad.exit_code == 1 and "FAILS" in bad.output

    def test_derivation(self, files):
        spec = files("x", DATA)
        assert run("hoare", spec, "--derivation", files("p", PROOF)).exit_code == 0
        broken = PROOF.replace("H1 {wp(b, phi)} b {phi}", "H1 {wp(b, !phi)} b {!phi}")
        r = run("hoare", spec, "--derivation", files("q", broken))
        assert r.exit_code == 1 and "rejected" in r.output

    def test_no_triples(self, files):
        assert run("hoare", files("x", DATA)).exit_code == 2


def test_axioms_subset():
    r = run("--json", "axioms", "--only", "A1", "--only", "A2", "--count", "5")
    assert r.exit_code == 0
    assert json.loads(r.output)


def test_abp():
    r = run("abp", "--loss", "1/3", "--no-branching")
    assert r.exit_code == 0 and "-> equal" in r.output
