"""Litmus file parsing, rendering and final-state evaluation."""

from pathlib import Path

import pytest

from rvmcheck.litmus import (And, Cmp, FormatError, Not, Or, Outcome,
                             PermissionFault, RegRef, check_final, parse_final,
                             parse_test, render_final, render_test)
from rvmcheck.pagetable import build_images, parse_setup

CORPUS = Path(__file__).parent / "corpus"

MINI = """
[name]
mini

[page_table_setup]
virtual x;

[thread 0]
mov x2, #1
str x2, [x0]

[thread 1]
ldr x2, [x0]

[handler 1 at 0x1400]
mov x2, #99

[init]
0:R0 = x
1:R0 = x

[final]
1:R2=1

[expected]
strong: allow
"""


def test_parse_sections():
    spec = parse_test(MINI)
    assert spec.name == "mini"
    assert list(spec.threads) == [0, 1]
    assert spec.threads[0] == ["mov x2, #1", "str x2, [x0]"]
    assert spec.handlers[1][0][0] == 0x1400
    assert [e.key for e in spec.inits] == ["R0", "R0"]
    assert spec.expected == {"strong": "allow"}


def test_render_roundtrip_on_mini():
    spec = parse_test(MINI)
    again = parse_test(render_test(spec))
    assert again.threads == spec.threads
    assert again.handlers == spec.handlers
    assert again.expected == spec.expected
    assert render_final(again.final) == render_final(spec.final)


@pytest.mark.parametrize("path", sorted(CORPUS.rglob("*.vmtest")),
                         ids=lambda p: p.stem)
def test_render_roundtrip_on_corpus(path):
    spec = parse_test(path.read_text())
    again = parse_test(render_test(spec))
    assert again.name == spec.name
    assert again.threads == spec.threads
    assert again.handlers == spec.handlers
    assert [(e.thread, e.key, e.expr) for e in again.inits] == \
        [(e.thread, e.key, e.expr) for e in spec.inits]
    assert again.expected == spec.expected
    assert render_final(again.final) == render_final(spec.final)
    assert parse_setup(again.setup_text) == parse_setup(spec.setup_text)


def test_parse_final_conjunction():
    expr = parse_final("1:R2=1 & 1:R3=55")
    assert isinstance(expr, And)
    assert expr.exprs[0] == Cmp(RegRef(1, "R2"), "1")


def test_parse_final_calls_in_rhs():
    expr = parse_final("0:R4=mkdesc3(oa=pa1) & 0:R3=55")
    assert isinstance(expr, And)
    assert expr.exprs[0].rhs == "mkdesc3(oa=pa1)"


def test_parse_final_disjunction_negation_parens():
    expr = parse_final("!(0:R1=1 | 0:R2=2) & 0:R3=3")
    assert isinstance(expr, And)
    assert isinstance(expr.exprs[0], Not)
    assert isinstance(expr.exprs[0].expr, Or)


def test_parse_final_permission_fault():
    expr = parse_final("permission_fault(L0, x)")
    assert expr == PermissionFault("L0", "x")


def test_parse_final_register_normalisation():
    assert parse_final("0:x5=1") == Cmp(RegRef(0, "R5"), "1")
    assert parse_final("1:pstate.el=1").lhs.reg == "PSTATE.EL"


@pytest.mark.parametrize("bad", [
    "0:R1", "R1=1", "0:R1=1 &", "0:R1=1 | | 0:R2=2", "(0:R1=1",
])
def test_parse_final_rejects_malformed(bad):
    with pytest.raises(FormatError):
        parse_final(bad)


@pytest.mark.parametrize("bad,msg", [
    ("[thread 0]\nnop", "name"),
    ("[name]\nt\n[thread 0]\nnop\n[thread 0]\nnop", "duplicate"),
    ("[name]\nt\n[thread 0]\nnop\n[bogus]\n", "unknown section"),
    ("[name]\nt\n[thread 0]\nnop\n[expected]\nstrong: maybe", "verdict"),
    ("[name]\nt", "thread"),
], ids=["missing-name", "dup-thread", "bad-section", "bad-verdict",
        "no-threads"])
def test_parse_test_rejects_malformed(bad, msg):
    with pytest.raises(FormatError, match=msg):
        parse_test(bad)


def outcome(regs=None, faults=None):
    image = build_images(parse_setup("physical pa1; virtual x;"))
    return Outcome(regs=regs or {}, faults=faults or [], image=image)


def test_check_final_reads_registers():
    out = outcome(regs={(0, "R2"): 1})
    assert check_final(parse_final("0:R2=1"), out)
    assert not check_final(parse_final("0:R2=2"), out)
    # unset registers compare as zero
    assert check_final(parse_final("0:R9=0"), out)


def test_check_final_rhs_uses_builtins():
    out = outcome(regs={(0, "R2"): 0xA00000})
    assert check_final(parse_final("0:R2=pa1"), out)


def test_check_final_boolean_structure():
    out = outcome(regs={(0, "R1"): 1, (0, "R2"): 2})
    assert check_final(parse_final("0:R1=1 & 0:R2=2"), out)
    assert check_final(parse_final("0:R1=9 | 0:R2=2"), out)
    assert not check_final(parse_final("!(0:R2=2)"), out)


def test_check_final_permission_fault_matches_kind_and_va():
    from rvmcheck.isa import FaultInfo
    image = build_images(parse_setup("physical pa1; virtual x;"))
    va = image.env["x"].addr
    out = Outcome(faults=[FaultInfo(kind="permission", va=va)], image=image)
    assert check_final(parse_final("permission_fault(x)"), out)
    out2 = Outcome(faults=[FaultInfo(kind="translation", va=va)], image=image)
    assert not check_final(parse_final("permission_fault(x)"), out2)
