"""The `.vmtest` litmus file format.

A test file is a sequence of bracketed sections:

    [name]              test name
    [page_table_setup]  setup language text (optional)
    [thread N]          assembly for thread N (labels allowed)
    [handler N at A]    handler code for thread N placed at address A
    [init]              register / system-register initial values
    [final]             the asserted final-state expression
    [expected]          model verdicts, e.g. "strong: forbid" / "ets: allow"

Register names Rn and Xn are interchangeable; system registers are
case-insensitive.  Init lines may be prefixed "T:" to scope them to thread T;
unprefixed lines apply to every thread.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .pagetable import PageTableImage, SetupSpec, eval_expr, parse_setup


class FormatError(ValueError):
    pass


# ------------------------------------------------------------ final exprs

@dataclass(frozen=True)
class RegRef:
    thread: int
    reg: str            # "R2" (normalised) or "PSTATE.EL" etc.


@dataclass(frozen=True)
class Cmp:
    lhs: RegRef
    rhs: str            # value expression text


@dataclass(frozen=True)
class PermissionFault:
    label: Optional[str]
    va: str


@dataclass(frozen=True)
class Not:
    expr: "StateExpr"


@dataclass(frozen=True)
class And:
    exprs: Tuple["StateExpr", ...]


@dataclass(frozen=True)
class Or:
    exprs: Tuple["StateExpr", ...]


StateExpr = Union[Cmp, PermissionFault, Not, And, Or]


def _norm_reg(name: str) -> str:
    m = re.fullmatch(r"[RrXx](\d+)", name)
    if m:
        return f"R{int(m.group(1))}"
    if name.upper().startswith("PSTATE."):
        return "PSTATE." + name.split(".", 1)[1].upper()
    return name.upper()


_FINAL_TOKEN = re.compile(
    r"\s*(?:(?P<atom>\d+\s*:\s*[A-Za-z_][A-Za-z0-9_.]*\s*=\s*"
    r"(?:[^&|()!]|\([^()]*\))+"
    r"|permission_fault\s*\([^)]*\))"
    r"|(?P<op>[&|!()]))")


def parse_final(text: str) -> StateExpr:
    tokens: List[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _FINAL_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormatError(f"cannot parse final expression near "
                              f"{text[pos:pos+25]!r}")
        pos = m.end()
        tokens.append((m.group("atom") or m.group("op")).strip())

    def parse_or(i: int):
        lhs, i = parse_and(i)
        exprs = [lhs]
        while i < len(tokens) and tokens[i] == "|":
            rhs, i = parse_and(i + 1)
            exprs.append(rhs)
        return (exprs[0] if len(exprs) == 1 else Or(tuple(exprs))), i

    def parse_and(i: int):
        lhs, i = parse_not(i)
        exprs = [lhs]
        while i < len(tokens) and tokens[i] == "&":
            rhs, i = parse_not(i + 1)
            exprs.append(rhs)
        return (exprs[0] if len(exprs) == 1 else And(tuple(exprs))), i

    def parse_not(i: int):
        if i >= len(tokens):
            raise FormatError("truncated final expression")
        if tokens[i] == "!":
            inner, i = parse_not(i + 1)
            return Not(inner), i
        if tokens[i] == "(":
            inner, i = parse_or(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise FormatError("unbalanced parenthesis in final expression")
            return inner, i + 1
        return parse_atom(i)

    def parse_atom(i: int):
        tok = tokens[i]
        m = re.fullmatch(r"permission_fault\s*\(([^)]*)\)", tok)
        if m:
            args = [a.strip() for a in m.group(1).split(",") if a.strip()]
            if len(args) == 2:
                return PermissionFault(args[0], args[1]), i + 1
            return PermissionFault(None, args[0]), i + 1
        m = re.fullmatch(r"(\d+)\s*:\s*([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(.+)",
                         tok, re.S)
        if not m:
            raise FormatError(f"bad final atom {tok!r}")
        ref = RegRef(int(m.group(1)), _norm_reg(m.group(2)))
        return Cmp(ref, m.group(3).strip()), i + 1

    expr, i = parse_or(0)
    if i != len(tokens):
        raise FormatError("trailing tokens in final expression")
    return expr


def render_final(expr: StateExpr) -> str:
    if isinstance(expr, Cmp):
        return f"{expr.lhs.thread}:{expr.lhs.reg}={expr.rhs}"
    if isinstance(expr, PermissionFault):
        if expr.label:
            return f"permission_fault({expr.label}, {expr.va})"
        return f"permission_fault({expr.va})"
    if isinstance(expr, Not):
        return f"!({render_final(expr.expr)})"
    if isinstance(expr, And):
        return " & ".join(f"({render_final(e)})" if isinstance(e, Or) else
                          render_final(e) for e in expr.exprs)
    if isinstance(expr, Or):
        return " | ".join(render_final(e) for e in expr.exprs)
    raise TypeError(expr)


# ------------------------------------------------------------ test spec

@dataclass
class InitEntry:
    thread: Optional[int]     # None = all threads
    key: str                  # "R0" or a system register or "PSTATE.X"
    expr: str


@dataclass
class TestSpec:
    name: str
    setup_text: str = ""
    threads: Dict[int, List[str]] = field(default_factory=dict)
    handlers: Dict[int, List[Tuple[int, List[str]]]] = field(default_factory=dict)
    inits: List[InitEntry] = field(default_factory=list)
    final: Optional[StateExpr] = None
    expected: Dict[str, str] = field(default_factory=dict)

    def parsed_setup(self) -> SetupSpec:
        return parse_setup(self.setup_text)


_SECTION_RE = re.compile(r"^\[([^\]]+)\]\s*$")


def parse_test(text: str) -> TestSpec:
    sections: List[Tuple[str, List[str]]] = []
    current: Optional[List[str]] = None
    for line in text.splitlines():
        m = _SECTION_RE.match(line.strip())
        if m:
            current = []
            sections.append((m.group(1).strip(), current))
        elif current is not None:
            current.append(line.rstrip())
        elif line.strip():
            raise FormatError(f"content before first section: {line!r}")

    spec = TestSpec(name="")
    for header, lines in sections:
        body = [l for l in lines if l.strip() and not l.strip().startswith("#")]
        if header == "name":
            if not body:
                raise FormatError("empty [name] section")
            spec.name = body[0].strip()
        elif header == "page_table_setup":
            spec.setup_text = "\n".join(lines).strip()
        elif header.startswith("thread"):
            tid = int(header.split()[1])
            if tid in spec.threads:
                raise FormatError(f"duplicate [thread {tid}]")
            spec.threads[tid] = [l.strip() for l in body]
        elif header.startswith("handler"):
            m = re.fullmatch(r"handler\s+(\d+)\s+at\s+(0[xX][0-9a-fA-F_]+|\d+)",
                             header)
            if not m:
                raise FormatError(f"bad handler header [{header}]")
            tid = int(m.group(1))
            addr = int(m.group(2).replace("_", ""), 0)
            spec.handlers.setdefault(tid, []).append(
                (addr, [l.strip() for l in body]))
        elif header == "init":
            for line in body:
                m = re.fullmatch(
                    r"(?:(\d+)\s*:)?\s*([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(.+)",
                    line.strip())
                if not m:
                    raise FormatError(f"bad init line {line!r}")
                tid = int(m.group(1)) if m.group(1) is not None else None
                spec.inits.append(InitEntry(tid, _norm_reg(m.group(2)),
                                            m.group(3).strip()))
        elif header == "final":
            spec.final = parse_final(" ".join(body))
        elif header == "expected":
            for line in body:
                k, _, v = line.partition(":")
                if not _:
                    raise FormatError(f"bad expected line {line!r}")
                key, val = k.strip().lower(), v.strip().lower()
                if val not in ("allow", "forbid") \
                        and key not in ("candidates", "bbm"):
                    raise FormatError(f"bad expected verdict {line!r}")
                spec.expected[key] = val
        else:
            raise FormatError(f"unknown section [{header}]")
    if not spec.name:
        raise FormatError("missing [name] section")
    if not spec.threads:
        raise FormatError("no [thread N] sections")
    return spec


def render_test(spec: TestSpec) -> str:
    out = [f"[name]", spec.name, ""]
    if spec.setup_text:
        out += ["[page_table_setup]", spec.setup_text, ""]
    for tid in sorted(spec.threads):
        out += [f"[thread {tid}]"] + spec.threads[tid] + [""]
    for tid in sorted(spec.handlers):
        for addr, lines in spec.handlers[tid]:
            out += [f"[handler {tid} at 0x{addr:x}]"] + lines + [""]
    if spec.inits:
        out.append("[init]")
        for e in spec.inits:
            prefix = f"{e.thread}:" if e.thread is not None else ""
            out.append(f"{prefix}{e.key}={e.expr}")
        out.append("")
    if spec.final is not None:
        out += ["[final]", render_final(spec.final), ""]
    if spec.expected:
        out.append("[expected]")
        for k, v in spec.expected.items():
            out.append(f"{k}: {v}")
        out.append("")
    return "\n".join(out)


# ------------------------------------------------------------ final check

@dataclass
class Outcome:
    """Final state of one candidate execution, as seen by [final]."""

    regs: Dict[Tuple[int, str], int] = field(default_factory=dict)
    pstate: Dict[Tuple[int, str], int] = field(default_factory=dict)
    faults: List[object] = field(default_factory=list)  # FaultInfo records
    image: Optional[PageTableImage] = None
    labels: Dict[str, int] = field(default_factory=dict)


def check_final(assertion: StateExpr, outcome: Outcome) -> bool:
    if isinstance(assertion, And):
        return all(check_final(e, outcome) for e in assertion.exprs)
    if isinstance(assertion, Or):
        return any(check_final(e, outcome) for e in assertion.exprs)
    if isinstance(assertion, Not):
        return not check_final(assertion.expr, outcome)
    if isinstance(assertion, Cmp):
        ref = assertion.lhs
        if ref.reg.startswith("PSTATE."):
            got = outcome.pstate.get((ref.thread, ref.reg.split(".")[1]), 0)
        else:
            got = outcome.regs.get((ref.thread, ref.reg), 0)
        want = eval_expr(assertion.rhs, outcome.image, outcome.labels)
        return got == want
    if isinstance(assertion, PermissionFault):
        want_va = eval_expr(assertion.va, outcome.image, outcome.labels)
        for f in outcome.faults:
            if getattr(f, "kind", None) != "permission":
                continue
            if f.va != want_va:
                continue
            if assertion.label is not None:
                want_addr = outcome.labels.get(assertion.label.rstrip(":"))
                if want_addr is not None and f.instr_addr != want_addr:
                    continue
            return True
        return False
    raise TypeError(assertion)
