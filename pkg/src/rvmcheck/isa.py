"""A small AArch64 subset: decoding, per-thread execution, exception entry.

The executor is sequential per thread: it performs no reordering itself.  All
relaxed behaviour comes from the choices the surrounding candidate generator
makes for memory and translation reads.  Instructions are laid out 4 bytes
apart; branch targets, handler bases and ELR values are plain addresses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from .events import BarrierDomain, Event, EventKind, TlbiKind

INSTR_SIZE = 4
STEP_BUDGET = 256

SYSREGS = {
    "TTBR0_EL1", "TTBR0_EL2", "VTTBR_EL2", "VBAR_EL1", "VBAR_EL2",
    "ELR_EL1", "ELR_EL2", "SPSR_EL1", "SPSR_EL2", "SCTLR_EL2", "HPFAR_EL2",
}
CONTEXT_SYSREGS = {"TTBR0_EL1", "TTBR0_EL2", "VTTBR_EL2", "SCTLR_EL2"}


class DecodeError(ValueError):
    pass


class UnsupportedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Value:
    """A 64-bit value together with the ids of the read events it derives
    from (register dataflow)."""

    val: int
    deps: frozenset = frozenset()

    def map(self, fn: Callable[[int], int]) -> "Value":
        return Value(fn(self.val) & ((1 << 64) - 1), self.deps)


ZERO = Value(0)


@dataclass
class Instruction:
    op: str
    rd: Optional[int] = None
    rn: Optional[int] = None
    rm: Optional[int] = None
    imm: Optional[int] = None
    label: Optional[str] = None
    cond: Optional[str] = None
    sysreg: Optional[str] = None
    barrier: Optional[BarrierDomain] = None
    tlbi: Optional[TlbiKind] = None
    text: str = ""


_REG_RE = re.compile(r"^[xrw](\d+)$|^(xzr|wzr)$", re.I)


def _reg(tok: str) -> int:
    m = _REG_RE.match(tok.strip())
    if not m:
        raise DecodeError(f"bad register {tok!r}")
    if m.group(2):
        return 31
    n = int(m.group(1))
    if n > 30:
        raise DecodeError(f"bad register {tok!r}")
    return n


def _imm(tok: str) -> int:
    tok = tok.strip()
    if not tok.startswith("#"):
        raise DecodeError(f"expected immediate, got {tok!r}")
    return int(tok[1:].replace("_", ""), 0)


def _mem(tok: str) -> Tuple[int, int]:
    m = re.match(r"^\[\s*([xrw]\d+|xzr)\s*(?:,\s*(#[^\]]+))?\s*\]$",
                 tok.strip(), re.I)
    if not m:
        raise DecodeError(f"bad addressing operand {tok!r}")
    return _reg(m.group(1)), _imm(m.group(2)) if m.group(2) else 0


def decode(line: str) -> Instruction:
    """Decode one assembly line (without any label prefix)."""
    text = line.strip()
    m = re.match(r"^([A-Za-z][A-Za-z0-9.]*)\s*(.*)$", text)
    if not m:
        raise DecodeError(f"cannot decode {line!r}")
    op = m.group(1).lower()
    rest = m.group(2).strip()
    ops = [o.strip() for o in _split_operands(rest)] if rest else []

    if op in ("ldr", "ldar"):
        rn, off = _mem(ops[1])
        return Instruction(op, rd=_reg(ops[0]), rn=rn, imm=off, text=text)
    if op in ("str", "stlr"):
        rn, off = _mem(ops[1])
        return Instruction(op, rd=_reg(ops[0]), rn=rn, imm=off, text=text)
    if op == "mov":
        if ops[1].startswith("#"):
            return Instruction(op, rd=_reg(ops[0]), imm=_imm(ops[1]), text=text)
        return Instruction(op, rd=_reg(ops[0]), rm=_reg(ops[1]), text=text)
    if op == "add":
        return Instruction(op, rd=_reg(ops[0]), rn=_reg(ops[1]),
                           imm=_imm(ops[2]), text=text)
    if op == "lsl":
        return Instruction(op, rd=_reg(ops[0]), rn=_reg(ops[1]),
                           imm=_imm(ops[2]), text=text)
    if op == "cmp":
        return Instruction(op, rn=_reg(ops[0]), imm=_imm(ops[1]), text=text)
    if op == "b":
        return Instruction(op, label=ops[0], text=text)
    if op.startswith("b."):
        cond = op[2:]
        if cond not in ("eq", "ne"):
            raise DecodeError(f"unsupported condition {cond!r}")
        return Instruction("b.cond", cond=cond, label=ops[0], text=text)
    if op == "dmb":
        dom = ops[0].lower() if ops else "sy"
        if dom != "sy":
            raise DecodeError(f"unsupported dmb domain {dom!r}")
        return Instruction(op, barrier=BarrierDomain.FULL, text=text)
    if op == "dsb":
        dom = ops[0].lower() if ops else "sy"
        if dom == "ishst":
            return Instruction(op, barrier=BarrierDomain.STORE, text=text)
        if dom in ("sy", "ish", "nsh"):
            return Instruction(op, barrier=BarrierDomain.FULL, text=text)
        raise DecodeError(f"unsupported dsb domain {dom!r}")
    if op == "isb":
        return Instruction(op, text=text)
    if op == "tlbi":
        kind = ops[0].upper()
        try:
            tk = TlbiKind[kind]
        except KeyError:
            raise DecodeError(f"unsupported tlbi kind {kind!r}") from None
        rd = _reg(ops[1]) if len(ops) > 1 else None
        return Instruction(op, rd=rd, tlbi=tk, text=text)
    if op == "mrs":
        sysreg = ops[1].upper()
        if sysreg not in SYSREGS:
            raise DecodeError(f"unsupported system register {ops[1]!r}")
        return Instruction(op, rd=_reg(ops[0]), sysreg=sysreg, text=text)
    if op == "msr":
        sysreg = ops[0].upper()
        if sysreg not in SYSREGS:
            raise DecodeError(f"unsupported system register {ops[0]!r}")
        return Instruction(op, rd=_reg(ops[1]), sysreg=sysreg, text=text)
    if op == "svc":
        return Instruction(op, imm=_imm(ops[0]) if ops else 0, text=text)
    if op == "hvc":
        return Instruction(op, imm=_imm(ops[0]) if ops else 0, text=text)
    if op in ("eret", "nop"):
        return Instruction(op, text=text)
    raise DecodeError(f"unsupported mnemonic {op!r}")


def _split_operands(rest: str) -> List[str]:
    """Split on commas that are not inside brackets."""
    out, depth, cur = [], 0, ""
    for ch in rest:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur)
    return out


@dataclass
class Program:
    """Code layout for one test: address -> instruction, plus labels."""

    instrs: Dict[int, Instruction] = field(default_factory=dict)
    labels: Dict[str, int] = field(default_factory=dict)
    numeric_labels: List[Tuple[str, int]] = field(default_factory=list)
    thread_entry: Dict[int, int] = field(default_factory=dict)
    handlers: Dict[int, List[int]] = field(default_factory=dict)
    thread_of_addr: Dict[int, int] = field(default_factory=dict)

    def resolve_label(self, label: str, from_addr: int) -> int:
        m = re.fullmatch(r"(\d+)([fb])", label)
        if m:
            num, direction = m.group(1), m.group(2)
            addrs = sorted(a for n, a in self.numeric_labels if n == num)
            if direction == "f":
                for a in addrs:
                    if a > from_addr:
                        return a
            else:
                for a in reversed(addrs):
                    if a <= from_addr:
                        return a
            raise DecodeError(f"unresolved local label {label!r}")
        lab = label.rstrip(":")
        if lab in self.labels:
            return self.labels[lab]
        raise DecodeError(f"unresolved label {label!r}")


@dataclass
class ThreadContext:
    tid: int
    pc: int
    el: int = 0
    sp: int = 0
    regs: Dict[int, Value] = field(default_factory=dict)
    sysregs: Dict[str, Value] = field(default_factory=dict)
    nzcv: Value = ZERO
    ctrl_deps: frozenset = frozenset()
    halted: bool = False
    steps: int = 0
    warnings: List[str] = field(default_factory=list)
    faults: List[object] = field(default_factory=list)

    def read_reg(self, n: int) -> Value:
        if n == 31:
            return ZERO
        if n not in self.regs:
            self.warnings.append(f"thread {self.tid}: read of uninitialised X{n}")
            self.regs[n] = ZERO
        return self.regs[n]

    def write_reg(self, n: int, v: Value) -> None:
        if n != 31:
            self.regs[n] = v

    def read_sysreg(self, name: str) -> Value:
        if name not in self.sysregs:
            if name == "SCTLR_EL2":
                # MMU on unless a test explicitly turns it off
                return Value(1)
            self.warnings.append(
                f"thread {self.tid}: read of uninitialised {name}")
            self.sysregs[name] = ZERO
        return self.sysregs[name]


@dataclass
class FaultInfo:
    """Description of a synchronous exception being delivered."""

    kind: str                  # "translation" | "permission" | "svc" | "hvc"
    stage: Optional[int] = None
    level: Optional[int] = None
    va: Optional[int] = None
    ipa: Optional[int] = None
    from_write: bool = False
    instr_addr: Optional[int] = None
    thread: Optional[int] = None


def spsr_pack(el: int, sp: int) -> int:
    return (el << 2) | (sp & 1)


def spsr_unpack(m: int) -> Tuple[int, int]:
    return (m >> 2) & 0b11, m & 1


def exception_entry(ctx: ThreadContext, fault: FaultInfo,
                    program: Optional[Program] = None) -> ThreadContext:
    """Deliver a synchronous exception.

    Stage-2 faults and HVC target EL2; everything else targets EL1.  For
    faults the preferred return address is the faulting instruction itself;
    for SVC/HVC it is the next instruction.  The vector offset is 0x400 when
    coming from a lower EL, 0x200 for same-EL with SP_ELx, 0x0 for same-EL
    with SP_EL0.  When no code exists at the computed vector but the thread
    declares exactly one handler, execution continues there with a warning.
    """
    target = 2 if (fault.kind == "hvc" or fault.stage == 2) else 1
    if ctx.el > target:
        target = ctx.el
    from_el = ctx.el
    elr = fault.instr_addr if fault.instr_addr is not None else ctx.pc
    if fault.kind in ("svc", "hvc"):
        elr += INSTR_SIZE
    ctx.sysregs[f"ELR_EL{target}"] = Value(elr)
    ctx.sysregs[f"SPSR_EL{target}"] = Value(spsr_pack(from_el, ctx.sp))
    if fault.stage == 2 and fault.ipa is not None:
        ctx.sysregs["HPFAR_EL2"] = Value((fault.ipa >> 12) << 4)
    vbar = ctx.read_sysreg(f"VBAR_EL{target}").val
    if from_el < target:
        offset = 0x400
    elif ctx.sp:
        offset = 0x200
    else:
        offset = 0x0
    vector = vbar + offset
    if program is not None and vector not in program.instrs:
        declared = program.handlers.get(ctx.tid, [])
        if len(declared) == 1:
            ctx.warnings.append(
                f"thread {ctx.tid}: no code at vector 0x{vector:x}, "
                f"falling back to declared handler 0x{declared[0]:x}")
            vector = declared[0]
    ctx.el = target
    ctx.sp = 1
    ctx.pc = vector
    return ctx


class FaultSignal(Exception):
    """Raised by memory services when an access faults; carries the events
    already emitted (translation reads plus the fault ghost)."""

    def __init__(self, events: List[Event], fault: FaultInfo):
        super().__init__(fault.kind)
        self.events = events
        self.fault = fault


class MemoryServices:
    """Interface the executor provides to `step` for memory operations."""

    def load(self, ctx: ThreadContext, va: Value, acquire: bool) -> Tuple[List[Event], Value]:
        raise NotImplementedError

    def store(self, ctx: ThreadContext, va: Value, value: Value,
              release: bool) -> List[Event]:
        raise NotImplementedError

    def barrier(self, ctx: ThreadContext, kind: EventKind,
                domain: Optional[BarrierDomain]) -> List[Event]:
        raise NotImplementedError

    def tlbi(self, ctx: ThreadContext, kind: TlbiKind,
             operand: Optional[Value]) -> List[Event]:
        raise NotImplementedError

    def sysreg_write(self, ctx: ThreadContext, name: str,
                     value: Value) -> List[Event]:
        raise NotImplementedError

    def exception(self, ctx: ThreadContext, kind: str) -> List[Event]:
        """TE / ERET bookkeeping events."""
        raise NotImplementedError


def step(ctx: ThreadContext, instr: Instruction, program: Program,
         services: MemoryServices) -> Tuple[List[Event], ThreadContext]:
    """Execute one instruction, returning its event trace.

    ctx.pc must point at the instruction; it is advanced (or redirected for
    branches, exceptions and ERET) before returning.
    """
    here = ctx.pc
    ctx.steps += 1
    if ctx.steps > STEP_BUDGET:
        raise UnsupportedError(
            f"thread {ctx.tid}: instruction budget exceeded ({STEP_BUDGET})")
    nxt = here + INSTR_SIZE
    events: List[Event] = []
    op = instr.op

    try:
        if op in ("ldr", "ldar"):
            base = ctx.read_reg(instr.rn)
            va = Value(base.val + (instr.imm or 0), base.deps)
            evs, value = services.load(ctx, va, acquire=(op == "ldar"))
            events.extend(evs)
            ctx.write_reg(instr.rd, value)
        elif op in ("str", "stlr"):
            base = ctx.read_reg(instr.rn)
            va = Value(base.val + (instr.imm or 0), base.deps)
            data = ctx.read_reg(instr.rd)
            events.extend(services.store(ctx, va, data,
                                         release=(op == "stlr")))
        elif op == "mov":
            if instr.imm is not None:
                ctx.write_reg(instr.rd, Value(instr.imm))
            else:
                ctx.write_reg(instr.rd, ctx.read_reg(instr.rm))
        elif op == "add":
            ctx.write_reg(instr.rd, ctx.read_reg(instr.rn).map(
                lambda v: v + instr.imm))
        elif op == "lsl":
            ctx.write_reg(instr.rd, ctx.read_reg(instr.rn).map(
                lambda v: v << instr.imm))
        elif op == "cmp":
            v = ctx.read_reg(instr.rn)
            z = 1 if (v.val - instr.imm) & ((1 << 64) - 1) == 0 else 0
            ctx.nzcv = Value(z << 2, v.deps)     # only Z is modelled
        elif op == "b":
            nxt = program.resolve_label(instr.label, here)
        elif op == "b.cond":
            ctx.ctrl_deps = ctx.ctrl_deps | ctx.nzcv.deps
            z = bool(ctx.nzcv.val & 0b100)
            taken = z if instr.cond == "eq" else not z
            if taken:
                nxt = program.resolve_label(instr.label, here)
        elif op == "dmb":
            events.extend(services.barrier(ctx, EventKind.DMB, instr.barrier))
        elif op == "dsb":
            events.extend(services.barrier(ctx, EventKind.DSB, instr.barrier))
        elif op == "isb":
            events.extend(services.barrier(ctx, EventKind.ISB, None))
        elif op == "tlbi":
            operand = ctx.read_reg(instr.rd) if instr.rd is not None else None
            events.extend(services.tlbi(ctx, instr.tlbi, operand))
        elif op == "mrs":
            ctx.write_reg(instr.rd, ctx.read_sysreg(instr.sysreg))
        elif op == "msr":
            value = ctx.read_reg(instr.rd)
            ctx.sysregs[instr.sysreg] = value
            events.extend(services.sysreg_write(ctx, instr.sysreg, value))
        elif op in ("svc", "hvc"):
            events.extend(services.exception(ctx, "te"))
            fault = FaultInfo(kind=op, instr_addr=here, thread=ctx.tid)
            exception_entry(ctx, fault, program)
            return events, ctx
        elif op == "eret":
            events.extend(services.exception(ctx, "eret"))
            target = ctx.el
            spsr = ctx.read_sysreg(f"SPSR_EL{target}").val
            ctx.el, ctx.sp = spsr_unpack(spsr)
            ctx.pc = ctx.read_sysreg(f"ELR_EL{target}").val
            return events, ctx
        elif op == "nop":
            pass
        else:
            raise UnsupportedError(f"unsupported instruction {op!r}")
    except FaultSignal as sig:
        events.extend(sig.events)
        ctx.faults.append(sig.fault)
        events.extend(services.exception(ctx, "te"))
        exception_entry(ctx, sig.fault, program)
        return events, ctx

    ctx.pc = nxt
    return events, ctx
