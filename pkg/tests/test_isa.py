"""Instruction decoding and single-step execution."""

import pytest

from rvmcheck.events import BarrierDomain, EventKind, TlbiKind
from rvmcheck.isa import (DecodeError, FaultInfo, Instruction, MemoryServices,
                          Program, ThreadContext, Value, decode,
                          exception_entry, spsr_pack, spsr_unpack, step)


def test_decode_loads_and_stores():
    i = decode("ldr x2, [x0]")
    assert (i.op, i.rd, i.rn, i.imm) == ("ldr", 2, 0, 0)
    i = decode("str x3, [x1, #8]")
    assert (i.op, i.rd, i.rn, i.imm) == ("str", 3, 1, 8)
    assert decode("ldar x2, [x0]").op == "ldar"
    assert decode("stlr x2, [x0]").op == "stlr"


def test_decode_register_aliases():
    assert decode("ldr X2, [X0]").rd == 2
    assert decode("mov x1, xzr").rm == 31


def test_decode_data_processing():
    assert decode("mov x3, #1").imm == 1
    assert decode("mov x3, x4").rm == 4
    i = decode("add x13, x13, #4")
    assert (i.rd, i.rn, i.imm) == (13, 13, 4)
    assert decode("cmp x2, #1").rn == 2


def test_decode_barriers():
    assert decode("dmb sy").barrier is BarrierDomain.FULL
    assert decode("dsb ishst").barrier is BarrierDomain.STORE
    assert decode("dsb ish").barrier is BarrierDomain.FULL
    assert decode("isb").op == "isb"
    with pytest.raises(DecodeError):
        decode("dmb ld")


def test_decode_tlbi():
    i = decode("tlbi vae1is, x4")
    assert i.tlbi is TlbiKind.VAE1IS
    assert i.rd == 4
    assert decode("tlbi vmalle1is").rd is None
    with pytest.raises(DecodeError):
        decode("tlbi rvae1, x0")


def test_decode_sysregs_and_branches():
    assert decode("mrs x13, ELR_EL1").sysreg == "ELR_EL1"
    assert decode("msr ttbr0_el1, x0").sysreg == "TTBR0_EL1"
    assert decode("b.eq 1f").cond == "eq"
    assert decode("b out").label == "out"
    with pytest.raises(DecodeError):
        decode("msr FPCR, x0")
    with pytest.raises(DecodeError):
        decode("b.lt 1f")
    with pytest.raises(DecodeError):
        decode("madd x0, x1, x2, x3")


class NullServices(MemoryServices):
    """Services stub for instructions that touch no memory."""

    def barrier(self, ctx, kind, domain):
        return []

    def exception(self, ctx, kind):
        return []

    def sysreg_write(self, ctx, name, value):
        return []


def run_lines(lines, regs=None, base=0x8000):
    program = Program()
    addr = base
    for line in lines:
        program.instrs[addr] = decode(line)
        addr += 4
    ctx = ThreadContext(tid=0, pc=base)
    for n, v in (regs or {}).items():
        ctx.regs[n] = Value(v)
    services = NullServices()
    end = addr
    while base <= ctx.pc < end and not ctx.halted:
        events, ctx = step(ctx, program.instrs[ctx.pc], program, services)
    return ctx


def test_step_mov_add_lsl():
    ctx = run_lines(["mov x1, #3", "add x2, x1, #4", "lsl x3, x2, #8"])
    assert ctx.regs[1].val == 3
    assert ctx.regs[2].val == 7
    assert ctx.regs[3].val == 7 << 8


def test_step_conditional_branch_taken():
    program = Program()
    lines = ["cmp x0, #1", "b.eq 1f", "mov x2, #10", "nop", "mov x3, #7"]
    # place the numeric label on the final mov
    addr = 0x8000
    for line in lines:
        program.instrs[addr] = decode(line)
        addr += 4
    program.numeric_labels.append(("1", 0x8010))
    ctx = ThreadContext(tid=0, pc=0x8000)
    ctx.regs[0] = Value(1)
    services = NullServices()
    while 0x8000 <= ctx.pc < addr:
        _, ctx = step(ctx, program.instrs[ctx.pc], program, services)
    assert 2 not in ctx.regs          # skipped
    assert ctx.regs[3].val == 7


def test_step_tracks_control_dependencies():
    program = Program()
    program.instrs[0x8000] = decode("cmp x0, #0")
    program.instrs[0x8004] = decode("b.ne 1f")
    program.numeric_labels.append(("1", 0x8008))
    ctx = ThreadContext(tid=0, pc=0x8000)
    ctx.regs[0] = Value(0, deps=frozenset({42}))
    services = NullServices()
    _, ctx = step(ctx, program.instrs[0x8000], program, services)
    _, ctx = step(ctx, program.instrs[0x8004], program, services)
    assert 42 in ctx.ctrl_deps


def test_spsr_roundtrip():
    for el in range(3):
        for sp in (0, 1):
            assert spsr_unpack(spsr_pack(el, sp)) == (el, sp)


def vector_ctx(el, sp):
    ctx = ThreadContext(tid=0, pc=0x9000, el=el, sp=sp)
    ctx.sysregs["VBAR_EL1"] = Value(0x1000)
    ctx.sysregs["VBAR_EL2"] = Value(0x2000)
    return ctx


def test_exception_entry_vector_from_lower_el():
    ctx = exception_entry(vector_ctx(0, 0),
                          FaultInfo(kind="translation", instr_addr=0x9000))
    assert ctx.pc == 0x1400
    assert ctx.el == 1
    assert ctx.sysregs["ELR_EL1"].val == 0x9000


def test_exception_entry_vector_same_el_spx():
    ctx = exception_entry(vector_ctx(1, 1),
                          FaultInfo(kind="translation", instr_addr=0x9000))
    assert ctx.pc == 0x1200


def test_exception_entry_stage2_targets_el2():
    ctx = exception_entry(vector_ctx(1, 0),
                          FaultInfo(kind="translation", stage=2,
                                    ipa=0x123000, instr_addr=0x9000))
    assert ctx.el == 2
    assert ctx.pc == 0x2400
    assert ctx.sysregs["HPFAR_EL2"].val == (0x123000 >> 12) << 4


def test_exception_entry_hvc_returns_past_instruction():
    ctx = exception_entry(vector_ctx(1, 0),
                          FaultInfo(kind="hvc", instr_addr=0x9000))
    assert ctx.el == 2
    assert ctx.sysregs["ELR_EL2"].val == 0x9004


def test_exception_entry_handler_fallback_warns():
    program = Program()
    program.instrs[0x1300] = decode("nop")
    program.handlers[0] = [0x1300]
    ctx = exception_entry(vector_ctx(0, 0),
                          FaultInfo(kind="translation", instr_addr=0x9000),
                          program)
    assert ctx.pc == 0x1300
    assert ctx.warnings


def test_eret_restores_el_and_pc():
    program = Program()
    program.instrs[0x8000] = decode("eret")
    ctx = ThreadContext(tid=0, pc=0x8000, el=1, sp=1)
    ctx.sysregs["ELR_EL1"] = Value(0xCAFE0)
    ctx.sysregs["SPSR_EL1"] = Value(spsr_pack(0, 0))
    _, ctx = step(ctx, program.instrs[0x8000], program, NullServices())
    assert ctx.pc == 0xCAFE0
    assert (ctx.el, ctx.sp) == (0, 0)


def test_resolve_numeric_labels_forward_and_back():
    program = Program()
    program.numeric_labels = [("1", 0x8000), ("1", 0x8010)]
    assert program.resolve_label("1f", 0x8004) == 0x8010
    assert program.resolve_label("1b", 0x8004) == 0x8000
    with pytest.raises(DecodeError):
        program.resolve_label("2f", 0x8004)
