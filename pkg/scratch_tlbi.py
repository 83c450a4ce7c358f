import sys
sys.path.insert(0, "src")
from rvmcheck.litmus import parse_test, check_final
from rvmcheck.pagetable import build_images
from rvmcheck.candidates import enumerate_candidates
from rvmcheck.models import check_strong


def run(text, ets=False, expect=None):
    test = parse_test(text)
    image = build_images(test.parsed_setup())
    allowed = False
    n = 0
    for cand in enumerate_candidates(test, image):
        n += 1
        if not check_final(test.final, cand.outcome):
            continue
        if check_strong(cand, ets=ets).consistent:
            allowed = True
    v = "allow" if allowed else "forbid"
    flag = "" if expect in (None, v) else "   <-- EXPECTED " + expect
    print(f"{test.name:36s} ets={int(ets)} cands={n:3d} verdict={v}{flag}")


BASE = """
[name]
{name}
[page_table_setup]
physical pa1;
virtual x;
x |-> pa1;
x ?-> invalid;
[thread 0]
{code}
[handler 0 at 0x1400]
mov x3, #101
[init]
0:R0 = pte3(x, default)
0:R2 = extz(0, 64)
0:R1 = x
0:R4 = page(x)
0:R5 = asid(0)
0:PSTATE.EL = 0b01
0:VBAR_EL1 = 0x1000
[final]
0:R3=0
"""

run(BASE.format(name="CoWinvT+dsb-isb", code="""str x2, [x0]
dsb sy
isb
ldr x3, [x1]"""), expect="allow")

run(BASE.format(name="CoWinvT.EL1+dsb-tlbiis-dsb", code="""str x2, [x0]
dsb sy
tlbi vae1is, x4
dsb sy
ldr x3, [x1]"""), expect="allow")

run(BASE.format(name="CoWinvT.EL1+dsb-tlbiis-dsb-isb", code="""str x2, [x0]
dsb sy
tlbi vae1is, x4
dsb sy
isb
ldr x3, [x1]"""), expect="forbid")

run(BASE.format(name="CoWinvT.EL1+dsb-tlbi-dsb-isb", code="""str x2, [x0]
dsb sy
tlbi vae1, x4
dsb sy
isb
ldr x3, [x1]"""), expect="forbid")

# ETS: TLBI;po;dsb then io orders the later walk even without ISB
run(BASE.format(name="CoWinvT.EL1+dsb-tlbiis-dsb (ets)", code="""str x2, [x0]
dsb sy
tlbi vae1is, x4
dsb sy
ldr x3, [x1]"""), ets=True, expect="forbid")

# MP.RT.EL1: cross-thread TLBI lift through [R];iio^-1;(obtlbi & ext)
MPRT = """
[name]
MP.RT.EL1+dsb-tlbiis-dsb+{p1}
[page_table_setup]
physical pa1;
virtual x y;
x |-> pa1;
x ?-> invalid;
[thread 0]
str x2, [x0]
dsb sy
tlbi vae1is, x4
dsb sy
mov x3, #1
str x3, [x1]
[thread 1]
ldr x2, [x1]
{code}
ldr x3, [x0]
[handler 1 at 0x1400]
mov x3, #101
[init]
0:R0 = pte3(x, default)
0:R2 = extz(0, 64)
0:R1 = y
0:R4 = page(x)
0:PSTATE.EL = 0b01
1:R0 = x
1:R1 = y
1:PSTATE.EL = 0b01
1:VBAR_EL1 = 0x1000
[final]
1:R2=1 & 1:R3=0
"""

run(MPRT.format(p1="dsb-isb", code="dsb sy\nisb"), expect="forbid")
run(MPRT.format(p1="dmb", code="dmb sy"), expect="forbid")
run(MPRT.format(p1="po", code="nop"), expect="allow")
