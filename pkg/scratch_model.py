import sys
sys.path.insert(0, "src")
from rvmcheck.litmus import parse_test, check_final
from rvmcheck.pagetable import build_images
from rvmcheck.candidates import enumerate_candidates
from rvmcheck.models import check_strong

MP_POS = """
[name]
MP+pos
[thread 0]
mov x2, #1
str x2, [x0]
mov x3, #1
str x3, [x1]
[thread 1]
ldr x2, [x1]
ldr x3, [x0]
[page_table_setup]
virtual x y;
[init]
0:R0 = x
0:R1 = y
1:R0 = x
1:R1 = y
[final]
1:R2=1 & 1:R3=0
"""

MP_DMBS = MP_POS.replace("str x2, [x0]\nmov x3, #1",
                         "str x2, [x0]\ndmb sy\nmov x3, #1") \
                .replace("ldr x2, [x1]\nldr x3", "ldr x2, [x1]\ndmb sy\nldr x3") \
                .replace("MP+pos", "MP+dmbs")

MP_RTF_INV = """
[name]
MP.RTf.inv+dmbs
[page_table_setup]
physical pa1;
virtual x y;
x |-> invalid;
x ?-> pa1;
[thread 0]
str x2, [x0]
dmb sy
mov x3, #1
str x3, [x1]
[thread 1]
ldr x2, [x1]
dmb sy
ldr x3, [x0]
[handler 1 at 0x1400]
mov x3, #101
[init]
0:R0 = pte3(x, default)
0:R2 = mkdesc3(oa=pa1)
0:R1 = y
1:R0 = x
1:R1 = y
1:VBAR_EL1 = 0x1000
[final]
1:R2=1 & 1:R3=101
"""

COWTF_PO = """
[name]
CoWTf.inv+po
[page_table_setup]
physical pa1;
virtual x;
x |-> invalid;
x ?-> pa1;
[thread 0]
str x2, [x0]
ldr x3, [x1]
[handler 0 at 0x1400]
mov x3, #101
[init]
0:R0 = pte3(x, default)
0:R2 = mkdesc3(oa=pa1)
0:R1 = x
0:VBAR_EL1 = 0x1000
[final]
0:R3=101
"""

COWTF_DSBISB = COWTF_PO.replace("str x2, [x0]\nldr x3",
                                "str x2, [x0]\ndsb sy\nisb\nldr x3") \
                       .replace("+po", "+dsb-isb")


def run(text, ets=False):
    test = parse_test(text)
    image = build_images(test.parsed_setup())
    allowed = False
    n = 0
    for cand in enumerate_candidates(test, image):
        n += 1
        if not check_final(test.final, cand.outcome):
            continue
        res = check_strong(cand, ets=ets)
        if res.consistent:
            allowed = True
    print(f"{test.name:24s} ets={ets}  candidates={n}  "
          f"verdict={'allow' if allowed else 'forbid'}")


run(MP_POS)
run(MP_DMBS)
run(MP_RTF_INV, ets=False)
run(MP_RTF_INV, ets=True)
run(COWTF_PO)
run(COWTF_DSBISB)
