import sys
sys.path.insert(0, "src")
from rvmcheck.litmus import parse_test, check_final
from rvmcheck.pagetable import build_images
from rvmcheck.candidates import enumerate_candidates

TEXT = """
[name]
MP.RTf.inv+dmbs

[page_table_setup]
physical pa1;
virtual x y;
x |-> pa1;
x ?-> invalid;

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
mov x3, #2

[init]
0:R0 = pte3(x, default)
0:R2 = extz(0, 64)
0:R1 = y
1:R0 = x
1:R1 = y
1:VBAR_EL1 = 0x1000

[final]
1:R2=1 & 1:R3=2

[expected]
strong: forbid
ets: allow
"""

test = parse_test(TEXT)
image = build_images(test.parsed_setup())
for red in (True, False):
    cands = list(enumerate_candidates(test, image, reduction=red))
    hits = [c for c in cands if check_final(test.final, c.outcome)]
    print(f"reduction={red}: candidates={len(cands)} matching={len(hits)}")
c = hits[0]
for e in c.events_sorted():
    print(" ", e.short(), "Tf" if e.faulting else "",
          "FAULT" if e.kind.name == "FAULT" else "")
env = c.relations()
print("trf:", sorted(env["trf"]))
print("tfr:", sorted(env["tfr"]))
print("Fault set:", sorted(env.set_("Fault")), "CSE:", sorted(env.set_("CSE")))
print("warnings:", c.warnings)
