import sys
sys.path.insert(0, "src")
from rvmcheck.litmus import parse_test, check_final
from rvmcheck.pagetable import build_images
from rvmcheck.candidates import enumerate_candidates

TEXT = """
[name]
MP+pos

[page_table_setup]
virtual x y;

[thread 0]
mov x2, #1
str x2, [x0]
mov x3, #1
str x3, [x1]

[thread 1]
ldr x2, [x1]
ldr x3, [x0]

[init]
0:R0 = x
0:R1 = y
1:R0 = y
1:R1 = x

[final]
1:R2=1 & 1:R3=0

[expected]
strong: allow
"""

test = parse_test(TEXT)
image = build_images(test.parsed_setup())
cands = list(enumerate_candidates(test, image))
print("candidates:", len(cands))
hits = [c for c in cands if check_final(test.final, c.outcome)]
print("final-matching:", len(hits))
c = hits[0]
for e in c.events_sorted():
    print(" ", e.short())
env = c.relations()
print("rf:", sorted(env["rf"]))
print("po size:", len(env["po"]), "iio:", len(env["iio"]))
print("T set:", sorted(env.set_("T")))
print("co:", {hex(k): v for k, v in c.co.items() if len(v) > 1})
