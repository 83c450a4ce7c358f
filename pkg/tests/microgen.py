"""Random translation-free micro-tests plus a brute-force candidate oracle.

The generator emits tiny two-thread programs over two data locations where
every store value is a distinct constant.  For such programs the full set of
candidate executions is easy to enumerate directly: every load picks any
same-location store (or the initial zero) as its source, and every location
picks any order of its stores.  The oracle builds that set and the tests
compare it with the output of the real candidate enumerator.
"""

import itertools
import random
from typing import Dict, List, Optional, Tuple

from rvmcheck.events import EventKind
from rvmcheck.litmus import parse_test

LOCS = ("x", "y")

Op = Tuple  # ("st", loc, value) | ("ld", loc) | ("dmb",)


def generate_ops(rng: random.Random) -> List[List[Op]]:
    value = itertools.count(1)
    threads = []
    for _ in range(2):
        ops: List[Op] = []
        for _ in range(rng.randint(2, 3)):
            roll = rng.random()
            if roll < 0.4:
                ops.append(("st", rng.choice(LOCS), next(value)))
            elif roll < 0.8:
                ops.append(("ld", rng.choice(LOCS)))
            else:
                ops.append(("dmb",))
        threads.append(ops)
    return threads


def render_micro(name: str, threads: List[List[Op]]) -> str:
    lines = [f"[name]", name, "", "[page_table_setup]",
             "virtual x y;", ""]
    inits = []
    for tid, ops in enumerate(threads):
        lines.append(f"[thread {tid}]")
        inits += [f"{tid}:R0 = x", f"{tid}:R1 = y"]
        dest = 2
        for i, op in enumerate(ops):
            if op[0] == "st":
                _, loc, val = op
                reg = 10 + i
                inits.append(f"{tid}:R{reg} = {val}")
                lines.append(f"str x{reg}, [x{LOCS.index(loc)}]")
            elif op[0] == "ld":
                lines.append(f"ldr x{dest}, [x{LOCS.index(op[1])}]")
                dest += 1
            else:
                lines.append("dmb sy")
        lines.append("")
    lines += ["[init]"] + inits + ["", "[final]", "0:R0=x", ""]
    return "\n".join(lines)


def oracle_signatures(threads: List[List[Op]]):
    """All (rf, co) assignments for the generated program.

    Sources and writes are named (tid, index-in-thread); the initial write
    is None.  Returns a set of (frozenset of (read, source), co orders).
    """
    writes: Dict[str, List[Tuple[int, int]]] = {loc: [] for loc in LOCS}
    reads: List[Tuple[Tuple[int, int], str]] = []
    for tid, ops in enumerate(threads):
        for i, op in enumerate(ops):
            if op[0] == "st":
                writes[op[1]].append((tid, i))
            elif op[0] == "ld":
                reads.append(((tid, i), op[1]))

    rf_options = [[None] + writes[loc] for _, loc in reads]
    co_options = [list(itertools.permutations(writes[loc])) for loc in LOCS]
    out = set()
    for rf in itertools.product(*rf_options):
        for co in itertools.product(*co_options):
            out.add((frozenset(zip((r for r, _ in reads), rf)),
                     tuple(co)))
    return out


def enumerated_signatures(threads: List[List[Op]], **kwargs):
    from rvmcheck.candidates import enumerate_candidates
    from rvmcheck.pagetable import build_images

    spec = parse_test(render_micro("micro", threads))
    image = build_images(spec.parsed_setup())
    loc_pa = {image.env[loc].pa: loc for loc in LOCS}
    out = set()
    for cand in enumerate_candidates(spec, image, **kwargs):
        def key(eid) -> Optional[Tuple[int, int]]:
            e = cand.events[eid]
            return None if e.is_iw else (e.thread, e.instr_index)

        rf = frozenset(
            (key(r), key(w)) for r, w in cand.rf.items()
            if cand.events[r].kind is EventKind.R)
        co = []
        for loc in LOCS:
            pa = image.env[loc].pa
            order = [key(w) for w in cand.co.get(pa, []) if key(w)]
            co.append(tuple(order))
        out.add((rf, tuple(co)))
    return out
