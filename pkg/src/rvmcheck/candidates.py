"""Candidate-execution enumeration.

Threads are executed sequentially (the ISA layer performs no reordering); all
relaxed behaviour lives in the *choices* made for every read:

- each translation-table fetch picks a value from the cell's declared choice
  set plus any value a program store can put there;
- each explicit load picks a value from the location's value pool (initial
  value plus discovered store values).

Per-thread traces are enumerated by depth-first search over those choices,
iterated to a fixed point as new store values are discovered.  Traces are then
combined across threads; reads-from (rf), translation-reads-from (trf) and
per-location coherence (co) assignments are enumerated over each combination,
with value consistency holding by construction.  Isomorphic duplicates are
suppressed.  The wco order is *not* enumerated here; the models search for a
witness themselves.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

from . import isa
from .events import (BarrierDomain, Event, EventKind, Regime, TlbiKind,
                     TLBI_ALL, TLBI_BROADCAST, TLBI_BY_ASID, TLBI_BY_IPA,
                     TLBI_BY_VA, TLBI_EL2, TLBI_STAGE1, TLBI_STAGE2)
from .isa import (FaultInfo, FaultSignal, Instruction, Program, ThreadContext,
                  UnsupportedError, Value, decode, exception_entry)
from .litmus import Outcome, TestSpec
from .pagetable import OA_MASK, PageTableImage, SetupError, eval_expr
from .relations import Rel, RelationEnv
from .walk import Access, FaultKind, walk

THREAD_CODE_BASE = 0x8000
THREAD_CODE_STRIDE = 0x1000


class GenerationError(RuntimeError):
    pass


# ------------------------------------------------------------ program layout

def build_program(test: TestSpec) -> Program:
    program = Program()
    for tid, lines in sorted(test.threads.items()):
        addr = THREAD_CODE_BASE + tid * THREAD_CODE_STRIDE
        program.thread_entry[tid] = addr
        addr = _layout(program, tid, addr, lines)
    for tid, handlers in sorted(test.handlers.items()):
        for base, lines in handlers:
            program.handlers.setdefault(tid, []).append(base)
            _layout(program, tid, base, lines)
    return program


_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*|\d+)\s*:\s*(.*)$")


def _layout(program: Program, tid: int, addr: int, lines: List[str]) -> int:
    for line in lines:
        text = line.strip()
        while True:
            m = _LABEL_RE.match(text)
            if not m or (m.group(1).isdigit() is False
                         and m.group(2).startswith("=")):
                break
            label = m.group(1)
            if label.isdigit():
                program.numeric_labels.append((label, addr))
            else:
                program.labels[label] = addr
            text = m.group(2).strip()
        if not text:
            continue
        program.instrs[addr] = decode(text)
        program.thread_of_addr[addr] = tid
        addr += isa.INSTR_SIZE
    return addr


# ------------------------------------------------------------ choice search

class _Backtrack(Exception):
    pass


class Chooser:
    """Replays a trail of choice indices; new choice points append index 0.

    After a run, `advance` turns the trail into the next one in depth-first
    order, or returns None when the space is exhausted.
    """

    def __init__(self, trail: List[Tuple[int, int]]):
        self.trail = trail
        self.pos = 0

    def choose(self, n: int) -> int:
        if n <= 0:
            raise _Backtrack()
        if self.pos < len(self.trail):
            idx, _ = self.trail[self.pos]
            self.trail[self.pos] = (idx, n)
        else:
            self.trail.append((0, n))
        idx = self.trail[self.pos][0]
        self.pos += 1
        return idx

    def advance(self) -> Optional[List[Tuple[int, int]]]:
        trail = self.trail[:self.pos]
        while trail:
            idx, n = trail[-1]
            if idx + 1 < n:
                trail[-1] = (idx + 1, n)
                return trail
            trail.pop()
        return None


# ------------------------------------------------------------ thread runs

@dataclass
class ThreadTrace:
    tid: int
    events: List[Event]
    final_regs: Dict[str, int]
    final_pstate: Dict[str, int]
    faults: List[FaultInfo]
    warnings: List[str]
    store_values: Dict[int, Set[int]]

    def signature(self) -> tuple:
        return tuple(
            (e.kind, e.instr_index, e.pa, e.value, e.stage, e.level,
             e.faulting, e.acquire, e.release, e.barrier, e.tlbi_kind,
             e.tlbi_va_page, e.tlbi_asid, e.tlbi_ipa_page, e.tlbi_vmid)
            for e in self.events)


class _Services(isa.MemoryServices):
    def __init__(self, runner: "_ThreadRunner"):
        self.r = runner

    def _fresh(self, **kw) -> Event:
        r = self.r
        ev = Event(eid=r.next_eid, thread=r.tid, instr_index=r.instr_index,
                   instr_addr=r.instr_addr, **kw)
        r.next_eid += 1
        return ev

    def _tr_context(self, ctx: ThreadContext):
        if ctx.el == 2:
            sctlr = ctx.read_sysreg("SCTLR_EL2").val
            if not (sctlr & 1):
                raise UnsupportedError("unsupported: MMU off")
            ttbr = ctx.read_sysreg("TTBR0_EL2").val
            return (Regime.EL2, ttbr & OA_MASK, None, (ttbr >> 48) & 0xFFFF,
                    None)
        ttbr = ctx.read_sysreg("TTBR0_EL1").val
        asid = (ttbr >> 48) & 0xFFFF
        if "VTTBR_EL2" in ctx.sysregs:
            vttbr = ctx.sysregs["VTTBR_EL2"].val
            return (Regime.EL10_2STAGE, ttbr & OA_MASK, vttbr & OA_MASK,
                    asid, (vttbr >> 48) & 0xFFFF)
        return (Regime.EL10_S1, ttbr & OA_MASK, None, asid, None)

    def _translate(self, ctx: ThreadContext, va: Value,
                   access: Access) -> Tuple[List[Event], object]:
        r = self.r
        regime, s1_root, s2_root, asid, vmid = self._tr_context(ctx)
        events: List[Event] = []

        def read(cell: int, stage: int, level: int) -> int:
            options = r.cell_choices(cell)
            idx = r.chooser.choose(len(options))
            return options[idx]

        result = walk(regime, va.val, access, read, s1_root=s1_root,
                      s2_root=s2_root, el=ctx.el)
        for wr in result.reads:
            events.append(self._fresh(
                kind=EventKind.T, va=wr.va, ipa=wr.ipa, pa=wr.pa,
                value=wr.value, stage=wr.stage, level=wr.level, el=ctx.el,
                asid=asid, vmid=vmid, regime=regime,
                faulting=not wr.view.valid,
                in_table_memory=r.image.in_table_memory(wr.pa),
                addr_deps=va.deps, ctrl_deps=ctx.ctrl_deps))
        if result.fault is not None:
            fault = FaultInfo(
                kind=("permission" if result.fault.kind is FaultKind.PERMISSION
                      else "translation"),
                stage=result.fault.stage, level=result.fault.level,
                va=va.val, ipa=result.fault.ipa,
                from_write=(access is Access.WRITE),
                instr_addr=r.instr_addr, thread=r.tid)
            events.append(self._fresh(
                kind=EventKind.FAULT, va=va.val, ipa=result.fault.ipa,
                el=ctx.el, stage=result.fault.stage, level=result.fault.level,
                from_read=(access is Access.READ),
                from_write=(access is Access.WRITE),
                addr_deps=va.deps, ctrl_deps=ctx.ctrl_deps))
            raise FaultSignal(events, fault)
        return events, result

    def load(self, ctx, va, acquire):
        r = self.r
        events, result = self._translate(ctx, va, Access.READ)
        pool = r.pool_values(result.pa)
        idx = r.chooser.choose(len(pool))
        value = pool[idx]
        ev = self._fresh(kind=EventKind.R, va=va.val, ipa=result.ipa,
                         pa=result.pa, value=value, el=ctx.el,
                         acquire=acquire,
                         in_table_memory=r.image.in_table_memory(result.pa),
                         addr_deps=va.deps, ctrl_deps=ctx.ctrl_deps)
        events.append(ev)
        return events, Value(value, frozenset({ev.eid}))

    def store(self, ctx, va, value, release):
        r = self.r
        events, result = self._translate(ctx, va, Access.WRITE)
        pa = result.pa
        if r.image.in_table_memory(pa):
            cell = r.image.memory[pa]
            allowed = cell.choices() | {0}
            if value.val not in allowed:
                raise SetupError(
                    f"store of 0x{value.val:x} to descriptor cell 0x{pa:x} "
                    f"is outside the declared choice set "
                    f"{{{', '.join(hex(v) for v in sorted(allowed))}}}")
        r.store_values.setdefault(pa, set()).add(value.val)
        events.append(self._fresh(
            kind=EventKind.W, va=va.val, ipa=result.ipa, pa=pa,
            value=value.val, el=ctx.el, release=release,
            in_table_memory=r.image.in_table_memory(pa),
            addr_deps=va.deps, data_deps=value.deps, ctrl_deps=ctx.ctrl_deps))
        return events

    def barrier(self, ctx, kind, domain):
        return [self._fresh(kind=kind, barrier=domain,
                            ctrl_deps=ctx.ctrl_deps)]

    def tlbi(self, ctx, kind, operand):
        r = self.r
        regime, _, _, asid, vmid = self._tr_context(ctx)
        ev_kw = dict(kind=EventKind.TLBI, tlbi_kind=kind, el=ctx.el,
                     ctrl_deps=ctx.ctrl_deps)
        opv = operand.val if operand is not None else 0
        if kind in TLBI_BY_VA:
            ev_kw["tlbi_va_page"] = opv & ((1 << 44) - 1)
        if kind in TLBI_BY_ASID:
            ev_kw["tlbi_asid"] = (opv >> 48) & 0xFFFF
        if kind in TLBI_BY_IPA:
            ev_kw["tlbi_ipa_page"] = opv & ((1 << 36) - 1)
        if kind not in TLBI_EL2:
            ev_kw["tlbi_vmid"] = vmid
        return [self._fresh(**ev_kw)]

    def sysreg_write(self, ctx, name, value):
        if name in isa.CONTEXT_SYSREGS:
            return [self._fresh(kind=EventKind.MSR, value=value.val,
                                addr_deps=value.deps,
                                ctrl_deps=ctx.ctrl_deps)]
        return []

    def exception(self, ctx, kind):
        k = EventKind.TE if kind == "te" else EventKind.ERET
        return [self._fresh(kind=k, ctrl_deps=ctx.ctrl_deps)]


class _ThreadRunner:
    """One depth-first run of a single thread under a choice trail."""

    def __init__(self, test: TestSpec, image: PageTableImage,
                 program: Program, tid: int, pools: Dict[int, Set[int]],
                 store_value_feed: Dict[int, Set[int]], reduction: bool,
                 chooser: Chooser):
        self.test = test
        self.image = image
        self.program = program
        self.tid = tid
        self.pools = pools
        self.store_value_feed = store_value_feed
        self.reduction = reduction
        self.chooser = chooser
        self.next_eid = 0
        self.instr_index = 0
        self.instr_addr = 0
        self.store_values: Dict[int, Set[int]] = {}
        self.events: List[Event] = []

    def cell_choices(self, cell: int) -> List[int]:
        written = self.store_value_feed.get(cell, set())
        choice_set = self.image.memory.get(cell)
        if choice_set is None:
            base = {self.image.initial_value(cell)}
        elif self.reduction:
            base = {choice_set.initial}
        else:
            base = choice_set.choices()
        return sorted(base | set(written))

    def pool_values(self, pa: int) -> List[int]:
        written = self.store_value_feed.get(pa, set())
        return sorted({self.image.initial_value(pa)} | set(written))

    def run(self) -> ThreadTrace:
        ctx = ThreadContext(tid=self.tid,
                            pc=self.program.thread_entry[self.tid])
        _apply_inits(ctx, self.test, self.image, self.program)
        services = _Services(self)
        while ctx.pc in self.program.instrs and not ctx.halted:
            instr = self.program.instrs[ctx.pc]
            self.instr_addr = ctx.pc
            evs, ctx = isa.step(ctx, instr, self.program, services)
            self.events.extend(evs)
            self.instr_index += 1
        return ThreadTrace(
            tid=self.tid, events=self.events,
            final_regs={f"R{n}": v.val for n, v in ctx.regs.items()},
            final_pstate={"EL": ctx.el, "SP": ctx.sp},
            faults=list(ctx.faults), warnings=list(ctx.warnings),
            store_values=self.store_values)


def _apply_inits(ctx: ThreadContext, test: TestSpec, image: PageTableImage,
                 program: Program) -> None:
    labels = dict(program.labels)
    for entry in test.inits:
        if entry.thread is not None and entry.thread != ctx.tid:
            continue
        value = eval_expr(entry.expr, image, labels)
        m = re.fullmatch(r"R(\d+)", entry.key)
        if m:
            ctx.regs[int(m.group(1))] = Value(value)
        elif entry.key == "PSTATE.EL":
            ctx.el = value
        elif entry.key == "PSTATE.SP":
            ctx.sp = value
        elif entry.key.startswith("PSTATE."):
            raise GenerationError(f"unsupported PSTATE field {entry.key}")
        else:
            ctx.sysregs[entry.key] = Value(value)
    if ("TTBR0_EL1" not in ctx.sysregs and image.default_table is not None):
        ctx.sysregs["TTBR0_EL1"] = Value(image.roots[image.default_table])


def enumerate_thread_traces(test: TestSpec, image: PageTableImage,
                            program: Program, tid: int,
                            pools: Dict[int, Set[int]],
                            reduction: bool) -> List[ThreadTrace]:
    traces: List[ThreadTrace] = []
    seen = set()
    trail: Optional[List[Tuple[int, int]]] = []
    while trail is not None:
        chooser = Chooser(trail)
        runner = _ThreadRunner(test, image, program, tid, pools, pools,
                               reduction, chooser)
        try:
            trace = runner.run()
        except _Backtrack:
            trace = None
        if trace is not None:
            sig = trace.signature()
            if sig not in seen:
                seen.add(sig)
                traces.append(trace)
        trail = chooser.advance()
    return traces


# ------------------------------------------------------------ candidates

@dataclass
class Candidate:
    test: TestSpec
    image: PageTableImage
    events: Dict[int, Event]
    rf: Dict[int, int]                 # R eid -> W eid
    trf: Dict[int, int]                # T eid -> W eid
    co: Dict[int, List[int]]           # pa -> ordered W eids (initial first)
    outcome: Outcome
    warnings: List[str] = field(default_factory=list)
    _relenv: Optional[RelationEnv] = None

    def relations(self) -> RelationEnv:
        if self._relenv is None:
            self._relenv = derive_relations(self)
        return self._relenv

    def events_sorted(self) -> List[Event]:
        return [self.events[k] for k in sorted(self.events)]


def _touched_pas(events: List[Event]) -> Set[int]:
    return {e.pa for e in events if e.pa is not None}


def enumerate_candidates(test: TestSpec, image: PageTableImage,
                         budget: int = 20000,
                         reduction: bool = True) -> Iterator[Candidate]:
    program = build_program(test)
    labels = dict(program.labels)

    # fixed point over discovered store values
    pools: Dict[int, Set[int]] = {}
    per_thread: Dict[int, List[ThreadTrace]] = {}
    for _ in range(16):
        per_thread = {
            tid: enumerate_thread_traces(test, image, program, tid, pools,
                                         reduction)
            for tid in sorted(test.threads)}
        grown = False
        for traces in per_thread.values():
            for tr in traces:
                for pa, vals in tr.store_values.items():
                    cur = pools.setdefault(pa, set())
                    if not vals <= cur:
                        cur |= vals
                        grown = True
        if not grown:
            break
    else:
        raise GenerationError("store-value discovery did not converge")

    count = 0
    seen_keys = set()
    for combo in itertools.product(*(per_thread[tid]
                                     for tid in sorted(per_thread))):
        for cand in _assemble(test, image, program, labels, combo):
            key = _candidate_key(cand)
            if key in seen_keys:
                continue
            seen_keys.add(key)
            count += 1
            if count > budget:
                raise GenerationError(
                    f"candidate budget ({budget}) exceeded for {test.name}")
            yield cand


def _assemble(test: TestSpec, image: PageTableImage, program: Program,
              labels: Dict[str, int],
              combo: Tuple[ThreadTrace, ...]) -> Iterator[Candidate]:
    # renumber events globally; initial writes get the lowest ids
    events: Dict[int, Event] = {}
    remap: Dict[Tuple[int, int], int] = {}
    all_events: List[Event] = []
    for tr in combo:
        all_events.extend(tr.events)
    pas = sorted(_touched_pas(all_events))
    next_id = 0
    iw_of_pa: Dict[int, int] = {}
    for pa in pas:
        ev = Event(eid=next_id, thread=None, instr_index=-1, kind=EventKind.W,
                   pa=pa, value=image.initial_value(pa), is_iw=True,
                   in_table_memory=image.in_table_memory(pa))
        events[next_id] = ev
        iw_of_pa[pa] = next_id
        next_id += 1
    for tr in combo:
        for ev in tr.events:
            remap[(tr.tid, ev.eid)] = next_id
            next_id += 1
    for tr in combo:
        for ev in tr.events:
            nid = remap[(tr.tid, ev.eid)]
            events[nid] = Event(
                **{**ev.__dict__,
                   "eid": nid,
                   "addr_deps": frozenset(remap[(tr.tid, d)]
                                          for d in ev.addr_deps),
                   "data_deps": frozenset(remap[(tr.tid, d)]
                                          for d in ev.data_deps),
                   "ctrl_deps": frozenset(remap[(tr.tid, d)]
                                          for d in ev.ctrl_deps)})

    writes_by_pa: Dict[int, List[int]] = {pa: [iw_of_pa[pa]] for pa in pas}
    for eid in sorted(events):
        ev = events[eid]
        if ev.kind is EventKind.W and not ev.is_iw:
            writes_by_pa[ev.pa].append(eid)

    # read source options (value-matching writes)
    def sources(ev: Event) -> List[int]:
        return [w for w in writes_by_pa[ev.pa]
                if events[w].value == ev.value]

    reads = [e for e in events.values() if e.kind is EventKind.R]
    treads = [e for e in events.values() if e.kind is EventKind.T]
    rf_options = [sources(r) for r in reads]
    trf_options = [sources(t) for t in treads]
    if any(not o for o in rf_options) or any(not o for o in trf_options):
        return

    co_spaces: List[List[List[int]]] = []
    co_pas: List[int] = []
    for pa in pas:
        ws = [w for w in writes_by_pa[pa] if not events[w].is_iw]
        if len(ws) > 1:
            co_pas.append(pa)
            co_spaces.append([list(p) for p in itertools.permutations(ws)])

    outcome_base = _build_outcome(test, image, labels, combo)
    warnings = [w for tr in combo for w in tr.warnings]

    for rf_choice in itertools.product(*rf_options):
        for trf_choice in itertools.product(*trf_options):
            for co_choice in itertools.product(*co_spaces):
                co = {pa: list(writes_by_pa[pa]) for pa in pas}
                for pa, order in zip(co_pas, co_choice):
                    co[pa] = [iw_of_pa[pa]] + order
                yield Candidate(
                    test=test, image=image, events=dict(events),
                    rf={r.eid: w for r, w in zip(reads, rf_choice)},
                    trf={t.eid: w for t, w in zip(treads, trf_choice)},
                    co=co, outcome=outcome_base, warnings=warnings)


def _build_outcome(test: TestSpec, image: PageTableImage,
                   labels: Dict[str, int],
                   combo: Tuple[ThreadTrace, ...]) -> Outcome:
    outcome = Outcome(image=image, labels=labels)
    for tr in combo:
        for reg, val in tr.final_regs.items():
            outcome.regs[(tr.tid, reg)] = val
        for k, v in tr.final_pstate.items():
            outcome.pstate[(tr.tid, k)] = v
        outcome.faults.extend(tr.faults)
    return outcome


def _candidate_key(cand: Candidate) -> tuple:
    evsig = tuple(
        (e.thread, e.instr_index, e.kind, e.pa, e.value, e.stage, e.level,
         e.faulting, e.acquire, e.release, e.barrier, e.tlbi_kind,
         e.tlbi_va_page, e.tlbi_asid, e.tlbi_ipa_page, e.tlbi_vmid)
        for e in cand.events_sorted())
    return (evsig,
            tuple(sorted(cand.rf.items())),
            tuple(sorted(cand.trf.items())),
            tuple(sorted((pa, tuple(order))
                         for pa, order in cand.co.items())))


def reduce_irrelevant_translations(cand: Candidate) -> FrozenSet[int]:
    """Translation reads whose descriptor cell has a singleton choice set, is
    never written, and is not named by the final assertion.  Their value is
    forced; the generator already collapses them out of the choice space when
    reduction is enabled."""
    written = {e.pa for e in cand.events.values()
               if e.kind is EventKind.W and not e.is_iw}
    out = set()
    for e in cand.events.values():
        if e.kind is not EventKind.T:
            continue
        cell = cand.image.memory.get(e.pa)
        if cell is not None and not cell.alternatives and e.pa not in written:
            out.add(e.eid)
    return frozenset(out)


# ------------------------------------------------------------ relations

def _tlbi_affects(tlbi: Event, t: Event) -> bool:
    kind = tlbi.tlbi_kind
    if kind not in TLBI_BROADCAST and t.thread != tlbi.thread:
        return False
    if t.regime is Regime.EL2:
        return kind in TLBI_EL2
    if kind in TLBI_EL2:
        return False
    if t.stage == 2 and kind not in TLBI_STAGE2:
        return False
    if t.stage == 1 and kind not in TLBI_STAGE1:
        return False
    if tlbi.tlbi_vmid is not None and t.vmid is not None \
            and tlbi.tlbi_vmid != t.vmid:
        return False
    if kind in TLBI_ALL:
        return True
    if kind in TLBI_BY_VA and t.stage == 1:
        if t.va is None or (t.va >> 12) != tlbi.tlbi_va_page:
            return False
    if kind in TLBI_BY_ASID:
        if t.asid is None or t.asid != tlbi.tlbi_asid:
            return False
    if kind in TLBI_BY_IPA:
        if t.stage != 2 or t.ipa is None \
                or (t.ipa >> 12) != tlbi.tlbi_ipa_page:
            return False
    return True


def derive_relations(cand: Candidate) -> RelationEnv:
    env = RelationEnv()
    events = cand.events
    eids = sorted(events)

    def select(pred) -> FrozenSet[int]:
        return frozenset(e for e in eids if pred(events[e]))

    E = events
    env.sets["R"] = select(lambda e: e.kind is EventKind.R)
    env.sets["W"] = select(lambda e: e.kind is EventKind.W)
    env.sets["T"] = select(lambda e: e.kind is EventKind.T)
    env.sets["T_f"] = select(lambda e: e.kind is EventKind.T and e.faulting)
    env.sets["M"] = env.set_("R") | env.set_("W")
    env.sets["A"] = select(lambda e: e.acquire)
    env.sets["Q"] = frozenset()
    env.sets["L"] = select(lambda e: e.release)
    env.sets["ISB"] = select(lambda e: e.kind is EventKind.ISB)
    env.sets["TE"] = select(lambda e: e.kind is EventKind.TE)
    env.sets["ERET"] = select(lambda e: e.kind is EventKind.ERET)
    env.sets["CSE"] = env.set_("ISB") | env.set_("TE") | env.set_("ERET")
    env.sets["MSR"] = select(lambda e: e.kind is EventKind.MSR)
    env.sets["ContextChange"] = env.set_("MSR") | env.set_("TE") \
        | env.set_("ERET")
    env.sets["Fault"] = select(lambda e: e.kind is EventKind.FAULT)
    env.sets["FaultFromW"] = select(
        lambda e: e.kind is EventKind.FAULT and e.from_write)
    env.sets["FaultFromR"] = select(
        lambda e: e.kind is EventKind.FAULT and e.from_read)
    env.sets["W_invalid"] = select(lambda e: e.writes_invalid)
    env.sets["W_valid"] = select(lambda e: e.writes_valid)
    env.sets["IW"] = select(lambda e: e.is_iw)
    env.sets["Stage1"] = select(
        lambda e: e.kind is EventKind.T and e.stage == 1)
    env.sets["Stage2"] = select(
        lambda e: e.kind is EventKind.T and e.stage == 2)
    env.sets["dmb_full"] = select(
        lambda e: (e.kind is EventKind.DMB and e.barrier is BarrierDomain.FULL)
        or (e.kind is EventKind.DSB and e.barrier is BarrierDomain.FULL))
    env.sets["dsb_full"] = select(
        lambda e: e.kind is EventKind.DSB and e.barrier is BarrierDomain.FULL)
    env.sets["dsb_st"] = select(lambda e: e.kind is EventKind.DSB)
    env.sets["dmb_st"] = env.sets["dmb_full"] | env.sets["dsb_st"]
    env.sets["dmb_ld"] = env.sets["dmb_full"]
    env.sets["TLBI"] = select(lambda e: e.kind is EventKind.TLBI)
    env.sets["TLBI_S1"] = select(
        lambda e: e.kind is EventKind.TLBI and e.tlbi_kind in TLBI_STAGE1)
    env.sets["TLBI_S2"] = select(
        lambda e: e.kind is EventKind.TLBI and e.tlbi_kind in TLBI_STAGE2)

    # program structure
    iio, io = set(), set()
    by_thread: Dict[int, List[int]] = {}
    for e in eids:
        if E[e].thread is not None:
            by_thread.setdefault(E[e].thread, []).append(e)
    for evs in by_thread.values():
        for a, b in itertools.combinations(evs, 2):
            if E[a].instr_index == E[b].instr_index:
                iio.add((a, b))
            else:
                io.add((a, b))
    env["iio"] = Rel(iio)
    env["instruction-order"] = Rel(io)
    not_t = select(lambda e: e.kind is not EventKind.T)
    env["po"] = Rel(io).restrict(not_t, not_t)

    same = {"pa": lambda e: e.pa,
            "va_page": lambda e: e.va >> 12 if e.va is not None else None,
            "ipa_page": lambda e: e.ipa >> 12 if e.ipa is not None else None}
    for name, keyf in same.items():
        groups: Dict[int, List[int]] = {}
        for e in eids:
            k = keyf(E[e])
            if k is not None:
                groups.setdefault(k, []).append(e)
        pairs = set()
        for g in groups.values():
            pairs.update((a, b) for a in g for b in g if a != b)
        env[f"same_{name}"] = Rel(pairs)

    # dependencies
    env["addr"] = Rel((d, e) for e in eids for d in E[e].addr_deps)
    env["data"] = Rel((d, e) for e in eids for d in E[e].data_deps)
    env["ctrl"] = Rel((d, e) for e in eids for d in E[e].ctrl_deps
                      if E[e].kind is not EventKind.T)

    # communication
    int_pairs = Rel((a, b) for a in eids for b in eids
                    if a != b and E[a].thread is not None
                    and E[a].thread == E[b].thread)
    env["int"] = int_pairs
    rf = Rel((w, r) for r, w in cand.rf.items())
    trf = Rel((w, t) for t, w in cand.trf.items())
    env["rf"] = rf
    env["trf"] = trf
    env["rfi"] = rf & int_pairs
    env["rfe"] = rf - env["rfi"]
    env["trfi"] = trf & int_pairs
    env["trfe"] = trf - env["trfi"]

    co_pairs = set()
    co_pos: Dict[int, Tuple[int, int]] = {}
    for pa, order in cand.co.items():
        for i, a in enumerate(order):
            co_pos[a] = (pa, i)
            for b in order[i + 1:]:
                co_pairs.add((a, b))
    env["co"] = Rel(co_pairs)

    fr, tfr = set(), set()
    for r, w in cand.rf.items():
        pa, i = co_pos[w]
        for w2 in cand.co[pa][i + 1:]:
            fr.add((r, w2))
    for t, w in cand.trf.items():
        pa, i = co_pos[w]
        for w2 in cand.co[pa][i + 1:]:
            tfr.add((t, w2))
    env["fr"] = Rel(fr)
    env["tfr"] = Rel(tfr)
    env["fri"] = env["fr"] & int_pairs
    env["fre"] = env["fr"] - env["fri"]
    env["tfri"] = env["tfr"] & int_pairs
    env["tfre"] = env["tfr"] - env["tfri"]

    # po-loc over explicit accesses; po-pa over everything with a pa
    env["po-loc"] = env["po"] & env["same_pa"]
    env["po-pa"] = env["instruction-order"] & env["same_pa"]

    # same-translation: T events of one instruction's walk
    env["same-trans"] = Rel((a, b) for (a, b) in iio
                            if E[a].kind is EventKind.T
                            and E[b].kind is EventKind.T) \
        | Rel((b, a) for (a, b) in iio
              if E[a].kind is EventKind.T and E[b].kind is EventKind.T)

    tlbis = env.set_("TLBI")
    ts = env.set_("T")
    env["tlb_affects"] = Rel((i, t) for i in tlbis for t in ts
                             if _tlbi_affects(E[i], E[t]))
    return env
