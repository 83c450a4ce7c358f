"""Axiomatic consistency checking of candidate executions.

Three models share one candidate/relation vocabulary:

- the strong model: a single acyclicity axiom over an ordered-before relation
  `ob` that includes translation reads, TLB-invalidation ordering, context
  synchronisation and fault ordering, with an optional ETS strengthening;
- the weak model: the base ordered-before plus per-behaviour emptiness axioms
  (break / make / break-before-make patterns at both stages);
- the base model: the plain user-mode ordering over executions with all
  translation machinery erased.

Both translation-aware models quantify existentially over `wco`, a linear
order of writes and TLBIs extending coherence: a candidate is consistent when
some wco witness satisfies every axiom.  The witness search enumerates linear
extensions of the forced partial order (coherence plus the wco-independent
ordered-before edges between writes/TLBIs), which stays tiny on litmus-sized
executions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .candidates import Candidate
from .events import EventKind, TlbiKind, TLBI_BY_ASID, TLBI_BY_VA
from .relations import Rel, RelationEnv, find_cycle


@dataclass
class ModelResult:
    consistent: bool
    model: str
    wco: Optional[List[int]] = None        # witness order of W/TLBI events
    failed_axiom: Optional[str] = None
    cycle: Optional[List[int]] = None
    cycle_edges: List[Tuple[int, int, str]] = field(default_factory=list)


# ------------------------------------------------------------ ob components

def _ids(s) -> Rel:
    return Rel((e, e) for e in s)


def _strong_components(env: RelationEnv, wco: Rel,
                       ets: bool) -> Dict[str, Rel]:
    po = env["po"]
    io = env["instruction-order"]
    iio = env["iio"]
    addr, data, ctrl = env["addr"], env["data"], env["ctrl"]
    rfi, trfi = env["rfi"], env["trfi"]
    T, Tf = env.set_("T"), env.set_("T_f")
    W, M = env.set_("W"), env.set_("M")
    ISB, CSE = env.set_("ISB"), env.set_("CSE")
    dmb_full = env.set_("dmb_full")
    dmb_st, dmb_ld = env.set_("dmb_st"), env.set_("dmb_ld")
    dsb = env.set_("dsb_full")
    A, L = env.set_("A"), env.set_("L")
    TLBI = env.set_("TLBI")
    S1, S2 = env.set_("Stage1"), env.set_("Stage2")
    TLBI_S1, TLBI_S2 = env.set_("TLBI_S1"), env.set_("TLBI_S2")
    fault = env.set_("Fault")
    fault_w = env.set_("FaultFromW")
    msr = env.set_("MSR")
    ctxchg = env.set_("ContextChange")
    tfr, tfri = env["tfr"], env["tfri"]
    trf = env["trf"]
    tlb_aff = env["tlb_affects"]          # TLBI -> T
    tlb_aff_inv = tlb_aff.inv()
    ext = _external(env)

    speculative = ctrl | addr.seq(po) | io.restrict(T, None)

    obs = env["rfe"] | env["fr"] | wco | env["trfe"]

    dob = (addr | data
           | ctrl.restrict(None, W)
           | (ctrl | addr.seq(po)).restrict(None, ISB)
           | addr.seq(po).restrict(None, W)
           | (addr | data).seq(rfi)
           | (addr | data).seq(trfi)
           | io.restrict(T, W))

    bob = (po.restrict(M, dmb_full) | po.restrict(dmb_full, M)
           | po.restrict(env.set_("R"), dmb_ld) | po.restrict(dmb_ld, M)
           | po.restrict(W, dmb_st) | po.restrict(dmb_st, W)
           | po.restrict(L, A) | po.restrict(A, M) | po.restrict(M, L)
           | po.restrict(dsb, ISB)
           | po.restrict(dsb, TLBI) | po.restrict(TLBI, dsb)
           | po.restrict(dsb, CSE) | po.restrict(CSE, dsb))

    # translation-ordered-before
    dsb_then = po.restrict(None, dsb).seq(io)      # x ; po ; [dsb] ; io ; y
    tob = (tfr.restrict(Tf, None)
           | speculative.seq(trfi)
           | (tfri.restrict(Tf, None) & dsb_then.inv()))

    # TLB maintenance ordering
    tlb_barriered = (tfr.restrict(T, None).seq(wco).restrict(None, TLBI)
                     & tlb_aff_inv)
    maybe_cached = (trf.inv().restrict(T, None).seq(wco).restrict(None, TLBI)
                    & tlb_aff_inv)
    tcache1 = tlb_barriered.restrict(S1, TLBI_S1)
    tcache2 = tlb_barriered.restrict(S2, TLBI_S2)
    same_trans = env["same-trans"]
    s1_of_walk = same_trans.restrict(None, S1)
    obtlbi_translate = (
        tcache1
        | (tcache2 & s1_of_walk.seq(trf.inv()).seq(wco.inv()))
        | (tcache2.seq(wco.maybe()).restrict(None, TLBI_S1)
           & s1_of_walk.seq(maybe_cached)))
    obtlbi = (obtlbi_translate
              | _ids(env.set_("R") | W | fault).seq(iio.inv())
                .seq(obtlbi_translate & ext))

    ctxob = (speculative.restrict(None, msr)
             | io.restrict(CSE, None)
             | po.restrict(ctxchg, None).restrict(None, CSE)
             | speculative.restrict(None, CSE))

    obfault = (data.restrict(None, fault_w)
               | speculative.restrict(None, fault_w)
               | po.restrict(dmb_ld, fault)
               | po.restrict(dmb_st, fault_w)
               | po.restrict(A, fault)
               | addr.restrict(None, fault))

    comps = {
        "obs": obs, "dob": dob, "bob": bob, "iio": iio, "tob": tob,
        "obtlbi": obtlbi, "ctxob": ctxob, "obfault": obfault,
    }
    if ets:
        comps["obETS"] = (
            obfault.restrict(None, fault).seq(iio.inv()).restrict(None, Tf)
            | (po.restrict(TLBI, dsb).seq(io).restrict(None, T) & tlb_aff))
    return comps


def _external(env: RelationEnv) -> Rel:
    """Pairs of events on different threads (initial writes are external to
    every thread)."""
    intr = env["int"]
    eids = set()
    for name in ("R", "W", "T", "Fault", "TLBI", "CSE", "MSR"):
        eids |= env.set_(name)
    eids |= env.set_("dsb_st") | env.set_("dmb_full") | env.set_("ISB")
    return Rel((a, b) for a in eids for b in eids
               if a != b and (a, b) not in intr)


def _base_components(env: RelationEnv) -> Dict[str, Rel]:
    po = env["po"]
    addr, data, ctrl = env["addr"], env["data"], env["ctrl"]
    W, M = env.set_("W"), env.set_("M")
    ISB = env.set_("ISB")
    A, L = env.set_("A"), env.set_("L")
    dmb_full = env.set_("dmb_full")
    dmb_st, dmb_ld = env.set_("dmb_st"), env.set_("dmb_ld")
    dob = (addr | data
           | ctrl.restrict(None, W)
           | (ctrl | addr.seq(po)).restrict(None, ISB)
           | addr.seq(po).restrict(None, W)
           | (addr | data).seq(env["rfi"]))
    bob = (po.restrict(M, dmb_full) | po.restrict(dmb_full, M)
           | po.restrict(env.set_("R"), dmb_ld) | po.restrict(dmb_ld, M)
           | po.restrict(W, dmb_st) | po.restrict(dmb_st, W)
           | po.restrict(L, A) | po.restrict(A, M) | po.restrict(M, L))
    return {"obs": env["rfe"] | env["fre"] | env["coe"],
            "dob": dob, "bob": bob}


def _coe(env: RelationEnv) -> Rel:
    return env["co"] - (env["co"] & env["int"])


# ------------------------------------------------------------ axioms

def _internal_ok(env: RelationEnv) -> Optional[List[int]]:
    return find_cycle(env["po-loc"] | env["rf"] | env["fr"] | env["co"])


def _translation_internal_ok(env: RelationEnv) -> Optional[List[int]]:
    return find_cycle(env["po-pa"] | env["trfi"])


# ------------------------------------------------------------ wco search

def solve_wco(cand: Candidate, env: RelationEnv,
              base_ob: Rel) -> List[Rel]:
    """Yield candidate wco witnesses: linear orders over W union TLBI that
    extend coherence and the wco-independent ordered-before edges."""
    W = env.set_("W")
    nodes = sorted(W | env.set_("TLBI"))
    iw = [n for n in nodes if cand.events[n].is_iw]
    rest = [n for n in nodes if not cand.events[n].is_iw]
    forced = (env["co"] | base_ob.plus().restrict(nodes, nodes)).plus()
    out: List[Rel] = []
    for perm in itertools.permutations(rest):
        order = iw + list(perm)
        pos = {n: i for i, n in enumerate(order)}
        if any(pos[a] >= pos[b] for a, b in forced
               if a in pos and b in pos):
            continue
        out.append(Rel((a, b) for a in order for b in order
                       if pos[a] < pos[b]))
    return out


def _union(comps: Dict[str, Rel]) -> Rel:
    ob = Rel()
    for r in comps.values():
        ob = ob | r
    return ob


def _edge_labels(comps: Dict[str, Rel], cycle: List[int]) -> List[Tuple[int, int, str]]:
    out = []
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        names = [n for n, r in comps.items() if (a, b) in r]
        out.append((a, b, "|".join(names) if names else "ob+"))
    return out


def _wco_order(wco: Rel, nodes) -> List[int]:
    return sorted(nodes, key=lambda n: len([1 for (a, b) in wco if b == n]))


# ------------------------------------------------------------ strong model

def check_strong(cand: Candidate, ets: bool = False) -> ModelResult:
    env = cand.relations()
    name = "strong-ets" if ets else "strong"
    cyc = _internal_ok(env)
    if cyc is not None:
        return ModelResult(False, name, failed_axiom="internal", cycle=cyc)
    cyc = _translation_internal_ok(env)
    if cyc is not None:
        return ModelResult(False, name,
                           failed_axiom="translation-internal", cycle=cyc)
    base = _union(_strong_components(env, Rel(), ets))
    last: Optional[ModelResult] = None
    nodes = env.set_("W") | env.set_("TLBI")
    for wco in solve_wco(cand, env, base):
        comps = _strong_components(env, wco, ets)
        ob = _union(comps)
        cyc = find_cycle(ob)
        if cyc is None:
            return ModelResult(True, name, wco=_wco_order(wco, nodes))
        last = ModelResult(False, name, failed_axiom="external", cycle=cyc,
                           cycle_edges=_edge_labels(comps, cyc))
    if last is None:
        last = ModelResult(False, name, failed_axiom="external")
    return last


# ------------------------------------------------------------ weak model

def _weak_ob(env: RelationEnv, wco: Rel) -> Dict[str, Rel]:
    comps = _base_components(env)
    po = env["po"]
    io = env["instruction-order"]
    CSE = env.set_("CSE")
    msr = env.set_("MSR")
    speculative = (env["ctrl"] | env["addr"].seq(po)
                   | io.restrict(env.set_("T"), None))
    ctxob = (speculative.restrict(None, msr)
             | io.restrict(CSE, None)
             | po.restrict(env.set_("ContextChange"), None).restrict(None, CSE)
             | speculative.restrict(None, CSE))
    comps["obs"] = env["rfe"] | env["fre"] | _coe(env) | wco
    comps["iio"] = env["iio"]
    comps["ctxob"] = ctxob
    return comps


def _weak_axioms(env: RelationEnv, ob: Rel) -> Optional[str]:
    """Evaluate the per-behaviour emptiness patterns; returns the name of the
    first non-empty one."""
    po = env["po"]
    io = env["instruction-order"]
    iio = env["iio"]
    co = env["co"]
    trf, loc = env["trf"], env["same_pa"]
    tlb_aff = env["tlb_affects"]
    ext = _external(env)
    obp = ob.plus()
    dsb = env.set_("dsb_full")
    CSE = env.set_("CSE")
    M = env.set_("M")
    T, Tf = env.set_("T"), env.set_("T_f")
    S1, S2 = env.set_("Stage1"), env.set_("Stage2")
    W = env.set_("W")
    W_inv, W_val = env.set_("W_invalid"), env.set_("W_valid")
    IW = env.set_("IW")
    TLBI_S1, TLBI_S2 = env.set_("TLBI_S1"), env.set_("TLBI_S2")

    def tail_s1(cse_or_m: FrozenSet[int], through_iio: bool,
                t_set: FrozenSet[int]) -> Rel:
        """[TLBI-S1]; po; [dsb]; ob; [x]; (io | iio^-1); [T], scoped by
        tlb_affects."""
        if through_iio:
            seq = obp.restrict(None, cse_or_m).seq(iio.inv()) \
                     .restrict(None, t_set)
        else:
            seq = obp.restrict(None, cse_or_m).seq(io).restrict(None, t_set)
        return (po.restrict(TLBI_S1, dsb).seq(seq)) & tlb_aff

    # brk1: write hidden by break + broadcast TLBI completing before a remote
    # access whose walk still used it
    brk1 = (co.restrict(IW | W, W_inv).seq(obp).restrict(None, dsb)
            .seq(po).seq(tail_s1(M, True, T) & ext)) & trf & loc
    if brk1:
        return "brk1"
    brk2 = (co.restrict(IW | W, W_inv).seq(obp).restrict(None, dsb)
            .seq(po).seq(tail_s1(CSE, False, T))) & trf & loc
    if brk2:
        return "brk2"
    # bbm: a stale invalid entry observed by a faulting walk after the new
    # valid entry was made with full maintenance
    left = (co.restrict(IW | W_inv, W_val).seq(obp).restrict(None, CSE)
            .seq(io).restrict(None, Tf & S1))
    right = obp.restrict(None, dsb).seq(po).seq(tail_s1(CSE, False, T))
    bbm = left & right & trf & loc
    if bbm:
        return "bbm"

    def s2_pattern(inner_t: FrozenSet[int], through_iio: bool,
                   use_ext: bool, left_rel: Rel) -> Rel:
        inner = tail_s1(CSE if not through_iio else M, through_iio,
                        inner_t & S1)
        if use_ext:
            inner = inner & ext
        chain = (po.restrict(TLBI_S2, dsb).seq(po)
                 .seq(inner.seq(iio).restrict(None, S2))) & tlb_aff
        if use_ext:
            chain = chain & ext
        return left_rel.seq(po).seq(chain)

    left_brk = co.restrict(IW | W, W_inv).seq(obp).restrict(None, dsb)
    brk1s2 = s2_pattern(T, True, True, left_brk) & trf & loc
    if brk1s2:
        return "brk1s2"
    brk2s2 = s2_pattern(T, False, False, left_brk) & trf & loc
    if brk2s2:
        return "brk2s2"
    left_bbm = (co.restrict(IW | W_inv, W_val).seq(obp)
                .restrict(None, CSE).seq(io).restrict(None, Tf & S2))
    right_s2 = s2_pattern(T, False, False,
                          obp.restrict(None, dsb))
    bbms2 = left_bbm & right_s2 & trf & loc
    if bbms2:
        return "bbms2"
    return None


def check_weak(cand: Candidate) -> ModelResult:
    env = cand.relations()
    env["coe"] = _coe(env)
    cyc = _internal_ok(env)
    if cyc is not None:
        return ModelResult(False, "weak", failed_axiom="internal", cycle=cyc)
    cyc = _translation_internal_ok(env)
    if cyc is not None:
        return ModelResult(False, "weak",
                           failed_axiom="translation-internal", cycle=cyc)
    base = _union(_weak_ob(env, Rel()))
    last: Optional[ModelResult] = None
    nodes = env.set_("W") | env.set_("TLBI")
    for wco in solve_wco(cand, env, base):
        comps = _weak_ob(env, wco)
        ob = _union(comps)
        cyc = find_cycle(ob)
        if cyc is not None:
            last = ModelResult(False, "weak", failed_axiom="external",
                               cycle=cyc, cycle_edges=_edge_labels(comps, cyc))
            continue
        bad = _weak_axioms(env, ob)
        if bad is not None:
            last = ModelResult(False, "weak", failed_axiom=bad)
            continue
        return ModelResult(True, "weak", wco=_wco_order(wco, nodes))
    if last is None:
        last = ModelResult(False, "weak", failed_axiom="external")
    return last


# ------------------------------------------------------------ erasure / base

class EraseError(ValueError):
    pass


_ERASED = {EventKind.T, EventKind.TLBI, EventKind.MSR, EventKind.ISB,
           EventKind.TE, EventKind.ERET, EventKind.FAULT}


def erase(cand: Candidate) -> Candidate:
    """Strip translation machinery from a candidate over static tables.

    Requires: no writes into table memory, no TLBI, no MSR to a translation
    control, and no faults.  Aliasing is fine; erased events are keyed by PA.
    """
    for e in cand.events.values():
        if e.kind is EventKind.W and e.in_table_memory and not e.is_iw:
            raise EraseError("cannot erase: table memory is written")
        if e.kind is EventKind.TLBI:
            raise EraseError("cannot erase: TLBI present")
        if e.kind is EventKind.MSR:
            raise EraseError("cannot erase: translation control is written")
        if e.kind is EventKind.FAULT:
            raise EraseError("cannot erase: faults present")
    keep = {eid: e for eid, e in cand.events.items()
            if e.kind not in _ERASED
            and not (e.is_iw and e.in_table_memory)}
    rf = {r: w for r, w in cand.rf.items() if r in keep and w in keep}
    co = {pa: order for pa, order in cand.co.items()
          if all(w in keep for w in order)}
    return Candidate(test=cand.test, image=cand.image, events=keep,
                     rf=rf, trf={}, co=co, outcome=cand.outcome,
                     warnings=list(cand.warnings))


def check_base(cand: Candidate) -> ModelResult:
    """Armv8 user-mode check of an (already erased) candidate."""
    env = cand.relations()
    env["fre"] = env["fr"] - (env["fr"] & env["int"])
    env["coe"] = _coe(env)
    cyc = _internal_ok(env)
    if cyc is not None:
        return ModelResult(False, "base", failed_axiom="internal", cycle=cyc)
    comps = _base_components(env)
    ob = _union(comps)
    cyc = find_cycle(ob)
    if cyc is not None:
        return ModelResult(False, "base", failed_axiom="external", cycle=cyc,
                           cycle_edges=_edge_labels(comps, cyc))
    return ModelResult(True, "base")


# ------------------------------------------------------------ BBM detection

_PERM_MASK = ~((0b11 << 6) | 0)  # ignore AP[2:1] / S2AP when comparing


def _conflicting(a: int, b: int) -> bool:
    return (a & _PERM_MASK) != (b & _PERM_MASK)


def _tlbi_covers_cell(cand: Candidate, tlbi, cell_pa: int) -> bool:
    kind = tlbi.tlbi_kind
    vas = {t.va for t in cand.events.values()
           if t.kind is EventKind.T and t.pa == cell_pa and t.va is not None}
    asids = {t.asid for t in cand.events.values()
             if t.kind is EventKind.T and t.pa == cell_pa
             and t.asid is not None}
    if kind in TLBI_BY_VA and vas:
        if not any((va >> 12) == tlbi.tlbi_va_page for va in vas):
            return False
    if kind in TLBI_BY_ASID and asids:
        if tlbi.tlbi_asid not in asids:
            return False
    return True


def detect_bbm(cand: Candidate, result: Optional[ModelResult] = None) -> bool:
    """True when the candidate re-maps a live translation-table entry without
    an interposing break (invalid write, DSB, matching TLBI, DSB) between the
    two conflicting valid writes."""
    env = cand.relations()
    if result is not None and result.wco:
        pos = {n: i for i, n in enumerate(result.wco)}
        wco = Rel((a, b) for a in pos for b in pos if pos[a] < pos[b])
    else:
        wco = Rel()
    ob = _union(_strong_components(env, wco, ets=False)).plus()
    po = env["po"]
    dsb = env.set_("dsb_full")
    for pa, order in cand.co.items():
        writes = [cand.events[w] for w in order]
        if not any(e.in_table_memory for e in writes):
            continue
        for i, a in enumerate(writes):
            for j in range(i + 1, len(writes)):
                b = writes[j]
                if not (a.writes_valid or (a.is_iw and (a.value & 1))):
                    continue
                if not b.writes_valid:
                    continue
                if not _conflicting(a.value, b.value):
                    continue
                if not _has_break(cand, env, ob, po, dsb, order, i, j, pa):
                    return True
    return False


def _has_break(cand, env, ob, po, dsb, order, i, j, pa) -> bool:
    tlbis = [cand.events[t] for t in env.set_("TLBI")]
    b_eid = order[j]
    for k in range(i + 1, j):
        w = cand.events[order[k]]
        if not w.writes_invalid:
            continue
        for tl in tlbis:
            if not _tlbi_covers_cell(cand, tl, pa):
                continue
            # w ; ob ; [dsb] ; po ; TLBI ; po ; [dsb] ; ob ; b
            pre = [d for d in dsb if (w.eid, d) in ob and (d, tl.eid) in po]
            post = [d for d in dsb if (tl.eid, d) in po
                    and ((d, b_eid) in ob or (d, b_eid) in po)]
            if pre and post:
                return True
    return False


def bbm_smt(cand: Candidate) -> str:
    """Encode the per-location break-before-make obligation as SMT-LIB, for
    offline inspection with an SMT solver."""
    lines = ["(set-logic QF_UFLIA)",
             "(declare-fun wpos (Int) Int)  ; position of write in co"]
    idx = 0
    for pa, order in sorted(cand.co.items()):
        writes = [cand.events[w] for w in order]
        if not any(e.in_table_memory for e in writes):
            continue
        for w in writes:
            lines.append(f"; e{w.eid}: value 0x{w.value:x} at pa 0x{pa:x}")
        for a, b in zip(order, order[1:]):
            lines.append(f"(assert (< (wpos {a}) (wpos {b})))")
        for i, a in enumerate(writes):
            for b in writes[i + 1:]:
                va = a.value if a.value is not None else 0
                vb = b.value if b.value is not None else 0
                if (va & 1) and (vb & 1) and _conflicting(va, vb):
                    mid = " ".join(
                        f"(and (< (wpos {a.eid}) (wpos {w.eid}))"
                        f" (< (wpos {w.eid}) (wpos {b.eid})))"
                        for w in writes if w.writes_invalid) or "false"
                    lines.append(f"(assert (or {mid}))  ; break between "
                                 f"e{a.eid} and e{b.eid}")
                    idx += 1
    lines.append("(check-sat)")
    return "\n".join(lines)
