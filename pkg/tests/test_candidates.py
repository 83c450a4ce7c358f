"""Candidate enumeration against the brute-force oracle."""

import random
from pathlib import Path

import pytest

from microgen import enumerated_signatures, generate_ops, oracle_signatures
from rvmcheck.candidates import (GenerationError, enumerate_candidates,
                                 reduce_irrelevant_translations)
from rvmcheck.events import EventKind
from rvmcheck.litmus import parse_test
from rvmcheck.pagetable import build_images

CORPUS = Path(__file__).parent / "corpus"


@pytest.mark.parametrize("seed", range(20))
def test_micro_candidates_match_oracle(seed):
    threads = generate_ops(random.Random(seed))
    assert enumerated_signatures(threads) == oracle_signatures(threads)


def load(path):
    spec = parse_test(path.read_text())
    return spec, build_images(spec.parsed_setup())


def candidates_of(path, **kwargs):
    spec, image = load(path)
    return list(enumerate_candidates(spec, image, **kwargs))


def test_budget_exhaustion_raises():
    path = CORPUS / "classics" / "SB+dmbs.vmtest"
    with pytest.raises(GenerationError):
        candidates_of(path, budget=1)


def test_translation_reads_present_for_mapped_accesses():
    path = CORPUS / "classics" / "MP+dmbs.vmtest"
    for cand in candidates_of(path):
        t_events = [e for e in cand.events.values()
                    if e.kind is EventKind.T]
        assert t_events, "data accesses must be translated"
        for eid in (e.eid for e in t_events):
            assert eid in cand.trf


def test_reduction_drops_only_forced_translations():
    path = CORPUS / "mapping" / "MP.RTf.inv+dmbs.vmtest"
    full = candidates_of(path, reduction=False)
    reduced = candidates_of(path, reduction=True)
    assert len(reduced) <= len(full)
    written = {e.pa for cand in full for e in cand.events.values()
               if e.kind is EventKind.W and not e.is_iw}
    for cand in full:
        drop = reduce_irrelevant_translations(cand)
        for eid in drop:
            e = cand.events[eid]
            assert e.kind is EventKind.T
            assert e.pa not in written
            assert not cand.image.memory[e.pa].alternatives


def test_faulting_candidate_has_ghost_fault_event():
    path = CORPUS / "mapping" / "CoWTf.inv+po.vmtest"
    kinds = set()
    for cand in candidates_of(path):
        for e in cand.events.values():
            kinds.add(e.kind)
            if e.kind is EventKind.T and e.faulting:
                faults = [f for f in cand.events.values()
                          if f.kind is EventKind.FAULT
                          and f.thread == e.thread]
                assert faults
    assert EventKind.FAULT in kinds


def test_relations_are_internally_coherent():
    path = CORPUS / "classics" / "MP+dmbs.vmtest"
    for cand in candidates_of(path):
        env = cand.relations()
        rf = env["rf"]
        fr = env["fr"]
        co = env["co"]
        # rf targets reads, sources writes, same location
        for w, r in rf:
            assert cand.events[r].kind is EventKind.R
            assert cand.events[w].kind is EventKind.W
            assert cand.events[r].pa == cand.events[w].pa
        # fr = rf^-1 ; co
        assert fr == rf.inv().seq(co)
        # po never crosses threads and respects instruction order
        for a, b in env["po"]:
            ea, eb = cand.events[a], cand.events[b]
            assert ea.thread == eb.thread
            assert ea.instr_index < eb.instr_index


def test_candidate_outcome_carries_final_registers():
    path = CORPUS / "classics" / "MP+pos.vmtest"
    seen = set()
    for cand in candidates_of(path):
        seen.add((cand.outcome.regs.get((1, "R2"), 0),
                  cand.outcome.regs.get((1, "R3"), 0)))
    assert seen == {(0, 0), (0, 1), (1, 0), (1, 1)}
