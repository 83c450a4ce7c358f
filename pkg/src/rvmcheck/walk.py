"""Descriptor decoding and translation-table walks.

A walk is deterministic given a read service: the candidate generator supplies
a callback that picks the value each descriptor fetch observes, so the same
code drives both the concrete initial-image walk and the relaxed enumeration.

Two-stage walks interleave reads the way hardware does: every stage-1
descriptor fetch is itself an IPA that must be translated by stage 2 first,
and the final stage-1 output IPA goes through stage 2 last.  A single-stage
walk performs at most 4 reads; a two-stage walk at most 4 + 4*(4+1) = 24.
Stage 2 is concatenated and starts at level 0, a deliberate simplification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Callable, List, Optional

from .events import Regime

PAGE_SHIFT = 12
PAGE_SIZE = 1 << PAGE_SHIFT
OA_MASK = ((1 << 48) - 1) & ~(PAGE_SIZE - 1)

# index field of `va` selecting the level-N descriptor
_LEVEL_SHIFT = {0: 39, 1: 30, 2: 21, 3: 12}


def level_index(va: int, level: int) -> int:
    return (va >> _LEVEL_SHIFT[level]) & 0x1FF


def block_oa_mask(level: int) -> int:
    """Output-address mask for a block at the given level."""
    return ((1 << 48) - 1) & ~((1 << _LEVEL_SHIFT[level]) - 1)


class DescKind(Enum):
    INVALID = auto()
    TABLE = auto()
    BLOCK = auto()
    PAGE = auto()


@dataclass
class DescriptorView:
    """Decoded view of one 64-bit descriptor at a given level/stage."""

    raw: int
    level: int
    stage: int
    kind: DescKind
    oa: Optional[int] = None        # output address (block/page)
    table_addr: Optional[int] = None
    ap: int = 0                     # stage 1: AP[2:1]; stage 2: S2AP
    af: bool = False
    sh: int = 0

    @property
    def valid(self) -> bool:
        return self.kind is not DescKind.INVALID


def decode_descriptor(raw: int, level: int, stage: int) -> DescriptorView:
    raw &= (1 << 64) - 1
    low = raw & 0b11
    ap = (raw >> 6) & 0b11
    af = bool((raw >> 10) & 1)
    sh = (raw >> 8) & 0b11
    if low == 0b00 or low == 0b10:
        return DescriptorView(raw, level, stage, DescKind.INVALID)
    if low == 0b01:
        # block descriptor, only legal at levels 1 and 2
        if level not in (1, 2):
            return DescriptorView(raw, level, stage, DescKind.INVALID)
        oa = raw & block_oa_mask(level)
        return DescriptorView(raw, level, stage, DescKind.BLOCK, oa=oa,
                              ap=ap, af=af, sh=sh)
    # low == 0b11
    if level == 3:
        oa = raw & OA_MASK
        return DescriptorView(raw, level, stage, DescKind.PAGE, oa=oa,
                              ap=ap, af=af, sh=sh)
    return DescriptorView(raw, level, stage, DescKind.TABLE,
                          table_addr=raw & OA_MASK)


class Access(Enum):
    READ = auto()
    WRITE = auto()


class FaultKind(Enum):
    TRANSLATION = auto()
    PERMISSION = auto()


@dataclass
class WalkRead:
    """One descriptor fetch performed by a walk."""

    pa: int
    value: int
    view: DescriptorView
    stage: int
    level: int
    va: int                      # the VA the overall walk translates
    ipa: Optional[int] = None    # for stage-2 reads: the IPA being translated


@dataclass
class WalkFault:
    kind: FaultKind
    stage: int
    level: int
    va: int
    ipa: Optional[int] = None


@dataclass
class WalkResult:
    reads: List[WalkRead] = field(default_factory=list)
    pa: Optional[int] = None
    ipa: Optional[int] = None
    fault: Optional[WalkFault] = None
    leaf_views: List[DescriptorView] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.fault is None


# read service: (pa, stage, level) -> 64-bit descriptor value
ReadService = Callable[[int, int, int], int]


def permission_check(views: List[DescriptorView], access: Access,
                     el: int) -> Optional[FaultKind]:
    """Intersect the permissions of the leaf descriptors of each stage.

    Stage-1 AP[2:1]: 0b00 privileged RW, 0b01 RW all, 0b10 privileged RO,
    0b11 RO all.  Stage-2 S2AP: bit0 read allowed, bit1 write allowed.
    Returns PERMISSION when the access is not allowed, else None.
    """
    for view in views:
        if view.stage == 1:
            ap = view.ap
            if el == 0 and ap in (0b00, 0b10):
                return FaultKind.PERMISSION
            if access is Access.WRITE and ap in (0b10, 0b11):
                return FaultKind.PERMISSION
        else:
            if access is Access.READ and not (view.ap & 0b01):
                return FaultKind.PERMISSION
            if access is Access.WRITE and not (view.ap & 0b10):
                return FaultKind.PERMISSION
    return None


def _walk_stage(root: int, ia: int, stage: int, va: int,
                read: ReadService, reads: List[WalkRead],
                ipa: Optional[int]) -> "tuple[Optional[DescriptorView], Optional[WalkFault]]":
    """Single-stage walk from `root` for input address `ia`.

    Returns (leaf view, fault).  Appends the reads performed.
    """
    table = root & OA_MASK
    for level in range(4):
        cell = table + 8 * level_index(ia, level)
        value = read(cell, stage, level)
        view = decode_descriptor(value, level, stage)
        reads.append(WalkRead(pa=cell, value=value, view=view, stage=stage,
                              level=level, va=va, ipa=ipa))
        if not view.valid:
            return None, WalkFault(FaultKind.TRANSLATION, stage, level, va, ipa)
        if view.kind is DescKind.TABLE:
            table = view.table_addr
            continue
        # block or page: leaf
        offset_bits = _LEVEL_SHIFT[view.level]
        out = view.oa | (ia & ((1 << offset_bits) - 1))
        leaf = DescriptorView(view.raw, view.level, stage, view.kind,
                              oa=out, ap=view.ap, af=view.af, sh=view.sh)
        return leaf, None
    return None, WalkFault(FaultKind.TRANSLATION, stage, 3, va, ipa)


def walk(regime: Regime, va: int, access: Access, read: ReadService, *,
         s1_root: Optional[int] = None, s2_root: Optional[int] = None,
         el: int = 1) -> WalkResult:
    """Translate `va` under the given regime.

    For Regime.EL10_2STAGE both roots are required and every stage-1
    descriptor fetch is preceded by the stage-2 walk of its table IPA.
    """
    result = WalkResult()

    def s2_translate(ipa: int) -> Optional[int]:
        leaf, fault = _walk_stage(s2_root, ipa, 2, va, read, result.reads, ipa)
        if fault is not None:
            result.fault = fault
            return None
        result.leaf_views.append(leaf)
        return leaf.oa

    if regime is Regime.EL10_2STAGE:
        table_ipa = s1_root & OA_MASK
        ia = va
        leaf1 = None
        for level in range(4):
            table_pa = s2_translate(table_ipa)
            if table_pa is None:
                return result
            cell = table_pa + 8 * level_index(ia, level)
            value = read(cell, 1, level)
            view = decode_descriptor(value, level, 1)
            result.reads.append(WalkRead(pa=cell, value=value, view=view,
                                         stage=1, level=level, va=va,
                                         ipa=table_ipa + 8 * level_index(ia, level)))
            if not view.valid:
                result.fault = WalkFault(FaultKind.TRANSLATION, 1, level, va)
                return result
            if view.kind is DescKind.TABLE:
                table_ipa = view.table_addr
                continue
            offset_bits = _LEVEL_SHIFT[view.level]
            out_ipa = view.oa | (ia & ((1 << offset_bits) - 1))
            leaf1 = DescriptorView(view.raw, view.level, 1, view.kind,
                                   oa=out_ipa, ap=view.ap, af=view.af,
                                   sh=view.sh)
            break
        if leaf1 is None:
            result.fault = WalkFault(FaultKind.TRANSLATION, 1, 3, va)
            return result
        result.leaf_views.append(leaf1)
        result.ipa = leaf1.oa
        pa = s2_translate(leaf1.oa)
        if pa is None:
            return result
        result.pa = pa
    else:
        leaf, fault = _walk_stage(s1_root, va, 1, va, read, result.reads, None)
        if fault is not None:
            result.fault = fault
            return result
        result.leaf_views.append(leaf)
        result.pa = leaf.oa

    pf = permission_check(result.leaf_views, access, el)
    if pf is not None:
        last = result.leaf_views[-1]
        result.fault = WalkFault(FaultKind.PERMISSION, last.stage, last.level,
                                 va, result.ipa)
    return result
