"""Event vocabulary shared by the executor, candidate generator and models."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import FrozenSet, Optional


class EventKind(Enum):
    R = auto()          # explicit memory read
    W = auto()          # explicit memory write
    T = auto()          # translation-table read performed by a walk
    TLBI = auto()
    DSB = auto()
    DMB = auto()
    ISB = auto()
    MSR = auto()        # write to a translation-controlling system register
    TE = auto()         # exception (trap) entry
    ERET = auto()
    FAULT = auto()      # ghost event recording a translation/permission fault


class BarrierDomain(Enum):
    """Which accesses a DSB/DMB orders."""

    FULL = auto()
    STORE = auto()      # DSB ISHST


class TlbiKind(Enum):
    VAE1 = auto()
    VAE1IS = auto()
    VAAE1IS = auto()
    ASIDE1IS = auto()
    VMALLE1 = auto()
    VMALLE1IS = auto()
    ALLE1IS = auto()
    ALLE2 = auto()
    IPAS2E1IS = auto()
    VMALLS12E1IS = auto()


# Which scopes each TLBI kind matches on.
TLBI_STAGE1 = {
    TlbiKind.VAE1, TlbiKind.VAE1IS, TlbiKind.VAAE1IS, TlbiKind.ASIDE1IS,
    TlbiKind.VMALLE1, TlbiKind.VMALLE1IS, TlbiKind.ALLE1IS, TlbiKind.ALLE2,
    TlbiKind.VMALLS12E1IS,
}
TLBI_STAGE2 = {TlbiKind.ALLE1IS, TlbiKind.IPAS2E1IS, TlbiKind.VMALLS12E1IS}
TLBI_BY_VA = {TlbiKind.VAE1, TlbiKind.VAE1IS, TlbiKind.VAAE1IS}
TLBI_BY_ASID = {TlbiKind.VAE1, TlbiKind.VAE1IS, TlbiKind.ASIDE1IS}
TLBI_BY_IPA = {TlbiKind.IPAS2E1IS}
TLBI_BROADCAST = {
    TlbiKind.VAE1IS, TlbiKind.VAAE1IS, TlbiKind.ASIDE1IS, TlbiKind.VMALLE1IS,
    TlbiKind.ALLE1IS, TlbiKind.IPAS2E1IS, TlbiKind.VMALLS12E1IS,
}
# ALL-matching kinds (no VA/IPA/ASID restriction beyond the VMID/regime)
TLBI_ALL = {TlbiKind.ALLE1IS, TlbiKind.ALLE2}
# EL2-regime TLBIs
TLBI_EL2 = {TlbiKind.ALLE2}


class Regime(Enum):
    EL2 = auto()            # EL2 stage 1 only
    EL10_S1 = auto()        # EL1&0 with stage 2 disabled
    EL10_2STAGE = auto()    # EL1&0 under a stage 2


@dataclass
class Event:
    """A single event of a candidate execution.

    Translation reads (kind T) carry the stage/level of the descriptor they
    fetched plus the translation context (ASID/VMID/EL and the input VA/IPA).
    Fault events are ghosts: they mark where a faulting access would have been
    and carry the dependency footprint of that access.
    """

    eid: int
    thread: Optional[int]       # None for initial writes
    instr_index: int            # -1 for initial writes
    kind: EventKind
    va: Optional[int] = None
    ipa: Optional[int] = None
    pa: Optional[int] = None
    value: Optional[int] = None
    stage: Optional[int] = None
    level: Optional[int] = None
    el: Optional[int] = None
    asid: Optional[int] = None
    vmid: Optional[int] = None
    regime: Optional[Regime] = None
    barrier: Optional[BarrierDomain] = None
    tlbi_kind: Optional[TlbiKind] = None
    tlbi_va_page: Optional[int] = None
    tlbi_ipa_page: Optional[int] = None
    tlbi_asid: Optional[int] = None
    tlbi_vmid: Optional[int] = None
    acquire: bool = False       # LDAR
    release: bool = False       # STLR
    faulting: bool = False      # T event that read an invalid descriptor
    from_read: bool = False     # Fault raised by a load
    from_write: bool = False    # Fault raised by a store
    is_iw: bool = False         # initial write
    instr_addr: Optional[int] = None
    in_table_memory: bool = False   # the target PA holds a descriptor cell
    # dependency footprint, as event ids of the reads feeding this event
    addr_deps: FrozenSet[int] = frozenset()
    data_deps: FrozenSet[int] = frozenset()
    ctrl_deps: FrozenSet[int] = frozenset()

    def is_explicit_mem(self) -> bool:
        return self.kind in (EventKind.R, EventKind.W)

    @property
    def writes_invalid(self) -> bool:
        """W of a value that decodes as an invalid descriptor, targeting a
        location that is part of translation-table memory."""
        return self.kind is EventKind.W and self.value is not None \
            and (self.value & 0b1) == 0 and self.in_table_memory

    @property
    def writes_valid(self) -> bool:
        return self.kind is EventKind.W and self.value is not None \
            and (self.value & 0b1) == 1 and self.in_table_memory

    def short(self) -> str:
        k = self.kind.name
        if self.kind is EventKind.T and self.faulting:
            k = "Tf"
        loc = f" pa=0x{self.pa:x}" if self.pa is not None else ""
        val = f" val=0x{self.value:x}" if self.value is not None else ""
        return f"e{self.eid}:{k}@{self.thread}.{self.instr_index}{loc}{val}"
