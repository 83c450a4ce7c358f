"""Page-table setup language: parsing and concrete image construction.

A setup text declares addresses (virtual / intermediate / physical), tables
(stage 1 or stage 2) with mapping constraints, and initial memory values.
``build_images`` turns a parsed setup into a concrete multi-level translation
table image: a map from descriptor-cell physical address to the set of 64-bit
values that cell may hold (an initial value plus declared alternatives).

Address assignment is deterministic: virtual names get 2 MiB-spaced VAs from
0x40_0000 in declaration order (each name owns its own level-2/level-3 path),
intermediate names get the same progression in IPA space, and physical names
get 4 KiB-spaced PAs from 0xA0_0000.  Intermediate table pages are allocated
depth-first in constraint order, in 4 KiB steps from the table's base.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple, Union

from .walk import (DescKind, OA_MASK, PAGE_SIZE, block_oa_mask,
                   decode_descriptor, level_index)

VA_BASE = 0x40_0000
VA_STEP = 0x20_0000
IPA_BASE = 0x40_0000
IPA_STEP = 0x20_0000
PA_BASE = 0xA0_0000
PA_STEP = 0x1000
DEFAULT_TABLE_BASE = 0x20_0000
CODE_REGION = (0x0, 0x20_0000)     # identity-mapped executable by default tables


class SetupError(ValueError):
    pass


# ---------------------------------------------------------------- encoding

def encode_descriptor(kind: str, payload: int = 0, level: int = 3,
                      attrs: Optional[dict] = None) -> int:
    """Encode a descriptor.

    kind is one of "invalid", "table", "block", "page".  payload is the output
    address (block/page) or next-level table address (table).  attrs may carry
    AP / S2AP / AF / SH overrides and "stage" (default 1).
    """
    attrs = dict(attrs or {})
    stage = attrs.pop("stage", 1)
    if kind == "invalid":
        return 0
    if kind == "table":
        if level not in (0, 1, 2):
            raise SetupError(f"table descriptor illegal at level {level}")
        return 0b11 | (payload & OA_MASK)
    if kind == "page":
        if level != 3:
            raise SetupError(f"page descriptor illegal at level {level}")
        bits = 0b11
        oa = payload & OA_MASK
    elif kind == "block":
        if level not in (1, 2):
            raise SetupError(f"block descriptor illegal at level {level}")
        bits = 0b01
        oa = payload & block_oa_mask(level)
    else:
        raise SetupError(f"unknown descriptor kind {kind!r}")
    af = 1 if attrs.pop("AF", 1) else 0
    sh = attrs.pop("SH", 0b11) & 0b11
    default_ap = 0b11 if stage == 2 else 0b01
    ap = attrs.pop("AP", attrs.pop("S2AP", default_ap)) & 0b11
    attrindx = attrs.pop("ATTRINDX", 0) & 0b111
    if attrs:
        raise SetupError(f"unknown descriptor attributes {sorted(attrs)}")
    return bits | oa | (af << 10) | (sh << 8) | (ap << 6) | (attrindx << 2)


# ---------------------------------------------------------------- parsed form

@dataclass
class MappingConstraint:
    input: str                        # address name, or hex literal for identity
    relation: str                     # "initial" (|->) or "alternative" (?->)
    target: Tuple[str, int]           # ("invalid",0) ("name",_) ("table",a) ("raw",v)
    target_name: Optional[str] = None
    level: Optional[int] = None       # None = unspecified (leaf at level 3)
    attrs: Dict[str, int] = field(default_factory=dict)
    identity_code: bool = False       # "identity A with code"


@dataclass
class TableSpec:
    name: str
    stage: int
    base: int
    constraints: List[MappingConstraint] = field(default_factory=list)
    nested_tables: List[Union["TableSpec", str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.base % PAGE_SIZE:
            raise SetupError(f"table {self.name} base not 4KiB aligned")


@dataclass
class SetupSpec:
    options: Dict[str, str] = field(default_factory=dict)
    virtual: List[str] = field(default_factory=list)
    intermediate: List[str] = field(default_factory=list)
    physical: List[str] = field(default_factory=list)
    tables: List[TableSpec] = field(default_factory=list)
    # constraints written at top level, applied to the synthesized default
    # stage-1 table
    constraints: List[MappingConstraint] = field(default_factory=list)
    memory_inits: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def default_tables(self) -> bool:
        return self.options.get("default_tables", "true") != "false"


@dataclass
class DescriptorChoiceSet:
    initial: int
    alternatives: Set[int] = field(default_factory=set)

    def choices(self) -> Set[int]:
        return {self.initial} | self.alternatives


@dataclass
class AddrEntry:
    kind: str      # virtual | intermediate | physical
    addr: int      # value in its own address space
    pa: Optional[int] = None   # backing PA for default-mapped virtual names


@dataclass
class PageTableImage:
    memory: Dict[int, DescriptorChoiceSet] = field(default_factory=dict)
    env: Dict[str, AddrEntry] = field(default_factory=dict)
    roots: Dict[str, int] = field(default_factory=dict)
    table_stage: Dict[str, int] = field(default_factory=dict)
    table_pages: Dict[str, List[int]] = field(default_factory=dict)
    data_init: Dict[int, int] = field(default_factory=dict)
    code_pages: Set[int] = field(default_factory=set)
    default_table: Optional[str] = None
    spec: Optional[SetupSpec] = None

    def initial_value(self, pa: int) -> int:
        cell = self.memory.get(pa)
        if cell is not None:
            return cell.initial
        return self.data_init.get(pa, 0)

    def in_table_memory(self, pa: int) -> bool:
        return pa in self.memory

    def unique_s1_root(self) -> Optional[str]:
        s1 = [n for n, s in self.table_stage.items() if s == 1]
        if self.default_table is not None:
            return self.default_table
        return s1[0] if len(s1) == 1 else None


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"""
    \s*(?:
      (?P<comment>\#[^\n]*|//[^\n]*)
    | (?P<arrow>\|->|\?->)
    | (?P<num>0[xX][0-9a-fA-F_]+|0[bB][01_]+|\d+)
    | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
    | (?P<punct>[{}\[\];,=*()])
    )""", re.VERBOSE)


def _tokenize(text: str) -> List[str]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise SetupError(f"cannot tokenize setup near {text[pos:pos+20]!r}")
        pos = m.end()
        if m.lastgroup != "comment":
            tokens.append(m.group(m.lastgroup))
    return tokens


def _to_int(tok: str) -> int:
    return int(tok.replace("_", ""), 0)


class _Parser:
    def __init__(self, tokens: List[str]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise SetupError("unexpected end of setup")
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise SetupError(f"expected {tok!r}, got {got!r}")

    def parse(self) -> SetupSpec:
        spec = SetupSpec()
        while self.peek() is not None:
            tok = self.peek()
            if tok == "option":
                self.next()
                key = self.next()
                self.expect("=")
                val = self.next()
                self.expect(";")
                spec.options[key] = val
            elif tok in ("virtual", "intermediate", "physical"):
                self.next()
                names = []
                while self.peek() != ";":
                    names.append(self.next())
                self.expect(";")
                getattr(spec, tok).extend(names)
            elif tok in ("s1table", "s2table"):
                spec.tables.append(self._table())
            elif tok == "*":
                self.next()
                name = self.next()
                self.expect("=")
                expr = []
                while self.peek() != ";":
                    expr.append(self.next())
                self.expect(";")
                spec.memory_inits.append((name, " ".join(expr)))
            elif self.i + 1 < len(self.toks) \
                    and self.toks[self.i + 1] in ("|->", "?->"):
                spec.constraints.append(self._constraint())
            else:
                raise SetupError(f"unexpected token {tok!r} in setup")
        return spec

    def _table(self) -> TableSpec:
        stage = 1 if self.next() == "s1table" else 2
        name = self.next()
        base = _to_int(self.next())
        table = TableSpec(name=name, stage=stage, base=base)
        self.expect("{")
        while self.peek() != "}":
            tok = self.peek()
            if tok in ("s1table", "s2table"):
                self.next()
                nname = self.next()
                if self.peek() == ";":        # reference to a table defined elsewhere
                    self.next()
                    table.nested_tables.append(nname)
                else:                          # nested definition
                    nbase = _to_int(self.next())
                    self.i -= 3
                    table.nested_tables.append(self._table())
            elif tok == "identity":
                self.next()
                addr = _to_int(self.next())
                self.expect("with")
                self.expect("code")
                self.expect(";")
                table.constraints.append(MappingConstraint(
                    input=f"0x{addr:x}", relation="initial",
                    target=("raw", addr), identity_code=True, level=3))
            else:
                table.constraints.append(self._constraint())
        self.expect("}")
        return table

    def _constraint(self) -> MappingConstraint:
        name = self.next()
        arrow = self.next()
        if arrow not in ("|->", "?->"):
            raise SetupError(f"expected mapping arrow, got {arrow!r}")
        relation = "initial" if arrow == "|->" else "alternative"
        tok = self.next()
        target_name = None
        if tok == "invalid":
            target = ("invalid", 0)
        elif tok == "table":
            self.expect("(")
            addr = _to_int(self.next())
            self.expect(")")
            target = ("table", addr)
        elif tok == "raw":
            self.expect("(")
            val = _to_int(self.next())
            self.expect(")")
            target = ("raw", val)
        elif re.match(r"0[xXbB]|\d", tok):
            target = ("raw", _to_int(tok))
        else:
            target = ("name", 0)
            target_name = tok
        level = None
        attrs: Dict[str, int] = {}
        while self.peek() not in (";", None):
            tok = self.next()
            if tok == "at":
                self.expect("level")
                level = _to_int(self.next())
            elif tok == "with":
                if self.peek() == "[":
                    self.next()
                    while self.peek() != "]":
                        key = self.next()
                        self.expect("=")
                        attrs[key.upper()] = _to_int(self.next())
                        if self.peek() == ",":
                            self.next()
                    self.expect("]")
                else:
                    raise SetupError("expected attribute list after 'with'")
            elif tok == "and":
                self.expect("default")
            else:
                raise SetupError(f"unexpected token {tok!r} in constraint")
        self.expect(";")
        return MappingConstraint(input=name, relation=relation, target=target,
                                 target_name=target_name, level=level,
                                 attrs=attrs)


def parse_setup(text: str) -> SetupSpec:
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------- building

class _TableBuilder:
    def __init__(self, spec: TableSpec, image: PageTableImage):
        self.spec = spec
        self.image = image
        self.next_page = spec.base + PAGE_SIZE
        image.roots[spec.name] = spec.base
        image.table_stage[spec.name] = spec.stage
        image.table_pages[spec.name] = [spec.base]

    def _alloc_page(self) -> int:
        page = self.next_page
        self.next_page += PAGE_SIZE
        self.image.table_pages[self.spec.name].append(page)
        return page

    def ensure_path(self, ia: int, leaf_level: int) -> int:
        """Create table descriptors down to `leaf_level`, returning the PA of
        the leaf descriptor cell."""
        table = self.spec.base
        for level in range(leaf_level):
            cell = table + 8 * level_index(ia, level)
            existing = self.image.memory.get(cell)
            if existing is None:
                page = self._alloc_page()
                desc = encode_descriptor("table", page, level)
                self.image.memory[cell] = DescriptorChoiceSet(initial=desc)
                table = page
            else:
                view = decode_descriptor(existing.initial, level, self.spec.stage)
                if view.kind is not DescKind.TABLE:
                    raise SetupError(
                        f"constraint for 0x{ia:x} in {self.spec.name} collides "
                        f"with a non-table descriptor at level {level}")
                table = view.table_addr
        return table + 8 * level_index(ia, leaf_level)

    def set_cell(self, cell: int, value: int, alternative: bool) -> None:
        existing = self.image.memory.get(cell)
        if existing is None:
            if alternative:
                self.image.memory[cell] = DescriptorChoiceSet(
                    initial=0, alternatives={value})
            else:
                self.image.memory[cell] = DescriptorChoiceSet(initial=value)
        else:
            if alternative:
                existing.alternatives.add(value)
            elif existing.initial == 0:
                existing.initial = value
            elif existing.initial != value:
                raise SetupError(
                    f"conflicting initial descriptors for cell 0x{cell:x} "
                    f"in {self.spec.name}")


def _flatten_tables(tables: List[TableSpec]) -> List[TableSpec]:
    out: List[TableSpec] = []
    for t in tables:
        out.append(t)
        nested = [n for n in t.nested_tables if isinstance(n, TableSpec)]
        out.extend(_flatten_tables(nested))
    return out


def build_images(spec: SetupSpec) -> PageTableImage:
    image = PageTableImage(spec=spec)

    for i, name in enumerate(spec.virtual):
        image.env[name] = AddrEntry("virtual", VA_BASE + i * VA_STEP)
    for i, name in enumerate(spec.intermediate):
        image.env[name] = AddrEntry("intermediate", IPA_BASE + i * IPA_STEP)
    pa_next = PA_BASE
    for name in spec.physical:
        image.env[name] = AddrEntry("physical", pa_next)
        pa_next += PA_STEP

    tables = _flatten_tables(spec.tables)
    seen = set()
    for t in tables:
        if t.name in seen:
            raise SetupError(f"duplicate table {t.name}")
        seen.add(t.name)

    builders = {t.name: _TableBuilder(t, image) for t in tables}

    # synthesize default stage-1 tables when none were declared
    if spec.default_tables and not any(t.stage == 1 for t in tables):
        default = TableSpec(name="default", stage=1, base=DEFAULT_TABLE_BASE)
        builder = _TableBuilder(default, image)
        image.default_table = "default"
        # executable identity block over the code region, and a self-map of
        # the table arena so descriptor cells are reachable by VA
        for base in (CODE_REGION[0], DEFAULT_TABLE_BASE):
            cell = builder.ensure_path(base, 2)
            builder.set_cell(cell, encode_descriptor("block", base, 2), False)
            if base == CODE_REGION[0]:
                image.code_pages.update(
                    range(base, CODE_REGION[1], PAGE_SIZE))
        pinned = {c.input for c in spec.constraints
                  if c.relation == "initial"}
        for name in spec.virtual:
            entry = image.env[name]
            if name in pinned:
                continue
            entry.pa = pa_next
            pa_next += PA_STEP
            cell = builder.ensure_path(entry.addr, 3)
            builder.set_cell(cell, encode_descriptor("page", entry.pa, 3), False)
        for c in spec.constraints:
            _apply_constraint(builder, c, image)
        tables = tables + [default]
        builders[default.name] = builder
    elif spec.constraints:
        raise SetupError(
            "top-level mapping constraints require the default tables")

    # pass 1: each table's own constraints
    for t in tables:
        if t.name == image.default_table:
            continue
        builder = builders[t.name]
        for c in t.constraints:
            _apply_constraint(builder, c, image)

    # pass 2: nested and referenced tables are identity-mapped into their
    # enclosing table (so stage-2 tables cover the stage-1 table memory, and
    # stage-1 tables can expose sibling table pages by VA)
    for t in tables:
        builder = builders[t.name]
        if t.stage == 1 and t.name != image.default_table:
            # a stage-1 table also exposes its own descriptor cells by VA,
            # so code can update entries while translating through the table;
            # mapping a page can allocate further pages, hence the fixpoint
            mapped = set()
            while True:
                pending = [p for p in image.table_pages[t.name]
                           if p not in mapped]
                if not pending:
                    break
                for page in pending:
                    mapped.add(page)
                    cell = builder.ensure_path(page, 3)
                    builder.set_cell(cell, encode_descriptor(
                        "page", page, 3, {"stage": 1}), False)
        for n in t.nested_tables:
            nname = n.name if isinstance(n, TableSpec) else n
            if nname not in image.table_pages:
                raise SetupError(f"reference to unknown table {nname}")
            for page in image.table_pages[nname]:
                cell = builder.ensure_path(page, 3)
                builder.set_cell(cell, encode_descriptor(
                    "page", page, 3, {"stage": t.stage}), False)

    # memory initialisations (may use builtins, names and labels)
    for name, expr in spec.memory_inits:
        entry = image.env.get(name)
        if entry is None or entry.kind == "intermediate":
            raise SetupError(f"memory init for unknown location {name!r}")
        if entry.kind == "physical":
            pa = entry.addr
        else:
            pa = entry.pa if entry.pa is not None else va_to_pa(entry.addr, image)
        image.data_init[pa] = eval_expr(expr, image) & ((1 << 64) - 1)

    return image


def _apply_constraint(builder: _TableBuilder, c: MappingConstraint,
                      image: PageTableImage) -> None:
    stage = builder.spec.stage
    if c.identity_code:
        addr = c.target[1]
        cell = builder.ensure_path(addr, 3)
        builder.set_cell(cell, encode_descriptor("page", addr, 3,
                                                 {"stage": stage}), False)
        image.code_pages.add(addr & ~(PAGE_SIZE - 1))
        return
    entry = image.env.get(c.input)
    if entry is None:
        raise SetupError(f"unknown address name {c.input!r} in {builder.spec.name}")
    if stage == 1 and entry.kind != "virtual":
        raise SetupError(f"{c.input} is not a virtual address")
    if stage == 2 and entry.kind != "intermediate":
        raise SetupError(f"{c.input} is not an intermediate address")
    ia = entry.addr
    level = c.level if c.level is not None else 3
    cell = builder.ensure_path(ia, level)
    kind, payload = c.target
    alternative = c.relation == "alternative"
    attrs = dict(c.attrs)
    attrs["stage"] = stage
    if kind == "invalid":
        value = 0
    elif kind == "table":
        value = encode_descriptor("table", payload, level)
    elif kind == "raw":
        value = payload
    else:
        target = image.env.get(c.target_name)
        if target is None:
            raise SetupError(f"unknown target {c.target_name!r}")
        oa = target.addr
        dkind = "page" if level == 3 else "block"
        value = encode_descriptor(dkind, oa, level, attrs)
        if stage == 1 and not alternative and entry.pa is None \
                and target.kind == "physical" and level == 3:
            entry.pa = oa
    builder.set_cell(cell, value, alternative)


# ---------------------------------------------------------------- builtins

def _initial_read(image: PageTableImage):
    def read(pa: int, stage: int, level: int) -> int:
        return image.initial_value(pa)
    return read


def _initial_walk_cells(image: PageTableImage, root: int, ia: int,
                        stage: int) -> List[Tuple[int, int, int]]:
    """Walk one stage of the initial image; returns (level, cell, value)."""
    out = []
    table = root
    for level in range(4):
        cell = table + 8 * level_index(ia, level)
        value = image.initial_value(cell)
        out.append((level, cell, value))
        view = decode_descriptor(value, level, stage)
        if view.kind is DescKind.TABLE:
            table = view.table_addr
            continue
        break
    return out


def _resolve_root(image: PageTableImage, table: Optional[str],
                  want_stage: int) -> int:
    if table is not None:
        if table not in image.roots:
            raise SetupError(f"unknown table {table!r}")
        return image.roots[table]
    candidates = [n for n, s in image.table_stage.items() if s == want_stage]
    if image.default_table and want_stage == 1:
        return image.roots[image.default_table]
    if len(candidates) != 1:
        raise SetupError(
            f"ambiguous stage-{want_stage} table, name one of {sorted(candidates)}")
    return image.roots[candidates[0]]


def _pte(image: PageTableImage, level: int, name: str,
         table: Optional[str] = None) -> int:
    entry = image.env.get(name)
    if entry is None:
        raise SetupError(f"unknown address {name!r}")
    want_stage = 2 if entry.kind == "intermediate" else 1
    root = _resolve_root(image, table, want_stage)
    cells = _initial_walk_cells(image, root, entry.addr, want_stage)
    for lvl, cell, _ in cells:
        if lvl == level:
            return cell
    raise SetupError(f"initial walk of {name} does not reach level {level}")


def va_to_pa(va: int, image: PageTableImage) -> int:
    root = _resolve_root(image, None, 1)
    cells = _initial_walk_cells(image, root, va, 1)
    lvl, _, value = cells[-1]
    view = decode_descriptor(value, lvl, 1)
    if view.kind not in (DescKind.PAGE, DescKind.BLOCK):
        raise SetupError(f"va 0x{va:x} not initially mapped")
    offset_bits = {1: 30, 2: 21, 3: 12}[lvl]
    return view.oa | (va & ((1 << offset_bits) - 1))


def resolve_builtin(name: str, args: List, kwargs: Dict[str, object],
                    image: PageTableImage) -> int:
    """Evaluate one builtin call.  Positional args and kwargs are already
    evaluated to ints except where a builtin takes a name (address or table)."""

    def as_int(v) -> int:
        if isinstance(v, str):
            return _name_value(v, image)
        return int(v)

    def as_name(v) -> str:
        if not isinstance(v, str):
            raise SetupError(f"{name}: expected a name, got {v!r}")
        return v

    if name == "ttbr":
        ident = kwargs.get("asid", kwargs.get("vmid", 0))
        base = kwargs.get("base", args[0] if args else 0)
        if isinstance(base, str):
            if base in image.roots:
                base = image.roots[base]
            else:
                base = _name_value(base, image)
        return ((as_int(ident) & 0xFFFF) << 48) | (int(base) & OA_MASK)
    if name == "page":
        return as_int(args[0]) >> 12
    if name == "asid":
        return (as_int(args[0]) & 0xFFFF) << 48
    if name == "extz":
        width = as_int(args[1])
        return as_int(args[0]) & ((1 << width) - 1)
    if name == "raw":
        return as_int(args[0])
    if name == "offset":
        level = as_int(kwargs.get("level", args[0] if args else 3))
        va = kwargs.get("va", kwargs.get("ipa"))
        if va is None and len(args) > 1:
            va = args[1]
        return 8 * level_index(as_int(va), level)
    if name == "bvor":
        return as_int(args[0]) | as_int(args[1])
    m = re.fullmatch(r"(pte|desc|mkdesc)([123])", name)
    if m:
        which, level = m.group(1), int(m.group(2))
        if which == "mkdesc":
            attrs = {}
            stage = as_int(kwargs.get("stage", 1))
            attrs["stage"] = stage
            for k in ("AP", "S2AP", "AF", "SH"):
                if k.lower() in kwargs:
                    attrs[k] = as_int(kwargs[k.lower()])
            if "table" in kwargs:
                return encode_descriptor("table", as_int(kwargs["table"]), level)
            oa = kwargs.get("oa", args[0] if args else None)
            kind = "page" if level == 3 else "block"
            return encode_descriptor(kind, as_int(oa), level, attrs)
        addr_name = as_name(args[0])
        table = as_name(args[1]) if len(args) > 1 else kwargs.get("table")
        cell = _pte(image, level, addr_name, table)
        if which == "pte":
            return cell
        return image.initial_value(cell)
    if name == "va_to_pa":
        return va_to_pa(as_int(args[0]), image)
    if name == "pa_to_va":
        want = as_int(args[0])
        for nm, entry in image.env.items():
            if entry.kind == "virtual":
                try:
                    if va_to_pa(entry.addr, image) == want:
                        return entry.addr
                except SetupError:
                    continue
        raise SetupError(f"no virtual address maps to pa 0x{want:x}")
    if name == "ipa_to_pa":
        root = _resolve_root(image, kwargs.get("table"), 2)
        ipa = as_int(args[0])
        cells = _initial_walk_cells(image, root, ipa, 2)
        lvl, _, value = cells[-1]
        view = decode_descriptor(value, lvl, 2)
        if view.kind not in (DescKind.PAGE, DescKind.BLOCK):
            raise SetupError(f"ipa 0x{ipa:x} not initially mapped")
        offset_bits = {1: 30, 2: 21, 3: 12}[lvl]
        return view.oa | (ipa & ((1 << offset_bits) - 1))
    if name == "ipa_to_va":
        want = as_int(args[0])
        for nm, entry in image.env.items():
            if entry.kind == "virtual":
                root = _resolve_root(image, None, 1)
                cells = _initial_walk_cells(image, root, entry.addr, 1)
                lvl, _, value = cells[-1]
                view = decode_descriptor(value, lvl, 1)
                if view.kind in (DescKind.PAGE, DescKind.BLOCK) and view.oa == want:
                    return entry.addr
        raise SetupError(f"no virtual address maps to ipa 0x{want:x}")
    raise SetupError(f"unknown builtin {name!r}")


def _name_value(name: str, image: PageTableImage,
                labels: Optional[Dict[str, int]] = None) -> int:
    if labels and name in labels:
        return labels[name]
    entry = image.env.get(name)
    if entry is not None:
        return entry.addr
    if name in image.roots:
        return image.roots[name]
    raise SetupError(f"unknown name {name!r}")


# ------------------------------------------------------------- expressions

_EXPR_TOKEN = re.compile(
    r"\s*(?:(?P<num>0[xX][0-9a-fA-F_]+|0[bB][01_]+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*:?)"
    r"|(?P<punct>[(),=]))")


def eval_expr(text: str, image: PageTableImage,
              labels: Optional[Dict[str, int]] = None) -> int:
    """Evaluate a value expression: a number, an address/table/label name, or
    a builtin call with positional and keyword arguments."""
    tokens: List[str] = []
    pos = 0
    while pos < len(text):
        m = _EXPR_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise SetupError(f"cannot parse expression {text!r}")
        pos = m.end()
        tokens.append(m.group(m.lastgroup))

    def parse(i: int):
        tok = tokens[i]
        if re.match(r"0[xXbB]|\d", tok):
            return _to_int(tok), i + 1
        name = tok.rstrip(":")
        if i + 1 < len(tokens) and tokens[i + 1] == "(" and not tok.endswith(":"):
            args, kwargs = [], {}
            i += 2
            while tokens[i] != ")":
                if (re.match(r"[A-Za-z_]", tokens[i]) and i + 1 < len(tokens)
                        and tokens[i + 1] == "="):
                    key = tokens[i]
                    val, i = parse_arg(i + 2)
                    kwargs[key] = val
                else:
                    val, i = parse_arg(i)
                    args.append(val)
                if tokens[i] == ",":
                    i += 1
            return resolve_builtin(name, args, kwargs, image), i + 1
        # bare name: label, address or table
        return _name_value(name, image, labels), i + 1

    def parse_arg(i: int):
        # arguments to pte/desc and table= keep names unevaluated; everything
        # else evaluates eagerly.  We return names as strings when they do not
        # resolve to plain numbers on their own but are known names.
        tok = tokens[i]
        if re.match(r"0[xXbB]|\d", tok):
            return _to_int(tok), i + 1
        if i + 1 < len(tokens) and tokens[i + 1] == "(":
            return parse(i)
        name = tok.rstrip(":")
        if labels and name in labels:
            return labels[name], i + 1
        return name, i + 1

    value, i = parse(0)
    if i != len(tokens):
        raise SetupError(f"trailing tokens in expression {text!r}")
    return value
