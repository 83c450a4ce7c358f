"""Setup parsing, table construction and expression builtins."""

import pytest

from rvmcheck.pagetable import (SetupError, build_images, encode_descriptor,
                                eval_expr, parse_setup, resolve_builtin,
                                va_to_pa)
from rvmcheck.walk import decode_descriptor


def build(text):
    return build_images(parse_setup(text))


def test_parse_declarations():
    spec = parse_setup("physical pa1 pa2; virtual x y; intermediate ipa1;")
    assert spec.physical == ["pa1", "pa2"]
    assert spec.virtual == ["x", "y"]
    assert spec.intermediate == ["ipa1"]
    assert spec.default_tables


def test_parse_option_disables_default_tables():
    spec = parse_setup("option default_tables = false; virtual x;")
    assert not spec.default_tables


def test_address_assignment_is_deterministic():
    image = build("virtual x y; physical pa1;")
    assert image.env["y"].addr - image.env["x"].addr == 0x20_0000
    assert image.env["pa1"].addr == 0xA0_0000
    assert image.env["x"].addr % 0x1000 == 0


def test_default_tables_map_every_virtual_name():
    image = build("virtual x y;")
    assert image.default_table == "default"
    for name in ("x", "y"):
        entry = image.env[name]
        assert entry.pa is not None
        assert va_to_pa(entry.addr, image) == entry.pa


def test_top_level_constraint_pins_backing_page():
    image = build("physical pa1; virtual x; x |-> pa1;")
    assert image.env["x"].pa == image.env["pa1"].addr


def test_alternative_constraint_recorded_as_choice():
    image = build("physical pa1; virtual x; x |-> invalid; x ?-> pa1;")
    cell = resolve_builtin("pte3", ["x", "default"], {}, image)
    cs = image.memory[cell]
    assert cs.initial == 0
    desc = encode_descriptor("page", image.env["pa1"].addr, 3)
    assert desc in cs.alternatives


def test_top_level_constraints_need_default_tables():
    text = """option default_tables = false;
    physical pa1; virtual x; x |-> pa1;
    s1table t 0x200000 { identity 0x1000 with code; }"""
    with pytest.raises(SetupError, match="default"):
        build(text)


def test_duplicate_table_rejected():
    with pytest.raises(SetupError, match="duplicate"):
        build("virtual x; s1table t 0x200000 { x |-> invalid; } "
              "s1table t 0x240000 { x |-> invalid; }")


def test_named_table_layout_is_reproducible():
    image = build("""
    option default_tables = false;
    virtual x;
    physical pa1;
    s1table hyp_pgtable_new 0x280000 {
        x |-> invalid at level 3;
        x ?-> pa1 at level 3;
    }
    s1table hyp_pgtable 0x200000 {
        x |-> invalid at level 2;
        x ?-> table(0x283000) at level 2;
        identity 0x1000 with code;
        s1table hyp_pgtable_new;
    }
    """)
    assert image.roots["hyp_pgtable"] == 0x200000
    assert resolve_builtin("pte2", ["x", "hyp_pgtable"], {}, image) == 0x202010
    assert resolve_builtin("pte3", ["x", "hyp_pgtable_new"], {}, image) \
        == 0x283000


def test_stage1_table_self_maps_its_own_pages():
    image = build("""
    option default_tables = false;
    virtual x;
    physical pa1;
    s1table t 0x200000 {
        x |-> pa1;
        identity 0x1000 with code;
    }
    """)
    from rvmcheck.events import Regime
    from rvmcheck.walk import Access, walk

    def read(pa, stage, level):
        cell = image.memory.get(pa)
        return cell.initial if cell is not None else 0

    for page in image.table_pages["t"]:
        res = walk(Regime.EL10_S1, page, Access.READ, read,
                   s1_root=image.roots["t"])
        assert res.ok and res.pa == page


def test_nested_stage1_pages_visible_through_stage2():
    image = build("""
    option default_tables = false;
    virtual x;
    physical pa1;
    intermediate ipa1;
    s2table s2 0x240000 {
        ipa1 |-> pa1;
        s1table s1 0x280000 { x |-> ipa1; }
    }
    """)
    # the stage-2 table must translate the stage-1 table pages identically
    from rvmcheck.events import Regime
    from rvmcheck.walk import Access, walk

    def read(pa, stage, level):
        cell = image.memory.get(pa)
        return cell.initial if cell is not None else 0

    res = walk(Regime.EL10_2STAGE, image.env["x"].addr, Access.READ, read,
               s1_root=image.roots["s1"], s2_root=image.roots["s2"])
    assert res.ok and res.pa == image.env["pa1"].addr


def test_memory_init_expression():
    image = build("physical pa1 pa2; virtual x; *pa1 = mkdesc3(oa=pa2);")
    want = encode_descriptor("page", image.env["pa2"].addr, 3)
    assert image.data_init[image.env["pa1"].addr] == want


# ------------------------------------------------------------- builtins

def test_builtin_values():
    image = build("physical pa1; virtual x;")
    x = image.env["x"].addr
    assert eval_expr("page(x)", image) == x >> 12
    assert eval_expr("asid(3)", image) == 3 << 48
    assert eval_expr("extz(0x4, 64)", image) == 4
    assert eval_expr("bvor(0x280000, 0x10)", image) == 0x280010
    assert eval_expr("offset(level=3, va=x)", image) == ((x >> 12) & 0x1FF) * 8


def test_ttbr_builtin_packs_asid_and_base():
    image = build("virtual x;")
    v = eval_expr("ttbr(asid=2, base=default)", image)
    assert v >> 48 == 2
    assert v & ((1 << 48) - 1) == image.roots["default"]


def test_mkdesc_builtins_decode_back():
    image = build("physical pa1; virtual x;")
    v = eval_expr("mkdesc3(oa=pa1)", image)
    assert decode_descriptor(v, 3, 1).oa == image.env["pa1"].addr
    t = eval_expr("mkdesc2(table=0x283000)", image)
    assert decode_descriptor(t, 2, 1).table_addr == 0x283000


def test_eval_expr_arithmetic_and_names():
    image = build("physical pa1; virtual x;")
    assert eval_expr("0b101", image) == 5
    assert eval_expr("pa1", image) == image.env["pa1"].addr
    assert eval_expr("x", image) == image.env["x"].addr


def test_eval_expr_labels():
    image = build("virtual x;")
    assert eval_expr("L0", image, {"L0": 0x8010}) == 0x8010


def test_eval_expr_unknown_name_raises():
    image = build("virtual x;")
    with pytest.raises(SetupError):
        eval_expr("mystery", image)
