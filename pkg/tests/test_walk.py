"""Translation-table walks over built images."""

import pytest

from rvmcheck.events import Regime
from rvmcheck.pagetable import build_images, parse_setup, resolve_builtin
from rvmcheck.walk import (Access, DescKind, FaultKind, block_oa_mask,
                           level_index, permission_check, walk)


def reader(image):
    """Read service serving the initial value of every cell."""

    def read(pa, stage, level):
        cell = image.memory.get(pa)
        return cell.initial if cell is not None else 0

    return read


def build(text):
    return build_images(parse_setup(text))


def test_level_index_fields():
    va = (3 << 39) | (5 << 30) | (7 << 21) | (9 << 12) | 0x123
    assert level_index(va, 0) == 3
    assert level_index(va, 1) == 5
    assert level_index(va, 2) == 7
    assert level_index(va, 3) == 9


def test_block_oa_mask_sizes():
    assert block_oa_mask(2) & 0x1FFFFF == 0
    assert block_oa_mask(1) & 0x3FFFFFFF == 0


def test_default_table_walk_reaches_backing_page():
    image = build("virtual x;")
    x = image.env["x"]
    root = image.roots["default"]
    res = walk(Regime.EL10_S1, x.addr, Access.READ, reader(image),
               s1_root=root)
    assert res.ok
    assert res.pa == x.pa
    assert [r.level for r in res.reads] == [0, 1, 2, 3]
    assert res.leaf_views[-1].kind is DescKind.PAGE


def test_offset_within_page_preserved():
    image = build("virtual x;")
    x = image.env["x"]
    res = walk(Regime.EL10_S1, x.addr + 0x2C, Access.READ, reader(image),
               s1_root=image.roots["default"])
    assert res.pa == x.pa + 0x2C


def test_invalid_leaf_faults_at_level_3():
    image = build("physical pa1; virtual x; x |-> invalid; x ?-> pa1;")
    res = walk(Regime.EL10_S1, image.env["x"].addr, Access.READ,
               reader(image), s1_root=image.roots["default"])
    assert not res.ok
    assert res.fault.kind is FaultKind.TRANSLATION
    assert res.fault.stage == 1
    assert res.fault.level == 3


def test_missing_intermediate_entry_faults_early():
    image = build("virtual x;")

    def read(pa, stage, level):
        return 0

    res = walk(Regime.EL10_S1, image.env["x"].addr, Access.READ, read,
               s1_root=image.roots["default"])
    assert not res.ok
    assert res.fault.level == 0


TWO_STAGE = """
option default_tables = false;
virtual x;
physical pa1;
intermediate ipa1;
s2table vm_stage2 0x240000 {
  ipa1 |-> pa1;
  s1table vm_stage1 0x280000 {
    x |-> ipa1;
  }
}
"""


def test_two_stage_walk():
    image = build(TWO_STAGE)
    x = image.env["x"]
    res = walk(Regime.EL10_2STAGE, x.addr, Access.READ, reader(image),
               s1_root=image.roots["vm_stage1"],
               s2_root=image.roots["vm_stage2"])
    assert res.ok, res.fault
    assert res.ipa == image.env["ipa1"].addr
    assert res.pa == image.env["pa1"].addr
    stages = {r.stage for r in res.reads}
    assert stages == {1, 2}
    # every stage-1 fetch is preceded by a stage-2 walk of its table address
    assert sum(1 for r in res.reads if r.stage == 2) > \
        sum(1 for r in res.reads if r.stage == 1)


def test_two_stage_fault_reports_stage_2():
    image = build(TWO_STAGE.replace("ipa1 |-> pa1;", "ipa1 |-> invalid;"))
    res = walk(Regime.EL10_2STAGE, image.env["x"].addr, Access.READ,
               reader(image), s1_root=image.roots["vm_stage1"],
               s2_root=image.roots["vm_stage2"])
    assert not res.ok
    assert res.fault.stage == 2


def leaf(ap, stage=1):
    from rvmcheck.walk import DescriptorView
    return DescriptorView(0, 3, stage, DescKind.PAGE, oa=0, ap=ap)


@pytest.mark.parametrize("ap,el,access,faults", [
    (0b00, 1, Access.WRITE, False),
    (0b00, 0, Access.READ, True),      # privileged-only
    (0b01, 0, Access.WRITE, False),
    (0b10, 1, Access.WRITE, True),     # read-only
    (0b11, 0, Access.WRITE, True),
    (0b11, 1, Access.READ, False),
])
def test_stage1_permissions(ap, el, access, faults):
    got = permission_check([leaf(ap)], access, el)
    assert (got is FaultKind.PERMISSION) == faults


@pytest.mark.parametrize("s2ap,access,faults", [
    (0b11, Access.WRITE, False),
    (0b01, Access.WRITE, True),        # read-only at stage 2
    (0b10, Access.READ, True),
    (0b01, Access.READ, False),
])
def test_stage2_permissions(s2ap, access, faults):
    got = permission_check([leaf(s2ap, stage=2)], Access(access), 1)
    assert (got is FaultKind.PERMISSION) == faults


def test_permission_intersects_stages():
    views = [leaf(0b01, stage=1), leaf(0b01, stage=2)]
    assert permission_check(views, Access.WRITE, 1) is FaultKind.PERMISSION
    views = [leaf(0b01, stage=1), leaf(0b11, stage=2)]
    assert permission_check(views, Access.WRITE, 1) is None


def test_pte_builtin_names_the_walked_cell():
    image = build("physical pa1; virtual x; x |-> pa1;")
    cell = resolve_builtin("pte3", ["x", "default"], {}, image)
    res = walk(Regime.EL10_S1, image.env["x"].addr, Access.READ,
               reader(image), s1_root=image.roots["default"])
    assert res.reads[-1].pa == cell
