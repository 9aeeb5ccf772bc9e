import numpy as np
import pytest

from magkey.board import GridShape
from magkey.errors import DomainError, FormatError
from magkey.estimate import Estimate
from magkey.keymap import (
    Key,
    KeyLayout,
    calculator_layout,
    key_center,
    map_key,
    validate_layout,
)

GRID = GridShape(8, 18, 2.0)


def discrete_estimate(cell, grid=GRID):
    row, col = divmod(cell, grid.cols)
    pos = np.array([col * grid.cell_size + 1, row * grid.cell_size + 1])
    return Estimate("discrete", cell, pos, ((cell, 1.0),), 1, 20, grid)


def continuous_estimate(x, y, grid=GRID):
    return Estimate("continuous", 0, np.array([x, y]), ((0, 1.0),), 2, 20, grid)


def test_calculator_layout_is_valid(calc_layout):
    assert validate_layout(calc_layout) == []
    assert len(calc_layout.keys) == 16
    eq = calc_layout.key_by_id("=")
    zero = calc_layout.key_by_id("0")
    assert len(eq.cells) == 8
    assert len(zero.cells) == 4
    for key in calc_layout.keys:
        assert len(key.cells) >= 4 or key.id in ("=",)


def test_equals_key_maps_from_all_its_cells(calc_layout):
    eq = calc_layout.key_by_id("=")
    for cell in sorted(eq.cells):
        ev = map_key(discrete_estimate(cell), calc_layout)
        assert ev is not None and ev.key == "="


def test_zero_key_maps_from_all_its_cells(calc_layout):
    zero = calc_layout.key_by_id("0")
    for cell in sorted(zero.cells):
        ev = map_key(discrete_estimate(cell), calc_layout)
        assert ev is not None and ev.key == "0"


def test_unmapped_cell_returns_none(calc_layout):
    mapped = set().union(*(k.cells for k in calc_layout.keys))
    unmapped = next(c for c in range(GRID.n_cells) if c not in mapped)
    assert map_key(discrete_estimate(unmapped), calc_layout) is None


def test_continuous_estimate_snaps_to_cell(calc_layout):
    seven = calc_layout.key_by_id("7")
    center = key_center(calc_layout, seven)
    ev = map_key(continuous_estimate(center[0] + 0.3, center[1] + 0.2), calc_layout)
    assert ev is not None and ev.key == "7"
    assert map_key(continuous_estimate(-5.0, -5.0), calc_layout) is None


def test_board_mismatch_rejected(calc_layout):
    other = GridShape(4, 9, 4.0)
    with pytest.raises(DomainError):
        map_key(discrete_estimate(0, other), calc_layout)


def test_overlap_violation():
    layout = KeyLayout("bad", GRID, (
        Key("a", "a", frozenset({0, 1})),
        Key("b", "b", frozenset({1, 2})),
    ), reference_key="a")
    kinds = [v.kind for v in validate_layout(layout)]
    assert "overlap" in kinds


def test_out_of_board_violation():
    layout = KeyLayout("bad", GRID, (
        Key("a", "a", frozenset({0, 144})),
    ), reference_key="a")
    kinds = [v.kind for v in validate_layout(layout)]
    assert "out_of_board" in kinds


def test_empty_key_and_missing_reference():
    layout = KeyLayout("bad", GRID, (Key("a", "a", frozenset()),), reference_key="zz")
    kinds = [v.kind for v in validate_layout(layout)]
    assert "empty_key" in kinds
    assert "missing_reference" in kinds
    layout2 = KeyLayout("noref", GRID, (Key("a", "a", frozenset({0})),))
    assert any(v.kind == "missing_reference" for v in validate_layout(layout2))


def test_layout_round_trip_preserves_mapping(calc_layout, tmp_path):
    path = tmp_path / "calc.json"
    calc_layout.save(path)
    back = KeyLayout.load(path)
    assert back.to_dict() == calc_layout.to_dict()
    for cell in range(GRID.n_cells):
        a = map_key(discrete_estimate(cell), calc_layout)
        b = map_key(discrete_estimate(cell), back)
        assert (a is None) == (b is None)
        if a is not None:
            assert a.key == b.key


def test_merging_keys_only_shrinks_none_set(calc_layout):
    seven = calc_layout.key_by_id("7")
    eight = calc_layout.key_by_id("8")
    merged_keys = tuple(
        k for k in calc_layout.keys if k.id not in ("7", "8")
    ) + (Key("78", "78", seven.cells | eight.cells),)
    merged = KeyLayout("merged", GRID, merged_keys, reference_key="C")
    assert validate_layout(merged) == []
    for cell in range(GRID.n_cells):
        before = map_key(discrete_estimate(cell), calc_layout)
        after = map_key(discrete_estimate(cell), merged)
        if before is not None:
            assert after is not None


def test_layout_version_check(tmp_path):
    p = tmp_path / "layout.json"
    p.write_text('{"klv": 7}')
    with pytest.raises(FormatError):
        KeyLayout.load(p)


def test_calculator_requires_room():
    with pytest.raises(DomainError):
        calculator_layout(GridShape(4, 4, 2.0))
