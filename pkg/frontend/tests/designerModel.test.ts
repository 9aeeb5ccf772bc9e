import { describe, expect, it } from "vitest";

import type { LayoutWire } from "../src/api.js";
import {
  LayoutDraft,
  cellAt,
  cellCenter,
  keyCenter,
  sameCellSets,
} from "../src/designerModel.js";

const GRID = { rows: 8, cols: 18, cellSize: 2.0 };

describe("grid geometry", () => {
  it("indexes cells row-major", () => {
    expect(cellAt(GRID, 0, 0)).toBe(0);
    expect(cellAt(GRID, 1, 0)).toBe(18);
    expect(cellAt(GRID, 7, 17)).toBe(143);
  });

  it("computes centroids in board cm", () => {
    expect(cellCenter(GRID, 0)).toEqual([1, 1]);
    expect(cellCenter(GRID, 143)).toEqual([35, 15]);
  });

  it("averages key centers", () => {
    expect(keyCenter(GRID, [0, 1, 18, 19])).toEqual([2, 2]);
  });
});

describe("LayoutDraft", () => {
  it("groups selected cells into a key and clears the selection", () => {
    const draft = new LayoutDraft(GRID);
    draft.toggleCell(0);
    draft.toggleCell(1);
    const result = draft.commitKey("A");
    expect(result.ok).toBe(true);
    expect(draft.selection.size).toBe(0);
    expect(draft.keys.get("A")?.cells).toEqual(new Set([0, 1]));
  });

  it("refuses selecting an already-assigned cell with the owning key", () => {
    const draft = new LayoutDraft(GRID);
    draft.toggleCell(5);
    draft.commitKey("A");
    const result = draft.toggleCell(5);
    expect(result).toEqual({ ok: false, reason: "assigned", key: "A" });
    expect(draft.selection.has(5)).toBe(false);
  });

  it("rejects duplicate key ids and empty selections", () => {
    const draft = new LayoutDraft(GRID);
    expect(draft.commitKey("A").ok).toBe(false);
    draft.toggleCell(3);
    draft.commitKey("A");
    draft.toggleCell(4);
    expect(draft.commitKey("A").ok).toBe(false);
  });

  it("selects rectangles and reports overlap conflicts", () => {
    const draft = new LayoutDraft(GRID);
    draft.toggleCell(cellAt(GRID, 1, 1));
    draft.commitKey("X");
    const results = draft.selectRect(cellAt(GRID, 0, 0), cellAt(GRID, 1, 1));
    const conflicts = results.filter((r) => !r.ok);
    expect(conflicts).toHaveLength(1);
    expect(draft.selection.size).toBe(3);
  });

  it("round-trips through the wire format", () => {
    const draft = new LayoutDraft(GRID, "pad");
    draft.selectRect(cellAt(GRID, 0, 0), cellAt(GRID, 1, 1));
    draft.commitKey("TL");
    draft.selectRect(cellAt(GRID, 0, 2), cellAt(GRID, 1, 3));
    draft.commitKey("TR");
    draft.referenceKey = "TL";
    const wire = draft.toWire();
    const back = LayoutDraft.fromWire(wire);
    expect(back.layoutId).toBe("pad");
    expect(back.referenceKey).toBe("TL");
    expect(sameCellSets(wire, back.toWire())).toBe(true);
  });

  it("removing a key frees its cells", () => {
    const draft = new LayoutDraft(GRID);
    draft.toggleCell(9);
    draft.commitKey("A");
    expect(draft.removeKey("A")).toBe(true);
    expect(draft.toggleCell(9).ok).toBe(true);
  });
});

describe("sameCellSets", () => {
  const base: LayoutWire = {
    klv: 1,
    id: "a",
    board: { rows: 8, cols: 18, cell_size: 2 },
    keys: [{ id: "k", label: "k", cells: [1, 2, 3] }],
    reference_key: null,
  };

  it("accepts reordered cells", () => {
    const other = { ...base, keys: [{ id: "k", label: "k", cells: [3, 1, 2] }] };
    expect(sameCellSets(base, other)).toBe(true);
  });

  it("rejects differing cells or keys", () => {
    const other = { ...base, keys: [{ id: "k", label: "k", cells: [1, 2] }] };
    expect(sameCellSets(base, other)).toBe(false);
    const renamed = { ...base, keys: [{ id: "j", label: "k", cells: [1, 2, 3] }] };
    expect(sameCellSets(base, renamed)).toBe(false);
  });
});
