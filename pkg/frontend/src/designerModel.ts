// Pure state for the layout designer: group fine-grained cells into keys.
// Overlap can never be saved: selecting an already-assigned cell is refused
// with a warning, and key creation re-checks before committing.

import type { KeyWire, LayoutWire } from "./api.js";

export interface GridShape {
  rows: number;
  cols: number;
  cellSize: number;
}

export function cellAt(grid: GridShape, row: number, col: number): number {
  return row * grid.cols + col;
}

export function cellRowCol(grid: GridShape, cell: number): [number, number] {
  return [Math.floor(cell / grid.cols), cell % grid.cols];
}

export function cellCenter(grid: GridShape, cell: number): [number, number] {
  const [row, col] = cellRowCol(grid, cell);
  return [
    col * grid.cellSize + grid.cellSize / 2,
    row * grid.cellSize + grid.cellSize / 2,
  ];
}

export function keyCenter(grid: GridShape, cells: Iterable<number>): [number, number] {
  let sx = 0;
  let sy = 0;
  let n = 0;
  for (const cell of cells) {
    const [x, y] = cellCenter(grid, cell);
    sx += x;
    sy += y;
    n += 1;
  }
  return [sx / n, sy / n];
}

export interface KeyDef {
  id: string;
  label: string;
  cells: Set<number>;
}

export type SelectResult =
  | { ok: true }
  | { ok: false; reason: "assigned"; key: string }
  | { ok: false; reason: "out_of_board" };

export type CommitResult =
  | { ok: true; key: KeyDef }
  | { ok: false; reason: string };

export class LayoutDraft {
  readonly keys = new Map<string, KeyDef>();
  readonly selection = new Set<number>();
  referenceKey: string | null = null;

  constructor(readonly grid: GridShape, public layoutId: string = "untitled") {}

  get assignments(): Map<number, string> {
    const owner = new Map<number, string>();
    for (const key of this.keys.values()) {
      for (const cell of key.cells) owner.set(cell, key.id);
    }
    return owner;
  }

  ownerOf(cell: number): string | null {
    for (const key of this.keys.values()) {
      if (key.cells.has(cell)) return key.id;
    }
    return null;
  }

  toggleCell(cell: number): SelectResult {
    if (cell < 0 || cell >= this.grid.rows * this.grid.cols) {
      return { ok: false, reason: "out_of_board" };
    }
    if (this.selection.has(cell)) {
      this.selection.delete(cell);
      return { ok: true };
    }
    const owner = this.ownerOf(cell);
    if (owner !== null) return { ok: false, reason: "assigned", key: owner };
    this.selection.add(cell);
    return { ok: true };
  }

  selectRect(a: number, b: number): SelectResult[] {
    const [r1, c1] = cellRowCol(this.grid, a);
    const [r2, c2] = cellRowCol(this.grid, b);
    const results: SelectResult[] = [];
    for (let r = Math.min(r1, r2); r <= Math.max(r1, r2); r++) {
      for (let c = Math.min(c1, c2); c <= Math.max(c1, c2); c++) {
        const cell = cellAt(this.grid, r, c);
        if (!this.selection.has(cell)) results.push(this.toggleCell(cell));
      }
    }
    return results;
  }

  clearSelection(): void {
    this.selection.clear();
  }

  commitKey(id: string, label?: string): CommitResult {
    if (!id) return { ok: false, reason: "key id is empty" };
    if (this.keys.has(id)) return { ok: false, reason: `key ${id} already exists` };
    if (this.selection.size === 0) return { ok: false, reason: "no cells selected" };
    for (const cell of this.selection) {
      const owner = this.ownerOf(cell);
      if (owner !== null) {
        return { ok: false, reason: `cell ${cell} already belongs to ${owner}` };
      }
    }
    const key: KeyDef = { id, label: label ?? id, cells: new Set(this.selection) };
    this.keys.set(id, key);
    this.selection.clear();
    return { ok: true, key };
  }

  removeKey(id: string): boolean {
    if (this.referenceKey === id) this.referenceKey = null;
    return this.keys.delete(id);
  }

  toWire(): LayoutWire {
    const keys: KeyWire[] = [...this.keys.values()].map((k) => ({
      id: k.id,
      label: k.label,
      cells: [...k.cells].sort((a, b) => a - b),
    }));
    keys.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
    return {
      klv: 1,
      id: this.layoutId,
      board: {
        rows: this.grid.rows,
        cols: this.grid.cols,
        cell_size: this.grid.cellSize,
      },
      keys,
      reference_key: this.referenceKey,
    };
  }

  static fromWire(wire: LayoutWire): LayoutDraft {
    const draft = new LayoutDraft(
      {
        rows: wire.board.rows,
        cols: wire.board.cols,
        cellSize: wire.board.cell_size,
      },
      wire.id,
    );
    for (const key of wire.keys) {
      draft.keys.set(key.id, {
        id: key.id,
        label: key.label,
        cells: new Set(key.cells),
      });
    }
    draft.referenceKey = wire.reference_key;
    return draft;
  }
}

export function sameCellSets(a: LayoutWire, b: LayoutWire): boolean {
  if (a.keys.length !== b.keys.length) return false;
  const index = new Map(a.keys.map((k) => [k.id, [...k.cells].sort((x, y) => x - y)]));
  for (const key of b.keys) {
    const cells = index.get(key.id);
    if (!cells) return false;
    const other = [...key.cells].sort((x, y) => x - y);
    if (cells.length !== other.length) return false;
    for (let i = 0; i < cells.length; i++) {
      if (cells[i] !== other[i]) return false;
    }
  }
  return true;
}
