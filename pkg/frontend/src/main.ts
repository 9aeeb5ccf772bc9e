// Browser app shell: a layout designer tab and a live typing playground tab.
// All detection comes from service events; this file only renders and routes
// user input.

import { ApiError, MagkeyClient } from "./api.js";
import type { BoardInfo, LayoutWire } from "./api.js";
import { LayoutDraft, cellAt, cellCenter, keyCenter } from "./designerModel.js";
import type { GridShape } from "./designerModel.js";
import { Playground, posteriorShading } from "./playgroundModel.js";

const client = new MagkeyClient("");

const KEY_COLORS = [
  "#7db7e8", "#8fd18f", "#e8b77d", "#c79ede", "#e89a9a", "#7dd8cf",
  "#d8cf7d", "#9aaee8", "#a8e87d", "#e87dc8", "#7de8a5", "#e8d17d",
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function colorFor(keyId: string, order: string[]): string {
  const idx = order.indexOf(keyId);
  return KEY_COLORS[(idx >= 0 ? idx : order.length) % KEY_COLORS.length];
}

// -- designer tab -----------------------------------------------------------

class DesignerView {
  draft: LayoutDraft;
  private cells: HTMLDivElement[] = [];
  private dragAnchor: number | null = null;
  private status: HTMLElement;
  private keyList: HTMLElement;

  constructor(readonly root: HTMLElement, readonly grid: GridShape) {
    this.draft = new LayoutDraft(grid);
    const controls = el("div", "controls");
    const nameInput = el("input") as HTMLInputElement;
    nameInput.placeholder = "layout id";
    nameInput.value = "my-layout";
    const labelInput = el("input") as HTMLInputElement;
    labelInput.placeholder = "key label";
    const addBtn = el("button", "", "group selection into key");
    const refBtn = el("button", "", "mark as reference key");
    const saveBtn = el("button", "", "save layout");
    const loadSelect = el("select") as HTMLSelectElement;
    const loadBtn = el("button", "", "load");
    controls.append(nameInput, labelInput, addBtn, refBtn, saveBtn, loadSelect, loadBtn);

    this.status = el("div", "status");
    this.keyList = el("div", "key-list");
    const gridEl = this.buildGrid();
    root.append(controls, this.status, gridEl, this.keyList);

    addBtn.onclick = () => {
      const label = labelInput.value.trim() || `k${this.draft.keys.size}`;
      const result = this.draft.commitKey(label, label);
      this.say(result.ok ? `added key ${label}` : result.reason, !result.ok);
      labelInput.value = "";
      this.render();
    };
    refBtn.onclick = () => {
      const last = [...this.draft.keys.keys()].pop();
      if (last) {
        this.draft.referenceKey = last;
        this.say(`reference key: ${last}`);
        this.render();
      }
    };
    saveBtn.onclick = async () => {
      this.draft.layoutId = nameInput.value.trim() || "my-layout";
      try {
        await client.putLayout(this.draft.toWire());
        this.say(`saved ${this.draft.layoutId}`);
        await this.refreshLayoutList(loadSelect);
      } catch (err) {
        if (err instanceof ApiError) {
          this.say(err.violations.map((v) => v.message).join("; ") || err.message, true);
        } else throw err;
      }
    };
    loadBtn.onclick = async () => {
      if (!loadSelect.value) return;
      const wire = await client.getLayout(loadSelect.value);
      this.draft = LayoutDraft.fromWire(wire);
      nameInput.value = wire.id;
      this.say(`loaded ${wire.id} (${wire.keys.length} keys)`);
      this.render();
    };
    void this.refreshLayoutList(loadSelect);
  }

  private async refreshLayoutList(select: HTMLSelectElement): Promise<void> {
    const ids = await client.listLayouts();
    select.innerHTML = "";
    for (const id of ids) {
      const opt = el("option", "", id) as HTMLOptionElement;
      opt.value = id;
      select.append(opt);
    }
  }

  private buildGrid(): HTMLElement {
    const gridEl = el("div", "grid");
    gridEl.style.gridTemplateColumns = `repeat(${this.grid.cols}, 28px)`;
    for (let r = 0; r < this.grid.rows; r++) {
      for (let c = 0; c < this.grid.cols; c++) {
        const cell = cellAt(this.grid, r, c);
        const div = el("div", "cell");
        div.dataset.cell = String(cell);
        div.onmousedown = (ev) => {
          ev.preventDefault();
          this.dragAnchor = cell;
          this.applyToggle(cell);
        };
        div.onmouseenter = () => {
          if (this.dragAnchor !== null) this.applyRect(this.dragAnchor, cell);
        };
        this.cells.push(div);
        gridEl.append(div);
      }
    }
    gridEl.onmouseup = () => {
      this.dragAnchor = null;
    };
    gridEl.onmouseleave = () => {
      this.dragAnchor = null;
    };
    return gridEl;
  }

  private applyToggle(cell: number): void {
    const result = this.draft.toggleCell(cell);
    if (!result.ok && result.reason === "assigned") {
      this.say(`cell ${cell} already belongs to key ${result.key}`, true);
    }
    this.render();
  }

  private applyRect(a: number, b: number): void {
    const conflicts = this.draft
      .selectRect(a, b)
      .filter((r) => !r.ok && r.reason === "assigned");
    if (conflicts.length > 0) {
      this.say("selection overlaps existing keys; overlapping cells skipped", true);
    }
    this.render();
  }

  private say(text: string, warn = false): void {
    this.status.textContent = text;
    this.status.classList.toggle("warn", warn);
  }

  render(): void {
    const order = [...this.draft.keys.keys()];
    const owner = this.draft.assignments;
    for (const div of this.cells) {
      const cell = Number(div.dataset.cell);
      const keyId = owner.get(cell);
      div.classList.toggle("selected", this.draft.selection.has(cell));
      div.style.background = keyId ? colorFor(keyId, order) : "";
      div.textContent = keyId ?? "";
    }
    this.keyList.innerHTML = "";
    for (const key of this.draft.keys.values()) {
      const tag = key.id === this.draft.referenceKey ? " (reference)" : "";
      const row = el("div", "key-row", `${key.id}${tag}: ${key.cells.size} cells `);
      const rm = el("button", "", "remove");
      rm.onclick = () => {
        this.draft.removeKey(key.id);
        this.render();
      };
      row.append(rm);
      this.keyList.append(row);
    }
  }
}

// -- playground tab -----------------------------------------------------------

class PlaygroundView {
  playground = new Playground(client);
  private cells: HTMLDivElement[] = [];
  private layout: LayoutWire | null = null;
  private status: HTMLElement;
  private wizardLog: HTMLElement;
  private pollTimer: number | null = null;

  constructor(readonly root: HTMLElement, readonly board: BoardInfo) {
    const controls = el("div", "controls");
    const layoutSelect = el("select") as HTMLSelectElement;
    const startBtn = el("button", "", "start session");
    const flipToggle = el("input") as HTMLInputElement;
    flipToggle.type = "checkbox";
    const flipLabel = el("label", "", " flipped magnet ");
    flipLabel.prepend(flipToggle);
    const liftBtn = el("button", "", "lift magnet");
    controls.append(layoutSelect, startBtn, flipLabel, liftBtn);

    const wizard = el("div", "controls");
    const silenceBtn = el("button", "", "1. silence (15 s)");
    const polarityBtn = el("button", "", "2. reference click");
    const anchorsBtn = el("button", "", "3. two anchors");
    wizard.append(el("span", "", "calibration wizard: "), silenceBtn, polarityBtn, anchorsBtn);

    this.status = el("div", "status");
    this.wizardLog = el("div", "status");
    const gridEl = this.buildGrid();
    root.append(controls, wizard, this.status, this.wizardLog, gridEl);

    void client.listLayouts().then((ids) => {
      layoutSelect.innerHTML = "";
      for (const id of ids) {
        const opt = el("option", "", id) as HTMLOptionElement;
        opt.value = id;
        layoutSelect.append(opt);
      }
    });

    startBtn.onclick = async () => {
      const layoutId = layoutSelect.value || "calculator";
      this.layout = await client.getLayout(layoutId);
      await this.playground.start({
        layout: layoutId,
        flip_polarity: flipToggle.checked,
      });
      this.status.textContent = `session ${this.playground.sessionId} started`;
      this.render(new Map());
      this.startPolling();
    };
    liftBtn.onclick = () => void this.playground.liftMagnet();
    silenceBtn.onclick = async () => {
      const r = await this.playground.runSilence(15);
      this.wizardLog.textContent = r.warning ?? "silence captured";
      this.wizardLog.classList.toggle("warn", r.warning !== null);
    };
    polarityBtn.onclick = async () => {
      const r = await this.playground.runPolarity();
      this.wizardLog.textContent = `polarity: ${r.polarity}`;
    };
    anchorsBtn.onclick = async () => {
      const r = await this.playground.runAnchors();
      this.wizardLog.textContent =
        `anchors fitted, gains ${r.gains.map((g) => g.toFixed(2)).join(", ")}`;
    };
  }

  private grid(): GridShape {
    return { rows: this.board.rows, cols: this.board.cols, cellSize: this.board.cell_size };
  }

  private buildGrid(): HTMLElement {
    const gridEl = el("div", "grid");
    gridEl.style.gridTemplateColumns = `repeat(${this.board.cols}, 28px)`;
    for (let r = 0; r < this.board.rows; r++) {
      for (let c = 0; c < this.board.cols; c++) {
        const cell = cellAt(this.grid(), r, c);
        const div = el("div", "cell");
        div.dataset.cell = String(cell);
        div.onmousedown = () => {
          const [x, y] = cellCenter(this.grid(), cell);
          void this.playground.placeMagnet(x, y).catch(() => {
            this.status.textContent = "session expired; start a new one";
          });
        };
        this.cells.push(div);
        gridEl.append(div);
      }
    }
    return gridEl;
  }

  private startPolling(): void {
    if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
    this.pollTimer = window.setInterval(async () => {
      try {
        const update = await this.playground.poll();
        if (update.events.length > 0 || update.lastKey !== null) {
          this.status.textContent = update.lastKey
            ? `detected key: ${update.lastKey}`
            : "detected placement outside any key";
        }
        this.render(posteriorShading(this.playground.lastEvent));
      } catch {
        if (this.playground.expired) {
          this.status.textContent = "session expired; start a new one";
          if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
        }
      }
    }, 300);
  }

  render(shading: Map<number, number>): void {
    const owner = new Map<number, string>();
    const order: string[] = [];
    if (this.layout) {
      for (const key of this.layout.keys) {
        order.push(key.id);
        for (const cell of key.cells) owner.set(cell, key.id);
      }
    }
    const hotKey = this.playground.lastEvent?.key ?? null;
    for (const div of this.cells) {
      const cell = Number(div.dataset.cell);
      const keyId = owner.get(cell);
      div.textContent = keyId ?? "";
      div.style.background = keyId ? colorFor(keyId, order) : "";
      div.classList.toggle("hot", keyId !== undefined && keyId === hotKey);
      const alpha = shading.get(cell);
      div.style.outline = alpha ? `3px solid rgba(200, 30, 30, ${alpha})` : "";
    }
  }
}

// -- shell -----------------------------------------------------------------

async function init(): Promise<void> {
  const app = document.getElementById("app")!;
  const board = await client.getBoard();
  const tabs = el("div", "tabs");
  const designerBtn = el("button", "", "designer");
  const playgroundBtn = el("button", "", "playground");
  tabs.append(designerBtn, playgroundBtn);
  const designerRoot = el("div", "tab");
  const playgroundRoot = el("div", "tab hidden");
  app.append(tabs, designerRoot, playgroundRoot);

  new DesignerView(designerRoot, {
    rows: board.rows,
    cols: board.cols,
    cellSize: board.cell_size,
  });
  new PlaygroundView(playgroundRoot, board);

  designerBtn.onclick = () => {
    designerRoot.classList.remove("hidden");
    playgroundRoot.classList.add("hidden");
  };
  playgroundBtn.onclick = () => {
    playgroundRoot.classList.remove("hidden");
    designerRoot.classList.add("hidden");
  };
}

if (typeof document !== "undefined") {
  void init();
}

export { keyCenter };
