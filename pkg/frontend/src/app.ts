// Minimal DOM wiring: fetch an item, render frame checkboxes with the
// proposal's reasons, submit the decision and advance to the next item.
// All business rules live in ItemSession; this file only reflects them.

import { ValidationApi, type FrameInfo, type Stats } from "./api.js";
import { ItemSession } from "./state.js";

export class App {
  private session: ItemSession | null = null;
  private frames: FrameInfo[] = [];

  constructor(
    private api: ValidationApi,
    private annotator: string,
    private root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.frames = await this.api.frames();
    document.addEventListener("keydown", (event) => this.onKey(event));
    await this.advance();
  }

  private async advance(): Promise<void> {
    const item = await this.api.nextItem(this.annotator);
    if (item === null) {
      this.session = null;
      this.root.innerHTML = "<p>Queue drained. Nothing left to review.</p>";
      await this.renderStats();
      return;
    }
    this.session = new ItemSession(
      item,
      this.frames.map((f) => f.tag),
    );
    this.render();
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.session) return;
    if (event.key === "Enter") {
      void this.submit();
      return;
    }
    if (this.session.handleKey(event.key)) {
      this.render();
    }
  }

  private async submit(): Promise<void> {
    if (!this.session || !this.session.canSubmit()) return;
    await this.api.submitDecision(this.session.buildDecision(this.annotator));
    await this.advance();
  }

  private render(): void {
    const session = this.session;
    if (!session) return;
    const rows = session
      .rows()
      .map((row) => {
        const reason = row.reason
          ? `<span class="reason">because ${escapeHtml(row.reason)}</span>`
          : "";
        return `<label class="frame-row">
          <input type="checkbox" data-tag="${row.tag}"
            ${row.checked ? "checked" : ""}
            ${session.framesDisabled() ? "disabled" : ""}>
          <kbd>${row.shortcut ?? ""}</kbd> ${row.tag} ${reason}
        </label>`;
      })
      .join("\n");
    this.root.innerHTML = `
      <blockquote id="post-text">${escapeHtml(session.item.post.text)}</blockquote>
      <div id="frames">${rows}</div>
      <label><input type="checkbox" id="filtered"
        ${session.filtered ? "checked" : ""}> Filtered (<kbd>0</kbd>)</label>
      <button id="submit" ${session.canSubmit() ? "" : "disabled"}>
        Submit (<kbd>Enter</kbd>)
      </button>
      <div id="stats"></div>`;
    this.root.querySelectorAll("input[data-tag]").forEach((box) => {
      box.addEventListener("change", () => {
        session.toggleFrame((box as HTMLInputElement).dataset.tag!);
        this.render();
      });
    });
    this.root.querySelector("#filtered")!.addEventListener("change", () => {
      session.toggleFiltered();
      this.render();
    });
    this.root.querySelector("#submit")!.addEventListener("click", () => {
      void this.submit();
    });
  }

  private async renderStats(): Promise<void> {
    const stats: Stats = await this.api.stats();
    const done = `${stats.items_done}/${stats.items_total}`;
    const mean =
      stats.elapsed_mean === null ? "n/a" : `${stats.elapsed_mean.toFixed(1)}s`;
    const target = this.root.querySelector("#stats") ?? this.root;
    target.insertAdjacentHTML(
      "beforeend",
      `<p id="progress">Progress ${done}, mean decision time ${mean}</p>`,
    );
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
