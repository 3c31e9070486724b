// Decision-building state for one queue item. Mirrors the server's decision
// invariants so invalid submissions are blocked client-side:
//   - a non-filtered decision needs at least one kept or added frame
//   - a filtered decision carries no frames (frame controls disabled)
//   - kept is a subset of the proposal, added is disjoint from it

import type { DecisionPayload, QueueItem } from "./api.js";

export interface FrameRow {
  tag: string;
  proposed: boolean;
  checked: boolean;
  reason: string | null;
  shortcut: number | null; // 1-9 keyboard toggle
}

export class ItemSession {
  readonly item: QueueItem;
  filtered: boolean;
  private checked: Set<string>;
  private readonly allTags: string[];
  private readonly startedAt: number;
  private readonly now: () => number;

  constructor(item: QueueItem, allTags: string[], now: () => number = Date.now) {
    this.item = item;
    this.allTags = allTags;
    this.filtered = item.proposed.filtered;
    // proposed frames start pre-checked
    this.checked = new Set(item.proposed.frames);
    this.now = now;
    this.startedAt = now(); // timer runs from first render
  }

  rows(): FrameRow[] {
    return this.allTags.map((tag, index) => ({
      tag,
      proposed: this.item.proposed.frames.includes(tag),
      checked: !this.filtered && this.checked.has(tag),
      reason: this.item.proposed.rationales[tag] ?? null,
      shortcut: index < 9 ? index + 1 : null,
    }));
  }

  toggleFrame(tag: string): void {
    if (this.filtered || !this.allTags.includes(tag)) return;
    if (this.checked.has(tag)) {
      this.checked.delete(tag);
    } else {
      this.checked.add(tag);
    }
  }

  toggleFiltered(): void {
    this.filtered = !this.filtered;
  }

  framesDisabled(): boolean {
    return this.filtered;
  }

  canSubmit(): boolean {
    if (this.filtered) return true;
    return this.checked.size > 0;
  }

  elapsedSeconds(): number {
    return Math.max((this.now() - this.startedAt) / 1000, 0.001);
  }

  buildDecision(annotator: string): DecisionPayload {
    if (!this.canSubmit()) {
      throw new Error("empty non-filtered decision");
    }
    const proposed = new Set(this.item.proposed.frames);
    const kept = this.filtered
      ? []
      : [...this.checked].filter((tag) => proposed.has(tag));
    const added = this.filtered
      ? []
      : [...this.checked].filter((tag) => !proposed.has(tag));
    return {
      item_id: this.item.item_id,
      annotator,
      kept,
      added,
      filtered: this.filtered,
      elapsed_seconds: this.elapsedSeconds(),
    };
  }

  // Keyboard shortcuts: digits 1-9 toggle frames, "0" toggles filtered.
  // Returns true when the key was handled (Enter is handled by the caller,
  // which submits only when canSubmit()).
  handleKey(key: string): boolean {
    if (key === "0") {
      this.toggleFiltered();
      return true;
    }
    const digit = Number.parseInt(key, 10);
    if (Number.isInteger(digit) && digit >= 1 && digit <= this.allTags.length) {
      this.toggleFrame(this.allTags[digit - 1]);
      return true;
    }
    return false;
  }
}
