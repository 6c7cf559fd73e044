/**
 * UI state machine. Three screens (labelling, done, error-retry), one
 * in-flight request at a time, and an entry buffer that survives every
 * failure path so a typo never costs the label the user already typed.
 */

import { ApiError, type LabelApi, type NextItem, type Progress } from "./api.js";

export type Screen = "labelling" | "done" | "error";

export interface Config {
  /** null = rule unknown client-side; the server then decides alone. */
  charset: string | null;
  /** expected label length, 0 = free */
  length: number;
}

export interface UiState {
  screen: Screen;
  current: NextItem | null;
  entry: string;
  progress: Progress;
  lastError: string | null; // inline message on the labelling screen
  retryMessage: string | null; // banner on the error screen
  pending: boolean;
}

/**
 * Client-side mirror of the server's label check. Message strings match the
 * server's 400 bodies exactly, so locally caught mistakes read the same as
 * round-tripped ones. The server stays authoritative either way.
 */
export function validateEntry(label: string, cfg: Config): string | null {
  if (!label) {
    return "empty label";
  }
  if (cfg.charset !== null) {
    const bad: string[] = [];
    for (const ch of label) {
      if (!cfg.charset.includes(ch) && !bad.includes(ch)) {
        bad.push(ch);
      }
    }
    if (bad.length === 1) {
      return `invalid character '${bad[0]}'`;
    }
    if (bad.length > 1) {
      return `invalid characters ${bad.map((c) => `'${c}'`).join(", ")}`;
    }
  }
  if (cfg.length && label.length !== cfg.length) {
    return `expected ${cfg.length} characters, got ${label.length}`;
  }
  return null;
}

function messageOf(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}

export type Listener = (state: UiState) => void;

export class Labeller {
  state: UiState = {
    screen: "labelling",
    current: null,
    entry: "",
    progress: { labeled: 0, total: 0 },
    lastError: null,
    retryMessage: null,
    pending: false,
  };

  constructor(
    private readonly api: LabelApi,
    private readonly cfg: Config,
    private readonly onChange: Listener = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  setEntry(text: string): void {
    this.state.entry = text;
    this.state.lastError = null; // editing acknowledges the message
    this.emit();
  }

  /** Refresh progress and fetch the next unlabeled item. Any failure—
   *  network or server—lands on the error screen with state preserved. */
  private async loadNext(): Promise<void> {
    this.state.pending = true;
    this.emit();
    try {
      const progress = await this.api.progress();
      const next = await this.api.next();
      this.state.progress = progress;
      if ("done" in next) {
        this.state.screen = "done";
        this.state.current = null;
      } else {
        this.state.screen = "labelling";
        this.state.current = next;
      }
      this.state.retryMessage = null;
    } catch (e) {
      this.state.screen = "error";
      this.state.retryMessage = messageOf(e);
    } finally {
      this.state.pending = false;
      this.emit();
    }
  }

  async submit(): Promise<void> {
    const { current, entry, pending, screen } = this.state;
    if (pending || screen !== "labelling" || current === null) {
      return;
    }
    const local = validateEntry(entry, this.cfg);
    if (local !== null) {
      this.state.lastError = local;
      this.emit();
      return;
    }
    this.state.pending = true;
    this.emit();
    try {
      await this.api.label(current.id, entry);
    } catch (e) {
      if (e instanceof ApiError) {
        // 400/404/409: inline, entry kept editable
        this.state.lastError = e.message;
      } else {
        this.state.screen = "error";
        this.state.retryMessage = messageOf(e);
      }
      this.state.pending = false;
      this.emit();
      return;
    }
    this.state.entry = "";
    this.state.lastError = null;
    this.state.pending = false;
    await this.loadNext();
  }

  async skip(): Promise<void> {
    const { current, pending, screen } = this.state;
    if (pending || screen !== "labelling" || current === null) {
      return;
    }
    this.state.pending = true;
    this.emit();
    try {
      await this.api.skip(current.id);
    } catch (e) {
      if (e instanceof ApiError) {
        this.state.lastError = e.message;
      } else {
        this.state.screen = "error";
        this.state.retryMessage = messageOf(e);
      }
      this.state.pending = false;
      this.emit();
      return;
    }
    // the buffer belonged to the item just skipped
    this.state.entry = "";
    this.state.lastError = null;
    this.state.pending = false;
    await this.loadNext();
  }

  async retry(): Promise<void> {
    if (this.state.pending || this.state.screen !== "error") {
      return;
    }
    await this.loadNext();
  }
}
