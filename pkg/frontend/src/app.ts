/**
 * DOM layer: builds the three-screen skeleton under a root element, renders
 * every state change into it, and binds the keyboard-first controls
 * (Enter submits, Esc skips).
 */

import { httpApi, type LabelApi } from "./api.js";
import { Labeller, type Config, type UiState } from "./state.js";

export interface AppOptions {
  cfg: Config;
  /** injectable for tests; defaults to the real HTTP client */
  api?: LabelApi;
  /** URL prefix for the real client, e.g. "http://127.0.0.1:8000" */
  base?: string;
}

const SKELETON = `
<main class="labeller">
  <section id="screen-labelling" hidden>
    <img id="captcha" alt="captcha to label">
    <div class="meta">
      <span id="remaining"></span>
      <span id="progress"></span>
    </div>
    <form id="entry-form">
      <input id="entry" autocomplete="off" spellcheck="false"
             placeholder="type the text, Enter submits, Esc skips">
      <button id="submit" type="submit">label</button>
      <button id="skip" type="button">skip</button>
    </form>
    <div id="inline-error" class="error" role="alert"></div>
  </section>
  <section id="screen-done" hidden>
    <p>all images labelled</p>
    <p id="done-progress"></p>
  </section>
  <section id="screen-error" hidden>
    <p id="retry-message" class="error" role="alert"></p>
    <button id="retry" type="button">retry</button>
  </section>
</main>`;

export function initApp(root: HTMLElement, options: AppOptions): Labeller {
  root.innerHTML = SKELETON;
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector<T>(`#${id}`);
    if (!el) {
      throw new Error(`skeleton is missing #${id}`);
    }
    return el;
  };

  const screens = {
    labelling: byId<HTMLElement>("screen-labelling"),
    done: byId<HTMLElement>("screen-done"),
    error: byId<HTMLElement>("screen-error"),
  };
  const captcha = byId<HTMLImageElement>("captcha");
  const remaining = byId<HTMLElement>("remaining");
  const progress = byId<HTMLElement>("progress");
  const doneProgress = byId<HTMLElement>("done-progress");
  const form = byId<HTMLFormElement>("entry-form");
  const entry = byId<HTMLInputElement>("entry");
  const submitBtn = byId<HTMLButtonElement>("submit");
  const skipBtn = byId<HTMLButtonElement>("skip");
  const inlineError = byId<HTMLElement>("inline-error");
  const retryMessage = byId<HTMLElement>("retry-message");
  const retryBtn = byId<HTMLButtonElement>("retry");

  function render(s: UiState): void {
    for (const [name, el] of Object.entries(screens)) {
      el.hidden = name !== s.screen;
    }
    if (s.current) {
      if (captcha.src !== s.current.image) {
        captcha.src = s.current.image;
      }
      remaining.textContent = `${s.current.remaining} remaining`;
    }
    const counted = `${s.progress.labeled}/${s.progress.total}`;
    progress.textContent = counted;
    doneProgress.textContent = `${counted} labelled`;
    if (entry.value !== s.entry) {
      entry.value = s.entry; // don't clobber the cursor on no-op renders
    }
    entry.disabled = s.pending;
    submitBtn.disabled = s.pending;
    skipBtn.disabled = s.pending;
    retryBtn.disabled = s.pending;
    inlineError.textContent = s.lastError ?? "";
    retryMessage.textContent = s.retryMessage ?? "";
    if (s.screen === "labelling" && !s.pending) {
      entry.focus();
    }
  }

  const api = options.api ?? httpApi(options.base ?? "");
  const labeller = new Labeller(api, options.cfg, render);

  entry.addEventListener("input", () => {
    labeller.setEntry(entry.value);
  });
  entry.addEventListener("keydown", (e) => {
    // explicit Enter handling: preventDefault also cancels the form's
    // implicit submission, so the label is sent exactly once
    if (e.key === "Enter") {
      e.preventDefault();
      void labeller.submit();
    } else if (e.key === "Escape") {
      e.preventDefault();
      void labeller.skip();
    }
  });
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    void labeller.submit();
  });
  skipBtn.addEventListener("click", () => {
    void labeller.skip();
  });
  retryBtn.addEventListener("click", () => {
    void labeller.retry();
  });

  void labeller.start();
  return labeller;
}
