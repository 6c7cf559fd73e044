/**
 * Entry point. The label server substitutes a JSON config token into the
 * page when it serves it; if the token is absent (assets served some other
 * way) the client runs without local validation and the server alone
 * rejects bad labels.
 */

import { initApp } from "./app.js";
import type { Config } from "./state.js";

export function injectedConfig(doc: Document): Config {
  const tag = doc.getElementById("labeller-config");
  try {
    const parsed: unknown = JSON.parse(tag?.textContent ?? "");
    if (
      typeof parsed === "object" &&
      parsed !== null &&
      typeof (parsed as { charset?: unknown }).charset === "string"
    ) {
      const cfg = parsed as { charset: string; length?: unknown };
      return { charset: cfg.charset, length: Number(cfg.length) || 0 };
    }
  } catch {
    // unsubstituted token or malformed JSON: fall through
  }
  return { charset: null, length: 0 };
}

const root = document.getElementById("app");
if (root) {
  initApp(root, { cfg: injectedConfig(document) });
}
