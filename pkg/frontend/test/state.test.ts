import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { Labeller, validateEntry, type Config } from "../src/state.js";
import { FakeApi } from "./fake.js";

const RULE: Config = { charset: "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ", length: 4 };
const FREE: Config = { charset: null, length: 0 };

describe("validateEntry", () => {
  it("accepts labels matching charset and length", () => {
    expect(validateEntry("2JFF", RULE)).toBeNull();
  });

  it("rejects the empty entry regardless of config", () => {
    expect(validateEntry("", FREE)).toBe("empty label");
    expect(validateEntry("", RULE)).toBe("empty label");
  });

  it("names a single offending character like the server does", () => {
    expect(validateEntry("2JF!", RULE)).toBe("invalid character '!'");
  });

  it("names every offender once, in first-appearance order", () => {
    expect(validateEntry("2jf!", RULE)).toBe("invalid characters 'j', 'f', '!'");
    expect(validateEntry("!a!a", RULE)).toBe("invalid characters '!', 'a'");
  });

  it("checks characters before length", () => {
    expect(validateEntry("2J!", RULE)).toBe("invalid character '!'");
  });

  it("reports a length mismatch in the server's words", () => {
    expect(validateEntry("2JF", RULE)).toBe("expected 4 characters, got 3");
  });

  it("without a charset only the empty check applies", () => {
    expect(validateEntry("anything goes!", FREE)).toBeNull();
  });

  it("length 0 means free length", () => {
    expect(validateEntry("2JFFAA", { charset: RULE.charset, length: 0 })).toBeNull();
  });
});

describe("Labeller transitions", () => {
  it("start lands on the labelling screen with the first item", async () => {
    const api = FakeApi.withItems(["a.pgm", "b.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    expect(ui.state.screen).toBe("labelling");
    expect(ui.state.current?.id).toBe("a.pgm");
    expect(ui.state.progress).toEqual({ labeled: 0, total: 2 });
    expect(ui.state.pending).toBe(false);
  });

  it("start with nothing to label lands on done", async () => {
    const api = FakeApi.withItems([]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    expect(ui.state.screen).toBe("done");
    expect(ui.state.current).toBeNull();
  });

  it("a network failure lands on error and retry recovers", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    api.failNextWith = new TypeError("fetch failed");
    const ui = new Labeller(api, FREE);
    ui.setEntry("A1");
    await ui.start();
    expect(ui.state.screen).toBe("error");
    expect(ui.state.retryMessage).toBe("fetch failed");
    expect(ui.state.entry).toBe("A1"); // typed text survives the outage

    await ui.retry();
    expect(ui.state.screen).toBe("labelling");
    expect(ui.state.retryMessage).toBeNull();
    expect(ui.state.entry).toBe("A1");
  });

  it("a failing retry stays on the error screen with a fresh banner", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    api.failNextWith = new TypeError("fetch failed");
    const ui = new Labeller(api, FREE);
    await ui.start();
    api.failNextWith = new TypeError("still down");
    await ui.retry();
    expect(ui.state.screen).toBe("error");
    expect(ui.state.retryMessage).toBe("still down");
  });

  it("retry from done or labelling is a no-op", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    const before = api.calls.next;
    await ui.retry();
    expect(api.calls.next).toBe(before);
  });

  it("submit clears the entry, bumps progress, and advances", async () => {
    const api = FakeApi.withItems(["a.pgm", "b.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("123");
    await ui.submit();
    expect(api.labels).toEqual([{ id: "a.pgm", label: "123" }]);
    expect(ui.state.entry).toBe("");
    expect(ui.state.progress).toEqual({ labeled: 1, total: 2 });
    expect(ui.state.current?.id).toBe("b.pgm");
    expect(ui.state.lastError).toBeNull();
  });

  it("the last submit lands on done with full progress", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("7");
    await ui.submit();
    expect(ui.state.screen).toBe("done");
    expect(ui.state.progress).toEqual({ labeled: 1, total: 1 });
  });

  it("a server 400 shows inline and keeps the entry editable", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    api.labelHandler = async () => {
      throw new ApiError(400, "invalid character '!'");
    };
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("2J!");
    await ui.submit();
    expect(ui.state.screen).toBe("labelling");
    expect(ui.state.lastError).toBe("invalid character '!'");
    expect(ui.state.entry).toBe("2J!");
    expect(ui.state.current?.id).toBe("a.pgm"); // same item, nothing lost
  });

  it("a 409 conflict is surfaced inline the same way", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    api.labelHandler = async () => {
      throw new ApiError(409, "'a.pgm' already labelled '123'");
    };
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("456");
    await ui.submit();
    expect(ui.state.lastError).toBe("'a.pgm' already labelled '123'");
    expect(ui.state.screen).toBe("labelling");
  });

  it("a network failure during submit preserves the entry on the error screen", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    api.labelHandler = async () => {
      throw new TypeError("fetch failed");
    };
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("789");
    await ui.submit();
    expect(ui.state.screen).toBe("error");
    expect(ui.state.entry).toBe("789");
  });

  it("local validation rejects without any network call", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, RULE);
    await ui.start();
    ui.setEntry("2jf!");
    await ui.submit();
    expect(api.calls.label).toBe(0);
    expect(ui.state.lastError).toBe("invalid characters 'j', 'f', '!'");
    expect(ui.state.entry).toBe("2jf!");
  });

  it("an empty entry never reaches the server", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    await ui.submit();
    expect(api.calls.label).toBe(0);
    expect(ui.state.lastError).toBe("empty label");
  });

  it("editing the entry clears the inline message", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    await ui.submit(); // empty -> message
    expect(ui.state.lastError).toBe("empty label");
    ui.setEntry("1");
    expect(ui.state.lastError).toBeNull();
  });

  it("only one submit is in flight at a time", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    let release = () => {};
    api.labelHandler = () =>
      new Promise<void>((resolve) => {
        release = () => {
          api.items.shift();
          api.progressValue = { labeled: 1, total: 1 };
          resolve();
        };
      });
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("11");
    const first = ui.submit();
    const second = ui.submit(); // double Enter
    release();
    await Promise.all([first, second]);
    expect(api.calls.label).toBe(1);
    expect(ui.state.progress.labeled).toBe(1);
  });

  it("skip rotates to a different item and drops the stale buffer", async () => {
    const api = FakeApi.withItems(["a.pgm", "b.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("wip");
    await ui.skip();
    expect(api.skips).toEqual(["a.pgm"]);
    expect(ui.state.current?.id).toBe("b.pgm");
    expect(ui.state.entry).toBe(""); // the buffer belonged to a.pgm
  });

  it("skipping the only item brings it back", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    await ui.skip();
    expect(ui.state.current?.id).toBe("a.pgm");
    expect(ui.state.screen).toBe("labelling");
  });

  it("submit and skip are no-ops on the done screen", async () => {
    const api = FakeApi.withItems([]);
    const ui = new Labeller(api, FREE);
    await ui.start();
    ui.setEntry("zzz");
    await ui.submit();
    await ui.skip();
    expect(api.calls.label).toBe(0);
    expect(api.calls.skip).toBe(0);
    expect(ui.state.screen).toBe("done");
  });

  it("every change notifies the listener with the live state", async () => {
    const api = FakeApi.withItems(["a.pgm"]);
    const seen: string[] = [];
    const ui = new Labeller(api, FREE, (s) => {
      seen.push(`${s.screen}:${s.pending ? "busy" : "idle"}`);
    });
    await ui.start();
    expect(seen[0]).toBe("labelling:busy");
    expect(seen[seen.length - 1]).toBe("labelling:idle");
  });
});
