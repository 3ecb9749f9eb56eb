// Server-sent-events subscriber built on fetch streaming so the same code
// runs in browsers and in node-based tests. Reconnects with a short
// backoff until aborted.

import type { StateSnapshot } from "./types.js";

export interface StreamHandle {
  close(): void;
}

export function subscribeState(
  url: string,
  onSnapshot: (snap: StateSnapshot) => void,
  onStatus?: (status: "connecting" | "live" | "closed") => void,
): StreamHandle {
  const controller = new AbortController();
  let closed = false;

  async function consume(): Promise<void> {
    const resp = await fetch(url, {
      headers: { accept: "text/event-stream" },
      signal: controller.signal,
    });
    if (!resp.ok || !resp.body) throw new Error(`stream HTTP ${resp.status}`);
    onStatus?.("live");
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let sep: number;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        for (const line of block.split("\n")) {
          if (line.startsWith("data: ")) {
            try {
              onSnapshot(JSON.parse(line.slice(6)) as StateSnapshot);
            } catch {
              // malformed frame: skip, the next snapshot supersedes it anyway
            }
          }
        }
      }
    }
  }

  (async () => {
    while (!closed) {
      onStatus?.("connecting");
      try {
        await consume();
      } catch {
        if (closed) break;
      }
      if (!closed) await new Promise((r) => setTimeout(r, 1000));
    }
    onStatus?.("closed");
  })();

  return {
    close() {
      closed = true;
      controller.abort();
    },
  };
}
