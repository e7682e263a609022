// Incremental server-sent-events decoder. Frames can arrive split across
// arbitrary chunk boundaries, so the decoder buffers until a blank line
// completes a frame.

export interface SseFrame {
  id: string | null;
  event: string | null;
  data: string;
  retryMs: number | null;
}

export class SseDecoder {
  private buffer = "";

  // Feed one chunk of text; returns every frame completed by it.
  push(chunk: string): SseFrame[] {
    this.buffer += chunk.replace(/\r\n/g, "\n").replace(/\r/g, "\n");
    const frames: SseFrame[] = [];
    for (;;) {
      const split = this.buffer.indexOf("\n\n");
      if (split < 0) break;
      const raw = this.buffer.slice(0, split);
      this.buffer = this.buffer.slice(split + 2);
      const frame = parseFrame(raw);
      if (frame) frames.push(frame);
    }
    return frames;
  }
}

function parseFrame(raw: string): SseFrame | null {
  let id: string | null = null;
  let event: string | null = null;
  let retryMs: number | null = null;
  const data: string[] = [];
  let sawField = false;
  for (const line of raw.split("\n")) {
    if (line === "" || line.startsWith(":")) continue; // comment / keepalive
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    sawField = true;
    if (field === "id") id = value;
    else if (field === "event") event = value;
    else if (field === "data") data.push(value);
    else if (field === "retry" && /^\d+$/.test(value)) retryMs = Number(value);
  }
  if (!sawField) return null;
  return { id, event, data: data.join("\n"), retryMs };
}
