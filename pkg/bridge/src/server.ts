import * as net from "net";
import { loadFrames } from "./frames";
import { Box, TrackReply, echoTrack, nccTrack } from "./ncc";

export interface TrackerBackend {
  name: string;
  parallel: boolean;
  track(framesDir: string, numFrames: number, initBox: Box): TrackReply;
}

export function makeTracker(kind: string, radius: number): TrackerBackend {
  if (kind === "echo") {
    return {
      name: "bridge-echo",
      parallel: false,
      track: (dir, n, box) => echoTrack(n, box),
    };
  }
  if (kind === "ncc") {
    return {
      name: "bridge-ncc",
      parallel: false,
      track: (dir, n, box) => nccTrack(loadFrames(dir, n), box, radius),
    };
  }
  throw new Error(`unknown tracker ${kind}`);
}

function isBox(v: unknown): v is Box {
  return Array.isArray(v) && v.length === 4 && v.every((x) => typeof x === "number" && Number.isFinite(x));
}

/**
 * Newline-delimited JSON protocol:
 *   {"cmd":"hello"}    -> {"proto":1,"name":...,"parallel":...}
 *   {"cmd":"track","frames_dir":...,"num_frames":...,"init_box":[x,y,w,h]}
 *                      -> {"boxes":[[...]...],"scores":[...]}
 *   {"cmd":"shutdown"} -> {"ok":true} and the server stops.
 * A malformed request gets {"error": ...} and the connection stays open.
 */
export function createBridgeServer(tracker: TrackerBackend, onShutdown?: () => void): net.Server {
  const server = net.createServer((socket) => {
    let buffer = "";
    socket.on("error", () => socket.destroy());
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf8");
      let idx: number;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        if (line.trim() === "") continue;
        let reply: unknown;
        try {
          reply = handle(line);
        } catch (err) {
          reply = { error: String(err instanceof Error ? err.message : err) };
        }
        socket.write(JSON.stringify(reply) + "\n");
        if ((reply as { ok?: boolean }).ok === true) {
          socket.end();
          server.close();
          if (onShutdown) onShutdown();
        }
      }
    });
  });

  function handle(line: string): unknown {
    let req: unknown;
    try {
      req = JSON.parse(line);
    } catch {
      return { error: "request is not valid JSON" };
    }
    if (typeof req !== "object" || req === null) {
      return { error: "request must be a JSON object" };
    }
    const cmd = (req as { cmd?: unknown }).cmd;
    if (cmd === "hello") {
      return { proto: 1, name: tracker.name, parallel: tracker.parallel };
    }
    if (cmd === "track") {
      const r = req as { frames_dir?: unknown; num_frames?: unknown; init_box?: unknown };
      if (typeof r.frames_dir !== "string") return { error: "frames_dir must be a string" };
      if (typeof r.num_frames !== "number" || !Number.isInteger(r.num_frames) || r.num_frames < 1) {
        return { error: "num_frames must be a positive integer" };
      }
      if (!isBox(r.init_box)) return { error: "init_box must be [x, y, w, h]" };
      return tracker.track(r.frames_dir, r.num_frames, r.init_box);
    }
    if (cmd === "shutdown") {
      return { ok: true };
    }
    return { error: `unknown command ${JSON.stringify(cmd)}` };
  }

  return server;
}
