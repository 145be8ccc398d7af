import * as fs from "fs";
import * as net from "net";
import * as os from "os";
import * as path from "path";
import { PNG } from "pngjs";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { frameName } from "../src/frames";
import { createBridgeServer, makeTracker } from "../src/server";

function writePng(filePath: string, width: number, height: number, fill: (x: number, y: number) => [number, number, number]): void {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const [r, g, b] = fill(x, y);
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = 255;
    }
  }
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

function makeFramesDir(n: number, square: Array<[number, number]>): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-frames-"));
  for (let i = 0; i < n; i++) {
    const [sx, sy] = square[Math.min(i, square.length - 1)];
    writePng(path.join(dir, frameName(i)), 48, 48, (x, y) => {
      if (x >= sx && x < sx + 8 && y >= sy && y < sy + 8) {
        const v = 100 + ((x - sx) * 8 + (y - sy)) % 64;
        return [v, 255 - v, v];
      }
      return [40, 40, 40];
    });
  }
  return dir;
}

class LineClient {
  private socket: net.Socket;
  private buffer = "";
  private waiters: Array<(line: string) => void> = [];

  constructor(port: number) {
    this.socket = net.connect(port, "127.0.0.1");
    this.socket.on("data", (chunk) => {
      this.buffer += chunk.toString("utf8");
      let idx: number;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        const waiter = this.waiters.shift();
        if (waiter) waiter(line);
      }
    });
  }

  sendRaw(raw: string): void {
    this.socket.write(raw);
  }

  request(obj: unknown): Promise<any> {
    return new Promise((resolve) => {
      this.waiters.push((line) => resolve(JSON.parse(line)));
      this.socket.write(JSON.stringify(obj) + "\n");
    });
  }

  nextReply(): Promise<any> {
    return new Promise((resolve) => {
      this.waiters.push((line) => resolve(JSON.parse(line)));
    });
  }

  close(): void {
    this.socket.destroy();
  }
}

describe("bridge server", () => {
  let server: net.Server;
  let port: number;
  let client: LineClient;

  beforeEach(async () => {
    server = createBridgeServer(makeTracker("echo", 16));
    await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
    const addr = server.address() as net.AddressInfo;
    port = addr.port;
    client = new LineClient(port);
  });

  afterEach(() => {
    client.close();
    server.close();
  });

  it("answers hello with protocol 1", async () => {
    const reply = await client.request({ cmd: "hello" });
    expect(reply).toEqual({ proto: 1, name: "bridge-echo", parallel: false });
  });

  it("echo tracker repeats the init box", async () => {
    const dir = makeFramesDir(3, [[10, 10]]);
    const reply = await client.request({
      cmd: "track",
      frames_dir: dir,
      num_frames: 3,
      init_box: [10, 10, 8, 8],
    });
    expect(reply.boxes).toEqual([[10, 10, 8, 8], [10, 10, 8, 8], [10, 10, 8, 8]]);
    expect(reply.scores).toHaveLength(3);
  });

  it("replies with an error for a missing frames dir and stays alive", async () => {
    const nccServer = createBridgeServer(makeTracker("ncc", 8));
    await new Promise<void>((resolve) => nccServer.listen(0, "127.0.0.1", resolve));
    const addr = nccServer.address() as net.AddressInfo;
    const nccClient = new LineClient(addr.port);
    const reply = await nccClient.request({
      cmd: "track",
      frames_dir: "/nonexistent/frames",
      num_frames: 2,
      init_box: [0, 0, 4, 4],
    });
    expect(reply.error).toBeDefined();
    const hello = await nccClient.request({ cmd: "hello" });
    expect(hello.proto).toBe(1);
    nccClient.close();
    nccServer.close();
  });

  it("rejects malformed requests without dying", async () => {
    const bad = ["not json", "{\"cmd\":42}", "[]", "{\"cmd\":\"track\"}", "{}"];
    for (const line of bad) {
      const pending = client.nextReply();
      client.sendRaw(line + "\n");
      const reply = await pending;
      expect(reply.error).toBeDefined();
    }
    const hello = await client.request({ cmd: "hello" });
    expect(hello.proto).toBe(1);
  });

  it("survives 100 random fuzz lines", async () => {
    let state = 12345;
    const rand = () => {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      return state / 0x7fffffff;
    };
    // fire-and-forget garbage (possibly empty lines), ignore any replies
    const garbage = new LineClient(port);
    for (let i = 0; i < 100; i++) {
      const len = Math.floor(rand() * 40);
      let line = "";
      for (let j = 0; j < len; j++) {
        line += String.fromCharCode(33 + Math.floor(rand() * 90));
      }
      garbage.sendRaw(line + "\n");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
    garbage.close();
    const hello = await client.request({ cmd: "hello" });
    expect(hello.proto).toBe(1);
  });

  it("shuts down on request", async () => {
    const reply = await client.request({ cmd: "shutdown" });
    expect(reply).toEqual({ ok: true });
  });
});

describe("ncc tracker backend", () => {
  it("follows a translated textured square", async () => {
    const server = createBridgeServer(makeTracker("ncc", 8));
    await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
    const addr = server.address() as net.AddressInfo;
    const client = new LineClient(addr.port);
    const dir = makeFramesDir(3, [[10, 10], [13, 14], [16, 18]]);
    const reply = await client.request({
      cmd: "track",
      frames_dir: dir,
      num_frames: 3,
      init_box: [10, 10, 8, 8],
    });
    expect(reply.boxes[1]).toEqual([13, 14, 8, 8]);
    expect(reply.boxes[2]).toEqual([16, 18, 8, 8]);
    expect(reply.scores[1]).toBeCloseTo(1.0, 9);
    client.close();
    server.close();
  });
});
