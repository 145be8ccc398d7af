import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

export interface Frame {
  width: number;
  height: number;
  /** Row-major RGB bytes, 3 per pixel. */
  data: Uint8Array;
}

export function decodePng(filePath: string): Frame {
  const png = PNG.sync.read(fs.readFileSync(filePath));
  const rgb = new Uint8Array(png.width * png.height * 3);
  for (let i = 0, j = 0; i < png.data.length; i += 4, j += 3) {
    rgb[j] = png.data[i];
    rgb[j + 1] = png.data[i + 1];
    rgb[j + 2] = png.data[i + 2];
  }
  return { width: png.width, height: png.height, data: rgb };
}

export function frameName(index: number): string {
  return String(index).padStart(8, "0") + ".png";
}

export function loadFrames(framesDir: string, numFrames: number): Frame[] {
  const frames: Frame[] = [];
  for (let i = 0; i < numFrames; i++) {
    const p = path.join(framesDir, frameName(i));
    if (!fs.existsSync(p)) {
      throw new Error(`missing frame ${p}`);
    }
    frames.push(decodePng(p));
  }
  if (frames.length > 0) {
    const { width, height } = frames[0];
    for (const f of frames) {
      if (f.width !== width || f.height !== height) {
        throw new Error("frames have mixed sizes");
      }
    }
  }
  return frames;
}
